
import numpy as np
import pytest

from bsemwave.bench import run_plane_wave
from bsemwave.mesh import build_structured_mesh
from bsemwave.sem import assemble_sem, element_mass_gauss
from bsemwave.waves import CircularShoal, Constant, WaveEnvironment


@pytest.fixture
def env():
    return WaveEnvironment.from_period(0.511)


def test_operator_properties(env):
    m = build_structured_mesh((0, 2.4, 0, 2.4), 4, 4, 5)
    s = assemble_sem(m, env, CircularShoal())
    K = s.K.toarray()
    assert np.allclose(K, K.T, atol=1e-12)
    assert np.allclose(K @ np.ones(m.n_nodes), 0, atol=1e-11)
    x = m.nodes[:, 0]
    assert x @ K @ x == pytest.approx(2.4 * 2.4, rel=1e-12)  # int |grad x|^2
    M = s.M.tocoo()
    assert np.all(M.row == M.col)
    # M = int khat^2 L_i L_j: total is int khat^2
    ones = np.ones(m.n_nodes)
    assert ones @ s.M @ ones > 0


def test_boundary_matrix_integrates_length(env):
    m = build_structured_mesh((0, 2, 0, 1), 3, 2, 4)
    s = assemble_sem(m, env, Constant(0.15))
    assert np.sum(s.C.toarray()) == pytest.approx(6.0)


def test_adaptive_mass_only_on_kinked_elements(env):
    m = build_structured_mesh((0, 2.4, 0, 2.4), 4, 4, 4)
    lgl = assemble_sem(m, env, CircularShoal())
    ad = assemble_sem(m, env, CircularShoal(), mass_quadrature="adaptive")
    assert (ad.M - lgl.M).nnz > 0
    flat = assemble_sem(m, env, Constant(0.15), mass_quadrature="adaptive")
    assert (flat.M - assemble_sem(m, env, Constant(0.15)).M).nnz == 0
    with pytest.raises(ValueError):
        assemble_sem(m, env, Constant(0.15), mass_quadrature="bogus")


def test_gauss_mass_block_is_symmetric(env):
    m = build_structured_mesh((0, 1, 0, 1), 1, 1, 3)
    B = element_mass_gauss(m, 0, lambda x, y: np.full(np.shape(x), 2.0))
    assert np.allclose(B, B.T) and B.sum() == pytest.approx(4.0)


def test_plane_wave_sem_converges():
    reps = run_plane_wave(1 / 5, [4, 6, 8], "sem")
    errs = [r.linf_error for r in reps]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-6
