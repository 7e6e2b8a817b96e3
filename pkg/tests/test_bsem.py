import math

import mpmath as mp
import numpy as np
import pytest

from bsemwave.bench import run_plane_wave
from bsemwave.bsem import (
    BoundaryLoop, ConstantKernel, assemble_bsem, collocation_rows, flux_layout, free_term, graded_rule,
    integrate_singular, regular_rule, singular_rule,
)
from bsemwave.mesh import CouplingError, build_structured_mesh
from bsemwave.specbasis import lagrange_matrix, lgl_rule


def _segment(p, length):
    r = lgl_rule(p)
    xs = 0.5 * (r.nodes + 1) * length
    return BoundaryLoop(p, np.column_stack([xs, np.zeros(p + 1)]), np.arange(p + 1)[None, :], np.full(p + 1, math.pi))


@pytest.mark.parametrize("p,length,k,m0", [(4, 0.3, 10.0, 0), (7, 1.0, 2.0, 3), (10, 0.1, 18.0, 10)])
def test_singular_g_against_mpmath(p, length, k, m0):
    mp.mp.dps = 25
    r = lgl_rule(p)
    xi0 = float(r.nodes[m0])
    _, g = integrate_singular(_segment(p, length), 0, xi0, k)
    A = length / 2
    for m in (0, p // 2, p):
        def f(x, m=m):
            if x == xi0:
                return 0
            lm = lagrange_matrix(r, [float(x)])[0, m]
            return 0.25j * mp.hankel1(0, k * A * abs(x - xi0)) * lm * A
        pts = [-1, xi0, 1] if -1 < xi0 < 1 else [-1, 1]
        exact = complex(mp.quad(f, pts))
        assert abs(g[m] - exact) / abs(exact) < 1e-10


def test_singular_h_vanishes_on_straight_element():
    h, _ = integrate_singular(_segment(5, 0.4), 0, 0.0, 6.0)
    assert np.max(np.abs(h)) < 1e-15


def test_rules_integrate_smooth_functions():
    for xi, w in (singular_rule(0.3), graded_rule(1.0, 0.01), regular_rule(0.2, 1.0, 4, 0.5)):
        assert np.all((xi >= -1) & (xi <= 1))
        assert w.sum() == pytest.approx(2.0, rel=1e-13)
        assert w @ np.cos(xi) == pytest.approx(2 * math.sin(1.0), rel=1e-12)


def test_free_term():
    assert free_term(math.pi) == 0.5 == free_term(math.pi, "interior")
    assert free_term(math.pi / 2) == 0.75
    assert free_term(math.pi / 2, "interior") == 0.25
    with pytest.raises(ValueError):
        free_term(1.0, "sideways")


def test_layout_and_rows():
    loop = BoundaryLoop.from_mesh(build_structured_mesh((0, 2, 0, 1), 4, 2, 3))
    assert len(loop.corners) == 4
    shared = flux_layout(loop, "shared")
    split = flux_layout(loop, "split")
    assert shared.n_flux == loop.n_nodes and split.n_flux == loop.n_nodes + 4
    rows = collocation_rows(loop, "split")
    assert len(rows) == split.n_flux
    assert len(collocation_rows(loop, "node")) == loop.n_nodes
    with pytest.raises(ValueError):
        flux_layout(loop, "bogus")
    with pytest.raises(ValueError):
        collocation_rows(loop, "bogus")


def test_exterior_identity_for_incident_wave():
    """With no scatterer the total field is the incident wave, so the
    exterior equation H phi - G q = phi_in holds for phi = phi_in and q its
    derivative along the normal pointing into the loop (off-corner rows
    included)."""
    mesh = build_structured_mesh((0, 1, 0, 1), 4, 4, 8)
    loop = BoundaryLoop.from_mesh(mesh)
    k, th = 6.0, 0.4
    kern = ConstantKernel(k)
    from bsemwave.waves import WaveEnvironment
    env = WaveEnvironment(1.0, th)
    s = assemble_bsem(loop, kern, env)
    X = loop.nodes
    phi = np.exp(1j * k * (X[:, 0] * math.cos(th) + X[:, 1] * math.sin(th)))
    q = np.zeros(s.layout.n_flux, complex)
    r = lgl_rule(loop.p)
    for b in range(loop.n_elements):
        _, dx, _ = loop.geometry(np.full(loop.p + 1, b), r.nodes)
        t = dx / np.hypot(dx[:, 0], dx[:, 1])[:, None]
        n_in = np.column_stack([-t[:, 1], t[:, 0]])  # left of a CCW loop
        grad = 1j * k * np.array([math.cos(th), math.sin(th)])
        q[s.layout.slots[b]] = (n_in @ grad) * phi[loop.elements[b]]
    res = s.H @ phi - s.G @ q - s.phi_in
    assert np.max(np.abs(res)) < 1e-8


def test_plane_wave_bsem_converges():
    errs = [r.linf_error for r in run_plane_wave(1 / 5, [4, 6, 8], "bsem")]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-8


def test_standalone_count_mismatch():
    from bsemwave.bsem import solve_standalone
    loop = BoundaryLoop.from_mesh(build_structured_mesh((0, 1, 0, 1), 1, 1, 2))
    s = assemble_bsem(loop, ConstantKernel(1.0), side="interior", corner_rows="node")
    with pytest.raises(CouplingError):
        solve_standalone(s, loop, {}, {})
