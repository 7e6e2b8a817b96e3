import math

import numpy as np
import pytest

from bsemwave.bsem import ConstantKernel, VariableKernel
from bsemwave.couple import assemble_coupled, outer_kernel, solve_coupled
from bsemwave.greens import incident_field
from bsemwave.mesh import CouplingError, build_structured_mesh
from bsemwave.waves import CircularShoal, Constant, SlopeEllipticShoal, WaveEnvironment, solve_dispersion


@pytest.fixture(scope="module")
def null_run():
    env = WaveEnvironment(2 * math.pi / 0.511, theta=0.3)
    mesh = build_structured_mesh((0, 1.2, 0, 1.2), 5, 5, 6)
    system = assemble_coupled(mesh, env, Constant(0.15))
    return mesh, env, system, solve_coupled(system)


def test_null_scatterer_reproduces_incident_wave(null_run):
    mesh, env, system, sol = null_run
    k = solve_dispersion(env.omega, 0.15)
    exact, _ = incident_field(None, env, mesh.nodes, k=k)
    assert np.max(np.abs(sol.phi_hat - exact)) < 5e-4
    assert sol.residual < 1e-10
    assert np.allclose(sol.height_norm, 1.0, atol=5e-4)


def test_schur_matches_direct_solve(null_run):
    mesh, env, system, sol = null_run
    A = system.sem.A.toarray()
    bn = mesh.boundary_nodes
    N = mesh.n_nodes
    Hf = np.zeros((system.bsem.H.shape[0], N), complex)
    Hf[:, bn] = system.bsem.H
    M = np.block([[A, system.C.toarray()], [Hf, -system.bsem.G]])
    rhs = np.concatenate([np.zeros(N), system.bsem.phi_in])
    direct = np.linalg.solve(M, rhs)
    assert np.max(np.abs(direct[:N] - sol.phi_hat)) < 1e-9
    assert np.max(np.abs(direct[N:] - sol.q)) < 1e-9 * np.max(np.abs(sol.q))


def test_flux_coupling_integrates_perimeter(null_run):
    _, _, system, _ = null_run
    assert system.C.sum() == pytest.approx(4.8)
    assert system.C.shape[1] == system.bsem.layout.n_flux


def test_outer_kernel_choice():
    env = WaveEnvironment.from_period(1.0)
    m = build_structured_mesh((0, 2.4, 0, 2.4), 2, 2, 2)
    assert isinstance(outer_kernel(env, CircularShoal(), m), ConstantKernel)
    big = build_structured_mesh((-10, 12, -10, 10), 2, 2, 2)
    assert isinstance(outer_kernel(env, SlopeEllipticShoal(), big), VariableKernel)
    with pytest.raises(CouplingError):
        outer_kernel(env, CircularShoal(), build_structured_mesh((0.5, 1.5, 0.5, 1.5), 2, 2, 2))


def test_shared_corners_less_accurate():
    env = WaveEnvironment(2 * math.pi / 0.511, theta=0.3)
    mesh = build_structured_mesh((0, 1.2, 0, 1.2), 5, 5, 6)
    k = solve_dispersion(env.omega, 0.15)
    exact, _ = incident_field(None, env, mesh.nodes, k=k)
    errs = {}
    for mode in ("shared", "split"):
        sol = solve_coupled(assemble_coupled(mesh, env, Constant(0.15), corner_mode=mode))
        errs[mode] = np.max(np.abs(sol.phi_hat - exact))
    assert errs["split"] < errs["shared"]
