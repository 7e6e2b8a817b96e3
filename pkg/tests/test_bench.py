import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsemwave import bench
from bsemwave.mesh import build_structured_mesh


@pytest.fixture(scope="module")
def mesh():
    return build_structured_mesh((0, 2.4, 0, 2.4), 3, 2, 4)


def test_error_norms_trivial(mesh, rng):
    f = rng.normal(size=mesh.n_nodes) + 1j * rng.normal(size=mesh.n_nodes) + 3
    assert bench.error_linf(f, f) == 0
    assert bench.error_relative(f, f, mesh) == 0
    assert bench.error_linf(f + 1e-3, f) == pytest.approx(1e-3)
    assert bench.error_relative(2 * f, f, mesh) == pytest.approx(1.0)
    with pytest.raises(bench.BenchmarkError):
        bench.error_relative(f, np.zeros_like(f), mesh)
    with pytest.raises(bench.BenchmarkError):
        bench.error_linf(f, f[:-1])


def test_integrate_field_exact_for_polynomials(mesh):
    x, y = mesh.nodes.T
    assert bench.integrate_field(x**2 * y, mesh) == pytest.approx(2.4**3 / 3 * 2.4**2 / 2)


def test_interpolation_between_orders():
    coarse = build_structured_mesh((0, 1, 0, 1), 2, 2, 3)
    fine = build_structured_mesh((0, 1, 0, 1), 2, 2, 7)
    f = lambda X: X[:, 0] ** 3 - 2 * X[:, 0] * X[:, 1] ** 2  # noqa: E731
    vals = bench.evaluate_field(f(coarse.nodes), coarse, fine.nodes)
    assert np.allclose(vals, f(fine.nodes), atol=1e-13)
    assert bench.error_relative(f(coarse.nodes), f(fine.nodes), fine, computed_mesh=coarse) < 1e-13
    with pytest.raises(bench.BenchmarkError):
        bench.evaluate_field(f(coarse.nodes), coarse, [[1.5, 0.5]])


def test_profile_properties(mesh, rng):
    const = np.full(mesh.n_nodes, 2.0 + 1j)
    s, v = bench.extract_profile(const, mesh, ("y", 1.2), 50)
    assert np.allclose(v, 2.0 + 1j) and len(s) == 50
    f = rng.normal(size=mesh.n_nodes) + 1j * rng.normal(size=mesh.n_nodes)
    g = rng.normal(size=mesh.n_nodes)
    # sampling at nodes on the line returns nodal values exactly
    on = np.flatnonzero(np.abs(mesh.nodes[:, 0] - 1.2) < 1e-14)
    s, v = bench.extract_profile(f, mesh, ("x", 1.2), mesh.nodes[on, 1])
    assert np.allclose(v, f[on], atol=1e-13)
    _, a = bench.extract_profile(2 * f - 3j * g, mesh, ("y", 0.7), 31)
    _, b1 = bench.extract_profile(f, mesh, ("y", 0.7), 31)
    _, b2 = bench.extract_profile(g, mesh, ("y", 0.7), 31)
    assert np.allclose(a, 2 * b1 - 3j * b2)
    with pytest.raises(bench.BenchmarkError):
        bench.extract_profile(f, mesh, ("y", 3.0))
    with pytest.raises(bench.BenchmarkError):
        bench.extract_profile(f, mesh, ("z", 1.0))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 20), min_size=1, max_size=6))
def test_benchmark_spec_orders(ps):
    increasing = all(b > a for a, b in zip(ps, ps[1:]))
    if increasing:
        assert bench.BenchmarkSpec("plane_wave", 1, 1, ps).p == tuple(ps)
    else:
        with pytest.raises(bench.BenchmarkError):
            bench.BenchmarkSpec("plane_wave", 1, 1, ps)


def test_spec_and_report_validation():
    with pytest.raises(bench.BenchmarkError):
        bench.BenchmarkSpec("unknown", 1, 1, (2,))
    with pytest.raises(bench.BenchmarkError):
        bench.ErrorReport(2, 3, 10, linf_error=-1.0)
    with pytest.raises(bench.BenchmarkError):
        bench.plane_wave_mesh(0.3, 2)
    with pytest.raises(bench.BenchmarkError):
        bench.run_plane_wave(0.2, [3], "fem")


def test_reference_cache(tmp_path):
    calls = []

    class Fake:
        class solution:
            phi_hat = np.arange(4) + 1j
            residual = 0.0

    def runner():
        calls.append(1)
        return Fake

    cfg = {"a": 1}
    a = bench.load_or_run_reference("demo", 3, cfg, runner, tmp_path)
    b = bench.load_or_run_reference("demo", 3, cfg, runner, tmp_path)
    assert len(calls) == 1 and np.array_equal(a, b)
    bench.load_or_run_reference("demo", 3, {"a": 2}, runner, tmp_path)
    assert len(calls) == 2


def test_circular_shoal_small_run():
    res = bench.run_circular_shoal(4, p_ref=4, samples=121)
    assert res.report.relative_error == 0.0
    assert res.solution.residual < 1e-10
    prof = res.profiles[("y", 1.2)]
    # focusing behind the shoal
    assert prof.height_norm.max() > 1.5
    assert prof.coord[np.argmax(prof.height_norm)] > 1.2
    assert np.all(np.diff(res.mesh.nodes[res.mesh.boundary_nodes][:, 0][:5]) > 0)


def test_elliptic_setup_amplitude():
    mesh, env, bat = bench.elliptic_shoal_setup(2)
    assert len(mesh.elements) == 1200 and len(mesh.boundary_elements) == 140
    assert env.theta == pytest.approx(math.radians(20))
    # incident amplitude gives H = 0.01058 m in the deep region
    ccg = bat.ccg(env.omega, -20.0, 0.0)
    assert 2 * env.omega * abs(env.amplitude) / math.sqrt(ccg) / 9.81 == pytest.approx(0.01058)
    assert bat.depth(0.0, 0.0) == pytest.approx(0.133)
