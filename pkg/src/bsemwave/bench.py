"""Benchmark drivers: plane-wave convergence, circular shoal, elliptic shoal.

Each driver returns plain dataclasses holding nodal fields and error
reports; writing files is left to :mod:`bsemwave.cli`.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bsem import BoundaryLoop, ConstantKernel, assemble_bsem, solve_standalone
from .couple import CoupledSystem, FieldSolution, assemble_coupled, solve_coupled
from .greens import KernelAccuracyWarning
from .mesh import SpectralMesh, build_structured_mesh
from .sem import assemble_sem, solve_sem_bvp
from .specbasis import lagrange_matrix
from .waves import G, CircularShoal, Constant, SlopeEllipticShoal, WaveEnvironment, solve_dispersion, velocities

CASES = ("plane_wave", "circular_shoal", "elliptic_shoal")

PLANE_WAVE = dict(domain=(0.0, 2.0, 0.0, 1.0), k=15.0, theta=math.pi / 6)
PLANE_WAVE_SIZES = (1 / 15, 1 / 5, 1 / 3)
CIRCULAR_SHOAL = dict(domain=(0.0, 2.4, 0.0, 2.4), nx=10, ny=10, period=0.511, theta=0.0, p_ref=15)
ELLIPTIC_SHOAL = dict(domain=(-10.0, 12.0, -10.0, 10.0), nx=40, ny=30, period=1.0,
                      theta=math.radians(20.0), height=0.01058)

# sections along which profiles are reported: (axis, value) means the line axis = value
CIRCULAR_SECTIONS = (("y", 1.2), ("y", 1.4), ("x", 2.0), ("x", 2.4))
ELLIPTIC_SECTIONS = (("x", 1.0), ("x", 3.0), ("x", 5.0), ("x", 7.0), ("x", 9.0),
                     ("y", -2.0), ("y", 0.0), ("y", 2.0))
ELLIPTIC_SECTION_RANGE = {"x": (-5.0, 5.0), "y": (0.0, 10.0)}

REFERENCE_VERSION = 1


class BenchmarkError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkSpec:
    case: str
    nx: int
    ny: int
    p: tuple
    period: float | None = None
    omega: float | None = None
    theta: float = 0.0
    height: float | None = None
    output: str | None = None

    def __post_init__(self):
        if self.case not in CASES:
            raise BenchmarkError(f"unknown case {self.case!r}")
        ps = tuple(int(v) for v in self.p)
        if not ps or any(b <= a for a, b in zip(ps, ps[1:])):
            raise BenchmarkError("order sweep must be non-empty and strictly increasing")
        object.__setattr__(self, "p", ps)


@dataclass(frozen=True)
class ErrorReport:
    p: int
    n: int
    dof: int
    linf_error: float = float("nan")
    relative_error: float = float("nan")
    runtime_s: float = 0.0

    def __post_init__(self):
        for v in (self.linf_error, self.relative_error):
            if v < 0:
                raise BenchmarkError("errors are non-negative")


@dataclass
class CaseResult:
    """A coupled benchmark run: mesh, system, solution and extras."""

    case: str
    p: int
    mesh: SpectralMesh
    system: CoupledSystem
    solution: FieldSolution
    report: ErrorReport
    profiles: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# error norms and interpolation
# ---------------------------------------------------------------------------


def error_linf(computed, exact) -> float:
    """max |computed - exact| over matching node sets."""
    a = np.asarray(computed)
    b = np.asarray(exact)
    if a.shape != b.shape:
        raise BenchmarkError(f"node sets differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def _locate(mesh: SpectralMesh, points):
    x0, x1, y0, y1 = mesh.bounds
    nx, ny = mesh.shape
    pts = np.atleast_2d(np.asarray(points, float))
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    out = (pts[:, 0] < x0 - tol) | (pts[:, 0] > x1 + tol) | (pts[:, 1] < y0 - tol) | (pts[:, 1] > y1 + tol)
    if np.any(out):
        bad = pts[np.argmax(out)]
        raise BenchmarkError(f"point ({bad[0]:g}, {bad[1]:g}) lies outside the mesh")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    ei = np.clip(np.floor((pts[:, 0] - x0) / hx).astype(int), 0, nx - 1)
    ej = np.clip(np.floor((pts[:, 1] - y0) / hy).astype(int), 0, ny - 1)
    xi = np.clip(2 * (pts[:, 0] - (x0 + ei * hx)) / hx - 1, -1.0, 1.0)
    zeta = np.clip(2 * (pts[:, 1] - (y0 + ej * hy)) / hy - 1, -1.0, 1.0)
    return ej * nx + ei, xi, zeta


def evaluate_field(values, mesh: SpectralMesh, points) -> np.ndarray:
    """Spectral interpolation of nodal values at arbitrary points of a
    structured mesh (tensor Lagrange basis of the containing element)."""
    values = np.asarray(values)
    e, xi, zeta = _locate(mesh, points)
    rule = mesh.rule
    Lx = lagrange_matrix(rule, xi)
    Ly = lagrange_matrix(rule, zeta)
    n = rule.p + 1
    V = values[mesh.elements[e]].reshape(len(e), n, n)  # [point, j, i]
    return np.einsum("nj,nji,ni->n", Ly, V, Lx)


def _element_weights(mesh: SpectralMesh) -> np.ndarray:
    rule = mesh.rule
    x0, x1, y0, y1 = mesh.bounds
    nx, ny = mesh.shape
    jac = (x1 - x0) / nx * (y1 - y0) / ny / 4
    return np.outer(rule.weights, rule.weights).ravel() * jac  # local index j*(p+1)+i


def integrate_field(values, mesh: SpectralMesh) -> complex:
    """Element-wise LGL quadrature of a nodal field."""
    w = _element_weights(mesh)
    return complex(np.sum(np.asarray(values)[mesh.elements] * w[None, :]))


def error_relative(computed, reference, mesh: SpectralMesh, computed_mesh: SpectralMesh | None = None) -> float:
    """|int (phi - phi_R) / int phi_R| on the reference mesh's LGL grid.

    When ``computed_mesh`` is given the computed field is first interpolated
    onto the reference nodes.
    """
    ref = np.asarray(reference)
    if computed_mesh is not None and computed_mesh is not mesh:
        comp = evaluate_field(computed, computed_mesh, mesh.nodes)
    else:
        comp = np.asarray(computed)
    den = integrate_field(ref, mesh)
    if den == 0:
        raise BenchmarkError("reference field integrates to zero; relative error undefined")
    return float(abs(integrate_field(comp - ref, mesh) / den))


@dataclass(frozen=True)
class Profile:
    axis: str
    value: float
    coord: np.ndarray
    phi_hat: np.ndarray
    height_norm: np.ndarray


def extract_profile(values, mesh: SpectralMesh, line, samples=201, span=None) -> tuple:
    """Field along ``line = (axis, value)``: axis "x" means the line x = value.

    Returns ``(coord, interpolated values)``; ``coord`` runs along the other
    axis over ``span`` (default the full mesh extent).  ``samples`` is a count
    or an explicit array of coordinates.
    """
    axis, value = line
    x0, x1, y0, y1 = mesh.bounds
    if axis == "x":
        lo, hi = (y0, y1) if span is None else span
        inside = x0 <= value <= x1
    elif axis == "y":
        lo, hi = (x0, x1) if span is None else span
        inside = y0 <= value <= y1
    else:
        raise BenchmarkError(f"line axis must be 'x' or 'y', got {axis!r}")
    if not inside:
        raise BenchmarkError(f"section {axis} = {value} lies outside the domain")
    s = np.linspace(lo, hi, samples) if np.ndim(samples) == 0 else np.asarray(samples, float)
    pts = np.column_stack([np.full_like(s, value), s]) if axis == "x" else np.column_stack([s, np.full_like(s, value)])
    return s, evaluate_field(values, mesh, pts)


def height_profile(result: CaseResult, line, samples=201, span=None) -> Profile:
    """Normalised wave height along a section of a coupled run."""
    system = result.system
    s, ph = extract_profile(result.solution.phi_hat, result.mesh, line, samples, span)
    axis, value = line
    x = np.full_like(s, value) if axis == "x" else s
    y = s if axis == "x" else np.full_like(s, value)
    ccg = system.bathymetry.ccg(system.env.omega, x, y)
    h = 2 * system.env.omega * np.abs(ph / np.sqrt(ccg)) / G
    h0 = 2 * system.env.omega * abs(system.env.amplitude) / (G * math.sqrt(system.ccg_ref))
    return Profile(axis, float(value), s, ph, h / h0)


# ---------------------------------------------------------------------------
# plane wave
# ---------------------------------------------------------------------------


def _plane_exact(points, k, theta):
    pts = np.atleast_2d(points)
    val = np.exp(1j * k * (pts[:, 0] * math.cos(theta) + pts[:, 1] * math.sin(theta)))
    return val, 1j * k * math.sin(theta) * val


def plane_wave_mesh(h: float, p: int) -> SpectralMesh:
    x0, x1, y0, y1 = PLANE_WAVE["domain"]
    nx, ny = round((x1 - x0) / h), round((y1 - y0) / h)
    if abs(nx * h - (x1 - x0)) > 1e-9 or abs(ny * h - (y1 - y0)) > 1e-9:
        raise BenchmarkError(f"element size {h} does not divide the domain")
    return build_structured_mesh(PLANE_WAVE["domain"], nx, ny, p)


def _plane_wave_sem(mesh, k, theta):
    env = WaveEnvironment(1.0, theta)
    system = assemble_sem(mesh, env, Constant(1.0), khat_fn=lambda x, y: np.full(np.shape(x), k))
    X = mesh.nodes
    bn = mesh.boundary_nodes
    xb = X[bn]
    x0, x1, y0, y1 = PLANE_WAVE["domain"]
    on_x = (np.abs(xb[:, 0] - x0) < 1e-12) | (np.abs(xb[:, 0] - x1) < 1e-12)
    val, dy = _plane_exact(xb, k, theta)
    ny = np.where(np.abs(xb[:, 1] - y0) < 1e-12, -1.0, 1.0)
    flux = np.where(on_x, 0.0, ny * dy)
    phi = solve_sem_bvp(system, bn[on_x], val[on_x], neumann_flux=flux)
    exact, _ = _plane_exact(X, k, theta)
    return error_linf(phi, exact), len(X)


def _plane_wave_bsem(mesh, k, theta):
    loop = BoundaryLoop.from_mesh(mesh)
    system = assemble_bsem(loop, ConstantKernel(k), side="interior", corner_mode="split", corner_rows="node")
    X = loop.nodes
    x0, x1, y0, y1 = PLANE_WAVE["domain"]
    val, _ = _plane_exact(X, k, theta)
    on_x = (np.abs(X[:, 0] - x0) < 1e-12) | (np.abs(X[:, 0] - x1) < 1e-12)
    phi_known = {int(i): val[i] for i in np.flatnonzero(on_x)}
    q_known = {}
    for b in range(loop.n_elements):
        ids = loop.elements[b]
        xy = X[ids]
        if np.ptp(xy[:, 1]) < 1e-12:  # top or bottom side
            sign = -1.0 if abs(xy[0, 1] - y0) < 1e-12 else 1.0
            _, dy = _plane_exact(xy, k, theta)
            for m, slot in enumerate(system.layout.slots[b]):
                q_known[int(slot)] = sign * dy[m]
    phi, _ = solve_standalone(system, loop, phi_known, q_known)
    return error_linf(phi, val), loop.n_nodes


def run_plane_wave(h: float = 1 / 5, p_values=range(2, 13), method: str = "sem",
                   k: float = PLANE_WAVE["k"], theta: float = PLANE_WAVE["theta"]) -> list[ErrorReport]:
    """L-infinity error of the exact plane wave solved as a boundary-value
    problem (values on x = 0, 2; normal derivative on y = 0, 1)."""
    method = method.lower()
    if method not in ("sem", "bsem"):
        raise BenchmarkError(f"method must be 'sem' or 'bsem', got {method!r}")
    ps = list(p_values)
    BenchmarkSpec("plane_wave", 1, 1, tuple(ps))
    out = []
    for p in ps:
        t0 = time.perf_counter()
        mesh = plane_wave_mesh(h, p)
        err, dof = (_plane_wave_sem if method == "sem" else _plane_wave_bsem)(mesh, k, theta)
        out.append(ErrorReport(p, p + 1, dof, linf_error=err, runtime_s=time.perf_counter() - t0))
    return out


# ---------------------------------------------------------------------------
# coupled cases
# ---------------------------------------------------------------------------


def _run_coupled(case, mesh, env, bathymetry, **kw) -> CaseResult:
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", KernelAccuracyWarning)
        system = assemble_coupled(mesh, env, bathymetry, **kw)
        solution = solve_coupled(system)
    msgs = [str(w.message) for w in caught if issubclass(w.category, KernelAccuracyWarning)]
    for w in caught:
        if not issubclass(w.category, KernelAccuracyWarning):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    for m in sorted(set(msgs)):
        warnings.warn(m, KernelAccuracyWarning, stacklevel=3)
    dof = mesh.n_nodes + system.bsem.layout.n_flux
    report = ErrorReport(mesh.p, mesh.p + 1, dof, runtime_s=time.perf_counter() - t0)
    return CaseResult(case, mesh.p, mesh, system, solution, report, warnings=sorted(set(msgs)))


def circular_shoal_setup(p: int, nx: int = CIRCULAR_SHOAL["nx"], ny: int = CIRCULAR_SHOAL["ny"],
                         period: float = CIRCULAR_SHOAL["period"], theta: float = CIRCULAR_SHOAL["theta"]):
    mesh = build_structured_mesh(CIRCULAR_SHOAL["domain"], nx, ny, p)
    return mesh, WaveEnvironment.from_period(period, theta), CircularShoal()


def _config_hash(d: dict) -> str:
    return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def reference_path(cache_dir, case: str, p: int, config: dict) -> Path:
    return Path(cache_dir) / f"{case}_p{p}_{_config_hash(config)}.npz"


def load_or_run_reference(case: str, p: int, config: dict, runner, cache_dir=None):
    """Nodal reference field, read from ``cache_dir`` when a file with the
    same case, order and configuration hash exists."""
    path = reference_path(cache_dir, case, p, config) if cache_dir is not None else None
    if path is not None and path.exists():
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") == REFERENCE_VERSION and meta.get("config") == config:
                return data["phi_hat"]
    res = runner()
    phi = res.solution.phi_hat
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = dict(version=REFERENCE_VERSION, case=case, p=p, config=config,
                    residual=res.solution.residual)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, phi_hat=phi, meta=np.array(json.dumps(meta, sort_keys=True)))
        tmp.replace(path)
    return phi


def run_circular_shoal(p: int, p_ref: int | None = CIRCULAR_SHOAL["p_ref"], cache_dir=None,
                       sections=CIRCULAR_SECTIONS, samples: int = 241, **kw) -> CaseResult:
    """Coupled run over the circular shoal; relative error against a
    higher-order reference run when ``p_ref`` is given."""
    mesh, env, bat = circular_shoal_setup(p, **kw)
    res = _run_coupled("circular_shoal", mesh, env, bat)
    if p_ref is not None:
        if p_ref == p:
            ref_phi, ref_mesh = res.solution.phi_hat, mesh
        else:
            config = dict(case="circular_shoal", **{k: v for k, v in CIRCULAR_SHOAL.items() if k != "p_ref"}, **kw)
            config["domain"] = list(config["domain"])
            ref_mesh, env_r, bat_r = circular_shoal_setup(p_ref, **kw)
            ref_phi = load_or_run_reference(
                "circular_shoal", p_ref, config,
                lambda: _run_coupled("circular_shoal", ref_mesh, env_r, bat_r), cache_dir)
        rel = error_relative(res.solution.phi_hat, ref_phi, ref_mesh, computed_mesh=mesh)
        res.report = ErrorReport(res.report.p, res.report.n, res.report.dof,
                                 relative_error=rel, runtime_s=res.report.runtime_s)
    for line in sections:
        res.profiles[line] = height_profile(res, line, samples)
    return res


def elliptic_shoal_setup(p: int, nx: int = ELLIPTIC_SHOAL["nx"], ny: int = ELLIPTIC_SHOAL["ny"],
                         period: float = ELLIPTIC_SHOAL["period"], theta: float = ELLIPTIC_SHOAL["theta"],
                         height: float = ELLIPTIC_SHOAL["height"], domain=ELLIPTIC_SHOAL["domain"]):
    """Mesh, environment and bed; the incident potential amplitude is set so
    that the wave height in the deep flat region equals ``height``."""
    mesh = build_structured_mesh(domain, nx, ny, p)
    omega = 2 * math.pi / period
    bat = SlopeEllipticShoal()
    h_deep = float(bat.outer_profile().depth(bat.outer_profile().a - 1.0))
    k = solve_dispersion(omega, h_deep)
    c, cg = velocities(k, h_deep, omega)
    amp = height * G * math.sqrt(c * cg) / (2 * omega)
    return mesh, WaveEnvironment(omega, theta, amp), bat


def run_elliptic_shoal(p: int, sections=ELLIPTIC_SECTIONS, samples: int = 201, kernel_cache=None,
                       **kw) -> CaseResult:
    """Coupled run over the sloping bed with the elliptic shoal, using the
    x-varying kernel outside the loop."""
    from .bsem import VariableKernel
    from .greens import TransformedProfile

    mesh, env, bat = elliptic_shoal_setup(p, **kw)
    kernel = VariableKernel(TransformedProfile.from_bathymetry(env.omega, bat.outer_profile()),
                            cache=kernel_cache)
    res = _run_coupled("elliptic_shoal", mesh, env, bat, kernel=kernel)
    for line in sections:
        res.profiles[line] = height_profile(res, line, samples, span=ELLIPTIC_SECTION_RANGE[line[0]])
    return res


def self_convergence(coarse: CaseResult, fine: CaseResult) -> float:
    """Relative difference of two runs on the same element layout,
    integrated on the finer grid."""
    return error_relative(coarse.solution.phi_hat, fine.solution.phi_hat, fine.mesh, computed_mesh=coarse.mesh)


def height_grid(result: CaseResult, region, grid: int = 201):
    """H/H0 sampled on a ``grid`` x ``grid`` lattice over ``region``;
    returns (gx, gy, phi_hat, H) with arrays indexed [ix, iy]."""
    x0, x1, y0, y1 = region
    gx, gy = np.linspace(x0, x1, grid), np.linspace(y0, y1, grid)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    ph = evaluate_field(result.solution.phi_hat, result.mesh, pts)
    sys_ = result.system
    ccg = sys_.bathymetry.ccg(sys_.env.omega, pts[:, 0], pts[:, 1])
    h0 = 2 * sys_.env.omega * abs(sys_.env.amplitude) / (G * math.sqrt(sys_.ccg_ref))
    H = 2 * sys_.env.omega * np.abs(ph / np.sqrt(ccg)) / G / h0
    return gx, gy, ph.reshape(grid, grid), H.reshape(grid, grid)


def winding_number(result: CaseResult, centre, radius: float, samples: int = 64) -> int:
    """Net number of turns of the phase of phi_hat around a circle."""
    t = np.linspace(0, 2 * math.pi, samples + 1)
    pts = np.column_stack([centre[0] + radius * np.cos(t), centre[1] + radius * np.sin(t)])
    ph = evaluate_field(result.solution.phi_hat, result.mesh, pts)
    dphase = np.angle(ph[1:] / ph[:-1])
    return int(round(dphase.sum() / (2 * math.pi)))


def amphidromic_points(result: CaseResult, region, threshold: float = 0.2, grid: int = 201,
                       radius: float = 0.1, merge: float = 0.5):
    """Points of vanishing amplitude inside ``region = (x0, x1, y0, y1)``.

    Candidates are lattice minima of H/H0 below ``threshold``; a candidate
    is kept when the phase of the field turns once around it (a true zero
    of the complex amplitude).  Candidates closer than ``merge`` are
    merged.  Returns [(x, y, H/H0, winding)] sorted by x.
    """
    gx, gy, _, H = height_grid(result, region, grid)
    core = H[1:-1, 1:-1]
    is_min = core < threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= core <= H[1 + di:grid - 1 + di, 1 + dj:grid - 1 + dj]
    ii, jj = np.nonzero(is_min)
    cand = sorted(((float(core[i, j]), float(gx[i + 1]), float(gy[j + 1])) for i, j in zip(ii, jj)))
    kept = []
    for h, x, y in cand:
        if any(math.hypot(x - kx, y - ky) < merge for kx, ky, _, _ in kept):
            continue
        w = winding_number(result, (x, y), radius)
        if w != 0:
            kept.append((x, y, h, w))
    return sorted(kept)


def report_dict(r: ErrorReport) -> dict:
    return asdict(r)
