"""Free-space kernels of the transformed Helmholtz equation.

Constant depth uses psi = (i/4) H0(k r).  For depth varying along x only,
psi is the inverse cosine transform in y of the 1D Green's function Psi of

    Psi'' + (k(x)^2 - lam^2) Psi + delta(x - x') = 0

with outgoing / decaying Robin conditions on the flat ends.  Psi is built
from the two one-sided solutions u_L, u_R, Psi = -u_L(x<) u_R(x>) / W, which
are propagated through order-8 spectral elements by their Dirichlet-to-Neumann
maps.  The transform is evaluated as the difference from the constant-depth
kernel at a reference wave number, so that the log singularity is handled
analytically by the caller.
"""
from __future__ import annotations

import hashlib
import math
import threading
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import spherical_jn

from .hankel import hankel1_01
from .specbasis import gauss_rule, lagrange_derivative_at, lagrange_matrix, legendre_eval, lgl_rule
from .waves import PiecewiseX, WaveEnvironment, solve_dispersion

LINE_ORDER = 8


class KernelAccuracyWarning(UserWarning):
    """The Fourier tail of the variable-depth kernel did not converge."""


class SingularPairError(ValueError):
    """Field and source point coincide."""


@dataclass(frozen=True)
class GreensEvaluation:
    """Kernel values and gradient with respect to the field point."""

    psi: np.ndarray
    grad: np.ndarray  # (..., 2)

    def __add__(self, other: "GreensEvaluation") -> "GreensEvaluation":
        return GreensEvaluation(self.psi + other.psi, self.grad + other.grad)


def greens_constant(x, xp, k) -> GreensEvaluation:
    """psi = (i/4) H0(k r) and its gradient in the field point ``x``.

    ``x`` and ``xp`` broadcast as (..., 2) arrays; ``k`` broadcasts against
    the leading shape.
    """
    d = np.asarray(x, float) - np.asarray(xp, float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise SingularPairError("coincident field and source point")
    kr = np.asarray(k, float) * r
    h0, h1 = hankel1_01(kr)
    psi = 0.25j * h0
    dpsi_dr = -0.25j * np.asarray(k, float) * h1
    grad = (dpsi_dr / r)[..., None] * d
    return GreensEvaluation(psi, grad)


# ---------------------------------------------------------------------------
# depth profile along x
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransformedProfile:
    """Wave number k(x): ``kfun`` on [a, c], constant beyond both ends."""

    kfun: Callable
    a: float
    c: float

    def __post_init__(self):
        if self.c < self.a:
            raise ValueError("profile needs a <= c")

    @classmethod
    def constant(cls, k: float) -> "TransformedProfile":
        k = float(k)
        return cls(lambda x: np.full(np.shape(x), k), 0.0, 0.0)

    @classmethod
    def from_bathymetry(cls, omega: float, bathymetry: PiecewiseX) -> "TransformedProfile":
        f = lambda x: solve_dispersion(omega, bathymetry.depth(x))  # noqa: E731
        return cls(f, float(bathymetry.a), float(bathymetry.c))

    def k(self, x):
        x = np.clip(np.asarray(x, float), self.a, self.c)
        return np.asarray(self.kfun(x), float) * np.ones_like(x)

    @property
    def k_a(self) -> float:
        return float(self.k(self.a))

    @property
    def k_c(self) -> float:
        return float(self.k(self.c))

    def k_range(self):
        xs = np.linspace(self.a, self.c, 257)
        ks = self.k(xs)
        return float(ks.min()), float(ks.max())

    def key(self) -> str:
        """Hash of the sampled profile; equal profiles share cache entries."""
        xs = np.linspace(self.a, self.c, 513)
        h = hashlib.sha1(np.array([self.a, self.c]).tobytes())
        h.update(np.ascontiguousarray(self.k(xs)).tobytes())
        return h.hexdigest()


def _branch_sqrt(k, lam):
    """sqrt(k^2 - lam^2) with Im >= 0."""
    return np.sqrt((k * k - np.asarray(lam, float) ** 2).astype(complex))


# ---------------------------------------------------------------------------
# 1D spectral elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Reference1D:
    K: np.ndarray
    M: np.ndarray
    L: np.ndarray  # basis at Gauss points
    dL: np.ndarray
    gnodes: np.ndarray
    gweights: np.ndarray


_REF_CACHE: dict = {}


def _reference(q: int) -> _Reference1D:
    if q not in _REF_CACHE:
        r = lgl_rule(q)
        g = gauss_rule(q + 3)
        L = lagrange_matrix(r, g.nodes)
        dL = lagrange_derivative_at(r, g.nodes)
        K = dL.T @ (g.weights[:, None] * dL)
        M = L.T @ (g.weights[:, None] * L)
        _REF_CACHE[q] = _Reference1D(K, M, L, dL, g.nodes, g.weights)
    return _REF_CACHE[q]


def _element_matrices(profile, breaks, q):
    """Per element: K - M_k (stiffness minus k^2 mass) and the plain mass M."""
    ref = _reference(q)
    h = np.diff(breaks)
    xg = breaks[:-1, None] + 0.5 * h[:, None] * (ref.gnodes[None, :] + 1)
    k2w = profile.k(xg) ** 2 * ref.gweights[None, :]
    Mk = 0.5 * h[:, None, None] * np.einsum("ga,eg,gb->eab", ref.L, k2w, ref.L)
    Z = (2.0 / h)[:, None, None] * ref.K[None] - Mk
    M1 = 0.5 * h[:, None, None] * ref.M[None]
    return Z, M1, h


@dataclass(frozen=True, eq=False)
class _Condensed:
    """Element DtN data: S(lam) = Zbb + lam^2 Mbb - P diag(1/(theta+lam^2)) P^T."""

    Zbb: np.ndarray  # (ne, 2, 2)
    Mbb: np.ndarray
    P0: np.ndarray  # (ne, 2, q-1)
    P1: np.ndarray
    theta: np.ndarray  # (ne, q-1)

    def dtn(self, e: int, lam2: np.ndarray) -> np.ndarray:
        P = self.P0[e][None] + lam2[:, None, None] * self.P1[e][None]
        d = 1.0 / (self.theta[e][None, :] + lam2[:, None])
        S = self.Zbb[e][None] + lam2[:, None, None] * self.Mbb[e][None]
        return S - np.einsum("lam,lm,lbm->lab", P, d, P)


def _condense(profile, breaks, q) -> _Condensed:
    Z, M1, h = _element_matrices(profile, breaks, q)
    b = [0, q]
    i = np.arange(1, q)
    ref = _reference(q)
    R = np.linalg.cholesky(ref.M[np.ix_(i, i)])
    Rinv = np.linalg.inv(R)
    Zii = Z[:, i][:, :, i]
    B = Rinv[None] @ Zii @ Rinv.T[None]
    th, W = np.linalg.eigh(0.5 * (B + np.swapaxes(B, 1, 2)))
    scale = (0.5 * h)[:, None]
    theta = th / scale
    V = (Rinv.T[None] @ W) / np.sqrt(scale)[:, None, :]
    if np.any(theta <= 0):
        raise RuntimeError("1D element too long for the local wave number")
    P0 = Z[:, b][:, :, i] @ V
    P1 = M1[:, b][:, :, i] @ V
    return _Condensed(Z[:, b][:, :, b], M1[:, b][:, :, b], P0, P1, theta)


def _breakpoints(points, profile, hmax):
    """Element edges containing every point in ``points`` plus a and c."""
    pts = np.unique(np.concatenate([np.asarray(points, float), [profile.a, profile.c]]))
    edges = [pts[0]]
    for x1 in pts[1:]:
        x0 = edges[-1]
        if x1 - x0 <= 1e-12 * max(1.0, abs(x1)):
            continue
        n = int(math.ceil((x1 - x0) / hmax))
        edges.extend(x0 + (x1 - x0) * np.arange(1, n + 1) / n)
        edges[-1] = x1
    edges = np.array(edges)
    if len(edges) < 2:
        edges = np.array([edges[0] - hmax, edges[0], edges[0] + hmax])
    return edges


def _element_size(kmax: float, lam_top: float) -> float:
    # kh < pi keeps clamped elements non-resonant; |kappa| h <= 4 holds the
    # order-8 DtN map to ~1e-10
    return min(2.5 / kmax, 4.0 / max(lam_top, 1e-12))


@dataclass(frozen=True, eq=False)
class ModeTable:
    """Scaled one-sided solutions at a set of x-points for many lam values.

    ``aL``, ``bL`` hold u_L and u_L' divided by the Wronskian, both in the
    local scaling of the node, so the node scales cancel; u_R keeps its
    mantissa (``mR``, ``dR``) and log-scale ``gR``.
    """

    x: np.ndarray  # sorted unique points
    lam: np.ndarray
    aL: np.ndarray  # (nx, nlam)
    bL: np.ndarray
    mR: np.ndarray
    dR: np.ndarray
    gR: np.ndarray  # log-scale of u_R

    def slot(self, xq) -> np.ndarray:
        idx = np.searchsorted(self.x, xq)
        idx = np.clip(idx, 0, len(self.x) - 1)
        left = np.clip(idx - 1, 0, len(self.x) - 1)
        choose = np.abs(self.x[left] - xq) < np.abs(self.x[idx] - xq)
        idx = np.where(choose, left, idx)
        if np.any(np.abs(self.x[idx] - xq) > 1e-9 * np.maximum(1.0, np.abs(xq))):
            raise KeyError("point not in mode table")
        return idx


def _sweep(cond: _Condensed, lam2, u0, du0, forward: bool, record):
    """Propagate (u, u') across all elements; returns mantissas and logs at
    the recorded element edges (``record`` maps edge index -> slot)."""
    ne = len(cond.theta)
    nl = len(lam2)
    nslot = max(record.values()) + 1
    m = np.zeros((nslot, nl), complex)
    d = np.zeros((nslot, nl), complex)
    g = np.zeros((nslot, nl))
    u = np.asarray(u0, complex) * np.ones(nl)
    du = np.asarray(du0, complex) * np.ones(nl)
    logs = np.zeros(nl)
    order = range(ne) if forward else range(ne - 1, -1, -1)
    start = 0 if forward else ne

    def store(edge):
        s = record.get(edge)
        if s is not None:
            m[s], d[s], g[s] = u, du, logs

    store(start)
    for e in order:
        S = cond.dtn(e, lam2)
        if forward:
            un = (-du - S[:, 0, 0] * u) / S[:, 0, 1]
            dn = S[:, 1, 0] * u + S[:, 1, 1] * un
            edge = e + 1
        else:
            un = (du - S[:, 1, 1] * u) / S[:, 1, 0]
            dn = -S[:, 0, 0] * un - S[:, 0, 1] * u
            edge = e
        nrm = np.abs(un) + np.abs(dn) / np.sqrt(np.abs(lam2) + 1.0)
        u, du = un / nrm, dn / nrm
        logs = logs + np.log(nrm)
        store(edge)
    return m, d, g


def mode_table(profile: TransformedProfile, xpts, lam, q: int = LINE_ORDER) -> ModeTable:
    """One-sided solutions u_L, u_R at ``xpts`` for every ``lam``.

    The lam values are processed in bands, each on a mesh fine enough for
    its largest decay rate.
    """
    xs = np.unique(np.asarray(xpts, float))
    lam = np.asarray(lam, float)
    kmin, kmax = profile.k_range()
    lo = min(xs[0], profile.a)
    hi = max(xs[-1], profile.c)
    ka, kc = profile.k(lo), profile.k(hi)
    out = {n: np.empty((len(xs), len(lam)), complex) for n in ("aL", "bL", "mR", "dR")}
    gR = np.empty((len(xs), len(lam)))
    # bands doubling in lam above 2 kmax
    top = max(2.0 * kmax, 1e-12)
    band = np.zeros(len(lam), int)
    while np.any(lam > top * 2 ** band.max()) if len(lam) else False:
        band = np.where(lam > top * 2 ** band, band + 1, band)
    for b in np.unique(band):
        sel = np.flatnonzero(band == b)
        lam_b = lam[sel]
        hmax = _element_size(kmax, lam_b.max())
        edges = _breakpoints(np.concatenate([xs, [lo, hi]]), profile, hmax)
        cond = _condense(profile, edges, q)
        pos = np.searchsorted(edges, xs)
        pos = np.where(
            (pos > 0) & (np.abs(edges[np.maximum(pos - 1, 0)] - xs) < np.abs(edges[np.minimum(pos, len(edges) - 1)] - xs)),
            pos - 1,
            pos,
        )
        record = {int(p): i for i, p in enumerate(pos)}
        lam2 = lam_b**2
        alpha = _branch_sqrt(ka, lam_b)
        beta = _branch_sqrt(kc, lam_b)
        mL, dL, _ = _sweep(cond, lam2, 1.0, -1j * alpha, True, record)
        mR, dR, gr = _sweep(cond, lam2, 1.0, 1j * beta, False, record)
        # record dict collapses duplicate edges; expand back to all points
        slots = np.array([record[int(p)] for p in pos])
        W = mL[slots] * dR[slots] - dL[slots] * mR[slots]
        out["aL"][:, sel] = mL[slots] / W
        out["bL"][:, sel] = dL[slots] / W
        out["mR"][:, sel] = mR[slots]
        out["dR"][:, sel] = dR[slots]
        gR[:, sel] = gr[slots]
    return ModeTable(xs, lam, out["aL"], out["bL"], out["mR"], out["dR"], gR)


def line_kernel(table: ModeTable, ix, ixp):
    """Psi(x, x'; lam) and d Psi/dx for slot pairs, shape (npairs, nlam)."""
    ix = np.asarray(ix)
    ixp = np.asarray(ixp)
    lo = np.minimum(ix, ixp)
    hi = np.maximum(ix, ixp)
    scale = np.exp(table.gR[hi] - table.gR[lo])
    psi = -table.aL[lo] * table.mR[hi] * scale
    right = (ix > ixp)[:, None]
    left = (ix < ixp)[:, None]
    d_right = -table.aL[lo] * table.dR[hi] * scale
    d_left = -table.bL[lo] * table.mR[hi] * scale
    dpsi = np.where(right, d_right, np.where(left, d_left, 0.5 * (d_right + d_left)))
    return psi, dpsi


@dataclass(frozen=True, eq=False)
class TransformedLine:
    """1D Green's function for one lam and one source point x'.

    ``nodes``/``values``/``slopes`` sample Psi on the spectral grid;
    calling the object interpolates (Psi, Psi_x) anywhere, continuing
    analytically beyond the grid where the profile is flat.
    """

    profile: TransformedProfile
    lam: float
    source: float
    edges: np.ndarray
    coef: np.ndarray  # (ne, q+1) nodal values per element
    q: int = LINE_ORDER

    @property
    def nodes(self) -> np.ndarray:
        t = 0.5 * (lgl_rule(self.q).nodes + 1)
        h = np.diff(self.edges)
        return (self.edges[:-1, None] + h[:, None] * t[None, :]).ravel()

    @property
    def values(self) -> np.ndarray:
        return self.coef.ravel()

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        rule = lgl_rule(self.q)
        x0, x1 = self.edges[0], self.edges[-1]
        psi = np.empty(x.shape, complex)
        dpsi = np.empty(x.shape, complex)
        inside = (x >= x0) & (x <= x1)
        e = np.clip(np.searchsorted(self.edges, x[inside], side="right") - 1, 0, len(self.edges) - 2)
        h = self.edges[e + 1] - self.edges[e]
        xi = 2 * (x[inside] - self.edges[e]) / h - 1
        if inside.any():
            L = lagrange_matrix(rule, xi)
            dL = lagrange_derivative_at(rule, xi)
            c = self.coef[e]
            psi[inside] = np.sum(L * c, axis=1)
            dpsi[inside] = np.sum(dL * c, axis=1) * 2 / h
        left = x < x0
        if left.any():
            a = _branch_sqrt(self.profile.k(x0), self.lam)
            psi[left] = self.coef[0, 0] * np.exp(-1j * a * (x[left] - x0))
            dpsi[left] = -1j * a * psi[left]
        right = x > x1
        if right.any():
            b = _branch_sqrt(self.profile.k(x1), self.lam)
            psi[right] = self.coef[-1, -1] * np.exp(1j * b * (x[right] - x1))
            dpsi[right] = 1j * b * psi[right]
        return psi, dpsi


def solve_transformed_1d(profile: TransformedProfile, lam: float, source: float,
                         q: int = LINE_ORDER, span=None) -> TransformedLine:
    """Global 1D spectral-element solve of Psi'' + kappa^2 Psi = -delta(x - x').

    The grid covers [a, c] (or ``span`` if wider) with an element edge at the
    source, so the point load is the nodal unit vector there.  Robin rows
    Psi' = -i alpha Psi (left) and Psi' = i beta Psi (right) close the system.
    """
    if lam < 0:
        raise ValueError("transverse wave number must be non-negative")
    lo, hi = profile.a, profile.c
    if span is not None:
        lo, hi = min(lo, span[0]), max(hi, span[1])
    if not lo <= source <= hi:
        raise ValueError(f"source {source} outside the profile band [{lo}, {hi}]")
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    _, kmax = profile.k_range()
    hmax = min(_element_size(kmax, lam), 8 * 2 * math.pi / (10 * max(kmax, 1e-12)))
    edges = _breakpoints([lo, hi, source], profile, hmax)
    Z, M1, _ = _element_matrices(profile, edges, q)
    A_e = Z + lam**2 * M1
    ne = len(edges) - 1
    n = ne * q + 1
    conn = (np.arange(ne)[:, None] * q + np.arange(q + 1)[None, :])
    rows = np.repeat(conn, q + 1, axis=1).ravel()
    cols = np.tile(conn, (1, q + 1)).ravel()
    A = sp.csr_matrix((A_e.ravel().astype(complex), (rows, cols)), shape=(n, n)).tolil()
    alpha = complex(_branch_sqrt(profile.k(lo), lam))
    beta = complex(_branch_sqrt(profile.k(hi), lam))
    A[0, 0] -= 1j * alpha
    A[n - 1, n - 1] -= 1j * beta
    rhs = np.zeros(n, complex)
    rhs[int(np.argmin(np.abs(edges - source))) * q] = 1.0
    sol = spla.spsolve(A.tocsc(), rhs)
    return TransformedLine(profile, float(lam), float(source), edges, sol[conn], q)


# ---------------------------------------------------------------------------
# transverse Fourier quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaQuadrature:
    """Nodes on [0, cut] plus equal Filon panels on [cut, lam_max]."""

    nodes: np.ndarray
    weights: np.ndarray
    cut: float
    tail_edges: np.ndarray
    tail_order: int

    @property
    def tail_nodes(self) -> np.ndarray:
        g = gauss_rule(self.tail_order)
        e = self.tail_edges
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * (e[1:] - e[:-1])
        return (mid[:, None] + half[:, None] * g.nodes[None, :]).ravel()

    def key(self) -> tuple:
        return (len(self.nodes), float(self.cut), len(self.tail_edges), float(self.tail_edges[-1]))


def lambda_quadrature(branch_points, x_extent: float, y_extent: float, kmax: float,
                      cut_factor: float = 1.5, cap_factor: float = 50.0,
                      d_min: float = 0.0, tail_width: float | None = None,
                      panel_phase: float = 5.0, n_gauss: int = 16,
                      tail_order: int = 16) -> LambdaQuadrature:
    """Quadrature for the transverse transform.

    [0, cut] is split at every branch point; each piece uses lam = b -+ s^2
    next to its branch points so the inverse square-root behaviour becomes
    smooth, and composite Gauss panels sized by the oscillation phase.  The
    tail [cut, lam_max] holds a smooth difference integrated by Filon panels.
    """
    cut = cut_factor * kmax
    bps = sorted({float(b) for b in branch_points if 0 < b < cut})
    merged = []
    for b in bps:
        if not merged or b - merged[-1] > 1e-9 * cut:
            merged.append(b)
    ends = [0.0] + merged + [cut]
    g = gauss_rule(n_gauss)
    nodes, weights = [], []

    def add(s0, s1, lam_of_s, dlam_ds, phase):
        n_p = int(math.ceil(phase / panel_phase)) + 1
        se = np.linspace(s0, s1, n_p + 1)
        for u, v in zip(se[:-1], se[1:]):
            s = 0.5 * (u + v) + 0.5 * (v - u) * g.nodes
            nodes.append(lam_of_s(s))
            weights.append(0.5 * (v - u) * g.weights * dlam_ds(s))

    for u, v in zip(ends[:-1], ends[1:]):
        lb = u in merged
        rb = v in merged
        pieces = []
        if lb and rb:
            m = 0.5 * (u + v)
            pieces = [(u, m, "left"), (m, v, "right")]
        elif lb:
            pieces = [(u, v, "left")]
        elif rb:
            pieces = [(u, v, "right")]
        else:
            pieces = [(u, v, "plain")]
        for p0, p1, kind in pieces:
            width = p1 - p0
            mu0 = math.sqrt(max(kmax * kmax - p0 * p0, 0.0))
            mu1 = math.sqrt(max(kmax * kmax - p1 * p1, 0.0))
            phase = width * y_extent + x_extent * abs(mu0 - mu1) + 1.0
            if kind == "left":
                add(0.0, math.sqrt(width), lambda s, b=p0: b + s * s, lambda s: 2 * s, phase)
            elif kind == "right":
                add(0.0, math.sqrt(width), lambda s, b=p1: b - s * s, lambda s: 2 * s, phase)
            else:
                add(p0, p1, lambda s: s, lambda s: np.ones_like(s), phase)
    lam_max = cap_factor * kmax
    if d_min > 0:
        # first lam where exp(-sqrt(lam^2 - kmax^2) d_min) < 1e-10
        lam_max = min(lam_max, math.hypot(kmax, 23.03 / d_min))
    lam_max = max(lam_max, 2 * cut)
    tw = tail_width or max(cut, 1.0)
    n_t = int(math.ceil((lam_max - cut) / tw))
    tail = cut + (lam_max - cut) * np.arange(n_t + 1) / n_t
    return LambdaQuadrature(np.concatenate(nodes), np.concatenate(weights), cut, tail, tail_order)


@dataclass(frozen=True)
class _FilonBasis:
    proj: np.ndarray  # (n, n) nodal values -> Legendre coefficients
    half: float


def _filon_projection(n: int) -> np.ndarray:
    g = gauss_rule(n)
    P = np.empty((n, n))
    for j in range(n):
        P[j] = legendre_eval(j, g.nodes)[0] if j > 0 else 1.0
    return (2 * np.arange(n)[:, None] + 1) / 2 * P * g.weights[None, :]


def _filon_moments(n: int, omega):
    """C_j = int P_j(t) cos(w t) dt and S_j = int P_j(t) sin(w t) dt."""
    w = np.abs(omega)
    sgn = np.sign(omega)
    C = np.zeros(np.shape(w) + (n,))
    S = np.zeros(np.shape(w) + (n,))
    for j in range(n):
        jj = spherical_jn(j, w)
        if j % 2 == 0:
            C[..., j] = 2 * (-1) ** (j // 2) * jj
        else:
            S[..., j] = 2 * (-1) ** ((j - 1) // 2) * jj * sgn
    return C, S


def _reference_head(k0, X, Y, cut, panel_phase=2.5, n_gauss=16):
    """(1/pi) int_0^cut of the constant-k0 line kernel times cos / sin.

    Returns the contributions to (psi, psi_x, psi_y).  Uses lam = k0 sin(t)
    below k0 and lam = k0 cosh(t) above, which removes the branch point.
    """
    g = gauss_rule(n_gauss)
    ax = np.abs(X)
    sx = np.sign(X)
    out = np.zeros((3,) + np.shape(X), complex)
    t_hi = np.arccosh(cut / k0)
    phaseA = k0 * np.hypot(X, Y)
    phaseB = cut * np.abs(Y) * t_hi + 1.0
    nA = np.ceil(phaseA / panel_phase).astype(int) + 1
    nB = np.ceil(phaseB / panel_phase).astype(int) + 1
    for n_p in np.unique(nA):
        sel = np.flatnonzero(nA == n_p)
        e = np.linspace(0, 1, n_p + 1)
        t = (0.5 * (e[:-1] + e[1:])[:, None] + 0.5 * np.diff(e)[:, None] * g.nodes[None, :]).ravel()
        w = (0.5 * np.diff(e)[:, None] * g.weights[None, :]).ravel() * (np.pi / 2)
        th = t * np.pi / 2
        k = k0[sel, None]
        ex = np.exp(1j * k * ax[sel, None] * np.cos(th)[None, :])
        arg = k * Y[sel, None] * np.sin(th)[None, :]
        cs, sn = np.cos(arg), np.sin(arg)
        out[0, sel] = (0.5j * ex * cs) @ w
        out[1, sel] = (-0.5 * sx[sel, None] * k * np.cos(th)[None, :] * ex * cs) @ w
        out[2, sel] = (-0.5j * k * np.sin(th)[None, :] * ex * sn) @ w
    for n_p in np.unique(nB):
        sel = np.flatnonzero(nB == n_p)
        e = np.linspace(0, 1, n_p + 1)
        t = (0.5 * (e[:-1] + e[1:])[:, None] + 0.5 * np.diff(e)[:, None] * g.nodes[None, :]).ravel()
        w = (0.5 * np.diff(e)[:, None] * g.weights[None, :]).ravel()
        th = t[None, :] * t_hi[sel, None]
        wt = w[None, :] * t_hi[sel, None]
        k = k0[sel, None]
        mu = k * np.sinh(th)
        lam = k * np.cosh(th)
        ex = np.exp(-mu * ax[sel, None])
        arg = lam * Y[sel, None]
        cs, sn = np.cos(arg), np.sin(arg)
        out[0, sel] += np.sum(0.5 * ex * cs * wt, axis=1)
        out[1, sel] += np.sum(-0.5 * sx[sel, None] * mu * ex * cs * wt, axis=1)
        out[2, sel] += np.sum(-0.5 * lam * ex * sn * wt, axis=1)
    return out / np.pi


def _reference_line(k0, X, lam):
    """Constant-k0 line kernel and its x-derivative (rows: pairs)."""
    mu = _branch_sqrt(k0[:, None], lam[None, :])
    ex = np.exp(1j * mu * np.abs(X)[:, None])
    return 0.5j / mu * ex, -0.5 * np.sign(X)[:, None] * ex


class KernelCache:
    """Mode tables keyed by (profile, frequency, quadrature, x-points).

    Population is compute-once per key under a lock; stored tables are
    read-only so concurrent readers are safe.
    """

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    def table(self, profile: TransformedProfile, quad: LambdaQuadrature, xpts, omega: float = 0.0,
              q: int = LINE_ORDER) -> ModeTable:
        xs = np.unique(np.asarray(xpts, float))
        key = (profile.key(), float(omega), quad.key(), q, hashlib.sha1(xs.tobytes()).hexdigest())
        with self._lock:
            hit = self._store.get(key)
            if hit is None:
                lam = np.concatenate([quad.nodes, quad.tail_nodes])
                hit = mode_table(profile, xs, lam, q)
                for arr in (hit.aL, hit.bL, hit.mR, hit.dR, hit.gR):
                    arr.setflags(write=False)
                self._store[key] = hit
        return hit


_DEFAULT_CACHE = KernelCache()


def greens_variable(profile: TransformedProfile, x, xp, k_ref=None, *, quad: LambdaQuadrature | None = None,
                    cache: KernelCache | None = None, tol: float = 1e-8, chunk: int = 4096,
                    difference: bool = False, xpts=None) -> GreensEvaluation:
    """Variable-depth kernel for pairs of points.

    The value is assembled as  psi_ref(k_ref) + (psi - psi_ref)  where the
    bracket is evaluated by the transverse transform; ``k_ref`` defaults to
    the local wave number at the source.  With ``difference=True`` only the
    bracket is returned, which is finite at coincident points.
    ``xpts`` may list extra x-coordinates to share one mode table across
    calls.
    """
    x = np.atleast_2d(np.asarray(x, float))
    xp = np.atleast_2d(np.asarray(xp, float))
    x, xp = np.broadcast_arrays(x, xp)
    shape = x.shape[:-1]
    x = x.reshape(-1, 2)
    xp = xp.reshape(-1, 2)
    X = x[:, 0] - xp[:, 0]
    Y = x[:, 1] - xp[:, 1]
    k0 = profile.k(xp[:, 0]) if k_ref is None else np.broadcast_to(np.asarray(k_ref, float), X.shape).copy()
    kmin, kmax = profile.k_range()
    kmax = max(kmax, float(k0.max()))
    if quad is None:
        quad = lambda_quadrature([profile.k_a, profile.k_c], float(np.abs(X).max()),
                                 float(np.abs(Y).max()), kmax)
    cache = cache or _DEFAULT_CACHE
    allx = np.concatenate([x[:, 0], xp[:, 0]] + ([np.asarray(xpts, float)] if xpts is not None else []))
    table = cache.table(profile, quad, allx)
    nh = len(quad.nodes)
    lam_h = quad.nodes
    lam_t = quad.tail_nodes
    n_t = quad.tail_order
    proj = _filon_projection(n_t)
    half = 0.5 * (quad.tail_edges[1] - quad.tail_edges[0])
    mids = 0.5 * (quad.tail_edges[:-1] + quad.tail_edges[1:])
    npan = len(mids)
    ix_all = table.slot(x[:, 0])
    ixp_all = table.slot(xp[:, 0])

    out = np.zeros((3, len(X)), complex)
    worst_tail = 0.0
    chunk = max(16, min(chunk, int(2e6 // len(table.lam))))
    for s in range(0, len(X), chunk):
        sl = slice(s, s + chunk)
        Xs, Ys, ks = X[sl], Y[sl], k0[sl]
        psi, dpsi = line_kernel(table, ix_all[sl], ixp_all[sl])
        # head: plain transform of the variable kernel
        cs = np.cos(lam_h[None, :] * Ys[:, None])
        sn = np.sin(lam_h[None, :] * Ys[:, None])
        w = quad.weights[None, :]
        ph, dh = psi[:, :nh], dpsi[:, :nh]
        head = np.stack([
            np.sum(ph * cs * w, axis=1),
            np.sum(dh * cs * w, axis=1),
            np.sum(-lam_h[None, :] * ph * sn * w, axis=1),
        ]) / np.pi
        # tail: difference from the reference line kernel, Filon panels
        rp, rd = _reference_line(ks, Xs, lam_t)
        D0 = (psi[:, nh:] - rp).reshape(-1, npan, n_t)
        D1 = (dpsi[:, nh:] - rd).reshape(-1, npan, n_t)
        D2 = (-lam_t[None, :] * (psi[:, nh:] - rp)).reshape(-1, npan, n_t)
        C, S = _filon_moments(n_t, half * Ys)
        cm = np.cos(mids[None, :] * Ys[:, None])
        sm = np.sin(mids[None, :] * Ys[:, None])
        tail = np.zeros((3, len(Xs)), complex)
        last = np.zeros(len(Xs))
        for row, (D, use_sin) in enumerate(((D0, False), (D1, False), (D2, True))):
            c = D @ proj.T  # (pairs, panels, n)
            Cc = np.einsum("qpj,qj->qp", c, C)
            Sc = np.einsum("qpj,qj->qp", c, S)
            if use_sin:
                panel = half * (sm * Cc + cm * Sc)
            else:
                panel = half * (cm * Cc - sm * Sc)
            tail[row] = panel.sum(axis=1) / np.pi
            last = np.maximum(last, np.abs(panel[:, -1]) / np.pi)
        ref = _reference_head(ks, Xs, Ys, quad.cut)
        out[:, sl] = head + tail - ref
        worst_tail = max(worst_tail, float(last.max(initial=0.0)))
    if worst_tail > tol:
        warnings.warn(
            f"variable-depth kernel tail not converged (last panel {worst_tail:.2e} > {tol:.0e})",
            KernelAccuracyWarning,
            stacklevel=2,
        )
    diff = GreensEvaluation(out[0], np.stack([out[1], out[2]], axis=-1))
    if not difference:
        diff = diff + greens_constant(x, xp, k0)
    return GreensEvaluation(diff.psi.reshape(shape), diff.grad.reshape(shape + (2,)))


# ---------------------------------------------------------------------------
# incident wave
# ---------------------------------------------------------------------------


def incident_field(profile: TransformedProfile | None, env: WaveEnvironment, points, k: float | None = None):
    """Incident transformed potential and its gradient at ``points`` (n, 2).

    With a constant outer depth (``profile`` None, ``k`` given) this is the
    plane wave A exp(i k (x cos th + y sin th)).  Over an x-varying profile
    the transverse wave number lam0 = k_a sin th is conserved and the
    x-dependence is the 1D solution driven by the unit wave
    exp(i k_a cos th x) arriving from the deep (left) side.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    th = env.theta
    A = env.amplitude
    if profile is None:
        if k is None:
            raise ValueError("constant-depth incident wave needs k")
        ph = np.exp(1j * k * (pts[:, 0] * math.cos(th) + pts[:, 1] * math.sin(th)))
        val = A * ph
        grad = np.column_stack([1j * k * math.cos(th) * val, 1j * k * math.sin(th) * val])
        return val, grad
    ka = profile.k_a
    lam0 = ka * math.sin(th)
    alpha0 = ka * math.cos(th)
    lo = min(float(pts[:, 0].min()), profile.a)
    tab = mode_table(profile, np.concatenate([pts[:, 0], [lo]]), np.array([abs(lam0)]))
    i0 = tab.slot(np.array([lo]))[0]
    ix = tab.slot(pts[:, 0])
    # U = C u_R with U' + i alpha0 U = 2 i alpha0 exp(i alpha0 lo) at lo
    denom = tab.dR[i0, 0] + 1j * alpha0 * tab.mR[i0, 0]
    C = 2j * alpha0 * np.exp(1j * alpha0 * lo) / denom
    scale = C * np.exp(tab.gR[ix, 0] - tab.gR[i0, 0])
    U = scale * tab.mR[ix, 0]
    dU = scale * tab.dR[ix, 0]
    ey = np.exp(1j * lam0 * pts[:, 1])
    val = A * U * ey
    grad = np.column_stack([A * dU * ey, 1j * lam0 * val])
    return val, grad
