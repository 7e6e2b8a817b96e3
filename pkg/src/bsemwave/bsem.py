"""Spectral boundary elements for the transformed Helmholtz equation.

Discrete boundary integral equation, one row per collocation point x':

    C(x') phi(x') + sum_e int_e phi dpsi/dn dG = sum_e int_e psi q dG + phi_in(x')

with n the outward normal of the region the equation is written for
(``side="exterior"``: the unbounded outer region, whose normal points into
the inner region; ``side="interior"``: the inner region itself).

Flux degrees of freedom follow ``corner_mode``.  With ``"shared"`` every loop
node carries one flux value.  With ``"split"`` each corner carries one flux
per adjoining side and the corner row is replaced by two rows collocated
just off the corner, one on each side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .greens import (
    GreensEvaluation,
    KernelCache,
    LambdaQuadrature,
    TransformedProfile,
    greens_constant,
    greens_variable,
    incident_field,
    lambda_quadrature,
)
from .hankel import EULER_GAMMA
from .mesh import CouplingError, SpectralMesh, boundary_corners
from .specbasis import gauss_rule, lagrange_derivative_at, lagrange_matrix, lgl_rule
from .waves import WaveEnvironment

SINGULAR_POINTS = 24
SINGULAR_POWER = 3
GRADED_POINTS = 14
GRADED_RATIO = 2.5


# ---------------------------------------------------------------------------
# boundary description
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryLoop:
    """Closed counter-clockwise chain of order-p boundary elements.

    ``elements[b]`` lists loop-node indices along element ``b``;
    ``angle[i]`` is the inner-region interior angle at loop node ``i``.
    """

    p: int
    nodes: np.ndarray
    elements: np.ndarray
    angle: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: SpectralMesh) -> "BoundaryLoop":
        _, sem_to_bem = mesh.boundary_trace()
        els = sem_to_bem[mesh.boundary_elements]
        if np.any(els < 0):
            raise CouplingError("boundary element refers to a non-loop node")
        ang = np.full(mesh.n_boundary, math.pi)
        for i, a in boundary_corners(mesh).items():
            ang[i] = a
        return cls(mesh.p, mesh.nodes[mesh.boundary_nodes], els, ang)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def corners(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.angle - math.pi) > 1e-9)

    def geometry(self, b, xi, origin=None):
        """Points, tangents d x / d xi and basis values on elements ``b``.

        ``b`` and ``xi`` are equal-length arrays; returns (x, dx, L) with
        shapes (n, 2), (n, 2), (n, p+1).  With ``origin`` (one point or one
        per entry) the points come back as x - origin, formed from the nodal
        offsets so that nearby separations keep full precision.
        """
        rule = lgl_rule(self.p)
        b = np.asarray(b, int)
        xi = np.asarray(xi, float)
        L = lagrange_matrix(rule, xi)
        dL = lagrange_derivative_at(rule, xi)
        xy = self.nodes[self.elements[b]]  # (n, p+1, 2)
        if origin is not None:
            origin = np.asarray(origin, float)
            xy = xy - (origin[:, None, :] if origin.ndim == 2 else origin)
        return np.einsum("nm,nmk->nk", L, xy), np.einsum("nm,nmk->nk", dL, xy), L

    def element_lengths(self) -> np.ndarray:
        g = gauss_rule(self.p + 2)
        nb = self.n_elements
        b = np.repeat(np.arange(nb), g.n)
        _, dx, _ = self.geometry(b, np.tile(g.nodes, nb))
        return (np.hypot(dx[:, 0], dx[:, 1]).reshape(nb, g.n) @ g.weights)


@dataclass(frozen=True)
class CollocationRow:
    """One boundary equation: position, owner element and potential weights."""

    point: np.ndarray
    element: int  # element the point lies on (-1 when only a shared node)
    xi: float
    phi_nodes: np.ndarray  # loop indices
    phi_weights: np.ndarray
    angle: float  # inner-region interior angle at the point
    node: int = -1  # loop node when collocated at a node


@dataclass(frozen=True, eq=False)
class FluxLayout:
    """Map from (element, local node) to flux unknown."""

    slots: np.ndarray  # (nb, p+1)
    n_flux: int
    node_of_slot: np.ndarray  # loop node carrying each flux slot
    side_of_slot: np.ndarray  # element owning the slot (-1 shared)


def flux_layout(loop: BoundaryLoop, corner_mode: str = "split") -> FluxLayout:
    nb = loop.n_elements
    slots = loop.elements.copy()
    node_of = np.arange(loop.n_nodes)
    side = np.full(loop.n_nodes, -1)
    if corner_mode == "shared":
        return FluxLayout(slots, loop.n_nodes, node_of, side)
    if corner_mode != "split":
        raise ValueError(f"unknown corner mode {corner_mode!r}")
    extra_nodes, extra_side = [], []
    corners = set(int(c) for c in loop.corners)
    for b in range(nb):
        end = int(loop.elements[b, -1])
        if end in corners:
            slots[b, -1] = loop.n_nodes + len(extra_nodes)
            extra_nodes.append(end)
            extra_side.append(b)
    for b in range(nb):
        start = int(loop.elements[b, 0])
        if start in corners:
            side[start] = b
    return FluxLayout(
        slots,
        loop.n_nodes + len(extra_nodes),
        np.concatenate([node_of, extra_nodes]).astype(int),
        np.concatenate([side, extra_side]).astype(int),
    )


def collocation_rows(loop: BoundaryLoop, corner_rows: str = "split"):
    """Rows in loop order.

    ``corner_rows="split"`` replaces each corner row by two rows just off the
    corner (needed when both corner fluxes are unknown); ``"node"`` keeps one
    row per loop node.
    """
    if corner_rows not in ("split", "node"):
        raise ValueError(f"unknown corner row mode {corner_rows!r}")
    rule = lgl_rule(loop.p)
    off = 0.5 * (rule.nodes[0] + rule.nodes[1])  # between the first two nodes
    corners = set(int(c) for c in loop.corners) if corner_rows == "split" else set()
    owner = {}
    for b in range(loop.n_elements):
        for m, i in enumerate(loop.elements[b]):
            owner.setdefault(int(i), (b, float(rule.nodes[m])))
    rows = []
    for i in range(loop.n_nodes):
        if i not in corners:
            b, xi = owner[i]
            rows.append(
                CollocationRow(loop.nodes[i], b, xi, np.array([i]), np.array([1.0]), float(loop.angle[i]), i)
            )
            continue
        b_in = int(np.flatnonzero(loop.elements[:, -1] == i)[0])
        b_out = int(np.flatnonzero(loop.elements[:, 0] == i)[0])
        for b, xi in ((b_in, -off), (b_out, off)):
            x, _, L = loop.geometry([b], [xi])
            rows.append(CollocationRow(x[0], b, xi, loop.elements[b].copy(), L[0], math.pi, -1))
    return rows


def free_term(angle: float, side: str = "exterior") -> float:
    """C = theta / 2 pi with theta the angle of the region the equation lives in.

    ``angle`` is the inner-region interior angle; the exterior region sees
    2 pi - angle.
    """
    if side == "interior":
        return angle / (2 * math.pi)
    if side == "exterior":
        return (2 * math.pi - angle) / (2 * math.pi)
    raise ValueError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# quadrature rules on one element
# ---------------------------------------------------------------------------


def singular_rule(xi0: float, n: int = SINGULAR_POINTS, power: int = SINGULAR_POWER,
                  phase_rate: float = 0.0):
    """Gauss rule on [-1, 1] split at xi0 and clustered toward it.

    Each side uses xi = xi0 +- rho_hat s^power, s in [0, 1], which makes
    integrands of the form rho^m log(rho) smooth in s.  ``phase_rate`` (k
    times the arc Jacobian) adds points for oscillatory kernels.
    """
    xs, wts = [], []
    for sign, length in ((-1.0, 1.0 + xi0), (1.0, 1.0 - xi0)):
        if length <= 1e-15:
            continue
        g = gauss_rule(min(n + int(math.ceil(3 * phase_rate * length)), 64))
        s = 0.5 * (g.nodes + 1)
        ws = 0.5 * g.weights
        xs.append(xi0 + sign * length * s**power)
        wts.append(ws * length * power * s ** (power - 1))
    return np.concatenate(xs), np.concatenate(wts)


def graded_rule(xi_star: float, delta: float, n: int = GRADED_POINTS, ratio: float = GRADED_RATIO):
    """Composite Gauss rule with panels growing geometrically away from
    ``xi_star``; the first panel has length ``delta`` (distance of the
    near-singular point in xi units)."""
    g = gauss_rule(n)
    xs, wts = [], []
    delta = max(delta, 1e-14)
    for sign, length in ((-1.0, 1.0 + xi_star), (1.0, 1.0 - xi_star)):
        if length <= 1e-15:
            continue
        edges = [0.0, min(delta, length)]
        while edges[-1] < length:
            edges.append(min(edges[-1] * ratio, length))
        e = np.array(edges)
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * np.diff(e)
        t = (mid[:, None] + half[:, None] * g.nodes[None, :]).ravel()
        xs.append(xi_star + sign * t)
        wts.append((half[:, None] * g.weights[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(wts)


def regular_rule(distance: float, length: float, p: int, xi_star: float = 0.0,
                 far_factor: float = 2.0):
    """Rule for an element not containing the collocation point.

    Returns ``None`` for the LGL fast path (distance above twice the
    element length), Gauss(max(p+2, 16)) at moderate distance, and a graded
    rule toward the nearest point below half an element length.
    """
    if distance > far_factor * length:
        return None
    if distance >= 0.5 * length:
        g = gauss_rule(max(p + 2, 16))
        return g.nodes.copy(), g.weights.copy()
    return graded_rule(xi_star, 2.0 * distance / length)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


class ConstantKernel:
    """(i/4) H0(k r) with a single wave number."""

    variable = False

    def __init__(self, k: float):
        self.k = float(k)

    def k_ref(self, points) -> np.ndarray:
        return np.full(len(points), self.k)

    def incident(self, env: WaveEnvironment, points):
        return incident_field(None, env, points, k=self.k)


class VariableKernel:
    """Kernel for depth varying along x outside the coupling loop.

    Values are split as the constant kernel at the local wave number of the
    collocation point plus a smooth remainder computed by the transverse
    transform.
    """

    variable = True

    def __init__(self, profile: TransformedProfile, quad: LambdaQuadrature | None = None,
                 cache: KernelCache | None = None, tol: float = 1e-8):
        self.profile = profile
        self.quad = quad
        self.cache = cache or KernelCache()
        self.tol = tol

    def k_ref(self, points) -> np.ndarray:
        return self.profile.k(np.asarray(points)[:, 0])

    def prepare(self, points):
        pts = np.asarray(points)
        if self.quad is None:
            span = np.ptp(pts, axis=0)
            _, kmax = self.profile.k_range()
            self.quad = lambda_quadrature([self.profile.k_a, self.profile.k_c], float(span[0]),
                                          float(span[1]), kmax)
        return self.quad

    def remainder(self, x, xp, k0, xpts) -> GreensEvaluation:
        return greens_variable(self.profile, x, xp, k0, quad=self.quad, cache=self.cache,
                               tol=self.tol, difference=True, xpts=xpts)

    def incident(self, env: WaveEnvironment, points):
        return incident_field(self.profile, env, points)


# ---------------------------------------------------------------------------
# element integrals for one collocation point
# ---------------------------------------------------------------------------


def _kernel_terms(kvals, d, dx, side):
    """psi and J * dpsi/dn for separations d = x - x' (rows)."""
    g = greens_constant(d, 0.0, kvals)
    # J n_I = (dy, -dx) for a counter-clockwise loop; exterior normal flips it
    sgn = -1.0 if side == "exterior" else 1.0
    dpsi_n = sgn * (g.grad[..., 0] * dx[..., 1] - g.grad[..., 1] * dx[..., 0])
    return g.psi, dpsi_n


def integrate_regular(loop: BoundaryLoop, b: int, xp, k: float, side: str = "exterior",
                      rule=None):
    """Rows of H and G for element ``b`` and a collocation point off it.

    Returns ``(h, g)`` with one entry per local node.  ``rule`` overrides the
    automatic choice; ``"lgl"`` forces the nodal shortcut.
    """
    xp = np.asarray(xp, float)
    lengths = loop.element_lengths()
    if rule is None:
        d, xs = _distance(loop, b, xp)
        rule = regular_rule(d, lengths[b], loop.p, xs)
        if rule is None:
            rule = "lgl"
    if isinstance(rule, str) and rule == "lgl":
        r = lgl_rule(loop.p)
        x, dx, _ = loop.geometry(np.full(r.n, b), r.nodes)
        if np.any(np.hypot(*(x - xp).T) == 0):
            raise CouplingError("collocation point lies on the element")
        psi, dn = _kernel_terms(k, x - xp, dx, side)
        J = np.hypot(dx[:, 0], dx[:, 1])
        return dn * r.weights, psi * J * r.weights
    xi, w = rule
    x, dx, L = loop.geometry(np.full(len(xi), b), xi, origin=xp)
    psi, dn = _kernel_terms(k, x, dx, side)
    J = np.hypot(dx[:, 0], dx[:, 1])
    return (w * dn) @ L, (w * psi * J) @ L


def integrate_singular(loop: BoundaryLoop, b: int, xi0: float, k: float, side: str = "exterior",
                       n: int = SINGULAR_POINTS, power: int = SINGULAR_POWER):
    """Rows of H and G for element ``b`` containing the collocation point.

    G: the log term V1 = (T_o + T_1 ln|xi - xi0|) L_m(xi0) J(xi0) with
    T_o = -(gamma + ln(k A / 2)) / 2 pi, T_1 = -1 / 2 pi, is integrated in
    closed form; the bounded remainder uses :func:`singular_rule`.
    H: the normal-derivative kernel is bounded on smooth elements and is
    integrated with the same clustered rule.
    """
    # both points as offsets from the element's first node, so that the
    # normal component of x - x' cancels exactly on straight elements even
    # when xi0 is not a node
    base = loop.nodes[loop.elements[b, 0]]
    xp, dxp, Lp = loop.geometry([b], [xi0], origin=base)
    xp, A, Lo = xp[0], float(np.hypot(*dxp[0])), Lp[0]
    xi, w = singular_rule(xi0, n, power, k * A)
    d, dx, L = loop.geometry(np.full(len(xi), b), xi, origin=base)
    d = d - xp
    psi, dn = _kernel_terms(k, d, dx, side)
    J = np.hypot(dx[:, 0], dx[:, 1])
    rho = np.abs(xi - xi0)
    To = -(EULER_GAMMA + math.log(k * A / 2)) / (2 * math.pi)
    T1 = -1.0 / (2 * math.pi)
    V = (psi * J)[:, None] * L
    V1 = ((To + T1 * np.log(rho)) * A)[:, None] * Lo[None, :]
    rem = w @ (V - V1)
    rm, rp = 1.0 + xi0, 1.0 - xi0
    xlogx = lambda t: t * math.log(t) if t > 0 else 0.0  # noqa: E731
    analytic = (2 * To + T1 * (xlogx(rm) + xlogx(rp) - 2.0)) * A * Lo
    return (w * dn) @ L, rem + analytic


def _distance(loop: BoundaryLoop, b: int, xp, samples: int = 65):
    """Distance from xp to element b and the nearest local coordinate."""
    t = np.linspace(-1, 1, samples)
    x, dx, _ = loop.geometry(np.full(samples, b), t)
    d = np.hypot(*(x - xp).T)
    j = int(np.argmin(d))
    # refine on the chord between neighbouring samples
    lo, hi = t[max(j - 1, 0)], t[min(j + 1, samples - 1)]
    tt = np.linspace(lo, hi, 65)
    x, _, _ = loop.geometry(np.full(len(tt), b), tt)
    d = np.hypot(*(x - xp).T)
    j = int(np.argmin(d))
    return float(d[j]), float(tt[j])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BsemSystem:
    """H phi - G q = phi_in, rows per collocation point.

    ``H`` acts on loop-node potentials (free term included), ``G`` on the
    flux unknowns of ``layout``.
    """

    H: np.ndarray
    G: np.ndarray
    phi_in: np.ndarray
    rows: list
    layout: FluxLayout
    side: str
    free: np.ndarray = field(repr=False)


def assemble_bsem(loop: BoundaryLoop, kernel, env: WaveEnvironment | None = None,
                  side: str = "exterior", corner_mode: str = "split",
                  corner_rows: str | None = None, diff_points: int = 24,
                  far_factor: float = 2.0) -> BsemSystem:
    """Collocate the boundary integral equation at every row point.

    Elements holding the collocation point use :func:`integrate_singular`;
    other elements use :func:`regular_rule` (nodal shortcut when far).
    With a :class:`VariableKernel` the smooth remainder is added with the
    nodal shortcut on far elements and Gauss(``diff_points``) otherwise.
    """
    if corner_rows is None:
        corner_rows = "split" if corner_mode == "split" else "node"
    rows = collocation_rows(loop, corner_rows)
    layout = flux_layout(loop, corner_mode)
    nr, nn, nq = len(rows), loop.n_nodes, layout.n_flux
    p = loop.p
    rule = lgl_rule(p)
    H = np.zeros((nr, nn), complex)
    G = np.zeros((nr, nq), complex)
    pts = np.array([r.point for r in rows])
    kref = kernel.k_ref(pts)
    lengths = loop.element_lengths()
    nb = loop.n_elements
    el = loop.elements
    slots = layout.slots

    # nodal data of every element (for the LGL shortcut)
    bb = np.repeat(np.arange(nb), p + 1)
    xn, dxn, _ = loop.geometry(bb, np.tile(rule.nodes, nb))
    Jn = np.hypot(dxn[:, 0], dxn[:, 1])
    wn = np.tile(rule.weights, nb)

    # classify (row, element)
    far = np.zeros((nr, nb), bool)
    near_rules = []  # (row, b, rule)
    singular = []  # (row, b, xi0)
    for r, row in enumerate(rows):
        on = set()
        if row.node >= 0:
            on = set(np.flatnonzero(np.any(el == row.node, axis=1)).tolist())
        else:
            on = {row.element}
        bbox_d = _bbox_distance(loop, row.point)
        for b in range(nb):
            if b in on:
                if row.node >= 0:
                    m = int(np.flatnonzero(el[b] == row.node)[0])
                    singular.append((r, b, float(rule.nodes[m])))
                else:
                    singular.append((r, b, row.xi))
                continue
            if bbox_d[b] > far_factor * lengths[b]:
                far[r, b] = True
                continue
            d, xs = _distance(loop, b, row.point)
            rl = regular_rule(d, lengths[b], p, xs, far_factor)
            if rl is None:
                far[r, b] = True
            else:
                near_rules.append((r, b, rl))

    # far elements: nodal shortcut, all pairs at once
    farn = np.repeat(far, p + 1, axis=1)  # (nr, nb*(p+1))
    ri, ci = np.nonzero(farn)
    if len(ri):
        psi, dn = _kernel_terms(kref[ri], xn[ci] - pts[ri], dxn[ci], side)
        np.add.at(H, (ri, el.ravel()[ci]), dn * wn[ci])
        np.add.at(G, (ri, slots.ravel()[ci]), psi * Jn[ci] * wn[ci])

    # near elements: flattened quadrature points
    if near_rules:
        rr = np.concatenate([np.full(len(rl[0]), r) for r, _, rl in near_rules])
        be = np.concatenate([np.full(len(rl[0]), b) for _, b, rl in near_rules])
        xi = np.concatenate([rl[0] for _, _, rl in near_rules])
        w = np.concatenate([rl[1] for _, _, rl in near_rules])
        d, dx, L = loop.geometry(be, xi, origin=pts[rr])
        psi, dn = _kernel_terms(kref[rr], d, dx, side)
        J = np.hypot(dx[:, 0], dx[:, 1])
        for m in range(p + 1):
            np.add.at(H, (rr, el[be, m]), w * dn * L[:, m])
            np.add.at(G, (rr, slots[be, m]), w * psi * J * L[:, m])

    for r, b, xi0 in singular:
        h, g = integrate_singular(loop, b, xi0, float(kref[r]), side)
        np.add.at(H[r], el[b], h)
        np.add.at(G[r], slots[b], g)

    if getattr(kernel, "variable", False):
        _add_remainder(H, G, loop, kernel, rows, pts, kref, far, el, slots, xn, dxn, Jn, wn, side,
                       diff_points)

    free = np.array([free_term(row.angle, side) for row in rows])
    for r, row in enumerate(rows):
        np.add.at(H[r], row.phi_nodes, free[r] * row.phi_weights)

    if side == "exterior" and env is not None:
        phi_in, _ = kernel.incident(env, pts)
    else:
        phi_in = np.zeros(nr, complex)
    return BsemSystem(H, G, np.asarray(phi_in, complex), rows, layout, side, free)


def _bbox_distance(loop: BoundaryLoop, xp) -> np.ndarray:
    """Lower bound of the point-to-element distance from node bounding boxes."""
    xy = loop.nodes[loop.elements]
    lo = xy.min(axis=1)
    hi = xy.max(axis=1)
    d = np.maximum(np.maximum(lo - xp, 0.0), np.maximum(xp - hi, 0.0))
    return np.hypot(d[:, 0], d[:, 1])


def _add_remainder(H, G, loop, kernel, rows, pts, kref, far, el, slots, xn, dxn, Jn, wn, side, n_d):
    p = loop.p
    nb = loop.n_elements
    g = gauss_rule(n_d)
    bg = np.repeat(np.arange(nb), n_d)
    xg, dxg, Lg = loop.geometry(bg, np.tile(g.nodes, nb))
    Jg = np.hypot(dxg[:, 0], dxg[:, 1])
    wg = np.tile(g.weights, nb)
    xpts = np.concatenate([xn[:, 0], xg[:, 0], pts[:, 0]])
    kernel.prepare(np.concatenate([xn, pts]))
    sgn = -1.0 if side == "exterior" else 1.0

    farn = np.repeat(far, p + 1, axis=1)
    ri, ci = np.nonzero(farn)
    if len(ri):
        e = kernel.remainder(xn[ci], pts[ri], kref[ri], xpts)
        dn = sgn * (e.grad[:, 0] * dxn[ci, 1] - e.grad[:, 1] * dxn[ci, 0])
        np.add.at(H, (ri, el.ravel()[ci]), dn * wn[ci])
        np.add.at(G, (ri, slots.ravel()[ci]), e.psi * Jn[ci] * wn[ci])
    nearg = np.repeat(~far, n_d, axis=1)
    ri, ci = np.nonzero(nearg)
    if len(ri):
        e = kernel.remainder(xg[ci], pts[ri], kref[ri], xpts)
        dn = sgn * (e.grad[:, 0] * dxg[ci, 1] - e.grad[:, 1] * dxg[ci, 0])
        be = bg[ci]
        for m in range(p + 1):
            np.add.at(H, (ri, el[be, m]), wg[ci] * dn * Lg[ci, m])
            np.add.at(G, (ri, slots[be, m]), wg[ci] * e.psi * Jg[ci] * Lg[ci, m])


def solve_standalone(system: BsemSystem, loop: BoundaryLoop, phi_known: dict, q_known: dict):
    """Solve the boundary system with mixed data.

    ``phi_known`` maps loop node -> potential; ``q_known`` maps flux slot ->
    flux.  Every other potential and flux is unknown; their count must equal
    the number of rows.  Returns (phi, q) on all nodes / slots.
    """
    nn, nq = system.H.shape[1], system.G.shape[1]
    phi_u = [i for i in range(nn) if i not in phi_known]
    q_u = [s for s in range(nq) if s not in q_known]
    nr = system.H.shape[0]
    if len(phi_u) + len(q_u) != nr:
        raise CouplingError(f"{len(phi_u) + len(q_u)} unknowns for {nr} equations")
    phi = np.zeros(nn, complex)
    q = np.zeros(nq, complex)
    for i, v in phi_known.items():
        phi[i] = v
    for s, v in q_known.items():
        q[s] = v
    rhs = system.phi_in - system.H @ phi + system.G @ q
    M = np.hstack([system.H[:, phi_u], -system.G[:, q_u]])
    sol = np.linalg.solve(M, rhs)
    phi[phi_u] = sol[: len(phi_u)]
    q[q_u] = sol[len(phi_u):]
    return phi, q
