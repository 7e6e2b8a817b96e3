"""Structured quadrilateral spectral-element meshes and the coupling loop.

Node numbering puts the inner-region interior nodes first and the nodes of
the boundary loop last, in loop order, so that the coupled blocks slice
contiguously.  The loop runs counter-clockwise around the inner region.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .specbasis import LglRule, lagrange_derivative_at, lagrange_matrix, lgl_rule


class MeshError(ValueError):
    pass


class CouplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralMesh:
    """Quad spectral elements plus the matched boundary-element loop.

    Attributes
    ----------
    nodes : (N, 2) float
        Global node coordinates [m].
    elements : (ne, (p+1)**2) int
        Node ids in tensor order, local index ``j * (p+1) + i`` for
        ``(xi_i, zeta_j)``.
    boundary_elements : (nb, p+1) int
        Node ids of each loop element, ordered along the traversal.
    boundary_nodes : (Nc,) int
        Node id of every loop position; loop position ``j`` is the boundary
        (BEM) node index ``j``.
    """

    p: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_elements: np.ndarray
    boundary_nodes: np.ndarray
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    shape: tuple = (1, 1)

    @property
    def rule(self) -> LglRule:
        return lgl_rule(self.p)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_nodes)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def boundary_elements_local(self) -> np.ndarray:
        """Boundary elements expressed in loop (BEM) node indices."""
        return self.boundary_trace()[1][self.boundary_elements]

    def boundary_trace(self):
        """Index maps between SEM node ids and loop (BEM) indices.

        Returns ``(bem_to_sem, sem_to_bem)``; ``sem_to_bem`` is -1 off the loop.
        """
        bem_to_sem = np.asarray(self.boundary_nodes)
        sem_to_bem = np.full(self.n_nodes, -1, dtype=int)
        sem_to_bem[bem_to_sem] = np.arange(len(bem_to_sem))
        if len(np.unique(bem_to_sem)) != len(bem_to_sem):
            raise CouplingError("boundary loop visits a node twice")
        return bem_to_sem, sem_to_bem

    def permuted(self, perm) -> "SpectralMesh":
        """Same mesh with node ``i`` renamed ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return SpectralMesh(
            self.p,
            self.nodes[inv],
            perm[self.elements],
            perm[self.boundary_elements],
            perm[self.boundary_nodes],
            self.bounds,
            self.shape,
        )

    def element_box(self, e: int):
        xy = self.nodes[self.elements[e]]
        return xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max()


def build_structured_mesh(domain, nx: int, ny: int, p: int) -> SpectralMesh:
    """Tensor grid of nx * ny equal quads of order p on a rectangle.

    ``domain`` is ``(x0, x1, y0, y1)``.
    """
    x0, x1, y0, y1 = map(float, domain)
    if nx < 1 or ny < 1 or p < 1:
        raise MeshError("need nx, ny, p >= 1")
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate rectangle {domain}")
    rule = lgl_rule(p)
    t = 0.5 * (rule.nodes + 1)
    ex = np.linspace(x0, x1, nx + 1)
    ey = np.linspace(y0, y1, ny + 1)
    gx = np.concatenate([ex[i] + (ex[i + 1] - ex[i]) * t[:-1] for i in range(nx)] + [[x1]])
    gy = np.concatenate([ey[j] + (ey[j + 1] - ey[j]) * t[:-1] for j in range(ny)] + [[y1]])
    NX, NY = nx * p + 1, ny * p + 1

    # grid index (I, J) -> loop position for boundary points
    loop = []
    loop += [(I, 0) for I in range(0, NX - 1)]
    loop += [(NX - 1, J) for J in range(0, NY - 1)]
    loop += [(I, NY - 1) for I in range(NX - 1, 0, -1)]
    loop += [(0, J) for J in range(NY - 1, 0, -1)]
    n_loop = len(loop)
    n_int = NX * NY - n_loop

    gid = np.empty((NX, NY), dtype=int)
    on_edge = np.zeros((NX, NY), bool)
    on_edge[0, :] = on_edge[-1, :] = on_edge[:, 0] = on_edge[:, -1] = True
    # interior numbered row by row
    inner = np.argwhere(~on_edge)
    inner = inner[np.lexsort((inner[:, 0], inner[:, 1]))]
    gid[inner[:, 0], inner[:, 1]] = np.arange(n_int)
    for k, (I, J) in enumerate(loop):
        gid[I, J] = n_int + k

    nodes = np.empty((NX * NY, 2))
    II, JJ = np.meshgrid(np.arange(NX), np.arange(NY), indexing="ij")
    nodes[gid.ravel()] = np.column_stack([gx[II.ravel()], gy[JJ.ravel()]])

    elements = np.empty((nx * ny, (p + 1) ** 2), dtype=int)
    li = np.arange(p + 1)
    for ej in range(ny):
        for ei in range(nx):
            block = gid[ei * p + li[None, :], ej * p + li[:, None]]  # [j, i]
            elements[ej * nx + ei] = block.ravel()

    bnodes = n_int + np.arange(n_loop)
    belems = []
    for s in range(n_loop // p):
        idx = (s * p + np.arange(p + 1)) % n_loop
        belems.append(bnodes[idx])
    return SpectralMesh(
        p, nodes, elements, np.array(belems), bnodes, (x0, x1, y0, y1), (nx, ny)
    )


@dataclass(frozen=True)
class ElementFrame:
    jacobian: np.ndarray  # d(x, y)/d(xi, zeta), shape (2, 2)
    det: float


@dataclass(frozen=True)
class BoundaryFrame:
    arc_jacobian: float
    normal: np.ndarray  # unit outward normal of the inner region
    tangent: np.ndarray


def element_frame(mesh: SpectralMesh, e: int, xi: float, zeta: float) -> ElementFrame:
    """Isoparametric Jacobian at a local point of quad ``e``."""
    if abs(xi) > 1 or abs(zeta) > 1:
        raise MeshError("local coordinates outside [-1, 1]")
    rule = mesh.rule
    n = rule.n
    xy = mesh.nodes[mesh.elements[e]].reshape(n, n, 2)  # [j, i, :]
    Lx = lagrange_matrix(rule, [xi])[0]
    Lz = lagrange_matrix(rule, [zeta])[0]
    dLx = lagrange_derivative_at(rule, [xi])[0]
    dLz = lagrange_derivative_at(rule, [zeta])[0]
    d_dxi = np.einsum("j,i,jik->k", Lz, dLx, xy)
    d_dzeta = np.einsum("j,i,jik->k", dLz, Lx, xy)
    jac = np.column_stack([d_dxi, d_dzeta])
    det = float(np.linalg.det(jac))
    if det <= 0:
        raise MeshError(f"inverted element {e} (J={det:g})")
    return ElementFrame(jac, det)


def element_geometry(mesh: SpectralMesh):
    """Jacobian data of every quad at its own LGL nodes.

    Returns ``(dxdxi, dxdzeta, det)`` with shapes (ne, n*n, 2) and (ne, n*n).
    """
    rule = mesh.rule
    n = rule.n
    D = _deriv(rule)
    xy = mesh.nodes[mesh.elements].reshape(-1, n, n, 2)  # [e, j, i, :]
    d_dxi = np.einsum("ai,ejik->ejak", D, xy).reshape(-1, n * n, 2)
    d_dzeta = np.einsum("bj,ejik->ebik", D, xy).reshape(-1, n * n, 2)
    det = d_dxi[..., 0] * d_dzeta[..., 1] - d_dxi[..., 1] * d_dzeta[..., 0]
    if np.any(det <= 0):
        bad = int(np.argwhere(det <= 0)[0, 0])
        raise MeshError(f"inverted element {bad}")
    return d_dxi, d_dzeta, det


def _deriv(rule):
    from .specbasis import lagrange_derivative_matrix

    return lagrange_derivative_matrix(rule)


def boundary_frame(mesh: SpectralMesh, b: int, xi: float) -> BoundaryFrame:
    """Arc Jacobian and inner-region outward normal on loop element ``b``."""
    x, dx = boundary_map(mesh, b, np.array([xi]))
    t = dx[0]
    J = float(np.hypot(*t))
    tang = t / J
    # counter-clockwise loop: outward normal is the tangent rotated clockwise
    return BoundaryFrame(J, np.array([tang[1], -tang[0]]), tang)


def boundary_map(mesh: SpectralMesh, b: int, xi):
    """Coordinates and d(x,y)/dxi of loop element ``b`` at local points."""
    rule = mesh.rule
    xy = mesh.nodes[mesh.boundary_elements[b]]
    L = lagrange_matrix(rule, xi)
    dL = lagrange_derivative_at(rule, xi)
    return L @ xy, dL @ xy


def boundary_lengths(mesh: SpectralMesh) -> np.ndarray:
    """Length of each loop element via LGL quadrature of the arc Jacobian."""
    rule = mesh.rule
    D = _deriv(rule)
    xy = mesh.nodes[mesh.boundary_elements]  # (nb, n, 2)
    dx = np.einsum("ij,bjk->bik", D, xy)
    return np.hypot(dx[..., 0], dx[..., 1]) @ rule.weights


def boundary_corners(mesh: SpectralMesh, tol: float = 1e-9):
    """Loop indices whose incoming and outgoing tangents differ.

    Returns ``{loop index: interior angle of the inner region}``.
    """
    rule = mesh.rule
    D = _deriv(rule)
    xy = mesh.nodes[mesh.boundary_elements]
    dx = np.einsum("ij,bjk->bik", D, xy)
    t_start = dx[:, 0] / np.linalg.norm(dx[:, 0], axis=1)[:, None]
    t_end = dx[:, -1] / np.linalg.norm(dx[:, -1], axis=1)[:, None]
    _, sem_to_bem = mesh.boundary_trace()
    out = {}
    nb = len(xy)
    for b in range(nb):
        tin, tout = t_end[b - 1], t_start[b]
        cross = tin[0] * tout[1] - tin[1] * tout[0]
        dot = float(np.clip(tin @ tout, -1, 1))
        turn = np.arctan2(cross, dot)  # left turn positive
        if abs(turn) > tol:
            out[int(sem_to_bem[mesh.boundary_elements[b, 0]])] = float(np.pi - turn)
    return out


def dump_mesh(mesh: SpectralMesh, path) -> None:
    """Plain-text listing: nodes (id x y), quads and loop elements."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# order {mesh.p}\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write(f"elements {len(mesh.elements)}\n")
        for e, conn in enumerate(mesh.elements):
            fh.write(f"{e} " + " ".join(map(str, conn)) + "\n")
        fh.write(f"boundary_elements {len(mesh.boundary_elements)}\n")
        for b, conn in enumerate(mesh.boundary_elements):
            fh.write(f"{b} " + " ".join(map(str, conn)) + "\n")
