"""Spectral-element discretisation of  lap(phi_hat) + k_hat^2 phi_hat = 0.

Weak form: int grad(eta).grad(phi) - int k^2 eta phi - int_G eta q = 0 with
q the flux along the inner-region outward normal, giving  A phi - C q = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import SpectralMesh, element_geometry
from .specbasis import gauss_rule, lagrange_derivative_at, lagrange_derivative_matrix, lagrange_matrix
from .waves import Bathymetry, WaveEnvironment


@dataclass(frozen=True, eq=False)
class SemSystem:
    """Assembled SEM operators; ``A = K - M`` (N_F x N_F), ``C`` (N_F x N_c)."""

    A: sp.csr_matrix
    K: sp.csr_matrix
    M: sp.csr_matrix
    C: sp.csr_matrix
    interior: np.ndarray
    boundary: np.ndarray
    khat: np.ndarray  # nodal modified wave number


def _reference_gradients(p: int, xi):
    """Tensor-basis values and reference derivatives at points xi x xi.

    Returns (B, Bxi, Bzeta) with shape (nq*nq, (p+1)**2); quadrature
    point index ``b * nq + a`` for ``(xi_a, zeta_b)``.
    """
    from .specbasis import lgl_rule

    rule = lgl_rule(p)
    L = lagrange_matrix(rule, xi)
    dL = lagrange_derivative_at(rule, xi)
    B = np.kron(L, L)
    Bxi = np.kron(L, dL)
    Bzeta = np.kron(dL, L)
    return B, Bxi, Bzeta


def _geometry_at(mesh: SpectralMesh, Bxi, Bzeta, elements=None):
    conn = mesh.elements if elements is None else mesh.elements[elements]
    xy = mesh.nodes[conn]  # (ne, nb, 2)
    x_xi = np.einsum("qa,eak->eqk", Bxi, xy)
    x_zeta = np.einsum("qa,eak->eqk", Bzeta, xy)
    det = x_xi[..., 0] * x_zeta[..., 1] - x_xi[..., 1] * x_zeta[..., 0]
    return x_xi, x_zeta, det


def element_stiffness(mesh: SpectralMesh, elements=None, quadrature: str = "gauss") -> np.ndarray:
    """Element matrices int grad(L_i).grad(L_j), shape (ne, nb, nb).

    ``quadrature="gauss"`` uses p+1 Gauss points per direction, exact for
    affine quads; ``"lgl"`` collocates with the nodes (lumped cross terms).
    """
    p = mesh.p
    if quadrature == "gauss":
        g = gauss_rule(p + 1)
        pts, wts = g.nodes, g.weights
    elif quadrature == "lgl":
        pts, wts = mesh.rule.nodes, mesh.rule.weights
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    _, Bxi, Bzeta = _reference_gradients(p, pts)
    W = np.kron(wts, wts)
    x_xi, x_zeta, det = _geometry_at(mesh, Bxi, Bzeta, elements)
    if np.any(det <= 0):
        from .mesh import MeshError

        raise MeshError("inverted element in stiffness evaluation")
    inv = 1.0 / det
    xi_x, xi_y = x_zeta[..., 1] * inv, -x_zeta[..., 0] * inv
    ze_x, ze_y = -x_xi[..., 1] * inv, x_xi[..., 0] * inv
    Gx = xi_x[..., None] * Bxi + ze_x[..., None] * Bzeta
    Gy = xi_y[..., None] * Bxi + ze_y[..., None] * Bzeta
    wd = W * det
    return np.einsum("eqa,eq,eqb->eab", Gx, wd, Gx) + np.einsum("eqa,eq,eqb->eab", Gy, wd, Gy)


def element_mass_diagonal(mesh: SpectralMesh, khat_nodal: np.ndarray, elements=None) -> np.ndarray:
    """Diagonals k_hat^2(x_i) J(x_i) w_i of the LGL-collocated mass matrices."""
    conn = mesh.elements if elements is None else mesh.elements[elements]
    _, _, det = element_geometry(mesh)
    if elements is not None:
        det = det[elements]
    w = mesh.rule.weights
    W = np.kron(w, w)
    return khat_nodal[conn] ** 2 * det * W


def element_mass_gauss(mesh: SpectralMesh, e: int, khat_fn, n: int | None = None) -> np.ndarray:
    """Consistent mass int k^2 L_i L_j by Gauss(n) on element ``e`` (dense)."""
    n = n or mesh.p + 2
    g = gauss_rule(n)
    B, Bxi, Bzeta = _reference_gradients(mesh.p, g.nodes)
    x_xi, x_zeta, det = _geometry_at(mesh, Bxi, Bzeta, [e])
    xy = B @ mesh.nodes[mesh.elements[e]]
    k2 = np.asarray(khat_fn(xy[:, 0], xy[:, 1])) ** 2
    wd = np.kron(g.weights, g.weights) * det[0] * k2
    return np.einsum("qa,q,qb->ab", B, wd, B)


def element_boundary(mesh: SpectralMesh) -> np.ndarray:
    """Diagonals J(xi_i) w_i of every loop element, shape (nb, p+1)."""
    D = lagrange_derivative_matrix(mesh.rule)
    xy = mesh.nodes[mesh.boundary_elements]
    dx = np.einsum("ij,bjk->bik", D, xy)
    return np.hypot(dx[..., 0], dx[..., 1]) * mesh.rule.weights


def _scatter(conn: np.ndarray, blocks: np.ndarray, n: int) -> sp.csr_matrix:
    nb = conn.shape[1]
    rows = np.repeat(conn, nb, axis=1).ravel()
    cols = np.tile(conn, (1, nb)).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def assemble_sem(
    mesh: SpectralMesh,
    env: WaveEnvironment,
    bathymetry: Bathymetry,
    mass_quadrature: str = "lgl",
    stiffness_quadrature: str = "gauss",
    khat_fn=None,
) -> SemSystem:
    """Global K, M, A = K - M and the boundary coupling matrix C.

    ``mass_quadrature="adaptive"`` replaces the diagonal LGL mass by a
    Gauss(p+2) consistent mass on elements where the bathymetry has a kink;
    the default keeps the global mass matrix diagonal.
    """
    N = mesh.n_nodes
    if khat_fn is None:
        khat_fn = lambda x, y: bathymetry.khat(env.omega, x, y)  # noqa: E731
    kn = np.asarray(khat_fn(mesh.nodes[:, 0], mesh.nodes[:, 1]), float)

    Ke = element_stiffness(mesh, quadrature=stiffness_quadrature)
    K = _scatter(mesh.elements, Ke, N)

    md = element_mass_diagonal(mesh, kn)
    rows = mesh.elements.ravel()
    M = sp.csr_matrix((md.ravel(), (rows, rows)), shape=(N, N))
    if mass_quadrature == "adaptive":
        kinked = [e for e in range(len(mesh.elements)) if bathymetry.crosses_kink(*mesh.element_box(e))]
        if kinked:
            lumped = sp.csr_matrix(
                (md[kinked].ravel(), (mesh.elements[kinked].ravel(),) * 2), shape=(N, N)
            )
            blocks = np.array([element_mass_gauss(mesh, e, khat_fn) for e in kinked])
            M = M - lumped + _scatter(mesh.elements[kinked], blocks, N)
    elif mass_quadrature != "lgl":
        raise ValueError(f"unknown mass quadrature {mass_quadrature!r}")

    cd = element_boundary(mesh)
    bem_to_sem, sem_to_bem = mesh.boundary_trace()
    be = mesh.boundary_elements
    C = sp.csr_matrix(
        (cd.ravel(), (be.ravel(), sem_to_bem[be].ravel())), shape=(N, mesh.n_boundary)
    )
    A = (K - M).tocsr()
    return SemSystem(A, K.tocsr(), M.tocsr(), C, mesh.interior_nodes, bem_to_sem, kn)


def solve_sem_bvp(system: SemSystem, dirichlet_nodes, dirichlet_values, neumann_flux=None):
    """Solve A phi = C q with prescribed values on ``dirichlet_nodes``.

    ``neumann_flux`` gives q at every loop node (entries on Dirichlet nodes
    are ignored because those rows are replaced).
    """
    N = system.A.shape[0]
    dn = np.asarray(dirichlet_nodes, dtype=int)
    free = np.setdiff1d(np.arange(N), dn)
    rhs = np.zeros(N, complex)
    if neumann_flux is not None:
        rhs += system.C @ np.asarray(neumann_flux, complex)
    phi = np.zeros(N, complex)
    phi[dn] = dirichlet_values
    A = system.A.tocsc().astype(complex)
    rhs_f = rhs[free] - A[free][:, dn] @ phi[dn]
    phi[free] = spla.splu(A[free][:, free].tocsc()).solve(rhs_f)
    return phi
