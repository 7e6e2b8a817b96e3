"""Coupled spectral-element / boundary-element solve.

Unknowns are the nodal potentials of the inner region (loop nodes last in
the mesh numbering) and the boundary fluxes q along the outer-region normal,
which points into the inner region.  With the inner-region flux equal to -q:

    [ A_II  A_Ic   0  ] [phi_I]   [  0   ]
    [ A_cI  A_cc  C_c ] [phi_c] = [  0   ]
    [  0     H    -G  ] [  q  ]   [phi_in]

The interior block is eliminated with a sparse LU; the dense Schur system
on (phi_c, q) is solved directly.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bsem import BoundaryLoop, BsemSystem, ConstantKernel, VariableKernel, assemble_bsem
from .greens import TransformedProfile
from .mesh import CouplingError, SpectralMesh
from .sem import SemSystem, assemble_sem, element_boundary
from .waves import G, Bathymetry, WaveEnvironment, solve_dispersion, velocities


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    mesh: SpectralMesh
    env: WaveEnvironment
    bathymetry: Bathymetry
    sem: SemSystem
    bsem: BsemSystem
    loop: BoundaryLoop
    C: sp.csr_matrix  # (N_F, n_flux)
    ccg_ref: float  # c c_g where the incident height is defined


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """Nodal fields of a coupled solve (arrays indexed by mesh node)."""

    phi_hat: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    height: np.ndarray
    height_norm: np.ndarray
    residual: float
    timings: dict = field(default_factory=dict)


def flux_coupling(mesh: SpectralMesh, bsys: BsemSystem) -> sp.csr_matrix:
    """Boundary matrix int L_i q dGamma with LGL-collocated quadrature,
    mapping flux slots to mesh nodes."""
    cd = element_boundary(mesh)  # (nb, p+1)
    rows = mesh.boundary_elements.ravel()
    cols = bsys.layout.slots.ravel()
    return sp.csr_matrix((cd.ravel(), (rows, cols)), shape=(mesh.n_nodes, bsys.layout.n_flux))


def outer_kernel(env: WaveEnvironment, bathymetry: Bathymetry, mesh: SpectralMesh, **kw):
    """Constant kernel when the depth along the loop is uniform, otherwise
    the x-varying kernel of the bathymetry's outer profile."""
    pts = mesh.nodes[mesh.boundary_nodes]
    h = bathymetry.depth(pts[:, 0], pts[:, 1])
    if np.ptp(h) <= 1e-12 * np.max(h):
        return ConstantKernel(solve_dispersion(env.omega, float(h[0])))
    outer = getattr(bathymetry, "outer_profile", None)
    if outer is None:
        if bathymetry.is_x_only():
            outer = lambda: bathymetry  # noqa: E731
        else:
            raise CouplingError("depth varies along the coupling loop but no x-only outer profile is known")
    prof = outer()
    return VariableKernel(TransformedProfile.from_bathymetry(env.omega, prof), **kw)


def _ccg(omega, h):
    k = solve_dispersion(omega, h)
    c, cg = velocities(k, h, omega)
    return c * cg


def assemble_coupled(mesh: SpectralMesh, env: WaveEnvironment, bathymetry: Bathymetry, kernel=None,
                     corner_mode: str = "split", mass_quadrature: str = "lgl", **bsem_kw) -> CoupledSystem:
    """Assemble both discretisations on a matched mesh and loop."""
    loop = BoundaryLoop.from_mesh(mesh)
    sem = assemble_sem(mesh, env, bathymetry, mass_quadrature=mass_quadrature)
    kernel = kernel or outer_kernel(env, bathymetry, mesh)
    bsys = assemble_bsem(loop, kernel, env, side="exterior", corner_mode=corner_mode, **bsem_kw)
    if bsys.H.shape[0] != bsys.layout.n_flux:
        raise CouplingError("boundary rows do not match flux unknowns")
    C = flux_coupling(mesh, bsys)
    if isinstance(kernel, VariableKernel):
        prof = kernel.profile
        h_ref = float(bathymetry.depth(prof.a - 1.0, 0.0)) if hasattr(bathymetry, "depth") else None
    else:
        pts = mesh.nodes[mesh.boundary_nodes]
        h_ref = float(bathymetry.depth(pts[:1, 0], pts[:1, 1])[0])
    ccg_ref = float(_ccg(env.omega, h_ref))
    return CoupledSystem(mesh, env, bathymetry, sem, bsys, loop, C, ccg_ref)


def solve_coupled(system: CoupledSystem) -> FieldSolution:
    """Schur-complement solve; reports the residual of the full system
    relative to the largest incident value."""
    t0 = time.perf_counter()
    mesh = system.mesh
    A = system.sem.A.tocsr().astype(complex)
    bnodes = mesh.boundary_nodes
    inner = mesh.interior_nodes
    H = system.bsem.H
    Gm = system.bsem.G
    C = system.C.tocsr()
    nc = len(bnodes)

    A_II = A[inner][:, inner].tocsc()
    A_Ic = A[inner][:, bnodes].toarray()
    A_cI = A[bnodes][:, inner]
    A_cc = A[bnodes][:, bnodes].toarray()
    lu = spla.splu(A_II)
    X = lu.solve(A_Ic)
    S = A_cc - A_cI @ X
    Cc = C[bnodes].toarray()
    M = np.block([[S, Cc], [H, -Gm]])
    rhs = np.concatenate([np.zeros(nc, complex), system.bsem.phi_in])
    sol = np.linalg.solve(M, rhs)
    phi_c, q = sol[:nc], sol[nc:]
    phi = np.zeros(mesh.n_nodes, complex)
    phi[bnodes] = phi_c
    phi[inner] = -X @ phi_c
    t1 = time.perf_counter()

    r_sem = A @ phi + C @ q
    r_bem = H @ phi[bnodes] - Gm @ q - system.bsem.phi_in
    scale = max(np.max(np.abs(system.bsem.phi_in)), 1e-300)
    residual = float(max(np.max(np.abs(r_sem)), np.max(np.abs(r_bem))) / scale)

    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    ccg = np.asarray(system.bathymetry.ccg(system.env.omega, x, y), float)
    phys = phi / np.sqrt(ccg)
    height = 2 * system.env.omega * np.abs(phys) / G
    amp = abs(system.env.amplitude)
    h0 = 2 * system.env.omega * amp / (G * np.sqrt(system.ccg_ref))
    return FieldSolution(phi, q, phys, height, height / h0, residual, {"solve_s": t1 - t0})
