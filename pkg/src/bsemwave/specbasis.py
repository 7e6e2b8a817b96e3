"""Legendre polynomials, Gauss-Lobatto / Gauss rules and nodal Lagrange bases.

All rules live on the reference interval [-1, 1].  Rule objects are frozen
and can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_LGL_ORDER = 32
MAX_GAUSS_ORDER = 64


def legendre_eval(p: int, x):
    """Value and first derivative of the Legendre polynomial P_p at x.

    Uses the three-term recurrence; x may be a scalar or an array.
    """
    if p < 0:
        raise ValueError("Legendre degree must be non-negative")
    x = np.asarray(x, dtype=float)
    p0, p1 = np.ones_like(x), x.copy()
    d0, d1 = np.zeros_like(x), np.ones_like(x)
    if p == 0:
        return p0[()], d0[()]
    for n in range(1, p):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
        d0, d1 = d1, d0 + (2 * n + 1) * p0
    return p1[()], d1[()]


@dataclass(frozen=True, eq=False)
class LglRule:
    """Legendre-Gauss-Lobatto nodes and weights of order ``p`` (p+1 points)."""

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    bary: np.ndarray  # barycentric weights of the nodal basis

    @property
    def n(self) -> int:
        return self.p + 1


@dataclass(frozen=True, eq=False)
class GaussRule:
    n: int
    nodes: np.ndarray
    weights: np.ndarray


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


@lru_cache(maxsize=None)
def lgl_rule(p: int) -> LglRule:
    """LGL rule of order p: {-1, 1} plus the roots of P'_p.

    Interior nodes come from Newton iteration on P'_p started at the
    Chebyshev-Gauss-Lobatto points; weights are 2 / (p (p+1) P_p(x_m)^2).
    """
    if not 1 <= p <= MAX_LGL_ORDER:
        raise ValueError(f"LGL order must be in [1, {MAX_LGL_ORDER}], got {p}")
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    if p > 1:
        xi = x[1:-1].copy()
        for _ in range(100):
            # P'_p roots: Newton on q = P'_p using (1-x^2) P''_p = 2x P'_p - p(p+1) P_p
            pp, dp = legendre_eval(p, xi)
            d2 = (2 * xi * dp - p * (p + 1) * pp) / (1 - xi**2)
            step = dp / d2
            xi = xi - step
            if np.max(np.abs(step)) < 1e-14:
                break
        else:
            raise RuntimeError(f"LGL Newton iteration did not converge for p={p}")
        xi = 0.5 * (xi - xi[::-1])  # enforce exact symmetry
        x[1:-1] = xi
    x[0], x[-1] = -1.0, 1.0
    pp, _ = legendre_eval(p, x)
    w = 2.0 / (p * (p + 1) * pp**2)
    bary = _barycentric_weights(x)
    _freeze(x, w, bary)
    return LglRule(p, x, w, bary)


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> GaussRule:
    """Standard n-point Gauss-Legendre rule (Newton on P_n)."""
    if not 1 <= n <= MAX_GAUSS_ORDER:
        raise ValueError(f"Gauss order must be in [1, {MAX_GAUSS_ORDER}], got {n}")
    x = -np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    for _ in range(100):
        pn, dn = legendre_eval(n, x)
        step = pn / dn
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    x = 0.5 * (x - x[::-1])
    _, dn = legendre_eval(n, x)
    w = 2.0 / ((1 - x**2) * dn**2)
    _freeze(x, w)
    return GaussRule(n, x, w)


def lagrange_matrix(rule: LglRule, xi) -> np.ndarray:
    """Values L_m(xi) for every basis function m, shape (len(xi), p+1).

    Barycentric second form; points coinciding with a node give an exact
    Kronecker row.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    diff = xi[:, None] - rule.nodes[None, :]
    # distances this small would overflow the barycentric terms; the
    # basis equals the Kronecker row there to full precision anyway
    hit = np.abs(diff) < 1e-150
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = rule.bary[None, :] / diff
        vals = terms / np.sum(terms, axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    if np.any(rows):
        vals[rows] = hit[rows].astype(float)
    return vals


def lagrange_eval(rule: LglRule, m: int, xi):
    """Nodal basis function L_m of the rule evaluated at xi."""
    if not 0 <= m <= rule.p:
        raise IndexError(f"basis index {m} outside 0..{rule.p}")
    vals = lagrange_matrix(rule, xi)[:, m]
    return vals[0] if np.ndim(xi) == 0 else vals


def lagrange_derivative_at(rule: LglRule, xi) -> np.ndarray:
    """Derivatives L'_m(xi), shape (len(xi), p+1), for arbitrary points."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x, b = rule.nodes, rule.bary
    out = np.empty((xi.size, x.size))
    D = lagrange_derivative_matrix(rule)
    for i, t in enumerate(xi):
        diff = t - x
        hit = np.flatnonzero(diff == 0.0)
        if hit.size:
            out[i] = D[hit[0]]
            continue
        s = b / diff
        ds = -b / diff**2
        S = s.sum()
        out[i] = (ds * S - s * ds.sum()) / S**2
    return out


@lru_cache(maxsize=None)
def _derivative_matrix(p: int) -> np.ndarray:
    rule = lgl_rule(p)
    x, b = rule.nodes, rule.bary
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (b[None, :] / b[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    D.setflags(write=False)
    return D


def lagrange_derivative_matrix(rule: LglRule) -> np.ndarray:
    """D[i, j] = L'_j(xi_i) on the rule's own nodes (negative-sum diagonal)."""
    return _derivative_matrix(rule.p)
