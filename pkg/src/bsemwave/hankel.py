"""Bessel J0, J1, Y0, Y1 and Hankel H0^(1), H1^(1) for real positive arguments.

Ascending series below ``SERIES_LIMIT``; above it the Hankel asymptotic
expansion truncated at its smallest term.  Vectorised over numpy arrays.
"""
from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_LIMIT = 12.0
_N_SERIES = 60
_N_ASYM = 40


def _series(z):
    """J0, J1, Y0, Y1 from the ascending series (z <= SERIES_LIMIT)."""
    h = 0.5 * z
    q = -h * h
    # term_k = (-z^2/4)^k / (k!)^2 ; J1 terms carry an extra h/(k+1)
    t = np.ones_like(z)
    j0 = t.copy()
    j1 = t.copy()  # multiplied by h at the end
    s0 = np.zeros_like(z)  # sum H_k term_k
    s1 = np.zeros_like(z)  # sum (H_k + H_{k+1}) term_k / (k+1)
    hk = 0.0
    s1 += 1.0  # k = 0: H_0 + H_1 = 1
    for k in range(1, _N_SERIES):
        t = t * q / (k * k)
        hk_next = hk + 1.0 / k
        j0 += t
        j1 += t / (k + 1)
        s0 += hk_next * t
        s1 += (2 * hk_next + 1.0 / (k + 1)) * t / (k + 1)
        hk = hk_next
        if k > 4 and np.max(np.abs(t), initial=0.0) < 1e-18:
            break
    j1 = j1 * h
    lg = np.log(h) + EULER_GAMMA
    y0 = (2 / np.pi) * (lg * j0 - s0)
    # Y1 = -2/(pi z) + (2/pi) ln(z/2) J1 - (1/pi) sum (psi(k+1)+psi(k+2)) (z/2)^{2k+1}/(k!(k+1)!)
    # with psi(k+1) + psi(k+2) = -2 gamma + H_k + H_{k+1}
    y1 = -2 / (np.pi * z) + (2 / np.pi) * lg * j1 - (1 / np.pi) * h * s1
    return j0, j1, y0, y1


def _asymptotic(z, nu):
    """Hankel H_nu^(1)(z) from the large-argument expansion."""
    mu = 4.0 * nu * nu
    term = np.ones_like(z, dtype=complex)
    total = term.copy()
    best = np.abs(term)
    done = np.zeros(z.shape, bool)
    for k in range(1, _N_ASYM):
        new = term * 1j * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        mag = np.abs(new)
        grow = mag >= best
        done |= grow
        total = np.where(done, total, total + new)
        best = np.where(done, best, mag)
        term = new
        if np.all(done | (mag < 1e-18)):
            break
    phase = z - (nu * 0.5 + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * phase) * total


def _split(z):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("Hankel functions need strictly positive real arguments")
    return z


def bessel_all(z):
    """(J0, J1, Y0, Y1) at z > 0."""
    z = _split(z)
    flat = np.atleast_1d(z).ravel()
    out = [np.empty_like(flat) for _ in range(4)]
    lo = flat <= SERIES_LIMIT
    if np.any(lo):
        for o, v in zip(out, _series(flat[lo])):
            o[lo] = v
    hi = ~lo
    if np.any(hi):
        h0 = _asymptotic(flat[hi], 0)
        h1 = _asymptotic(flat[hi], 1)
        out[0][hi], out[2][hi] = h0.real, h0.imag
        out[1][hi], out[3][hi] = h1.real, h1.imag
    return tuple(o.reshape(z.shape)[()] for o in out)


def hankel1_0(z):
    """H_0^(1)(z) = J0(z) + i Y0(z)."""
    j0, _, y0, _ = bessel_all(z)
    return j0 + 1j * y0


def hankel1_1(z):
    """H_1^(1)(z) = J1(z) + i Y1(z)."""
    _, j1, _, y1 = bessel_all(z)
    return j1 + 1j * y1


def hankel1_01(z):
    """Both orders at once: (H_0^(1)(z), H_1^(1)(z))."""
    j0, j1, y0, y1 = bessel_all(z)
    return j0 + 1j * y0, j1 + 1j * y1
