"""Compiled batch kernels for the (control x particle) likelihood grid.

Both kernels fill two output arrays of shape ``(n_controls, n_particles)``
holding ``Pr(0)`` and ``Pr(1)``. The two outcomes are computed separately
rather than as ``1 - p`` so that tails near 0 keep their relative precision
after the cast to single precision.

Arithmetic runs in double precision; the caller picks the storage dtype
through the output arrays. On a uniform control grid the per-particle
phases ``exp(i * w * tau_j)`` are advanced by a fixed rotation instead of
calling ``sin``/``cos`` for every grid point, and re-anchored every
``_ANCHOR`` steps to bound drift.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_ANCHOR = 128


@nb.njit(cache=True, fastmath=False, inline="always")
def _spin_factor(c, s, cL, sL, hL, r, s2):
    # One nuclear spin's factor 1 - 2 [sin(16 phi)/cos(phi/2)]^2 [...]^2.
    # With x = cos(phi): [sin(16 phi)/cos(phi/2)]^2 = 2 (1 - x) U15(x)^2 and
    # U15 = 16 x T2 T4 T8, so the removable singularity at phi = pi never
    # appears and no arccos is needed.
    x = c * cL - r * s * sL
    t2 = 2.0 * x * x - 1.0
    t4 = 2.0 * t2 * t2 - 1.0
    t8 = 2.0 * t4 * t4 - 1.0
    u = 16.0 * x * t2 * t4 * t8
    ratio = 2.0 * (1.0 - x) * u * u
    amp = s2 * 0.5 * (1.0 - c) * hL
    return 2.0 * ratio * amp


@nb.njit(cache=True)
def nuclear_grid(wt, r, s2, taus, uniform, cL, sL, hL, dec, omdec,
                 A, B, p0, eps, out0, out1):
    """Fill ``out0``/``out1`` with Pr(0)/Pr(1) of the nuclear-spin model.

    ``wt``, ``r``, ``s2`` have shape ``(n_spins, n_particles)`` and hold the
    effective precession frequency, ``(w_h cos(theta) + w_L)/wt`` and
    ``(w_h sin(theta)/wt)^2``. ``cL``, ``sL``, ``hL``, ``dec``, ``omdec`` are
    per-control arrays: ``cos(w_L tau)``, ``sin(w_L tau)``,
    ``sin^2(w_L tau / 2)``, ``exp(-64 tau/T2)`` and ``1 - exp(-64 tau/T2)``.
    """
    nq, n = wt.shape
    m = taus.shape[0]
    c = np.empty((nq, n))
    s = np.empty((nq, n))
    cd = np.empty((nq, n))
    sd = np.empty((nq, n))
    step = taus[1] - taus[0] if m > 1 else 0.0
    if uniform:
        for q in range(nq):
            for k in range(n):
                cd[q, k] = math.cos(wt[q, k] * step)
                sd[q, k] = math.sin(wt[q, k] * step)
    for j in range(m):
        t = taus[0] + j * step if uniform else taus[j]
        if (not uniform) or j % _ANCHOR == 0:
            for q in range(nq):
                for k in range(n):
                    c[q, k] = math.cos(wt[q, k] * t)
                    s[q, k] = math.sin(wt[q, k] * t)
        cLj = cL[j]
        sLj = sL[j]
        hLj = hL[j]
        dj = dec[j]
        odj = omdec[j]
        for k in range(n):
            M = 1.0
            D = 0.0
            for q in range(nq):
                x = _spin_factor(c[q, k], s[q, k], cLj, sLj, hLj, r[q, k], s2[q, k])
                # D tracks 1 - M without cancellation.
                D = D + x * M
                M = M * (1.0 - x)
            q0 = A + B * (M + 1.0 / 3.0) * dj
            q1 = (1.0 - p0) + (4.0 * B / 3.0) * odj + B * D * dj
            if q0 < eps:
                q0 = eps
            elif q0 > 1.0 - eps:
                q0 = 1.0 - eps
            if q1 < eps:
                q1 = eps
            elif q1 > 1.0 - eps:
                q1 = 1.0 - eps
            out0[j, k] = q0
            out1[j, k] = q1
        if uniform:
            for q in range(nq):
                for k in range(n):
                    cc = c[q, k]
                    ss = s[q, k]
                    c[q, k] = cc * cd[q, k] - ss * sd[q, k]
                    s[q, k] = ss * cd[q, k] + cc * sd[q, k]
    return 0.0


@nb.njit(cache=True, inline="always")
def _filter_sum(c):
    # sum_{k in 3,5,11,13} cos(k x) as Chebyshev polynomials of c = cos(x)
    tm = 1.0
    tn = c
    total = 0.0
    for order in range(2, 14):
        tm, tn = tn, 2.0 * c * tn - tm
        if order == 3 or order == 5 or order == 11 or order == 13:
            total += tn
    return total


@nb.njit(cache=True)
def ac_grid(omega, scale, taus, uniform, dec, omdec, A, B, p0, eps, out0, out1):
    """Fill ``out0``/``out1`` with Pr(0)/Pr(1) of the AC-field model.

    ``scale`` is ``16 B gamma / omega`` per particle. The Bessel factor is the
    sixth-order truncated series of J0.
    """
    n = omega.shape[0]
    m = taus.shape[0]
    c = np.empty(n)
    s = np.empty(n)
    cd = np.empty(n)
    sd = np.empty(n)
    step = taus[1] - taus[0] if m > 1 else 0.0
    if uniform:
        for k in range(n):
            cd[k] = math.cos(0.5 * omega[k] * step)
            sd[k] = math.sin(0.5 * omega[k] * step)
    for j in range(m):
        t = taus[0] + j * step if uniform else taus[j]
        if (not uniform) or j % _ANCHOR == 0:
            for k in range(n):
                c[k] = math.cos(0.5 * omega[k] * t)
                s[k] = math.sin(0.5 * omega[k] * t)
        dj = dec[j]
        odj = omdec[j]
        for k in range(n):
            ck = c[k]
            a = scale[k] * s[k] * (1.0 - ck * ck) * _filter_sum(ck)
            a2 = a * a
            # 1 - J0 truncated at sixth order
            one_minus_j = a2 * (0.25 - a2 * (1.0 / 64.0 - a2 / 2304.0))
            q0 = A + B * (1.0 - one_minus_j) * dj
            q1 = (1.0 - p0) + B * (one_minus_j * dj + odj)
            if q0 < eps:
                q0 = eps
            elif q0 > 1.0 - eps:
                q0 = 1.0 - eps
            if q1 < eps:
                q1 = eps
            elif q1 > 1.0 - eps:
                q1 = 1.0 - eps
            out0[j, k] = q0
            out1[j, k] = q1
        if uniform:
            for k in range(n):
                cc = c[k]
                ss = s[k]
                c[k] = cc * cd[k] - ss * sd[k]
                s[k] = ss * cd[k] + cc * sd[k]
    return 0.0


def is_uniform(taus: np.ndarray) -> bool:
    """True when ``taus`` is an evenly spaced ascending grid."""
    if taus.shape[0] < 3:
        return True
    d = np.diff(taus)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=1e-12 * max(1.0, abs(taus[-1]))))
