"""Independent reference computations used to validate the closed forms.

These are deliberately slow and literal: explicit matrices for the pulse
sequence, and quadrature for the field-phase average.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, special

from ..exceptions import ContractError
from .nuclear import NuclearModelConfig, NuclearSpinParams

MAX_ORACLE_SPINS = 3

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_XY8 = "XYXYYXYX"


def _rotation(axis: str, angle: float) -> np.ndarray:
    pauli = _SX if axis == "X" else _SY
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * pauli


def _embed(op: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.eye(1)
    for i in range(n):
        out = np.kron(out, op if i == q else np.eye(2))
    return out


def _conditional_hamiltonians(params: NuclearSpinParams, omega_L: float):
    # nuclear operators are spin-1/2 (Pauli / 2)
    n = params.n_spins
    h0 = sum(_embed(0.5 * omega_L * _SZ, q, n) for q in range(n))
    h1 = sum(_embed(0.5 * ((w * np.cos(t) + omega_L) * _SZ + w * np.sin(t) * _SX), q, n)
             for q, (w, t) in enumerate(zip(params.omega_h, params.theta)))
    return h0, h1


def _propagator(h: np.ndarray, t: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def xy84_sequence(tau: float):
    """The XY8-4 sequence as ``("pulse", axis, angle)``/``("free", duration)`` steps."""
    steps = [("pulse", "Y", np.pi / 2)]
    for _ in range(4):
        steps.append(("free", tau))
        for i, axis in enumerate(_XY8):
            steps.append(("pulse", axis, np.pi))
            steps.append(("free", tau if i == len(_XY8) - 1 else 2 * tau))
    steps.append(("pulse", "Y", 3 * np.pi / 2))
    return steps


def oracle_xy84_population(params: NuclearSpinParams, cfg: NuclearModelConfig,
                           tau: float) -> float:
    """Population of the probe |0> after XY8-4, by explicit density-matrix steps.

    The probe starts in |0>, nuclear spins maximally mixed. Free evolution is
    ``|0><0| (x) H0 + |1><1| (x) H1``; pulses are instantaneous probe
    rotations. Pure dephasing multiplies probe coherences by
    ``exp(-t/T2)`` during each free segment, which is the exact solution of
    the dephasing Lindblad term because the Hamiltonian is block diagonal in
    the probe basis.
    """
    n = params.n_spins
    if n > MAX_ORACLE_SPINS:
        raise ContractError(f"oracle limited to {MAX_ORACLE_SPINS} spins, got {n}")
    dn = 2 ** n
    h0, h1 = _conditional_hamiltonians(params, cfg.omega_L)
    free = {}
    for d in (tau, 2 * tau):
        u = np.zeros((2 * dn, 2 * dn), dtype=complex)
        u[:dn, :dn] = _propagator(h0, d)
        u[dn:, dn:] = _propagator(h1, d)
        free[d] = u
    rho = np.zeros((2 * dn, 2 * dn), dtype=complex)
    rho[:dn, :dn] = np.eye(dn) / dn
    for step in xy84_sequence(tau):
        if step[0] == "pulse":
            p = np.kron(_rotation(step[1], step[2]), np.eye(dn))
            rho = p @ rho @ p.conj().T
        else:
            u = free[step[1]]
            rho = u @ rho @ u.conj().T
            if np.isfinite(cfg.T2):
                k = np.exp(-step[1] / cfg.T2)
                rho[:dn, dn:] *= k
                rho[dn:, :dn] *= k
    return float(np.trace(rho[:dn, :dn]).real)


def phase_average_quadrature(a: float) -> float:
    """(1/2pi) * integral over the field phase of the fixed-phase Pr(0)."""
    val, _ = integrate.quad(lambda p: 0.5 * (1.0 + np.cos(a * np.cos(p))), 0.0, 2.0 * np.pi,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return val / (2.0 * np.pi)


def modulated_phase(omega: float, B: float, gamma: float, tau: float, phase: float) -> float:
    """Probe phase ``gamma B * integral h(t) cos(omega t + phase)`` over 16 tau.

    ``h`` is +1 on ``[(4k-1)tau, (4k+1)tau)`` and -1 on ``[(4k+1)tau, (4k+3)tau)``;
    each constant piece is integrated exactly.
    """
    edges = [0.0] + [(2 * i + 1) * tau for i in range(8)] + [16 * tau]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sign = 1.0 if ((0.5 * (lo + hi) / tau + 1.0) % 4.0) < 2.0 else -1.0
        total += sign * (np.sin(omega * hi + phase) - np.sin(omega * lo + phase)) / omega
    return gamma * B * total


def exact_j0(a):
    return special.j0(a)
