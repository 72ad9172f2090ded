"""Oracle suites comparing the closed-form likelihoods with independent computations."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .models import (AcModelConfig, NuclearModelConfig, NuclearSpinModel, NuclearSpinParams,
                     bessel_j0_series, filter_amplitude, likelihood_nuclear,
                     oracle_xy84_population, phase_average_quadrature)
from .models.nuclear import OMEGA_H_BOUNDS
from .models.oracle import exact_j0, modulated_phase

NUCLEAR_TOL = 1e-6
SERIES_TOL = 1e-6
QUADRATURE_TOL = 1e-8
PHASE_TOL = 1e-9


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    n_checks: int
    elapsed_s: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}  {self.name:<28s} max_err={self.max_error:.3e} "
                f"tol={self.tolerance:.0e} checks={self.n_checks} ({self.elapsed_s:.1f} s)")


def _result(name, errors, tol, t0) -> SuiteResult:
    errors = np.asarray(errors, dtype=float)
    worst = float(np.max(errors)) if errors.size else 0.0
    ok = bool(errors.size and np.all(np.isfinite(errors)) and worst < tol)
    return SuiteResult(name, ok, worst, tol, int(errors.size), time.perf_counter() - t0)


def nuclear_oracle_cases(n_cases: int, n_tau: int = 20, seed=0):
    """Seeded random (params, taus) cases with one or two spins."""
    rng = np.random.default_rng(seed)
    for i in range(n_cases):
        n = 1 + i % 2
        wh = rng.uniform(*OMEGA_H_BOUNDS, size=n)
        th = rng.uniform(0.0, np.pi, size=n)
        taus = np.round(rng.uniform(1.0, 10.0, size=n_tau), 2)
        yield NuclearSpinParams(wh, th), taus


def nuclear_oracle_errors(n_cases: int = 200, n_tau: int = 20, seed=0) -> np.ndarray:
    """|closed form - explicit XY8-4 propagation|, ideal readout and T2 -> inf.

    Both the numpy reference and the compiled grid kernel (double precision)
    are compared, so each case contributes ``2 * n_tau`` errors.
    """
    errs = []
    for params, taus in nuclear_oracle_cases(n_cases, n_tau, seed):
        cfg = NuclearModelConfig(T2=np.inf, n_C=params.n_spins)
        model = NuclearSpinModel(cfg)
        oracle = np.array([oracle_xy84_population(params, cfg, t) for t in taus])
        closed = likelihood_nuclear(params, cfg, taus, eps=0.0)
        grid0, _ = model.likelihood_grid(params.as_row()[None, :], np.sort(taus), np.float64)
        errs.append(np.abs(closed - oracle))
        errs.append(np.abs(grid0[:, 0] - oracle[np.argsort(taus)]))
    return np.concatenate(errs)


def bessel_errors(n: int = 1000, a_max: float = 0.5, order: int = 6):
    """Series-vs-J0 and phase-average-vs-quadrature errors on ``[0, a_max]``."""
    a = np.linspace(0.0, a_max, n)
    series = np.abs(bessel_j0_series(a, order) - exact_j0(a))
    quad = np.abs(0.5 * (1.0 + exact_j0(a)) - np.array([phase_average_quadrature(x) for x in a]))
    return series, quad


def filter_phase_errors(n_cases: int = 200, seed=0) -> np.ndarray:
    """|a cos(8 omega tau + phi)| against the piecewise modulation integral."""
    rng = np.random.default_rng(seed)
    cfg = AcModelConfig()
    errs = []
    for _ in range(n_cases):
        omega = rng.uniform(*cfg.omega_bounds)
        B = rng.uniform(*cfg.ratio_bounds) * omega / cfg.gamma
        tau = rng.uniform(0.51, 7.0)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        a = filter_amplitude(omega, B, cfg.gamma, tau)
        closed = abs(float(a) * np.cos(8.0 * omega * tau + phi))
        errs.append(abs(closed - abs(modulated_phase(omega, B, cfg.gamma, tau, phi))))
    return np.array(errs)


def run_suites(n_cases: int = 200, seed=0) -> list[SuiteResult]:
    out = []
    t0 = time.perf_counter()
    out.append(_result("nuclear_xy84_oracle", nuclear_oracle_errors(n_cases, seed=seed),
                       NUCLEAR_TOL, t0))
    t0 = time.perf_counter()
    series, quad = bessel_errors()
    out.append(_result("bessel_series_vs_j0", series, SERIES_TOL, t0))
    out.append(_result("phase_average_quadrature", quad, QUADRATURE_TOL, t0))
    t0 = time.perf_counter()
    out.append(_result("ac_filter_phase_integral", filter_phase_errors(seed=seed), PHASE_TOL, t0))
    return out
