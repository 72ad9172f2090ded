"""Probe spin sensing an oscillating field through an XY8 filter."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .. import kernels
from ..exceptions import ConfigurationError
from ..smc import init_uniform
from .base import EPS, SensingModel, clamp_probability
from .readout import ReadoutFidelity, apply_readout_noise

TWO_PI = 2.0 * np.pi

#: electron gyromagnetic ratio, 28.03 MHz/mT as rad/us/mT
GAMMA_DEFAULT = TWO_PI * 28.03
T2_DEFAULT = 170.0
#: field angular frequency support, 79.6 kHz .. 1.35 MHz in rad/us
OMEGA_BOUNDS = (TWO_PI * 0.0796, TWO_PI * 1.35)
#: support of the dimensionless ratio B * gamma / omega
RATIO_BOUNDS = (0.013, 0.177)

_FILTER_HARMONICS = (3, 5, 11, 13)


@dataclass(frozen=True)
class AcFieldParams:
    omega: float
    B: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ConfigurationError("field frequency must be positive")
        if self.B < 0:
            raise ConfigurationError("field magnitude must be non-negative")

    def as_row(self) -> np.ndarray:
        return np.array([self.omega, self.B], dtype=float)


@dataclass(frozen=True)
class AcModelConfig:
    gamma: float = GAMMA_DEFAULT
    T2: float = T2_DEFAULT
    fidelity: ReadoutFidelity = field(default_factory=ReadoutFidelity)
    bessel_order: int = 6
    omega_bounds: tuple[float, float] = OMEGA_BOUNDS
    ratio_bounds: tuple[float, float] = RATIO_BOUNDS

    def __post_init__(self):
        if self.gamma <= 0 or self.T2 <= 0:
            raise ConfigurationError("gamma and T2 must be positive")
        if self.bessel_order < 0 or self.bessel_order % 2:
            raise ConfigurationError("bessel_order must be a non-negative even integer")


def _split(params):
    if isinstance(params, AcFieldParams):
        return np.float64(params.omega), np.float64(params.B)
    arr = np.asarray(params, dtype=float)
    return arr[..., 0], arr[..., 1]


def filter_amplitude(omega, B, gamma: float, tau):
    """Accumulated phase amplitude ``a`` of the XY8 filter."""
    x = 0.5 * np.asarray(omega) * np.asarray(tau)
    harmonics = sum(np.cos(k * x) for k in _FILTER_HARMONICS)
    return 16.0 * np.asarray(B) * gamma / np.asarray(omega) * np.sin(x) ** 3 * harmonics


def bessel_j0_series(a, order: int = 6):
    """Maclaurin series of J0 truncated after the ``a**order`` term."""
    a = np.asarray(a, float)
    q = -0.25 * a * a
    return sum(q ** m / factorial(m) ** 2 for m in range(order // 2 + 1))


def likelihood_ac(params, cfg: AcModelConfig, tau, eps: float = EPS):
    """Phase-averaged Pr(0 | (omega, B), tau) using the truncated J0 series."""
    omega, B = _split(params)
    tau = np.asarray(tau, float)
    a = filter_amplitude(omega, B, cfg.gamma, tau)
    ideal = 0.5 * (1.0 + bessel_j0_series(a, cfg.bessel_order) * np.exp(-16.0 * tau / cfg.T2))
    return clamp_probability(apply_readout_noise(ideal, cfg.fidelity), eps)


def fixed_phase_probability(omega, B, gamma: float, T2: float, tau, phase):
    """Ideal Pr(0) for one known initial field phase (no phase averaging)."""
    a = filter_amplitude(omega, B, gamma, tau)
    arg = 8.0 * np.asarray(omega) * np.asarray(tau) + np.asarray(phase)
    return 0.5 + 0.5 * np.cos(a * np.cos(arg)) * np.exp(-16.0 * np.asarray(tau) / T2)


def simulate_shot_ac(true_params, cfg: AcModelConfig, tau: float, seed=None) -> int:
    """One outcome with a fresh uniformly random field phase.

    The exact fixed-phase probability is used, so the inference likelihood
    (phase-averaged and series-truncated) is only an approximation of it.
    """
    rng = np.random.default_rng(seed)
    return _ac_shot(true_params, cfg, tau, rng)


def _ac_shot(true_params, cfg, tau, rng) -> int:
    omega, B = _split(true_params)
    phase = rng.uniform(0.0, TWO_PI)
    p = fixed_phase_probability(omega, B, cfg.gamma, cfg.T2, tau, phase)
    p0 = float(apply_readout_noise(p, cfg.fidelity))
    return 0 if rng.random() < p0 else 1


class AcFieldModel(SensingModel):
    probe_factor = 16.0
    param_names = ("omega", "B")

    def __init__(self, cfg: AcModelConfig | None = None):
        self.cfg = cfg or AcModelConfig()
        c = self.cfg
        lo, hi = c.omega_bounds
        rlo, rhi = c.ratio_bounds
        self._bounds = np.array([[lo, hi], [rlo * lo / c.gamma, rhi * hi / c.gamma]])

    @property
    def bounds(self):
        return self._bounds

    @property
    def groups(self):
        return {"omega": [0], "B": [1]}

    def sample_prior(self, n, seed=None):
        # uniform in omega and in B*gamma/omega
        c = self.cfg
        box = np.array(init_uniform([c.omega_bounds, c.ratio_bounds], n, seed).locations)
        box[:, 1] *= box[:, 0] / c.gamma
        return box

    def constrain(self, locations):
        c = self.cfg
        loc = np.array(locations, dtype=float, copy=True)
        loc[:, 0] = np.clip(loc[:, 0], *c.omega_bounds)
        loc[:, 1] = np.clip(loc[:, 1], c.ratio_bounds[0] * loc[:, 0] / c.gamma,
                            c.ratio_bounds[1] * loc[:, 0] / c.gamma)
        return loc

    def likelihood_grid(self, locations, taus, dtype=np.float32):
        c = self.cfg
        loc = np.asarray(locations, dtype=np.float64)
        taus = np.ascontiguousarray(taus, dtype=np.float64)
        if c.bessel_order != 6:
            p0 = self.prob0(loc[None, :, :], taus[:, None])
            return p0.astype(dtype), (1.0 - p0).astype(dtype)
        omega = np.ascontiguousarray(loc[:, 0])
        scale = 16.0 * loc[:, 1] * c.gamma / omega
        x = -16.0 * taus / c.T2
        f = c.fidelity
        out0 = np.empty((taus.shape[0], loc.shape[0]), dtype=dtype)
        out1 = np.empty_like(out0)
        kernels.ac_grid(omega, scale, taus, kernels.is_uniform(taus), np.exp(x), -np.expm1(x),
                        0.5 * (f.p0 - f.p1 + 1.0), 0.5 * f.contrast, f.p0, self.eps, out0, out1)
        return out0, out1

    def prob0(self, params, tau):
        return likelihood_ac(params, self.cfg, tau, self.eps)

    def simulate_shot(self, true_params, tau, rng):
        return _ac_shot(true_params, self.cfg, tau, rng)

    def to_params(self, row):
        return AcFieldParams(float(row[0]), float(row[1]))

    def describe(self):
        c = self.cfg
        return {"model": "ac", "gamma_rad_per_us_per_mT": c.gamma, "T2_us": c.T2,
                "p0": c.fidelity.p0, "p1": c.fidelity.p1, "bessel_order": c.bessel_order,
                "omega_bounds_rad_per_us": list(c.omega_bounds),
                "ratio_bounds": list(c.ratio_bounds)}
