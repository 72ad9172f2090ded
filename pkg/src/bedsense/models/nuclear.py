"""Central probe spin coupled to ``n_C`` nuclear spins under XY8-4 decoupling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..exceptions import ConfigurationError
from .base import EPS, SensingModel, clamp_probability
from .readout import ReadoutFidelity, apply_readout_noise

TWO_PI = 2.0 * np.pi

#: 429.4 kHz nuclear Larmor frequency, in rad/us
OMEGA_L_DEFAULT = TWO_PI * 0.4294
#: probe coherence time, us
T2_DEFAULT = 3000.0
#: prior support of each hyperfine magnitude, rad/us (6 kHz .. 265 kHz)
OMEGA_H_BOUNDS = (TWO_PI * 0.006, TWO_PI * 0.265)


@dataclass(frozen=True)
class NuclearSpinParams:
    """Hyperfine magnitudes (rad/us) and angles (rad), one entry per spin."""

    omega_h: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        wh = np.atleast_1d(np.asarray(self.omega_h, dtype=float))
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if wh.shape != th.shape:
            raise ConfigurationError("omega_h and theta need one entry per spin")
        if np.any(wh < 0):
            raise ConfigurationError("hyperfine magnitudes must be non-negative")
        object.__setattr__(self, "omega_h", wh)
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_khz_deg(cls, omega_h_khz, theta_deg):
        return cls(TWO_PI * 1e-3 * np.asarray(omega_h_khz, float), np.radians(theta_deg))

    @classmethod
    def from_row(cls, row):
        row = np.asarray(row, dtype=float)
        n = row.shape[-1] // 2
        return cls(row[..., :n], row[..., n:])

    def as_row(self) -> np.ndarray:
        return np.concatenate([self.omega_h, self.theta])

    @property
    def n_spins(self) -> int:
        return self.omega_h.shape[0]


@dataclass(frozen=True)
class NuclearModelConfig:
    omega_L: float = OMEGA_L_DEFAULT
    T2: float = T2_DEFAULT
    n_C: int = 2
    fidelity: ReadoutFidelity = field(default_factory=ReadoutFidelity)
    omega_h_bounds: tuple[float, float] = OMEGA_H_BOUNDS
    theta_bounds: tuple[float, float] = (0.0, np.pi)

    def __post_init__(self):
        if self.omega_L <= 0:
            raise ConfigurationError("omega_L must be positive")
        if self.T2 <= 0:
            raise ConfigurationError("T2 must be positive")
        if self.n_C < 1:
            raise ConfigurationError("need at least one nuclear spin")


def _split(params):
    if isinstance(params, NuclearSpinParams):
        return params.omega_h, params.theta
    arr = np.asarray(params, dtype=float)
    n = arr.shape[-1] // 2
    return arr[..., :n], arr[..., n:]


def spin_factors(omega_h, theta, omega_L: float, tau):
    """Per-spin factors whose product is the XY8-4 echo signal ``M``.

    Broadcasts ``omega_h``/``theta`` (trailing axis = spins) against ``tau``;
    the result has the broadcast shape. Uses the Chebyshev identity
    ``sin(16 phi)/cos(phi/2) = 2 sin(phi/2) U15(cos phi)`` so no branch of
    ``arccos`` is chosen and the removable singularity at ``phi = pi`` is gone.
    """
    wh = np.asarray(omega_h, float)
    th = np.asarray(theta, float)
    tau = np.asarray(tau, float)
    wt = np.sqrt(wh * wh + omega_L * omega_L + 2.0 * wh * omega_L * np.cos(th))
    c, s = np.cos(wt * tau), np.sin(wt * tau)
    x = c * np.cos(omega_L * tau) - (wh * np.cos(th) + omega_L) / wt * s * np.sin(omega_L * tau)
    t2 = 2 * x * x - 1
    t4 = 2 * t2 * t2 - 1
    t8 = 2 * t4 * t4 - 1
    ratio = 2.0 * (1.0 - x) * (16.0 * x * t2 * t4 * t8) ** 2
    amp = (wh * np.sin(th) / wt) ** 2 * (0.5 * (1.0 - c)) * np.sin(0.5 * omega_L * tau) ** 2
    return 1.0 - 2.0 * ratio * amp


def echo_signal(params, omega_L: float, tau) -> np.ndarray:
    """Product ``M`` over spins; parameter rows broadcast against ``tau``."""
    wh, th = _split(params)
    tau = np.asarray(tau, float)
    return np.prod(spin_factors(wh, th, omega_L, tau[..., None]), axis=-1)


def likelihood_nuclear(params, cfg: NuclearModelConfig, tau, eps: float = EPS):
    """Pr(0 | (omega_h, theta), tau) with readout noise, clamped to [eps, 1-eps]."""
    tau = np.asarray(tau, float)
    M = echo_signal(params, cfg.omega_L, tau)
    ideal = 1.0 / 3.0 + 0.5 * (M + 1.0 / 3.0) * np.exp(-64.0 * tau / cfg.T2)
    return clamp_probability(apply_readout_noise(ideal, cfg.fidelity), eps)


def simulate_shot_nuclear(true_params, cfg: NuclearModelConfig, tau: float, seed=None) -> int:
    """Bernoulli draw of one outcome (0 or 1) at the true parameters."""
    rng = np.random.default_rng(seed)
    p0 = float(likelihood_nuclear(true_params, cfg, tau))
    return 0 if rng.random() < p0 else 1


class NuclearSpinModel(SensingModel):
    probe_factor = 64.0

    def __init__(self, cfg: NuclearModelConfig | None = None):
        self.cfg = cfg or NuclearModelConfig()
        n = self.cfg.n_C
        self.param_names = tuple(f"omega_h_{q + 1}" for q in range(n)) + tuple(
            f"theta_{q + 1}" for q in range(n))
        self._bounds = np.array([self.cfg.omega_h_bounds] * n + [self.cfg.theta_bounds] * n)

    @property
    def bounds(self) -> np.ndarray:
        return self._bounds

    @property
    def groups(self) -> dict[str, list[int]]:
        n = self.cfg.n_C
        return {"omega_h": list(range(n)), "theta": list(range(n, 2 * n))}

    @property
    def n_spins(self) -> int:
        return self.cfg.n_C

    def canonicalize(self, locations: np.ndarray) -> np.ndarray:
        """Fold each angle into [0, pi] and sort spins by hyperfine magnitude.

        Both maps leave the likelihood unchanged: it depends on each angle only
        through ``cos`` and ``sin^2``, and the spin product is symmetric.
        """
        loc = np.array(locations, dtype=float, copy=True)
        n = self.cfg.n_C
        wh, th = loc[..., :n], np.mod(loc[..., n:], 2.0 * np.pi)
        th = np.where(th > np.pi, 2.0 * np.pi - th, th)
        order = np.argsort(wh, axis=-1, kind="stable")
        loc[..., :n] = np.take_along_axis(wh, order, axis=-1)
        loc[..., n:] = np.take_along_axis(th, order, axis=-1)
        return loc

    def likelihood_grid(self, locations, taus, dtype=np.float32):
        cfg = self.cfg
        loc = np.asarray(locations, dtype=np.float64)
        taus = np.ascontiguousarray(taus, dtype=np.float64)
        n = cfg.n_C
        wh, th = loc[:, :n].T, loc[:, n:].T
        wL = cfg.omega_L
        wt = np.sqrt(wh * wh + wL * wL + 2.0 * wh * wL * np.cos(th))
        r = (wh * np.cos(th) + wL) / wt
        s2 = (wh * np.sin(th) / wt) ** 2
        x = -64.0 * taus / cfg.T2
        f = cfg.fidelity
        out0 = np.empty((taus.shape[0], loc.shape[0]), dtype=dtype)
        out1 = np.empty_like(out0)
        kernels.nuclear_grid(
            np.ascontiguousarray(wt), np.ascontiguousarray(r), np.ascontiguousarray(s2),
            taus, kernels.is_uniform(taus),
            np.cos(wL * taus), np.sin(wL * taus), np.sin(0.5 * wL * taus) ** 2,
            np.exp(x), -np.expm1(x),
            (f.p0 - 2.0 * f.p1 + 2.0) / 3.0, 0.5 * f.contrast, f.p0, self.eps, out0, out1)
        return out0, out1

    def prob0(self, params, tau):
        return likelihood_nuclear(params, self.cfg, tau, self.eps)

    def simulate_shot(self, true_params, tau, rng):
        p0 = float(self.prob0(true_params, tau))
        return 0 if rng.random() < p0 else 1

    def to_params(self, row):
        return NuclearSpinParams.from_row(row)

    def describe(self):
        c = self.cfg
        return {"model": "nuclear", "n_C": c.n_C, "omega_L_rad_per_us": c.omega_L,
                "T2_us": c.T2, "p0": c.fidelity.p0, "p1": c.fidelity.p1,
                "omega_h_bounds_rad_per_us": list(c.omega_h_bounds),
                "theta_bounds_rad": list(c.theta_bounds)}
