"""Expected-information-gain scoring of candidate controls.

The hot path is :func:`eig_table`: one likelihood evaluation per
(particle, control) pair, stored in single precision, followed by
per-control reductions accumulated in double precision.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractError
from .smc import ParticleCloud

UTILITIES = ("eig", "mutual_information")


@dataclass(frozen=True)
class ControlGrid:
    taus: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.taus, dtype=np.float64))
        if t.ndim != 1 or t.size == 0:
            raise ConfigurationError("control grid needs at least one value")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("control grid must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "taus", t)

    @classmethod
    def arange(cls, start: float, stop: float, step: float) -> "ControlGrid":
        """Inclusive evenly spaced grid, e.g. ``arange(1, 10, 0.01)`` has 901 points."""
        n = int(round((stop - start) / step)) + 1
        return cls(start + step * np.arange(n))

    @property
    def step(self) -> float:
        return float(self.taus[1] - self.taus[0]) if self.taus.size > 1 else 0.0

    def __len__(self):
        return self.taus.size

    def index_of(self, tau: float) -> int:
        i = int(np.argmin(np.abs(self.taus - tau)))
        if abs(self.taus[i] - tau) > 1e-9 * max(1.0, abs(tau)):
            raise ContractError(f"tau={tau} is not on the control grid")
        return i


@dataclass(frozen=True)
class EigTable:
    values: np.ndarray
    argmax_index: int
    generated_from_shot: int = -1


@dataclass(frozen=True)
class BatchPolicy:
    n_batch: int = 15
    p_exponent: float = 6.0
    #: subtract min(E) before raising to the power
    floor: bool = False

    def __post_init__(self):
        if self.n_batch < 1:
            raise ConfigurationError("n_batch must be at least 1")
        if self.p_exponent < 0:
            raise ConfigurationError("p_exponent must be non-negative")


def predicted_probability(cloud: ParticleCloud, model, tau: float) -> float:
    """Posterior predictive probability of outcome 1 at ``tau``."""
    lik1 = model.likelihood(cloud.locations, tau, 1)
    return float(cloud.weights @ lik1)


def eig_from_likelihoods(p0, p1, weights, utility: str = "eig") -> np.ndarray:
    """Per-control utility from ``(n_controls, n_particles)`` outcome probabilities."""
    w = np.asarray(weights, dtype=np.float64)
    p0 = np.asarray(p0)
    p1 = np.asarray(p1)
    log0 = np.log(p0)
    log1 = np.log(p1)
    pbar0 = p0 @ w
    l0 = log0 @ w
    l1 = log1 @ w
    if utility == "eig":
        return -(1.0 - pbar0) * l1 - pbar0 * l0
    if utility == "mutual_information":
        pbar0 = np.clip(pbar0, 1e-300, 1.0)
        pbar1 = np.clip(1.0 - pbar0, 1e-300, 1.0)
        marginal = -pbar0 * np.log(pbar0) - pbar1 * np.log(pbar1)
        conditional = -((p0 * log0) @ w + (p1 * log1) @ w)
        return marginal - conditional
    raise ConfigurationError(f"unknown utility {utility!r}; expected one of {UTILITIES}")


def eig_table(cloud: ParticleCloud, model, grid: ControlGrid, *, utility: str = "eig",
              precision: str = "mixed", generated_from_shot: int = -1) -> EigTable:
    """Score every control in ``grid`` against the current posterior.

    ``precision="mixed"`` stores the likelihood grid and its logarithms in
    single precision; ``"double"`` keeps everything in double precision.
    """
    if precision not in ("mixed", "double"):
        raise ConfigurationError(f"precision must be 'mixed' or 'double', got {precision!r}")
    dtype = np.float32 if precision == "mixed" else np.float64
    p0, p1 = model.likelihood_grid(cloud.locations, grid.taus, dtype=dtype)
    values = eig_from_likelihoods(p0, p1, cloud.weights, utility)
    return EigTable(values, int(np.argmax(values)), generated_from_shot)


def select_optimal(table: EigTable, grid: ControlGrid) -> float:
    """Control at the maximum utility; ties resolve to the smallest tau."""
    if table.values.size == 0:
        raise ContractError("empty EIG table")
    return float(grid.taus[int(np.argmax(table.values))])


def batch_distribution(values, policy: BatchPolicy) -> np.ndarray:
    """Sampling probabilities proportional to ``(E - floor)**p``."""
    v = np.asarray(values, dtype=np.float64)
    if policy.floor:
        v = v - v.min()
    v = np.clip(v, 0.0, None)
    top = v.max()
    if not np.isfinite(top) or top <= 0.0:
        return np.full(v.size, 1.0 / v.size)
    scaled = v / top
    weights = np.where(scaled > 0.0, scaled ** policy.p_exponent, 0.0)
    return weights / weights.sum()


def sample_batch(table: EigTable, grid: ControlGrid, policy: BatchPolicy, seed=None) -> np.ndarray:
    """Draw ``policy.n_batch`` controls i.i.d. from :func:`batch_distribution`."""
    rng = np.random.default_rng(seed)
    probs = batch_distribution(table.values, policy)
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(policy.n_batch) * cdf[-1], side="right")
    np.minimum(idx, probs.size - 1, out=idx)
    return grid.taus[idx]


@dataclass
class ThroughputReport:
    n_p: int
    grid: int
    precision: str
    n_calls: int
    total_evaluations: int
    elapsed_s: float
    n_batch: int

    @property
    def evaluations_per_call(self) -> int:
        return self.n_p * self.grid

    @property
    def evals_per_s(self) -> float:
        return self.total_evaluations / self.elapsed_s if self.elapsed_s > 0 else float("inf")

    @property
    def latency_us(self) -> float:
        return 1e6 * self.elapsed_s / self.n_calls

    @property
    def evaluations_per_measurement(self) -> float:
        return self.evaluations_per_call / self.n_batch

    @property
    def max_shot_rate_hz(self) -> float:
        """Shots per second the kernel can keep up with at this batch size."""
        return self.evals_per_s / self.evaluations_per_measurement

    def as_row(self) -> dict[str, object]:
        return {"n_p": self.n_p, "grid": self.grid, "precision": self.precision,
                "evals_per_s": f"{self.evals_per_s:.6g}", "latency_us": f"{self.latency_us:.6g}"}


def throughput_bench(model, n_p: int, grid: ControlGrid, duration: float = 2.0, *,
                     precision: str = "mixed", n_batch: int = 15, seed=0,
                     min_calls: int = 1) -> ThroughputReport:
    """Time repeated full-grid :func:`eig_table` calls for about ``duration`` seconds."""
    loc = model.sample_prior(max(n_p, 2), seed)[:n_p]
    cloud = ParticleCloud(loc, np.full(n_p, 1.0 / n_p), model.bounds)
    eig_table(cloud, model, grid, precision=precision)  # compile / warm caches
    calls = 0
    start = time.perf_counter()
    elapsed = 0.0
    while calls < min_calls or elapsed < duration:
        eig_table(cloud, model, grid, precision=precision)
        calls += 1
        elapsed = time.perf_counter() - start
    return ThroughputReport(n_p, len(grid), precision, calls, calls * n_p * len(grid),
                            elapsed, n_batch)
