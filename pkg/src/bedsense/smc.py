"""Weighted-particle posterior: Bayes updates, Liu-West resampling, moments.

All functions are pure: they take a :class:`ParticleCloud` and return a new
one. Particle arrays are marked read-only so a cloud can be handed to
another thread as a snapshot without copying.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConfigurationError, ContractError, DegenerateUpdateError

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted particle approximation of a posterior distribution."""

    locations: np.ndarray
    weights: np.ndarray
    bounds: np.ndarray | None = None

    def __post_init__(self):
        loc = np.array(self.locations, dtype=np.float64, ndmin=2)
        w = np.array(self.weights, dtype=np.float64)
        if loc.shape[0] != w.shape[0]:
            raise ConfigurationError(
                f"{loc.shape[0]} locations but {w.shape[0]} weights")
        object.__setattr__(self, "locations", _frozen(loc))
        object.__setattr__(self, "weights", _frozen(w))
        if self.bounds is not None:
            object.__setattr__(self, "bounds", _frozen(np.array(self.bounds, dtype=np.float64)))

    @property
    def n_particles(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def with_weights(self, weights: np.ndarray) -> "ParticleCloud":
        return ParticleCloud(self.locations, weights, self.bounds)

    def with_locations(self, locations: np.ndarray) -> "ParticleCloud":
        return ParticleCloud(locations, self.weights, self.bounds)


@dataclass(frozen=True)
class ResamplerConfig:
    a: float = 0.98
    ess_threshold_fraction: float = 0.5
    remap: bool = True

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise ConfigurationError(f"Liu-West a must lie in (0, 1], got {self.a}")
        if not 0.0 < self.ess_threshold_fraction < 1.0:
            raise ConfigurationError(
                f"ess_threshold_fraction must lie in (0, 1), got {self.ess_threshold_fraction}")


@dataclass
class PosteriorSummary:
    mean: np.ndarray
    covariance: np.ndarray
    abs_uncertainty: np.ndarray
    rel_uncertainty: np.ndarray
    mean_rel_per_group: dict[str, float] = field(default_factory=dict)
    param_names: tuple[str, ...] = ()

    @property
    def max_group_rel(self) -> float:
        return max(self.mean_rel_per_group.values()) if self.mean_rel_per_group else float("inf")


def _check_bounds(bounds) -> np.ndarray:
    b = np.array(bounds, dtype=np.float64, ndmin=2)
    if b.ndim != 2 or b.shape[1] != 2:
        raise ConfigurationError(f"bounds must have shape (d, 2), got {b.shape}")
    if not np.all(np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
        raise ConfigurationError(f"each bound needs finite lo < hi, got {b.tolist()}")
    return b


def init_uniform(bounds, n_p: int, seed=None) -> ParticleCloud:
    """Draw ``n_p`` particles i.i.d. uniform over the box ``bounds``."""
    b = _check_bounds(bounds)
    if n_p < 2:
        raise ConfigurationError(f"need at least 2 particles, got {n_p}")
    rng = np.random.default_rng(seed)
    loc = rng.uniform(b[:, 0], b[:, 1], size=(n_p, b.shape[0]))
    return ParticleCloud(loc, np.full(n_p, 1.0 / n_p), b)


def bayes_update(cloud: ParticleCloud, likelihoods) -> ParticleCloud:
    """Multiply weights by per-particle likelihoods and renormalize."""
    lik = np.asarray(likelihoods, dtype=np.float64)
    if lik.shape != cloud.weights.shape:
        raise ContractError(f"likelihood vector shape {lik.shape} != {cloud.weights.shape}")
    if np.any(lik < 0.0) or np.any(lik > 1.0):
        raise ContractError("likelihoods must lie in [0, 1]")
    w = cloud.weights * lik
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateUpdateError("posterior mass vanished on every particle")
    return cloud.with_weights(w / total)


def effective_sample_size(cloud: ParticleCloud) -> float:
    w = cloud.weights
    return float(1.0 / np.dot(w, w))


def weighted_moments(cloud: ParticleCloud) -> tuple[np.ndarray, np.ndarray]:
    w = cloud.weights
    mean = w @ cloud.locations
    dx = cloud.locations - mean
    cov = (dx * w[:, None]).T @ dx
    return mean, 0.5 * (cov + cov.T)


def _psd_sqrt(cov: np.ndarray) -> np.ndarray | None:
    if not np.all(np.isfinite(cov)):
        return None
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def resample_liu_west(cloud: ParticleCloud, cfg: ResamplerConfig, seed=None,
                      model=None) -> ParticleCloud:
    """Liu-West resampling.

    Ancestors are drawn multinomially; each child sits at
    ``a * x_parent + (1 - a) * mean`` plus Gaussian noise with covariance
    ``(1 - a^2) * cov``. Children are clamped into the support (the model's
    ``constrain`` when given, else the cloud's bounds) and, when
    ``cfg.remap`` is set, canonicalized through :func:`remap_labels`.
    """
    rng = np.random.default_rng(seed)
    n = cloud.n_particles
    mean, cov = weighted_moments(cloud)
    cdf = np.cumsum(cloud.weights)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    np.minimum(idx, n - 1, out=idx)
    a = cfg.a
    children = a * cloud.locations[idx] + (1.0 - a) * mean
    if a < 1.0:
        root = _psd_sqrt(cov)
        if root is None:
            logger.warning("non-finite posterior covariance; Liu-West jitter disabled")
        else:
            z = rng.standard_normal((n, cloud.dim))
            children = children + np.sqrt(1.0 - a * a) * (z @ root.T)
    if model is not None:
        children = model.constrain(children)
    elif cloud.bounds is not None:
        children = np.clip(children, cloud.bounds[:, 0], cloud.bounds[:, 1])
    out = ParticleCloud(children, np.full(n, 1.0 / n), cloud.bounds)
    if cfg.remap and model is not None:
        out = remap_labels(out, model)
    return out


def remap_labels(cloud: ParticleCloud, model) -> ParticleCloud:
    """Replace each particle by its model-specific canonical representative."""
    return cloud.with_locations(model.canonicalize(np.array(cloud.locations)))


def _default_groups(n_spins: int, dim: int, names: Sequence[str]) -> dict[str, list[int]]:
    if n_spins > 0:
        return {"omega_h": list(range(n_spins)),
                "theta": list(range(n_spins, 2 * n_spins))}
    return {names[j] if j < len(names) else f"x{j}": [j] for j in range(dim)}


def summarize(cloud: ParticleCloud, groups: int | Mapping[str, Sequence[int]] = 0,
              param_names: Sequence[str] = ()) -> PosteriorSummary:
    """Posterior mean, covariance and (grouped) relative uncertainties.

    ``groups`` is either a spin count (nuclear layout: the first ``n`` columns
    are hyperfine magnitudes, the next ``n`` angles; 0 means one group per
    column) or an explicit ``{name: column indices}`` mapping. A group's value
    is the root mean square of its members' relative uncertainties.
    """
    mean, cov = weighted_moments(cloud)
    absu = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(mean != 0.0, absu / np.abs(mean), np.inf)
    if isinstance(groups, (int, np.integer)):
        groups = _default_groups(int(groups), cloud.dim, param_names)
    grouped = {name: float(np.sqrt(np.mean(rel[list(cols)] ** 2)))
               for name, cols in groups.items()}
    return PosteriorSummary(mean, cov, absu, rel, grouped, tuple(param_names))
