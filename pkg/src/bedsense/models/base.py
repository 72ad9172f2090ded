"""Common interface shared by the likelihood models."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..smc import init_uniform

EPS = 1e-9


def clamp_probability(p, eps: float = EPS):
    return np.clip(p, eps, 1.0 - eps)


class SensingModel(ABC):
    """A two-outcome likelihood model over a box of parameters.

    Particle locations are rows of an ``(n_particles, n_params)`` array laid
    out in :attr:`param_names` order, in internal units (rad/us, rad, mT).
    """

    #: coefficient k in ``probe_time = k * tau``
    probe_factor: float
    param_names: tuple[str, ...]
    eps: float = EPS

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    @abstractmethod
    def bounds(self) -> np.ndarray:
        """``(n_params, 2)`` array of lower/upper bounds."""

    @property
    @abstractmethod
    def groups(self) -> dict[str, list[int]]:
        """Column indices pooled into each grouped relative uncertainty."""

    def sample_prior(self, n: int, seed=None) -> np.ndarray:
        return init_uniform(self.bounds, n, seed).locations

    def constrain(self, locations: np.ndarray) -> np.ndarray:
        """Project locations back into the support (clamp)."""
        b = self.bounds
        return np.clip(locations, b[:, 0], b[:, 1])

    def canonicalize(self, locations: np.ndarray) -> np.ndarray:
        """Map locations to a canonical representative of their symmetry class."""
        return locations

    @abstractmethod
    def likelihood_grid(self, locations: np.ndarray, taus, dtype=np.float32
                        ) -> tuple[np.ndarray, np.ndarray]:
        """Pr(0) and Pr(1) for every (control, particle) pair.

        Both arrays have shape ``(len(taus), n_particles)`` and are clamped
        into ``[eps, 1 - eps]``.
        """

    def likelihood(self, locations: np.ndarray, tau: float, outcome: int) -> np.ndarray:
        """Pr(outcome | x_k, tau) for every particle, in double precision."""
        p0, p1 = self.likelihood_grid(locations, np.array([float(tau)]), dtype=np.float64)
        return (p1 if outcome else p0)[0]

    def probe_time(self, tau):
        return self.probe_factor * np.asarray(tau)

    @abstractmethod
    def prob0(self, params: np.ndarray, tau) -> np.ndarray:
        """Reference (numpy) evaluation of Pr(0) for one or many parameter rows."""

    @abstractmethod
    def simulate_shot(self, true_params: np.ndarray, tau: float, rng: np.random.Generator) -> int:
        """Draw one single-shot outcome at the true parameters."""

    def to_params(self, row: np.ndarray):
        """Convert one location row to the model's parameter record."""
        return row

    def describe(self) -> dict[str, object]:
        return {}
