from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError


@dataclass(frozen=True)
class ReadoutFidelity:
    """Probabilities of faithfully reporting |0> (``p0``) and |1> (``p1``)."""

    p0: float = 1.0
    p1: float = 1.0

    def __post_init__(self):
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        if self.p0 + self.p1 <= 1.0:
            raise ConfigurationError(
                f"uninformative readout: p0 + p1 = {self.p0 + self.p1} <= 1")

    @property
    def contrast(self) -> float:
        return self.p0 + self.p1 - 1.0


def apply_readout_noise(p_ideal, fidelity: ReadoutFidelity):
    """Map the ideal probability of |0> to the probability of *reporting* 0."""
    return fidelity.contrast * np.asarray(p_ideal) + (1.0 - fidelity.p1)
