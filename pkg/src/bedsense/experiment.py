"""Virtual laboratory: single shots against hidden true parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eig import ControlGrid
from .exceptions import ContractError


@dataclass(frozen=True)
class GroundTruth:
    """Hidden parameters of one simulated run, as a location row of ``model``."""

    model: object
    params: np.ndarray
    seed: int = 0

    def __post_init__(self):
        p = np.array(self.params, dtype=float)
        if p.shape != (self.model.n_params,):
            raise ContractError(f"truth needs {self.model.n_params} values, got {p.shape}")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    @property
    def canonical(self) -> np.ndarray:
        """Truth in the estimator's canonical labelling (for error accounting)."""
        return self.model.canonicalize(self.params[None, :])[0]


@dataclass(frozen=True)
class ShotRecord:
    shot_index: int
    tau: float
    outcome: int
    probe_time: float
    wall_time: float
    batch_id: int = 0
    generated_from_shot: int = -1


def run_shot(truth: GroundTruth, grid: ControlGrid, tau: float, seed=None, *,
             overhead_us: float = 0.0, shot_index: int = 0, batch_id: int = 0,
             wait_us: float = 0.0, generated_from_shot: int = -1) -> ShotRecord:
    """Execute one prepare-evolve-read cycle at ``tau`` (which must be on ``grid``).

    ``wait_us`` is idle time spent before the shot waiting for controls; it
    is charged to the shot's wall time.
    """
    grid.index_of(tau)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    outcome = truth.model.simulate_shot(truth.params, tau, rng)
    probe = float(truth.model.probe_time(tau))
    return ShotRecord(shot_index, float(tau), int(outcome), probe,
                      probe + overhead_us + wait_us, batch_id, generated_from_shot)


@dataclass
class SimulatedInstrument:
    """Stateful 'submit tau, receive bit' front end over :func:`run_shot`.

    Shots are strictly sequential; the instrument owns its random stream so the
    outcome sequence depends only on the seed and the control stream.
    """

    truth: GroundTruth
    grid: ControlGrid
    seed: object = None
    overhead_us: float = 0.0
    records: list[ShotRecord] = field(default_factory=list)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def measure(self, tau: float, *, batch_id: int = 0, wait_us: float = 0.0,
                generated_from_shot: int = -1) -> ShotRecord:
        rec = run_shot(self.truth, self.grid, tau, self._rng, overhead_us=self.overhead_us,
                       shot_index=len(self.records), batch_id=batch_id, wait_us=wait_us,
                       generated_from_shot=generated_from_shot)
        self.records.append(rec)
        return rec


@dataclass(frozen=True)
class ShotHistogram:
    taus: np.ndarray
    counts: np.ndarray
    means: np.ndarray


def shot_histogram(records, grid: ControlGrid | None = None) -> ShotHistogram:
    """Per-control shot counts and mean outcomes; controls never measured are absent."""
    if not records:
        raise ContractError("no shot records")
    taus = np.array([r.tau for r in records])
    outcomes = np.array([r.outcome for r in records], dtype=float)
    if grid is not None:
        keys = np.array([grid.index_of(t) for t in taus])
        uniq, inv = np.unique(keys, return_inverse=True)
        centers = grid.taus[uniq]
    else:
        centers, inv = np.unique(taus, return_inverse=True)
    counts = np.bincount(inv)
    means = np.bincount(inv, weights=outcomes) / counts
    return ShotHistogram(centers, counts, means)
