"""Parameter sweeps, multi-run campaigns and median aggregation."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConfigurationError
from .experiment import GroundTruth
from .models import AcFieldModel, NuclearSpinModel
from .orchestrator import RunConfig, RunTrace, run

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SweepSpec:
    """How ground-truth combinations are generated.

    Nuclear: hyperfine magnitudes on an evenly spaced grid over
    ``omega_h_khz``; spins are combined either as a full cross product
    (``layout="cross"``) or as sets of distinct grid values
    (``layout="combinations"``). Angles are drawn uniformly on [0, 2 pi).
    AC: ``n_freq`` frequencies over ``freq_khz`` crossed with ``n_field``
    field strengths ``B = ratio * omega / gamma`` over ``ratio``.

    ``n_bench`` below the full count picks a seeded subset; above it is an
    error.
    """

    kind: str = "nuclear"
    n_C: int = 2
    omega_h_khz: tuple[float, float] = (19.0, 83.4)
    n_omega: int | None = None
    layout: str | None = None
    freq_khz: tuple[float, float] = (111.0, 1270.0)
    n_freq: int = 20
    ratio: tuple[float, float] = (0.031, 0.169)
    n_field: int = 20
    n_bench: int | None = None

    def __post_init__(self):
        if self.kind not in ("nuclear", "ac"):
            raise ConfigurationError(f"unknown sweep kind {self.kind!r}")
        if self.layout not in (None, "cross", "combinations"):
            raise ConfigurationError(f"unknown layout {self.layout!r}")

    @property
    def resolved_layout(self) -> str:
        return self.layout or ("cross" if self.n_C <= 2 else "combinations")

    @property
    def resolved_n_omega(self) -> int:
        if self.n_omega is not None:
            return self.n_omega
        return 30 if self.resolved_layout == "cross" else 20

    def full_count(self) -> int:
        if self.kind == "ac":
            return self.n_freq * self.n_field
        n = self.resolved_n_omega
        if self.resolved_layout == "cross":
            return n ** self.n_C
        return len(list(itertools.combinations(range(n), self.n_C)))


def _choose_subset(items: list, n_bench: int | None, rng) -> list:
    if n_bench is None or n_bench == len(items):
        return items
    if n_bench > len(items) or n_bench < 1:
        raise ConfigurationError(
            f"n_bench={n_bench} incompatible with {len(items)} generated combinations")
    keep = np.sort(rng.choice(len(items), size=n_bench, replace=False))
    return [items[i] for i in keep]


def generate_sweep(spec: SweepSpec, seed=0, model=None) -> list[GroundTruth]:
    """Deterministic list of ground truths described by ``spec``."""
    rng = np.random.default_rng(seed)
    if spec.kind == "nuclear":
        model = model or NuclearSpinModel()
        if model.n_spins != spec.n_C:
            raise ConfigurationError("model spin count differs from sweep n_C")
        vals = TWO_PI * 1e-3 * np.linspace(*spec.omega_h_khz, spec.resolved_n_omega)
        if spec.resolved_layout == "cross":
            combos = list(itertools.product(vals, repeat=spec.n_C))
        else:
            combos = list(itertools.combinations(vals, spec.n_C))
        thetas = rng.uniform(0.0, TWO_PI, size=(len(combos), spec.n_C))
        rows = [np.concatenate([c, t]) for c, t in zip(combos, thetas)]
    else:
        model = model or AcFieldModel()
        gamma = model.cfg.gamma
        freqs = TWO_PI * 1e-3 * np.linspace(*spec.freq_khz, spec.n_freq)
        ratios = np.linspace(*spec.ratio, spec.n_field)
        rows = [np.array([w, r * w / gamma]) for w in freqs for r in ratios]
    rows = _choose_subset(rows, spec.n_bench, rng)
    return [GroundTruth(model, model.canonicalize(r[None, :])[0], seed=i)
            for i, r in enumerate(rows)]


def repeated_truth(model, params, n_repeats: int) -> list[GroundTruth]:
    """The same parameters ``n_repeats`` times with distinct run seeds."""
    return [GroundTruth(model, params, seed=i) for i in range(n_repeats)]


def lower_median(values: Sequence[float]) -> float:
    """Median with the lower-middle element for even counts."""
    v = sorted(values)
    if not v:
        raise ConfigurationError("median of an empty set")
    return float(v[(len(v) - 1) // 2])


def aggregate_medians(runs: Sequence[Mapping[int, float]], checkpoints: Sequence[int]
                      ) -> dict[int, float]:
    """Per-checkpoint lower medians over the runs that reached each checkpoint."""
    out = {}
    for n in checkpoints:
        vals = [r[n] for r in runs if n in r]
        if vals:
            out[n] = lower_median(vals)
    return out


def run_metrics(trace: RunTrace) -> dict[int, dict[str, float]]:
    """Grouped relative uncertainties and ground-truth errors at every checkpoint."""
    model = trace.truth.model
    out = {}
    for n, s in trace.checkpoints:
        row = dict(s.mean_rel_per_group)
        err = trace.truth_rel_error(s)
        for g, cols in model.groups.items():
            row[f"truth_err_{g}"] = float(np.sqrt(np.mean(err[cols] ** 2)))
        out[n] = row
    return out


@dataclass
class RunResult:
    combo: int
    mode: str
    metrics: dict[int, dict[str, float]]
    failed: bool
    error: str | None
    probe_time_us: float
    wall_time_us: float
    compute_time_s: float
    stall_count: int
    n_shots: int


@dataclass
class BenchmarkReport:
    groups: tuple[str, ...]
    results: list[RunResult] = field(default_factory=list)
    medians: dict[tuple[str, int, str], float] = field(default_factory=dict)

    @property
    def modes(self) -> list[str]:
        return list(dict.fromkeys(r.mode for r in self.results))

    def n_failed(self, mode: str) -> int:
        return sum(r.failed for r in self.results if r.mode == mode)

    def curve(self, mode: str, metric: str) -> dict[int, float]:
        return {n: v for (m, n, k), v in self.medians.items() if m == mode and k == metric}

    def median(self, mode: str, n_shot: int, metric: str) -> float:
        return self.medians[(mode, n_shot, metric)]

    def delta_rms(self, mode: str, n_shot: int) -> float:
        return max(self.median(mode, n_shot, g) for g in self.groups)

    def rows(self):
        for (mode, n, metric), v in sorted(self.medians.items(),
                                           key=lambda kv: (self.modes.index(kv[0][0]),
                                                           kv[0][1], kv[0][2])):
            yield {"mode": mode, "n_shot": n, "metric": metric, "median": v}


def _execute(task) -> RunResult:
    combo, cfg, truth = task
    trace = run(cfg, truth)
    return RunResult(combo, cfg.mode, run_metrics(trace), trace.failed, trace.error,
                     trace.total_probe_time_us, trace.total_wall_time_us,
                     trace.compute_time_s, trace.stall_count, trace.n_shots)


def run_campaign(truths: Sequence[GroundTruth], configs: Mapping[str, RunConfig],
                 workers: int = 1) -> BenchmarkReport:
    """One run per (truth, mode); medians over successful runs per checkpoint."""
    tasks = [(i, cfg, t) for i, t in enumerate(truths) for cfg in configs.values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    model = next(iter(configs.values())).model
    report = BenchmarkReport(tuple(model.groups), results)
    for mode in configs:
        ok = [r for r in results if r.mode == mode and not r.failed]
        if len(ok) < sum(r.mode == mode for r in results):
            logger.warning("%s: %d failed runs excluded from medians", mode,
                           report.n_failed(mode))
        checkpoints = sorted({n for r in ok for n in r.metrics})
        metrics = sorted({k for r in ok for row in r.metrics.values() for k in row})
        for metric in metrics:
            per_run = [{n: row[metric] for n, row in r.metrics.items() if metric in row}
                       for r in ok]
            for n, v in aggregate_medians(per_run, checkpoints).items():
                report.medians[(mode, n, metric)] = v
    return report
