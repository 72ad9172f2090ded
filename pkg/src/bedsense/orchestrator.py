"""The measure / update / re-optimize loop in synchronous, asynchronous and
non-adaptive flavours.

Time is tracked on a simulated clock (microseconds) so that traces are
reproducible: probe time comes from the model, per-shot overhead from the
config, and the optimizer's latency from ``compute_latency_us`` (or, when
unset, ``n_p * |grid| / sim_throughput``). Measured CPU time is reported
separately in :attr:`RunTrace.compute_time_s` and never enters the shot
records.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .eig import BatchPolicy, ControlGrid, eig_table, sample_batch
from .exceptions import ConfigurationError, DegenerateUpdateError
from .experiment import GroundTruth, ShotRecord, SimulatedInstrument
from .smc import (ParticleCloud, PosteriorSummary, ResamplerConfig, bayes_update,
                  effective_sample_size, remap_labels, resample_liu_west, summarize)

logger = logging.getLogger(__name__)

MODES = ("sync", "async", "nonadaptive")
DEFAULT_CHECKPOINTS = (0, 15, 30, 75, 150, 300, 600, 1050, 1350, 2100, 3000, 4500,
                       6000, 9975, 13500, 18000)
#: paper-reported accelerator throughput, evaluations per second
PAPER_ACCELERATOR_THROUGHPUT = 7.18e9


@dataclass(frozen=True)
class RunConfig:
    model: object
    grid: ControlGrid
    mode: str = "sync"
    n_particles: int = 3200
    n_shot_max: int = 1050
    policy: BatchPolicy = field(default_factory=BatchPolicy)
    resampler: ResamplerConfig = field(default_factory=ResamplerConfig)
    delay_T: int = 15
    stop_rel_uncertainty: float | None = None
    checkpoints: tuple[int, ...] | None = None
    seed: int = 0
    utility: str = "eig"
    precision: str = "mixed"
    overhead_us: float = 0.0
    compute_latency_us: float | None = None
    sim_throughput: float = PAPER_ACCELERATOR_THROUGHPUT
    threaded: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_shot_max < 0:
            raise ConfigurationError("n_shot_max must be non-negative")
        if self.n_particles < 2:
            raise ConfigurationError("need at least 2 particles")
        if self.delay_T < 0:
            raise ConfigurationError("delay_T must be non-negative")

    @property
    def eig_refresh_every(self) -> int:
        return self.policy.n_batch

    @property
    def latency_us(self) -> float:
        if self.compute_latency_us is not None:
            return float(self.compute_latency_us)
        return 1e6 * self.n_particles * len(self.grid) / self.sim_throughput

    def checkpoint_schedule(self) -> list[int]:
        pts = DEFAULT_CHECKPOINTS if self.checkpoints is None else self.checkpoints
        return sorted({int(c) for c in pts if 0 <= c <= self.n_shot_max} | {0, self.n_shot_max})

    def with_mode(self, mode: str, **kw) -> "RunConfig":
        return replace(self, mode=mode, **kw)


@dataclass(frozen=True)
class BatchInfo:
    batch_id: int
    first_shot: int
    generated_from_shot: int
    ready_time_us: float


@dataclass
class RunTrace:
    mode: str
    truth: GroundTruth
    param_names: tuple[str, ...]
    records: list[ShotRecord] = field(default_factory=list)
    checkpoints: list[tuple[int, PosteriorSummary]] = field(default_factory=list)
    batches: list[BatchInfo] = field(default_factory=list)
    stall_count: int = 0
    n_resamples: int = 0
    compute_time_s: float = 0.0
    sim_compute_us: float = 0.0
    failed: bool = False
    error: str | None = None
    final_cloud: ParticleCloud | None = None

    @property
    def n_shots(self) -> int:
        return len(self.records)

    @property
    def total_probe_time_us(self) -> float:
        return float(sum(r.probe_time for r in self.records))

    @property
    def total_wall_time_us(self) -> float:
        return float(sum(r.wall_time for r in self.records))

    @property
    def final_summary(self) -> PosteriorSummary:
        return self.checkpoints[-1][1]

    def summary_at(self, n_shot: int) -> PosteriorSummary | None:
        for n, s in self.checkpoints:
            if n == n_shot:
                return s
        return None

    def cumulative(self) -> dict[str, np.ndarray]:
        """Running totals of probe and wall time (non-decreasing by construction)."""
        return {"probe_time_us": np.cumsum([r.probe_time for r in self.records]),
                "wall_time_us": np.cumsum([r.wall_time for r in self.records])}

    def truth_rel_error(self, summary: PosteriorSummary) -> np.ndarray:
        t = self.truth.canonical
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(summary.mean - t) / np.abs(t)


class _Estimator:
    """Owns the estimator cloud; applies outcomes strictly in shot order."""

    def __init__(self, cfg: RunConfig, prior_rng, resample_rng):
        model = cfg.model
        n = cfg.n_particles
        loc = model.sample_prior(n, prior_rng)
        cloud = ParticleCloud(loc, np.full(n, 1.0 / n), model.bounds)
        if cfg.resampler.remap:
            cloud = remap_labels(cloud, model)
        self.cloud = cloud
        self.cfg = cfg
        self.rng = resample_rng
        self.count = 0
        self.n_resamples = 0

    def apply(self, rec: ShotRecord):
        model = self.cfg.model
        lik = model.likelihood(self.cloud.locations, rec.tau, rec.outcome)
        self.cloud = bayes_update(self.cloud, lik)
        self.count += 1
        rcfg = self.cfg.resampler
        if effective_sample_size(self.cloud) < rcfg.ess_threshold_fraction * self.cloud.n_particles:
            self.cloud = resample_liu_west(self.cloud, rcfg, self.rng, model)
            self.n_resamples += 1

    def summary(self) -> PosteriorSummary:
        model = self.cfg.model
        return summarize(self.cloud, model.groups, model.param_names)


def _streams(cfg: RunConfig, truth: GroundTruth):
    ss = np.random.SeedSequence([int(cfg.seed), int(truth.seed)])
    prior, optimizer, instrument, resampler = ss.spawn(4)
    return (np.random.default_rng(prior), np.random.default_rng(optimizer),
            np.random.default_rng(instrument), np.random.default_rng(resampler))


class _Loop:
    """State shared by all modes: estimator, instrument, clock, checkpoints."""

    def __init__(self, cfg: RunConfig, truth: GroundTruth):
        if truth.model is not cfg.model:
            raise ConfigurationError("truth and run config must share one model instance")
        prior, self.opt_rng, inst, res = _streams(cfg, truth)
        self.cfg = cfg
        self.est = _Estimator(cfg, prior, res)
        self.instrument = SimulatedInstrument(truth, cfg.grid, inst, cfg.overhead_us)
        self.trace = RunTrace(cfg.mode, truth, tuple(cfg.model.param_names))
        self.schedule = cfg.checkpoint_schedule()
        self.clock = 0.0
        self.stopped = False
        self._checkpoint()

    def _checkpoint(self):
        n = self.est.count
        if n in self.schedule or self.stopped:
            if not self.trace.checkpoints or self.trace.checkpoints[-1][0] != n:
                self.trace.checkpoints.append((n, self.est.summary()))

    def optimize(self, cloud: ParticleCloud, generated_from: int) -> np.ndarray:
        cfg = self.cfg
        t0 = time.perf_counter()
        table = eig_table(cloud, cfg.model, cfg.grid, utility=cfg.utility,
                          precision=cfg.precision, generated_from_shot=generated_from)
        taus = sample_batch(table, cfg.grid, cfg.policy, self.opt_rng)
        self.trace.compute_time_s += time.perf_counter() - t0
        return taus

    def shoot(self, tau, batch_id, ready_at, generated_from):
        wait = max(0.0, ready_at - self.clock)
        rec = self.instrument.measure(tau, batch_id=batch_id, wait_us=wait,
                                      generated_from_shot=generated_from)
        self.clock += rec.wall_time
        self.trace.records.append(rec)
        self.est.apply(rec)
        thr = self.cfg.stop_rel_uncertainty
        if thr is not None and self.est.summary().max_group_rel < thr:
            self.stopped = True
        self._checkpoint()
        return wait

    def run_batch(self, taus, batch_id, ready_at, generated_from):
        first = self.est.count
        self.trace.batches.append(BatchInfo(batch_id, first, generated_from, ready_at))
        if ready_at > self.clock:
            self.trace.stall_count += 1
        for tau in taus[: self.cfg.n_shot_max - first]:
            self.shoot(float(tau), batch_id, ready_at, generated_from)
            if self.stopped:
                break

    def finish(self) -> RunTrace:
        self.stopped = True
        self._checkpoint()
        self.trace.n_resamples = self.est.n_resamples
        self.trace.final_cloud = self.est.cloud
        return self.trace

    def fail(self, exc: Exception) -> RunTrace:
        logger.warning("run failed after %d shots: %s", self.est.count, exc)
        self.trace.failed = True
        self.trace.error = f"{type(exc).__name__}: {exc}"
        return self.finish()


def run_sync(cfg: RunConfig, truth: GroundTruth) -> RunTrace:
    """Adaptive loop where the instrument waits for every new control batch."""
    loop = _Loop(cfg, truth)
    lat = cfg.latency_us
    batch_id = 0
    try:
        while loop.est.count < cfg.n_shot_max and not loop.stopped:
            gen = loop.est.count - 1
            taus = loop.optimize(loop.est.cloud, gen)
            ready = loop.clock + lat
            loop.trace.sim_compute_us += lat
            loop.run_batch(taus, batch_id, ready, gen)
            batch_id += 1
    except DegenerateUpdateError as exc:
        return loop.fail(exc)
    return loop.finish()


def run_nonadaptive(cfg: RunConfig, truth: GroundTruth) -> RunTrace:
    """Same estimator, controls drawn uniformly at random from the grid."""
    loop = _Loop(cfg, truth)
    taus_all = cfg.grid.taus
    batch_id = 0
    try:
        while loop.est.count < cfg.n_shot_max and not loop.stopped:
            idx = loop.opt_rng.integers(0, taus_all.size, size=cfg.policy.n_batch)
            loop.run_batch(taus_all[idx], batch_id, loop.clock, -1)
            batch_id += 1
    except DegenerateUpdateError as exc:
        return loop.fail(exc)
    return loop.finish()


class _Optimizer(threading.Thread):
    """Worker computing control batches from immutable cloud snapshots."""

    def __init__(self, loop: _Loop):
        super().__init__(daemon=True, name="bed-optimizer")
        self.loop = loop
        self.jobs: queue.Queue = queue.Queue()
        self.results: queue.Queue = queue.Queue()

    def run(self):
        while True:
            job = self.jobs.get()
            if job is None:
                return
            batch_id, snapshot, gen = job
            try:
                self.results.put((batch_id, self.loop.optimize(snapshot, gen)))
            except Exception as exc:  # handed back to the measurement loop
                self.results.put((batch_id, exc))


def run_async(cfg: RunConfig, truth: GroundTruth) -> RunTrace:
    """Adaptive loop where batch ``b`` is optimized on data lagging by ``delay_T`` shots.

    The batch starting at shot ``i`` is computed from a snapshot holding
    outcomes ``0 .. i - 1 - T``. The snapshot is sent to the optimizer as soon
    as that outcome has been applied, so with ``T >= n_batch`` optimization
    overlaps the previous batch's shots. The estimator itself always sees
    every outcome immediately.
    """
    loop = _Loop(cfg, truth)
    nb_ = cfg.policy.n_batch
    T = cfg.delay_T
    lat = cfg.latency_us
    n_batches = -(-cfg.n_shot_max // nb_)
    snap_at = [max(0, b * nb_ - T) for b in range(n_batches)]

    worker = _Optimizer(loop) if cfg.threaded else None
    ready_results: dict[int, object] = {}
    sim_ready: dict[int, float] = {}
    opt_free = 0.0
    next_job = 0

    def submit_ready_jobs():
        nonlocal next_job, opt_free
        while next_job < n_batches and snap_at[next_job] <= loop.est.count:
            b = next_job
            gen = snap_at[b] - 1
            start = max(loop.clock, opt_free)
            opt_free = start + lat
            sim_ready[b] = opt_free
            loop.trace.sim_compute_us += lat
            if worker is not None:
                worker.jobs.put((b, loop.est.cloud, gen))
            else:
                ready_results[b] = loop.optimize(loop.est.cloud, gen)
            next_job += 1

    def await_batch(b):
        while b not in ready_results:
            got_id, payload = worker.results.get()
            ready_results[got_id] = payload
        res = ready_results.pop(b)
        if isinstance(res, Exception):
            raise res
        return res

    if worker is not None:
        worker.start()
    try:
        submit_ready_jobs()
        for b in range(n_batches):
            if loop.est.count >= cfg.n_shot_max or loop.stopped:
                break
            taus = await_batch(b)
            first = loop.est.count
            loop.trace.batches.append(BatchInfo(b, first, snap_at[b] - 1, sim_ready[b]))
            # the wait for the very first batch is start-up latency, not a stall
            if b > 0 and sim_ready[b] > loop.clock:
                loop.trace.stall_count += 1
            for tau in taus[: cfg.n_shot_max - first]:
                loop.shoot(float(tau), b, sim_ready[b], snap_at[b] - 1)
                submit_ready_jobs()
                if loop.stopped:
                    break
    except DegenerateUpdateError as exc:
        return loop.fail(exc)
    finally:
        if worker is not None:
            worker.jobs.put(None)
            worker.join()
    return loop.finish()


RUNNERS = {"sync": run_sync, "async": run_async, "nonadaptive": run_nonadaptive}


def run(cfg: RunConfig, truth: GroundTruth) -> RunTrace:
    return RUNNERS[cfg.mode](cfg, truth)


def population_curve(model, params, taus) -> np.ndarray:
    """Noise-free Pr(0) over ``taus`` at one parameter row."""
    return np.asarray(model.prob0(np.asarray(params)[None, :], np.asarray(taus)[:, None])).ravel()
