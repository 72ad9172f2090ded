"""Config files, CSV records and run manifests.

Config files are INI documents. Physical quantities are given in Hz, s and
mT (angles in degrees) and converted here to the internal rad/us, us, rad.
Every number written by this module uses ``repr``-exact ``.17g`` formatting
so output files are byte-reproducible for a fixed config and seed.
"""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .bench import BenchmarkReport, SweepSpec
from .eig import BatchPolicy, ControlGrid
from .exceptions import ConfigurationError
from .experiment import GroundTruth, shot_histogram
from .models import (AcFieldModel, AcModelConfig, NuclearModelConfig, NuclearSpinModel,
                     ReadoutFidelity)
from .orchestrator import MODES, RunConfig, RunTrace, population_curve
from .smc import ResamplerConfig

TWO_PI = 2.0 * np.pi

SHOTS_HEADER = ("shot_index", "batch_id", "tau_us", "outcome", "probe_time_us", "wall_time_us")
CHECKPOINTS_HEADER = ("n_shot", "param_name", "mean", "abs_unc", "rel_unc", "truth_rel_err")
REPORT_HEADER = ("mode", "n_shot", "metric", "median")
THROUGHPUT_HEADER = ("n_p", "grid", "precision", "evals_per_s", "latency_us")
BATCHES_HEADER = ("batch_id", "first_shot", "generated_from_shot", "ready_time_us")
PER_RUN_HEADER = ("combo", "mode", "failed", "n_shot", "metric", "value")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def hz_to_rad_per_us(f_hz: float) -> float:
    return TWO_PI * float(f_hz) * 1e-6


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------------------- run records

def shot_rows(trace: RunTrace):
    for r in trace.records:
        yield (r.shot_index, r.batch_id, r.tau, r.outcome, r.probe_time, r.wall_time)


def checkpoint_rows(trace: RunTrace):
    """One row per parameter per checkpoint, then one per parameter group."""
    groups = trace.truth.model.groups
    for n, s in trace.checkpoints:
        err = trace.truth_rel_error(s)
        for j, name in enumerate(trace.param_names):
            yield (n, name, s.mean[j], s.abs_uncertainty[j], s.rel_uncertainty[j], err[j])
        for g, cols in groups.items():
            yield (n, f"{g}_rms", float("nan"), float("nan"), s.mean_rel_per_group[g],
                   float(np.sqrt(np.mean(err[cols] ** 2))))


def write_trace(trace: RunTrace, out: Path, cfg: RunConfig | None = None) -> dict[str, Path]:
    """Shots, checkpoints, batch provenance and per-control histogram."""
    out = Path(out)
    paths = {
        "shots": write_csv(out / "shots.csv", SHOTS_HEADER, shot_rows(trace)),
        "checkpoints": write_csv(out / "checkpoints.csv", CHECKPOINTS_HEADER,
                                 checkpoint_rows(trace)),
        "batches": write_csv(out / "batches.csv", BATCHES_HEADER,
                             ((b.batch_id, b.first_shot, b.generated_from_shot, b.ready_time_us)
                              for b in trace.batches)),
    }
    if trace.records:
        h = shot_histogram(trace.records, cfg.grid if cfg is not None else None)
        paths["histogram"] = write_csv(out / "histogram.csv", ("tau_us", "count", "mean_outcome"),
                                       zip(h.taus, h.counts, h.means))
    if cfg is not None:
        taus = cfg.grid.taus
        pop = population_curve(cfg.model, trace.truth.params, taus)
        paths["population"] = write_csv(out / "population.csv", ("tau_us", "prob0"),
                                        zip(taus, pop))
    return paths


def write_manifest(path: Path, entries: Mapping[str, object]) -> Path:
    """Flat ``key=value`` file, keys in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, v in entries.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            v = ",".join(fmt(x) for x in v)
        else:
            v = fmt(v)
        lines.append(f"{k}={v}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def run_manifest(cfg: RunConfig, truth: GroundTruth | None = None, **extra) -> dict[str, object]:
    m = {"version": __version__}
    for k, v in cfg.model.describe().items():
        m[f"model.{k}"] = v
    m.update({
        "grid.start_us": cfg.grid.taus[0], "grid.stop_us": cfg.grid.taus[-1],
        "grid.size": len(cfg.grid),
        "run.mode": cfg.mode, "run.seed": cfg.seed, "run.n_particles": cfg.n_particles,
        "run.n_shot_max": cfg.n_shot_max, "run.n_batch": cfg.policy.n_batch,
        "run.p_exponent": cfg.policy.p_exponent, "run.floor": cfg.policy.floor,
        "run.delay_T": cfg.delay_T, "run.utility": cfg.utility, "run.precision": cfg.precision,
        "run.resample_a": cfg.resampler.a,
        "run.ess_threshold": cfg.resampler.ess_threshold_fraction,
        "run.remap": cfg.resampler.remap,
        "run.stop_rel_uncertainty": ("none" if cfg.stop_rel_uncertainty is None
                                     else cfg.stop_rel_uncertainty),
        "run.overhead_us": cfg.overhead_us, "run.latency_us": cfg.latency_us,
        "run.checkpoints": cfg.checkpoint_schedule(),
    })
    if truth is not None:
        m["truth.seed"] = truth.seed
        m["truth.params"] = truth.params
    m.update(extra)
    return m


def write_run(trace: RunTrace, cfg: RunConfig, out: Path) -> dict[str, Path]:
    paths = write_trace(trace, out, cfg)
    paths["manifest"] = write_manifest(Path(out) / "manifest.txt", run_manifest(
        cfg, trace.truth, **{"result.n_shots": trace.n_shots, "result.failed": trace.failed,
                             "result.stalls": trace.stall_count,
                             "result.resamples": trace.n_resamples,
                             "result.probe_time_us": trace.total_probe_time_us,
                             "result.wall_time_us": trace.total_wall_time_us,
                             "result.sim_compute_us": trace.sim_compute_us}))
    return paths


# ----------------------------------------------------------------------------- campaigns

def per_run_rows(report: BenchmarkReport):
    for r in report.results:
        for n in sorted(r.metrics):
            for metric in sorted(r.metrics[n]):
                yield (r.combo, r.mode, r.failed, n, metric, r.metrics[n][metric])


def write_report(report: BenchmarkReport, out: Path) -> dict[str, Path]:
    """Report medians, raw per-run values and one plot-data file per metric."""
    out = Path(out)
    paths = {
        "report": write_csv(out / "report.csv", REPORT_HEADER,
                            ((r["mode"], r["n_shot"], r["metric"], r["median"])
                             for r in report.rows())),
        "per_run": write_csv(out / "per_run.csv", PER_RUN_HEADER, per_run_rows(report)),
    }
    modes = report.modes
    metrics = sorted({k for (_, _, k) in report.medians})
    for metric in metrics + ["delta_rms"]:
        curves = {m: (report.curve(m, metric) if metric != "delta_rms" else
                      {n: report.delta_rms(m, n) for n in report.curve(m, report.groups[0])})
                  for m in modes}
        shots = sorted({n for c in curves.values() for n in c})
        rows = ([n] + [curves[m].get(n, float("nan")) for m in modes] for n in shots)
        paths[f"plot_{metric}"] = write_csv(out / f"plot_{metric}.csv", ["n_shot", *modes], rows)
    return paths


def write_throughput(reports, path: Path) -> Path:
    return write_csv(path, THROUGHPUT_HEADER,
                     ((r.n_p, r.grid, r.precision, r.evals_per_s, r.latency_us) for r in reports))


# ----------------------------------------------------------------------------- config

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected a number list, got {text!r}") from exc


@dataclass
class ExperimentConfig:
    """Parsed config file; sections are kept as plain dicts of strings."""

    source: str
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.section(section).get(key, default)

    def getfloat(self, section: str, key: str, default: float | None = None) -> float | None:
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: not a number: {v!r}") from exc

    def getint(self, section: str, key: str, default: int | None = None) -> int | None:
        v = self.getfloat(section, key)
        if v is None:
            return default
        if v != int(v):
            raise ConfigurationError(f"[{section}] {key}: not an integer: {v!r}")
        return int(v)

    def getbool(self, section: str, key: str, default: bool) -> bool:
        v = self.get(section, key)
        if v is None:
            return default
        low = v.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"[{section}] {key}: not a boolean: {v!r}")

    @property
    def kind(self) -> str:
        k = self.get("model", "kind", "nuclear")
        if k not in ("nuclear", "ac"):
            raise ConfigurationError(f"[model] kind must be 'nuclear' or 'ac', got {k!r}")
        return k


_KNOWN = {
    "model": {"kind", "n_c", "larmor_hz", "t2_s", "p0", "p1", "omega_h_min_hz",
              "omega_h_max_hz", "gamma_hz_per_mt", "freq_min_hz", "freq_max_hz",
              "ratio_min", "ratio_max", "bessel_order"},
    "grid": {"tau_start_s", "tau_stop_s", "tau_step_s"},
    "truth": {"omega_h_hz", "theta_deg", "freq_hz", "b_mt", "seed"},
    "run": {"mode", "n_particles", "n_shots", "n_batch", "p_exponent", "floor", "delay_t",
            "utility", "precision", "resample_a", "ess_threshold", "remap",
            "stop_rel_uncertainty", "checkpoints", "overhead_s", "compute_latency_s",
            "throughput", "seed", "threaded"},
    "sweep": {"n_bench", "omega_h_min_hz", "omega_h_max_hz", "n_omega", "layout",
              "freq_min_hz", "freq_max_hz", "n_freq", "ratio_min", "ratio_max", "n_field",
              "modes", "repetitions", "seed"},
    "throughput": {"n_particles", "duration_s", "precision"},
}


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    sections = {}
    for name in cp.sections():
        if name not in _KNOWN:
            raise ConfigurationError(f"{source}: unknown section [{name}]")
        unknown = set(cp[name]) - _KNOWN[name]
        if unknown:
            raise ConfigurationError(f"{source}: unknown keys in [{name}]: {sorted(unknown)}")
        sections[name] = dict(cp[name])
    return ExperimentConfig(source, sections)


def bundled_config_names() -> list[str]:
    root = resources.files("bedsense") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(path) -> ExperimentConfig:
    """Read a config file; bare names fall back to the configs shipped with the package."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(), str(p))
    bundled = resources.files("bedsense") / "configs" / p.name
    if bundled.is_file():
        return parse_config(bundled.read_text(), f"bedsense/configs/{p.name}")
    raise ConfigurationError(f"config file not found: {path}")


def build_model(ec: ExperimentConfig):
    f = ReadoutFidelity(ec.getfloat("model", "p0", 1.0), ec.getfloat("model", "p1", 1.0))
    if ec.kind == "nuclear":
        d = NuclearModelConfig()
        lo = ec.getfloat("model", "omega_h_min_hz")
        hi = ec.getfloat("model", "omega_h_max_hz")
        bounds = (d.omega_h_bounds[0] if lo is None else hz_to_rad_per_us(lo),
                  d.omega_h_bounds[1] if hi is None else hz_to_rad_per_us(hi))
        larmor = ec.getfloat("model", "larmor_hz")
        t2 = ec.getfloat("model", "t2_s")
        return NuclearSpinModel(NuclearModelConfig(
            omega_L=d.omega_L if larmor is None else hz_to_rad_per_us(larmor),
            T2=d.T2 if t2 is None else 1e6 * t2,
            n_C=ec.getint("model", "n_c", d.n_C), fidelity=f, omega_h_bounds=bounds))
    d = AcModelConfig()
    g = ec.getfloat("model", "gamma_hz_per_mt")
    lo = ec.getfloat("model", "freq_min_hz")
    hi = ec.getfloat("model", "freq_max_hz")
    t2 = ec.getfloat("model", "t2_s")
    return AcFieldModel(AcModelConfig(
        gamma=d.gamma if g is None else hz_to_rad_per_us(g),
        T2=d.T2 if t2 is None else 1e6 * t2, fidelity=f,
        bessel_order=ec.getint("model", "bessel_order", d.bessel_order),
        omega_bounds=(d.omega_bounds[0] if lo is None else hz_to_rad_per_us(lo),
                      d.omega_bounds[1] if hi is None else hz_to_rad_per_us(hi)),
        ratio_bounds=(ec.getfloat("model", "ratio_min", d.ratio_bounds[0]),
                      ec.getfloat("model", "ratio_max", d.ratio_bounds[1]))))


def build_grid(ec: ExperimentConfig) -> ControlGrid:
    if ec.kind == "nuclear":
        start, stop, step = 1e-6, 10e-6, 0.01e-6
    else:
        start, stop, step = 0.51e-6, 7e-6, 0.01e-6
    start = ec.getfloat("grid", "tau_start_s", start)
    stop = ec.getfloat("grid", "tau_stop_s", stop)
    step = ec.getfloat("grid", "tau_step_s", step)
    if step <= 0 or stop < start:
        raise ConfigurationError("[grid] needs tau_step_s > 0 and tau_stop_s >= tau_start_s")
    return ControlGrid.arange(1e6 * start, 1e6 * stop, 1e6 * step)


def build_run_config(ec: ExperimentConfig, model, grid: ControlGrid, *, mode=None, seed=None,
                     shots=None) -> RunConfig:
    s = "run"
    mode = mode or ec.get(s, "mode", "sync")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    ckp = ec.get(s, "checkpoints")
    stop = ec.getfloat(s, "stop_rel_uncertainty")
    lat = ec.getfloat(s, "compute_latency_s")
    thr = ec.getfloat(s, "throughput")
    kw = {} if thr is None else {"sim_throughput": thr}
    # batches of 15 for nuclear spins, 30 for the AC field
    n_batch = ec.getint(s, "n_batch", 30 if ec.kind == "ac" else 15)
    return RunConfig(
        model=model, grid=grid, mode=mode,
        n_particles=ec.getint(s, "n_particles", 3200),
        n_shot_max=shots if shots is not None else ec.getint(s, "n_shots", 1050),
        policy=BatchPolicy(n_batch, ec.getfloat(s, "p_exponent", 6.0),
                           ec.getbool(s, "floor", False)),
        resampler=ResamplerConfig(ec.getfloat(s, "resample_a", 0.98),
                                  ec.getfloat(s, "ess_threshold", 0.5),
                                  ec.getbool(s, "remap", True)),
        delay_T=ec.getint(s, "delay_t", 15),
        stop_rel_uncertainty=stop,
        checkpoints=None if ckp is None else tuple(int(v) for v in _floats(ckp)),
        seed=seed if seed is not None else ec.getint(s, "seed", 0),
        utility=ec.get(s, "utility", "eig"),
        precision=ec.get(s, "precision", "mixed"),
        overhead_us=1e6 * ec.getfloat(s, "overhead_s", 0.0),
        compute_latency_us=None if lat is None else 1e6 * lat,
        threaded=ec.getbool(s, "threaded", True), **kw)


def build_truth(ec: ExperimentConfig, model, seed: int = 0) -> GroundTruth:
    s = "truth"
    if not ec.section(s):
        raise ConfigurationError("config has no [truth] section")
    seed = ec.getint(s, "seed", seed)
    if ec.kind == "nuclear":
        wh = _floats(ec.get(s, "omega_h_hz", ""))
        th = _floats(ec.get(s, "theta_deg", ""))
        if len(wh) != model.n_spins or len(th) != model.n_spins:
            raise ConfigurationError(
                f"[truth] needs {model.n_spins} omega_h_hz and theta_deg values")
        row = np.concatenate([[hz_to_rad_per_us(v) for v in wh], np.radians(th)])
    else:
        f = ec.getfloat(s, "freq_hz")
        b = ec.getfloat(s, "b_mt")
        if f is None or b is None:
            raise ConfigurationError("[truth] needs freq_hz and b_mt")
        row = np.array([hz_to_rad_per_us(f), b])
    return GroundTruth(model, row, seed=seed)


def build_sweep(ec: ExperimentConfig, model) -> SweepSpec:
    s = "sweep"
    d = SweepSpec()
    if ec.kind == "nuclear":
        return SweepSpec(
            kind="nuclear", n_C=model.n_spins,
            omega_h_khz=(1e-3 * ec.getfloat(s, "omega_h_min_hz", 1e3 * d.omega_h_khz[0]),
                         1e-3 * ec.getfloat(s, "omega_h_max_hz", 1e3 * d.omega_h_khz[1])),
            n_omega=ec.getint(s, "n_omega"), layout=ec.get(s, "layout"),
            n_bench=ec.getint(s, "n_bench"))
    return SweepSpec(
        kind="ac",
        freq_khz=(1e-3 * ec.getfloat(s, "freq_min_hz", 1e3 * d.freq_khz[0]),
                  1e-3 * ec.getfloat(s, "freq_max_hz", 1e3 * d.freq_khz[1])),
        n_freq=ec.getint(s, "n_freq", d.n_freq),
        ratio=(ec.getfloat(s, "ratio_min", d.ratio[0]), ec.getfloat(s, "ratio_max", d.ratio[1])),
        n_field=ec.getint(s, "n_field", d.n_field), n_bench=ec.getint(s, "n_bench"))


def sweep_modes(ec: ExperimentConfig, override: str | None = None) -> tuple[str, ...]:
    if override:
        return (override,)
    text = ec.get("sweep", "modes", "sync,nonadaptive")
    modes = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise ConfigurationError(f"[sweep] modes must be drawn from {MODES}, got {text!r}")
    return modes


def dump_config(ec: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    for name, items in ec.sections.items():
        cp[name] = items
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
