"""Experiment orchestration: repetitions, running metrics, confidence bands, output files."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ExperimentConfig, from_dict, to_dict
from .errors import InsufficientDataError, OutputError
from .routing import Protocol
from .world import World

METRICS = ("throughput", "jammed_frac", "failed_eaves_frac", "utility")


def _running_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num, den = np.cumsum(num, dtype=float), np.cumsum(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass
class MetricsSeries:
    """Per-slot raw counts of one repetition plus the derived running averages."""

    seed: int
    delivered: np.ndarray
    red_receivers: np.ndarray
    red_jammed: np.ndarray
    eaves_attempts: np.ndarray
    eaves_failed: np.ndarray
    components: np.ndarray  # (T, 5): N_T, N_CJ, N_AJ, N_E, N_D
    utility: np.ndarray
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.delivered)

    @property
    def throughput(self) -> np.ndarray:
        """Cumulative deliveries divided by slots elapsed."""
        return np.cumsum(self.delivered, dtype=float) / np.arange(1, self.horizon + 1)

    @property
    def jammed_frac(self) -> np.ndarray:
        return _running_ratio(self.red_jammed, self.red_receivers)

    @property
    def failed_eaves_frac(self) -> np.ndarray:
        return _running_ratio(self.eaves_failed, self.eaves_attempts)

    @property
    def raw_jammed_frac(self) -> np.ndarray:
        out = np.zeros(self.horizon)
        np.divide(self.red_jammed, self.red_receivers, out=out, where=self.red_receivers > 0)
        return out

    @property
    def raw_failed_eaves_frac(self) -> np.ndarray:
        out = np.zeros(self.horizon)
        np.divide(self.eaves_failed, self.eaves_attempts, out=out, where=self.eaves_attempts > 0)
        return out

    def metric(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @classmethod
    def from_records(cls, seed: int, records, label: str = "") -> "MetricsSeries":
        col = lambda attr: np.array([getattr(r, attr) for r in records], dtype=np.int64)
        return cls(
            seed=seed,
            delivered=col("delivered"),
            red_receivers=col("red_receivers"),
            red_jammed=col("red_jammed"),
            eaves_attempts=col("eaves_attempts"),
            eaves_failed=col("eaves_failed"),
            components=np.array([r.components for r in records]).reshape(-1, 5),
            utility=np.array([r.utility for r in records], dtype=float),
            label=label,
        )


@dataclass
class ConfidenceBand:
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float


def run_single(cfg: ExperimentConfig, seed: int, label: str = "", check: bool = False,
               policy=None) -> MetricsSeries:
    world = World(cfg, seed=seed, policy=policy)
    records = []
    for _ in range(cfg.horizon):
        records.append(world.step())
        if check and not world.check_conservation():
            raise AssertionError(f"packet conservation violated at slot {world.slot} (seed {seed})")
    series = MetricsSeries.from_records(seed, records, label)
    series.extra["action_counts"] = np.bincount(
        np.concatenate([r.actions for r in records]), minlength=5).tolist()
    return series


def _run_job(args):
    cfg_dict, seed, label = args
    return run_single(from_dict(cfg_dict), seed, label)


def run_experiment(cfg: ExperimentConfig, label: str = "", workers: int = 1) -> list[MetricsSeries]:
    """Repetition ``k`` runs with seed ``base_seed + k``."""
    seeds = [cfg.base_seed + k for k in range(cfg.repetitions)]
    if workers <= 1 or len(seeds) == 1:
        return [run_single(cfg, s, label) for s in seeds]
    jobs = [(to_dict(cfg), s, label) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def confidence_band(values, level: float = 0.99) -> ConfidenceBand:
    """Student-t band over repetitions. ``values`` is (reps, T) or a list of 1-D series."""
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"a confidence band needs at least 2 series, got {n}")
    if not 0 < level < 1:
        raise InsufficientDataError(f"confidence level must lie in (0, 1), got {level}")
    mean = x.mean(axis=0)
    half = stats.t.ppf(0.5 + level / 2, n - 1) * x.std(axis=0, ddof=1) / np.sqrt(n)
    return ConfidenceBand(mean, mean - half, mean + half, level)


def metric_matrix(series: list[MetricsSeries], name: str) -> np.ndarray:
    return np.vstack([s.metric(name) for s in series])


# ------------------------------------------------------------------ output

def _open_csv(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def write_run_csv(series: MetricsSeries, path: Path) -> None:
    cols = [np.arange(series.horizon)] + [series.metric(m) for m in METRICS]
    with _open_csv(path) as fh:
        w = csv.writer(fh)  # csv's default dialect already quotes per RFC 4180
        w.writerow(("slot",) + METRICS)
        for row in zip(*cols):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def write_raw_csv(series: MetricsSeries, path: Path) -> None:
    header = ("slot", "delivered", "red_receivers", "red_jammed", "eaves_attempts", "eaves_failed",
              "n_t", "n_cj", "n_aj", "n_e", "n_d", "utility")
    with _open_csv(path) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(series.horizon):
            w.writerow([t, int(series.delivered[t]), int(series.red_receivers[t]), int(series.red_jammed[t]),
                        int(series.eaves_attempts[t]), int(series.eaves_failed[t]),
                        *[repr(float(c)) for c in series.components[t]], repr(float(series.utility[t]))])


def aggregate(series: list[MetricsSeries], level: float = 0.99) -> dict[str, ConfidenceBand]:
    return {m: confidence_band(metric_matrix(series, m), level) for m in METRICS}


def write_aggregate_csv(bands: dict[str, ConfidenceBand], path: Path) -> None:
    names = list(bands)
    horizon = len(bands[names[0]].mean)
    with _open_csv(path) as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + [f"{m}_{k}" for m in names for k in ("mean", "lo", "hi")])
        for t in range(horizon):
            row = [t]
            for m in names:
                b = bands[m]
                row += [repr(float(b.mean[t])), repr(float(b.lo[t])), repr(float(b.hi[t]))]
            w.writerow(row)


def write_manifest(cfg: ExperimentConfig, series: list[MetricsSeries], path: Path, **extra) -> None:
    manifest = {
        "config": cfg.resolved(),
        "seeds": [s.seed for s in series],
        "runs": [{"seed": s.seed, "label": s.label, "file": f"run_{s.seed}.csv",
                  "delivered": int(s.delivered.sum()), **s.extra} for s in series],
        **extra,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def load_manifest(path) -> tuple[ExperimentConfig, list[int]]:
    data = json.loads(Path(path).read_text())
    return from_dict(data["config"]), list(data["seeds"])


def emit_results(series: list[MetricsSeries], out_dir, cfg: ExperimentConfig, level: float = 0.99,
                 **manifest_extra) -> dict[str, ConfidenceBand] | None:
    """Per-run, raw and aggregate CSVs plus ``manifest.json`` under ``out_dir``."""
    out = Path(out_dir)
    for s in series:
        write_run_csv(s, out / f"run_{s.seed}.csv")
        write_raw_csv(s, out / f"raw_{s.seed}.csv")
    bands = None
    if len(series) >= 2:
        bands = aggregate(series, level)
        write_aggregate_csv(bands, out / "aggregate.csv")
    write_manifest(cfg, series, out / "manifest.json", confidence_level=level, **manifest_extra)
    return bands


# ------------------------------------------------------------- experiments

def compare_routing(cfg: ExperimentConfig, workers: int = 1) -> dict[str, list[MetricsSeries]]:
    """All three protocols on the same seeds (hence the same deployments and red events)."""
    out = {}
    for proto in Protocol:
        c = cfg.with_overrides(**{"routing.protocol": proto.value})
        out[proto.value] = run_experiment(c, label=proto.value, workers=workers)
    return out


def policy_configs(cfg: ExperimentConfig) -> dict[str, ExperimentConfig]:
    return {
        "learner": cfg.with_overrides(**{"policy.kind": "learner"}),
        "fixed": cfg.with_overrides(**{"policy.kind": "fixed"}),
    }


def compare_policy(cfg: ExperimentConfig, workers: int = 1) -> dict[str, list[MetricsSeries]]:
    """Learning agents against the fixed-role baseline on shared seeds."""
    return {name: run_experiment(c, label=name, workers=workers) for name, c in policy_configs(cfg).items()}


def summarize(series: list[MetricsSeries], window: tuple[int, int] | None = None) -> dict:
    """Mean per-slot rates over ``window`` (raw counts, pooled over repetitions)."""
    a, b = window or (0, series[0].horizon)
    deliv = np.array([s.delivered[a:b].mean() for s in series])
    jam = sum(int(s.red_jammed[a:b].sum()) for s in series)
    rec = sum(int(s.red_receivers[a:b].sum()) for s in series)
    ef = sum(int(s.eaves_failed[a:b].sum()) for s in series)
    ea = sum(int(s.eaves_attempts[a:b].sum()) for s in series)
    return {
        "throughput": float(deliv.mean()),
        "jammed_frac": jam / rec if rec else 0.0,
        "failed_eaves_frac": ef / ea if ea else 0.0,
    }
