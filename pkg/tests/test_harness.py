import csv
import json

import numpy as np
import pytest
from scipy import stats

from jamsim import harness as h
from jamsim.config import ExperimentConfig
from jamsim.errors import InsufficientDataError, OutputError

CFG = ExperimentConfig().with_overrides(**{"horizon": 10, "repetitions": 3, "deployment.n_blue": 10,
                                           "deployment.n_flows": 2, "red.activation_slot": 4})


def test_band_examples():
    same = np.tile(np.arange(5.0), (4, 1))
    b = h.confidence_band(same)
    assert np.array_equal(b.lo, b.hi) and np.array_equal(b.mean, same[0])
    b = h.confidence_band([[0.0], [2.0]], 0.99)
    assert b.mean[0] == 1.0
    assert abs((b.hi[0] - b.mean[0]) - 63.657) < 1e-3
    with pytest.raises(InsufficientDataError):
        h.confidence_band([[1.0, 2.0]])


def test_band_shrinks_with_repetitions(rng):
    widths = []
    for n in (10, 40, 160):
        x = rng.normal(size=(n, 2000))
        b = h.confidence_band(x, 0.95)
        widths.append(np.mean(b.hi - b.lo))
    assert widths[0] / widths[1] == pytest.approx(2.0, rel=0.1)
    assert widths[1] / widths[2] == pytest.approx(2.0, rel=0.1)


def test_run_experiment_seeds():
    one = h.run_experiment(CFG.with_overrides(repetitions=1))
    assert len(one) == 1 and one[0].seed == 0
    many = h.run_experiment(CFG.with_overrides(base_seed=7))
    assert [s.seed for s in many] == [7, 8, 9]


@pytest.fixture(scope="module")
def emitted(tmp_path_factory):
    out = tmp_path_factory.mktemp("res")
    series = h.run_experiment(CFG)
    h.emit_results(series, out, CFG, level=0.99)
    return out, series


def test_run_csv_layout(emitted):
    out, series = emitted
    raw = (out / "run_0.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"slot,throughput,jammed_frac,failed_eaves_frac,utility"
    assert len([l for l in lines if l]) == 11
    rows = list(csv.DictReader(open(out / "run_0.csv", newline="")))
    assert np.allclose([float(r["throughput"]) for r in rows], series[0].throughput)


def test_manifest_round_trip(emitted, tmp_path):
    out, series = emitted
    cfg, seeds = h.load_manifest(out / "manifest.json")
    assert cfg == CFG and seeds == [0, 1, 2]
    again = h.run_experiment(cfg)
    h.emit_results(again, tmp_path, cfg)
    for s in seeds:
        assert (tmp_path / f"run_{s}.csv").read_bytes() == (out / f"run_{s}.csv").read_bytes()
    assert (tmp_path / "aggregate.csv").read_bytes() == (out / "aggregate.csv").read_bytes()
    meta = json.loads((out / "manifest.json").read_text())
    assert meta["confidence_level"] == 0.99 and "resolved" in meta["config"]


def test_aggregate_matches_reaggregation(emitted):
    out, _ = emitted
    runs = []
    for k in range(3):
        with open(out / f"run_{k}.csv", newline="") as fh:
            runs.append([{m: float(v) for m, v in r.items()} for r in csv.DictReader(fh)])
    with open(out / "aggregate.csv", newline="") as fh:
        agg = list(csv.DictReader(fh))
    t = stats.t.ppf(0.995, 2)
    for slot, row in enumerate(agg):
        for m in h.METRICS:
            vals = [r[slot][m] for r in runs]
            mean = sum(vals) / 3
            sd = (sum((v - mean) ** 2 for v in vals) / 2) ** 0.5
            assert float(row[f"{m}_mean"]) == pytest.approx(mean, abs=1e-12)
            assert float(row[f"{m}_hi"]) == pytest.approx(mean + t * sd / 3 ** 0.5, abs=1e-9)
            assert float(row[f"{m}_lo"]) == pytest.approx(mean - t * sd / 3 ** 0.5, abs=1e-9)


def test_output_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError, match="file"):
        h.emit_results(h.run_experiment(CFG.with_overrides(repetitions=1)), blocker / "sub", CFG)


def test_running_metrics():
    s = h.MetricsSeries(0, np.array([1, 0, 2]), np.array([0, 2, 2]), np.array([0, 1, 2]),
                        np.array([1, 0, 1]), np.array([1, 0, 0]), np.zeros((3, 5)), np.zeros(3))
    assert np.allclose(s.throughput, [1, 0.5, 1])
    assert np.allclose(s.jammed_frac, [0, 0.5, 0.75])
    assert np.allclose(s.failed_eaves_frac, [1, 1, 0.5])
    assert np.allclose(s.raw_jammed_frac, [0, 0.5, 1])


def test_compare_routing_shares_seeds():
    res = h.compare_routing(CFG.with_overrides(repetitions=2, horizon=5))
    assert set(res) == {"min_distance", "jamming_avoiding", "jamming_aware"}
    assert all([s.seed for s in v] == [0, 1] for v in res.values())
    summary = h.summarize(res["min_distance"])
    assert set(summary) == {"throughput", "jammed_frac", "failed_eaves_frac"}


def test_parallel_equals_serial():
    cfg = CFG.with_overrides(repetitions=2)
    a = h.run_experiment(cfg, workers=1)
    b = h.run_experiment(cfg, workers=2)
    assert all(np.array_equal(x.utility, y.utility) for x, y in zip(a, b))
