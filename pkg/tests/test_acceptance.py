"""End-to-end acceptance checks at their stated scales and tolerances.

Each criterion prints one ``criterion k: PASS/FAIL`` line (also collected in
the terminal summary). The routing and learning experiments are long; they
are computed once per module and shared by the criteria that read them.
"""
import time

import numpy as np
import pytest
from scipy import stats

from jamsim import geometry, harness, learning, routing
from jamsim.agents import Action, handshake_action
from jamsim.config import load_config
from jamsim.geometry import NetworkLayout
from jamsim.harness import MetricsSeries, run_single
from jamsim.oracles import (
    brute_force_costs, hop_is_optimal, dijkstra_distances, finite_difference_gradient,
    mc_adversarial_jam_fraction, mc_eavesdropper_exposure, spreadsheet_network_utility,
    value_iteration_q,
)
from jamsim.world import ScriptedPolicy, World

pytestmark = pytest.mark.slow


# ------------------------------------------------------------- routing runs

@pytest.fixture(scope="module")
def routing_runs():
    cfg = load_config(profile="paper")
    t0 = time.perf_counter()
    res = harness.compare_routing(cfg)
    return cfg, res, time.perf_counter() - t0


def _window_mean(series, a, b):
    return float(np.mean([s.delivered[a:b].mean() for s in series]))


def test_criterion_1_routing_robustness(routing_runs, criterion_report):
    cfg, res, elapsed = routing_runs
    a, h = cfg.red.activation_slot, cfg.horizon
    ratio, final = {}, {}
    for proto, series in res.items():
        ratio[proto] = _window_mean(series, h - 5000, h) / _window_mean(series, 0, a)
        final[proto] = harness.confidence_band(harness.metric_matrix(series, "throughput"), 0.99)
    md, av, aw = "min_distance", "jamming_avoiding", "jamming_aware"
    lo_aw = final[aw].lo[-1]
    others_hi = max(final[md].hi[-1], final[av].hi[-1])
    checks = {
        "min-distance drops": ratio[md] < 0.95,
        "avoiding holds": ratio[av] >= 0.95,
        "aware holds": ratio[aw] >= 0.95,
        "aware best, bands apart": lo_aw > others_hi,
    }
    ok = all(checks.values())
    detail = ("final/pre " + " ".join(f"{p}={r:.3f}" for p, r in ratio.items())
              + "; final mean " + " ".join(f"{p}={final[p].mean[-1]:.4f}" for p in ratio)
              + f"; aware lo {lo_aw:.4f} vs others hi {others_hi:.4f}; failed: "
              + (", ".join(k for k, v in checks.items() if not v) or "none") + f" [{elapsed / 60:.1f} min]")
    criterion_report(1, ok, detail)
    assert ok, detail


def test_criterion_2_security_side_metrics(routing_runs, criterion_report):
    cfg, res, _ = routing_runs
    h = cfg.horizon
    window = (h - 5000, h)
    md = harness.summarize(res["min_distance"], window)
    aw = harness.summarize(res["jamming_aware"], window)
    d_jam = 100 * (aw["jammed_frac"] - md["jammed_frac"])
    d_eav = 100 * (aw["failed_eaves_frac"] - md["failed_eaves_frac"])
    ok = abs(d_jam) <= 5 + 3 and abs(d_eav) <= 4 + 3
    detail = (f"aware - min-distance: jammed {d_jam:+.2f} pp (|.| <= 8), "
              f"failed eavesdropping {d_eav:+.2f} pp (|.| <= 7)")
    criterion_report(2, ok, detail)
    assert ok, detail


# ------------------------------------------------------------ learning runs

@pytest.fixture(scope="module")
def learning_runs():
    cfg = load_config(profile="paper-learning")
    return cfg, harness.compare_policy(cfg)


def test_criterion_3_dqn_learning_curve(learning_runs, criterion_report):
    cfg, res = learning_runs
    th = harness.metric_matrix(res["learner"], "throughput").mean(axis=0)
    base = _window_mean(res["fixed"], 3000, 6000)
    stable = _window_mean(res["learner"], 3000, 6000)
    rel_slope = (th[5999] - th[2999]) / th[5999] if th[5999] > 0 else np.inf
    rises = th[5999] > th[499]
    ok = rises and abs(rel_slope) <= 0.10 and stable >= 2 * base and stable > 0
    detail = (f"running avg {th[499]:.4f}@500 -> {th[2999]:.4f}@3000 -> {th[5999]:.4f}@6000, "
              f"relative drift {rel_slope:+.3f}; learner {stable:.4f} vs fixed {base:.4f} per slot")
    criterion_report(3, ok, detail)
    assert ok, detail


def test_criterion_4_security_trends(learning_runs, criterion_report):
    cfg, res = learning_runs
    slots = np.arange(1000, cfg.horizon)
    slopes = {}
    for m in ("jammed_frac", "failed_eaves_frac"):
        curve = harness.metric_matrix(res["learner"], m).mean(axis=0)[1000:]
        slopes[m] = stats.linregress(slots, curve).slope
    ok = all(s <= 0 for s in slopes.values())
    detail = ", ".join(f"{m} trend {s:+.2e}/slot" for m, s in slopes.items())
    criterion_report(4, ok, detail)
    assert ok, detail


# --------------------------------------------------------- property suite

def _connected(rng, n, r):
    while True:
        pos = geometry.sample_disk(n, 10_000.0, rng)
        if np.all(np.isfinite(dijkstra_distances(pos, r, 0))):
            return pos


def test_criterion_5_property_suite(criterion_report, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    R = 10_000.0
    failures = []

    # arc fractions against border sampling
    worst = 0.0
    for _ in range(40):
        jam, tx = geometry.sample_disk(2, R, rng)
        reach, rx, cjr = rng.uniform(500, 2 * R, 3)
        worst = max(worst, abs(geometry.adversarial_jam_fraction(jam, reach, R)
                               - mc_adversarial_jam_fraction(jam, reach, R, rng=rng)))
        if geometry.border_arc(tx, rx, R)[1] > 1e-3:
            worst = max(worst, abs(geometry.eavesdropper_exposure(tx, rx, jam, cjr, R)
                                   - mc_eavesdropper_exposure(tx, rx, jam, cjr, R, rng=rng)))
    if worst > 0.005:
        failures.append(f"arc error {worst:.4f}")
    if abs(geometry.adversarial_jam_fraction((0.0, R), R, R) - 1 / 3) > 1e-6:
        failures.append("border jammer third")

    # tabular update and toy fixed point
    t = learning.QTable(alpha=0.5, gamma=0.9)
    t.values["n"][:] = [2.0, 0, 0, 0, 0]
    learning.q_update(t, "s", 0, 10.0, "n")
    if abs(t["s", 0] - 5.9) > 1e-12:
        failures.append("Q update")
    trans, rew = [[0, 1], [1, 0]], [[1.0, 0.0], [0.5, 2.0]]
    t = learning.QTable(alpha=0.5, gamma=0.9)
    for _ in range(2000):
        for s in (0, 1):
            for a in (0, 1):
                learning.q_update(t, s, a, rew[s][a], trans[s][a])
    got = np.array([[t[s, a] for a in (0, 1)] for s in (0, 1)])
    if np.max(np.abs(got - value_iteration_q(trans, rew, 0.9))) > 1e-6:
        failures.append("tabular fixed point")

    # gradients against central differences
    for _ in range(5):
        net = [p + rng.normal(0, 0.1, p.shape) for p in learning.init_network(6, (4, 4), rng=rng)]
        e = learning.Experience(rng.random(6), int(rng.integers(5)), 1.0, rng.random(6))
        for grads, f in [
            (learning.critic_gradient(net, e)[0], lambda p: learning.fnn_forward(p, e.state)[e.action]),
            (learning.log_policy_gradient(net, e.state, e.action)[0],
             lambda p: np.log(learning.fnn_forward(p, e.state, "actor")[e.action])),
        ]:
            for g, fd in zip(grads, finite_difference_gradient(f, net)):
                if np.max(np.abs(g - fd)) > 1e-4 * max(np.max(np.abs(fd)), 1e-12) and np.max(np.abs(g - fd)) > 1e-9:
                    failures.append("gradient")

    # next hops against exhaustive scans
    mism = 0
    for k in range(1000):
        n = int(rng.integers(3, 25))
        pos = geometry.sample_disk(n, R, rng)
        proto = list(routing.Protocol)[k % 3]
        tb = routing.init_tables(pos, [[0, n - 1]], 5000.0, proto)
        tb = routing.update_distance_vector(routing.refresh(tb, pos, rng.random(n) < 0.2))
        view = routing.neighbor_view(tb, 0)
        aware = proto is routing.Protocol.JAMMING_AWARE
        fn = routing.next_hop_jamming_aware if aware else routing.next_hop_min_distance
        for i in range(n):
            costs = brute_force_costs(i, 0, pos, 5000.0, view, tb.next_hop[0], n - 1, aware)
            mism += not hop_is_optimal(fn(i, 0, tb), costs)
    if mism:
        failures.append(f"{mism} next-hop mismatches")

    # distance-vector convergence against Dijkstra
    for _ in range(100):
        n = int(rng.integers(4, 25))
        pos = _connected(rng, n, 6000.0)
        tb = routing.converge(routing.init_tables(pos, [[n - 1, 0]], 6000.0))
        if not np.allclose(tb.dist[0], dijkstra_distances(pos, 6000.0, 0), rtol=1e-12):
            failures.append("distance vector")
            break

    # byte-identical reruns
    cfg = load_config(overrides={"horizon": 200, "repetitions": 2, "deployment.n_blue": 20,
                                 "red.activation_slot": 100, "policy.kind": "learner"})
    outs = []
    for k in range(2):
        harness.emit_results(harness.run_experiment(cfg), tmp_path / str(k), cfg)
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / str(k)).iterdir())})
    if outs[0] != outs[1]:
        failures.append("reruns differ")

    elapsed = time.perf_counter() - t0
    if elapsed > 120:
        failures.append(f"took {elapsed:.0f} s")
    ok = not failures
    criterion_report(5, ok, f"{elapsed:.1f} s, arc error {worst:.4f}" + ("; " + ", ".join(failures) if failures else ""))
    assert ok, failures


# ------------------------------------------------------- utility bookkeeping

def test_criterion_6_network_utility_bookkeeping(criterion_report, tmp_path):
    rng = np.random.default_rng(6)
    blue = np.array([[0.0, 0.0], [3000.0, 0.0], [6000.0, 500.0], [2000.0, 3000.0], [-3000.0, 1000.0]])
    red = geometry.sample_border(3, 10_000.0, rng)
    layout = NetworkLayout(10_000.0, blue, red[:1], red[1:2], red[2:], np.array([[0, 2]]))
    # the flow follows the handshake, node 3 jams cooperatively, node 4 adversarially
    cfg = load_config(overrides={"horizon": 10, "red.activation_slot": 0, "mac.arrival_prob": 1.0,
                                 "channel.shadowing_sigma": 0.0, "deployment.speed": 0.0})

    def script(t, i, obs):
        return {3: Action.COOPERATIVE_JAM, 4: Action.ADVERSARIAL_JAM}.get(i) or handshake_action(obs)

    world = World(cfg, 0, policy=ScriptedPolicy(script), layout=layout)
    series = MetricsSeries.from_records(0, [world.step() for _ in range(10)])
    harness.write_raw_csv(series, tmp_path / "raw.csv")

    import csv
    with open(tmp_path / "raw.csv", newline="") as fh:
        rows = [[float(r[k]) for k in ("n_t", "n_cj", "n_aj", "n_e", "n_d")] for r in csv.DictReader(fh)]
    sheet = spreadsheet_network_utility(rows, [15, 5, 3, 3, 1])
    from jamsim.agents import network_utility
    logged = network_utility(series.components, cfg.weights)
    ok = logged == sheet and np.any(series.components[:, 1:3] > 0)
    criterion_report(6, ok, f"logged {logged!r} vs spreadsheet {sheet!r}")
    assert ok
