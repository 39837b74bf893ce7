import numpy as np
import pytest

from jamsim.agents import Action, handshake_action
from jamsim.config import ExperimentConfig
from jamsim.geometry import NetworkLayout
from jamsim.harness import run_single
from jamsim.world import ScriptedPolicy, World

SMALL = {"horizon": 60, "deployment.n_blue": 12, "deployment.n_flows": 3, "red.activation_slot": 20}


def small_cfg(**extra):
    return ExperimentConfig().with_overrides(**{**SMALL, **extra})


def pair_layout():
    empty = np.zeros((0, 2))
    return NetworkLayout(10_000.0, np.array([[0.0, 0.0], [2000.0, 0.0]]), empty, empty, empty,
                         np.array([[0, 1]]))


def test_all_wait_is_silent():
    cfg = small_cfg()
    w = World(cfg, 0, policy=ScriptedPolicy(lambda t, i, o: Action.WAIT))
    for _ in range(30):
        r = w.step()
        assert r.delivered == 0 and r.components[3] == 0 and r.utility == 0


def test_single_handshake_delivers():
    cfg = ExperimentConfig().with_overrides(**{"channel.shadowing_sigma": 0.0, "mac.arrival_prob": 1.0,
                                               "deployment.speed": 0.0, "red.activation_slot": 10**6})
    w = World(cfg, 0, policy=ScriptedPolicy(lambda t, i, o: handshake_action(o)), layout=pair_layout())
    got = [w.step().delivered for _ in range(4)]
    # slot 0 arrival, slot 1 RTS, slot 2 CTS, slot 3 DATA
    assert got == [0, 0, 0, 1]
    assert w.check_conservation()


def test_red_metrics_zero_before_activation():
    s = run_single(small_cfg(), 3)
    a = 20
    assert s.red_receivers[:a].sum() == 0 and s.eaves_attempts[:a].sum() == 0
    assert np.all(s.jammed_frac[:a] == 0) and np.all(s.failed_eaves_frac[:a] == 0)
    assert s.red_receivers[a:].sum() > 0


@pytest.mark.parametrize("kind", ["fixed", "learner"])
def test_conservation_holds(kind):
    run_single(small_cfg(**{"policy.kind": kind}), 5, check=True)


def test_runs_are_deterministic():
    cfg = small_cfg(**{"policy.kind": "learner"})
    a, b = run_single(cfg, 9), run_single(cfg, 9)
    for name in ("delivered", "red_jammed", "eaves_failed", "components", "utility"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = run_single(cfg, 10)
    assert not np.array_equal(a.utility, c.utility)


def test_slot_utility_matches_components():
    cfg = small_cfg()
    w = World(cfg, 1)
    for _ in range(40):
        r = w.step()
        wts = cfg.weights.as_array() * np.array([1, 1, 1, -1, -1])
        assert r.utility == pytest.approx(float(r.components @ wts))


def test_protocols_share_scenario():
    layouts = []
    for proto in ("min_distance", "jamming_aware"):
        w = World(small_cfg(**{"routing.protocol": proto}), 4)
        layouts.append(w.layout.blue.copy())
    assert np.array_equal(*layouts)
