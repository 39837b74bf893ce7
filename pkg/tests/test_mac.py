import numpy as np
import pytest
from hypothesis import given, strategies as st

from jamsim.agents import Action
from jamsim.errors import ConfigurationError
from jamsim.mac import (
    CTS, DATA, RTS, AgentObservation, MacMessage, MacNode, MacParams, ObservationCaps,
    detect_collision, mac_transition, one_hot_encode,
)


def route_to(hop, flow=0):
    return lambda node: (flow, hop)


def test_wait_is_inert(rng):
    node = MacNode(0, 1)
    obs, out = mac_transition(node, Action.WAIT, [], route_to(1), rng)
    assert out == [] and obs == AgentObservation()


def test_transmit_after_cts_sends_data(rng):
    node = MacNode(0, 1)
    node.queues[0] = 1
    node.obs = AgentObservation(q_len=1)
    _, out = mac_transition(node, Action.TRANSMIT, [], route_to(1), rng)
    assert out == [MacMessage(RTS, 0, 1, 0)]
    node2 = MacNode(1, 1)
    node2.absorb(out, None, rng)
    obs, cts = mac_transition(node2, Action.RECEIVE, [], route_to(0), rng)
    assert cts == [MacMessage(CTS, 1, 0, 0)] and obs.waiting_for_data == 1
    node.absorb(cts, None, rng)
    assert node.obs.cts_for_me == 1
    obs, data = mac_transition(node, Action.TRANSMIT, [], route_to(1), rng)
    assert data == [MacMessage(DATA, 0, 1, 0)]
    assert obs.slots_since_rts == 0


def test_two_rts_one_grant(rng):
    rx = MacNode(5, 1)
    rx.absorb([MacMessage(RTS, 3, 5, 0), MacMessage(RTS, 2, 5, 0)], None, rng)
    _, out = mac_transition(rx, Action.RECEIVE, [], route_to(0), rng)
    assert out == [MacMessage(CTS, 5, 2, 0)]
    loser = MacNode(3, 1)
    loser.queues[0] = 2
    loser.obs = AgentObservation(q_len=2)
    mac_transition(loser, Action.TRANSMIT, [], route_to(5), rng)
    before = loser.obs.slots_since_rts
    loser.absorb(out, None, rng)
    assert loser.obs.cts_for_me == 0 and loser.obs.cts_other == 1
    assert loser.obs.slots_since_rts == before + 1


def test_rts_expires(rng):
    node = MacNode(0, 1, MacParams(rts_expiry=3))
    node.queues[0] = 1
    node.emit(Action.TRANSMIT, route_to(1))
    for _ in range(4):
        node.absorb([], None, rng)
    assert node.pending is None and node.obs.slots_since_rts == 0


def test_collision_indicator():
    assert detect_collision(1, []) == 0
    assert detect_collision(1, [MacMessage(CTS, 2, 1, 0)]) == 0
    assert detect_collision(1, [MacMessage(CTS, 2, 3, 0)]) == 1
    assert detect_collision(1, [MacMessage(RTS, 2, 3, 0)]) == 0


def test_self_addressed_message_rejected():
    with pytest.raises(ConfigurationError):
        MacMessage(RTS, 1, 1, 0)


def test_one_hot_examples():
    caps = ObservationCaps()
    zero = one_hot_encode(AgentObservation(), caps)
    starts = np.concatenate([[0], np.cumsum(caps.block_sizes())[:-1]])
    assert zero.sum() == 10 and np.all(zero[starts] == 1)
    assert np.array_equal(one_hot_encode(AgentObservation(q_len=13), caps),
                          one_hot_encode(AgentObservation(q_len=8), caps))
    assert caps.encoded_length == 9 + 6 * 2 + 5 + 5 + 5 == 36


@given(st.lists(st.integers(0, 30), min_size=10, max_size=10))
def test_one_hot_shape(values):
    v = one_hot_encode(AgentObservation(*values))
    assert v.shape == (36,) and v.sum() == 10 and set(np.unique(v)) <= {0.0, 1.0}


def test_params_validated():
    with pytest.raises(ConfigurationError):
        MacParams(arrival_prob=1.5)
    with pytest.raises(ConfigurationError):
        ObservationCaps(q_len=0)
