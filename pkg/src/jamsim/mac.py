"""Simplified CSMA/CA RTS/CTS handshake and the per-node observation vector.

Each node emits at most one message per slot. A slot's messages are resolved
by the channel and become visible in the observation of the following slot.
ACKs ride a reliable control plane: the packet moves as soon as the DATA
frame decodes, and the ACK is logged but occupies no slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from functools import lru_cache
from enum import IntEnum
from typing import Callable, Iterable, Optional

import numpy as np

from .agents import Action
from .errors import ConfigurationError


class Kind(IntEnum):
    RTS = 0
    CTS = 1
    DATA = 2
    ACK = 3


RTS, CTS, DATA, ACK = Kind.RTS, Kind.CTS, Kind.DATA, Kind.ACK
_TRANSMIT, _RECEIVE = Action.TRANSMIT, Action.RECEIVE


@dataclass(frozen=True)
class MacMessage:
    kind: Kind
    src: int
    dst: int
    flow: int

    def __post_init__(self):
        if self.src == self.dst:
            raise ConfigurationError(f"message from node {self.src} to itself")


@dataclass
class AgentObservation:
    q_len: int = 0
    rts_for_me: int = 0
    rts_other: int = 0
    cts_for_me: int = 0
    cts_other: int = 0
    sent_rts: int = 0
    sent_cts: int = 0
    slots_since_rts: int = 0
    backoff_elapsed: int = 0
    waiting_for_data: int = 0

    def as_tuple(self) -> tuple:
        return (self.q_len, self.rts_for_me, self.rts_other, self.cts_for_me, self.cts_other,
                self.sent_rts, self.sent_cts, self.slots_since_rts, self.backoff_elapsed,
                self.waiting_for_data)


INDICATOR_FIELDS = ("rts_for_me", "rts_other", "cts_for_me", "cts_other", "sent_rts", "sent_cts")


@dataclass(frozen=True)
class ObservationCaps:
    q_len: int = 8
    slots_since_rts: int = 4
    backoff_elapsed: int = 4
    waiting_for_data: int = 4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ConfigurationError(f"cap for {f.name} must be > 0")

    def block_sizes(self) -> list[int]:
        sizes = []
        for f in fields(AgentObservation):
            sizes.append(2 if f.name in INDICATOR_FIELDS else getattr(self, f.name) + 1)
        return sizes

    @property
    def encoded_length(self) -> int:
        return sum(self.block_sizes())


@lru_cache(maxsize=None)
def _block_layout(caps: ObservationCaps):
    sizes = np.array(caps.block_sizes())
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return offsets, sizes - 1, int(sizes.sum())


def one_hot_encode(obs: AgentObservation, caps: ObservationCaps = ObservationCaps()) -> np.ndarray:
    """Clamp every counter to its cap and concatenate one-hot blocks s1..s10."""
    offsets, top, length = _block_layout(caps)
    values = np.clip(np.array(obs.as_tuple()), 0, top)
    out = np.zeros(length)
    out[offsets + values] = 1.0
    return out


def detect_collision(node: int, inbound: Iterable[MacMessage]) -> int:
    """1 iff some decoded CTS reserves the channel for another node."""
    return int(any(m.kind == CTS and m.dst != node for m in inbound))


@dataclass(frozen=True)
class MacParams:
    backoff_window: int = 8
    rts_expiry: int = 10
    data_wait_expiry: int = 4
    arrival_prob: float = 0.5
    queue_capacity: int = 50

    def __post_init__(self):
        if self.backoff_window < 1:
            raise ConfigurationError("mac.backoff_window must be >= 1")
        if self.rts_expiry < 1 or self.data_wait_expiry < 1:
            raise ConfigurationError("mac expiry limits must be >= 1")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ConfigurationError("mac.arrival_prob must be in [0, 1]")
        if self.queue_capacity < 1:
            raise ConfigurationError("mac.queue_capacity must be >= 1")


# route(node) -> (flow, next_hop) or None
RouteFn = Callable[[int], Optional[tuple]]


@dataclass
class MacNode:
    """Handshake bookkeeping for one blue node."""

    node: int
    n_flows: int
    params: MacParams = field(default_factory=MacParams)
    queues: np.ndarray = None
    pending: Optional[tuple] = None  # (next_hop, flow) of an outstanding RTS
    waiting: Optional[tuple] = None  # (sender, flow) granted a CTS
    grant: Optional[tuple] = None  # (sender, flow) of the RTS we would answer
    cts_from: int = -1
    overheard_src: int = -1  # sender of an overheard RTS meant for someone else
    backoff_left: int = 0
    obs: AgentObservation = field(default_factory=AgentObservation)
    no_route: bool = False

    def __post_init__(self):
        if self.queues is None:
            self.queues = np.zeros(self.n_flows, dtype=np.int64)

    @property
    def q_len(self) -> int:
        return int(self.queues.sum())

    def emit(self, action: Action, route: RouteFn) -> Optional[MacMessage]:
        """Outbound frame for this slot (jamming is not a MAC frame)."""
        self.no_route = False
        obs = self.obs
        if action == _TRANSMIT:
            if self.pending is not None and obs.cts_for_me and self.cts_from == self.pending[0]:
                hop, flow = self.pending
                self.pending = None
                self.obs.slots_since_rts = 0
                return MacMessage(DATA, self.node, hop, flow)
            if self.backoff_left > 0:
                return None
            if self.pending is not None:
                hop, flow = self.pending
                return MacMessage(RTS, self.node, hop, flow)
            choice = route(self.node)
            if choice is None:
                self.no_route = True
                return None
            flow, hop = choice
            self.pending = (int(hop), int(flow))
            self.obs.slots_since_rts = 0
            return MacMessage(RTS, self.node, int(hop), int(flow))
        if action == _RECEIVE and obs.rts_for_me and self.grant is not None:
            sender, flow = self.grant
            self.waiting = (sender, flow)
            self.obs.waiting_for_data = 0
            return MacMessage(CTS, self.node, sender, flow)
        return None

    def absorb(self, inbound: Iterable[MacMessage], sent: Optional[MacMessage],
               rng: np.random.Generator) -> AgentObservation:
        """Fold this slot's decoded frames into the next observation."""
        p = self.params
        prev = self.obs
        me = self.node
        rts_mine, cts_mine, data_src, rts_others = [], [], [], []
        collision = 0
        for m in inbound:
            k = m.kind
            if k == RTS:
                (rts_mine if m.dst == me else rts_others).append(m)
            elif k == CTS:
                if m.dst == me:
                    cts_mine.append(m.src)
                else:
                    collision = 1  # a CTS reserving the channel for someone else
            elif k == DATA and m.dst == me:
                data_src.append(m.src)
        # lowest sender id wins when several RTS arrive together
        self.grant = None
        if rts_mine:
            best = min(rts_mine, key=lambda m: m.src)
            self.grant = (best.src, best.flow)
        self.cts_from = min(cts_mine) if cts_mine else -1
        self.overheard_src = min(m.src for m in rts_others) if rts_others else -1

        if self.waiting is not None and self.waiting[0] in data_src:
            self.waiting = None

        slots_since_rts = 0
        if self.pending is not None:
            slots_since_rts = prev.slots_since_rts + 1
            if slots_since_rts > p.rts_expiry:
                self.pending = None
                slots_since_rts = 0
        granted = self.pending is not None and self.cts_from == self.pending[0]
        # an RTS that drew no CTS is treated like a collision
        missed = bool(prev.sent_rts) and not granted
        if (collision or missed) and self.pending is not None and not granted and self.backoff_left == 0:
            self.backoff_left = int(rng.integers(1, p.backoff_window + 1))
            backoff_elapsed = 0
        elif self.backoff_left > 0:
            self.backoff_left -= 1
            backoff_elapsed = prev.backoff_elapsed + 1 if self.backoff_left > 0 else 0
        else:
            backoff_elapsed = 0
        waiting_for_data = 0
        if self.waiting is not None:
            waiting_for_data = prev.waiting_for_data + 1
            if waiting_for_data > p.data_wait_expiry:
                self.waiting = None
                waiting_for_data = 0

        self.obs = AgentObservation(
            q_len=self.q_len,
            rts_for_me=int(bool(rts_mine)),
            rts_other=int(bool(rts_others)),
            cts_for_me=int(bool(cts_mine)),
            cts_other=collision,
            sent_rts=int(sent is not None and sent.kind == RTS),
            sent_cts=int(sent is not None and sent.kind == CTS),
            slots_since_rts=slots_since_rts,
            backoff_elapsed=backoff_elapsed,
            waiting_for_data=waiting_for_data,
        )
        return self.obs


def mac_transition(node: MacNode, action: Action, inbound: Iterable[MacMessage],
                   route: RouteFn, rng: np.random.Generator):
    """One slot for an isolated node: emit, then absorb ``inbound``.

    ``inbound`` stands for whatever the channel delivered during the slot.
    Returns ``(next_observation, outbound_messages)``.
    """
    sent = node.emit(action, route)
    obs = node.absorb(inbound, sent, rng)
    return obs, ([] if sent is None else [sent])
