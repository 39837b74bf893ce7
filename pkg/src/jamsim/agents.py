"""Actions, per-slot utilities, red-force behaviour and the network utility.

Reward and cost terms per action:

=========  ==============================================  =====================
action     reward                                          cost
=========  ==============================================  =====================
Transmit   I(SINR>tau) * w_T * (1 - I(CTS for others))     w_E
Receive    I(SINR>tau) * w_T * I(RTS for me)               I(q>0) * w_D
CoopJam    exposure * w_CJ * I(RTS for others)             w_E + I(q>0) * w_D
AdvJam     jam_fraction * w_AJ * I(red sensed)             w_E + I(q>0) * w_D
Wait       0                                               0
=========  ==============================================  =====================
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .channel import ChannelParams, free_space_gain
from .errors import ConfigurationError


class Action(IntEnum):
    TRANSMIT = 0
    RECEIVE = 1
    COOPERATIVE_JAM = 2
    ADVERSARIAL_JAM = 3
    WAIT = 4

    @property
    def jams(self) -> bool:
        return self in (Action.COOPERATIVE_JAM, Action.ADVERSARIAL_JAM)


N_ACTIONS = len(Action)


@dataclass(frozen=True)
class UtilityWeights:
    w_T: float = 15.0
    w_CJ: float = 5.0
    w_AJ: float = 3.0
    w_E: float = 3.0
    w_D: float = 1.0

    def __post_init__(self):
        for name in ("w_T", "w_CJ", "w_AJ", "w_E", "w_D"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"weight {name} must be >= 0")

    def scaled(self, factor: float) -> "UtilityWeights":
        return UtilityWeights(*(factor * w for w in self.as_array()))

    def as_array(self) -> np.ndarray:
        """Order: T, CJ, AJ, E, D."""
        return np.array([self.w_T, self.w_CJ, self.w_AJ, self.w_E, self.w_D])


@dataclass(frozen=True)
class SlotUtility:
    reward: float = 0.0
    cost: float = 0.0

    @property
    def utility(self) -> float:
        return self.reward - self.cost


def utility_transmit(sinr_ok, collision, weights: UtilityWeights) -> SlotUtility:
    return SlotUtility(sinr_ok * weights.w_T * (1 - collision), weights.w_E)


def utility_receive(sinr_ok, rts_for_me, q_positive, weights: UtilityWeights) -> SlotUtility:
    return SlotUtility(sinr_ok * weights.w_T * rts_for_me, q_positive * weights.w_D)


def _jam_cost(q_positive, weights):
    return weights.w_E + q_positive * weights.w_D


def utility_cooperative_jam(exposure, overheard_rts_other, q_positive,
                            weights: UtilityWeights) -> SlotUtility:
    return SlotUtility(exposure * weights.w_CJ * overheard_rts_other, _jam_cost(q_positive, weights))


def utility_adversarial_jam(jam_fraction, sensed_red, q_positive,
                            weights: UtilityWeights) -> SlotUtility:
    return SlotUtility(jam_fraction * weights.w_AJ * sensed_red, _jam_cost(q_positive, weights))


def utility_wait() -> SlotUtility:
    return SlotUtility(0.0, 0.0)


# ---------------------------------------------------------------- red force

class RedBehavior(IntEnum):
    EAVESDROP = 0
    JAM = 1
    TRANSMIT = 2


@dataclass(frozen=True)
class RedForceState:
    behavior: RedBehavior
    activation_slot: int = 5000

    def active(self, slot: int) -> bool:
        return slot >= self.activation_slot


def mean_power_from(sources: np.ndarray, point, params: ChannelParams) -> float:
    """Zero-shadow power received at ``point`` summed over ``sources``."""
    if len(sources) == 0:
        return 0.0
    d = np.hypot(*(np.asarray(sources, dtype=float) - np.asarray(point, dtype=float)).T)
    d = np.maximum(d, 1e-9)
    return float(np.sum(params.tx_power * free_space_gain(d, params.carrier_wavelength)))


def sense_red_transmission(node_pos, red_transmitters: np.ndarray, active: bool,
                           params: ChannelParams) -> int:
    """``I_adv``: red communications heard above the detection threshold."""
    if not active:
        return 0
    return int(mean_power_from(red_transmitters, node_pos, params) > params.detect_threshold)


@dataclass
class RedSlotEvents:
    """Outcome of red-force activity during one slot."""

    active: bool
    eaves_attempts: int = 0
    eaves_failed: int = 0
    red_receivers: int = 0
    red_jammed: int = 0

    @property
    def failed_eaves_frac(self) -> float:
        return self.eaves_failed / self.eaves_attempts if self.eaves_attempts else 0.0

    @property
    def jammed_frac(self) -> float:
        return self.red_jammed / self.red_receivers if self.red_receivers else 0.0


def red_force_step(slot: int, activation_slot: int, eaves_sinr_db: np.ndarray,
                   red_rx_sinr_db: np.ndarray, red_rx_sinr_clean_db: np.ndarray,
                   params: ChannelParams) -> RedSlotEvents:
    """Classify red-force outcomes for one slot from precomputed SINRs.

    ``eaves_sinr_db`` has one entry per (eavesdropper, blue DATA frame) pair.
    ``red_rx_sinr_db`` is each red receiver's SINR with blue emissions counted,
    ``red_rx_sinr_clean_db`` the same without them; a red receiver is jammed by
    the blue force when blue emissions push it from above tau to at or below.
    """
    if slot < activation_slot:
        return RedSlotEvents(active=False)
    tau = params.sinr_threshold
    eaves = np.asarray(eaves_sinr_db, dtype=float).ravel()
    with_blue = np.asarray(red_rx_sinr_db, dtype=float)
    clean = np.asarray(red_rx_sinr_clean_db, dtype=float)
    return RedSlotEvents(
        active=True,
        eaves_attempts=int(eaves.size),
        eaves_failed=int(np.sum(eaves <= tau)),
        red_receivers=int(with_blue.size),
        red_jammed=int(np.sum((with_blue <= tau) & (clean > tau))),
    )


# ------------------------------------------------------------ network utility

COMPONENTS = ("N_T", "N_CJ", "N_AJ", "N_E", "N_D")
SIGNS = np.array([1.0, 1.0, 1.0, -1.0, -1.0])


def network_utility(components, weights: UtilityWeights) -> float:
    """Weighted reward-minus-cost of time-averaged metric components.

    ``components`` is a ``(T, 5)`` array of per-slot values ordered like
    :data:`COMPONENTS`.
    """
    comp = np.asarray(components, dtype=float).reshape(-1, 5)
    if len(comp) == 0:
        raise ConfigurationError("network_utility needs at least one slot")
    return float(np.sum(SIGNS * weights.as_array() * comp.mean(axis=0)))


def slot_network_utility(components, weights: UtilityWeights) -> np.ndarray:
    comp = np.asarray(components, dtype=float).reshape(-1, 5)
    return comp @ (SIGNS * weights.as_array())


# ------------------------------------------------------------ fixed roles

class FixedRolePolicy:
    """Non-learning baseline: static roles assigned once per run.

    Communication nodes follow the handshake (answer CTS with DATA, RTS with
    CTS, keep listening while a DATA frame is due, send when holding packets),
    jammer nodes jam every slot.
    """

    def __init__(self, roles):
        self.roles = np.asarray(roles, dtype=int)

    @classmethod
    def assign(cls, n_nodes: int, cj_fraction: float, aj_fraction: float,
               protected, rng: np.random.Generator) -> "FixedRolePolicy":
        """Draw jammer roles among nodes that are not flow endpoints."""
        n_cj = int(round(cj_fraction * n_nodes))
        n_aj = int(round(aj_fraction * n_nodes))
        protected = set(int(p) for p in np.ravel(protected))
        pool = np.array([i for i in range(n_nodes) if i not in protected], dtype=int)
        if n_cj + n_aj > len(pool):
            raise ConfigurationError("not enough non-endpoint nodes for the jammer roles")
        pick = rng.permutation(pool)
        roles = np.full(n_nodes, -1, dtype=int)
        roles[pick[:n_cj]] = Action.COOPERATIVE_JAM
        roles[pick[n_cj:n_cj + n_aj]] = Action.ADVERSARIAL_JAM
        return cls(roles)

    @property
    def relay_mask(self) -> np.ndarray:
        return self.roles < 0

    def act(self, node: int, obs) -> Action:
        role = self.roles[node]
        if role >= 0:
            return _CJ if role == _CJ else _AJ
        return handshake_action(obs)


_T, _R, _CJ, _AJ, _W = tuple(Action)


def handshake_action(obs) -> Action:
    """Greedy protocol-following role for a communication node."""
    if obs.cts_for_me:
        return _T
    if obs.rts_for_me or obs.waiting_for_data:
        return _R
    if obs.sent_rts:
        # listen for the CTS
        return _W
    if obs.q_len > 0 and not obs.backoff_elapsed and (obs.rts_other or obs.cts_other):
        # carrier sensed: defer this slot
        return _W
    if obs.q_len > 0:
        return _T
    return _W
