"""Slot-by-slot simulation of one network realisation.

Phase order inside :meth:`World.step`:

1. mobility
2. jam detection, jammed broadcasts and one distance-vector round
3. every blue node observes and picks an action
4. MAC frames are emitted and resolved against the slot's interference
5. red-force eavesdropping / reception outcomes
6. per-node utilities; learners store the transition
7. traffic arrivals, metrics and conservation ledger
8. actions cached for neighbours
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import routing
from .agents import (
    Action,
    FixedRolePolicy,
    N_ACTIONS,
    SlotUtility,
    red_force_step,
    slot_network_utility,
    utility_adversarial_jam,
    utility_cooperative_jam,
    utility_receive,
    utility_transmit,
    utility_wait,
)
from .channel import free_space_gain
from .config import ExperimentConfig
from .geometry import (
    MobilityState,
    adversarial_jam_fraction,
    brownian_step_all,
    deploy_network,
    eavesdropper_exposure,
    pairwise_distances,
)
from .learning import ActorCriticBank, epsilon_schedule, make_learner
from .mac import ACK, MacMessage, MacNode, one_hot_encode
from .mac import DATA as _DATA_KIND, RTS as _RTS_KIND

# plain ints: comparing numpy integers with enum members is slow
TRANSMIT, RECEIVE, COOP_JAM, ADV_JAM, WAIT = (int(a) for a in Action)
DATA, RTS = int(_DATA_KIND), int(_RTS_KIND)
STREAMS = ("deploy", "mobility", "shadowing", "traffic", "mac", "policy")


class LearnerPolicy:
    """One independent learner per blue node, epsilon-greedy on its scores."""

    relay_mask = None
    needs_states = True

    def __init__(self, cfg: ExperimentConfig, n_nodes: int, n_features: int, seed_seq):
        lc = cfg.learning
        self.cfg = lc
        self.kind = cfg.policy.learner
        rngs = [np.random.default_rng(s) for s in seed_seq.spawn(n_nodes)]
        if self.kind == "actor_critic":
            self.bank = ActorCriticBank(n_nodes, n_features, rngs, hidden=tuple(lc.hidden),
                                        actor_lr=lc.actor_lr, critic_lr=lc.critic_lr, gamma=lc.gamma,
                                        memory_capacity=lc.memory_capacity, batch_size=lc.batch_size,
                                        max_grad_norm=lc.max_grad_norm, act_on=lc.act_on)
            self.learners = None
        else:
            self.bank = None
            self.learners = [make_learner(self.kind, n_features, r, learning_rate=lc.q_alpha, gamma=lc.gamma)
                             for r in rngs]
        self.epsilon = 1.0

    def begin_slot(self, slot: int) -> None:
        self.epsilon = epsilon_schedule(slot, self.cfg.eps_breakpoints, self.cfg.eps_values)

    def act_all(self, obs, states) -> np.ndarray:
        if self.bank is not None:
            return self.bank.act(states, self.epsilon)
        return np.array([int(l.act(states[i], self.epsilon)) for i, l in enumerate(self.learners)])

    def observe_all(self, states, actions, utilities, new_states) -> None:
        if self.bank is not None:
            self.bank.store(states, actions, utilities, new_states)
            return
        for i, l in enumerate(self.learners):
            l.observe(states[i], int(actions[i]), utilities[i], new_states[i])

    def end_episode(self) -> None:
        if self.bank is not None:
            self.bank.replay()


class FixedPolicyAdapter:
    needs_states = False

    def __init__(self, fixed: FixedRolePolicy):
        self.fixed = fixed
        self.relay_mask = fixed.relay_mask

    def begin_slot(self, slot):
        pass

    def act_all(self, obs, states):
        return np.array([int(self.fixed.act(i, o)) for i, o in enumerate(obs)])

    def observe_all(self, *args):
        pass

    def end_episode(self):
        pass


class ScriptedPolicy(FixedPolicyAdapter):
    """Actions from a callable ``fn(slot, node, obs) -> Action`` (tests, demos)."""

    def __init__(self, fn, relay_mask=None):
        self.fn = fn
        self.relay_mask = relay_mask
        self.slot = 0

    def begin_slot(self, slot):
        self.slot = slot

    def act_all(self, obs, states):
        return np.array([int(self.fn(self.slot, i, o)) for i, o in enumerate(obs)])


@dataclass
class SlotRecord:
    delivered: int
    red_receivers: int
    red_jammed: int
    eaves_attempts: int
    eaves_failed: int
    components: np.ndarray  # N_T, N_CJ, N_AJ, N_E, N_D
    utility: float
    actions: np.ndarray
    node_utility: np.ndarray
    hops: int = 0  # DATA frames accepted this slot, relays included


class World:
    def __init__(self, cfg: ExperimentConfig, seed: int, policy=None, layout=None):
        self.cfg = cfg
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        children = dict(zip(STREAMS, ss.spawn(len(STREAMS))))
        self.rngs = {k: np.random.default_rng(v) for k, v in children.items() if k != "policy"}
        dep = cfg.deployment
        if layout is None:
            layout = deploy_network(dep.n_blue, dep.m_cj, dep.m_aj, dep.m_t, dep.radius,
                                    dep.n_flows, self.rngs["deploy"])
        self.layout = layout
        self.radius = layout.radius
        self.mobility = MobilityState(dep.speed, dep.slot_duration)
        self.positions = layout.blue.copy()
        self.flows = layout.flows
        n, f = layout.n_blue, layout.n_flows
        self.n, self.n_flows = n, f
        self.red_pos = np.vstack([layout.red_eavesdroppers, layout.red_jammers,
                                  layout.red_transmitters]).reshape(-1, 2)
        m_cj, m_aj = len(layout.red_eavesdroppers), len(layout.red_jammers)
        self.eaves_idx = n + np.arange(m_cj)
        self.red_jam_idx = n + m_cj + np.arange(m_aj)
        self.red_tx_idx = n + m_cj + m_aj + np.arange(len(layout.red_transmitters))
        self.n_all = n + len(self.red_pos)

        self.caps = cfg.caps
        self.n_features = self.caps.encoded_length
        if policy is None:
            if cfg.policy.kind == "fixed":
                fixed = FixedRolePolicy.assign(n, cfg.policy.cj_fraction, cfg.policy.aj_fraction,
                                               self.flows, np.random.default_rng(children["policy"]))
                policy = FixedPolicyAdapter(fixed)
            else:
                policy = LearnerPolicy(cfg, n, self.n_features, children["policy"])
        self.policy = policy

        self.mac = [MacNode(i, f, cfg.mac) for i in range(n)]
        self.tables = routing.init_tables(self.positions, self.flows, cfg.routing.comm_range,
                                          cfg.routing.protocol, policy.relay_mask)
        self.dest_of_flow = self.flows[:, 1] if f else np.zeros(0, dtype=int)
        self.generated = np.zeros(f, dtype=np.int64)
        self.dropped = np.zeros(f, dtype=np.int64)
        self.delivered = np.zeros(f, dtype=np.int64)
        self.slot = 0
        self.last_actions = np.full(n, int(Action.WAIT))
        self.last_messages: list = []
        self.last_acks: list = []
        self.jammed = np.zeros(n, dtype=bool)
        self.encode_states = getattr(policy, "needs_states", True)
        self.states = self._encode()
        self._overheard = np.full(n, -1)

        ch = cfg.channel
        self.noise = ch.noise_power
        self.tau_lin = ch.threshold_linear
        self.red_link_power = ch.tx_power * float(free_space_gain(cfg.red.red_link_distance,
                                                                  ch.carrier_wavelength))
        self.eaves_range = cfg.eaves_range

    # ------------------------------------------------------------ helpers

    def red_active(self, slot=None) -> bool:
        return (self.slot if slot is None else slot) >= self.cfg.red.activation_slot

    def _mean_power(self, sources_idx, power=1.0) -> np.ndarray:
        """Zero-shadow power at each blue node from red nodes ``sources_idx``."""
        if len(sources_idx) == 0:
            return np.zeros(self.n)
        src = self.red_pos[sources_idx - self.n]
        d = np.maximum(pairwise_distances(self.positions, src), 1.0)
        ch = self.cfg.channel
        return (power * free_space_gain(d, ch.carrier_wavelength)).sum(axis=1)

    def _encode(self):
        if not self.encode_states:
            return None
        return np.array([one_hot_encode(m.obs, self.caps) for m in self.mac], dtype=np.uint8)

    def route(self, node: int):
        return routing.select_flow(node, self.mac[node].queues, self.tables)

    def queue_matrix(self) -> np.ndarray:
        return np.array([m.queues for m in self.mac]).reshape(self.n, self.n_flows)

    def check_conservation(self) -> bool:
        queued = self.queue_matrix().sum(axis=0)
        return bool(np.all(self.generated == queued + self.delivered + self.dropped))

    # ---------------------------------------------------------------- step

    def step(self) -> SlotRecord:
        cfg, ch = self.cfg, self.cfg.channel
        t = self.slot
        n = self.n
        active = self.red_active(t)

        # 1. mobility
        self.positions = brownian_step_all(self.positions, self.mobility, self.radius, self.rngs["mobility"])

        # 2. routing maintenance
        if active:
            self.jammed = self._mean_power(self.red_jam_idx, ch.jam_power) > ch.detect_threshold
        else:
            self.jammed = np.zeros(n, dtype=bool)
        self.tables = routing.refresh(self.tables, self.positions, self.jammed)
        shadow = self.rngs["shadowing"].standard_normal((self.n_all, self.n_all)) * ch.shadowing_sigma

        # 3. observe and act
        self.policy.begin_slot(t)
        obs_before = [m.obs for m in self.mac]
        states = self.states
        actions = np.asarray(self.policy.act_all(obs_before, states), dtype=np.int64)

        # 4. MAC emission and channel resolution
        msgs = [self.mac[i].emit(int(actions[i]), self.route) for i in range(n)]
        jams = (actions == COOP_JAM) | (actions == ADV_JAM)
        emits = jams | np.array([m is not None for m in msgs], dtype=bool)
        blue_emitters = np.flatnonzero(emits)
        red_emitters = np.concatenate([self.red_jam_idx, self.red_tx_idx]) if active else np.zeros(0, int)
        emitters = np.concatenate([blue_emitters, red_emitters]).astype(int)
        all_pos = np.vstack([self.positions, self.red_pos])
        if len(emitters):
            d = np.maximum(pairwise_distances(all_pos[emitters], all_pos), 1.0)
            power = ch.tx_power * free_space_gain(d, ch.carrier_wavelength) * 10.0 ** (shadow[emitters] / 10.0)
            power[np.arange(len(emitters)), emitters] = 0.0
            scale = np.ones(len(emitters))
            scale[:len(blue_emitters)][jams[blue_emitters]] = ch.jam_power / ch.tx_power
            if active:
                scale[len(blue_emitters):len(blue_emitters) + len(self.red_jam_idx)] = ch.jam_power / ch.tx_power
            power *= scale[:, None]
        else:
            power = np.zeros((0, self.n_all))
        total = power.sum(axis=0)
        blue_total = total[:n]
        if active and not cfg.red.tx_interferes and len(self.red_tx_idx):
            blue_total = blue_total - power[len(emitters) - len(self.red_tx_idx):, :n].sum(axis=0)
        row_of = {int(e): k for k, e in enumerate(emitters)}

        listening = ~emits
        frames = [(i, m) for i, m in enumerate(msgs) if m is not None]
        inbound = [[] for _ in range(n)]
        decoded_at = {}
        for i, m in frames:
            sig = power[row_of[i], :n]
            ok = (sig > self.tau_lin * (blue_total - sig + self.noise)) & listening
            decoded_at[i] = ok
            for r in np.flatnonzero(ok):
                inbound[r].append(m)

        delivered_by = np.zeros(n, dtype=bool)
        received_by = np.zeros(n, dtype=bool)
        acks = []
        delivered_now = 0
        for i, m in frames:
            if m.kind != DATA:
                continue
            if decoded_at[i][m.dst] and actions[m.dst] == RECEIVE and self.mac[i].queues[m.flow] > 0:
                self.mac[i].queues[m.flow] -= 1
                if m.dst == self.dest_of_flow[m.flow]:
                    self.delivered[m.flow] += 1
                    delivered_now += 1
                else:
                    self.mac[m.dst].queues[m.flow] += 1
                delivered_by[i] = True
                received_by[m.dst] = True
                acks.append(MacMessage(ACK, m.dst, i, m.flow))

        for i in range(n):
            self.mac[i].absorb(inbound[i], msgs[i], self.rngs["mac"])

        # 5. red force
        if active:
            data_rows = [row_of[i] for i, m in frames if m.kind == DATA]
            ev = self.eaves_idx
            if data_rows and len(ev):
                sig = power[data_rows][:, ev]
                eaves_sinr = sig / (total[ev][None, :] - sig + self.noise)
            else:
                eaves_sinr = np.zeros(0)
            rt = self.red_tx_idx
            blue_rows = [row_of[int(e)] for e in blue_emitters]
            blue_part = power[blue_rows][:, rt].sum(axis=0) if blue_rows else np.zeros(len(rt))
            own = np.array([power[row_of[int(e)], e] for e in rt]) if len(rt) else np.zeros(0)
            interference = total[rt] - own
            rx_sinr = self.red_link_power / (interference + self.noise)
            rx_clean = self.red_link_power / (interference - blue_part + self.noise)
            to_db = lambda x: 10.0 * np.log10(np.maximum(x, 1e-300))
            events = red_force_step(t, cfg.red.activation_slot, to_db(eaves_sinr),
                                    to_db(rx_sinr), to_db(rx_clean), ch)
        else:
            events = red_force_step(t, cfg.red.activation_slot, [], [], [], ch)

        # 6. utilities
        w = cfg.weights
        if active and len(self.red_tx_idx):
            sensed = self._mean_power(self.red_tx_idx, ch.tx_power) > ch.detect_threshold
        else:
            sensed = np.zeros(n, dtype=bool)
        node_u = np.zeros(n)
        energy = 0
        delay = 0
        for i in range(n):
            a = actions[i]
            ob = obs_before[i]
            qpos = int(ob.q_len > 0)
            if a == TRANSMIT:
                # the frame sent this slot reached its addressee (DATA: and was accepted)
                m = msgs[i]
                if m is None:
                    # nothing radiated (backoff, empty queue, no route): scored like Wait
                    u = utility_wait()
                else:
                    ok = delivered_by[i] if m.kind == DATA else bool(decoded_at[i][m.dst])
                    u = utility_transmit(int(ok), ob.cts_other, w)
                    energy += 1
            elif a == RECEIVE:
                # a frame for me decoded while listening: a fresh RTS, or the DATA of my handshake
                rts_now = any(m.kind == RTS and m.dst == i for m in inbound[i])
                got = rts_now or received_by[i]
                u = utility_receive(int(got), int(rts_now or bool(ob.rts_for_me) or ob.waiting_for_data > 0), qpos, w)
                delay += qpos
            elif a == COOP_JAM:
                # sender heard during the previous slot, i.e. the one behind ob.rts_other
                exposure = 0.0
                if ob.rts_other and self._overheard[i] >= 0:
                    exposure = eavesdropper_exposure(self.positions[self._overheard[i]], self.eaves_range,
                                                     self.positions[i], cfg.rewards.cj_range, self.radius)
                u = utility_cooperative_jam(exposure, ob.rts_other, qpos, w)
                energy += 1
                delay += qpos
            elif a == ADV_JAM:
                frac = adversarial_jam_fraction(self.positions[i], cfg.rewards.aj_range, self.radius)
                u = utility_adversarial_jam(frac, int(sensed[i]), qpos, w)
                energy += 1
                delay += qpos
            else:
                u = utility_wait()
            node_u[i] = u.utility
        self._overheard = np.array([m.overheard_src for m in self.mac])

        # 7. arrivals, learner transitions, metrics
        arrivals = self.rngs["traffic"].random(self.n_flows) < cfg.mac.arrival_prob
        for fl in np.flatnonzero(arrivals):
            src = self.flows[fl, 0]
            self.generated[fl] += 1
            if self.mac[src].q_len < cfg.mac.queue_capacity:
                self.mac[src].queues[fl] += 1
            else:
                self.dropped[fl] += 1
        for i in range(n):
            self.mac[i].obs.q_len = self.mac[i].q_len
        new_states = self._encode()
        self.policy.observe_all(states, actions, node_u, new_states)
        self.states = new_states
        if (t + 1) % cfg.learning.replay_interval == 0:
            self.policy.end_episode()

        components = np.array([delivered_now, events.failed_eaves_frac, events.jammed_frac,
                               energy, delay], dtype=float)
        record = SlotRecord(
            delivered=delivered_now,
            red_receivers=events.red_receivers,
            red_jammed=events.red_jammed,
            eaves_attempts=events.eaves_attempts,
            eaves_failed=events.eaves_failed,
            components=components,
            utility=float(slot_network_utility(components, w)[0]),
            actions=actions,
            node_utility=node_u,
            hops=int(delivered_by.sum()),
        )
        # 8. broadcast actions
        self.last_actions = actions
        self.last_messages = [m for _, m in frames]
        self.last_acks = acks
        self.slot += 1
        return record
