"""Independent reference computations used to cross-check the fast code paths.

Each oracle takes the slow, obvious route: point sampling instead of closed-form
arcs, explicit neighbour scans instead of vectorised argmins, Dijkstra instead
of distance-vector rounds, value iteration instead of sampled Q updates, and
central differences instead of backprop.
"""
from __future__ import annotations

import heapq
import math

import numpy as np


# --------------------------------------------------------------- geometry

def border_samples(radius: float, n: int, rng) -> np.ndarray:
    """``n`` uniform border points, one per equal sub-arc (stratified)."""
    phi = (np.arange(n) + rng.random(n)) * (2.0 * np.pi / n)
    return radius * np.column_stack([np.cos(phi), np.sin(phi)])


def mc_adversarial_jam_fraction(jammer, jam_range, radius, n=100_000, rng=None) -> float:
    rng = np.random.default_rng(rng)
    pts = border_samples(radius, n, rng)
    # points on the jam circle count as covered; the slack absorbs rounding of cos/sin
    return float(np.mean(np.hypot(*(pts - np.asarray(jammer)).T) <= jam_range * (1 + 1e-12)))


def mc_eavesdropper_exposure(tx, rx_range, cj, cj_range, radius, n=100_000, rng=None) -> float:
    rng = np.random.default_rng(rng)
    pts = border_samples(radius, n, rng)
    in_rx = np.hypot(*(pts - np.asarray(tx)).T) <= rx_range * (1 + 1e-12)
    if not in_rx.any():
        return 0.0
    in_cj = np.hypot(*(pts - np.asarray(cj)).T) <= cj_range * (1 + 1e-12)
    return float(np.sum(in_rx & in_cj) / np.sum(in_rx))


# ---------------------------------------------------------------- routing

def _angle(j, i, jp) -> float:
    u = (i[0] - j[0], i[1] - j[1])
    v = (jp[0] - j[0], jp[1] - j[1])
    cosv = (u[0] * v[0] + u[1] * v[1]) / (math.hypot(*u) * math.hypot(*v))
    return math.acos(max(-1.0, min(1.0, cosv)))


def brute_force_costs(node, flow, positions, comm_range, dist_view, next_hop, dest, aware) -> np.ndarray:
    """Protocol cost of every candidate next hop by explicit scan; inf where unusable.

    ``dist_view`` is each node's advertised distance to the destination with
    unusable nodes already set to inf; ``next_hop`` the onward hops of the
    neighbours (needed for the turning angle).
    """
    out = np.full(len(positions), math.inf)
    if node == dest:
        return out
    pi_ = positions[node]
    for j in range(len(positions)):
        if j == node:
            continue
        dij = math.dist(pi_, positions[j])
        if dij > comm_range or not math.isfinite(dist_view[j]):
            continue
        if aware:
            onward = next_hop[j]
            if j == dest or onward < 0:
                theta = math.pi
            elif onward == node:
                theta = 0.0
            else:
                theta = _angle(positions[j], pi_, positions[onward])
            out[j] = math.inf if theta == 0 else dij / theta + dist_view[j]
        else:
            out[j] = dij + dist_view[j]
    return out


def brute_force_next_hop(node, flow, positions, comm_range, dist_view, next_hop, dest, aware) -> int:
    """First (lowest id) minimiser of :func:`brute_force_costs`, or -1."""
    costs = brute_force_costs(node, flow, positions, comm_range, dist_view, next_hop, dest, aware)
    best_j, best = -1, math.inf
    for j, c in enumerate(costs):
        if c < best:
            best, best_j = c, j
    return best_j


def hop_is_optimal(hop: int, costs, rel_tol: float = 1e-12) -> bool:
    """``hop`` attains the scanned minimum up to rounding (-1 iff nothing is usable)."""
    finite = np.isfinite(costs)
    if not finite.any():
        return hop == -1
    if hop < 0:
        return False
    best = float(np.min(costs))
    return bool(costs[hop] <= best + rel_tol * max(1.0, abs(best)))


def dijkstra_distances(positions, comm_range, dest, usable=None) -> np.ndarray:
    """Shortest Euclidean path length to ``dest`` over the unit-disk graph.

    Nodes with ``usable[j] == False`` may be endpoints but never intermediate hops.
    """
    n = len(positions)
    usable = np.ones(n, dtype=bool) if usable is None else np.asarray(usable)
    out = np.full(n, np.inf)
    out[dest] = 0.0
    heap = [(0.0, dest)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, j = heapq.heappop(heap)
        if done[j]:
            continue
        done[j] = True
        if j != dest and not usable[j]:
            continue  # reachable itself, but relays nothing
        for i in range(n):
            if i == j or done[i]:
                continue
            w = math.dist(positions[i], positions[j])
            if w <= comm_range and d + w < out[i]:
                out[i] = d + w
                heapq.heappush(heap, (out[i], i))
    return out


# --------------------------------------------------------------- learning

def value_iteration_q(transitions, rewards, gamma, tol=1e-13, max_iter=100_000) -> np.ndarray:
    """Optimal Q of a deterministic MDP: ``transitions[s][a] -> s'``, ``rewards[s][a]``."""
    transitions = np.asarray(transitions)
    rewards = np.asarray(rewards, dtype=float)
    q = np.zeros_like(rewards)
    for _ in range(max_iter):
        new = rewards + gamma * q.max(axis=1)[transitions]
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new
    return q


def finite_difference_gradient(f, params, eps=1e-5) -> list:
    """Central differences of scalar ``f(params)`` w.r.t. every entry of every array."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            hi = f(params)
            p[idx] = old - eps
            lo = f(params)
            p[idx] = old
            g[idx] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def spreadsheet_network_utility(components, weights) -> float:
    """Row-by-row evaluation of the weighted time-averaged utility.

    ``components`` rows are (N_T, N_CJ, N_AJ, N_E, N_D); ``weights`` in the same order.
    """
    rows = [list(map(float, r)) for r in components]
    t = len(rows)
    avg = [sum(r[k] for r in rows) / t for k in range(5)]
    w = list(map(float, weights))
    return w[0] * avg[0] + w[1] * avg[1] + w[2] * avg[2] - w[3] * avg[3] - w[4] * avg[4]


def run_all(seed: int = 0, n_instances: int = 200) -> dict:
    """Quick self-check of the fast implementations against the oracles above."""
    from . import geometry, routing

    rng = np.random.default_rng(seed)
    report = {}
    radius = 10_000.0
    worst = 0.0
    for _ in range(20):
        jam = geometry.sample_disk(1, radius, rng)[0]
        reach = rng.uniform(500, 15_000)
        fast = geometry.adversarial_jam_fraction(jam, reach, radius)
        worst = max(worst, abs(fast - mc_adversarial_jam_fraction(jam, reach, radius, rng=rng)))
    report["arc_fraction_max_abs_err"] = worst

    mismatches = 0
    for k in range(n_instances):
        n = int(rng.integers(5, 25))
        pos = geometry.sample_disk(n, radius, rng)
        flows = np.array([[0, n - 1]])
        proto = routing.Protocol.JAMMING_AWARE if k % 2 else routing.Protocol.MIN_DISTANCE
        t = routing.converge(routing.init_tables(pos, flows, 6000.0, proto))
        view = routing.neighbor_view(t, 0)
        for i in range(n):
            costs = brute_force_costs(i, 0, pos, 6000.0, view, t.next_hop[0], n - 1,
                                      proto is routing.Protocol.JAMMING_AWARE)
            got = (routing.next_hop_jamming_aware if proto is routing.Protocol.JAMMING_AWARE
                   else routing.next_hop_min_distance)(i, 0, t)
            mismatches += int(not hop_is_optimal(got, costs))
    report["next_hop_mismatches"] = mismatches
    return report
