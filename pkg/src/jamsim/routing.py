"""Distance-vector geometric routing: minimum-distance, jamming-avoiding and
jamming-aware next-hop selection.

Tables are kept network-wide as ``(F, N)`` arrays because the control plane
is reliable and refreshed every slot: what node ``i`` caches about neighbour
``j`` is exactly row ``j`` of the previous snapshot. Neighbours that are
jammed (under the interference-aware protocols) or that never relay are
seen with infinite distance.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .geometry import pairwise_distances


class Protocol(str, Enum):
    MIN_DISTANCE = "min_distance"
    JAMMING_AVOIDING = "jamming_avoiding"
    JAMMING_AWARE = "jamming_aware"

    @property
    def avoids_jammed(self) -> bool:
        return self is not Protocol.MIN_DISTANCE

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, Protocol):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            raise ConfigurationError(
                f"unknown routing protocol {value!r}; choose from {[p.value for p in cls]}"
            ) from None


NO_HOP = -1


def adjacency_matrix(distances: np.ndarray, comm_range: float) -> np.ndarray:
    """Closed-ball neighbourhood, no self loops."""
    adj = distances <= comm_range
    np.fill_diagonal(adj, False)
    return adj


def neighbors(node: int, positions: np.ndarray, comm_range: float) -> np.ndarray:
    if comm_range <= 0:
        raise ConfigurationError("communication range must be > 0")
    d = np.hypot(*(positions - positions[node]).T)
    mask = d <= comm_range
    mask[node] = False
    return np.flatnonzero(mask)


@dataclass
class RoutingTables:
    protocol: Protocol
    comm_range: float
    dest: np.ndarray  # (F,)
    dist: np.ndarray  # (F, N) distance-vector estimate
    next_hop: np.ndarray  # (F, N) protocol's chosen hop, NO_HOP if none
    cost: np.ndarray  # (F, N) protocol cost of next_hop
    positions: np.ndarray
    distances: np.ndarray
    adjacency: np.ndarray
    jammed: np.ndarray  # (N,) broadcast jammed status
    relay_ok: np.ndarray  # (N,) nodes willing to forward

    @property
    def offsets(self) -> np.ndarray:
        """``positions[i] - positions[j]`` for every pair, cached per geometry."""
        cached = getattr(self, "_offsets", None)
        if cached is None or cached[0] is not self.positions:
            cached = (self.positions, self.positions[:, None, :] - self.positions[None, :, :])
            self._offsets = cached
        return cached[1]

    @property
    def n_flows(self) -> int:
        return len(self.dest)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    def distance_cap(self) -> float:
        # no simple path is longer than (N - 1) hops of length r
        return max(self.n_nodes - 1, 1) * self.comm_range


def init_tables(positions, flows, comm_range: float, protocol=Protocol.MIN_DISTANCE,
                relay_ok=None) -> RoutingTables:
    """Seed every entry with the Euclidean distance to the destination."""
    if comm_range <= 0:
        raise ConfigurationError("communication range must be > 0")
    positions = np.asarray(positions, dtype=float)
    flows = np.asarray(flows, dtype=int).reshape(-1, 2)
    n = len(positions)
    dest = flows[:, 1].copy()
    distances = pairwise_distances(positions)
    dist = distances[dest].copy() if len(dest) else np.zeros((0, n))
    tables = RoutingTables(
        protocol=Protocol.parse(protocol),
        comm_range=float(comm_range),
        dest=dest,
        dist=dist,
        next_hop=np.full((len(dest), n), NO_HOP, dtype=int),
        cost=np.full((len(dest), n), np.inf),
        positions=positions,
        distances=distances,
        adjacency=adjacency_matrix(distances, comm_range),
        jammed=np.zeros(n, dtype=bool),
        relay_ok=np.ones(n, dtype=bool) if relay_ok is None else np.asarray(relay_ok, dtype=bool),
    )
    _recompute_hops(tables)
    return tables


def neighbor_view(tables: RoutingTables, flow: int) -> np.ndarray:
    """Distance-to-destination of each node as its neighbours see it."""
    view = tables.dist[flow].copy()
    unusable = ~tables.relay_ok
    if tables.protocol.avoids_jammed:
        unusable = unusable | tables.jammed
    unusable[tables.dest[flow]] = False  # a jammed destination is still where packets must go
    view[unusable] = np.inf
    return view


def min_distance_costs(tables: RoutingTables, flow: int, rows=None) -> np.ndarray:
    """``d_ij + d_jD`` for every neighbour pair, inf elsewhere."""
    rows = slice(None) if rows is None else rows
    view = neighbor_view(tables, flow)
    with np.errstate(invalid="ignore"):
        cost = tables.distances[rows] + view[None, :]
    return np.where(tables.adjacency[rows], cost, np.inf)


def turning_angles(tables: RoutingTables, flow: int, rows=None) -> np.ndarray:
    """Angle at neighbour j between the sender i and j's own next hop.

    pi where j has no onward hop (e.g. j is the destination).
    """
    pos = tables.positions
    idx = np.arange(tables.n_nodes) if rows is None else np.atleast_1d(np.arange(tables.n_nodes)[rows])
    onward = tables.next_hop[flow]
    u = tables.offsets[idx]
    has_onward = onward >= 0
    v = np.zeros_like(pos)
    v[has_onward] = pos[onward[has_onward]] - pos[has_onward]
    cross = u[..., 0] * v[None, :, 1] - u[..., 1] * v[None, :, 0]
    dot = u[..., 0] * v[None, :, 0] + u[..., 1] * v[None, :, 1]
    theta = np.arctan2(np.abs(cross), dot)
    no_onward = ~has_onward.copy()
    no_onward[tables.dest[flow]] = True
    theta[:, no_onward] = np.pi
    # j would hand the packet straight back to i
    back = onward[None, :] == idx[:, None]
    theta[back & has_onward[None, :]] = 0.0
    return theta


def jamming_aware_costs(tables: RoutingTables, flow: int, rows=None) -> np.ndarray:
    """``d_ij / theta_ijj' + d_jD`` over unjammed neighbours."""
    rows = slice(None) if rows is None else rows
    view = neighbor_view(tables, flow)
    theta = turning_angles(tables, flow, rows)
    d = tables.distances[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = np.where(theta > 0, d / theta, np.inf) + view[None, :]
    return np.where(tables.adjacency[rows], cost, np.inf)


def _argmin_rows(cost: np.ndarray):
    hop = np.argmin(cost, axis=1)  # first minimum -> smaller node id on ties
    best = cost[np.arange(len(cost)), hop]
    hop = np.where(np.isfinite(best), hop, NO_HOP)
    return hop, best


def protocol_costs(tables: RoutingTables, flow: int, rows=None) -> np.ndarray:
    if tables.protocol is Protocol.JAMMING_AWARE:
        return jamming_aware_costs(tables, flow, rows)
    return min_distance_costs(tables, flow, rows)


def _recompute_hops(tables: RoutingTables) -> None:
    new_hop = np.empty_like(tables.next_hop)
    new_cost = np.empty_like(tables.cost)
    for f in range(tables.n_flows):
        hop, best = _argmin_rows(protocol_costs(tables, f))
        d = tables.dest[f]
        hop[d], best[d] = NO_HOP, 0.0
        new_hop[f], new_cost[f] = hop, best
    tables.next_hop, tables.cost = new_hop, new_cost


def next_hop_min_distance(node: int, flow: int, tables: RoutingTables) -> int:
    if node == tables.dest[flow]:
        return NO_HOP
    hop, _ = _argmin_rows(min_distance_costs(tables, flow, [node]))
    return int(hop[0])


def next_hop_jamming_aware(node: int, flow: int, tables: RoutingTables) -> int:
    if node == tables.dest[flow]:
        return NO_HOP
    hop, _ = _argmin_rows(jamming_aware_costs(tables, flow, [node]))
    return int(hop[0])


def update_distance_vector(tables: RoutingTables) -> RoutingTables:
    """One synchronous Bellman-Ford round over the previous snapshot.

    Each node recomputes ``min_j d_ij + d_jD`` over usable neighbours; the
    destination stays pinned at 0 and estimates beyond any simple path's
    length become infinite. Next hops are chosen from the same snapshot.
    """
    new = replace(tables, dist=np.empty_like(tables.dist))
    cap = tables.distance_cap()
    for f in range(tables.n_flows):
        best = min_distance_costs(tables, f).min(axis=1)
        best[best > cap] = np.inf
        best[tables.dest[f]] = 0.0
        new.dist[f] = best
    snapshot = replace(tables)
    _recompute_hops(snapshot)
    new.next_hop, new.cost = snapshot.next_hop, snapshot.cost
    return new


def apply_jammed_broadcast(tables: RoutingTables, jammed_neighbor: int) -> RoutingTables:
    """Neighbours learn that ``jammed_neighbor`` is jammed; hops are re-chosen.

    Unknown ids are stale broadcasts and leave the tables untouched.
    """
    if not 0 <= jammed_neighbor < tables.n_nodes:
        return tables
    new = replace(tables, jammed=tables.jammed.copy())
    new.jammed[jammed_neighbor] = True
    _recompute_hops(new)
    return new


def refresh(tables: RoutingTables, positions, jammed) -> RoutingTables:
    """Per-slot maintenance: new geometry, jammed broadcasts, one DV round."""
    positions = np.asarray(positions, dtype=float)
    distances = pairwise_distances(positions)
    current = replace(
        tables,
        positions=positions,
        distances=distances,
        adjacency=adjacency_matrix(distances, tables.comm_range),
        jammed=np.asarray(jammed, dtype=bool).copy(),
    )
    return update_distance_vector(current)


def converge(tables: RoutingTables, max_rounds: int | None = None) -> RoutingTables:
    """Iterate DV rounds until distances and hops stop changing.

    Estimates cut off from the destination count up to the distance cap, which
    can take many rounds when hops are short; the default bound allows for it.
    """
    max_rounds = max_rounds or 100_000
    for _ in range(max_rounds):
        new = update_distance_vector(tables)
        same = np.array_equal(new.dist, tables.dist) and np.array_equal(new.next_hop, tables.next_hop)
        tables = new
        if same:
            break
    return tables


def select_flow(node: int, queue_lengths, tables: RoutingTables):
    """Queued flow whose next hop has the lowest protocol cost.

    Returns ``(flow, next_hop)`` or ``None``; ties go to the smaller flow id.
    """
    q = np.asarray(queue_lengths)
    best = None
    for f in range(tables.n_flows):
        if q[f] <= 0:
            continue
        hop = tables.next_hop[f, node]
        if hop == NO_HOP:
            continue
        c = tables.cost[f, node]
        if best is None or c < best[0]:
            best = (c, f, int(hop))
    return None if best is None else (best[1], best[2])
