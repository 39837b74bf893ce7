"""Deployment, Brownian mobility and planar geometry on the network disk.

The network occupies a disk of radius ``radius`` centred at the origin.
Blue-force nodes live inside it, red-force nodes sit on its border circle.
All arc measures below refer to arcs of that border circle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateGeometryError

TWO_PI = 2.0 * np.pi


@dataclass
class NetworkLayout:
    """Positions of every node plus the flow endpoints.

    Position arrays have shape ``(count, 2)``. ``flows`` has shape ``(F, 2)``
    holding ``(source, destination)`` blue indices.
    """

    radius: float
    blue: np.ndarray
    red_eavesdroppers: np.ndarray
    red_jammers: np.ndarray
    red_transmitters: np.ndarray
    flows: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    @property
    def n_blue(self) -> int:
        return len(self.blue)

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    def copy(self) -> "NetworkLayout":
        return NetworkLayout(
            self.radius,
            self.blue.copy(),
            self.red_eavesdroppers.copy(),
            self.red_jammers.copy(),
            self.red_transmitters.copy(),
            self.flows.copy(),
        )


@dataclass(frozen=True)
class MobilityState:
    speed: float = 1.0  # m/s
    slot_duration: float = 1.0  # s

    def __post_init__(self):
        if self.speed < 0:
            raise ConfigurationError(f"speed must be >= 0, got {self.speed}")
        if self.slot_duration <= 0:
            raise ConfigurationError(f"slot_duration must be > 0, got {self.slot_duration}")

    @property
    def step_length(self) -> float:
        return self.speed * self.slot_duration


def sample_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Area-uniform points in the disk (sqrt-radius transform)."""
    rho = radius * np.sqrt(rng.random(n))
    phi = rng.random(n) * TWO_PI
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def sample_border(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    phi = rng.random(n) * TWO_PI
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])


def deploy_network(n_blue, m_cj, m_aj, m_t, radius, n_flows, seed) -> NetworkLayout:
    """Draw a random deployment; fully determined by ``seed``.

    Flow endpoints are drawn without replacement, so every blue node is the
    endpoint of at most one flow and ``n_flows`` may not exceed ``n_blue // 2``.
    """
    counts = dict(n_blue=n_blue, m_cj=m_cj, m_aj=m_aj, m_t=m_t, n_flows=n_flows)
    for name, value in counts.items():
        if value < 0:
            raise ConfigurationError(f"{name} must be >= 0, got {value}")
    if radius <= 0:
        raise ConfigurationError(f"radius must be > 0, got {radius}")
    if n_flows > n_blue // 2:
        raise ConfigurationError(
            f"cannot draw {n_flows} flows with distinct endpoints from {n_blue} nodes"
        )
    rng = np.random.default_rng(seed)
    blue = sample_disk(n_blue, radius, rng)
    red_cj = sample_border(m_cj, radius, rng)
    red_aj = sample_border(m_aj, radius, rng)
    red_t = sample_border(m_t, radius, rng)
    endpoints = rng.permutation(n_blue)[: 2 * n_flows]
    flows = endpoints.reshape(n_flows, 2).astype(int)
    return NetworkLayout(radius, blue, red_cj, red_aj, red_t, flows)


def reflect_into_disk(point: np.ndarray, radius: float) -> np.ndarray:
    """Mirror a point that left the disk back across the border circle.

    Uses radial reflection ``rho -> 2R - rho``, which for a short step is the
    specular reflection about the tangent at the crossing point.
    """
    rho = float(np.hypot(point[0], point[1]))
    if rho <= radius:
        return point
    new_rho = 2.0 * radius - rho
    if new_rho < 0:
        # step longer than the diameter; fold repeatedly
        new_rho = abs(new_rho) % (2.0 * radius)
        if new_rho > radius:
            new_rho = 2.0 * radius - new_rho
    return point * (new_rho / rho)


def brownian_step(pos, mob: MobilityState, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Move one step of fixed length in a uniformly random direction."""
    pos = np.asarray(pos, dtype=float)
    step = mob.step_length
    if step == 0:
        return pos.copy()
    phi = rng.random() * TWO_PI
    new = pos + step * np.array([np.cos(phi), np.sin(phi)])
    return reflect_into_disk(new, radius)


def brownian_step_all(positions: np.ndarray, mob: MobilityState, radius: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Vectorised ``brownian_step`` for every row of ``positions``.

    Draws one angle per node from ``rng`` in row order, so it consumes the
    stream exactly like calling ``brownian_step`` node by node.
    """
    n = len(positions)
    step = mob.step_length
    if step == 0 or n == 0:
        return positions.copy()
    phi = rng.random(n) * TWO_PI
    new = positions + step * np.column_stack([np.cos(phi), np.sin(phi)])
    rho = np.hypot(new[:, 0], new[:, 1])
    out = rho > radius
    if np.any(out):
        for k in np.flatnonzero(out):
            new[k] = reflect_into_disk(new[k], radius)
    return new


def pairwise_distances(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    b = a if b is None else b
    diff = a[:, None, :] - b[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def angle_at(j, i, j_prime) -> float:
    """Interior angle at vertex ``j`` between the rays j->i and j->j'.

    Returns a value in [0, pi]; 0 only when i and j' lie on the same ray.
    """
    j = np.asarray(j, dtype=float)
    u = np.asarray(i, dtype=float) - j
    v = np.asarray(j_prime, dtype=float) - j
    nu = np.hypot(u[0], u[1])
    nv = np.hypot(v[0], v[1])
    if nu == 0 or nv == 0:
        raise DegenerateGeometryError("angle_at: vertex coincides with an endpoint")
    # atan2 form is accurate near 0 and pi where arccos is not
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return float(np.arctan2(abs(cross), dot))


def border_arc(center, reach: float, radius: float) -> tuple[float, float]:
    """Arc of the border circle lying inside the disk ``(center, reach)``.

    Returns ``(mid_angle, half_width)``; half_width 0 means no overlap and pi
    means the whole border is covered.
    """
    if reach <= 0:
        return 0.0, 0.0
    cx, cy = float(center[0]), float(center[1])
    d = np.hypot(cx, cy)
    if d == 0:
        return 0.0, (np.pi if reach >= radius else 0.0)
    # border point at angle phi is covered iff cos(phi - phi_c) >= k
    # a subnormal d overflows k to +-inf, which the branches below already handle
    with np.errstate(over="ignore"):
        k = (radius * radius + d * d - reach * reach) / (2.0 * radius * d)
    if k > 1.0:
        return 0.0, 0.0
    half = np.pi if k <= -1.0 else float(np.arccos(k))
    return float(np.arctan2(cy, cx)), half


def _arc_overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Angular measure of the intersection of two border arcs."""
    (ma, ha), (mb, hb) = a, b
    if ha == 0 or hb == 0:
        return 0.0
    if ha >= np.pi:
        return 2.0 * hb
    if hb >= np.pi:
        return 2.0 * ha
    a0, a1 = ma - ha, ma + ha
    total = 0.0
    # arcs shorter than 2pi can meet in up to two pieces; the shifted copies catch both
    for shift in (-TWO_PI, 0.0, TWO_PI):
        b0, b1 = mb - hb + shift, mb + hb + shift
        total += max(0.0, min(a1, b1) - max(a0, b0))
    return min(total, 2.0 * min(ha, hb))


def eavesdropper_exposure(tx, rx_range: float, cj, cj_range: float, radius: float) -> float:
    """Share of the border reachable from ``tx`` that a jammer at ``cj`` also covers.

    Zero when the reception disk does not reach the border at all.
    """
    rx_arc = border_arc(tx, rx_range, radius)
    if rx_arc[1] == 0:
        return 0.0
    cj_arc = border_arc(cj, cj_range, radius)
    return min(1.0, _arc_overlap(rx_arc, cj_arc) / (2.0 * rx_arc[1]))


def adversarial_jam_fraction(jammer, jam_range: float, radius: float) -> float:
    """Fraction of the border circumference inside the jam disk."""
    _, half = border_arc(jammer, jam_range, radius)
    return min(1.0, half / np.pi)
