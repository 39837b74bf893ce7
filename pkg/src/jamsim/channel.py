"""Free-space path loss with log-normal shadowing, SINR and jam detection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateGeometryError


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def free_space_gain(distance, wavelength: float):
    """Friis power gain ``(lambda / (4 pi d))**2``."""
    return (wavelength / (4.0 * np.pi * np.asarray(distance, dtype=float))) ** 2


def range_for_power(power_w: float, tx_power: float, wavelength: float) -> float:
    """Distance at which a zero-shadow free-space link delivers ``power_w``."""
    return wavelength / (4.0 * np.pi) * np.sqrt(tx_power / power_w)


@dataclass(frozen=True)
class ChannelParams:
    tx_power: float = 1.0  # W
    jam_power: float = 0.03  # W radiated by jammers of either force
    carrier_wavelength: float = 0.125  # m, 2.4 GHz
    shadowing_sigma: float = 8.0  # dB
    noise_power: float = dbm_to_watts(-100.0)  # W
    sinr_threshold: float = 5.0  # dB
    jam_detect_threshold: float | None = None  # W; None -> power at jam_detect_distance
    jam_detect_distance: float = 8891.4  # m; 1 W at this distance blocks a 5 km link (5000 * 10**(5/20))

    def __post_init__(self):
        for name in ("tx_power", "jam_power", "carrier_wavelength", "noise_power", "jam_detect_distance"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"channel.{name} must be > 0")
        if self.shadowing_sigma < 0:
            raise ConfigurationError("channel.shadowing_sigma must be >= 0")
        if self.jam_detect_threshold is not None and not self.jam_detect_threshold > 0:
            raise ConfigurationError("channel.jam_detect_threshold must be > 0")

    @property
    def detect_threshold(self) -> float:
        if self.jam_detect_threshold is not None:
            return self.jam_detect_threshold
        return float(self.tx_power * free_space_gain(self.jam_detect_distance, self.carrier_wavelength))

    @property
    def threshold_linear(self) -> float:
        return float(db_to_linear(self.sinr_threshold))

    def decode_range(self, signal_power: float | None = None) -> float:
        """Distance at which the zero-shadow SNR equals the SINR threshold."""
        p = self.tx_power if signal_power is None else signal_power
        return range_for_power(self.noise_power * self.threshold_linear, p, self.carrier_wavelength)


@dataclass(frozen=True)
class LinkSample:
    rx_power: float
    interference_power: float
    sinr: float  # dB


def received_power(params: ChannelParams, distance, shadow_db=0.0):
    """Received power in watts; array inputs broadcast."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DegenerateGeometryError("received_power: distance must be > 0")
    p = params.tx_power * free_space_gain(d, params.carrier_wavelength) * db_to_linear(shadow_db)
    return float(p) if p.ndim == 0 else p


def sinr(signal_w: float, interferers_w, noise_w: float) -> float:
    """SINR in dB."""
    if not noise_w > 0:
        raise ConfigurationError("noise power must be > 0")
    interference = float(np.sum(interferers_w)) if np.size(interferers_w) else 0.0
    if signal_w <= 0:
        return -np.inf
    return 10.0 * np.log10(signal_w / (interference + noise_w))


def link_sample(signal_w: float, interferers_w, noise_w: float) -> LinkSample:
    total = float(np.sum(interferers_w)) if np.size(interferers_w) else 0.0
    return LinkSample(signal_w, total, sinr(signal_w, interferers_w, noise_w))


def decodes(sinr_db, params: ChannelParams):
    """``I(SINR > tau)``."""
    return np.asarray(sinr_db) > params.sinr_threshold


def is_jammed(total_received_interference: float, params: ChannelParams) -> bool:
    return bool(total_received_interference > params.detect_threshold)


def draw_shadowing(params: ChannelParams, shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Gaussian shadowing in dB (zeros when sigma is 0, rng still advanced)."""
    z = rng.standard_normal(shape)
    return z * params.shadowing_sigma
