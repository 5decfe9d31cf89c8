"""First-order Ambisonics encoding (ACN channel order W, Y, Z, X; SN3D gains)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Direction


@dataclass(frozen=True)
class FoaWaveform:
    """4-channel time-domain Ambisonics signal, channels (W, Y, Z, X)."""

    channels: np.ndarray  # shape (4, n_samples)
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels)
        if ch.ndim != 2 or ch.shape[0] != 4:
            raise ValueError(f"expected 4 equal-length channels, got shape {ch.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def w(self) -> np.ndarray:
        return self.channels[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


def foa_gains(d: Direction) -> np.ndarray:
    """SN3D plane-wave gains (W, Y, Z, X) for a source direction.

    W = 1, Y = sin(az)cos(el), Z = sin(el), X = cos(az)cos(el).
    """
    ce = np.cos(d.elevation)
    return np.array([1.0, np.sin(d.azimuth) * ce, np.sin(d.elevation), np.cos(d.azimuth) * ce])


def encode_foa(mono: np.ndarray, d: Direction, sample_rate: int = 16000) -> FoaWaveform:
    """Encode a mono signal as an FOA plane wave from direction d.

    Each output channel is gain * mono, sample-exact.
    """
    mono = np.asarray(mono, dtype=float)
    if mono.size == 0:
        raise ValueError("empty signal")
    if not np.all(np.isfinite(mono)):
        raise ValueError("mono signal must be finite")
    gains = foa_gains(d)
    return FoaWaveform(gains[:, None] * mono[None, :], sample_rate)
