"""Invertible complex STFT/ISTFT and the 8-plane FOA spectrogram stack."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .foa import FoaWaveform


@dataclass(frozen=True)
class StftConfig:
    """STFT analysis parameters.

    `bins` may be smaller than n_fft//2 + 1, in which case the spectrogram is
    cropped to the lowest `bins` frequency bands and inversion zero-fills the
    rest (band-limited reconstruction).
    """

    n_fft: int
    win_length: int
    hop: int
    window: str  # "hann" or "rect"
    frames: int
    bins: int
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if self.window not in ("hann", "rect"):
            raise ValueError(f"unknown window {self.window!r}")
        if min(self.n_fft, self.win_length, self.hop, self.frames, self.bins) < 1:
            raise ValueError("all STFT sizes must be positive")
        if self.win_length > self.n_fft:
            raise ValueError("win_length cannot exceed n_fft")
        if self.bins > self.n_fft // 2 + 1:
            raise ValueError("bins cannot exceed n_fft//2 + 1")
        if self.window == "hann" and self.hop > self.win_length:
            raise ValueError("hann preset requires hop <= win_length")

    @property
    def full_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def padded_length(self) -> int:
        """Total samples covered by the configured frame count."""
        return (self.frames - 1) * self.hop + self.win_length

    def window_array(self) -> np.ndarray:
        if self.window == "rect":
            return np.ones(self.win_length)
        # half-sample offset keeps the endpoints nonzero, so the squared
        # overlap-add is strictly positive over every covered sample
        k = np.arange(self.win_length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * (k + 0.5) / self.win_length)


# Presets. The generator trains on `desk`, which crops to the lowest 16 bands
# (0..240 Hz at 16 kHz) so a 1 s clip becomes a 16x16 grid.
_PRESETS = {
    "paper-shape": dict(n_fft=254, win_length=254, hop=250, window="rect", frames=64, bins=128),
    "hann-128": dict(n_fft=254, win_length=254, hop=125, window="hann", frames=128, bins=128),
    "desk": dict(n_fft=1000, win_length=1000, hop=1000, window="rect", frames=16, bins=16),
}


def stft_preset(name: str, sample_rate: int = 16000) -> StftConfig:
    """Look up a named StftConfig preset ("paper-shape", "hann-128", "desk")."""
    if name not in _PRESETS:
        raise ValueError(f"unknown STFT preset {name!r}; choose from {sorted(_PRESETS)}")
    return StftConfig(sample_rate=sample_rate, **_PRESETS[name])


def stft(signal: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Forward STFT to a (frames, bins) complex matrix.

    Frame m covers samples [m*hop, m*hop + win_length). The signal is
    zero-padded or cropped to exactly cfg.frames frames.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1 or signal.size < 1:
        raise ValueError("signal must be a nonempty 1-D array")
    need = cfg.padded_length
    if signal.size < need:
        signal = np.concatenate([signal, np.zeros(need - signal.size)])
    else:
        signal = signal[:need]
    idx = np.arange(cfg.win_length)[None, :] + cfg.hop * np.arange(cfg.frames)[:, None]
    frames = signal[idx] * cfg.window_array()[None, :]
    return np.fft.rfft(frames, n=cfg.n_fft, axis=1)[:, : cfg.bins]


def istft(spec: np.ndarray, cfg: StftConfig, length: int | None = None) -> np.ndarray:
    """Inverse STFT via normalized weighted overlap-add.

    Exact inverse of `stft` (up to rounding) wherever the analysis frames
    covered the signal and no bin cropping removed energy.
    """
    spec = np.asarray(spec)
    if spec.shape != (cfg.frames, cfg.bins):
        raise ValueError(f"spec shape {spec.shape} does not match config "
                         f"({cfg.frames}, {cfg.bins})")
    if cfg.bins < cfg.full_bins:
        spec = np.concatenate(
            [spec, np.zeros((cfg.frames, cfg.full_bins - cfg.bins), dtype=complex)], axis=1
        )
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1)[:, : cfg.win_length]
    w = cfg.window_array()
    out = np.zeros(cfg.padded_length)
    denom = np.zeros(cfg.padded_length)
    idx = (np.arange(cfg.win_length)[None, :] + cfg.hop * np.arange(cfg.frames)[:, None]).ravel()
    np.add.at(out, idx, (frames * w[None, :]).ravel())
    np.add.at(denom, idx, np.tile(w * w, cfg.frames))
    covered = denom > 0
    out[covered] /= denom[covered]
    if length is None:
        return out
    if length <= out.size:
        return out[:length]
    return np.concatenate([out, np.zeros(length - out.size)])


@dataclass(frozen=True)
class FoaSpectrogram:
    """Real (8, T, F) stack [W_re, W_im, Y_re, Y_im, Z_re, Z_im, X_re, X_im]."""

    planes: np.ndarray
    stft_config: StftConfig

    def __post_init__(self) -> None:
        p = np.asarray(self.planes)
        expect = (8, self.stft_config.frames, self.stft_config.bins)
        if p.shape != expect:
            raise ValueError(f"planes shape {p.shape}, expected {expect}")
        if not np.all(np.isfinite(p)):
            raise ValueError("spectrogram contains non-finite values")
        object.__setattr__(self, "planes", p)


def waveform_to_spec(a: FoaWaveform, cfg: StftConfig) -> FoaSpectrogram:
    """STFT all four channels and stack real/imag planes in W, Y, Z, X order."""
    planes = np.empty((8, cfg.frames, cfg.bins))
    for i in range(4):
        s = stft(a.channels[i], cfg)
        planes[2 * i] = s.real
        planes[2 * i + 1] = s.imag
    return FoaSpectrogram(planes, cfg)


def spec_to_waveform(spec: FoaSpectrogram, length: int | None = None) -> FoaWaveform:
    """Inverse of waveform_to_spec (band-limited if the config crops bins)."""
    cfg = spec.stft_config
    if length is None:
        length = cfg.padded_length
    chans = np.empty((4, length))
    for i in range(4):
        cplx = spec.planes[2 * i] + 1j * spec.planes[2 * i + 1]
        chans[i] = istft(cplx, cfg, length=length)
    return FoaWaveform(chans, cfg.sample_rate)
