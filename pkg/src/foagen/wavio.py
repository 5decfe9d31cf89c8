"""Float32 WAV read/write. 4-channel files are FOA in ACN order (W, Y, Z, X)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile


def write_wav(path: str | Path, data: np.ndarray, sample_rate: int) -> None:
    """Write mono (n,) or multichannel (channels, n) data as 32-bit float PCM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        data = data.T  # scipy expects (n_samples, n_channels)
    elif data.ndim != 1:
        raise ValueError(f"expected 1-D or 2-D data, got shape {data.shape}")
    wavfile.write(str(path), int(sample_rate), data)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file to ((channels, n) float64, sample_rate). Mono gives (1, n)."""
    sample_rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return data, int(sample_rate)
