"""Shoebox image-source simulation for a tetrahedral cardioid array, plus the
A-format to B-format (FOA) matrix conversion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .foa import FoaWaveform, foa_gains
from .geometry import Direction, dir_to_unit_vector

_SINC_HALF = 40  # 81-tap fractional-delay kernel


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room with uniform broadband wall absorption."""

    dimensions: tuple[float, float, float] = (30.0, 20.0, 10.0)
    wall_absorption: float = 0.5
    max_image_order: int = 6
    speed_of_sound: float = 343.0
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if min(self.dimensions) <= 0:
            raise ValueError(f"room dimensions must be positive, got {self.dimensions}")
        if not 0.0 < self.wall_absorption <= 1.0:
            raise ValueError("wall_absorption must be in (0, 1]")
        if self.max_image_order < 0:
            raise ValueError("max_image_order must be >= 0")


def _tetra_offsets(radius: float) -> np.ndarray:
    signs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return radius / np.sqrt(3.0) * signs


@dataclass(frozen=True)
class ArraySpec:
    """Regular tetrahedral array of outward-facing cardioid capsules."""

    radius: float = 0.02
    capsule_positions: np.ndarray = field(default=None)  # type: ignore[assignment]
    capsule_orientations: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("array radius must be positive")
        pos = self.capsule_positions
        if pos is None:
            pos = _tetra_offsets(self.radius)
        pos = np.asarray(pos, dtype=float)
        if pos.shape != (4, 3):
            raise ValueError("expected 4 capsule positions")
        ori = self.capsule_orientations
        if ori is None:
            ori = pos / np.linalg.norm(pos, axis=1, keepdims=True)
        ori = np.asarray(ori, dtype=float)
        ori = ori / np.linalg.norm(ori, axis=1, keepdims=True)
        object.__setattr__(self, "capsule_positions", pos)
        object.__setattr__(self, "capsule_orientations", ori)


def cardioid(cos_psi: np.ndarray) -> np.ndarray:
    """First-order cardioid gain 0.5 * (1 + cos psi)."""
    return 0.5 * (1.0 + cos_psi)


@dataclass(frozen=True)
class RirSet:
    """Per-capsule impulse responses of equal length."""

    rirs: np.ndarray  # (4, n)
    sample_rate: int

    def __post_init__(self) -> None:
        r = np.asarray(self.rirs)
        if r.ndim != 2 or r.shape[0] != 4 or not np.all(np.isfinite(r)):
            raise ValueError("RirSet needs 4 equal-length finite responses")


def _image_table(room: RoomSpec, source_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions (n, 3) and reflection counts (n,) of all image sources."""
    order = room.max_image_order
    half = order // 2 + 1
    per_axis = []
    for i in range(3):
        coords, counts = [], []
        for p in (0, 1):
            for m in range(-half, half + 1):
                k = abs(2 * m - p)
                if k <= order:
                    coords.append((1 - 2 * p) * source_pos[i] + 2 * m * room.dimensions[i])
                    counts.append(k)
        per_axis.append((np.array(coords), np.array(counts)))
    cx, kx = per_axis[0]
    cy, ky = per_axis[1]
    cz, kz = per_axis[2]
    gx, gy, gz = np.meshgrid(np.arange(len(cx)), np.arange(len(cy)), np.arange(len(cz)),
                             indexing="ij")
    k_tot = kx[gx] + ky[gy] + kz[gz]
    keep = (k_tot <= order).ravel()
    pos = np.stack([cx[gx].ravel(), cy[gy].ravel(), cz[gz].ravel()], axis=1)[keep]
    return pos, k_tot.ravel()[keep]


def _check_inside(room: RoomSpec, p: np.ndarray, what: str) -> None:
    if np.any(p <= 0) or np.any(p >= np.asarray(room.dimensions)):
        raise ValueError(f"{what} position {tuple(p)} is outside the room "
                         f"{room.dimensions}")


def image_source_rir(room: RoomSpec, source_pos: np.ndarray, capsule_pos: np.ndarray,
                     capsule_orient: np.ndarray) -> np.ndarray:
    """Impulse response from a point source to one cardioid capsule.

    Each image source k contributes a windowed-sinc tap at fractional delay
    d_k / c * fs with amplitude (1/d_k) * (1 - absorption)^refl_k * g(psi_k),
    where psi_k is the angle between the capsule orientation and the arrival
    direction.

    Returns:
        1-D float array; length covers the farthest image plus kernel tails.
    """
    source_pos = np.asarray(source_pos, dtype=float)
    capsule_pos = np.asarray(capsule_pos, dtype=float)
    _check_inside(room, source_pos, "source")
    _check_inside(room, capsule_pos, "capsule")
    orient = np.asarray(capsule_orient, dtype=float)
    orient = orient / np.linalg.norm(orient)

    img_pos, refl = _image_table(room, source_pos)
    vec = img_pos - capsule_pos[None, :]
    dist = np.linalg.norm(vec, axis=1)
    cos_psi = (vec / dist[:, None]) @ orient
    amp = (1.0 - room.wall_absorption) ** refl / dist * cardioid(cos_psi)

    delay = dist / room.speed_of_sound * room.sample_rate
    base = np.floor(delay).astype(int)
    n_out = int(base.max()) + 2 * _SINC_HALF + 2
    taps = np.arange(-_SINC_HALF, _SINC_HALF + 1)
    idx = base[:, None] + taps[None, :] + _SINC_HALF  # shift so negatives cannot occur
    u = idx - _SINC_HALF - delay[:, None]
    kernel = np.sinc(u) * (0.5 + 0.5 * np.cos(np.pi * u / (_SINC_HALF + 1)))
    rir = np.zeros(n_out + _SINC_HALF)
    np.add.at(rir, idx.ravel(), (amp[:, None] * kernel).ravel())
    return rir[_SINC_HALF:]  # undo shift: index 0 is delay 0


def rir_set(room: RoomSpec, array: ArraySpec, source_pos: np.ndarray,
            array_center: np.ndarray | None = None) -> RirSet:
    """RIRs from one source to all four capsules of an array."""
    if array_center is None:
        array_center = np.asarray(room.dimensions) / 2.0
    rirs = [image_source_rir(room, source_pos, array_center + array.capsule_positions[j],
                             array.capsule_orientations[j]) for j in range(4)]
    n = max(len(r) for r in rirs)
    out = np.zeros((4, n))
    for j, r in enumerate(rirs):
        out[j, : len(r)] = r
    return RirSet(out, room.sample_rate)


def a_to_b(capsule_signals: np.ndarray, array: ArraySpec,
           sample_rate: int = 16000) -> FoaWaveform:
    """Convert 4 cardioid capsule signals (A-format) to FOA (B-format).

    Least-squares fit of the capsule patterns to the SN3D basis: solves
    A = P b per sample, where row j of P is [0.5, 0.5*n_y, 0.5*n_z, 0.5*n_x]
    for capsule orientation n_j. Frequency independent.
    """
    a = np.asarray(capsule_signals, dtype=float)
    if a.ndim != 2 or a.shape[0] != 4:
        raise ValueError(f"expected 4 equal-length capsule signals, got {a.shape}")
    n = array.capsule_orientations
    p = 0.5 * np.column_stack([np.ones(4), n[:, 1], n[:, 2], n[:, 0]])
    b = np.linalg.pinv(p) @ a
    return FoaWaveform(b, sample_rate)


def simulate_baseline(mono: np.ndarray, d: Direction, room: RoomSpec,
                      array: ArraySpec, source_distance: float = 1.0) -> FoaWaveform:
    """Room-simulated FOA: array at room center, source at 1 m in direction d.

    Per-capsule signals are mono convolved with the image-source RIRs, then
    converted with a_to_b. Output is cropped to len(mono).
    """
    mono = np.asarray(mono, dtype=float)
    if mono.size == 0:
        raise ValueError("empty signal")
    center = np.asarray(room.dimensions) / 2.0
    source = center + source_distance * dir_to_unit_vector(d)
    rs = rir_set(room, array, source, center)
    a_fmt = np.stack([fftconvolve(mono, rs.rirs[j])[: mono.size] for j in range(4)])
    return a_to_b(a_fmt, array, room.sample_rate)


def plane_wave_a_format(mono: np.ndarray, d: Direction, array: ArraySpec) -> np.ndarray:
    """Analytic far-field A-format, ignoring inter-capsule delays.

    Capsule j receives mono scaled by the cardioid response to direction d.
    Useful as an oracle for a_to_b: converting this recovers foa_gains(d).
    """
    u = dir_to_unit_vector(d)
    g = cardioid(array.capsule_orientations @ u)
    return g[:, None] * np.asarray(mono, dtype=float)[None, :]
