"""Synthetic labeled FOA dataset: mono class generators with per-clip jitter,
analytic or room-simulated spatialization, and a sidecar manifest."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .foa import encode_foa
from .geometry import Direction, fibonacci_grid
from .room import ArraySpec, RoomSpec, simulate_baseline
from .wavio import write_wav


@dataclass(frozen=True)
class SynthClassSpec:
    """One synthetic sound class.

    kind: "sine" (params: freq), "chirp" (f_lo, f_hi), "noise_burst"
    (f_lo, f_hi, n_bursts), or "tone_burst_train" (freq, rate).
    Jitter, when enabled: frequency +-10%, amplitude +-3 dB, onset +-100 ms.
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)
    jitter: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("sine", "chirp", "noise_burst", "tone_burst_train"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        for f in self.params.values():
            if isinstance(f, (int, float)) and f >= 8000:
                raise ValueError("class parameters must stay below the 8 kHz "
                                 "Nyquist band")


# Defaults sit inside the 0..240 Hz band kept by the "desk" STFT preset, and
# are spectrally separable so the nearest-centroid oracle identifies them.
DEFAULT_CLASSES = (
    SynthClassSpec("tone", "sine", {"freq": 64.0}),
    SynthClassSpec("chirp", "chirp", {"f_lo": 80.0, "f_hi": 224.0}),
    SynthClassSpec("bursts", "noise_burst", {"f_lo": 144.0, "f_hi": 232.0,
                                             "n_bursts": 4}),
    SynthClassSpec("pulses", "tone_burst_train", {"freq": 112.0, "rate": 8.0}),
)


def default_classes(n: int) -> list[SynthClassSpec]:
    if not 1 <= n <= len(DEFAULT_CLASSES):
        raise ValueError(f"have {len(DEFAULT_CLASSES)} built-in classes, asked for {n}")
    return list(DEFAULT_CLASSES[:n])


def _band_noise(rng: np.random.Generator, n: int, f_lo: float, f_hi: float,
                sample_rate: int) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    return np.fft.irfft(spec, n=n)


def _burst_envelope(t: np.ndarray, onsets: np.ndarray, width: float) -> np.ndarray:
    env = np.zeros_like(t)
    for onset in onsets:
        inside = (t >= onset) & (t < onset + width)
        env[inside] += 0.5 - 0.5 * np.cos(2.0 * np.pi * (t[inside] - onset) / width)
    return env


def synth_mono(spec: SynthClassSpec, seed: int, sample_rate: int = 16000,
               duration: float = 1.0) -> np.ndarray:
    """Deterministic mono clip for (spec, seed), peak-normalized to 0.5.

    With jitter enabled the normalized clip is then scaled by the +-3 dB
    amplitude jitter, so peaks land in [0.354, 0.707].
    """
    rng = np.random.default_rng(seed)
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    if spec.jitter:
        f_mult = 1.0 + rng.uniform(-0.1, 0.1)
        amp = 10.0 ** (rng.uniform(-3.0, 3.0) / 20.0)
        shift = rng.uniform(-0.1, 0.1)
    else:
        f_mult, amp, shift = 1.0, 1.0, 0.0

    if spec.kind == "sine":
        x = np.sin(2.0 * np.pi * spec.params["freq"] * f_mult * (t + shift))
    elif spec.kind == "chirp":
        f_lo = spec.params["f_lo"] * f_mult
        f_hi = spec.params["f_hi"] * f_mult
        ts = t + shift
        x = np.sin(2.0 * np.pi * (f_lo * ts + (f_hi - f_lo) * ts**2 / (2.0 * duration)))
    elif spec.kind == "noise_burst":
        nb = int(spec.params.get("n_bursts", 4))
        base = (np.arange(nb) + 0.5) / nb * duration - 0.06
        x = _band_noise(rng, n, spec.params["f_lo"] * f_mult,
                        spec.params["f_hi"] * f_mult, sample_rate)
        x *= _burst_envelope(t, base + shift, width=0.12)
    elif spec.kind == "tone_burst_train":
        rate = spec.params["rate"]
        x = np.sin(2.0 * np.pi * spec.params["freq"] * f_mult * (t + shift))
        x *= 0.5 - 0.5 * np.cos(2.0 * np.pi * np.clip(rate * (t + shift) % 1.0, 0, 0.5) * 2.0)
    else:  # unreachable, kinds validated in the spec type
        raise ValueError(spec.kind)

    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (0.5 / peak)
    return x * amp


@dataclass(frozen=True)
class ManifestEntry:
    filename: str
    class_id: int
    direction: Direction


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    train: tuple[ManifestEntry, ...]
    test: tuple[ManifestEntry, ...]
    class_names: tuple[str, ...]
    sample_rate: int
    duration: float
    render: str
    seed: int
    root: Path


def _manifest_lines(entries, header: dict) -> str:
    lines = [f"# {k} {v}" for k, v in header.items()]
    for e in entries:
        lines.append(f"{e.filename} {e.class_id} "
                     f"{np.degrees(e.direction.azimuth):.6f} "
                     f"{np.degrees(e.direction.elevation):.6f}")
    return "\n".join(lines) + "\n"


def write_manifest(path: Path, entries, header: dict) -> None:
    path.write_text(_manifest_lines(entries, header))


def load_manifest(path: str | Path) -> tuple[list[ManifestEntry], dict]:
    """Parse a sidecar manifest: comment header plus
    `<filename> <class_id> <azimuth_deg> <elevation_deg>` lines."""
    header: dict[str, str] = {}
    entries: list[ManifestEntry] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].strip().split(None, 1)
            if len(parts) == 2:
                header[parts[0]] = parts[1]
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"bad manifest line: {raw!r}")
        entries.append(ManifestEntry(parts[0], int(parts[1]),
                                     Direction.from_degrees(float(parts[2]),
                                                            float(parts[3]))))
    return entries, header


def _random_direction(rng: np.random.Generator) -> Direction:
    # area-uniform: elevation from a cos-weighted (uniform-in-sin) draw
    return Direction(rng.uniform(-np.pi, np.pi),
                     np.arcsin(rng.uniform(-1.0, 1.0)))


def build_dataset(classes: list[SynthClassSpec], n_per_class: int, out_dir: str | Path,
                  directions: str = "random", render: str = "analytic", seed: int = 0,
                  sample_rate: int = 16000, duration: float = 1.0,
                  room: RoomSpec | None = None, array: ArraySpec | None = None,
                  ) -> DatasetManifest:
    """Generate n_per_class clips per class as 4-channel WAVs plus manifests.

    directions: "random" (area-uniform, seeded) or "fibonacci:K" (cycle a
    K-point grid). render: "analytic" (plane-wave encode) or "simulated"
    (image-source baseline). The 80/20 train/test split is per class and
    seed-stable; manifest.txt, manifest_train.txt and manifest_test.txt are
    written with identical headers.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if render not in ("analytic", "simulated"):
        raise ValueError(f"unknown render mode {render!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create dataset directory {out}: {e}") from e

    if directions == "random":
        dir_rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
        def direction_for(_: int) -> Direction:
            return _random_direction(dir_rng)
    elif directions.startswith("fibonacci:"):
        grid = fibonacci_grid(int(directions.split(":", 1)[1]))
        def direction_for(i: int) -> Direction:
            return grid.points[i % grid.count]
    else:
        raise ValueError(f"unknown directions mode {directions!r}")

    if render == "simulated":
        room = room or RoomSpec(sample_rate=sample_rate)
        array = array or ArraySpec()

    entries: list[ManifestEntry] = []
    train: list[ManifestEntry] = []
    test: list[ManifestEntry] = []
    item = 0
    for class_id, spec in enumerate(classes):
        class_entries = []
        for j in range(n_per_class):
            clip_seed = np.random.SeedSequence([seed, class_id, j]).generate_state(1)[0]
            mono = synth_mono(spec, int(clip_seed), sample_rate, duration)
            d = direction_for(item)
            item += 1
            if render == "analytic":
                foa = encode_foa(mono, d, sample_rate)
            else:
                foa = simulate_baseline(mono, d, room, array)
            fname = f"{spec.name}_{class_id}_{j:04d}.wav"
            try:
                write_wav(out / fname, foa.channels, sample_rate)
            except OSError as e:
                raise OSError(f"failed writing {out / fname}: {e}") from e
            class_entries.append(ManifestEntry(fname, class_id, d))
        entries.extend(class_entries)
        split_rng = np.random.default_rng(np.random.SeedSequence([seed, 23, class_id]))
        order = split_rng.permutation(n_per_class)
        n_train = int(round(0.8 * n_per_class))
        train.extend(class_entries[i] for i in sorted(order[:n_train]))
        test.extend(class_entries[i] for i in sorted(order[n_train:]))

    header = {
        "sample_rate": sample_rate,
        "duration": duration,
        "render": render,
        "seed": seed,
        "classes": ",".join(s.name for s in classes),
    }
    write_manifest(out / "manifest.txt", entries, header)
    write_manifest(out / "manifest_train.txt", train, header)
    write_manifest(out / "manifest_test.txt", test, header)
    return DatasetManifest(tuple(entries), tuple(train), tuple(test),
                           tuple(s.name for s in classes), sample_rate, duration,
                           render, seed, out)
