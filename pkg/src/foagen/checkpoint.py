"""Checkpoint serialization: little-endian binary, magic "SAGE", u32 version,
length-prefixed JSON config blob, then a tensor table of raw arrays."""
from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .conditioning import EncoderParams
from .model import ModelConfig
from .stft import StftConfig

MAGIC = b"SAGE"
VERSION = 1


class CheckpointError(RuntimeError):
    """Raised for unreadable, foreign, or truncated checkpoint files."""


@dataclass
class Checkpoint:
    model_config: ModelConfig
    model_params: dict[str, np.ndarray]
    encoder: EncoderParams
    stft_config: StftConfig
    vocab: list[str]
    sigma_data: float
    step: int
    clip_samples: int = 16000


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Write atomically (temp file + rename), so interruptions never corrupt."""
    path = Path(path)
    tensors: list[tuple[str, np.ndarray]] = []
    for name in sorted(ckpt.model_params):
        tensors.append((f"model/{name}", ckpt.model_params[name]))
    for name in sorted(ckpt.encoder.tensors):
        tensors.append((f"encoder/{name}", ckpt.encoder.tensors[name]))

    header = {
        "model_config": asdict(ckpt.model_config),
        "encoder": {
            "num_classes": ckpt.encoder.num_classes,
            "cond_dim": ckpt.encoder.cond_dim,
            "n_freqs": ckpt.encoder.n_freqs,
            "class_dim": ckpt.encoder.class_dim,
        },
        "stft_config": asdict(ckpt.stft_config),
        "vocab": list(ckpt.vocab),
        "sigma_data": float(ckpt.sigma_data),
        "step": int(ckpt.step),
        "clip_samples": int(ckpt.clip_samples),
        "tensors": [
            {"name": n, "dtype": str(a.dtype), "shape": list(a.shape)}
            for n, a in tensors
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, a in tensors:
            f.write(np.ascontiguousarray(a).tobytes())
    os.replace(tmp, path)


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: expected {n} bytes of {what}, "
                              f"got {len(data)}")
    return data


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint, reproducing every tensor bit-exactly.

    Raises:
        CheckpointError: bad magic ("not a checkpoint"), unsupported version,
            or a truncated/corrupt file.
    """
    path = Path(path)
    try:
        f = open(path, "rb")
    except OSError as e:
        raise CheckpointError(f"cannot open checkpoint {path}: {e}") from e
    with f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version} "
                                  f"(expected {VERSION})")
        (blob_len,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
        try:
            header = json.loads(_read_exact(f, blob_len, "header"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise CheckpointError(f"corrupt checkpoint header: {e}") from e

        arrays: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            raw = _read_exact(f, nbytes, f"tensor {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    model_params = {k[len("model/"):]: v for k, v in arrays.items()
                    if k.startswith("model/")}
    enc_tensors = {k[len("encoder/"):]: v for k, v in arrays.items()
                   if k.startswith("encoder/")}
    e = header["encoder"]
    encoder = EncoderParams(e["num_classes"], e["cond_dim"], e["n_freqs"],
                            e["class_dim"], enc_tensors)
    sc = dict(header["stft_config"])
    return Checkpoint(
        model_config=ModelConfig(**header["model_config"]),
        model_params=model_params,
        encoder=encoder,
        stft_config=StftConfig(**sc),
        vocab=list(header["vocab"]),
        sigma_data=float(header["sigma_data"]),
        step=int(header["step"]),
        clip_samples=int(header["clip_samples"]),
    )
