"""Class + direction conditioning: sinusoidal angle features, class embedding
table with a learned null row, and a fused MLP producing the condition vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Direction


@dataclass(frozen=True)
class Condition:
    """A sampling condition. None for either field means that sub-condition
    is dropped (replaced by its null surrogate)."""

    class_id: int | None
    direction: Direction | None


@dataclass(frozen=True)
class ConditionVector:
    values: np.ndarray  # (cond_dim,)
    is_null: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if not np.all(np.isfinite(v)):
            raise ValueError("condition vector must be finite")
        object.__setattr__(self, "values", v)


@dataclass
class EncoderParams:
    """Learnable conditioning encoder.

    tensors:
        class_table: (num_classes + 1, class_dim), last row is the null class
        w1, b1, w2, b2: 2-layer MLP, hidden = 2 * cond_dim, SiLU
    """

    num_classes: int
    cond_dim: int
    n_freqs: int  # sinusoidal frequencies per angle
    class_dim: int
    tensors: dict[str, np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.class_dim + 4 * self.n_freqs


def _trunc_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02,
                  dtype=np.float32) -> np.ndarray:
    w = rng.normal(0.0, std, size=shape)
    return np.clip(w, -2 * std, 2 * std).astype(dtype)


def init_encoder(num_classes: int, cond_dim: int = 256, n_freqs: int = 16,
                 class_dim: int = 64, seed: int = 0, dtype=np.float32) -> EncoderParams:
    if num_classes < 1:
        raise ValueError("need at least one class")
    rng = np.random.default_rng(seed)
    in_dim = class_dim + 4 * n_freqs
    hidden = 2 * cond_dim
    tensors = {
        "class_table": _trunc_normal(rng, (num_classes + 1, class_dim), dtype=dtype),
        "w1": _trunc_normal(rng, (in_dim, hidden), dtype=dtype),
        "b1": np.zeros(hidden, dtype=dtype),
        "w2": _trunc_normal(rng, (hidden, cond_dim), dtype=dtype),
        "b2": np.zeros(cond_dim, dtype=dtype),
    }
    return EncoderParams(num_classes, cond_dim, n_freqs, class_dim, tensors)


def sinusoidal_angles(d: Direction, n_freqs: int) -> np.ndarray:
    """[sin(2^k az), cos(2^k az)]_{k<K} ++ the same for elevation; length 4K."""
    out = np.empty(4 * n_freqs)
    for offset, ang in ((0, d.azimuth), (2 * n_freqs, d.elevation)):
        scales = 2.0 ** np.arange(n_freqs) * ang
        out[offset : offset + 2 * n_freqs : 2] = np.sin(scales)
        out[offset + 1 : offset + 2 * n_freqs + 1 : 2] = np.cos(scales)
    return out


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _silu_grad(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def _encoder_input(cond: Condition, enc: EncoderParams) -> tuple[np.ndarray, int]:
    row = enc.num_classes if cond.class_id is None else int(cond.class_id)
    if not 0 <= row <= enc.num_classes:
        raise ValueError(f"class_id {cond.class_id} out of range "
                         f"[0, {enc.num_classes})")
    if cond.direction is None:
        ang = np.zeros(4 * enc.n_freqs)
    else:
        ang = sinusoidal_angles(cond.direction, enc.n_freqs)
    t = enc.tensors
    inp = np.concatenate([t["class_table"][row], ang.astype(t["class_table"].dtype)])
    return inp, row


def encode_condition_batch(conds: list[Condition], enc: EncoderParams
                           ) -> tuple[np.ndarray, dict]:
    """Encode a batch of conditions to (B, cond_dim) plus a backward cache."""
    t = enc.tensors
    pairs = [_encoder_input(c, enc) for c in conds]
    inp = np.stack([p[0] for p in pairs])
    rows = np.array([p[1] for p in pairs])
    pre1 = inp @ t["w1"] + t["b1"]
    act1 = _silu(pre1)
    out = act1 @ t["w2"] + t["b2"]
    cache = {"inp": inp, "rows": rows, "pre1": pre1, "act1": act1}
    return out, cache


def encode_condition(cond: Condition, enc: EncoderParams) -> ConditionVector:
    """The fused condition vector c = MLP(concat(class_embed, angle features))."""
    out, _ = encode_condition_batch([cond], enc)
    is_null = cond.class_id is None and cond.direction is None
    return ConditionVector(out[0], is_null=is_null)


def null_condition(enc: EncoderParams) -> ConditionVector:
    """The fully-null condition used for classifier-free guidance."""
    return encode_condition(Condition(None, None), enc)


def encoder_backward(grad_out: np.ndarray, cache: dict, enc: EncoderParams
                     ) -> dict[str, np.ndarray]:
    """Gradients of the encoder tensors for upstream grad_out (B, cond_dim)."""
    if cache is None:
        raise ValueError("encoder backward needs the cache from the forward pass")
    t = enc.tensors
    grads = {}
    grads["w2"] = cache["act1"].T @ grad_out
    grads["b2"] = grad_out.sum(axis=0)
    d_act1 = grad_out @ t["w2"].T
    d_pre1 = d_act1 * _silu_grad(cache["pre1"])
    grads["w1"] = cache["inp"].T @ d_pre1
    grads["b1"] = d_pre1.sum(axis=0)
    d_inp = d_pre1 @ t["w1"].T
    d_table = np.zeros_like(t["class_table"])
    np.add.at(d_table, cache["rows"], d_inp[:, : enc.class_dim])
    grads["class_table"] = d_table
    return grads


def drop_condition(cond: Condition, p: float, rng: np.random.Generator) -> Condition:
    """Independently replace class and direction with null, each w.p. p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("drop probability must be in [0, 1]")
    class_id = None if rng.random() < p else cond.class_id
    direction = None if rng.random() < p else cond.direction
    return Condition(class_id, direction)
