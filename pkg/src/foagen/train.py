"""Flow-matching training: loss with gradients, Adam, and the epoch loop."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .conditioning import (Condition, EncoderParams, drop_condition,
                           encode_condition_batch, encoder_backward)
from .model import ModelConfig, backward, forward


def sigma_data_of(specs: np.ndarray) -> float:
    """Scalar normalizer: std of every plane entry across the training set."""
    s = float(np.std(specs))
    if s == 0.0:
        raise ValueError("training data has zero variance")
    return s


def flow_matching_loss(x: np.ndarray, conds: list[Condition],
                       params: dict[str, np.ndarray], mcfg: ModelConfig,
                       enc: EncoderParams, rng: np.random.Generator,
                       p_drop: float = 0.1, want_grads: bool = True):
    """One training batch of the velocity regression.

    Per item: t ~ U(0,1), eps ~ N(0,I), conditions dropped independently with
    probability p_drop, loss = mean over all elements of
    (v_theta(x_t, t; c) - (x - eps))^2.

    Args:
        x: (B, planes, T, F) normalized spectrogram batch.

    Returns:
        (loss, model gradients, encoder gradients); gradients None if not asked.
    """
    b = x.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    dtype = params["patch_w"].dtype
    t = rng.random(b)
    eps = rng.standard_normal(x.shape).astype(dtype)
    x = x.astype(dtype, copy=False)
    tb = t.astype(dtype)[:, None, None, None]
    x_t = tb * x + (1.0 - tb) * eps
    target = x - eps

    dropped = [drop_condition(c, p_drop, rng) for c in conds]
    c_vecs, enc_cache = encode_condition_batch(dropped, enc)
    v, cache = forward(params, mcfg, x_t, t, c_vecs, want_cache=want_grads)
    diff = v - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    if not want_grads:
        return loss, None, None
    grad_v = (2.0 / diff.size) * diff
    grads, grad_c = backward(grad_v, cache, params, mcfg)
    enc_grads = encoder_backward(grad_c, enc_cache, enc)
    return loss, grads, enc_grads


@dataclass
class Adam:
    """Adam with bias correction, applied in place to a parameter dict."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def update(self, params: dict[str, np.ndarray],
               grads: dict[str, np.ndarray]) -> None:
        self.step += 1
        b1c = 1.0 - self.beta1**self.step
        b2c = 1.0 - self.beta2**self.step
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            g = g.astype(params[k].dtype, copy=False)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            mh = self.m[k] / b1c
            vh = self.v[k] / b2c
            params[k] -= (self.lr * mh / (np.sqrt(vh) + self.eps)).astype(params[k].dtype)


def train_epochs(specs: np.ndarray, conds: list[Condition],
                 params: dict[str, np.ndarray], mcfg: ModelConfig,
                 enc: EncoderParams, *, epochs: int, batch_size: int,
                 lr: float = 1e-4, p_drop: float = 0.1, seed: int = 0,
                 start_step: int = 0,
                 opt_model: Adam | None = None, opt_enc: Adam | None = None,
                 ) -> Iterator[tuple[int, float, int]]:
    """Run training, yielding (epoch, mean loss, global step) after each epoch.

    specs must already be normalized (divided by sigma_data). Parameters are
    updated in place so the caller can checkpoint between epochs.
    """
    n = specs.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    opt_model = opt_model or Adam(lr=lr)
    opt_enc = opt_enc or Adam(lr=lr)
    step = start_step
    for epoch in range(epochs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            batch = specs[idx]
            batch_conds = [conds[i] for i in idx]
            loss, grads, enc_grads = flow_matching_loss(
                batch, batch_conds, params, mcfg, enc, rng, p_drop=p_drop)
            opt_model.update(params, grads)
            opt_enc.update(enc.tensors, enc_grads)
            losses.append(loss)
            step += 1
        yield epoch, float(np.mean(losses)), step
