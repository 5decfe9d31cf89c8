"""Flow matching core: linear interpolant, velocity target, classifier-free
guidance mixing, and the probability-flow ODE sampler (noise at t=0, data at
t=1)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conditioning import (Condition, EncoderParams, encode_condition_batch,
                           null_condition)
from .model import ModelConfig, forward
from .stft import FoaSpectrogram, StftConfig


@dataclass(frozen=True)
class InterpolantSchedule:
    """Linear schedule alpha(t) = t, beta(t) = 1 - t."""

    def alpha(self, t):
        return t

    def beta(self, t):
        return 1.0 - t

    alpha_dot: float = 1.0
    beta_dot: float = -1.0


@dataclass(frozen=True)
class FlowState:
    x_t: np.ndarray
    t: float


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 250
    cfg_scale: float = 4.0
    integrator: str = "euler"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.cfg_scale < 0:
            raise ValueError("cfg_scale must be >= 0")
        if self.integrator not in ("euler", "heun"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


def interpolate(x: np.ndarray, eps: np.ndarray, t: float) -> FlowState:
    """x_t = t*x + (1-t)*eps elementwise."""
    x = np.asarray(x)
    eps = np.asarray(eps)
    if x.shape != eps.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {eps.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    return FlowState(t * x + (1.0 - t) * eps, float(t))


def velocity_target(x: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """The regression target x - eps (time independent for the linear schedule)."""
    x = np.asarray(x)
    eps = np.asarray(eps)
    if x.shape != eps.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {eps.shape}")
    return x - eps


def cfg_velocity(v_cond: np.ndarray, v_null: np.ndarray, zeta: float) -> np.ndarray:
    """Guided velocity zeta * v_cond + (1 - zeta) * v_null."""
    v_cond = np.asarray(v_cond)
    v_null = np.asarray(v_null)
    if v_cond.shape != v_null.shape:
        raise ValueError(f"shape mismatch {v_cond.shape} vs {v_null.shape}")
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    return zeta * v_cond + (1.0 - zeta) * v_null


def integrate_ode(velocity_fn: Callable[[np.ndarray, float], np.ndarray],
                  x0: np.ndarray, steps: int, integrator: str = "euler") -> np.ndarray:
    """Integrate dx/dt = v(x, t) from t=0 to t=1 with N uniform steps.

    Euler lands exactly on t=1; Heun averages the endpoint velocities of each
    step (second order).
    """
    x = np.asarray(x0).copy()
    dt = 1.0 / steps
    for i in range(steps):
        t = i * dt
        v1 = velocity_fn(x, t)
        if integrator == "euler":
            x = x + dt * v1
        elif integrator == "heun":
            x_pred = x + dt * v1
            v2 = velocity_fn(x_pred, t + dt)
            x = x + 0.5 * dt * (v1 + v2)
        else:
            raise ValueError(f"unknown integrator {integrator!r}")
    return x


def sample_batch(params: dict[str, np.ndarray], mcfg: ModelConfig,
                 enc: EncoderParams, conds: list[Condition],
                 scfg: SamplerConfig, sigma_data: float = 1.0) -> np.ndarray:
    """Draw one spectrogram tensor per condition, shape (B, planes, T, F).

    Integrates the probability-flow ODE under classifier-free guidance; the
    conditional and null branches run as one doubled batch. Output is scaled
    back to data units by sigma_data.
    """
    b = len(conds)
    if b == 0:
        raise ValueError("need at least one condition")
    rng = np.random.default_rng(scfg.seed)
    shape = (b, mcfg.planes, mcfg.frames, mcfg.bins)
    dtype = params["patch_w"].dtype
    x0 = rng.standard_normal(shape).astype(dtype)

    c_vecs, _ = encode_condition_batch(conds, enc)
    if scfg.cfg_scale == 1.0:
        def velocity_fn(x, t):
            v, _ = forward(params, mcfg, x, np.full(b, t), c_vecs)
            return v
    else:
        c_null = null_condition(enc).values
        c_both = np.concatenate([c_vecs, np.broadcast_to(c_null, c_vecs.shape)])

        def velocity_fn(x, t):
            v, _ = forward(params, mcfg, np.concatenate([x, x]),
                           np.full(2 * b, t), c_both)
            return cfg_velocity(v[:b], v[b:], scfg.cfg_scale)

    x1 = integrate_ode(velocity_fn, x0, scfg.steps, scfg.integrator)
    return np.asarray(x1, dtype=np.float64) * sigma_data


def sample(params: dict[str, np.ndarray], mcfg: ModelConfig, enc: EncoderParams,
           cond: Condition, scfg: SamplerConfig, sigma_data: float,
           stft_cfg: StftConfig) -> FoaSpectrogram:
    """Sample a single conditioned FOA spectrogram."""
    planes = sample_batch(params, mcfg, enc, [cond], scfg, sigma_data)[0]
    return FoaSpectrogram(planes, stft_cfg)
