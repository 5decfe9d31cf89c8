"""The velocity network: patchified spectrogram tokens through transformer
blocks with adaptive layer-norm modulation from (time, condition), unpatchified
back to a velocity tensor. Forward caches everything backward needs; backward
is written out by hand so the whole model runs on numpy alone."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_LN_EPS = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    """Shape and size of the velocity model.

    planes/frames/bins describe the input tensor; patch_t/patch_f the token
    grid. embed_dim must divide evenly by heads.
    """

    planes: int = 8
    frames: int = 16
    bins: int = 16
    patch_t: int = 2
    patch_f: int = 2
    embed_dim: int = 192
    depth: int = 6
    heads: int = 6
    cond_dim: int = 256
    time_dim: int = 64
    mlp_ratio: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")
        if self.frames % self.patch_t or self.bins % self.patch_f:
            raise ValueError(f"({self.frames}, {self.bins}) not divisible by "
                             f"patch ({self.patch_t}, {self.patch_f})")
        if min(self.planes, self.depth, self.heads, self.time_dim) < 1:
            raise ValueError("config sizes must be positive")

    @property
    def tokens_t(self) -> int:
        return self.frames // self.patch_t

    @property
    def tokens_f(self) -> int:
        return self.bins // self.patch_f

    @property
    def n_tokens(self) -> int:
        return self.tokens_t * self.tokens_f

    @property
    def patch_dim(self) -> int:
        return self.planes * self.patch_t * self.patch_f

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


def patchify(x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """(planes, T, F) or (B, planes, T, F) -> (B, n_tokens, patch_dim).

    Token (i, j) holds the patch at rows [i*pt, (i+1)*pt), cols [j*pf, (j+1)*pf),
    flattened channel-major.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    b = x.shape[0]
    expect = (b, cfg.planes, cfg.frames, cfg.bins)
    if x.shape != expect:
        raise ValueError(f"input shape {x.shape}, expected {expect}")
    x = x.reshape(b, cfg.planes, cfg.tokens_t, cfg.patch_t, cfg.tokens_f, cfg.patch_f)
    x = x.transpose(0, 2, 4, 1, 3, 5)  # (b, nt, nf, planes, pt, pf)
    tok = x.reshape(b, cfg.n_tokens, cfg.patch_dim)
    return tok[0] if single else tok


def unpatchify(tok: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Exact inverse of patchify."""
    single = tok.ndim == 2
    if single:
        tok = tok[None]
    b = tok.shape[0]
    if tok.shape[1:] != (cfg.n_tokens, cfg.patch_dim):
        raise ValueError(f"token shape {tok.shape[1:]}, expected "
                         f"({cfg.n_tokens}, {cfg.patch_dim})")
    x = tok.reshape(b, cfg.tokens_t, cfg.tokens_f, cfg.planes, cfg.patch_t, cfg.patch_f)
    x = x.transpose(0, 3, 1, 4, 2, 5).reshape(b, cfg.planes, cfg.frames, cfg.bins)
    return x[0] if single else x


def _sincos_1d(positions: np.ndarray, dim: int) -> np.ndarray:
    half = dim // 2
    omega = 1.0 / 10000.0 ** (np.arange(half) / half)
    args = positions[:, None] * omega[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def positional_embedding(cfg: ModelConfig) -> np.ndarray:
    """Fixed 2-D sincos embedding over the token grid, shape (n_tokens, D)."""
    half = cfg.embed_dim // 2
    emb_t = _sincos_1d(np.arange(cfg.tokens_t, dtype=float), half)
    emb_f = _sincos_1d(np.arange(cfg.tokens_f, dtype=float), half)
    grid_t = np.repeat(emb_t, cfg.tokens_f, axis=0)
    grid_f = np.tile(emb_f, (cfg.tokens_t, 1))
    return np.concatenate([grid_t, grid_f], axis=1)


def time_features(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of t in [0, 1], shape (B, dim)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=float)[:, None] * freqs[None, :] * 1000.0
    return np.concatenate([np.cos(args), np.sin(args)], axis=1)


def _trunc_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02,
                  dtype=np.float32) -> np.ndarray:
    return np.clip(rng.normal(0.0, std, size=shape), -2 * std, 2 * std).astype(dtype)


def init_params(cfg: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """Fresh parameter dict. Modulation, final projection and the plane-mixing
    head start at zero, so the initial velocity field is identically zero."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.embed_dim
    hidden = cfg.mlp_ratio * d
    p: dict[str, np.ndarray] = {
        "patch_w": _trunc_normal(rng, (cfg.patch_dim, d), dtype=dtype),
        "patch_b": np.zeros(d, dtype=dtype),
        "time_w1": _trunc_normal(rng, (cfg.time_dim, d), dtype=dtype),
        "time_b1": np.zeros(d, dtype=dtype),
        "time_w2": _trunc_normal(rng, (d, d), dtype=dtype),
        "time_b2": np.zeros(d, dtype=dtype),
        "cond_w": _trunc_normal(rng, (cfg.cond_dim, d), dtype=dtype),
        "cond_b": np.zeros(d, dtype=dtype),
        "final_mod_w": np.zeros((d, 2 * d), dtype=dtype),
        "final_mod_b": np.zeros(2 * d, dtype=dtype),
        "final_w": np.zeros((d, cfg.patch_dim), dtype=dtype),
        "final_b": np.zeros(cfg.patch_dim, dtype=dtype),
        "mix_w": np.zeros((cfg.cond_dim, cfg.planes * cfg.planes), dtype=dtype),
    }
    for i in range(cfg.depth):
        p[f"blk{i}_mod_w"] = np.zeros((d, 6 * d), dtype=dtype)
        p[f"blk{i}_mod_b"] = np.zeros(6 * d, dtype=dtype)
        p[f"blk{i}_qkv_w"] = _trunc_normal(rng, (d, 3 * d), dtype=dtype)
        p[f"blk{i}_qkv_b"] = np.zeros(3 * d, dtype=dtype)
        p[f"blk{i}_proj_w"] = _trunc_normal(rng, (d, d), dtype=dtype)
        p[f"blk{i}_proj_b"] = np.zeros(d, dtype=dtype)
        p[f"blk{i}_fc1_w"] = _trunc_normal(rng, (d, hidden), dtype=dtype)
        p[f"blk{i}_fc1_b"] = np.zeros(hidden, dtype=dtype)
        p[f"blk{i}_fc2_w"] = _trunc_normal(rng, (hidden, d), dtype=dtype)
        p[f"blk{i}_fc2_b"] = np.zeros(d, dtype=dtype)
    return p


def param_count(params: dict[str, np.ndarray]) -> int:
    return sum(v.size for v in params.values())


def flatten_params(params: dict[str, np.ndarray]) -> np.ndarray:
    """Concatenate all tensors (sorted by name) into one flat vector."""
    return np.concatenate([params[k].ravel() for k in sorted(params)])


def param_slices(params: dict[str, np.ndarray]) -> dict[str, tuple[int, int]]:
    """Flat-vector index range of each tensor, matching flatten_params order."""
    out, start = {}, 0
    for k in sorted(params):
        out[k] = (start, start + params[k].size)
        start += params[k].size
    return out


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _silu_grad(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def _layer_norm(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + _LN_EPS)
    return (x - mu) * rstd, rstd


def _layer_norm_backward(g: np.ndarray, y: np.ndarray, rstd: np.ndarray) -> np.ndarray:
    # y is the normalized output; non-affine LN
    return rstd * (g - g.mean(axis=-1, keepdims=True)
                   - y * (g * y).mean(axis=-1, keepdims=True))


def _split_heads(x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    b, n, _ = x.shape
    return x.reshape(b, n, cfg.heads, cfg.head_dim).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def forward(params: dict[str, np.ndarray], cfg: ModelConfig, x: np.ndarray,
            t: np.ndarray | float, c: np.ndarray, want_cache: bool = False):
    """Velocity prediction.

    Args:
        x: (B, planes, T, F) or a single (planes, T, F) tensor.
        t: scalar or (B,) times in [0, 1].
        c: (B, cond_dim) or (cond_dim,) condition vectors.
        want_cache: keep every intermediate needed by `backward`.

    Returns:
        velocity with the same shape as x, and the cache (None unless asked).
    """
    single = x.ndim == 3
    xb = x[None] if single else x
    b = xb.shape[0]
    t_arr = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=float)), (b,))
    cb = np.asarray(c)
    if cb.ndim == 1:
        cb = np.broadcast_to(cb, (b, cb.size))
    if cb.shape != (b, cfg.cond_dim):
        raise ValueError(f"condition shape {cb.shape}, expected ({b}, {cfg.cond_dim})")
    dt = params["patch_w"].dtype
    xb = xb.astype(dt, copy=False)
    cb = cb.astype(dt, copy=False)

    tok = patchify(xb, cfg)
    pos = positional_embedding(cfg).astype(dt)
    h = tok @ params["patch_w"] + params["patch_b"] + pos[None]

    tf = time_features(t_arr, cfg.time_dim).astype(dt)
    t_pre = tf @ params["time_w1"] + params["time_b1"]
    t_act = _silu(t_pre)
    temb = t_act @ params["time_w2"] + params["time_b2"]
    s = temb + cb @ params["cond_w"] + params["cond_b"]
    ss = _silu(s)

    cache: dict = {"tok": tok, "tf": tf, "t_pre": t_pre, "t_act": t_act,
                   "s": s, "ss": ss, "c": cb, "blocks": []} if want_cache else None
    # python-float scale: a numpy scalar would promote the f32 stream to f64
    scale = cfg.head_dim ** -0.5

    for i in range(cfg.depth):
        pre = f"blk{i}_"
        mod = ss @ params[pre + "mod_w"] + params[pre + "mod_b"]
        sh_a, sc_a, g_a, sh_m, sc_m, g_m = np.split(mod, 6, axis=1)

        h_in = h
        y1, rstd1 = _layer_norm(h)
        u = y1 * (1.0 + sc_a[:, None, :]) + sh_a[:, None, :]
        qkv = u @ params[pre + "qkv_w"] + params[pre + "qkv_b"]
        q, k, v = (_split_heads(a, cfg) for a in np.split(qkv, 3, axis=2))
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(axis=-1, keepdims=True)
        o = _merge_heads(att @ v)
        oproj = o @ params[pre + "proj_w"] + params[pre + "proj_b"]
        h = h + g_a[:, None, :] * oproj

        h_mid = h
        y2, rstd2 = _layer_norm(h)
        u2 = y2 * (1.0 + sc_m[:, None, :]) + sh_m[:, None, :]
        f1 = u2 @ params[pre + "fc1_w"] + params[pre + "fc1_b"]
        s1 = 1.0 / (1.0 + np.exp(-f1))
        a1 = f1 * s1
        f2 = a1 @ params[pre + "fc2_w"] + params[pre + "fc2_b"]
        h = h + g_m[:, None, :] * f2

        if want_cache:
            cache["blocks"].append({
                "mod": mod, "h_in": h_in, "y1": y1, "rstd1": rstd1, "u": u,
                "q": q, "k": k, "v": v, "att": att, "o": o, "oproj": oproj,
                "h_mid": h_mid, "y2": y2, "rstd2": rstd2, "u2": u2,
                "f1": f1, "s1": s1, "a1": a1, "f2": f2,
            })

    fmod = ss @ params["final_mod_w"] + params["final_mod_b"]
    sh_f, sc_f = np.split(fmod, 2, axis=1)
    yf, rstdf = _layer_norm(h)
    uf = yf * (1.0 + sc_f[:, None, :]) + sh_f[:, None, :]
    out_tok = uf @ params["final_w"] + params["final_b"]
    vel = unpatchify(out_tok, cfg)

    # conditioned plane mixing: first-order channels are source content scaled
    # by direction-dependent gains, so give c a linear one-hop path that
    # recombines output planes instead of routing gains through adaLN alone
    mix = (cb @ params["mix_w"]).reshape(b, cfg.planes, cfg.planes)
    out = vel + np.einsum("bpq,bqtf->bptf", mix, vel)

    if want_cache:
        cache.update({"h_last": h, "yf": yf, "rstdf": rstdf, "uf": uf,
                      "vel_raw": vel, "mix": mix})
    return (out[0] if single else out), cache


def backward(grad_out: np.ndarray, cache: dict | None, params: dict[str, np.ndarray],
             cfg: ModelConfig) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backpropagate grad_out (same shape as the forward output).

    Returns:
        (parameter gradients keyed like params, gradient w.r.t. the condition
        vectors with shape (B, cond_dim)).
    """
    if cache is None:
        raise ValueError("backward needs the cache from forward(want_cache=True)")
    single = grad_out.ndim == 3
    go = grad_out[None] if single else grad_out
    go = go.astype(params["patch_w"].dtype, copy=False)
    b = go.shape[0]
    grads: dict[str, np.ndarray] = {}

    # plane-mixing head: out = vel + mix(c) @ vel over the plane axis
    gmix = np.einsum("bptf,bqtf->bpq", go, cache["vel_raw"])
    grads["mix_w"] = cache["c"].T @ gmix.reshape(b, -1)
    grad_c_mix = gmix.reshape(b, -1) @ params["mix_w"].T
    gvel = go + np.einsum("bqp,bqtf->bptf", cache["mix"], go)

    gy = patchify(gvel, cfg)
    n = gy.shape[1]
    d = cfg.embed_dim
    scale = cfg.head_dim ** -0.5

    def mm_grad(name_w: str, name_b: str, inp: np.ndarray, g: np.ndarray) -> np.ndarray:
        grads[name_w] = inp.reshape(-1, inp.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        grads[name_b] = g.reshape(-1, g.shape[-1]).sum(axis=0)
        return g @ params[name_w].T

    # final projection and modulation
    guf = mm_grad("final_w", "final_b", cache["uf"], gy)
    sc_f = np.split(cache["ss"] @ params["final_mod_w"] + params["final_mod_b"], 2, axis=1)[1]
    g_sh_f = guf.sum(axis=1)
    g_sc_f = (guf * cache["yf"]).sum(axis=1)
    gyf = guf * (1.0 + sc_f[:, None, :])
    gh = _layer_norm_backward(gyf, cache["yf"], cache["rstdf"])
    gfmod = np.concatenate([g_sh_f, g_sc_f], axis=1)
    gss = mm_grad("final_mod_w", "final_mod_b", cache["ss"], gfmod)

    for i in reversed(range(cfg.depth)):
        pre = f"blk{i}_"
        blk = cache["blocks"][i]
        sh_a, sc_a, g_a, sh_m, sc_m, g_m = np.split(blk["mod"], 6, axis=1)

        # MLP branch: h = h_mid + g_m * f2
        gf2 = gh * g_m[:, None, :]
        gg_m = (gh * blk["f2"]).sum(axis=1)
        ga1 = mm_grad(pre + "fc2_w", pre + "fc2_b", blk["a1"], gf2)
        s1 = blk["s1"]
        gf1 = ga1 * (s1 * (1.0 + blk["f1"] * (1.0 - s1)))
        gu2 = mm_grad(pre + "fc1_w", pre + "fc1_b", blk["u2"], gf1)
        g_sh_m = gu2.sum(axis=1)
        g_sc_m = (gu2 * blk["y2"]).sum(axis=1)
        gy2 = gu2 * (1.0 + sc_m[:, None, :])
        gh = gh + _layer_norm_backward(gy2, blk["y2"], blk["rstd2"])

        # attention branch: h_mid = h_in + g_a * oproj
        go_proj = gh * g_a[:, None, :]
        gg_a = (gh * blk["oproj"]).sum(axis=1)
        go = mm_grad(pre + "proj_w", pre + "proj_b", blk["o"], go_proj)
        go_h = _split_heads(go, cfg)
        gatt = go_h @ blk["v"].transpose(0, 1, 3, 2)
        gv = blk["att"].transpose(0, 1, 3, 2) @ go_h
        gsc = blk["att"] * (gatt - (gatt * blk["att"]).sum(axis=-1, keepdims=True))
        gq = (gsc @ blk["k"]) * scale
        gk = (gsc.transpose(0, 1, 3, 2) @ blk["q"]) * scale
        gqkv = np.concatenate([_merge_heads(gq), _merge_heads(gk), _merge_heads(gv)],
                              axis=2)
        gu = mm_grad(pre + "qkv_w", pre + "qkv_b", blk["u"], gqkv)
        g_sh_a = gu.sum(axis=1)
        g_sc_a = (gu * blk["y1"]).sum(axis=1)
        gy1 = gu * (1.0 + sc_a[:, None, :])
        gh = gh + _layer_norm_backward(gy1, blk["y1"], blk["rstd1"])

        gmod = np.concatenate([g_sh_a, g_sc_a, gg_a, g_sh_m, g_sc_m, gg_m], axis=1)
        gss = gss + mm_grad(pre + "mod_w", pre + "mod_b", cache["ss"], gmod)

    mm_grad("patch_w", "patch_b", cache["tok"], gh)

    gs = gss * _silu_grad(cache["s"])
    grads["cond_w"] = cache["c"].T @ gs
    grads["cond_b"] = gs.sum(axis=0)
    grad_c = gs @ params["cond_w"].T + grad_c_mix
    gt_act = mm_grad("time_w2", "time_b2", cache["t_act"], gs)
    gt_pre = gt_act * _silu_grad(cache["t_pre"])
    mm_grad("time_w1", "time_b1", cache["tf"], gt_pre)
    return grads, grad_c
