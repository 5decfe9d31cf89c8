import numpy as np
import pytest

from foagen import Direction
from foagen.conditioning import (Condition, drop_condition, encode_condition,
                                 encode_condition_batch, encoder_backward,
                                 init_encoder, null_condition,
                                 sinusoidal_angles)


def test_sinusoidal_angles_layout():
    d = Direction(0.5, -0.25)
    out = sinusoidal_angles(d, 2)
    expect = np.array([np.sin(0.5), np.cos(0.5), np.sin(1.0), np.cos(1.0),
                       np.sin(-0.25), np.cos(-0.25), np.sin(-0.5), np.cos(-0.5)])
    np.testing.assert_allclose(out, expect, atol=1e-15)
    assert sinusoidal_angles(d, 16).shape == (64,)


def test_encoder_init_shapes():
    enc = init_encoder(3, cond_dim=256, n_freqs=16, class_dim=64)
    assert enc.tensors["class_table"].shape == (4, 64)  # +1 null row
    assert enc.tensors["w1"].shape == (64 + 64, 512)
    assert enc.tensors["w2"].shape == (512, 256)
    with pytest.raises(ValueError):
        init_encoder(0)


def test_encode_condition_shapes_and_determinism():
    enc = init_encoder(3)
    c = Condition(1, Direction(0.3, 0.2))
    v1 = encode_condition(c, enc)
    v2 = encode_condition(c, enc)
    assert v1.values.shape == (256,)
    np.testing.assert_array_equal(v1.values, v2.values)
    assert not v1.is_null


def test_null_condition_uses_null_row_and_zero_angles():
    enc = init_encoder(2)
    nv = null_condition(enc)
    assert nv.is_null
    both_dropped = encode_condition(Condition(None, None), enc)
    np.testing.assert_array_equal(nv.values, both_dropped.values)
    # class-only null differs from full null (angles contribute)
    half = encode_condition(Condition(None, Direction(0.4, 0.1)), enc)
    assert not np.array_equal(half.values, nv.values)


def test_class_id_out_of_range():
    enc = init_encoder(3)
    with pytest.raises(ValueError):
        encode_condition(Condition(5, None), enc)
    with pytest.raises(ValueError):
        encode_condition(Condition(-1, None), enc)


def test_batch_matches_single():
    enc = init_encoder(4)
    conds = [Condition(0, Direction(0.1, 0.0)), Condition(None, None),
             Condition(3, None), Condition(None, Direction(-1.0, 0.5))]
    batch, _ = encode_condition_batch(conds, enc)
    for i, c in enumerate(conds):
        np.testing.assert_allclose(batch[i], encode_condition(c, enc).values,
                                   atol=1e-6)


def test_drop_condition_statistics():
    rng = np.random.default_rng(0)
    c = Condition(1, Direction(0.2, 0.2))
    n = 4000
    dropped_class = dropped_dir = 0
    for _ in range(n):
        out = drop_condition(c, 0.25, rng)
        dropped_class += out.class_id is None
        dropped_dir += out.direction is None
    assert abs(dropped_class / n - 0.25) < 0.03
    assert abs(dropped_dir / n - 0.25) < 0.03
    # p=0 never drops; p=1 always drops
    keep = drop_condition(c, 0.0, rng)
    assert keep.class_id == 1 and keep.direction is not None
    gone = drop_condition(c, 1.0, rng)
    assert gone.class_id is None and gone.direction is None


def test_encoder_backward_finite_difference():
    enc = init_encoder(3, cond_dim=32, n_freqs=4, class_dim=8)
    enc.tensors.update({k: v.astype(np.float64) for k, v in enc.tensors.items()})
    conds = [Condition(0, Direction(0.3, -0.2)), Condition(None, None),
             Condition(2, Direction(1.0, 0.4))]
    rng = np.random.default_rng(1)
    g_out = rng.standard_normal((3, 32))

    def loss():
        out, _ = encode_condition_batch(conds, enc)
        return float(np.sum(out * g_out))

    _, cache = encode_condition_batch(conds, enc)
    grads = encoder_backward(g_out, cache, enc)
    h = 1e-6
    for name in ("class_table", "w1", "b1", "w2", "b2"):
        t = enc.tensors[name]
        for _ in range(4):
            idx = tuple(rng.integers(0, s) for s in t.shape)
            old = t[idx]
            t[idx] = old + h
            lp = loss()
            t[idx] = old - h
            lm = loss()
            t[idx] = old
            fd = (lp - lm) / (2 * h)
            an = grads[name][idx]
            assert abs(fd - an) <= 1e-6 * max(1.0, abs(fd)), name
