import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foagen import Direction, FoaWaveform, encode_foa, foa_gains


def test_gains_cardinal_directions():
    # channel order W, Y, Z, X
    np.testing.assert_allclose(foa_gains(Direction(0, 0)), [1, 0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(foa_gains(Direction(np.pi / 2, 0)), [1, 1, 0, 0],
                               atol=1e-12)
    np.testing.assert_allclose(foa_gains(Direction(0, np.pi / 2)), [1, 0, 1, 0],
                               atol=1e-12)
    np.testing.assert_allclose(foa_gains(Direction(0, -np.pi / 2)), [1, 0, -1, 0],
                               atol=1e-12)


def test_gains_formula_against_trig():
    d = Direction.from_degrees(30.0, -10.0)
    az, el = d.azimuth, d.elevation
    expect = [1.0, np.sin(az) * np.cos(el), np.sin(el), np.cos(az) * np.cos(el)]
    np.testing.assert_allclose(foa_gains(d), expect, atol=1e-15)


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi / 2, np.pi / 2))
@settings(max_examples=300, deadline=None)
def test_gain_norm_invariant(az, el):
    g = foa_gains(Direction(az, el))
    # W^2 + Y^2 + Z^2 + X^2 = 1 + |u|^2 = 2 for SN3D first order
    assert float(g @ g) == pytest.approx(2.0, abs=1e-9)


def test_encode_is_rank_one():
    rng = np.random.default_rng(0)
    mono = rng.standard_normal(512)
    d = Direction(1.0, 0.4)
    a = encode_foa(mono, d)
    g = foa_gains(d)
    for i in range(4):
        np.testing.assert_allclose(a.channels[i], g[i] * mono, atol=1e-12)
    np.testing.assert_array_equal(a.w, mono)  # W carries the mono signal


def test_encode_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError, match="empty"):
        encode_foa(np.array([]), Direction(0, 0))
    with pytest.raises(ValueError):
        encode_foa(np.array([1.0, np.nan]), Direction(0, 0))


def test_waveform_validation():
    with pytest.raises(ValueError):
        FoaWaveform(np.zeros((3, 100)), 16000)
    a = FoaWaveform(np.zeros((4, 100)), 16000)
    assert a.n_samples == 100
