import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbmi.exceptions import DesignError, DomainError, GapError, NotReadyError, OverwrittenError, ShapeError
from vbmi.signal import (EPOCH_SAMPLES, FilterState, RingBuffer, c_anti, design_filters, extract_epoch,
                         filter_stream, magnitude_db, noise_metrics, welch_psd)

from .oracles import sos_filter_loop

FS = 250.0


def _sine(f, amp=1.0, seconds=10.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * f * t)


def test_design_targets():
    spec = design_filters()
    db = magnitude_db(spec, [0.1, 10.0, 40.0, 50.0])
    assert db[3] <= -30
    assert -3 <= db[1] <= 1 and -3 <= db[2] <= 1
    assert db[0] <= -20
    assert magnitude_db(spec, [1e-6])[0] <= -40
    assert spec.description["bandpass_order"] == 4 and spec.description["notch_q"] == 30
    poles = np.concatenate([np.roots(s[3:]) for s in spec.sos])
    assert np.all(np.abs(poles) < 1)
    with pytest.raises(DesignError):
        design_filters(fs_hz=200.0)


def test_magnitude_matches_direct_transfer_function():
    # evaluate prod_k B_k(z)/A_k(z) on the unit circle by hand
    spec = design_filters()
    f = np.array([0.1, 5.0, 10.0, 40.0, 50.0, 90.0])
    z = np.exp(1j * 2 * np.pi * f / FS)
    h = np.ones_like(z)
    for b0, b1, b2, a0, a1, a2 in spec.sos:
        h *= (b0 + b1 / z + b2 / z ** 2) / (a0 + a1 / z + a2 / z ** 2)
    assert np.allclose(np.abs(h), 10 ** (magnitude_db(spec, f) / 20), rtol=1e-9, atol=1e-12)


def test_impulse_response_matches_loop_oracle():
    spec = design_filters()
    x = np.zeros(600)
    x[0] = 1.0
    state = FilterState(spec, 1)
    y = filter_stream(state, x[:, None])[:, 0]
    assert np.allclose(y, sos_filter_loop(spec.sos, x), rtol=0, atol=1e-12)


def test_50hz_residual():
    spec = design_filters()
    x = _sine(50.0, seconds=8.0)
    y = filter_stream(FilterState(spec, 1), x[:, None])[:, 0]
    assert np.max(np.abs(y[-500:])) <= 0.0316


@pytest.mark.parametrize("size", [1, 7, 250])
def test_chunking_bit_exact(size, rng):
    spec = design_filters()
    x = rng.standard_normal((1000, 3))
    ref = filter_stream(FilterState(spec, 3), x)
    st_ = FilterState(spec, 3)
    out = np.concatenate([filter_stream(st_, x[i:i + size]) for i in range(0, len(x), size)])
    assert np.array_equal(out, ref)


@given(st.lists(st.integers(1, 97), min_size=1, max_size=30))
def test_any_chunking_bit_exact(sizes):
    spec = design_filters()
    x = np.random.default_rng(5).standard_normal((sum(sizes), 2))
    ref = filter_stream(FilterState(spec, 2), x)
    state = FilterState(spec, 2)
    parts, pos = [], 0
    for n in sizes:
        parts.append(filter_stream(state, x[pos:pos + n]))
        pos += n
    assert np.array_equal(np.concatenate(parts), ref)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_linearity(a, b):
    spec = design_filters()
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((500, 1)), rng.standard_normal((500, 1))
    lhs = filter_stream(FilterState(spec, 1), a * x + b * y)
    rhs = a * filter_stream(FilterState(spec, 1), x) + b * filter_stream(FilterState(spec, 1), y)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale + 1e-300


def test_filter_shape_error():
    with pytest.raises(ShapeError):
        filter_stream(FilterState(design_filters(), 7), np.zeros((10, 6)))


def test_ring_buffer_readback_and_overwrite(rng):
    buf = RingBuffer(2, capacity=100)
    data = rng.standard_normal((2, 250))
    for i in range(0, 250, 30):
        buf.write(data[:, i:i + 30])
    assert buf.write_index == 250 and buf.oldest_index == 150
    assert np.array_equal(buf.read(150, 250), data[:, 150:250])
    assert np.array_equal(buf.read(200, 201), data[:, 200:201])
    with pytest.raises(OverwrittenError):
        buf.read(149, 160)
    with pytest.raises(NotReadyError):
        buf.read(200, 251)
    assert buf.n_overwritten_unread == 150
    buf2 = RingBuffer(1, capacity=10)
    buf2.write(np.arange(25.0)[None])  # block larger than capacity keeps the newest samples
    assert np.array_equal(buf2.read(15, 25)[0], np.arange(15.0, 25.0))


@given(st.lists(st.integers(1, 40), min_size=1, max_size=20), st.data())
def test_ring_buffer_any_window_property(sizes, data):
    cap = 64
    buf = RingBuffer(1, capacity=cap)
    total = sum(sizes)
    x = np.arange(total, dtype=float)[None]
    pos = 0
    for n in sizes:
        buf.write(x[:, pos:pos + n])
        pos += n
    a = data.draw(st.integers(max(0, total - cap), total))
    b = data.draw(st.integers(a, total))
    assert np.array_equal(buf.read(a, b), x[:, a:b])


def test_epoch_extraction():
    buf = RingBuffer(7, 7500)
    buf.write(np.full((7, 300), 3.0))
    ep = extract_epoch(buf, 10, target_label=2, trial_ordinal=1)
    assert ep.data.shape == (7, EPOCH_SAMPLES) == (7, 280)
    assert np.all(ep.data == 0) and ep.mean_removed and ep.target_label == 2
    with pytest.raises(NotReadyError):
        extract_epoch(buf, 100)
    buf.mark_gap(20)
    buf.write(np.ones((7, 400)))
    with pytest.raises(GapError):
        extract_epoch(buf, 200)
    assert extract_epoch(buf, 320).data.shape == (7, 280)


def test_welch_sine_power_and_parseval():
    a = 3.0
    psd = welch_psd(_sine(10.0, a, seconds=20.0), FS)
    assert psd.band_power(8, 12) == pytest.approx(a ** 2 / 2, rel=0.05)
    assert psd.df == 1.0 and psd.nperseg == 250 and psd.noverlap == 125
    x = np.random.default_rng(3).standard_normal(250 * 60)
    assert np.sum(welch_psd(x, FS).power) * 1.0 == pytest.approx(np.var(x), rel=0.05)


def test_welch_white_noise_flat_and_zero():
    x = np.random.default_rng(4).standard_normal(250 * 51)  # ~100 half-overlapped segments
    psd = welch_psd(x, FS)
    band = psd.power[(psd.freqs_hz >= 1) & (psd.freqs_hz <= 100)]
    assert 10 * np.log10(band.max() / band.min()) <= 3.0
    assert np.all(welch_psd(np.zeros(500), FS).power == 0)
    assert np.all(psd.power >= 0)
    with pytest.raises(ValueError):
        welch_psd(np.zeros(100), FS)


def test_c_anti_examples(rng):
    mains = _sine(50.0, 10e-6) + 1e-6 * rng.standard_normal(2500)
    assert c_anti(mains, mains, FS) == pytest.approx(1.0)
    other = 1e-6 * rng.standard_normal(2500)
    assert c_anti(_sine(50.0, 10e-6) + other, other, FS) <= 1e-3
    spec = design_filters()
    filtered = filter_stream(FilterState(spec, 1), mains[:, None])[:, 0]
    assert c_anti(mains, filtered, FS) <= 1e-3
    with pytest.raises(DomainError):
        c_anti(np.zeros(500), np.zeros(500), FS)
    with pytest.raises(ValueError):
        c_anti(mains[:400], mains[:400], FS)


def test_noise_metrics():
    assert noise_metrics(np.full(100, 2.0)) == {"v_pp": 0.0, "v_rms": 0.0}
    m = noise_metrics(_sine(10.0, 2.0, seconds=1.0))
    assert m["v_pp"] == pytest.approx(4.0, rel=0.01) and m["v_rms"] == pytest.approx(2 / np.sqrt(2), rel=0.01)
    with pytest.raises(ValueError):
        noise_metrics(np.array([]))
