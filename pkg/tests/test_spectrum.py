import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlmac.errors import EmptyOutputError, InsufficientDataError, TraceFormatError
from dlmac.spectrum import (Interferer, ProcessedTrace, RawTrace, SynthScenario, channel_subbands,
                            interpolate_at, interpolate_time, load_processed_trace,
                            load_raw_trace, map_to_channels, preprocess, save_processed_trace,
                            save_raw_trace, synthesize_trace)


def two_sample(v0=-80.0, v1=-69.0, nb=21):
    return RawTrace(np.array([[v0] * nb, [v1] * nb]))


def test_midpoint_and_endpoint():
    raw = two_sample()
    assert interpolate_at(raw, 50.0)[0, 0] == pytest.approx(-74.5)
    assert interpolate_at(raw, 0.0)[0, 0] == -80.0


def test_hand_evaluated_point():
    # slope (−69 − −80) / 100 µs = 0.11 dB/µs
    raw = two_sample()
    assert interpolate_at(raw, 27.0)[0, 0] == pytest.approx(-80 + 0.11 * 27, abs=1e-12)


def test_upsampled_rows_match_grid_interpolant():
    rng = np.random.default_rng(3)
    raw = RawTrace(rng.uniform(-95, -40, size=(6, 25)))
    up = interpolate_time(raw)
    assert up.n_samples == 66
    # original samples are reproduced exactly
    np.testing.assert_array_equal(up.samples[::11], raw.samples)
    # interior rows follow the linear rule on the 100/11 µs grid
    for j in range(55):
        l, k = divmod(j, 11)
        want = raw.samples[l] + (raw.samples[l + 1] - raw.samples[l]) * k / 11
        np.testing.assert_allclose(up.samples[j], want, rtol=0, atol=1e-12)
    # the tail interval holds the last raw value
    np.testing.assert_array_equal(up.samples[55:], np.repeat(raw.samples[-1:], 11, axis=0))


def test_single_sample_is_rejected():
    with pytest.raises(InsufficientDataError):
        interpolate_time(RawTrace(np.zeros((1, 79))))


def test_channel_six_span_and_constant_mean():
    assert channel_subbands(6) == (25, 45)
    x = np.full((4, 79), -95.0)
    x[:, 25:46] = -70.0
    out = map_to_channels(RawTrace(x), channels=(6,))
    np.testing.assert_array_equal(out.column(6), -70.0)


def test_full_capture_gives_thirteen_columns():
    out = map_to_channels(RawTrace(np.full((3, 79), -90.0)))
    assert out.samples.shape == (3, 13)
    assert out.channels == tuple(range(1, 14))
    # channel 13 needs sub-band 80, two past the 79-band capture
    assert out.partial_channels == (13,)
    strict = map_to_channels(RawTrace(np.full((3, 79), -90.0)), min_coverage=21)
    assert strict.channels == tuple(range(1, 13)) and strict.omitted_channels == (13,)


def test_mean_is_taken_over_exact_span():
    rng = np.random.default_rng(0)
    x = rng.uniform(-90, -50, size=(5, 79))
    out = map_to_channels(RawTrace(x), channels=(1, 6, 11))
    for ch in (1, 6, 11):
        lo, hi = channel_subbands(ch)
        np.testing.assert_allclose(out.column(ch), x[:, lo:hi + 1].sum(axis=1) / 21, atol=1e-12)


def test_no_covered_channel_is_empty_output():
    with pytest.raises(EmptyOutputError):
        map_to_channels(RawTrace(np.zeros((2, 21))), channels=(13,), min_coverage=21)


def test_preprocess_equals_composition():
    rng = np.random.default_rng(1)
    raw = RawTrace(rng.uniform(-95, -40, size=(37, 79)))
    a = preprocess(raw, chunk=10)
    b = map_to_channels(interpolate_time(raw))
    np.testing.assert_allclose(a.samples, b.samples, rtol=0, atol=1e-12)
    assert len(a) == 11 * 37


def test_periodic_burst_blocks_match_independent_schedule():
    itf = Interferer("periodic-burst", (25, 45), active_power_dbm=-60.0, period=2400, duty=0.5)
    raw = synthesize_trace(SynthScenario(9600, (itf,), noise_floor_dbm=-95.0))
    on = (np.arange(9600) // 1200) % 2 == 0
    col = raw.samples[:, 30]
    expect = 10 * np.log10(10 ** -6.0 + 10 ** -9.5 + 10 ** -12.0)
    np.testing.assert_allclose(col[on], expect, atol=1e-9)
    np.testing.assert_allclose(col[~on], 10 * np.log10(10 ** -9.5 + 10 ** -12.0), atol=1e-9)
    assert abs(col[on].mean() + 60) < 0.05 and abs(col[~on].mean() + 95) < 0.05
    # untouched sub-bands stay at the floor
    np.testing.assert_allclose(raw.samples[:, 10], -95.0, atol=1e-12)


def test_empty_scenario_is_noise_floor():
    raw = synthesize_trace(SynthScenario(50, (), noise_floor_dbm=-95.0))
    assert np.all(raw.samples == -95.0)


def test_same_seed_same_trace():
    itfs = (Interferer("csma-like", (0, 40), period=50, duty=0.3),
            Interferer("frequency-hopping", (0, 78), period=1, duty=0.8, dwell=3, hop_width=2))
    a = synthesize_trace(SynthScenario(500, itfs, noise_std_db=1.0, seed=7))
    b = synthesize_trace(SynthScenario(500, itfs, noise_std_db=1.0, seed=7))
    c = synthesize_trace(SynthScenario(500, itfs, noise_std_db=1.0, seed=8))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_trace_files_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    raw = RawTrace(rng.uniform(-95, -40, size=(4, 79)))
    save_raw_trace(raw, tmp_path / "raw.csv")
    back = load_raw_trace(tmp_path / "raw.csv")
    np.testing.assert_array_equal(back.samples, raw.samples)
    pt = ProcessedTrace(rng.uniform(-95, -40, size=(6, 3)), (1, 6, 11))
    save_processed_trace(pt, tmp_path / "p.csv")
    back = load_processed_trace(tmp_path / "p.csv")
    assert back.channels == (1, 6, 11)
    np.testing.assert_array_equal(back.samples, pt.samples)
    assert open(tmp_path / "raw.csv").readline().startswith("# ts_us=100 nbands=79")
    assert open(tmp_path / "p.csv").readline().startswith("# slot_us=9 channels=3")


@pytest.mark.parametrize("body, line", [
    ("# ts_us=100 nbands=21\n" + ",".join(["-90"] * 20) + "\n", 2),
    ("# ts_us=100 nbands=21\n" + ",".join(["-90"] * 20 + ["x"]) + "\n", 2),
    ("# ts_us=100 nbands=21\n" + ",".join(["-90"] * 21) + "\n" + ",".join(["nan"] * 21), 3),
    ("ts_us=100 nbands=21\n", 1),
    ("# ts_us=100\n", 1),
])
def test_malformed_trace_reports_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(TraceFormatError) as ei:
        load_raw_trace(p)
    assert ei.value.line == line


finite = st.floats(-120, 0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-5, 5), b=finite, n=st.integers(2, 12), nb=st.integers(21, 30))
def test_affine_signal_is_reproduced(a, b, n, nb):
    t = np.arange(n) * 100.0
    raw = RawTrace(np.repeat((a * t / 100 + b)[:, None], nb, axis=1))
    up = interpolate_time(raw)
    assert up.n_samples == 11 * n
    tt = np.arange(11 * (n - 1)) * (100.0 / 11)
    want = a * tt / 100 + b
    np.testing.assert_allclose(up.samples[: 11 * (n - 1), 0], want,
                               rtol=1e-9, atol=1e-9 * max(1.0, abs(b)))


@settings(max_examples=60, deadline=None)
@given(rows=st.lists(finite, min_size=2, max_size=8), nb=st.integers(21, 79))
def test_row_constant_matrix_maps_to_same_constant(rows, nb):
    x = np.repeat(np.array(rows)[:, None], nb, axis=1)
    out = map_to_channels(RawTrace(x), min_coverage=min(nb, 21))
    for c in range(out.samples.shape[1]):
        np.testing.assert_allclose(out.samples[:, c], rows, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 60))
def test_length_is_eleven_times_input(n):
    raw = RawTrace(np.random.default_rng(n).uniform(-90, -60, size=(n, 79)))
    assert len(preprocess(raw, chunk=7)) == 11 * n


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_synthesis_is_reproducible(seed):
    itfs = (Interferer("csma-like", (5, 30), period=40, duty=0.4),)
    a = synthesize_trace(SynthScenario(200, itfs, noise_std_db=0.5, seed=seed))
    b = synthesize_trace(SynthScenario(200, itfs, noise_std_db=0.5, seed=seed))
    np.testing.assert_array_equal(a.samples, b.samples)
