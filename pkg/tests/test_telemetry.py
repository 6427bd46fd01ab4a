import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlmac.simcore import TxopOutcome
from dlmac.telemetry import (aggregate, emit_report, interval_bounds, interval_stats,
                             load_intervals)


def outcome(start, bits, success=True, device=0):
    return TxopOutcome(start, 6, 3, 12.0, success, bits // 12000 or 1, bits if success else 0,
                       device)


def test_single_success_in_interval():
    rep = aggregate([outcome(100, 12000)], [(219, 50, 0)], 1000, 0, 1000)
    assert rep.intervals[0].throughput == 12.0 and rep.throughput == 12.0


def test_no_success_means_absent_delay():
    rep = aggregate([outcome(100, 12000, success=False)], [], 1000, 0, 1000)
    assert rep.throughput == 0 and rep.mean_delay is None
    assert rep.intervals[0].mean_delay is None
    assert ",," in rep.to_csv().splitlines()[1]


def test_mean_of_two_delays():
    rep = aggregate([outcome(0, 24000)], [(119, 100, 0), (119, 300, 0)], 500, 0, 500)
    assert rep.mean_delay == 200.0


def test_nonpositive_delay_rejected():
    with pytest.raises(ValueError):
        aggregate([], [(10, 0, 0)], 100, 0, 100)


@settings(max_examples=100, deadline=None)
@given(start=st.integers(0, 10**6), slots=st.integers(1, 10**6), width=st.integers(1, 10**5))
def test_intervals_tile_the_run(start, slots, width):
    b = interval_bounds(start, slots, width)
    assert b[0][0] == start and b[-1][1] == start + slots
    assert all(x[1] == y[0] for x, y in zip(b, b[1:]))
    assert all(0 < hi - lo <= width for lo, hi in b)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), width=st.integers(50, 3000))
def test_bit_and_delay_conservation(seed, width):
    rng = np.random.default_rng(seed)
    starts = np.sort(rng.choice(np.arange(600, 9000, 121), 30, replace=False))
    outs = [outcome(int(s), int(rng.integers(1, 5)) * 12000, bool(rng.random() < 0.7))
            for s in starts]
    packets = [(o.end_slot, int(rng.integers(1, 900)), 0) for o in outs if o.success]
    rep = aggregate(outs, packets, width, 600, 9400)
    assert sum(r.throughput * r.slots for r in rep.intervals) == pytest.approx(
        sum(o.bits_delivered for o in outs), rel=1e-12)
    assert sum(r.bits for r in rep.intervals) == rep.total_bits
    if packets:
        assert rep.mean_delay == pytest.approx(np.mean([p[1] for p in packets]), rel=1e-12)


def make_reports(label, seeds, base=10.0):
    reps = []
    for s in seeds:
        outs = [outcome(100 + 200 * k, 12000 * (1 + (s + k) % 3)) for k in range(9)]
        packets = [(o.end_slot, 10 + s + k, 0) for k, o in enumerate(outs)]
        reps.append(aggregate(outs, packets, 500, 0, 2000, label=label, seed=s))
    return reps


def test_three_sigma_error_bars():
    reps = make_reports("x", range(10))
    st_ = interval_stats(reps)
    thr = np.array([[r.intervals[k].throughput for k in range(4)] for r in reps])
    np.testing.assert_allclose(st_["throughput"][1], 3 * thr.std(axis=0))
    np.testing.assert_allclose(st_["throughput"][0], thr.mean(axis=0))


def test_single_seed_zero_width():
    st_ = interval_stats(make_reports("x", [4]))
    assert np.all(st_["throughput"][1] == 0)
    assert np.all(st_["mean_delay"][1][~np.isnan(st_["mean_delay"][1])] == 0)


def test_emission_is_byte_identical(tmp_path):
    reps = make_reports("a", range(3)) + make_reports("b", range(3))
    p1 = emit_report(reps, tmp_path / "one")
    p2 = emit_report(list(reversed(reps)), tmp_path / "two")
    for key in ("summary", "intervals"):
        assert p1[key].read_bytes() == p2[key].read_bytes()
    assert (tmp_path / "one/plots/throughput.svg").read_bytes() == \
        (tmp_path / "two/plots/throughput.svg").read_bytes()
    assert (tmp_path / "one/plots/mean_delay.svg").exists()
    rows = list(csv.DictReader(open(p1["summary"])))
    assert {r["seed"] for r in rows if r["label"] == "a"} == {"0", "1", "2", "mean", "std"}


def test_intervals_reload(tmp_path):
    reps = make_reports("a", range(2))
    paths = emit_report(reps, tmp_path)
    back = sorted(load_intervals(paths["intervals"]), key=lambda r: r.seed)
    for r, b in zip(reps, back):
        assert b.total_bits == r.total_bits and b.mean_delay == r.mean_delay
        assert b.run_slots == r.run_slots


def test_gateway_device_breakdown(tmp_path):
    outs = [outcome(100 + 121 * k, 12000, device=k % 3) for k in range(6)]
    packets = [(o.end_slot, 5 + o.device, o.device) for o in outs]
    rep = aggregate(outs, packets, 1000, 0, 1000, n_devices=3)
    assert [d["bits"] for d in rep.per_device] == [24000] * 3
    assert [d["mean_delay"] for d in rep.per_device] == [5.0, 6.0, 7.0]
    assert "devices" in emit_report([rep], tmp_path)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(make_reports("a", [0]), blocker / "sub")
