import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlmac.errors import InsufficientDataError
from dlmac.ladder import LabelConfig
from dlmac.neuralkit import build_model, dense_arch, lstm_arch
from dlmac.policies import (ArfState, CsmaConfig, CsmaState, IwlState, RssiQueue, SwitchConfig,
                            SwitchTimer, arf_update, compensate_after_txop,
                            compensation_interval, csma_outcome, csma_step, decide_ahead,
                            dl_jcara_decide, is_busy, iwl_select, iwl_update, range_fill,
                            switch_decide)


class FixedDraw:
    """Stand-in random stream whose integer draws are always ``value``."""

    def __init__(self, value=0):
        self.value = value

    def integers(self, lo, hi):
        return self.value

    def random(self):
        return 0.99


def test_idle_channel_zero_backoff_transmits_after_difs():
    st_ = CsmaState()
    fired = [csma_step(st_, False, FixedDraw(0)) for _ in range(4)]
    assert fired == [False, False, False, True]


def test_busy_slot_freezes_backoff():
    st_ = CsmaState()
    rng = FixedDraw(5)
    for _ in range(4):
        csma_step(st_, False, rng)
    assert st_.backoff_counter == 5
    csma_step(st_, False, rng)
    assert st_.backoff_counter == 4
    csma_step(st_, True, rng)
    assert st_.backoff_counter == 4 and st_.difs_progress == 0
    # a fresh DIFS is needed before the counter moves again
    for _ in range(4):
        csma_step(st_, False, rng)
    assert st_.backoff_counter == 4


def test_contention_window_doubling_and_reset():
    st_ = CsmaState()
    csma_outcome(st_, False)
    assert st_.cw == 64
    for _ in range(10):
        csma_outcome(st_, False)
    assert st_.cw == 1024
    csma_outcome(st_, True)
    assert st_.cw == 32


def test_threshold():
    assert is_busy(-74.9) and not is_busy(-75.0)


@settings(max_examples=100, deadline=None)
@given(busy=st.lists(st.booleans(), min_size=1, max_size=400),
       outcomes=st.lists(st.booleans(), min_size=1, max_size=40), seed=st.integers(0, 1000))
def test_csma_invariants(busy, outcomes, seed):
    rng = np.random.default_rng(seed)
    st_ = CsmaState()
    sensed, k = [], 0
    for b in busy:
        sensed.append(b)
        if csma_step(st_, b, rng):
            # the DIFS window ending at this slot was idle throughout
            assert len(sensed) >= 4 and not any(sensed[-4:])
            csma_outcome(st_, outcomes[k % len(outcomes)])
            k += 1
            sensed = []
        assert st_.cw in (32, 64, 128, 256, 512, 1024)
        if st_.backoff_counter is not None:
            assert 0 <= st_.backoff_counter < st_.cw


def arf_oracle(start, outcomes, n_up=10, n_down=2):
    mcs, ok, bad, seq = start, 0, 0, []
    for o in outcomes:
        if o:
            ok, bad = ok + 1, 0
            if ok == n_up:
                mcs, ok = min(mcs + 1, 8), 0
        else:
            bad, ok = bad + 1, 0
            if bad == n_down:
                mcs, bad = max(mcs - 1, 0), 0
        seq.append(mcs)
    return seq


def test_arf_examples():
    s = ArfState(mcs=2)
    for _ in range(10):
        arf_update(s, True)
    assert s.mcs == 3
    s = ArfState(mcs=3)
    arf_update(s, False)
    assert s.mcs == 3
    arf_update(s, False)
    assert s.mcs == 2
    s = ArfState(mcs=8)
    for _ in range(25):
        arf_update(s, True)
    assert s.mcs == 8


@settings(max_examples=100, deadline=None)
@given(start=st.integers(0, 8), outcomes=st.lists(st.booleans(), max_size=200))
def test_arf_replay(start, outcomes):
    s = ArfState(mcs=start)
    assert [arf_update(s, o) for o in outcomes] == arf_oracle(start, outcomes)


def test_iwl_examples():
    s = IwlState(epsilon=0.0)
    assert iwl_select(s, np.random.default_rng(0)) == 8
    s.ratios[:] = 0.0
    s.ratios[8], s.ratios[5] = 0.1, 0.9
    assert iwl_select(s, np.random.default_rng(0)) == 5


@settings(max_examples=50, deadline=None)
@given(outcomes=st.lists(st.booleans(), max_size=100), seed=st.integers(0, 1000))
def test_iwl_replay_is_deterministic(outcomes, seed):
    def play():
        s, rng, seq = IwlState(), np.random.default_rng(seed), []
        for o in outcomes:
            m = iwl_select(s, rng)
            iwl_update(s, m, o, 1000 if o else 0)
            seq.append(m)
        return seq
    assert play() == play()
    s = IwlState(epsilon=0.0)
    seq = [iwl_select(s, None) for _ in range(5)]
    assert seq == [8] * 5


def test_compensation_intervals():
    assert compensation_interval(3, True) == (-93.0, -76.0)
    assert compensation_interval(3, False) == (-74.0, -45.0)
    assert compensation_interval(0, False) == (-67.0, -45.0)


@settings(max_examples=60, deadline=None)
@given(mcs=st.integers(0, 8), ok=st.booleans(), seed=st.integers(0, 1000))
def test_compensated_values_stay_inside(mcs, ok, seed):
    q = RssiQueue((1, 6, 11), 600)
    block = compensate_after_txop(q, 6, mcs, ok, np.random.default_rng(seed),
                                  other_range=(-95.0, -40.0))
    lo, hi = compensation_interval(mcs, ok)
    assert block.shape == (120, 3) and q.pushed == 120
    assert np.all((block[:, 1] >= lo) & (block[:, 1] <= hi))
    others = block[:, [0, 2]]
    assert np.all((others >= -95.0) & (others <= -40.0))


def test_range_fill_covers_every_channel():
    q = RssiQueue((1, 6, 11), 600)
    block = range_fill(q, 20, (-90.0, -50.0), np.random.default_rng(0))
    assert block.shape == (20, 3) and len(q) == 20
    assert np.all((block >= -90.0) & (block <= -50.0))


def test_queue_keeps_newest_values():
    q = RssiQueue((6,), 5)
    for v in range(3000):
        q.push([float(v)])
    assert list(q.tail(6, 5)) == [2995.0, 2996.0, 2997.0, 2998.0, 2999.0]
    with pytest.raises(ValueError):
        q.tail(6, 6)


def zero_jcara():
    m = build_model(lstm_arch((3, 120), 10, 4, 4), (3, 120), range(-1, 9))
    for p in m.params:
        for v in p.values():
            v[...] = 0.0
    return m


def test_zero_model_stays_idle():
    q = RssiQueue((6,), 600)
    q.push(np.full(360, -80.0))
    assert dl_jcara_decide(zero_jcara(), q, 6) == -1


def test_decision_needs_full_window():
    q = RssiQueue((6,), 600)
    q.push(np.full(359, -80.0))
    with pytest.raises(InsufficientDataError):
        dl_jcara_decide(zero_jcara(), q, 6)


def test_batched_decisions_match_one_by_one():
    m = build_model(lstm_arch((3, 120), 10, 6, 5), (3, 120), range(-1, 9), seed=4,
                    norm=(-95.0, -40.0))
    rng = np.random.default_rng(0)
    hist = rng.uniform(-95, -40, 359)
    up = rng.uniform(-95, -40, 30)
    batch = decide_ahead(m, hist, up, 360)
    seq = np.concatenate([hist, up])
    for j in range(30):
        assert batch[j] == m.predict(seq[j:j + 360])[0]


def switch_model_favoring(channel_pos):
    m = build_model(dense_arch(15, 3, hidden=(4,)), (15,), (1, 6, 11))
    for p in m.params:
        for v in p.values():
            v[...] = 0.0
    m.params[-1]["b"][channel_pos] = 5.0
    return m


def test_switch_decision_follows_model():
    q = RssiQueue((1, 6, 11), 600)
    q.push(np.full((600, 3), -80.0))
    assert switch_decide(switch_model_favoring(1), q, (1, 6, 11)) == 6
    assert switch_decide(switch_model_favoring(2), q, (1, 6, 11)) == 11


def test_switch_timer():
    t = SwitchTimer(1200)
    t.advance(1199)
    assert not t.due and t.slots_until_due() == 1
    t.advance(1)
    assert t.due
    t.reset()
    assert t.evaluations == 1 and t.elapsed == 0


def test_switch_config_checks():
    with pytest.raises(ValueError):
        SwitchConfig(t_c_slots=0)
    with pytest.raises(ValueError):
        SwitchConfig(t_d_slots=-1)
    with pytest.raises(ValueError):
        SwitchConfig(mode="sometimes")


def test_label_config_defaults():
    c = LabelConfig()
    assert (c.txop_slots, c.k1, c.k2, c.k3, c.p_r_dbm) == (120, 3, 5, 2, -65.0)
    assert CsmaConfig() == CsmaConfig(-75.0, 4, 32, 1024)
