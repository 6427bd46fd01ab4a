"""Learned access/rate decisions and post-TXOP RSSI compensation."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InsufficientDataError
from ..ladder import TABLE, LabelConfig, McsLadder


def dl_jcara_decide(model, queue, channel, cfg: LabelConfig = LabelConfig()):
    """MCS for the TXOP after the newest queued slot; -1 means stay idle."""
    w = cfg.jcara_window
    if len(queue) < w:
        raise InsufficientDataError(f"queue holds {len(queue)} values, decision needs {w}")
    return int(model.predict(queue.tail(channel, w))[0])


def decide_ahead(model, history, upcoming, window):
    """Decisions for each upcoming slot assuming the device keeps sensing.

    ``history`` holds the newest ``window - 1`` believed values, ``upcoming``
    the values that will be sensed next.  Entry ``j`` uses only values up to
    ``upcoming[j]``.
    """
    seq = np.concatenate([history, upcoming])
    return model.predict(sliding_window_view(seq, window))


def dl_mcs_select(model, window):
    """Most probable transmit-capable MCS (ignores the stay-idle class)."""
    probs = model.forward(window)[0]
    values = np.asarray(model.class_values)
    probs = np.where(values >= 0, probs, -np.inf)
    return int(values[np.argmax(probs)])


def compensation_interval(mcs, success, ladder: McsLadder = TABLE,
                          cfg: LabelConfig = LabelConfig()):
    """Closed dBm interval the synthetic history is drawn from after a TXOP.

    Success at MCS i: SINR in [min_i, min_top].  Failure: SINR in
    [floor, min_{i-1}], using min_0 for a failed MCS 0 (the whole sub-2 dB band).
    RSSI = P_r - SINR.
    """
    p_r = cfg.p_r_dbm
    if success:
        return p_r - ladder.min_sinr_db(ladder.highest), p_r - ladder.min_sinr_db(mcs)
    upper = ladder.min_sinr_db(max(mcs - 1, 0))
    return p_r - upper, p_r - cfg.sinr_floor_db


def compensation_values(mcs, success, rng, n=120, ladder: McsLadder = TABLE,
                        cfg: LabelConfig = LabelConfig()):
    lo, hi = compensation_interval(mcs, success, ladder, cfg)
    return rng.uniform(lo, hi, n) if hi > lo else np.full(n, lo)


def compensate_after_txop(queue, channel, mcs, success, rng, ladder: McsLadder = TABLE,
                          cfg: LabelConfig = LabelConfig(), other_range=None):
    """Append one TXOP worth of synthetic values to every channel of ``queue``.

    The active channel follows the success/failure interval; other channels
    draw uniformly from ``other_range`` (the whole observed RSSI range).
    """
    n = cfg.txop_slots
    block = np.empty((n, len(queue.channels)))
    for j, ch in enumerate(queue.channels):
        if ch == channel:
            block[:, j] = compensation_values(mcs, success, rng, n, ladder, cfg)
        else:
            block[:, j] = rng.uniform(other_range[0], other_range[1], n)
    queue.push(block)
    return block


def range_fill(queue, n, value_range, rng):
    """Deaf-period fill for every channel (used while retuning)."""
    block = rng.uniform(value_range[0], value_range[1], (n, len(queue.channels)))
    queue.push(block)
    return block
