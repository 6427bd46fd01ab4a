"""MCS ladder, SINR arithmetic and supervised labeling.

Class index ``k`` of the access/rate classifier corresponds to MCS ``k - 1``
so that class 0 is "do not transmit".
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientDataError, TraceFormatError


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation: str
    code_rate: str
    rate_mbps: float
    min_sinr_db: float


class McsLadder:
    def __init__(self, entries):
        self.entries = tuple(sorted(entries, key=lambda e: e.index))
        self.indices = np.array([e.index for e in self.entries])
        self.rates = np.array([e.rate_mbps for e in self.entries], dtype=np.float64)
        self.min_sinr = np.array([e.min_sinr_db for e in self.entries], dtype=np.float64)
        # thresholds of transmit-capable rows, ascending
        self._thresholds = self.min_sinr[1:]

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, mcs):
        return self.entries[mcs - self.lowest]

    @property
    def lowest(self):
        return int(self.indices[0])

    @property
    def highest(self):
        return int(self.indices[-1])

    def rate(self, mcs):
        return self[mcs].rate_mbps

    def min_sinr_db(self, mcs):
        return self[mcs].min_sinr_db

    def mcs_for_sinr(self, sinr):
        return int(np.searchsorted(self._thresholds, sinr, side="right")) - 1

    def mcs_for_sinr_array(self, sinr):
        return np.searchsorted(self._thresholds, np.asarray(sinr), side="right") - 1


TABLE = McsLadder([
    McsEntry(-1, "-", "-", 0.0, -np.inf),
    McsEntry(0, "BPSK", "1/2", 6.5, 2.0),
    McsEntry(1, "QPSK", "1/2", 13.0, 5.0),
    McsEntry(2, "QPSK", "3/4", 19.5, 9.0),
    McsEntry(3, "16-QAM", "1/2", 26.0, 11.0),
    McsEntry(4, "16-QAM", "3/4", 39.0, 15.0),
    McsEntry(5, "64-QAM", "2/3", 52.0, 18.0),
    McsEntry(6, "64-QAM", "3/4", 58.5, 20.0),
    McsEntry(7, "64-QAM", "5/6", 65.0, 25.0),
    McsEntry(8, "256-QAM", "3/4", 78.0, 28.0),
])

MCS_CLASSES = tuple(range(-1, 9))
N_MCS_CLASSES = len(MCS_CLASSES)


def mcs_to_class(mcs):
    return np.asarray(mcs) + 1


def class_to_mcs(k):
    return np.asarray(k) - 1


@dataclass(frozen=True)
class LabelConfig:
    txop_slots: int = 120
    k1: int = 3
    k2: int = 5
    k3: int = 2
    p_r_dbm: float = -65.0
    sinr_floor_db: float = -20.0
    stride: int = 120

    def __post_init__(self):
        if self.txop_slots <= 0:
            raise ValueError("txop_slots must be positive")
        if min(self.k1, self.k2, self.k3) < 1:
            raise ValueError("k1, k2, k3 must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def jcara_window(self):
        return self.txop_slots * self.k1

    @property
    def switch_window(self):
        return self.txop_slots * self.k2


def sinr_from_mean_rssi(mean_rssi, p_r=-65.0):
    return p_r - mean_rssi


def mcs_for_sinr(sinr, ladder: McsLadder = TABLE):
    """Highest MCS whose minimum SINR is met (lower edge inclusive), else -1."""
    return ladder.mcs_for_sinr(sinr)


def window_means(x, width, starts=None):
    """Mean of ``x[s:s + width]`` for each start ``s`` (all starts by default).

    Every consumer of TXOP means goes through here so that labels, the genie
    policy and TXOP resolution see bit-identical numbers.
    """
    view = sliding_window_view(np.asarray(x, dtype=np.float64), width)
    if starts is not None:
        view = view[np.atleast_1d(starts)]
    out = np.empty(view.shape[0])
    for i in range(0, view.shape[0], _CHUNK):
        out[i:i + _CHUNK] = np.ascontiguousarray(view[i:i + _CHUNK]).mean(axis=1)
    return out


_CHUNK = 8192


def future_mcs(x, cfg: LabelConfig = LabelConfig(), ladder: McsLadder = TABLE):
    """Best feasible MCS for a TXOP starting right after every slot.

    Entry ``t`` covers slots ``t+1 .. t+txop``; the array has
    ``len(x) - txop`` entries.
    """
    means = window_means(x[1:], cfg.txop_slots)
    return ladder.mcs_for_sinr_array(sinr_from_mean_rssi(means, cfg.p_r_dbm))


# ------------------------------------------------------------ samples

@dataclass
class JcaraDataset:
    features: np.ndarray   # (n, k1, txop) dBm
    labels: np.ndarray     # (n,) MCS index
    times: np.ndarray      # (n,) decision slot t
    cfg: LabelConfig
    channels: tuple = ()
    value_range: tuple | None = None   # (min, max) dBm of the labeled trace


@dataclass
class SwitchDataset:
    features: np.ndarray   # (n, M * k2) dB, channel-major
    labels: np.ndarray     # (n,) channel number
    times: np.ndarray
    cfg: LabelConfig
    channels: tuple = ()
    value_range: tuple | None = None


def _value_range(x):
    return float(np.min(x)), float(np.max(x))


def _column(trace, channel):
    if hasattr(trace, "column"):
        return trace.column(channel)
    return np.asarray(trace, dtype=np.float64)


def label_jcara(trace, channel, cfg: LabelConfig = LabelConfig(), ladder: McsLadder = TABLE,
                stride=None) -> JcaraDataset:
    """Windows of ``120 * k1`` past values labeled with the next TXOP's best MCS.

    Decision slots run over ``[120*k1, L - 120)``; the window ends at (and
    includes) the decision slot.
    """
    x = _column(trace, channel)
    stride = cfg.stride if stride is None else stride
    w, txop = cfg.jcara_window, cfg.txop_slots
    if len(x) < txop * (cfg.k1 + 1) + 1:
        raise InsufficientDataError(
            f"trace of {len(x)} slots is shorter than {txop * (cfg.k1 + 1) + 1}")
    times = np.arange(w, len(x) - txop, stride)
    labels = future_mcs(x, cfg, ladder)[times]
    feats = sliding_window_view(x, w)[times - w + 1].reshape(-1, cfg.k1, txop)
    return JcaraDataset(np.array(feats), labels.astype(np.int64), times, cfg, (int(channel),),
                        _value_range(x))


def block_sinr(x, cfg: LabelConfig, n_blocks, end_slots):
    """Per-TXOP mean SINR of the ``n_blocks`` TXOPs ending at each slot in ``end_slots``."""
    txop = cfg.txop_slots
    means = window_means(x, txop)  # means[s] covers x[s:s+txop]
    offsets = np.arange(n_blocks - 1, -1, -1) * txop + txop - 1
    starts = np.asarray(end_slots)[:, None] - offsets[None, :]
    return sinr_from_mean_rssi(means[starts], cfg.p_r_dbm)


def switch_features(columns, cfg: LabelConfig, end_slots):
    """Flattened (channel-major) per-TXOP SINR features for each end slot."""
    parts = [block_sinr(c, cfg, cfg.k2, end_slots) for c in columns]
    return np.concatenate(parts, axis=1)


def label_switch(trace, channels=None, cfg: LabelConfig = LabelConfig(),
                 stride=None) -> SwitchDataset:
    """Per-channel SINR history labeled with the channel best over the next k3 TXOPs.

    Ties go to the lowest channel index in ``channels`` order.
    """
    channels = tuple(trace.channels if channels is None else channels)
    columns = [trace.column(c) for c in channels]
    stride = cfg.stride if stride is None else stride
    past, fut = cfg.switch_window, cfg.txop_slots * cfg.k3
    n = len(columns[0])
    if n < past + fut + 1:
        raise InsufficientDataError(f"trace of {n} slots is shorter than {past + fut + 1}")
    times = np.arange(past, n - fut, stride)
    feats = switch_features(columns, cfg, times)
    future = np.column_stack([
        sinr_from_mean_rssi(window_means(c, fut, times + 1), cfg.p_r_dbm) for c in columns])
    best = np.argmax(future, axis=1)  # first maximum on ties
    labels = np.asarray(channels)[best]
    return SwitchDataset(feats, labels.astype(np.int64), times, cfg, channels,
                         _value_range(np.concatenate(columns)))


def opt_decision(trace, channel, t, cfg: LabelConfig = LabelConfig(),
                 ladder: McsLadder = TABLE):
    """Genie MCS for the TXOP occupying slots ``t+1 .. t+txop``."""
    x = _column(trace, channel)
    if t < 0 or t + cfg.txop_slots >= len(x):
        raise InsufficientDataError(f"TXOP after slot {t} runs past the trace end ({len(x)})")
    mean = window_means(x, cfg.txop_slots, t + 1)[0]
    return ladder.mcs_for_sinr(sinr_from_mean_rssi(mean, cfg.p_r_dbm))


# ------------------------------------------------------------ dataset files

def save_dataset(ds, path):
    """One sample per line: feature values then the integer label."""
    kind = "jcara" if isinstance(ds, JcaraDataset) else "switch"
    c = ds.cfg
    chans = ",".join(str(x) for x in ds.channels)
    vr = "" if ds.value_range is None else f" range={ds.value_range[0]!r},{ds.value_range[1]!r}"
    feats = ds.features.reshape(len(ds.labels), -1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# task={kind} k1={c.k1} k2={c.k2} k3={c.k3} txop={c.txop_slots} "
                 f"p_r={c.p_r_dbm:g} stride={c.stride} channels={chans}{vr}\n")
        w = csv.writer(fh, lineterminator="\n")
        for row, lab, t in zip(feats, ds.labels, ds.times):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
        fh.write(f"# times={','.join(str(int(t)) for t in ds.times)}\n")


def load_dataset(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise TraceFormatError("dataset file lacks its header", 1)
    head = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    cfg = LabelConfig(txop_slots=int(head["txop"]), k1=int(head["k1"]), k2=int(head["k2"]),
                      k3=int(head["k3"]), p_r_dbm=float(head["p_r"]), stride=int(head["stride"]))
    chans = tuple(int(x) for x in head["channels"].split(",") if x)
    vr = tuple(float(v) for v in head["range"].split(",")) if "range" in head else None
    rows, times = [], None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("# times="):
            times = np.array([int(x) for x in line[8:].split(",") if x], dtype=np.int64)
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise TraceFormatError("non-numeric cell", lineno) from None
    data = np.array(rows)
    feats, labels = data[:, :-1], data[:, -1].astype(np.int64)
    if times is None:
        times = np.arange(len(labels))
    if head["task"] == "jcara":
        return JcaraDataset(feats.reshape(len(labels), cfg.k1, cfg.txop_slots), labels, times,
                            cfg, chans, vr)
    return SwitchDataset(feats, labels, times, cfg, chans, vr)
