"""Scenario presets and the label -> train pipelines shared by the CLI and tests."""
from __future__ import annotations

import numpy as np

from numpy.lib.stride_tricks import sliding_window_view

from .ladder import (MCS_CLASSES, TABLE, JcaraDataset, LabelConfig, future_mcs, label_jcara,
                     label_switch)
from .neuralkit import (PLAIN_DNN_HIDDEN, SWITCH_DNN_HIDDEN, TrainConfig, build_model,
                        dense_arch, lstm_arch, train)
from .policies import compensation_values
from .spectrum import Interferer, SynthScenario, channel_subbands, preprocess, synthesize_trace


def _band(channel):
    lo, hi = channel_subbands(channel)
    return max(lo, 0), hi


def single_channel_scenario(n_samples, seed=0, channel=6):
    """Structured coexistence on one channel.

    A TDMA-like burst train (above the carrier-sense threshold), a periodic
    moderate interferer (below it, so only learned rate control notices) and a
    random CSMA-like neighbour.
    """
    band = _band(channel)
    return SynthScenario(n_samples, (
        Interferer("periodic-burst", band, -60.0, period=23, duty=0.27, phase=0),
        Interferer("periodic-burst", band, -79.0, period=37, duty=0.5, phase=7),
        Interferer("csma-like", band, -62.0, period=400, duty=0.05),
    ), noise_floor_dbm=-95.0, noise_std_db=1.0, seed=seed)


def temporal_scenario(n_samples, seed=0, channel=6):
    """Like ``single_channel_scenario`` with burst cycles of about two and three TXOPs.

    The interference phase drifts across the 3-TXOP decision window, so the
    order of the past blocks carries information about the next one.
    """
    band = _band(channel)
    return SynthScenario(n_samples, (
        Interferer("periodic-burst", band, -60.0, period=22, duty=0.27, phase=0),
        Interferer("periodic-burst", band, -79.0, period=33, duty=0.5, phase=7),
        Interferer("csma-like", band, -62.0, period=400, duty=0.05),
    ), noise_floor_dbm=-95.0, noise_std_db=1.0, seed=seed)


def multi_channel_scenario(n_samples, seed=0, channels=(1, 6, 11)):
    """Per-channel load that drifts slowly so the best channel changes over time."""
    itfs = []
    periods = (44, 52, 60)
    for j, ch in enumerate(channels):
        band = _band(ch)
        itfs.append(Interferer("periodic-burst", band, -60.0, period=periods[j % 3],
                               duty=0.3, phase=11 * j))
        # slow on/off occupancy: whole channel busy for stretches of ~100 ms
        itfs.append(Interferer("csma-like", band, -58.0, period=2000 + 500 * j, duty=0.45))
    return SynthScenario(n_samples, tuple(itfs), noise_floor_dbm=-95.0, noise_std_db=1.0,
                         seed=seed)


SCENARIOS = {"single": single_channel_scenario, "temporal": temporal_scenario,
             "multi": multi_channel_scenario}


def make_trace(kind, n_samples, seed=0, channels=(6,)):
    """Synthesize a raw trace of ``n_samples`` x 100 us and preprocess it."""
    if kind not in SCENARIOS:
        raise ValueError(f"unknown scenario {kind!r}; expected one of {tuple(SCENARIOS)}")
    scen = SCENARIOS[kind](n_samples, seed, channels if kind == "multi" else channels[0])
    return preprocess(synthesize_trace(scen), channels=channels)


def replay_history(x, cfg: LabelConfig = LabelConfig(), rng=None, overshoot=0.1,
                   ladder=TABLE):
    """Believed history of a saturated device that transmits whenever a TXOP is feasible.

    Each TXOP uses the best feasible MCS (one step too high with probability
    ``overshoot``, which then fails) and its slots are overwritten with the
    compensation draws the device would queue.  Returns the believed series
    and the decision slots met right after each TXOP.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    txop = cfg.txop_slots
    fm = future_mcs(x, cfg, ladder)
    feasible = np.flatnonzero(fm >= 0)
    believed = np.array(x, dtype=np.float64)
    after = []
    t = cfg.jcara_window
    last = len(x) - txop - 1
    while t <= last:
        k = np.searchsorted(feasible, t)
        if k >= feasible.size or feasible[k] > last:
            break
        t = int(feasible[k])
        mcs = int(fm[t])
        success = True
        if mcs < ladder.highest and rng.random() < overshoot:
            mcs, success = mcs + 1, False
        believed[t + 1:t + txop + 1] = compensation_values(mcs, success, rng, txop, ladder, cfg)
        t += txop + 1
        after.append(t)
    return believed, np.asarray(after[:-1] if after and after[-1] > last else after, dtype=np.int64)


def label_jcara_replay(trace, channel, cfg: LabelConfig = LabelConfig(), stride=None, seed=0,
                       overshoot=0.1, ladder=TABLE) -> JcaraDataset:
    """Windows taken from a replayed device history (compensation included).

    Labels are still the true best MCS of the following TXOP.  Samples are the
    slots right after each replayed TXOP plus every ``stride``-th slot.
    """
    x = trace.column(channel) if hasattr(trace, "column") else np.asarray(trace)
    stride = cfg.stride if stride is None else stride
    believed, after = replay_history(x, cfg, np.random.default_rng(seed), overshoot, ladder)
    w, txop = cfg.jcara_window, cfg.txop_slots
    regular = np.arange(w, len(x) - txop, stride)
    times = np.unique(np.concatenate([after[after < len(x) - txop], regular]))
    labels = future_mcs(x, cfg, ladder)[times]
    feats = sliding_window_view(believed, w)[times - w + 1].reshape(-1, cfg.k1, txop)
    return JcaraDataset(np.array(feats), labels.astype(np.int64), times, cfg, (int(channel),),
                        (float(x.min()), float(x.max())))


def merge_datasets(a: JcaraDataset, b: JcaraDataset) -> JcaraDataset:
    return JcaraDataset(np.concatenate([a.features, b.features]),
                        np.concatenate([a.labels, b.labels]),
                        np.concatenate([a.times, b.times]), a.cfg, a.channels, a.value_range)


def jcara_model(arch, cfg: LabelConfig = LabelConfig(), seed=0, lstm_hidden=128,
                dense_hidden=64, dnn_hidden=PLAIN_DNN_HIDDEN):
    n = len(MCS_CLASSES)
    if arch == "lstm":
        return build_model(lstm_arch((cfg.k1, cfg.txop_slots), n, lstm_hidden, dense_hidden),
                           (cfg.k1, cfg.txop_slots), MCS_CLASSES, seed, task="jcara")
    if arch == "dnn":
        return build_model(dense_arch(cfg.jcara_window, n, dnn_hidden), (cfg.jcara_window,),
                           MCS_CLASSES, seed, task="jcara")
    raise ValueError(f"unknown architecture {arch!r}")


def train_jcara(trace, channel, arch="lstm", cfg: LabelConfig = LabelConfig(),
                train_cfg: TrainConfig = TrainConfig(), stride=None, seed=0, replay=False,
                **widths):
    """Label ``trace`` for joint access/rate control and fit a fresh model.

    With ``replay`` the true-history samples are joined by samples from a
    replayed device history so the model has seen compensated windows.
    """
    ds = label_jcara(trace, channel, cfg, TABLE, stride)
    if replay:
        ds = merge_datasets(ds, label_jcara_replay(trace, channel, cfg, stride, seed))
    model = jcara_model(arch, cfg, seed, **widths)
    model.meta.update({"channel": int(channel), "samples": int(ds.labels.size),
                       "replay": bool(replay), "trace_range": list(ds.value_range),
                       "k1": cfg.k1, "txop": cfg.txop_slots})
    model, log = train(model, ds.features, ds.labels, train_cfg)
    return model, log


def switch_model(channels, cfg: LabelConfig = LabelConfig(), seed=0, hidden=SWITCH_DNN_HIDDEN):
    n_in = len(channels) * cfg.k2
    return build_model(dense_arch(n_in, len(channels), hidden), (n_in,), tuple(channels), seed,
                       task="switch")


def train_switch(trace, channels, cfg: LabelConfig = LabelConfig(),
                 train_cfg: TrainConfig = TrainConfig(), stride=None, seed=0):
    ds = label_switch(trace, channels, cfg, stride)
    model = switch_model(channels, cfg, seed)
    model.meta.update({"channels": list(channels), "samples": int(ds.labels.size),
                       "trace_range": list(ds.value_range), "k2": cfg.k2, "k3": cfg.k3})
    return train(model, ds.features, ds.labels, train_cfg)


def label_histogram(labels, values):
    labels = np.asarray(labels)
    return {int(v): int(np.sum(labels == v)) for v in values}
