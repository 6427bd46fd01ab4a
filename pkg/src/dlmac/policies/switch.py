"""Learned channel selection, timer-driven or after every transmission."""
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError
from ..ladder import LabelConfig, sinr_from_mean_rssi


@dataclass(frozen=True)
class SwitchConfig:
    t_c_slots: int = 1200
    t_d_slots: int = 20
    channel_set: tuple = (1, 6, 11)
    mode: str = "off"      # timer | instant | off

    def __post_init__(self):
        if self.t_c_slots <= 0 or self.t_d_slots < 0:
            raise ValueError("need t_c > 0 and t_d >= 0")
        if self.mode not in ("timer", "instant", "off"):
            raise ValueError(f"unknown switch mode {self.mode!r}")


def queue_switch_features(queue, channels, cfg: LabelConfig = LabelConfig()):
    """Per-TXOP mean SINR of the last k2 TXOPs, channel-major."""
    w, txop = cfg.switch_window, cfg.txop_slots
    if len(queue) < w:
        raise InsufficientDataError(f"queue holds {len(queue)} values, switch needs {w}")
    feats = []
    for ch in channels:
        blocks = queue.tail(ch, w).reshape(cfg.k2, txop)
        feats.append(sinr_from_mean_rssi(blocks.mean(axis=1), cfg.p_r_dbm))
    return np.concatenate(feats)


def switch_decide(model, queue, channels, cfg: LabelConfig = LabelConfig()):
    """Channel with the highest predicted probability (lowest index on ties)."""
    return int(model.predict(queue_switch_features(queue, channels, cfg))[0])


@dataclass
class SwitchTimer:
    t_c_slots: int
    elapsed: int = 0
    evaluations: int = 0

    def advance(self, slots):
        self.elapsed += slots

    @property
    def due(self):
        return self.elapsed >= self.t_c_slots

    def slots_until_due(self):
        return max(self.t_c_slots - self.elapsed, 0)

    def reset(self):
        self.elapsed = 0
        self.evaluations += 1
