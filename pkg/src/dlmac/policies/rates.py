"""Classical rate adaptation: ARF and an IWL-style throughput sampler."""
from dataclasses import dataclass, field

import numpy as np

from ..ladder import TABLE


@dataclass
class ArfState:
    mcs: int = 0
    n_up: int = 10
    n_down: int = 2
    lowest: int = 0
    highest: int = 8
    successes: int = 0
    failures: int = 0


def arf_rate(state: ArfState):
    return state.mcs


def arf_update(state: ArfState, success):
    if success:
        state.successes += 1
        state.failures = 0
        if state.successes >= state.n_up:
            state.mcs = min(state.mcs + 1, state.highest)
            state.successes = 0
    else:
        state.failures += 1
        state.successes = 0
        if state.failures >= state.n_down:
            state.mcs = max(state.mcs - 1, state.lowest)
            state.failures = 0
    return state.mcs


def _default_rates():
    return np.array([TABLE.rate(i) for i in range(0, 9)])


@dataclass
class IwlState:
    """Per-MCS EWMA success ratio; expected throughput is rate * ratio."""
    epsilon: float = 0.1
    ewma: float = 0.25
    rates: np.ndarray = field(default_factory=_default_rates)
    ratios: np.ndarray = None
    attempts: np.ndarray = None
    delivered_bits: np.ndarray = None

    def __post_init__(self):
        n = len(self.rates)
        if self.ratios is None:
            self.ratios = np.ones(n)
        if self.attempts is None:
            self.attempts = np.zeros(n, dtype=np.int64)
        if self.delivered_bits is None:
            self.delivered_bits = np.zeros(n, dtype=np.int64)


def iwl_best(state: IwlState):
    return int(np.argmax(state.rates * state.ratios))


def iwl_select(state: IwlState, rng):
    best = iwl_best(state)
    if state.epsilon > 0 and rng.random() < state.epsilon:
        step = 1 if rng.random() < 0.5 else -1
        return int(np.clip(best + step, 0, len(state.rates) - 1))
    return best


def iwl_update(state: IwlState, mcs, success, bits=0):
    a = state.ewma
    state.ratios[mcs] = (1 - a) * state.ratios[mcs] + a * (1.0 if success else 0.0)
    state.attempts[mcs] += 1
    state.delivered_bits[mcs] += int(bits)
    return iwl_best(state)
