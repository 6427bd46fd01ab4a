"""Listen-before-talk with DIFS and binary exponential backoff, one call per mini-slot."""
from dataclasses import dataclass


@dataclass(frozen=True)
class CsmaConfig:
    threshold_dbm: float = -75.0
    difs_slots: int = 4        # 36 us of 9 us mini-slots
    cw_min: int = 32
    cw_max: int = 1024


@dataclass
class CsmaState:
    cw: int = 32
    backoff_counter: int | None = None
    difs_progress: int = 0
    phase: str = "idle"        # idle | difs | backoff | ready


def is_busy(rssi_dbm, cfg: CsmaConfig = CsmaConfig()):
    return rssi_dbm > cfg.threshold_dbm


def csma_step(state: CsmaState, sensed_busy, rng, cfg: CsmaConfig = CsmaConfig(),
              has_packet=True):
    """Advance one mini-slot; True means start transmitting right after this slot.

    A busy slot clears DIFS progress and freezes the backoff counter.  The
    counter is drawn uniformly from {0..cw-1} when DIFS first completes for
    a pending packet and only decrements on idle slots after DIFS.
    """
    if sensed_busy:
        state.difs_progress = 0
        state.phase = "difs" if has_packet else "idle"
        return False
    if state.difs_progress < cfg.difs_slots:
        state.difs_progress += 1
        if state.difs_progress < cfg.difs_slots:
            state.phase = "difs" if has_packet else "idle"
            return False
        if not has_packet:
            state.phase = "idle"
            return False
        # DIFS completes on this slot; the counter starts moving next slot
        if state.backoff_counter is None:
            state.backoff_counter = int(rng.integers(0, state.cw))
        state.phase = "backoff"
    elif not has_packet:
        state.phase = "idle"
        return False
    elif state.backoff_counter is None:
        state.backoff_counter = int(rng.integers(0, state.cw))
        state.phase = "backoff"
    elif state.backoff_counter > 0:
        state.backoff_counter -= 1
    if state.backoff_counter == 0:
        state.phase = "ready"
        return True
    return False


def csma_outcome(state: CsmaState, success, cfg: CsmaConfig = CsmaConfig()):
    """Contention-window update once a transmission's ACK/NACK is known."""
    state.cw = cfg.cw_min if success else min(2 * state.cw, cfg.cw_max)
    state.backoff_counter = None
    state.difs_progress = 0
    state.phase = "idle"
