"""Mini-slot engine: trace playback, Poisson traffic, TXOPs and polling gateway.

Slot semantics: a decision taken at idle slot ``t`` (after sensing slot ``t``)
starts a TXOP that occupies slots ``t+1 .. t+120``; its outcome is known at
slot ``t+120`` and the device senses again from ``t+121``.  The trace is
exogenous: simulated transmissions never alter it.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .ladder import TABLE, LabelConfig, McsLadder, sinr_from_mean_rssi, window_means
from .policies import (ArfState, CsmaConfig, CsmaState, IwlState, RssiQueue, SwitchConfig,
                       arf_rate, arf_update, compensate_after_txop, csma_outcome, csma_step,
                       decide_ahead, dl_mcs_select, iwl_select, iwl_update, range_fill,
                       queue_switch_features)
from .policies import POLICIES
from .telemetry import SimReport, aggregate

TXOP_US = 1080


@dataclass(frozen=True)
class RunConfig:
    policy: str = "dlmac"
    channel: int = 6
    lam: float = 0.18
    payload_bits: int = 12000
    buffer_capacity: int = 10
    interval_slots: int = 111_111
    gateway_members: int = 0
    lookahead: int = 256
    initial_channel: int | None = None
    label: LabelConfig = LabelConfig()
    csma: CsmaConfig = CsmaConfig()
    switch: SwitchConfig = SwitchConfig()
    arf_n_up: int = 10
    arf_n_down: int = 2
    iwl_epsilon: float = 0.1
    iwl_ewma: float = 0.25
    compensation_range: tuple | None = None
    tag: str | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.buffer_capacity < 1 or self.lam < 0 or self.interval_slots < 1:
            raise ConfigError("buffer_capacity >= 1, lam >= 0 and interval_slots >= 1 required")
        if self.lookahead < 1:
            raise ConfigError("lookahead must be >= 1")

    @property
    def warmup_slots(self):
        return self.label.txop_slots * max(self.label.k1, self.label.k2)

    @property
    def switch_mode(self):
        if self.policy == "dlmac_instant":
            return "instant"
        if self.policy == "dlmac":
            return self.switch.mode
        return "off"

    @property
    def label_name(self):
        return self.tag or self.policy


# ----------------------------------------------------------------- traffic

class TrafficSource:
    """Poisson arrivals into a drop-tail FIFO of arrival slots."""

    def __init__(self, lam, capacity, rng, start, stop, payload_bits=12000):
        counts = rng.poisson(lam, max(stop - start, 0))
        nz = np.flatnonzero(counts)
        self._slots = (nz + start).tolist()
        self._counts = counts[nz].tolist()
        self._i = 0
        self.capacity = capacity
        self.payload_bits = payload_bits
        self.buffer = deque()
        self.arrived = 0
        self.drops = []          # (slot, count)
        self.max_backlog = 0

    @property
    def backlog(self):
        return len(self.buffer)

    def next_arrival(self):
        return self._slots[self._i] if self._i < len(self._slots) else None

    def advance(self, slot):
        """Admit every arrival at or before ``slot``."""
        slots, counts, buf = self._slots, self._counts, self.buffer
        i = self._i
        while i < len(slots) and slots[i] <= slot:
            n = counts[i]
            self.arrived += n
            room = self.capacity - len(buf)
            take = n if n <= room else room
            buf.extend([slots[i]] * take)
            if take < n:
                self.drops.append((slots[i], n - take))
            i += 1
        self._i = i
        if len(buf) > self.max_backlog:
            self.max_backlog = len(buf)

    def take(self, k):
        return [self.buffer.popleft() for _ in range(min(k, len(self.buffer)))]


# ------------------------------------------------------------------ TXOPs

@dataclass(frozen=True)
class TxopOutcome:
    start_slot: int
    channel: int
    mcs: int
    realized_mean_sinr: float
    success: bool
    packets_carried: int
    bits_delivered: int
    device: int = 0
    txop_slots: int = 120

    @property
    def end_slot(self):
        return self.start_slot + self.txop_slots - 1


def txop_capacity(mcs, ladder: McsLadder = TABLE, payload_bits=12000, txop_us=TXOP_US):
    bits = int(round(ladder.rate(mcs) * txop_us))
    return max(1, bits // payload_bits)


def resolve_txop(trace, channel, start_slot, mcs, ladder: McsLadder = TABLE,
                 cfg: LabelConfig = LabelConfig(), backlog=None, payload_bits=12000,
                 device=0) -> TxopOutcome:
    """Judge a TXOP against the ground-truth trace (threshold success model)."""
    x = trace.column(channel) if hasattr(trace, "column") else np.asarray(trace)
    n = cfg.txop_slots
    if mcs < 0:
        raise ValueError("a TXOP needs a transmit-capable MCS")
    if start_slot < 0 or start_slot + n > len(x):
        raise InsufficientDataError(f"TXOP at {start_slot} overflows a {len(x)}-slot trace")
    sinr = float(sinr_from_mean_rssi(window_means(x, n, start_slot)[0], cfg.p_r_dbm))
    success = sinr >= ladder.min_sinr_db(mcs)
    cap = txop_capacity(mcs, ladder, payload_bits, n * 9)
    packets = cap if backlog is None else min(backlog, cap)
    return TxopOutcome(start_slot, int(channel), int(mcs), sinr, bool(success), packets,
                       packets * payload_bits if success else 0, device, n)


# ------------------------------------------------------------------ engine

@dataclass
class RunRecord:
    outcomes: list = field(default_factory=list)
    packets: list = field(default_factory=list)   # (delivery slot, delay, device)
    drops: list = field(default_factory=list)     # (slot, count, device)
    switches: list = field(default_factory=list)  # (slot, from, to)
    evaluations: int = 0
    sensed: list = field(default_factory=list)    # [a, b) ranges read from the trace
    blind: list = field(default_factory=list)     # [a, b) TXOP / retune ranges
    max_backlog: int = 0
    arrivals: int = 0


def check_models(cfg, trace, models):
    need_jcara = cfg.policy in ("dlmac", "dlmac_instant", "csma_dlmcs", "dlca_iwl")
    jm = models.get("jcara")
    if need_jcara:
        if jm is None:
            raise ConfigError(f"policy {cfg.policy} needs a trained access/rate model")
        if int(np.prod(jm.input_shape)) != cfg.label.jcara_window:
            raise ConfigError(f"model input {jm.input_shape} does not cover "
                              f"{cfg.label.jcara_window} slots (k1={cfg.label.k1})")
        if tuple(jm.class_values) != tuple(range(-1, TABLE.highest + 1)):
            raise ConfigError("access/rate model classes do not match the MCS ladder")
        if jm.norm is None:
            raise ConfigError("access/rate model carries no normalization constants")
    if cfg.switch_mode != "off":
        sm = models.get("switch")
        chans = tuple(cfg.switch.channel_set)
        if sm is None:
            raise ConfigError("channel switching needs a trained switch model")
        if tuple(sm.class_values) != chans:
            raise ConfigError(f"switch model channels {sm.class_values} != {chans}")
        if int(np.prod(sm.input_shape)) != len(chans) * cfg.label.k2:
            raise ConfigError("switch model input width does not match channels x k2")
        if sm.norm is None:
            raise ConfigError("switch model carries no normalization constants")
        missing = [c for c in chans if c not in trace.channels]
        if missing:
            raise ConfigError(f"trace lacks channels {missing}")
    elif cfg.channel not in trace.channels:
        raise ConfigError(f"trace lacks channel {cfg.channel}")
    if cfg.gateway_members and cfg.policy != "dlmac":
        raise ConfigError("gateway runs use the dlmac policy")


def run(trace, cfg: RunConfig = RunConfig(), seed=0, models=None,
        ladder: McsLadder = TABLE) -> SimReport:
    """Simulate one device (or one polling gateway) over ``trace``."""
    models = models or {}
    check_models(cfg, trace, models)
    rec = _Engine(trace, cfg, seed, models, ladder).run()
    start = cfg.warmup_slots
    return aggregate(rec.outcomes, rec.packets, cfg.interval_slots, start, len(trace) - start,
                     drops=rec.drops, switches=rec.switches, label=cfg.label_name, seed=seed,
                     n_devices=max(cfg.gateway_members, 1), evaluations=rec.evaluations,
                     record=rec)


class _Engine:
    def __init__(self, trace, cfg: RunConfig, seed, models, ladder):
        self.trace, self.cfg, self.models, self.ladder = trace, cfg, models, ladder
        lc = cfg.label
        self.txop = lc.txop_slots
        self.W = cfg.warmup_slots
        self.L = len(trace)
        if self.L < self.W + self.txop + 2:
            raise InsufficientDataError(
                f"trace of {self.L} slots is shorter than warm-up {self.W} plus one TXOP")
        self.last_t = self.L - self.txop - 1
        ss = np.random.SeedSequence(seed)
        traffic_ss, access_ss, rate_ss, comp_ss, chan_ss = ss.spawn(5)
        n_members = max(cfg.gateway_members, 1)
        self.sources = [
            TrafficSource(cfg.lam, cfg.buffer_capacity, np.random.default_rng(s), self.W, self.L,
                          cfg.payload_bits)
            for s in traffic_ss.spawn(n_members)]
        self.rng_access = np.random.default_rng(access_ss)
        self.rng_rate = np.random.default_rng(rate_ss)
        self.rng_comp = np.random.default_rng(comp_ss)
        self.rng_chan = np.random.default_rng(chan_ss)
        self.rec = RunRecord()
        self.cursor = 0

        self.mode = cfg.switch_mode
        if self.mode == "off":
            self.channels = (int(cfg.channel),)
        else:
            self.channels = tuple(int(c) for c in cfg.switch.channel_set)
        self.cols = {c: np.ascontiguousarray(trace.column(c)) for c in self.channels}
        self.jm = models.get("jcara")
        self.sm = models.get("switch")
        self.uses_queue = cfg.policy in ("dlmac", "dlmac_instant", "csma_dlmcs", "dlca_iwl")
        if cfg.compensation_range is not None:
            self.full_range = tuple(cfg.compensation_range)
        elif self.jm is not None and "trace_range" in self.jm.meta:
            self.full_range = tuple(self.jm.meta["trace_range"])
        elif self.jm is not None and self.jm.norm is not None:
            self.full_range = tuple(self.jm.norm)
        else:
            self.full_range = trace.select(self.channels).range_dbm
        if self.uses_queue:
            cap = lc.txop_slots * max(lc.k1, lc.k2)
            self.queue = RssiQueue(self.channels, cap)
        else:
            self.queue = None
        self.sensed_upto = 0

    # -- helpers
    def sense_until(self, t):
        """Commit ground-truth readings for slots up to and including ``t``."""
        a = self.sensed_upto
        if t + 1 <= a:
            return
        if self.queue is not None:
            block = np.column_stack([self.cols[c][a:t + 1] for c in self.channels])
            self.queue.push(block)
        self._mark(self.rec.sensed, a, t + 1)
        self.sensed_upto = t + 1

    @staticmethod
    def _mark(ranges, a, b):
        if ranges and ranges[-1][1] == a:
            ranges[-1] = (ranges[-1][0], b)
        else:
            ranges.append((a, b))

    def advance_all(self, t):
        for s in self.sources:
            s.advance(t)

    def any_backlog(self):
        return any(s.backlog for s in self.sources)

    def first_ready_slot(self, t):
        """Earliest slot >= t at which some member holds a packet (None if never)."""
        best = None
        for s in self.sources:
            if s.backlog:
                return t
            na = s.next_arrival()
            if na is not None and (best is None or na < best):
                best = na
        return best

    def pick_member(self):
        n = len(self.sources)
        for k in range(n):
            j = (self.cursor + k) % n
            if self.sources[j].backlog:
                self.cursor = (j + 1) % n
                return j
        return None

    # -- transmissions
    def transmit(self, t, channel, mcs):
        """TXOP on slots t+1..t+txop; returns the outcome (None if no packet)."""
        member = self.pick_member() if len(self.sources) > 1 else 0
        if member is None or not self.sources[member].backlog:
            return None
        src = self.sources[member]
        out = resolve_txop(self.cols[channel], channel, t + 1, mcs, self.ladder, self.cfg.label,
                           src.backlog, self.cfg.payload_bits, member)
        end = out.end_slot
        # arrivals during the TXOP see the carried packets still queued
        self.advance_all(end)
        if out.success:
            for a in src.take(out.packets_carried):
                self.rec.packets.append((end, end - a, member))
        self.rec.outcomes.append(out)
        self._mark(self.rec.blind, t + 1, end + 1)
        if self.queue is not None:
            compensate_after_txop(self.queue, channel, mcs, out.success, self.rng_comp,
                                  self.ladder, self.cfg.label, self.full_range)
        self.sensed_upto = end + 1
        return out

    # -- main loop
    def run(self):
        self.sense_until(self.W - 1)
        p = self.cfg.policy
        if p == "opt":
            self._run_opt()
        elif p.startswith("csma"):
            self._run_csma()
        else:
            self._run_dl_access()
        rec = self.rec
        for j, s in enumerate(self.sources):
            rec.drops.extend((slot, n, j) for slot, n in s.drops)
            rec.max_backlog = max(rec.max_backlog, s.max_backlog)
            rec.arrivals += s.arrived
        rec.drops.sort()
        return rec

    def _run_opt(self):
        ch = self.channels[0]
        x = self.cols[ch]
        means = window_means(x, self.txop)          # means[s] covers x[s:s+txop]
        fm = self.ladder.mcs_for_sinr_array(sinr_from_mean_rssi(means, self.cfg.label.p_r_dbm))
        feasible = np.flatnonzero(fm[1:] >= 0)       # decision slot t <-> TXOP start t+1
        t = self.W
        while t <= self.last_t:
            self.advance_all(t)
            if not self.any_backlog():
                nxt = self.first_ready_slot(t)
                if nxt is None:
                    break
                t = nxt
                continue
            k = int(np.searchsorted(feasible, t))
            if k >= feasible.size or feasible[k] > self.last_t:
                break
            if feasible[k] > t:
                t = int(feasible[k])
                continue
            self.transmit(t, ch, int(fm[t + 1]))
            t += self.txop + 1

    def _rate_controller(self):
        p = self.cfg.policy
        if p.endswith("arf"):
            return ArfState(n_up=self.cfg.arf_n_up, n_down=self.cfg.arf_n_down)
        if p.endswith("iwl"):
            return IwlState(epsilon=self.cfg.iwl_epsilon, ewma=self.cfg.iwl_ewma)
        return None

    def _select_rate(self, rc, t, ch):
        if isinstance(rc, ArfState):
            return arf_rate(rc)
        if isinstance(rc, IwlState):
            return iwl_select(rc, self.rng_rate)
        self.sense_until(t)
        window = self.queue.tail(ch, self.cfg.label.jcara_window)
        return dl_mcs_select(self.jm, window)

    @staticmethod
    def _update_rate(rc, out):
        if isinstance(rc, ArfState):
            arf_update(rc, out.success)
        elif isinstance(rc, IwlState):
            iwl_update(rc, out.mcs, out.success, out.bits_delivered)

    def _run_csma(self):
        ch = self.channels[0]
        x = self.cols[ch]
        cc = self.cfg.csma
        busy = x > cc.threshold_dbm
        idle_idx = np.flatnonzero(~busy)
        busy_l = busy.tolist()
        state = CsmaState(cw=cc.cw_min)
        rc = self._rate_controller()
        t = self.W
        while t <= self.last_t:
            self.advance_all(t)
            has = self.any_backlog()
            if busy_l[t]:
                csma_step(state, True, self.rng_access, cc, has)
                k = int(np.searchsorted(idle_idx, t))
                t = int(idle_idx[k]) if k < idle_idx.size else self.L
                continue
            if not csma_step(state, False, self.rng_access, cc, has):
                t += 1
                continue
            self.sense_until(t)
            mcs = self._select_rate(rc, t, ch)
            out = self.transmit(t, ch, mcs)
            csma_outcome(state, out.success, cc)
            self._update_rate(rc, out)
            t += self.txop + 1
        self.sense_until(min(t, self.L) - 1)

    # -- learned access (single channel, gateway, and switching variants)
    def _run_dl_access(self):
        cfg, lc = self.cfg, self.cfg.label
        w = lc.jcara_window
        rc = self._rate_controller()       # IWL for dlca_iwl, else None
        if self.mode == "off":
            ch = self.channels[0]
        elif cfg.initial_channel is not None:
            ch = int(cfg.initial_channel)
        else:
            ch = int(self.rng_chan.choice(self.channels))
        timer_ref = self.W                  # slot of the last switch evaluation
        pending_eval = self.mode == "instant"
        cache_start, cache = 0, None
        batch = 8                           # grows on idle stretches, resets after a TXOP
        t = self.W
        while t <= self.last_t:
            self.advance_all(t)
            if self.mode == "timer" and t - timer_ref >= cfg.switch.t_c_slots:
                timer_ref = t
                pending_eval = True
            if pending_eval:
                pending_eval = False
                self.sense_until(t)
                new = self._evaluate_switch()
                if new != ch:
                    td = cfg.switch.t_d_slots
                    self.rec.switches.append((t, ch, new))
                    ch = new
                    cache = None
                    if td:
                        range_fill(self.queue, td, self.full_range, self.rng_comp)
                        self._mark(self.rec.blind, t + 1, t + td + 1)
                    self.sensed_upto = t + td + 1
                    t += td + 1
                    continue
            ready = self.first_ready_slot(t)
            if ready is None:
                break
            if cache is None or not (cache_start <= t < cache_start + len(cache)):
                horizon = self.last_t + 1
                if self.mode == "timer":
                    horizon = min(horizon, timer_ref + cfg.switch.t_c_slots)
                n = min(batch, cfg.lookahead, horizon - t)
                batch = min(2 * batch, cfg.lookahead)
                self.sense_until(t - 1)
                hist = self.queue.tail(ch, w - 1)
                cache = decide_ahead(self.jm, hist, self.cols[ch][t:t + n], w)
                cache_start = t
            lo = max(t, ready) - cache_start
            hits = np.flatnonzero(cache[lo:] >= 0)
            if hits.size == 0:
                t = cache_start + len(cache)
                continue
            s = cache_start + lo + int(hits[0])
            self.advance_all(s)
            self.sense_until(s)
            mcs = int(cache[s - cache_start])
            if rc is not None:
                mcs = iwl_select(rc, self.rng_rate)
            out = self.transmit(s, ch, mcs)
            if rc is not None and out is not None:
                self._update_rate(rc, out)
            cache = None
            batch = 8
            t = s + self.txop + 1
            if self.mode == "instant":
                pending_eval = True
        self.sense_until(min(t, self.L) - 1)

    def _evaluate_switch(self):
        self.rec.evaluations += 1
        feats = queue_switch_features(self.queue, self.channels, self.cfg.label)
        return int(self.sm.predict(feats)[0])
