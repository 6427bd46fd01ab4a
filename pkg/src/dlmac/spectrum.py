"""RSSI trace ingestion, mini-slot/channel preprocessing and synthetic traces.

Raw traces hold one column per 1 MHz sub-band (sub-band ``n`` sits at
``2402 + n`` MHz) sampled every ``sample_interval_us``.  Processed traces hold
one column per 20 MHz Wi-Fi channel sampled every 9 us mini-slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyOutputError, InsufficientDataError, TraceFormatError

SAMPLE_INTERVAL_US = 100
SLOT_US = 9
UPSAMPLE = SAMPLE_INTERVAL_US // SLOT_US  # 11
CHANNEL_WIDTH_SUBBANDS = 21
MAX_SUBBANDS = 79
ALL_CHANNELS = tuple(range(1, 14))
DEFAULT_CHANNELS = (1, 6, 11)


def subband_freq_mhz(n):
    return 2402 + n


def channel_center_mhz(i):
    return 2412 + 5 * (i - 1)


def channel_subbands(i):
    """Sub-band indices (inclusive range) covered by Wi-Fi channel ``i``."""
    center = channel_center_mhz(i) - 2402
    return center - 10, center + 10


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RawTrace:
    samples: np.ndarray
    sample_interval_us: float = SAMPLE_INTERVAL_US

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.ndim != 2:
            raise TraceFormatError(f"expected a 2-D sample matrix, got {s.ndim}-D")
        if not np.all(np.isfinite(s)):
            raise TraceFormatError("non-finite RSSI value")
        if s.shape[1] < CHANNEL_WIDTH_SUBBANDS:
            raise TraceFormatError(
                f"need at least {CHANNEL_WIDTH_SUBBANDS} sub-bands, got {s.shape[1]}")
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_subbands(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class ProcessedTrace:
    samples: np.ndarray
    channels: tuple = ALL_CHANNELS
    slot_us: float = SLOT_US
    partial_channels: tuple = ()
    omitted_channels: tuple = ()

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.ndim == 1:
            s = _frozen(s[:, None])
        if s.ndim != 2 or s.shape[1] != len(self.channels):
            raise TraceFormatError(
                f"sample matrix shape {s.shape} does not match {len(self.channels)} channels")
        if not np.all(np.isfinite(s)):
            raise TraceFormatError("non-finite RSSI value")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    def __len__(self):
        return self.samples.shape[0]

    def column(self, channel):
        try:
            idx = self.channels.index(int(channel))
        except ValueError:
            raise KeyError(f"channel {channel} not in trace (has {self.channels})") from None
        return self.samples[:, idx]

    def select(self, channels):
        cols = [self.channels.index(int(c)) for c in channels]
        return ProcessedTrace(self.samples[:, cols], tuple(channels), self.slot_us)

    def slice(self, start, stop=None):
        return ProcessedTrace(self.samples[start:stop], self.channels, self.slot_us)

    @property
    def range_dbm(self):
        return float(self.samples.min()), float(self.samples.max())


# ---------------------------------------------------------------- file I/O

def _parse_header(line, lineno):
    if not line.startswith("#"):
        raise TraceFormatError("missing '# key=value' header", lineno)
    fields = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise TraceFormatError(f"malformed header token {tok!r}", lineno)
        k, v = tok.split("=", 1)
        fields[k] = v
    return fields


def _read_rows(fh, width, first_lineno):
    rows = []
    for lineno, line in enumerate(fh, start=first_lineno):
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise TraceFormatError(f"expected {width} values, got {len(cells)}", lineno)
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise TraceFormatError("non-numeric cell", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise TraceFormatError("non-finite value", lineno)
        rows.append(row)
    return rows


def load_raw_trace(path) -> RawTrace:
    with open(path, encoding="utf-8") as fh:
        header = _parse_header(fh.readline().strip(), 1)
        try:
            ts = float(header["ts_us"])
            nbands = int(header["nbands"])
        except (KeyError, ValueError):
            raise TraceFormatError("header must carry ts_us=<int> nbands=<int>", 1) from None
        rows = _read_rows(fh, nbands, 2)
    if not rows:
        raise TraceFormatError("trace has no samples", 2)
    return RawTrace(np.array(rows), ts)


def load_processed_trace(path) -> ProcessedTrace:
    with open(path, encoding="utf-8") as fh:
        header = _parse_header(fh.readline().strip(), 1)
        try:
            slot = float(header["slot_us"])
            n = int(header["channels"])
        except (KeyError, ValueError):
            raise TraceFormatError("header must carry slot_us=<int> channels=<int>", 1) from None
        if "ids" in header:
            ids = tuple(int(c) for c in header["ids"].split(","))
        else:
            ids = tuple(range(1, n + 1))
        if len(ids) != n:
            raise TraceFormatError("ids list length differs from channels", 1)
        rows = _read_rows(fh, n, 2)
    if not rows:
        raise TraceFormatError("trace has no samples", 2)
    return ProcessedTrace(np.array(rows), ids, slot)


def _fmt_num(x):
    return f"{x:g}" if float(x).is_integer() else repr(float(x))


def save_raw_trace(trace: RawTrace, path):
    header = f"ts_us={_fmt_num(trace.sample_interval_us)} nbands={trace.n_subbands}"
    np.savetxt(path, trace.samples, fmt="%.17g", delimiter=",", header=header, comments="# ")


def save_processed_trace(trace: ProcessedTrace, path):
    ids = ",".join(str(c) for c in trace.channels)
    header = f"slot_us={_fmt_num(trace.slot_us)} channels={len(trace.channels)} ids={ids}"
    np.savetxt(path, trace.samples, fmt="%.17g", delimiter=",", header=header, comments="# ")


# ---------------------------------------------------------- preprocessing

def interpolate_at(raw: RawTrace, times_us):
    """Piecewise-linear value of every sub-band at arbitrary times (us from t0).

    Times past the last sample hold the last value.
    """
    t = np.atleast_1d(np.asarray(times_us, dtype=np.float64))
    pos = t / raw.sample_interval_us
    left = np.clip(np.floor(pos).astype(np.int64), 0, raw.n_samples - 1)
    right = np.minimum(left + 1, raw.n_samples - 1)
    frac = np.where(right > left, pos - left, 0.0)[:, None]
    x1 = raw.samples[left]
    x2 = raw.samples[right]
    return (x2 - x1) * frac + x1


def _upsample(samples, factor):
    """Rows l*factor + j hold x_l + (x_{l+1} - x_l) * j / factor; the last row is held."""
    nxt = np.vstack([samples[1:], samples[-1:]])
    frac = (np.arange(factor, dtype=np.float64) / factor)[None, :, None]
    out = (nxt - samples)[:, None, :] * frac + samples[:, None, :]
    return out.reshape(-1, samples.shape[1])


def interpolate_time(raw: RawTrace, factor: int = UPSAMPLE) -> RawTrace:
    """Up-sample every sub-band onto the mini-slot grid (``factor`` rows per sample)."""
    if raw.n_samples < 2:
        raise InsufficientDataError("interpolation needs at least 2 samples")
    return RawTrace(_upsample(raw.samples, factor), raw.sample_interval_us / factor)


def channel_plan(n_subbands, channels=ALL_CHANNELS, min_coverage=CHANNEL_WIDTH_SUBBANDS):
    """Resolve which channels can be formed from ``n_subbands`` columns.

    Returns ``(plan, partial, omitted)`` where ``plan`` maps channel to a
    ``(lo, hi)`` column range.  Channels with fewer than ``min_coverage``
    available sub-bands are omitted.
    """
    plan, partial, omitted = {}, [], []
    for ch in channels:
        lo, hi = channel_subbands(ch)
        lo_c, hi_c = max(lo, 0), min(hi, n_subbands - 1)
        covered = hi_c - lo_c + 1
        if covered < min_coverage:
            omitted.append(ch)
            continue
        if covered < CHANNEL_WIDTH_SUBBANDS:
            partial.append(ch)
        plan[ch] = (lo_c, hi_c)
    return plan, tuple(partial), tuple(omitted)


def _average(block, avg_domain):
    if avg_domain == "db":
        return block.mean(axis=1)
    if avg_domain == "linear":
        return 10.0 * np.log10(np.mean(10.0 ** (block / 10.0), axis=1))
    raise ValueError(f"avg_domain must be 'db' or 'linear', got {avg_domain!r}")


def _map_samples(samples, plan, avg_domain):
    cols = [_average(samples[:, lo:hi + 1], avg_domain) for lo, hi in plan.values()]
    return np.column_stack(cols)


def map_to_channels(upsampled: RawTrace, channels=ALL_CHANNELS, avg_domain="db",
                    min_coverage=17) -> ProcessedTrace:
    """Average the sub-bands under each Wi-Fi channel into one column.

    A 79 sub-band capture stops at 2480 MHz, two sub-bands short of channel
    13; channels missing at most ``21 - min_coverage`` edge sub-bands are
    averaged over what is available and listed in ``partial_channels``.
    Pass ``min_coverage=21`` for strict full-span coverage.
    """
    plan, partial, omitted = channel_plan(upsampled.n_subbands, channels, min_coverage)
    if not plan:
        raise EmptyOutputError("no requested channel is covered by the available sub-bands")
    out = _map_samples(upsampled.samples, plan, avg_domain)
    return ProcessedTrace(out, tuple(plan), SLOT_US, partial, omitted)


def preprocess(raw: RawTrace, channels=ALL_CHANNELS, avg_domain="db", min_coverage=17,
               chunk=20000) -> ProcessedTrace:
    """interpolate_time followed by map_to_channels, streamed in row chunks.

    Equal to composing the two operations; chunking only bounds memory.
    """
    if raw.n_samples < 2:
        raise InsufficientDataError("interpolation needs at least 2 samples")
    plan, partial, omitted = channel_plan(raw.n_subbands, channels, min_coverage)
    if not plan:
        raise EmptyOutputError("no requested channel is covered by the available sub-bands")
    parts = []
    s = raw.samples
    for start in range(0, raw.n_samples, chunk):
        stop = min(start + chunk, raw.n_samples)
        block = s[start:min(stop + 1, raw.n_samples)]
        up = _upsample(block, UPSAMPLE)
        if stop < raw.n_samples:
            up = up[: (stop - start) * UPSAMPLE]
        parts.append(_map_samples(up, plan, avg_domain))
    return ProcessedTrace(np.vstack(parts), tuple(plan), SLOT_US, partial, omitted)


# --------------------------------------------------------------- synthesis

PATTERNS = ("periodic-burst", "csma-like", "frequency-hopping")


@dataclass(frozen=True)
class Interferer:
    """One coexisting transmitter.

    Durations are in raw samples.  ``period``/``duty`` mean: exact on/off
    cycle for periodic bursts; mean cycle length and on-fraction for the
    CSMA-like random on/off process; dwell count per hop window and per-dwell
    activity probability for frequency hopping (``dwell`` samples per hop,
    ``hop_width`` sub-bands occupied per hop).
    """
    pattern: str
    subbands: tuple
    active_power_dbm: float = -60.0
    idle_floor_dbm: float = -120.0
    period: float = 2400
    duty: float = 0.5
    phase: int = 0
    dwell: int = 1
    hop_width: int = 1

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}; expected one of {PATTERNS}")
        if not 0.0 < self.duty <= 1.0:
            raise ValueError("duty must lie in (0, 1]")
        if not self.active_power_dbm > self.idle_floor_dbm:
            raise ValueError("active power must exceed the idle floor")
        if self.period <= 0 or self.dwell < 1 or self.hop_width < 1:
            raise ValueError("period, dwell and hop_width must be positive")
        lo, hi = self.subbands
        if not 0 <= lo <= hi:
            raise ValueError(f"bad sub-band range {self.subbands}")


@dataclass(frozen=True)
class SynthScenario:
    duration_slots: int
    interferers: tuple = ()
    noise_floor_dbm: float = -95.0
    noise_std_db: float = 0.0
    n_subbands: int = MAX_SUBBANDS
    seed: int = 0

    def __post_init__(self):
        if self.duration_slots < 1:
            raise ValueError("duration must be positive")
        if self.n_subbands < CHANNEL_WIDTH_SUBBANDS:
            raise ValueError(f"need at least {CHANNEL_WIDTH_SUBBANDS} sub-bands")
        object.__setattr__(self, "interferers", tuple(self.interferers))


def periodic_schedule(n, period, duty, phase=0):
    on_len = max(1, int(round(duty * period)))
    k = (np.arange(n) + phase) % int(period)
    return k < on_len


def _csma_schedule(n, period, duty, rng):
    mean_on = max(duty * period, 1.0)
    mean_off = (1.0 - duty) * period
    out = np.zeros(n, dtype=bool)
    if mean_off <= 0:
        out[:] = True
        return out
    pos = int(rng.integers(0, max(int(mean_off), 1)))
    while pos < n:
        on = int(rng.geometric(1.0 / mean_on))
        out[pos:pos + on] = True
        pos += on + int(rng.geometric(1.0 / max(mean_off, 1.0)))
    return out


def _hopping_activity(n, itf: Interferer, n_subbands, rng):
    """Returns (active, lo_band) per sample for a hopping interferer."""
    lo, hi = itf.subbands
    hi = min(hi, n_subbands - 1)
    n_dwell = -(-n // itf.dwell)
    span = max(hi - lo - itf.hop_width + 2, 1)
    starts = lo + rng.integers(0, span, size=n_dwell)
    active = rng.random(n_dwell) < itf.duty
    return np.repeat(active, itf.dwell)[:n], np.repeat(starts, itf.dwell)[:n]


def dbm_to_mw(x):
    return 10.0 ** (np.asarray(x, dtype=np.float64) / 10.0)


def mw_to_dbm(p):
    return 10.0 * np.log10(p)


def synthesize_trace(scenario: SynthScenario) -> RawTrace:
    """Power-sum the noise floor and every interferer into a raw trace."""
    n, nb = scenario.duration_slots, scenario.n_subbands
    root = np.random.SeedSequence(scenario.seed)
    noise_ss, *itf_ss = root.spawn(1 + len(scenario.interferers))
    if scenario.noise_std_db > 0:
        nrng = np.random.default_rng(noise_ss)
        noise_db = scenario.noise_floor_dbm + scenario.noise_std_db * nrng.standard_normal((n, nb))
    else:
        noise_db = np.full((n, nb), float(scenario.noise_floor_dbm))
    if not scenario.interferers:
        # skip the mW round trip so an empty scenario is exactly the floor
        return RawTrace(noise_db, SAMPLE_INTERVAL_US)
    power = dbm_to_mw(noise_db)
    for itf, ss in zip(scenario.interferers, itf_ss):
        rng = np.random.default_rng(ss)
        on_mw, off_mw = dbm_to_mw(itf.active_power_dbm), dbm_to_mw(itf.idle_floor_dbm)
        lo, hi = itf.subbands
        hi = min(hi, nb - 1)
        if itf.pattern == "frequency-hopping":
            active, band = _hopping_activity(n, itf, nb, rng)
            level = np.where(active, on_mw, off_mw)
            for w in range(itf.hop_width):
                cols = np.minimum(band + w, hi)
                power[np.arange(n), cols] += level
        else:
            if itf.pattern == "periodic-burst":
                active = periodic_schedule(n, itf.period, itf.duty, itf.phase)
            else:
                active = _csma_schedule(n, itf.period, itf.duty, rng)
            level = np.where(active, on_mw, off_mw)
            power[:, lo:hi + 1] += level[:, None]
    return RawTrace(mw_to_dbm(power), SAMPLE_INTERVAL_US)
