"""Throughput/delay accounting per interval and report emission (CSV + SVG)."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ABSENT = ""     # CSV marker for "no delivered packets"


@dataclass(frozen=True)
class IntervalRow:
    index: int
    start_slot: int
    slots: int
    bits: int
    throughput: float
    mean_delay: float | None
    delivered: int
    delay_sum: int
    successes: int
    failures: int
    switches: int
    drops: int


@dataclass
class SimReport:
    label: str
    seed: int
    run_start: int
    run_slots: int
    interval_slots: int
    intervals: list
    total_bits: int
    successes: int
    failures: int
    switches: int
    drops: int
    evaluations: int
    delivered: int
    delay_sum: int
    delays: np.ndarray | None = None
    delivery_slots: np.ndarray | None = None
    delay_devices: np.ndarray | None = None
    per_device: list = field(default_factory=list)
    record: object = None

    @property
    def throughput(self):
        """Delivered bits per mini-slot over the whole (post warm-up) run."""
        return self.total_bits / self.run_slots

    @property
    def mean_delay(self):
        """Mean over delivered packets; ``None`` when nothing was delivered."""
        return self.delay_sum / self.delivered if self.delivered else None

    def summary_row(self):
        return {"label": self.label, "seed": self.seed, "slots": self.run_slots,
                "bits": self.total_bits, "throughput": self.throughput,
                "mean_delay": self.mean_delay, "delivered": self.delivered,
                "successes": self.successes, "failures": self.failures,
                "switches": self.switches, "drops": self.drops,
                "evaluations": self.evaluations}

    def to_csv(self):
        """Per-interval rows plus a trailing summary block (deterministic text)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(INTERVAL_FIELDS)
        for r in self.intervals:
            w.writerow(_interval_cells(self.label, self.seed, r))
        w.writerow([])
        s = self.summary_row()
        w.writerow(SUMMARY_FIELDS)
        w.writerow([_fmt(s[k]) for k in SUMMARY_FIELDS])
        return buf.getvalue()


INTERVAL_FIELDS = ("label", "seed", "interval", "start_slot", "slots", "bits",
                   "throughput_bits_per_slot", "mean_delay_slots", "delivered", "delay_sum",
                   "successes", "failures", "switches", "drops")
SUMMARY_FIELDS = ("label", "seed", "slots", "bits", "throughput", "mean_delay", "delivered",
                  "successes", "failures", "switches", "drops", "evaluations")


def _fmt(v):
    if v is None:
        return ABSENT
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _interval_cells(label, seed, r):
    return [label, seed, r.index, r.start_slot, r.slots, r.bits, _fmt(r.throughput),
            _fmt(r.mean_delay), r.delivered, r.delay_sum, r.successes, r.failures, r.switches,
            r.drops]


def interval_bounds(run_start, run_slots, interval_slots):
    """[start, stop) pairs tiling the run; the last one may be partial."""
    edges = list(range(run_start, run_start + run_slots, interval_slots))
    return [(a, min(a + interval_slots, run_start + run_slots)) for a in edges]


def aggregate(outcomes, packets, interval_slots, run_start=0, run_slots=None, drops=(),
              switches=(), label="run", seed=0, n_devices=1, evaluations=0,
              record=None) -> SimReport:
    """Bin TXOP outcomes and delivered packets into fixed-length intervals.

    ``outcomes`` are TXOP outcomes sorted by start slot and binned by their end
    slot; ``packets`` are (delivery slot, delay, device) triples.  Mean delays
    cover delivered packets only and are ``None`` when nothing was delivered.
    """
    if run_slots is None:
        ends = [o.end_slot for o in outcomes] + [p[0] for p in packets]
        run_slots = (max(ends) + 1 - run_start) if ends else interval_slots
    if run_slots <= 0 or interval_slots <= 0:
        raise ValueError("run_slots and interval_slots must be positive")
    bounds = interval_bounds(run_start, run_slots, interval_slots)
    n = len(bounds)

    def bin_of(slot):
        return min(max((slot - run_start) // interval_slots, 0), n - 1)

    bits = [0] * n
    succ = [0] * n
    fail = [0] * n
    for o in outcomes:
        k = bin_of(o.end_slot)
        bits[k] += o.bits_delivered
        if o.success:
            succ[k] += 1
        else:
            fail[k] += 1
    sw = [0] * n
    for s in switches:
        sw[bin_of(s[0])] += 1
    dr = [0] * n
    for d in drops:
        dr[bin_of(d[0])] += d[1]

    pk = np.array(packets, dtype=np.int64).reshape(-1, 3)
    slots_, delays, devs = pk[:, 0], pk[:, 1], pk[:, 2]
    if delays.size and delays.min() <= 0:
        raise ValueError("delivered packets must have positive delay")
    pbin = np.clip((slots_ - run_start) // interval_slots, 0, n - 1)
    rows = []
    for k, (a, b) in enumerate(bounds):
        d = delays[pbin == k]
        dsum = int(d.sum())
        rows.append(IntervalRow(k, a, b - a, bits[k], bits[k] / (b - a),
                                dsum / d.size if d.size else None, int(d.size), dsum,
                                succ[k], fail[k], sw[k], dr[k]))

    per_device = []
    if n_devices > 1:
        dev_bits = [0] * n_devices
        for o in outcomes:
            dev_bits[o.device] += o.bits_delivered
        dev_drops = [0] * n_devices
        for d in drops:
            dev_drops[d[2] if len(d) > 2 else 0] += d[1]
        for j in range(n_devices):
            dj = delays[devs == j]
            per_device.append({"device": j, "bits": dev_bits[j],
                               "throughput": dev_bits[j] / run_slots,
                               "mean_delay": int(dj.sum()) / dj.size if dj.size else None,
                               "delivered": int(dj.size), "drops": dev_drops[j]})

    return SimReport(label, seed, run_start, run_slots, interval_slots, rows, sum(bits),
                     sum(succ), sum(fail), sum(sw), sum(dr), evaluations, int(delays.size),
                     int(delays.sum()), delays, slots_, devs, per_device, record)


def load_intervals(path):
    """Rebuild reports (without per-packet logs) from an ``intervals.csv`` file."""
    runs = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["label"], int(row["seed"]))
            d = row["mean_delay_slots"]
            runs.setdefault(key, []).append(IntervalRow(
                int(row["interval"]), int(row["start_slot"]), int(row["slots"]), int(row["bits"]),
                float(row["throughput_bits_per_slot"]), float(d) if d != ABSENT else None,
                int(row["delivered"]), int(row["delay_sum"]), int(row["successes"]),
                int(row["failures"]), int(row["switches"]), int(row["drops"])))
    reports = []
    for (label, seed), rows in runs.items():
        rows.sort(key=lambda r: r.index)
        reports.append(SimReport(
            label, seed, rows[0].start_slot, sum(r.slots for r in rows), rows[0].slots, rows,
            sum(r.bits for r in rows), sum(r.successes for r in rows),
            sum(r.failures for r in rows), sum(r.switches for r in rows),
            sum(r.drops for r in rows), 0, sum(r.delivered for r in rows),
            sum(r.delay_sum for r in rows)))
    return reports


# ---------------------------------------------------------------- emission

def group_reports(reports):
    groups = {}
    for r in reports:
        groups.setdefault(r.label, []).append(r)
    return groups


def interval_stats(reports):
    """Per-interval mean and 3-sigma half-width (population std) across seeds."""
    n = min(len(r.intervals) for r in reports)
    thr = np.array([[r.intervals[k].throughput for k in range(n)] for r in reports])
    dl = np.array([[np.nan if r.intervals[k].mean_delay is None else r.intervals[k].mean_delay
                    for k in range(n)] for r in reports])
    out = {"throughput": (thr.mean(axis=0), 3.0 * thr.std(axis=0))}
    with np.errstate(all="ignore"):
        valid = ~np.isnan(dl)
        cnt = valid.sum(axis=0)
        mean = np.where(cnt > 0, np.nansum(dl, axis=0) / np.maximum(cnt, 1), np.nan)
        var = np.where(cnt > 0, np.nansum((dl - mean) ** 2, axis=0) / np.maximum(cnt, 1), np.nan)
    out["mean_delay"] = (mean, 3.0 * np.sqrt(var))
    return out


def summary_table(reports):
    """Rows per run followed by one mean/std row per label."""
    rows = [r.summary_row() for r in reports]
    for label, group in group_reports(reports).items():
        thr = np.array([r.throughput for r in group])
        dl = np.array([r.mean_delay for r in group if r.mean_delay is not None])
        rows.append({"label": label, "seed": "mean", "throughput": float(thr.mean()),
                     "mean_delay": float(dl.mean()) if dl.size else None,
                     "bits": int(sum(r.total_bits for r in group)),
                     "slots": int(sum(r.run_slots for r in group)),
                     "delivered": sum(r.delivered for r in group),
                     "successes": sum(r.successes for r in group),
                     "failures": sum(r.failures for r in group),
                     "switches": sum(r.switches for r in group),
                     "drops": sum(r.drops for r in group),
                     "evaluations": sum(r.evaluations for r in group)})
        rows.append({"label": label, "seed": "std", "throughput": float(thr.std()),
                     "mean_delay": float(dl.std()) if dl.size else None})
    return rows


def format_summary(reports):
    """Plain-text table for terminals."""
    lines = [f"{'label':<18}{'seed':>6}{'throughput':>14}{'mean_delay':>14}"
             f"{'success':>9}{'fail':>7}{'drops':>8}"]
    for row in summary_table(reports):
        d = row.get("mean_delay")
        lines.append(f"{row['label']:<18}{str(row['seed']):>6}{row['throughput']:>14.4f}"
                     f"{'-' if d is None else format(d, '.2f'):>14}"
                     f"{row.get('successes', ''):>9}{row.get('failures', ''):>7}"
                     f"{row.get('drops', ''):>8}")
    return "\n".join(lines)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_report(reports, out_dir):
    """Write summary.csv, intervals.csv, devices.csv and plots/*.svg; return the paths."""
    if not reports:
        raise ValueError("emit_report needs at least one report")
    out = Path(out_dir)
    try:
        (out / "plots").mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    reports = sorted(reports, key=lambda r: (r.label, r.seed))
    paths = {}
    paths["summary"] = out / "summary.csv"
    _write_csv(paths["summary"], SUMMARY_FIELDS,
               [[_fmt(row.get(k)) for k in SUMMARY_FIELDS] for row in summary_table(reports)])
    paths["intervals"] = out / "intervals.csv"
    _write_csv(paths["intervals"], INTERVAL_FIELDS,
               [_interval_cells(r.label, r.seed, row) for r in reports for row in r.intervals])
    dev_rows = [[r.label, r.seed, d["device"], d["bits"], _fmt(d["throughput"]),
                 _fmt(d["mean_delay"]), d["delivered"], d["drops"]]
                for r in reports for d in r.per_device]
    if dev_rows:
        paths["devices"] = out / "devices.csv"
        _write_csv(paths["devices"], ("label", "seed", "device", "bits", "throughput",
                                      "mean_delay", "delivered", "drops"), dev_rows)
    paths.update(_plots(reports, out / "plots"))
    return paths


def _plots(reports, plot_dir):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stats = {label: interval_stats(group) for label, group in group_reports(reports).items()}
    paths = {}
    for metric, ylabel in (("throughput", "throughput (bits / mini-slot)"),
                           ("mean_delay", "mean delay (mini-slots)")):
        with matplotlib.rc_context({"svg.hashsalt": "dlmac", "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            for label, st in stats.items():
                mean, err = st[metric]
                xs = np.arange(1, mean.size + 1)
                ax.errorbar(xs, mean, yerr=err, marker="o", capsize=3, label=label)
            ax.set_xlabel("time interval")
            ax.set_ylabel(ylabel)
            ax.legend(fontsize="small")
            ax.grid(alpha=0.3)
            path = plot_dir / f"{metric}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
        paths[f"plot_{metric}"] = path
    return paths
