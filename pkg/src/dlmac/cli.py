"""Command-line entry point: ``dlmac <subcommand> [--config PATH] [--out DIR] ...``.

Failures print one line ``error: <kind>: <message>`` on stderr and exit with
the code listed in ``EXIT_CODES``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import errors
from .config import load_config
from .experiments import SCENARIOS, jcara_model, label_jcara_replay, merge_datasets, switch_model
from .ladder import label_jcara, label_switch, load_dataset, save_dataset
from .neuralkit import load_model, save_model, train
from .simcore import check_models, run
from .spectrum import (load_processed_trace, load_raw_trace, preprocess,
                       save_processed_trace, save_raw_trace, synthesize_trace)
from .telemetry import emit_report, format_summary, load_intervals

log = logging.getLogger("dlmac")

OUT_ENV = "DLMAC_OUT"
EXIT_CODES = {"config": 2, "missing-artifact": 3, "stale-normalization": 4, "schema": 5,
              "insufficient-data": 6, "trace-format": 7, "checksum": 8, "io": 9}


def default_out():
    return Path(os.environ.get(OUT_ENV, "dlmac-out"))


# ------------------------------------------------------------ subcommands

def cmd_gen_trace(cfg, args):
    kind = cfg["trace.scenario"]
    if kind not in SCENARIOS:
        raise errors.ConfigError(f"trace.scenario must be one of {tuple(SCENARIOS)}")
    chans = cfg["trace.channels"]
    scen = SCENARIOS[kind](cfg["trace.samples"], cfg["trace.seed"],
                           chans if kind == "multi" else chans[0])
    raw = synthesize_trace(scen)
    path = args.out / "trace_raw.csv"
    save_raw_trace(raw, path)
    print(f"wrote {path} ({raw.n_samples} samples x {raw.n_subbands} sub-bands)")
    return path


def _input(cfg, args, key):
    p = Path(args.input) if args.input else cfg.path(key)
    if p is None:
        raise errors.MissingArtifactError(f"no input given (--input or {key})")
    if not p.exists():
        raise errors.MissingArtifactError(f"input {p} does not exist")
    return p


def cmd_preprocess(cfg, args):
    raw = load_raw_trace(_input(cfg, args, "trace.path"))
    tr = preprocess(raw, channels=cfg["trace.channels"], avg_domain=cfg["preprocess.avg_domain"],
                    min_coverage=cfg["preprocess.min_coverage"])
    path = args.out / "trace.csv"
    save_processed_trace(tr, path)
    print(f"wrote {path} ({len(tr)} slots, channels {tr.channels})")
    return path


def _processed(path):
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
    if "ts_us=" in head:
        return preprocess(load_raw_trace(path))
    return load_processed_trace(path)


def cmd_label(cfg, args):
    tr = _processed(_input(cfg, args, "trace.path"))
    lc = cfg.label_config()
    if cfg["label.task"] == "jcara":
        ds = label_jcara(tr, cfg["label.channel"], lc)
        if cfg["label.replay"]:
            ds = merge_datasets(ds, label_jcara_replay(tr, cfg["label.channel"], lc,
                                                       seed=cfg["train.seed"]))
    else:
        ds = label_switch(tr, cfg["switch.channels"], lc)
    path = args.out / f"dataset_{cfg['label.task']}.csv"
    save_dataset(ds, path)
    counts = np.unique(ds.labels, return_counts=True)
    print(f"wrote {path} ({ds.labels.size} samples; labels "
          + ", ".join(f"{int(v)}:{int(c)}" for v, c in zip(*counts)) + ")")
    return path


def cmd_train(cfg, args):
    ds = load_dataset(_input(cfg, args, "train.dataset"))
    lc = ds.cfg
    if ds.features.ndim == 3:
        if cfg["train.arch"] == "lstm":
            model = jcara_model("lstm", lc, cfg["train.seed"], cfg["train.lstm_hidden"],
                                cfg["train.dense_hidden"])
        else:
            model = jcara_model("dnn", lc, cfg["train.seed"])
        task = "jcara"
    else:
        model = switch_model(ds.channels, lc, cfg["train.seed"])
        task = "switch"
    model.meta.update({"channels": list(ds.channels), "samples": int(ds.labels.size)})
    if ds.value_range is not None:
        model.meta["trace_range"] = list(ds.value_range)
    model, tlog = train(model, ds.features, ds.labels, cfg.train_config())
    path = args.out / f"model_{task}.dlm"
    digest = save_model(model, path)
    with open(args.out / f"train_log_{task}.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = list(tlog.epochs[0])
        w.writerow(keys)
        for row in tlog.epochs:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])
    best = tlog.epochs[tlog.best_epoch]
    print(f"wrote {path} sha256={digest} best_epoch={tlog.best_epoch} "
          f"val_loss={best['val_loss']:.4f} val_acc={best['val_acc']:.4f}")
    return path


def _load_models(cfg, trace):
    models = {}
    lc = cfg.label_config()
    p = cfg.path("sim.jcara_model")
    if p is not None:
        if not p.exists():
            raise errors.MissingArtifactError(f"sim.jcara_model points at missing file {p}")
        models["jcara"] = load_model(p, expect_task="jcara")
    p = cfg.path("sim.switch_model")
    if p is not None:
        if not p.exists():
            raise errors.MissingArtifactError(f"sim.switch_model points at missing file {p}")
        models["switch"] = load_model(p, expect_task="switch")
    jm = models.get("jcara")
    if jm is not None:
        if jm.norm is None:
            raise errors.StaleNormalizationError("access/rate model has no normalization range")
        lo, hi = jm.norm
        x = trace.samples
        clipped = float(np.mean((x < lo - 1.0) | (x > hi + 1.0)))
        if clipped > cfg["sim.max_clip_fraction"]:
            raise errors.StaleNormalizationError(
                f"{clipped:.1%} of trace values fall outside the model's training range "
                f"[{lo:.1f}, {hi:.1f}] dBm; retrain on matching data")
        if int(np.prod(jm.input_shape)) != lc.jcara_window:
            raise errors.ConfigError("access/rate model window does not match label.k1")
    return models


def _run_all(cfg, args, points):
    path = _input(cfg, args, "sim.trace")
    trace = _processed(path)
    models = _load_models(cfg, trace)
    base = args.seed if args.seed is not None else 0
    seeds = [base + k for k in range(cfg["sim.seeds"])]
    jobs = [(cfg.run_config(policy, point), seed)
            for point in points for policy in cfg["sim.policies"] for seed in seeds]
    # validate every configuration before spending time on any run
    for rc, _ in jobs[::len(seeds)]:
        check_models(rc, trace, models)

    def one(job):
        rc, seed = job
        return run(trace, rc, seed, models)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(one, jobs))
    else:
        reports = [one(j) for j in jobs]
    for r in reports:
        r.record = None
    paths = emit_report(reports, args.out)
    print(format_summary(sorted(reports, key=lambda r: (r.label, r.seed))))
    print(f"wrote {paths['summary']} and {paths['intervals']} ({len(reports)} runs)")
    return reports


def cmd_simulate(cfg, args):
    return _run_all(cfg, args, [{}])


def cmd_sweep(cfg, args):
    if not cfg.sweep:
        raise errors.ConfigError("sweep needs at least one [sweep] axis")
    return _run_all(cfg, args, cfg.sweep_points())


def cmd_report(cfg, args):
    inputs = args.inputs or ([args.input] if args.input else [])
    if not inputs:
        raise errors.MissingArtifactError("report needs one or more --input directories")
    reports = []
    for d in inputs:
        p = Path(d) / "intervals.csv" if Path(d).is_dir() else Path(d)
        if not p.exists():
            raise errors.MissingArtifactError(f"{p} does not exist")
        reports.extend(load_intervals(p))
    if not reports:
        raise errors.EmptyOutputError("no runs found in the given inputs")
    paths = emit_report(reports, args.out)
    print(format_summary(sorted(reports, key=lambda r: (r.label, r.seed))))
    print(f"wrote {paths['summary']}")
    return reports


COMMANDS = {"gen-trace": cmd_gen_trace, "preprocess": cmd_preprocess, "label": cmd_label,
            "train": cmd_train, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="dlmac", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI experiment config")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./dlmac-out)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for runs")
        p.add_argument("--input", help="input file for this step")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "report":
            p.add_argument("inputs", nargs="*", help="run directories or intervals.csv files")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides += [f"trace.seed={args.seed}", f"train.seed={args.seed}"]
        cfg = load_config(args.config, overrides)
        if args.jobs < 1:
            raise errors.ConfigError("--jobs must be >= 1")
        args.out = Path(args.out) if args.out else default_out()
        try:
            args.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise errors.OutputError(f"cannot create {args.out}: {exc}") from None
        COMMANDS[args.command](cfg, args)
    except errors.DlmacError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.kind, 1)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
