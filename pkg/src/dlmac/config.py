"""Flat ``section.key`` experiment configuration read from INI-style text.

Every tunable has a default here; unknown keys are schema violations.  Paths
are resolved relative to the config file's directory.
"""
from __future__ import annotations

import configparser
import itertools
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, MissingArtifactError
from .ladder import LabelConfig
from .neuralkit import TrainConfig
from .policies import POLICIES, CsmaConfig, SwitchConfig
from .simcore import RunConfig

DEFAULTS = {
    # trace source and preprocessing
    "trace.path": "",
    "trace.scenario": "single",
    "trace.samples": 30000,
    "trace.seed": 0,
    "trace.channels": (6,),
    "preprocess.avg_domain": "db",
    "preprocess.min_coverage": 17,
    # labeling
    "label.txop_slots": 120,
    "label.k1": 3,
    "label.k2": 5,
    "label.k3": 2,
    "label.p_r_dbm": -65.0,
    "label.sinr_floor_db": -20.0,
    "label.stride": 120,
    "label.channel": 6,
    "label.task": "jcara",
    "label.replay": False,
    # training
    "train.arch": "lstm",
    "train.lstm_hidden": 128,
    "train.dense_hidden": 64,
    "train.learning_rate": 1e-3,
    "train.beta1": 0.9,
    "train.beta2": 0.999,
    "train.eps": 1e-8,
    "train.batch_size": 64,
    "train.max_epochs": 100,
    "train.patience": 10,
    "train.validation_fraction": 0.2,
    "train.seed": 0,
    "train.class_weights": True,
    "train.dataset": "",
    # traffic
    "traffic.lambda": 0.18,
    "traffic.payload_bytes": 1500,
    "traffic.buffer": 10,
    # access and rate baselines
    "csma.threshold_dbm": -75.0,
    "csma.difs_slots": 4,
    "csma.cw_min": 32,
    "csma.cw_max": 1024,
    "arf.n_up": 10,
    "arf.n_down": 2,
    "iwl.epsilon": 0.1,
    "iwl.ewma": 0.25,
    # channel switching
    "switch.mode": "off",
    "switch.t_c": 1200,
    "switch.t_d": 20,
    "switch.channels": (1, 6, 11),
    # simulation
    "sim.trace": "",
    "sim.policies": ("dlmac",),
    "sim.channel": 6,
    "sim.seeds": 10,
    "sim.interval_slots": 111_111,
    "sim.gateway_members": 0,
    "sim.jcara_model": "",
    "sim.switch_model": "",
    "sim.lookahead": 256,
    "sim.range": (),
    "sim.max_clip_fraction": 0.05,
}

TUPLE_INT = {"trace.channels", "switch.channels"}
TUPLE_FLOAT = {"sim.range"}
TUPLE_STR = {"sim.policies"}
PATH_KEYS = {"trace.path", "sim.trace", "sim.jcara_model", "sim.switch_model", "train.dataset"}
SWEEPABLE = {k for k, v in DEFAULTS.items()
             if k.split(".")[0] in ("switch", "traffic", "csma", "arf", "iwl", "sim", "label")
             and k not in PATH_KEYS}


def _cast(key, raw):
    default = DEFAULTS[key]
    text = str(raw).strip()
    try:
        if key in TUPLE_INT:
            return tuple(int(v) for v in text.split(",") if v.strip())
        if key in TUPLE_FLOAT:
            return tuple(float(v) for v in text.split(",") if v.strip())
        if key in TUPLE_STR:
            return tuple(v.strip() for v in text.split(",") if v.strip())
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {type(default).__name__}") from None


class ExperimentConfig:
    """Resolved key/value settings plus sweep axes."""

    def __init__(self, values=None, sweep=None, base_dir="."):
        self.values = dict(DEFAULTS)
        self.base_dir = Path(base_dir)
        self.sweep = {}
        for k, v in (values or {}).items():
            self.set(k, v)
        for k, v in (sweep or {}).items():
            self.add_sweep(k, v)
        self.validate()

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _cast(key, value) if isinstance(value, str) else value

    def add_sweep(self, key, raw):
        if key not in SWEEPABLE:
            raise ConfigError(f"{key!r} cannot be swept")
        items = raw.split(",") if isinstance(raw, str) else list(raw)
        vals = [_cast(key, v) if isinstance(v, str) else v for v in items
                if not (isinstance(v, str) and not v.strip())]
        if not vals:
            raise ConfigError(f"sweep axis {key!r} is empty")
        self.sweep[key] = vals

    def __getitem__(self, key):
        return self.values[key]

    def path(self, key):
        v = self.values[key]
        if not v:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        v = self.values
        bad = [p for p in v["sim.policies"] if p not in POLICIES]
        if bad:
            raise ConfigError(f"unknown policies {bad}; expected members of {POLICIES}")
        if v["switch.mode"] not in ("off", "timer", "instant"):
            raise ConfigError(f"switch.mode must be off, timer or instant, not {v['switch.mode']!r}")
        if v["train.arch"] not in ("lstm", "dnn"):
            raise ConfigError("train.arch must be lstm or dnn")
        if v["label.task"] not in ("jcara", "switch"):
            raise ConfigError("label.task must be jcara or switch")
        if v["preprocess.avg_domain"] not in ("db", "linear"):
            raise ConfigError("preprocess.avg_domain must be db or linear")
        if v["sim.seeds"] < 1:
            raise ConfigError("sim.seeds must be >= 1")
        if v["sim.range"] and len(v["sim.range"]) != 2:
            raise ConfigError("sim.range takes two values: lo,hi")
        try:
            self.label_config()
            self.train_config()
            self.run_config(v["sim.policies"][0] if v["sim.policies"] else "dlmac")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def require_files(self, *keys):
        """Referenced files must exist when a subcommand is about to use them."""
        for key in keys:
            p = self.path(key)
            if p is None:
                raise MissingArtifactError(f"{key} is not set")
            if not p.exists():
                raise MissingArtifactError(f"{key} points at missing file {p}")

    # -- typed views
    def label_config(self):
        v = self.values
        return LabelConfig(txop_slots=v["label.txop_slots"], k1=v["label.k1"], k2=v["label.k2"],
                           k3=v["label.k3"], p_r_dbm=v["label.p_r_dbm"],
                           sinr_floor_db=v["label.sinr_floor_db"], stride=v["label.stride"])

    def train_config(self):
        v = self.values
        return TrainConfig(learning_rate=v["train.learning_rate"], beta1=v["train.beta1"],
                           beta2=v["train.beta2"], eps=v["train.eps"],
                           batch_size=v["train.batch_size"], max_epochs=v["train.max_epochs"],
                           early_stop_patience=v["train.patience"],
                           validation_fraction=v["train.validation_fraction"],
                           seed=v["train.seed"], class_weights=v["train.class_weights"])

    def run_config(self, policy, overrides=None):
        v = dict(self.values)
        v.update(overrides or {})
        tag = policy
        if overrides:
            tag += "[" + ",".join(f"{k.split('.')[-1]}={_show(val)}"
                                  for k, val in sorted(overrides.items())) + "]"
        return RunConfig(
            policy=policy, channel=v["sim.channel"], lam=v["traffic.lambda"],
            payload_bits=8 * v["traffic.payload_bytes"], buffer_capacity=v["traffic.buffer"],
            interval_slots=v["sim.interval_slots"], gateway_members=v["sim.gateway_members"],
            lookahead=v["sim.lookahead"],
            label=replace(self.label_config(), **_label_overrides(v)),
            csma=CsmaConfig(v["csma.threshold_dbm"], v["csma.difs_slots"], v["csma.cw_min"],
                            v["csma.cw_max"]),
            switch=SwitchConfig(v["switch.t_c"], v["switch.t_d"], tuple(v["switch.channels"]),
                                v["switch.mode"]),
            arf_n_up=v["arf.n_up"], arf_n_down=v["arf.n_down"], iwl_epsilon=v["iwl.epsilon"],
            iwl_ewma=v["iwl.ewma"],
            compensation_range=tuple(v["sim.range"]) if v["sim.range"] else None, tag=tag)

    def sweep_points(self):
        """Cartesian product of the sweep axes as override dicts (one empty dict if none)."""
        keys = sorted(self.sweep)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.sweep[k] for k in keys))]


def _label_overrides(v):
    return {"txop_slots": v["label.txop_slots"], "k1": v["label.k1"], "k2": v["label.k2"],
            "k3": v["label.k3"], "p_r_dbm": v["label.p_r_dbm"],
            "sinr_floor_db": v["label.sinr_floor_db"], "stride": v["label.stride"]}


def _show(val):
    if isinstance(val, tuple):
        return "/".join(str(x) for x in val)
    return str(val)


def load_config(path=None, overrides=()):
    """Read an INI file; ``overrides`` are ``key=value`` strings applied last."""
    values, sweep = {}, {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"config file {path} does not exist")
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in cp.sections():
            for key, raw in cp.items(section):
                if section == "sweep":
                    sweep[key] = raw
                else:
                    values[f"{section}.{key}"] = raw
        base = path.parent
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, raw = item.split("=", 1)
        if k.startswith("sweep."):
            sweep[k[6:]] = raw
        else:
            values[k.strip()] = raw
    return ExperimentConfig(values, sweep, base)
