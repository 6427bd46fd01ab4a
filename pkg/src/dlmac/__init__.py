"""Learned joint channel access and rate adaptation on mini-slot spectrum traces."""
from .errors import DlmacError
from .ladder import TABLE, LabelConfig
from .simcore import RunConfig, TrafficSource, TxopOutcome, resolve_txop, run
from .telemetry import SimReport, aggregate, emit_report

__all__ = ["DlmacError", "LabelConfig", "RunConfig", "SimReport", "TABLE", "TrafficSource",
           "TxopOutcome", "aggregate", "emit_report", "resolve_txop", "run"]
