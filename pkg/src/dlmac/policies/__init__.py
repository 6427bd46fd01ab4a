"""Transmit-decision policies: CSMA/CA, ARF, IWL-style sampling and learned control."""
from .csma import CsmaConfig, CsmaState, csma_outcome, csma_step, is_busy
from .dl import (compensate_after_txop, compensation_interval, compensation_values,
                 decide_ahead, dl_jcara_decide, dl_mcs_select, range_fill)
from .queue import RssiQueue
from .rates import ArfState, IwlState, arf_rate, arf_update, iwl_best, iwl_select, iwl_update
from .switch import SwitchConfig, SwitchTimer, queue_switch_features, switch_decide

POLICIES = ("dlmac", "dlmac_instant", "csma_iwl", "csma_arf", "csma_dlmcs", "dlca_iwl", "opt")

__all__ = [
    "ArfState", "CsmaConfig", "CsmaState", "IwlState", "POLICIES", "RssiQueue", "SwitchConfig",
    "SwitchTimer", "arf_rate", "arf_update", "compensate_after_txop", "compensation_interval",
    "compensation_values", "csma_outcome", "csma_step", "decide_ahead", "dl_jcara_decide",
    "dl_mcs_select", "is_busy", "iwl_best", "iwl_select", "iwl_update", "queue_switch_features",
    "range_fill", "switch_decide",
]
