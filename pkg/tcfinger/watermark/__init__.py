from tcfinger.watermark.critical import (
    CASCADED_MODES,
    MODE_FLAGS,
    CriticalStateConfig,
    mode_for_flags,
    safe_delay_budget,
    stage_times,
    time_to_critical,
)
from tcfinger.watermark.delays import check_delay_bound, delay_grid, draw_delay, draw_delays, serialize_delays
from tcfinger.watermark.entropy import EntropyReport, conditional_entropy, entropy_analysis, mutual_information
from tcfinger.watermark.kstest import DISTINCT, INDISTINCT, KsResult, ks_two_sample, replay_check
from tcfinger.watermark.nist import NistReport, nist_subset
from tcfinger.watermark.replay import PowerResult, replay_power

__all__ = [
    "CASCADED_MODES",
    "MODE_FLAGS",
    "CriticalStateConfig",
    "mode_for_flags",
    "safe_delay_budget",
    "stage_times",
    "time_to_critical",
    "check_delay_bound",
    "delay_grid",
    "draw_delay",
    "draw_delays",
    "serialize_delays",
    "EntropyReport",
    "conditional_entropy",
    "entropy_analysis",
    "mutual_information",
    "DISTINCT",
    "INDISTINCT",
    "KsResult",
    "ks_two_sample",
    "replay_check",
    "NistReport",
    "nist_subset",
    "PowerResult",
    "replay_power",
]
