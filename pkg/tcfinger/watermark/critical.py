"""
Time to critical state of a one- or two-stage tank process.

Each stage is described by its TankParams; a mode names which stages start
near their high (H) or low (L) set-point.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple

from tcfinger.errors import ConfigError, InvalidMode

if TYPE_CHECKING:
    from tcfinger.plantsim.scenario import TankParams

# mode -> (X1_H, X1_L, X2_H, X2_L)
MODE_FLAGS: Dict[int, Tuple[bool, bool, bool, bool]] = {
    1: (False, False, False, True),
    2: (False, False, True, False),
    3: (False, True, False, False),
    4: (False, True, False, True),
    5: (False, True, True, False),
    6: (True, False, False, False),
    7: (True, False, False, True),
    8: (True, False, True, False),
}

# Modes whose bound is an interval [min(T1, T2), T1 + T2]
CASCADED_MODES = (4, 5, 8)


@dataclass
class CriticalStateConfig:
    """
    Stages used by time_to_critical.

    Attributes:
        stages: One or two TankParams, upstream first
    """
    stages: Sequence["TankParams"]

    def __post_init__(self):
        if not 1 <= len(self.stages) <= 2:
            raise ConfigError(f"CriticalStateConfig needs 1 or 2 stages, got {len(self.stages)}")
        for tank in self.stages:
            if tank.delta_high <= 0 or tank.delta_low <= 0:
                raise ConfigError(f"{tank.name}: delta_high and delta_low must be positive")


def stage_times(tank: "TankParams") -> Tuple[float, float]:
    """
    Worst-case (T_qH, T_qL) for a single tank.

    Overflow assumes full inflow and no outflow; underflow assumes full outflow and no inflow.
    """
    return tank.delta_high / tank.max_in_rate, tank.delta_low / tank.max_out_rate


def mode_for_flags(x1_high: bool, x1_low: bool, x2_high: bool, x2_low: bool) -> int:
    """Table row for a combination of near-critical flags."""
    flags = (x1_high, x1_low, x2_high, x2_low)
    for mode, row in MODE_FLAGS.items():
        if row == flags:
            return mode
    raise InvalidMode(f"Flags X1H={x1_high} X1L={x1_low} X2H={x2_high} X2L={x2_low} are not a physically possible mode")


def time_to_critical(cfg: CriticalStateConfig, mode: int) -> Tuple[float, float]:
    """
    Time-to-critical bound for one operating mode.

    Args:
        cfg: One stage (modes 3 and 6 only) or two stages
        mode: Row 1..8 of the mode table

    Returns:
        (lower, upper) bound in seconds; equal for single-value modes
    """
    if mode not in MODE_FLAGS:
        raise InvalidMode(f"Unknown mode {mode}; expected 1..8")
    x1_high, x1_low, x2_high, x2_low = MODE_FLAGS[mode]
    needs_stage2 = x2_high or x2_low
    if needs_stage2 and len(cfg.stages) < 2:
        raise InvalidMode(f"Mode {mode} involves stage 2 but only one stage is configured")

    t1 = None
    if x1_high or x1_low:
        t1_high, t1_low = stage_times(cfg.stages[0])
        t1 = t1_high if x1_high else t1_low
    t2 = None
    if needs_stage2:
        t2_high, t2_low = stage_times(cfg.stages[1])
        t2 = t2_high if x2_high else t2_low

    if t1 is None:
        return t2, t2  # type: ignore[return-value]
    if t2 is None:
        return t1, t1
    if mode in CASCADED_MODES:
        return min(t1, t2), t1 + t2
    return min(t1, t2), min(t1, t2)


def safe_delay_budget(tanks: List["TankParams"]) -> float:
    """Smallest single-stage time to critical state over every tank and both directions."""
    if not tanks:
        raise ConfigError("No tanks to bound the watermark delay")
    return min(min(stage_times(tank)) for tank in tanks)
