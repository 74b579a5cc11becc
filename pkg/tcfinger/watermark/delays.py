"""
Watermark delay draws and their bit serialization for randomness testing.
"""

import logging
import math
from typing import TYPE_CHECKING, Sequence

import numpy as np

from tcfinger.errors import BadInput, UnsafeDelay

if TYPE_CHECKING:
    from tcfinger.plantsim.scenario import WatermarkPolicy


def delay_grid(policy: "WatermarkPolicy", sample_period_s: float = 1.0) -> np.ndarray:
    """All delays (in samples) the policy can produce."""
    steps = int(math.floor((policy.delay_max_s - policy.delay_min_s) / policy.granularity_s + 1e-9))
    seconds = policy.delay_min_s + policy.granularity_s * np.arange(steps + 1)
    return np.rint(seconds / sample_period_s).astype(int)


def check_delay_bound(policy: "WatermarkPolicy", t_q_bound: float) -> None:
    limit = policy.safety_fraction * t_q_bound
    if policy.delay_max_s > limit:
        raise UnsafeDelay(
            f"delay_max_s={policy.delay_max_s} exceeds {policy.safety_fraction} x time-to-critical {t_q_bound:.2f} s = {limit:.2f} s"
        )


def draw_delay(policy: "WatermarkPolicy", t_q_bound: float, rng: np.random.Generator, sample_period_s: float = 1.0) -> int:
    """
    One watermark delay in samples, uniform over the policy's granularity grid.

    Raises:
        UnsafeDelay: delay_max_s is above safety_fraction * t_q_bound
    """
    check_delay_bound(policy, t_q_bound)
    grid = delay_grid(policy, sample_period_s)
    return int(grid[rng.integers(0, grid.size)])


def draw_delays(policy: "WatermarkPolicy", t_q_bound: float, count: int, rng: np.random.Generator, sample_period_s: float = 1.0) -> np.ndarray:
    """Vectorized draw_delay."""
    check_delay_bound(policy, t_q_bound)
    grid = delay_grid(policy, sample_period_s)
    return grid[rng.integers(0, grid.size, size=count)]


def serialize_delays(delays: Sequence[int], delay_min: int, delay_max: int) -> np.ndarray:
    """
    Bits of each delay's index within [delay_min, delay_max], fixed width, most significant first.

    Only a power-of-two number of values gives unbiased bits.
    """
    values = np.asarray(delays, dtype=int)
    count = delay_max - delay_min + 1
    if count < 2:
        raise BadInput("Delay range must hold at least two values to carry randomness")
    if np.any(values < delay_min) or np.any(values > delay_max):
        raise BadInput(f"Delays fall outside [{delay_min}, {delay_max}]")
    if count & (count - 1):
        logging.warning(f"Delay range holds {count} values, not a power of two; serialized bits are biased")
    width = int(math.ceil(math.log2(count)))
    index = values - delay_min
    shifts = np.arange(width - 1, -1, -1)
    return ((index[:, None] >> shifts[None, :]) & 1).astype(np.int8).ravel()
