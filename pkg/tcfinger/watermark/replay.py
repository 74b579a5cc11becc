"""
Monte-Carlo power of the replay check against a fixed watermark delay.
"""

import logging
import multiprocessing as mp
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tcfinger.errors import InsufficientData
from tcfinger.watermark.kstest import replay_check

DEFAULT_TRIGGER_NOISE_S = 8.0


@dataclass
class PowerResult:
    delay_s: float
    trials: int
    flagged: int

    @property
    def power(self) -> float:
        return self.flagged / self.trials if self.trials else 0.0


def _trial(args: Tuple[np.ndarray, float, int, float, float, int]) -> bool:
    normal_tc, delay_s, sample_size, noise_std, alpha, seed = args
    rng = np.random.default_rng(seed)
    reference = rng.choice(normal_tc, size=sample_size) + rng.normal(0.0, noise_std, size=sample_size)
    replayed = rng.choice(normal_tc, size=sample_size) + rng.normal(0.0, noise_std, size=sample_size)
    return replay_check(reference, replayed, delays=delay_s, alpha=alpha).distinct


def replay_power(
    normal_tc: Sequence[float],
    delay_s: float,
    trials: int = 100,
    sample_size: int = 30,
    trigger_noise_std: float = DEFAULT_TRIGGER_NOISE_S,
    alpha: float = 0.05,
    seed: int = 0,
    workers: Optional[int] = None,
) -> PowerResult:
    """
    Fraction of replays the check flags.

    Each trial builds the defender's expectation from one resample of the
    normal Time Constants plus the watermark delay, and a replay from an
    independent resample without it; both carry trigger-timing noise.
    """
    normal = np.asarray(normal_tc, dtype=float)
    if normal.size < 5:
        raise InsufficientData("replay_power needs at least 5 normal Time Constants")
    seeds = np.random.SeedSequence(seed).generate_state(trials)
    jobs = [(normal, float(delay_s), sample_size, trigger_noise_std, alpha, int(s)) for s in seeds]
    if workers and workers > 1:
        with mp.Pool(processes=workers) as pool:
            outcomes: List[bool] = pool.map(_trial, jobs)
    else:
        outcomes = [_trial(job) for job in jobs]
    result = PowerResult(delay_s=float(delay_s), trials=trials, flagged=int(sum(outcomes)))
    logging.info(f"Replay power at {delay_s} s delay: {result.power:.2%} over {trials} trials")
    return result
