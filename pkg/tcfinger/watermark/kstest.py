"""
Two-sample Kolmogorov-Smirnov test and the replay check built on it.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import kolmogorov

from tcfinger.errors import BadInput, InsufficientData

DISTINCT = "distinct"
INDISTINCT = "indistinct"
MIN_SAMPLES = 5


@dataclass(frozen=True)
class KsResult:
    """
    Attributes:
        d_stat: sup |F_n - G_m|
        n, m: sample sizes
        critical: rejection threshold for d_stat at alpha
        p_value: asymptotic p-value
        decision: "distinct" when d_stat > critical
    """
    d_stat: float
    n: int
    m: int
    alpha: float
    critical: float
    p_value: float
    decision: str

    @property
    def distinct(self) -> bool:
        return self.decision == DISTINCT


def critical_value(n: int, m: int, alpha: float) -> float:
    return math.sqrt(-0.5 * math.log(alpha)) * math.sqrt((n + m) / (n * m))


def ks_two_sample(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> KsResult:
    """Compare two samples' empirical CDFs over the pooled points."""
    if not 0.0 < alpha < 1.0:
        raise BadInput(f"alpha must be in (0, 1), got {alpha}")
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n, m = a.size, b.size
    if n < MIN_SAMPLES or m < MIN_SAMPLES:
        raise InsufficientData(f"K-S test needs at least {MIN_SAMPLES} samples per side, got {n} and {m}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise BadInput("K-S samples must be finite")

    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / n
    cdf_b = np.searchsorted(b, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))

    crit = critical_value(n, m, alpha)
    en = math.sqrt(n * m / (n + m))
    p_value = float(np.clip(kolmogorov((en + 0.12 + 0.11 / en) * d), 0.0, 1.0))
    return KsResult(d_stat=d, n=n, m=m, alpha=alpha, critical=crit, p_value=p_value,
                    decision=DISTINCT if d > crit else INDISTINCT)


def replay_check(
    normal_tc: Sequence[float],
    observed_tc: Sequence[float],
    delays: Optional[Sequence[float]] = None,
    alpha: float = 0.05,
) -> KsResult:
    """
    Does the observation carry the watermark?

    The expected watermarked timing is normal_tc shifted by the delays the PLC
    drew (a scalar or one per sample). A "distinct" decision means the observed
    timings do not follow that expectation, and the data is flagged as replayed.
    """
    expected = np.asarray(normal_tc, dtype=float)
    if delays is not None:
        shift = np.asarray(delays, dtype=float)
        if shift.ndim and shift.size != expected.size:
            raise BadInput(f"{shift.size} delays for {expected.size} normal samples")
        expected = expected + shift
    return ks_two_sample(observed_tc, expected, alpha)
