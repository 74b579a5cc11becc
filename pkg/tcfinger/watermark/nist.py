"""
Subset of the NIST SP 800-22 randomness tests used to vet watermark delay draws.

Each test returns its p-value(s); a sequence passes a test when every p-value
exceeds 0.01.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

from tcfinger.errors import BadInput, NotApplicable

PASS_LEVEL = 0.01
MIN_BITS = 1000
BLOCK_SIZE = 128
APEN_M = 2
SERIAL_M = 3

# (min n, block length M, class lower edge, class probabilities) for the longest-run test
_LONGEST_RUN_TABLES = (
    (128, 8, 1, (0.2148, 0.3672, 0.2305, 0.1875)),
    (6272, 128, 4, (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (750000, 10000, 10, (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
)


def _as_bits(bits: Sequence[int]) -> np.ndarray:
    arr = np.asarray(bits).astype(np.int64).ravel()
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise BadInput("Bit sequence must contain only 0 and 1")
    return arr


def _require(bits: np.ndarray, minimum: int, test: str) -> None:
    if bits.size < minimum:
        raise NotApplicable(f"{test} needs at least {minimum} bits, got {bits.size}")


def monobit(bits: Sequence[int]) -> float:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "monobit")
    s_obs = abs(int(np.sum(2 * b - 1))) / math.sqrt(b.size)
    return float(erfc(s_obs / math.sqrt(2.0)))


def block_frequency(bits: Sequence[int], block_size: int = BLOCK_SIZE) -> float:
    b = _as_bits(bits)
    _require(b, max(MIN_BITS, block_size), "block_frequency")
    blocks = b.size // block_size
    pi = b[:blocks * block_size].reshape(blocks, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((pi - 0.5) ** 2))
    return float(gammaincc(blocks / 2.0, chi2 / 2.0))


def runs(bits: Sequence[int]) -> float:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "runs")
    n = b.size
    pi = float(b.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v_obs = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(erfc(num / den))


def _longest_runs(blocks: np.ndarray) -> np.ndarray:
    run = np.zeros(blocks.shape[0], dtype=np.int64)
    best = np.zeros(blocks.shape[0], dtype=np.int64)
    for j in range(blocks.shape[1]):
        run = (run + 1) * blocks[:, j]
        np.maximum(best, run, out=best)
    return best


def longest_run(bits: Sequence[int]) -> float:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "longest_run")
    table = [t for t in _LONGEST_RUN_TABLES if b.size >= t[0]][-1]
    _, block_size, low, probs = table
    blocks = b.size // block_size
    longest = _longest_runs(b[:blocks * block_size].reshape(blocks, block_size))
    classes = np.clip(longest - low, 0, len(probs) - 1)
    observed = np.bincount(classes, minlength=len(probs)).astype(float)
    expected = blocks * np.asarray(probs)
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    return float(gammaincc((len(probs) - 1) / 2.0, chi2 / 2.0))


def cumulative_sums(bits: Sequence[int], reverse: bool = False) -> float:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "cumulative_sums")
    x = 2 * b - 1
    if reverse:
        x = x[::-1]
    n = b.size
    z = int(np.max(np.abs(np.cumsum(x))))
    root_n = math.sqrt(n)

    # int() truncates toward zero, like the reference C code
    start = int((-n / z + 1) / 4)
    stop = int((n / z - 1) / 4)
    k = np.arange(start, stop + 1)
    first = np.sum(norm.cdf((4 * k + 1) * z / root_n) - norm.cdf((4 * k - 1) * z / root_n))
    start = int((-n / z - 3) / 4)
    k = np.arange(start, stop + 1)
    second = np.sum(norm.cdf((4 * k + 3) * z / root_n) - norm.cdf((4 * k + 1) * z / root_n))
    return float(np.clip(1.0 - first + second, 0.0, 1.0))


def _pattern_counts(b: np.ndarray, m: int) -> np.ndarray:
    """Counts of every overlapping m-bit pattern, wrapping around the end."""
    if m == 0:
        return np.array([b.size])
    extended = np.concatenate([b, b[:m - 1]])
    index = np.zeros(b.size, dtype=np.int64)
    for j in range(m):
        index = (index << 1) | extended[j:j + b.size]
    return np.bincount(index, minlength=1 << m)


def approximate_entropy(bits: Sequence[int], m: int = APEN_M) -> float:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "approximate_entropy")
    n = b.size

    def phi(block: int) -> float:
        counts = _pattern_counts(b, block)
        c = counts[counts > 0] / n
        return float(np.sum(c * np.log(c)))

    ap_en = phi(m) - phi(m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - ap_en)
    return float(gammaincc(2 ** (m - 1), chi2 / 2.0))


def serial(bits: Sequence[int], m: int = SERIAL_M) -> Tuple[float, float]:
    b = _as_bits(bits)
    _require(b, MIN_BITS, "serial")
    n = b.size

    def psi2(block: int) -> float:
        if block <= 0:
            return 0.0
        counts = _pattern_counts(b, block).astype(float)
        return float((2 ** block) / n * np.sum(counts ** 2) - n)

    p_m, p_m1, p_m2 = psi2(m), psi2(m - 1), psi2(m - 2)
    delta1 = p_m - p_m1
    delta2 = p_m - 2.0 * p_m1 + p_m2
    return float(gammaincc(2 ** (m - 2), delta1 / 2.0)), float(gammaincc(2 ** (m - 3), delta2 / 2.0))


@dataclass
class NistReport:
    """
    Attributes:
        p_values: test name -> p-value (serial reports serial_1 and serial_2)
        not_applicable: test name -> reason, for tests the sequence is too short for
    """
    n_bits: int
    p_values: Dict[str, float] = field(default_factory=dict)
    not_applicable: Dict[str, str] = field(default_factory=dict)

    def passed(self, level: float = PASS_LEVEL) -> bool:
        return bool(self.p_values) and all(p > level for p in self.p_values.values())

    def failures(self, level: float = PASS_LEVEL) -> List[str]:
        return [name for name, p in self.p_values.items() if p <= level]


TESTS: Dict[str, Callable[[np.ndarray], object]] = {
    "monobit": monobit,
    "block_frequency": block_frequency,
    "runs": runs,
    "longest_run": longest_run,
    "cusum_forward": cumulative_sums,
    "cusum_reverse": lambda b: cumulative_sums(b, reverse=True),
    "approximate_entropy": approximate_entropy,
    "serial": serial,
}


def nist_subset(bits: Sequence[int]) -> NistReport:
    """Run every test of the subset; tests the input is too short for are reported as not applicable."""
    b = _as_bits(bits)
    report = NistReport(n_bits=int(b.size))
    for name, test in TESTS.items():
        try:
            result = test(b)
        except NotApplicable as e:
            report.not_applicable[name] = str(e)
            continue
        if isinstance(result, tuple):
            for i, p in enumerate(result, start=1):
                report.p_values[f"{name}_{i}"] = float(p)
        else:
            report.p_values[name] = float(result)  # type: ignore[arg-type]
    return report
