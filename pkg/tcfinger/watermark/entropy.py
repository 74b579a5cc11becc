"""
Histogram entropy of fingerprints: how much one process's fingerprint tells about another's.

Every variable is binned over its own range; all quantities are in bits divided
by log2(bins), so 1.0 means a uniform histogram.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Mapping, Sequence, Tuple

import numpy as np

from tcfinger.errors import InsufficientData

DEFAULT_BINS = 10
MIN_SAMPLES = 20


@dataclass
class EntropyReport:
    """
    Attributes:
        processes: Process names, in matrix order
        conditional: [i, t] = normalized H(w_i | w_t), averaged over features
        entropy: normalized H(w_i)
        mutual: [i, t] = normalized I(w_i; w_t); the diagonal is each process's self information
        skipped: "<process>:<feature index>" entries left out because they were constant
    """
    processes: List[str]
    conditional: np.ndarray
    entropy: np.ndarray
    mutual: np.ndarray
    bins: int = DEFAULT_BINS
    skipped: List[str] = field(default_factory=list)

    def cross_conditional(self) -> np.ndarray:
        """Off-diagonal conditional entropies."""
        mask = ~np.eye(len(self.processes), dtype=bool)
        return self.conditional[mask]


def bin_indices(x: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width bin index of every sample over the sample's own range."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros(x.size, dtype=int)
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def joint_entropies(x_idx: np.ndarray, y_idx: np.ndarray, bins: int) -> Tuple[float, float, float]:
    """(H(X), H(Y), H(X,Y)) in bits for aligned bin indices."""
    joint = np.zeros((bins, bins))
    np.add.at(joint, (x_idx, y_idx), 1)
    return _entropy_bits(joint.sum(axis=1)), _entropy_bits(joint.sum(axis=0)), _entropy_bits(joint.ravel())


def mutual_information(x: Sequence[float], y: Sequence[float], bins: int = DEFAULT_BINS) -> float:
    """Normalized I(X;Y) of two aligned samples."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    size = min(x.size, y.size)
    hx, hy, hxy = joint_entropies(bin_indices(x[:size], bins), bin_indices(y[:size], bins), bins)
    return max(0.0, hx + hy - hxy) / math.log2(bins)


def conditional_entropy(x: Sequence[float], y: Sequence[float], bins: int = DEFAULT_BINS) -> float:
    """Normalized H(X|Y) = H(X) - I(X;Y)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    size = min(x.size, y.size)
    hx, hy, hxy = joint_entropies(bin_indices(x[:size], bins), bin_indices(y[:size], bins), bins)
    return max(0.0, hxy - hy) / math.log2(bins)


def entropy_analysis(fingerprints: Mapping[str, np.ndarray], bins: int = DEFAULT_BINS) -> EntropyReport:
    """
    Conditional entropy between every pair of processes.

    Args:
        fingerprints: Process -> samples, shape (n,) or (n, features); rows are aligned by index across processes
        bins: Equal-width bins per variable
    """
    names = list(fingerprints)
    if len(names) < 2:
        raise InsufficientData("entropy_analysis needs at least two processes")
    data = {}
    for name in names:
        arr = np.asarray(fingerprints[name], dtype=float)
        arr = arr[:, None] if arr.ndim == 1 else arr
        if arr.shape[0] < MIN_SAMPLES:
            raise InsufficientData(f"Process {name} has {arr.shape[0]} samples, needs {MIN_SAMPLES}")
        data[name] = arr
    n_features = min(arr.shape[1] for arr in data.values())
    size = min(arr.shape[0] for arr in data.values())
    norm = math.log2(bins)

    skipped = []
    usable = {}
    for name in names:
        keep = []
        for f in range(n_features):
            column = data[name][:size, f]
            if np.ptp(column) == 0:
                skipped.append(f"{name}:{f}")
                logging.warning(f"Feature {f} of {name} is constant; skipped in entropy analysis")
            else:
                keep.append(f)
        usable[name] = set(keep)
    binned = {name: [bin_indices(data[name][:size, f], bins) for f in range(n_features)] for name in names}

    count = len(names)
    conditional = np.full((count, count), np.nan)
    mutual = np.full((count, count), np.nan)
    entropy = np.full(count, np.nan)
    for i, a in enumerate(names):
        own = [_entropy_bits(np.bincount(binned[a][f], minlength=bins)) / norm for f in sorted(usable[a])]
        if own:
            entropy[i] = float(np.mean(own))
        for t, b in enumerate(names):
            shared = sorted(usable[a] & usable[b])
            if not shared:
                continue
            cond, info = [], []
            for f in shared:
                hx, hy, hxy = joint_entropies(binned[a][f], binned[b][f], bins)
                cond.append(max(0.0, hxy - hy) / norm)
                info.append(max(0.0, hx + hy - hxy) / norm)
            conditional[i, t] = float(np.mean(cond))
            mutual[i, t] = float(np.mean(info))
    logging.info(f"Entropy analysis over {count} processes, {size} aligned samples, {bins} bins")
    return EntropyReport(processes=names, conditional=conditional, entropy=entropy, mutual=mutual, bins=bins, skipped=skipped)
