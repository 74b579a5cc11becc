"""
Subspace identification of a StateSpaceModel from input/output records.

Markov parameters are estimated by ridge least squares on the truncated
convolution y_k ~ sum_{i=0..q} H_i u_{k-i}; the block Hankel matrix of
H_1..H_q is SVD-truncated and realized with the Ho-Kalman / ERA construction.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tcfinger.errors import ConfigError, DimError, InsufficientData, RankDeficient
from tcfinger.lti import KalmanGain, StateSpaceModel, predict_outputs
from tcfinger.timeseries import Dataset

HOLDOUT_FRACTION = 0.3
RANK_TOL = 1e-10


@dataclass
class IdentConfig:
    """
    Identification settings.

    Attributes:
        order: Requested state dimension n
        horizon: Number of Markov parameters q
        ridge: Regularization of the normal equations
    """
    order: int = 4
    horizon: int = 20
    ridge: float = 1e-8

    def check(self) -> None:
        if self.order < 1:
            raise ConfigError(f"order must be >= 1, got {self.order}")
        if self.ridge < 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if self.order > self.horizon // 2:
            raise ConfigError(f"order {self.order} needs horizon >= {2 * self.order}, got {self.horizon}")


@dataclass
class FitReport:
    """Per-output normalized RMS error and best-fit percentage."""
    outputs: List[str]
    nrmse: List[float] = field(default_factory=list)

    @property
    def best_fit(self) -> List[float]:
        return [100.0 * (1.0 - e) for e in self.nrmse]


def io_arrays(ds: Dataset, inputs: Sequence[str], outputs: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack the named channels into (N, p) and (N, m) arrays."""
    U = np.column_stack([ds.values(name) for name in inputs]) if inputs else np.zeros((len(ds), 0))
    Y = np.column_stack([ds.values(name) for name in outputs])
    return U, Y


def markov_parameters(U: np.ndarray, Y: np.ndarray, horizon: int, ridge: float) -> np.ndarray:
    """Least-squares Markov parameters H_0..H_q, shape (q+1, m, p)."""
    N, p = U.shape
    m = Y.shape[1]
    q = horizon
    rows = N - q
    Phi = np.zeros((rows, p * (q + 1)))
    for i in range(q + 1):
        Phi[:, i * p:(i + 1) * p] = U[q - i:N - i]
    target = Y[q:]
    gram = Phi.T @ Phi + ridge * np.eye(Phi.shape[1])
    theta = np.linalg.solve(gram, Phi.T @ target)
    return np.stack([theta[i * p:(i + 1) * p].T for i in range(q + 1)]).reshape(q + 1, m, p)


def era_realize(H: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ho-Kalman realization of (A, B, C) from Markov parameters H_0..H_q."""
    q, m, p = H.shape[0] - 1, H.shape[1], H.shape[2]
    r = s = q // 2
    hankel = np.zeros((r * m, s * p))
    shifted = np.zeros((r * m, s * p))
    for i in range(r):
        for j in range(s):
            hankel[i * m:(i + 1) * m, j * p:(j + 1) * p] = H[i + j + 1]
            shifted[i * m:(i + 1) * m, j * p:(j + 1) * p] = H[i + j + 2]

    U_, sigma, Vt = np.linalg.svd(hankel, full_matrices=False)
    scale = sigma[0] if sigma.size else 0.0
    rank = int(np.sum(sigma > RANK_TOL * scale)) if scale > 1e-300 else 0
    if rank < order:
        raise RankDeficient(f"Hankel numerical rank {rank} is below requested order {order}", achievable_rank=rank)

    sqrt_s = np.sqrt(sigma[:order])
    U_n, V_n = U_[:, :order], Vt[:order].T
    observability = U_n * sqrt_s
    controllability = (V_n * sqrt_s).T
    A = (U_n.T @ shifted @ V_n) / np.outer(sqrt_s, sqrt_s)
    B = controllability[:, :p]
    C = observability[:m, :]
    return A, B, C


def identify(ds: Dataset, inputs: Sequence[str], outputs: Sequence[str], cfg: Optional[IdentConfig] = None) -> StateSpaceModel:
    """
    Identify a model of the given order from a record.

    Args:
        ds: Record holding the input and output channels
        inputs: Input channel names (p)
        outputs: Output channel names (m)
        cfg: Order, horizon and ridge

    Returns:
        StateSpaceModel with sensor noise std fitted from prediction residuals
    """
    cfg = cfg or IdentConfig()
    if not inputs:
        raise DimError("At least one input channel is required")
    U, Y = io_arrays(ds, inputs, outputs)
    p, m = U.shape[1], Y.shape[1]
    cfg.check()

    required = (p + 1) * cfg.horizon + 10
    if len(ds) < required:
        raise InsufficientData(f"identify needs at least {required} samples, got {len(ds)}")
    for j, name in enumerate(inputs):
        if np.ptp(U[:, j]) == 0:
            logging.warning(f"Input {name} is constant; Markov parameters for it are not identifiable")

    H = markov_parameters(U, Y, cfg.horizon, cfg.ridge)
    A, B, C = era_realize(H, cfg.order)

    model = StateSpaceModel(A, B, C)
    residual = Y - predict_outputs(model, None, U)
    sensor_std = residual[cfg.horizon:].std(axis=0, ddof=1)
    logging.info(f"Identified order-{cfg.order} model from {len(ds)} samples ({p} inputs, {m} outputs)")
    return StateSpaceModel(A, B, C, process_noise_std=np.zeros(cfg.order), sensor_noise_std=sensor_std)


def nrmse(y: np.ndarray, y_hat: np.ndarray) -> float:
    """||y - y_hat|| / ||y - mean(y)||."""
    num = float(np.linalg.norm(y - y_hat))
    den = float(np.linalg.norm(y - np.mean(y)))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def validate(model: StateSpaceModel, ds: Dataset, inputs: Sequence[str], outputs: Sequence[str], gain: Optional[KalmanGain] = None) -> FitReport:
    """Run the model (open-loop or with the estimator) over ds and score each output."""
    U, Y = io_arrays(ds, inputs, outputs)
    if U.shape[1] != model.p_inputs or Y.shape[1] != model.m_outputs:
        raise DimError(f"Model is {model.p_inputs}-in/{model.m_outputs}-out, record gives {U.shape[1]}/{Y.shape[1]}")
    Y_hat = predict_outputs(model, gain, U, Y)
    return FitReport(outputs=list(outputs), nrmse=[nrmse(Y[:, j], Y_hat[:, j]) for j in range(Y.shape[1])])


def holdout_split(ds: Dataset) -> Tuple[int, int]:
    """Index where the held-out final 30% starts, and the dataset length."""
    n = len(ds)
    return int(round(n * (1.0 - HOLDOUT_FRACTION))), n
