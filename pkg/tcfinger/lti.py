"""
Discrete LTI plant model and its Kalman estimator.

    x_{k+1} = A x_k + B u_k + v_k
    y_k     = C x_k + eta_k
    x^_{k+1} = A x^_k + B u_k + L (y_k - C x^_k)

delayed_output and watermark_residual express what a delayed (watermarked)
control input does to the next output and to the estimator residual.
"""

import json
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from tcfinger.errors import DimError, IoError, LengthError, RiccatiDiverged, SingularCov

RICCATI_TOL = 1e-9
RICCATI_MAX_ITER = 100000
RICCATI_BLOWUP = 1e12


def _matrix(value, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimError(f"{name} must be a matrix")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """
    Dense discrete-time state-space model.

    Attributes:
        A: n x n state matrix
        B: n x p input matrix
        C: m x n output matrix
        process_noise_std: per-state sigma of v_k (length n)
        sensor_noise_std: per-output sigma of eta_k (length m)
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    process_noise_std: Optional[np.ndarray] = None
    sensor_noise_std: Optional[np.ndarray] = None

    def __post_init__(self):
        A, B, C = _matrix(self.A, "A"), _matrix(self.B, "B"), _matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimError(f"C must have {n} columns, got {C.shape}")
        v = np.zeros(n) if self.process_noise_std is None else np.asarray(self.process_noise_std, dtype=float).ravel()
        e = np.zeros(C.shape[0]) if self.sensor_noise_std is None else np.asarray(self.sensor_noise_std, dtype=float).ravel()
        if v.shape != (n,) or e.shape != (C.shape[0],):
            raise DimError(f"Noise std lengths must be n={n} and m={C.shape[0]}, got {v.shape[0]} and {e.shape[0]}")
        if np.any(v < 0) or np.any(e < 0):
            raise DimError("Noise standard deviations must be non-negative")
        for name, arr in (("A", A), ("B", B), ("C", C), ("process_noise_std", v), ("sensor_noise_std", e)):
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return int(self.A.shape[0])

    @property
    def p_inputs(self) -> int:
        return int(self.B.shape[1])

    @property
    def m_outputs(self) -> int:
        return int(self.C.shape[0])

    def similar(self, T: np.ndarray) -> "StateSpaceModel":
        """Model in the coordinates z = T x (same input/output behaviour)."""
        Ti = np.linalg.inv(T)
        return StateSpaceModel(T @ self.A @ Ti, T @ self.B, self.C @ Ti, None, self.sensor_noise_std)


@dataclass(frozen=True, eq=False)
class KalmanGain:
    """Estimator gain L (n x m)."""
    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L", _matrix(self.L, "L"))

    def check(self, model: StateSpaceModel) -> None:
        if self.L.shape != (model.n_states, model.m_outputs):
            raise DimError(f"L must be {model.n_states}x{model.m_outputs}, got {self.L.shape}")


def _vector(value, size: int, name: str) -> np.ndarray:
    vec = np.asarray(value, dtype=float).ravel()
    if vec.shape != (size,):
        raise DimError(f"{name} must have length {size}, got {vec.shape[0]}")
    return vec


def _draw(rng: Optional[np.random.Generator], std: np.ndarray) -> np.ndarray:
    if rng is None:
        return np.zeros_like(std)
    return rng.normal(0.0, 1.0, size=std.shape) * std


def step(model: StateSpaceModel, x, u, rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """One plant step: returns (x_next, y) with y measured from the current state."""
    x = _vector(x, model.n_states, "x")
    u = _vector(u, model.p_inputs, "u")
    v = _draw(rng, model.process_noise_std)
    eta = _draw(rng, model.sensor_noise_std)
    x_next = model.A @ x + model.B @ u + v
    y = model.C @ x + eta
    return x_next, y


def kf_step(model: StateSpaceModel, gain: KalmanGain, x_hat, u, y) -> Tuple[np.ndarray, np.ndarray]:
    """One estimator step: returns (x_hat_next, y_hat)."""
    gain.check(model)
    x_hat = _vector(x_hat, model.n_states, "x_hat")
    u = _vector(u, model.p_inputs, "u")
    y = _vector(y, model.m_outputs, "y")
    y_hat = model.C @ x_hat
    x_hat_next = model.A @ x_hat + model.B @ u + gain.L @ (y - y_hat)
    return x_hat_next, y_hat


def steady_state_gain(model: StateSpaceModel, Qcov, Rcov) -> KalmanGain:
    """
    Predictor-form steady-state Kalman gain from the discrete Riccati recursion.

    P <- A P A' + Q - A P C' (C P C' + R)^-1 C P A', started at P = Q.

    Raises:
        SingularCov: innovation covariance C P C' + R is singular
        RiccatiDiverged: no fixed point within RICCATI_MAX_ITER iterations
    """
    n, m = model.n_states, model.m_outputs
    Q = _matrix(Qcov, "Qcov")
    R = _matrix(Rcov, "Rcov")
    if Q.shape != (n, n) or R.shape != (m, m):
        raise DimError(f"Qcov must be {n}x{n} and Rcov {m}x{m}")
    A, C = model.A, model.C

    P = Q.copy()
    for iteration in range(1, RICCATI_MAX_ITER + 1):
        S = C @ P @ C.T + R
        if np.linalg.cond(S) > 1e12:
            raise SingularCov("Innovation covariance C P C' + R is singular")
        K = A @ P @ C.T @ np.linalg.inv(S)
        P_next = A @ P @ A.T + Q - K @ S @ K.T
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.max(np.abs(P_next)) > RICCATI_BLOWUP:
            raise RiccatiDiverged(f"Riccati recursion diverged after {iteration} iterations")
        if np.max(np.abs(P_next - P)) < RICCATI_TOL:
            P = P_next
            logging.debug(f"Riccati recursion converged in {iteration} iterations")
            break
        P = P_next
    else:
        raise RiccatiDiverged(f"Riccati recursion did not converge in {RICCATI_MAX_ITER} iterations")

    S = C @ P @ C.T + R
    return KalmanGain(A @ P @ C.T @ np.linalg.inv(S))


def delayed_output(model: StateSpaceModel, x_k, u_delayed, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """y_{k+1} = C A x_k + C v_k + eta_{k+1} + C B u_{k - dk}."""
    x_k = _vector(x_k, model.n_states, "x_k")
    u = _vector(u_delayed, model.p_inputs, "u_delayed")
    v = _draw(rng, model.process_noise_std)
    eta = _draw(rng, model.sensor_noise_std)
    return model.C @ model.A @ x_k + model.C @ v + eta + model.C @ model.B @ u


def watermark_residual(
    model: StateSpaceModel,
    gain: KalmanGain,
    attacked_trace: Sequence[Tuple[Sequence[float], Sequence[float]]],
    watermarked_inputs: Sequence[Sequence[float]],
    x0_hat: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Residuals of the watermark-side estimator run against attacked outputs.

    Args:
        attacked_trace: (u_a, y_a) per step as seen on the network
        watermarked_inputs: u_{k - dk} actually applied by the PLC
        x0_hat: initial estimate (zeros by default)

    Returns:
        Array of shape (N, m) with r_k = y_a_k - C x^_k
    """
    gain.check(model)
    if len(attacked_trace) != len(watermarked_inputs):
        raise LengthError(f"attacked_trace has {len(attacked_trace)} steps, watermarked_inputs {len(watermarked_inputs)}")
    x_hat = np.zeros(model.n_states) if x0_hat is None else _vector(x0_hat, model.n_states, "x0_hat")
    residuals = np.zeros((len(attacked_trace), model.m_outputs))
    for k, ((u_a, y_a), u_wm) in enumerate(zip(attacked_trace, watermarked_inputs)):
        _vector(u_a, model.p_inputs, "u_a")
        y_a = _vector(y_a, model.m_outputs, "y_a")
        u_wm = _vector(u_wm, model.p_inputs, "u_wm")
        residuals[k] = y_a - model.C @ x_hat
        x_hat = model.A @ x_hat + model.B @ u_wm + gain.L @ residuals[k]
    return residuals


def rollout(model: StateSpaceModel, u: np.ndarray, x0=None, rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Simulate N steps; returns (states (N+1, n), outputs (N, m))."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != model.p_inputs:
        raise DimError(f"u must have {model.p_inputs} columns, got {u.shape}")
    x = np.zeros(model.n_states) if x0 is None else _vector(x0, model.n_states, "x0")
    states = np.zeros((u.shape[0] + 1, model.n_states))
    outputs = np.zeros((u.shape[0], model.m_outputs))
    states[0] = x
    for k in range(u.shape[0]):
        x, outputs[k] = step(model, x, u[k], rng)
        states[k + 1] = x
    return states, outputs


def predict_outputs(model: StateSpaceModel, gain: Optional[KalmanGain], u: np.ndarray, y: Optional[np.ndarray] = None, x0=None) -> np.ndarray:
    """
    Output predictions over a record.

    Open-loop simulation when gain is None, otherwise the Kalman estimator
    driven by the measured outputs y.
    """
    if gain is None:
        _, outputs = rollout(model, u, x0)
        return outputs
    u = np.atleast_2d(np.asarray(u, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[0] != u.shape[0]:
        raise LengthError(f"u has {u.shape[0]} rows, y has {y.shape[0]}")
    x_hat = np.zeros(model.n_states) if x0 is None else _vector(x0, model.n_states, "x0")
    predictions = np.zeros((u.shape[0], model.m_outputs))
    for k in range(u.shape[0]):
        x_hat, predictions[k] = kf_step(model, gain, x_hat, u[k], y[k])
    return predictions


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


# ============================================================================
# Serialization
# ============================================================================

class ModelDocument(BaseModel):
    """JSON document of a StateSpaceModel (row-major arrays)."""
    n: int = Field(ge=1)
    p: int = Field(ge=1)
    m: int = Field(ge=1)
    A: List[List[float]]
    B: List[List[float]]
    C: List[List[float]]
    process_noise_std: List[float]
    sensor_noise_std: List[float]
    L: Optional[List[List[float]]] = None


def model_to_document(model: StateSpaceModel, gain: Optional[KalmanGain] = None) -> ModelDocument:
    return ModelDocument(
        n=model.n_states,
        p=model.p_inputs,
        m=model.m_outputs,
        A=model.A.tolist(),
        B=model.B.tolist(),
        C=model.C.tolist(),
        process_noise_std=model.process_noise_std.tolist(),
        sensor_noise_std=model.sensor_noise_std.tolist(),
        L=None if gain is None else gain.L.tolist(),
    )


def model_from_document(doc: ModelDocument) -> Tuple[StateSpaceModel, Optional[KalmanGain]]:
    model = StateSpaceModel(np.array(doc.A), np.array(doc.B), np.array(doc.C), np.array(doc.process_noise_std), np.array(doc.sensor_noise_std))
    if (model.n_states, model.p_inputs, model.m_outputs) != (doc.n, doc.p, doc.m):
        raise DimError(f"Document declares n,p,m={doc.n},{doc.p},{doc.m} but matrices give {model.n_states},{model.p_inputs},{model.m_outputs}")
    gain = None
    if doc.L is not None:
        gain = KalmanGain(np.array(doc.L))
        gain.check(model)
    return model, gain


def save_model(path: str, model: StateSpaceModel, gain: Optional[KalmanGain] = None) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(model_to_document(model, gain).model_dump_json(indent=2))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_model(path: str) -> Tuple[StateSpaceModel, Optional[KalmanGain]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = ModelDocument.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise IoError(f"File {path} not found") from e
    return model_from_document(doc)


# ============================================================================
# Stage-1 fixture (4 states; inputs MV101, P101, P102; outputs FIT101, LIT101)
# ============================================================================

def stage1_reference_model() -> Tuple[StateSpaceModel, KalmanGain]:
    A = np.array([
        [1.0000, 0.0008, -0.0003, 0.0031],
        [-0.0026, 0.9782, 0.1173, -0.0037],
        [-0.0057, -0.0614, 0.7645, 0.3523],
        [-0.0091, 0.0030, -0.0417, 0.8197],
    ])
    B = np.array([
        [0.0000, 0.0000, -0.0000],
        [-0.0003, 0.0001, 0.0000],
        [0.0009, -0.0007, 0.0001],
        [-0.0010, 0.0004, 0.0002],
    ])
    C = 1.0e4 * np.array([
        [0.0018, -0.0128, -0.0006, -0.0001],
        [-2.9695, -0.0029, 0.0002, -0.0028],
    ])
    L = np.array([
        [-0.0001, -0.0000],
        [-0.0073, -0.0001],
        [-0.0282, 0.0010],
        [-0.0038, -0.0020],
    ])
    model = StateSpaceModel(A, B, C, process_noise_std=np.full(4, 1e-4), sensor_noise_std=np.array([0.01, 1.0]))
    return model, KalmanGain(L)
