"""
One-vs-rest kernel SVM trained by stochastic sub-gradient descent on the hinge loss.

Features are z-normalized with training statistics (constant features are
dropped). A constant 1 is added to every kernel value, which gives each
binary machine an implicit bias term.
"""

import json
import logging
import multiprocessing as mp
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from tcfinger.errors import BadInput, ConfigError, DegenerateLabels, IoError, StratifyError

KERNELS: Tuple[str, ...] = ("linear", "polynomial", "rbf", "sigmoid")
DEFAULT_KERNEL = "rbf"
DEFAULT_LAMBDA = 1e-3
DEFAULT_EPOCHS = 200
DEFAULT_FOLDS = 5
POLY_DEGREE = 3
POLY_COEF0 = 1.0
SIGMOID_COEF0 = 0.0


@dataclass
class SvmModel:
    """
    Trained one-vs-rest machine.

    Attributes:
        kernel: linear | polynomial | rbf | sigmoid
        classes: Sorted class labels; index order breaks prediction ties
        mean / std / keep: Normalization statistics and the mask of kept features
        support: Normalized training vectors
        coef: (classes, support) dual coefficients, already scaled by 1/(lambda*T)
        gamma / coef0 / degree: Kernel parameters
    """
    kernel: str
    classes: List[str]
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray
    support: np.ndarray
    coef: np.ndarray
    gamma: float
    coef0: float
    degree: int

    def normalize(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.mean.size)
        return (X[:, self.keep] - self.mean[self.keep]) / self.std[self.keep]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Z = self.normalize(X)
        K = kernel_matrix(self.support, Z, self.kernel, self.gamma, self.coef0, self.degree) + 1.0
        return (self.coef @ K).T


def _check_matrix(X, n_features: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise BadInput(f"Expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise BadInput(f"Expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise BadInput("Feature matrix contains NaN or infinite values")
    return X


def kernel_matrix(X: np.ndarray, Z: np.ndarray, kernel: str, gamma: float, coef0: float = 0.0, degree: int = POLY_DEGREE) -> np.ndarray:
    """K[i, j] = k(X[i], Z[j])."""
    if kernel == "linear":
        return X @ Z.T
    if kernel == "polynomial":
        return (gamma * (X @ Z.T) + coef0) ** degree
    if kernel == "rbf":
        sq = np.sum(X ** 2, axis=1)[:, None] + np.sum(Z ** 2, axis=1)[None, :] - 2.0 * (X @ Z.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kernel == "sigmoid":
        return np.tanh(gamma * (X @ Z.T) + coef0)
    raise ConfigError(f"Unknown kernel '{kernel}'; expected one of {KERNELS}")


def _kernel_params(kernel: str, Xn: np.ndarray) -> Tuple[float, float]:
    n_features = max(Xn.shape[1], 1)
    if kernel == "rbf":
        var = float(Xn.var()) if Xn.size else 0.0
        return 1.0 / (n_features * (var if var > 0 else 1.0)), 0.0
    if kernel == "polynomial":
        return 1.0 / n_features, POLY_COEF0
    if kernel == "sigmoid":
        return 1.0 / n_features, SIGMOID_COEF0
    return 0.0, 0.0


def _pegasos(K: np.ndarray, targets: np.ndarray, lam: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Kernel Pegasos; returns the hinge-violation counts alpha."""
    n = K.shape[0]
    alpha = np.zeros(n)
    g = np.zeros(n)
    picks = rng.integers(0, n, size=steps)
    for t, i in enumerate(picks, start=1):
        if targets[i] * g[i] / (lam * t) < 1.0:
            alpha[i] += 1.0
            g += targets[i] * K[i]
    return alpha


def train(
    X,
    y: Sequence,
    kernel: str = DEFAULT_KERNEL,
    epochs: int = DEFAULT_EPOCHS,
    lam: float = DEFAULT_LAMBDA,
    seed: int = 0,
) -> SvmModel:
    """
    Train one binary machine per class against the rest.

    Args:
        X: (n, features) matrix
        y: Labels (any hashable; stored as strings)
        kernel: linear | polynomial | rbf | sigmoid
        epochs: Passes over the data (epochs * n sub-gradient steps per class)
        lam: Regularization strength
        seed: Each class machine draws its samples from default_rng(seed)
    """
    if kernel not in KERNELS:
        raise ConfigError(f"Unknown kernel '{kernel}'; expected one of {KERNELS}")
    X = _check_matrix(X)
    labels = np.array([str(v) for v in y])
    if labels.size != X.shape[0]:
        raise BadInput(f"{X.shape[0]} samples but {labels.size} labels")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise DegenerateLabels("Training needs at least two classes")
    for c in classes:
        if np.count_nonzero(labels == c) < 2:
            raise DegenerateLabels(f"Class {c} has fewer than two samples")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0
    Xn = (X[:, keep] - mean[keep]) / std[keep]
    gamma, coef0 = _kernel_params(kernel, Xn)
    K = kernel_matrix(Xn, Xn, kernel, gamma, coef0) + 1.0

    steps = epochs * X.shape[0]
    coef = np.zeros((len(classes), X.shape[0]))
    for ci, c in enumerate(classes):
        targets = np.where(labels == c, 1.0, -1.0)
        alpha = _pegasos(K, targets, lam, steps, np.random.default_rng(seed))
        coef[ci] = alpha * targets / (lam * steps)
    logging.debug(f"Trained {kernel} SVM on {X.shape[0]} samples, {int(keep.sum())} features, {len(classes)} classes")
    return SvmModel(kernel=kernel, classes=classes, mean=mean, std=np.where(keep, std, 1.0), keep=keep,
                    support=Xn, coef=coef, gamma=gamma, coef0=coef0, degree=POLY_DEGREE)


def predict_many(model: SvmModel, X) -> List[str]:
    scores = model.decision_function(X)
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


def predict(model: SvmModel, x) -> str:
    """Label with the highest decision value; ties go to the first class in sorted order."""
    return predict_many(model, x)[0]


def accuracy(model: SvmModel, X, y: Sequence) -> float:
    predicted = predict_many(model, X)
    truth = [str(v) for v in y]
    return float(np.mean([p == t for p, t in zip(predicted, truth)]))


def stratified_folds(y: Sequence, folds: int, seed: int = 0) -> List[np.ndarray]:
    """Test indices of each fold; every class is dealt round-robin after a seeded shuffle."""
    if folds < 2:
        raise ConfigError(f"folds must be >= 2, got {folds}")
    labels = np.array([str(v) for v in y])
    rng = np.random.default_rng(seed)
    buckets: List[List[int]] = [[] for _ in range(folds)]
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        if idx.size < folds:
            raise StratifyError(f"Class {c} has {idx.size} samples, fewer than {folds} folds")
        idx = rng.permutation(idx)
        for k, i in enumerate(idx):
            buckets[k % folds].append(int(i))
    return [np.array(sorted(b)) for b in buckets]


def _fold_accuracy(args) -> Tuple[str, float]:
    X, labels, test_idx, kernel, epochs, lam, seed = args
    mask = np.ones(labels.size, dtype=bool)
    mask[test_idx] = False
    model = train(X[mask], labels[mask], kernel=kernel, epochs=epochs, lam=lam, seed=seed)
    return kernel, accuracy(model, X[test_idx], labels[test_idx])


def cross_validate(
    X,
    y: Sequence,
    folds: int = DEFAULT_FOLDS,
    kernels: Sequence[str] = KERNELS,
    epochs: int = DEFAULT_EPOCHS,
    lam: float = DEFAULT_LAMBDA,
    seed: int = 0,
    workers: Optional[int] = None,
) -> Dict[str, float]:
    """
    Mean held-out accuracy per kernel over stratified folds.

    Args:
        workers: Size of the process pool for (kernel, fold) jobs; None runs serially
    """
    X = _check_matrix(X)
    labels = np.array([str(v) for v in y])
    if len(set(labels.tolist())) < 2:
        raise DegenerateLabels("Cross-validation needs at least two classes")
    splits = stratified_folds(labels, folds, seed)
    jobs = [(X, labels, test_idx, kernel, epochs, lam, seed) for kernel in kernels for test_idx in splits]
    if workers and workers > 1:
        with mp.Pool(processes=workers) as pool:
            results = pool.map(_fold_accuracy, jobs)
    else:
        results = [_fold_accuracy(job) for job in jobs]

    table: Dict[str, float] = {}
    for kernel in kernels:
        table[kernel] = float(np.mean([acc for k, acc in results if k == kernel]))
        logging.info(f"{kernel:<10} {folds}-fold accuracy: {table[kernel]:.2%}")
    return table


class SvmDocument(BaseModel):
    kernel: str
    classes: List[str]
    mean: List[float]
    std: List[float]
    keep: List[bool]
    support: List[List[float]]
    coef: List[List[float]]
    gamma: float
    coef0: float
    degree: int


def save_svm(path: str, model: SvmModel) -> None:
    doc = SvmDocument(
        kernel=model.kernel, classes=model.classes, mean=model.mean.tolist(), std=model.std.tolist(),
        keep=model.keep.tolist(), support=model.support.tolist(), coef=model.coef.tolist(),
        gamma=model.gamma, coef0=model.coef0, degree=model.degree,
    )
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(doc.model_dump_json())
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_svm(path: str) -> SvmModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = SvmDocument.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise IoError(f"Model file {path} not found") from e
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"Invalid model file {path}: {e}") from e
    n_kept = int(sum(doc.keep))
    support = np.asarray(doc.support, dtype=float).reshape(len(doc.support), n_kept)
    return SvmModel(
        kernel=doc.kernel, classes=doc.classes, mean=np.asarray(doc.mean), std=np.asarray(doc.std),
        keep=np.asarray(doc.keep, dtype=bool), support=support, coef=np.asarray(doc.coef, dtype=float),
        gamma=doc.gamma, coef0=doc.coef0, degree=doc.degree,
    )
