"""Linear readout: ridge training, NMSE and winner-takes-all classification."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from rcbo.matrix_io import read_matrix, write_matrix


class ReadoutError(ValueError):
    pass


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    """Ridge settings.

    ``tune_lambda`` selects ``ridge_lambda`` from ``lambda_grid`` on a
    held-out part of the training split (see ``rcbo.tasks``).
    """

    ridge_lambda: float = 1e-4
    include_bias: bool = True
    tune_lambda: bool = False
    lambda_grid: tuple[float, ...] = (1e-8, 1e-6, 1e-4, 1e-2, 1.0)

    def __post_init__(self):
        if not self.ridge_lambda >= 0:
            raise ReadoutError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")


@dataclass(frozen=True)
class ReadoutWeights:
    w: np.ndarray                 # N x C
    bias: np.ndarray | None = None  # C

    def apply(self, states) -> np.ndarray:
        y = np.asarray(states, dtype=float) @ self.w
        if self.bias is not None:
            y = y + self.bias
        return y

    def save(self, path) -> None:
        M = self.w if self.bias is None else np.vstack([self.w, self.bias])
        write_matrix(path, M)

    @classmethod
    def load(cls, path, include_bias: bool) -> "ReadoutWeights":
        """Bias, when present, is stored as the last row."""
        M, _ = read_matrix(path)
        if include_bias:
            return cls(M[:-1].copy(), M[-1].copy())
        return cls(M)


def _design(states, include_bias):
    S = np.atleast_2d(np.asarray(states, dtype=float))
    if include_bias:
        S = np.hstack([S, np.ones((S.shape[0], 1))])
    return S


def ridge_train(states, targets, cfg: TrainingConfig = TrainingConfig()) -> ReadoutWeights:
    """Solve ``(S^T S + lambda I) w = S^T D`` by Cholesky.

    With ``include_bias`` a constant column is appended to ``S``; its
    weight is regularised like the others.
    """
    S = _design(states, cfg.include_bias)
    D = np.asarray(targets, dtype=float)
    if D.ndim == 1:
        D = D[:, None]
    if S.shape[0] < 1 or S.shape[0] != D.shape[0]:
        raise ReadoutError(f"states {S.shape} and targets {D.shape} disagree")
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(D))):
        raise ReadoutError("non-finite states or targets")
    lam = cfg.ridge_lambda
    A = S.T @ S
    if lam == 0 and np.linalg.matrix_rank(S) < S.shape[1]:
        raise SingularSystemError("S^T S is rank deficient; use ridge_lambda > 0")
    A[np.diag_indices_from(A)] += lam
    try:
        w = linalg.cho_solve(linalg.cho_factor(A, lower=True), S.T @ D)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"ridge system not positive definite ({exc}); use ridge_lambda > 0") from exc
    if cfg.include_bias:
        return ReadoutWeights(w[:-1], w[-1])
    return ReadoutWeights(w)


def nmse(y, d) -> float:
    """Mean squared error normalised by the (population) variance of ``d``."""
    y = np.asarray(y, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if y.shape != d.shape or d.size < 2:
        raise ReadoutError("y and d need equal lengths >= 2")
    var = np.mean((d - d.mean()) ** 2)
    if var == 0:
        raise ReadoutError("target is constant; NMSE undefined")
    return float(np.mean((y - d) ** 2) / var)


def classify_sequence(frame_outputs) -> int:
    """Winner-takes-all per frame, then majority vote; ties go to the lowest class."""
    Y = np.atleast_2d(np.asarray(frame_outputs, dtype=float))
    winners = np.argmax(Y, axis=1)
    return int(np.argmax(np.bincount(winners, minlength=Y.shape[1])))


def accuracy(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape or predicted.size < 1:
        raise ReadoutError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    return float(np.mean(predicted == truth))


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out
