"""Density-based uncertainty over record embeddings.

Scorers follow the sklearn estimator protocol: construct with
hyperparameters, ``fit`` on a training matrix of embeddings, then score
query embeddings.  Fits are immutable after construction and serialize to a
plain JSON artifact that reloads bit-exactly.

``MahalanobisScorer`` is the squared Mahalanobis distance to the training
centroid.  ``RdeScorer`` first projects onto the top principal components
and replaces the plain covariance with a minimum-covariance-determinant
robust fit.  ``huq`` fuses an information-based and a density-based score
list by rank interpolation.
"""

from __future__ import annotations

import json
import math
from typing import Optional

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator

from .errors import DegenerateFit, DimensionMismatch, LengthMismatch, UnfittedModel

__all__ = [
    "MahalanobisScorer",
    "RdeScorer",
    "relative_mahalanobis",
    "huq",
    "save_fit",
    "load_fit",
]

_RIDGE_SCALE = 1e-6
_RIDGE_FLOOR = 1e-12


def _as_matrix(embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array of embeddings, got shape {x.shape}")
    return x


def _mean_and_covariance(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    centered = x - mean
    return mean, centered.T @ centered / len(x)


def _default_ridge(covariance: np.ndarray) -> float:
    d = covariance.shape[0]
    return max(_RIDGE_SCALE * float(np.trace(covariance)) / d, _RIDGE_FLOOR)


class MahalanobisScorer(BaseEstimator):
    """Squared Mahalanobis distance to the centroid of the fit data.

    ``ridge`` is added to the covariance diagonal before inversion; ``None``
    scales it to the covariance trace, 0 disables regularization entirely.
    """

    def __init__(self, ridge: Optional[float] = None):
        self.ridge = ridge

    def fit(self, embeddings, y=None) -> "MahalanobisScorer":
        x = _as_matrix(embeddings)
        if len(x) < 2:
            raise DegenerateFit(f"need at least 2 embeddings, got {len(x)}")
        mean, covariance = _mean_and_covariance(x)
        ridge = self.ridge if self.ridge is not None else _default_ridge(covariance)
        if ridge < 0:
            raise ValueError("ridge must be >= 0")
        covariance = covariance + ridge * np.eye(covariance.shape[0])
        self.mean_ = mean
        self.covariance_ = covariance
        self.precision_ = np.linalg.inv(covariance)
        self.n_features_in_ = x.shape[1]
        self.n_samples_ = len(x)
        return self

    def _check_fitted(self):
        if not hasattr(self, "mean_"):
            raise UnfittedModel("fit the scorer before scoring")

    def score_one(self, embedding) -> float:
        self._check_fitted()
        x = np.asarray(embedding, dtype=float)
        if x.shape != (self.n_features_in_,):
            raise DimensionMismatch(
                f"expected dimension {self.n_features_in_}, got shape {x.shape}"
            )
        delta = x - self.mean_
        return float(delta @ self.precision_ @ delta)

    def score_samples(self, embeddings) -> np.ndarray:
        return np.array([self.score_one(e) for e in _as_matrix(embeddings)])

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "kind": "mahalanobis",
            "mean": self.mean_.tolist(),
            "covariance": self.covariance_.tolist(),
            "params": {"ridge": self.ridge, "n_samples": self.n_samples_},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MahalanobisScorer":
        scorer = cls(ridge=obj["params"]["ridge"])
        scorer.mean_ = np.asarray(obj["mean"], dtype=float)
        scorer.covariance_ = np.asarray(obj["covariance"], dtype=float)
        scorer.precision_ = np.linalg.inv(scorer.covariance_)
        scorer.n_features_in_ = len(scorer.mean_)
        scorer.n_samples_ = int(obj["params"]["n_samples"])
        return scorer


def _fit_subset_gaussian(x: np.ndarray, ridge: Optional[float]) -> MahalanobisScorer:
    return MahalanobisScorer(ridge=ridge).fit(x)


def _c_step_distances(x: np.ndarray, mean: np.ndarray, covariance: np.ndarray) -> np.ndarray:
    # Small ridge keeps the C-step metric usable on degenerate subsets.
    cov = covariance + max(_default_ridge(covariance), _RIDGE_FLOOR) * np.eye(covariance.shape[0])
    precision = np.linalg.inv(cov)
    centered = x - mean
    return np.einsum("ij,jk,ik->i", centered, precision, centered)


def _fast_mcd_support(x: np.ndarray, h: int, restarts: int, seed: int) -> np.ndarray:
    """Indices of the size-h subset found by subsample-and-C-step search."""
    n, d = x.shape
    rng = np.random.default_rng(seed)
    best_det = math.inf
    best_support = np.arange(h)
    for _ in range(restarts):
        support = rng.choice(n, size=min(d + 1, n), replace=False)
        prev_det = math.inf
        for _ in range(50):
            mean, covariance = _mean_and_covariance(x[support])
            distances = _c_step_distances(x, mean, covariance)
            support = np.argsort(distances, kind="stable")[:h]
            _, cov_h = _mean_and_covariance(x[support])
            sign, logdet = np.linalg.slogdet(
                cov_h + _RIDGE_FLOOR * np.eye(d)
            )
            det = logdet if sign > 0 else -math.inf
            if det >= prev_det - 1e-12:
                break
            prev_det = det
        if prev_det < best_det:
            best_det = prev_det
            best_support = np.sort(support)
    return best_support


class RdeScorer(BaseEstimator):
    """Mahalanobis distance in a PCA-reduced space with a robust covariance.

    ``r`` is the reduced dimension (default ``min(d, n - 1, 100)``),
    ``mcd_fraction`` the fraction of points the minimum-covariance-
    determinant search keeps; 1.0 disables trimming, in which case the fit
    equals a plain Gaussian fit in the projected space.
    """

    def __init__(
        self,
        r: Optional[int] = None,
        mcd_fraction: float = 1.0,
        ridge: Optional[float] = None,
        restarts: int = 20,
        seed: int = 0,
    ):
        self.r = r
        self.mcd_fraction = mcd_fraction
        self.ridge = ridge
        self.restarts = restarts
        self.seed = seed

    def fit(self, embeddings, y=None) -> "RdeScorer":
        if not 0.5 < self.mcd_fraction <= 1.0:
            raise ValueError("mcd_fraction must lie in (0.5, 1]")
        x = _as_matrix(embeddings)
        n, d = x.shape
        r = self.r if self.r is not None else min(d, n - 1, 100)
        if not 1 <= r <= d:
            raise DegenerateFit(f"reduced dimension {r} outside [1, {d}]")
        if n <= r:
            raise DegenerateFit(f"need more than {r} embeddings, got {n}")
        _, covariance = _mean_and_covariance(x)
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        order = np.argsort(eigenvalues, kind="stable")[::-1][:r]
        projection = eigenvectors[:, order]
        # Deterministic sign: largest-magnitude component of each axis positive.
        for col in range(projection.shape[1]):
            pivot = int(np.argmax(np.abs(projection[:, col])))
            if projection[pivot, col] < 0:
                projection[:, col] = -projection[:, col]
        reduced = x @ projection
        h = int(round(self.mcd_fraction * n))
        h = min(max(h, r + 1), n)
        if h == n:
            support = np.arange(n)
        else:
            support = _fast_mcd_support(reduced, h, self.restarts, self.seed)
        self.projection_ = projection
        self.robust_ = _fit_subset_gaussian(reduced[support], self.ridge)
        self.support_ = support
        self.r_ = r
        self.n_features_in_ = d
        return self

    def _check_fitted(self):
        if not hasattr(self, "projection_"):
            raise UnfittedModel("fit the scorer before scoring")

    def score_one(self, embedding) -> float:
        self._check_fitted()
        x = np.asarray(embedding, dtype=float)
        if x.shape != (self.n_features_in_,):
            raise DimensionMismatch(
                f"expected dimension {self.n_features_in_}, got shape {x.shape}"
            )
        return self.robust_.score_one(self.projection_.T @ x)

    def score_samples(self, embeddings) -> np.ndarray:
        return np.array([self.score_one(e) for e in _as_matrix(embeddings)])

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "kind": "rde",
            "projection": self.projection_.tolist(),
            "robust": self.robust_.to_dict(),
            "params": {
                "r": self.r_,
                "mcd_fraction": self.mcd_fraction,
                "ridge": self.ridge,
                "restarts": self.restarts,
                "seed": self.seed,
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RdeScorer":
        params = obj["params"]
        scorer = cls(
            r=params["r"],
            mcd_fraction=params["mcd_fraction"],
            ridge=params["ridge"],
            restarts=params["restarts"],
            seed=params["seed"],
        )
        scorer.projection_ = np.asarray(obj["projection"], dtype=float)
        scorer.robust_ = MahalanobisScorer.from_dict(obj["robust"])
        scorer.r_ = params["r"]
        scorer.n_features_in_ = scorer.projection_.shape[0]
        return scorer


def relative_mahalanobis(
    fit_task: MahalanobisScorer, fit_background: MahalanobisScorer, embedding
) -> float:
    """Task-centroid distance minus background-centroid distance.

    Negative values mark points that look more in-task than in-background.
    """
    if fit_task.n_features_in_ != fit_background.n_features_in_:
        raise DimensionMismatch("task and background fits disagree on dimension")
    return fit_task.score_one(embedding) - fit_background.score_one(embedding)


def huq(info_scores, density_scores, alpha: float = 0.5) -> list[float]:
    """Rank interpolation of an information-based and a density-based score
    list.  Ranks are tie-averaged, combined as ``(1 - alpha) * rank_info +
    alpha * rank_density``, re-ranked, and rescaled to [0, 1].
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    info = np.asarray(info_scores, dtype=float)
    dens = np.asarray(density_scores, dtype=float)
    if len(info) != len(dens):
        raise LengthMismatch(f"got {len(info)} info scores and {len(dens)} density scores")
    if len(info) == 0:
        raise LengthMismatch("inputs must be non-empty")
    n = len(info)
    if n == 1:
        return [0.5]
    combined = (1.0 - alpha) * rankdata(info, method="average") + alpha * rankdata(
        dens, method="average"
    )
    final = rankdata(combined, method="average")
    return [float(v) for v in (final - 1.0) / (n - 1.0)]


def save_fit(fit, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(fit.to_dict(), handle, sort_keys=True)
        handle.write("\n")


def load_fit(path):
    with open(path, "r", encoding="utf-8") as handle:
        obj = json.load(handle)
    if obj.get("kind") == "mahalanobis":
        return MahalanobisScorer.from_dict(obj)
    if obj.get("kind") == "rde":
        return RdeScorer.from_dict(obj)
    raise ValueError(f"unknown fit kind {obj.get('kind')!r}")
