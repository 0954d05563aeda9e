"""Confidence normalizers: map raw uncertainty to a bounded [0, 1] score.

All four scalers share the sklearn estimator protocol: ``fit(uncertainties,
qualities)`` then ``transform(uncertainties)``.  Linear and quantile scaling
only look at the uncertainty values; the performance-calibrated variants
(binned and isotonic) estimate the expected quality near a given uncertainty
and so need the quality column.

Linear, quantile, and isotonic scaling are monotone non-increasing in the
raw uncertainty, which preserves any ranking-based evaluation of the score.
Binned scaling is a step function over equal-frequency bins and may reorder
instances across bin boundaries.
"""

from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateRange, LengthMismatch, UnfittedModel

__all__ = [
    "LinearScaler",
    "QuantileScaler",
    "BinnedPcc",
    "IsotonicPcc",
    "SCALER_KINDS",
    "fit_scaler",
    "save_scaler",
    "load_scaler",
]


def _columns(uncertainties, qualities, need_quality: bool):
    u = np.asarray(uncertainties, dtype=float)
    if u.ndim != 1 or len(u) == 0:
        raise DegenerateRange("need a non-empty 1-d uncertainty array")
    if not need_quality:
        return u, None
    if qualities is None:
        raise LengthMismatch("this scaler needs quality values")
    q = np.asarray(qualities, dtype=float)
    if q.shape != u.shape:
        raise LengthMismatch(f"got {len(u)} uncertainties and {len(q)} qualities")
    return u, q


class _ScalerBase(BaseEstimator, TransformerMixin):
    kind = ""

    def _check_fitted(self):
        if not getattr(self, "fitted_", False):
            raise UnfittedModel(f"{type(self).__name__} is not fitted")

    def transform(self, uncertainties) -> np.ndarray:
        self._check_fitted()
        u = np.atleast_1d(np.asarray(uncertainties, dtype=float))
        return self._apply(u)

    def __call__(self, uncertainty: float) -> float:
        return float(self.transform([uncertainty])[0])

    def to_dict(self) -> dict:
        self._check_fitted()
        return {"kind": self.kind, **self._state()}


class LinearScaler(_ScalerBase):
    """Affine rescaling of negated uncertainty to [0, 1], clipped outside
    the calibration range."""

    kind = "linear"

    def fit(self, uncertainties, qualities=None) -> "LinearScaler":
        u, _ = _columns(uncertainties, qualities, need_quality=False)
        if len(u) < 2:
            raise DegenerateRange("need at least 2 calibration points")
        c = -u
        self.c_min_ = float(np.min(c))
        self.c_max_ = float(np.max(c))
        if self.c_max_ - self.c_min_ <= 0.0:
            raise DegenerateRange("calibration uncertainties are all equal")
        self.fitted_ = True
        return self

    def _apply(self, u: np.ndarray) -> np.ndarray:
        return np.clip((-u - self.c_min_) / (self.c_max_ - self.c_min_), 0.0, 1.0)

    def _state(self) -> dict:
        return {"c_min": self.c_min_, "c_max": self.c_max_}

    @classmethod
    def from_dict(cls, obj: dict) -> "LinearScaler":
        scaler = cls()
        scaler.c_min_ = float(obj["c_min"])
        scaler.c_max_ = float(obj["c_max"])
        scaler.fitted_ = True
        return scaler


class QuantileScaler(_ScalerBase):
    """One minus the empirical CDF of calibration uncertainties."""

    kind = "quantile"

    def fit(self, uncertainties, qualities=None) -> "QuantileScaler":
        u, _ = _columns(uncertainties, qualities, need_quality=False)
        self.sorted_u_ = np.sort(u)
        self.fitted_ = True
        return self

    def _apply(self, u: np.ndarray) -> np.ndarray:
        counts = np.searchsorted(self.sorted_u_, u, side="right")
        return 1.0 - counts / len(self.sorted_u_)

    def _state(self) -> dict:
        return {"sorted_uncertainties": self.sorted_u_.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "QuantileScaler":
        scaler = cls()
        scaler.sorted_u_ = np.asarray(obj["sorted_uncertainties"], dtype=float)
        scaler.fitted_ = True
        return scaler


class BinnedPcc(_ScalerBase):
    """Mean observed quality inside equal-frequency uncertainty bins.

    Queries return their bin's mean; out-of-range queries clamp to the
    nearest bin.  Boundary candidates that would create an empty bin are
    dropped, which merges the bin with its neighbor.
    """

    kind = "binned_pcc"

    def __init__(self, n_bins: int = 10):
        self.n_bins = n_bins

    def fit(self, uncertainties, qualities=None) -> "BinnedPcc":
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        u, q = _columns(uncertainties, qualities, need_quality=True)
        if len(u) < self.n_bins:
            raise DegenerateRange(f"need at least {self.n_bins} pairs for {self.n_bins} bins")
        order = np.argsort(u, kind="stable")
        u_sorted = u[order]
        positions = np.linspace(0, len(u), self.n_bins + 1).astype(int)
        candidates = [u_sorted[p] for p in positions[1:-1]]
        lo = float(u_sorted[0])
        hi = float(u_sorted[-1])
        edges = sorted({float(c) for c in candidates if lo < c <= hi})
        boundaries = [lo] + edges + [hi]
        inner = np.asarray(edges)
        membership = np.searchsorted(inner, u, side="right")
        bins = []
        for b in range(len(inner) + 1):
            mask = membership == b
            b_lo = boundaries[b]
            b_hi = boundaries[b + 1]
            bins.append((b_lo, b_hi, float(np.mean(q[mask])), int(np.sum(mask))))
        self.bins_ = bins
        self.inner_edges_ = inner
        self.fitted_ = True
        return self

    def _apply(self, u: np.ndarray) -> np.ndarray:
        means = np.array([b[2] for b in self.bins_])
        idx = np.searchsorted(self.inner_edges_, u, side="right")
        return means[idx]

    def _state(self) -> dict:
        return {"bins": [list(b) for b in self.bins_]}

    @classmethod
    def from_dict(cls, obj: dict) -> "BinnedPcc":
        scaler = cls(n_bins=len(obj["bins"]))
        scaler.bins_ = [tuple(b) for b in obj["bins"]]
        scaler.inner_edges_ = np.array([b[0] for b in scaler.bins_[1:]])
        scaler.fitted_ = True
        return scaler


def _pava_nondecreasing(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Pool adjacent violators for a non-decreasing fit; returns per-block
    (weight, weighted mean abscissa, value)."""
    blocks: list[list[float]] = []  # [weight, weighted x sum, weighted y sum]
    for xi, yi, wi in zip(x, y, w):
        blocks.append([wi, wi * xi, wi * yi])
        while len(blocks) > 1 and (
            blocks[-2][2] / blocks[-2][0] > blocks[-1][2] / blocks[-1][0]
        ):
            last = blocks.pop()
            blocks[-1][0] += last[0]
            blocks[-1][1] += last[1]
            blocks[-1][2] += last[2]
    return [(b[0], b[1] / b[0], b[2] / b[0]) for b in blocks]


class IsotonicPcc(_ScalerBase):
    """Centered isotonic regression of quality on uncertainty.

    Calibration pairs are pooled by adjacent-violators into monotone blocks;
    each block's mean quality is placed at the block's weight-centered
    uncertainty, and the curve interpolates linearly between those centers
    with flat extension beyond the ends.  The result is a piecewise-linear,
    non-increasing confidence curve that keeps the raw score's ordering.
    """

    kind = "isotonic_pcc"

    def fit(self, uncertainties, qualities=None) -> "IsotonicPcc":
        u, q = _columns(uncertainties, qualities, need_quality=True)
        if len(u) < 2:
            raise DegenerateRange("need at least 2 calibration points")
        # Aggregate duplicate uncertainties into weighted points.
        order = np.argsort(u, kind="stable")
        u_sorted = u[order]
        q_sorted = q[order]
        xs: list[float] = []
        ys: list[float] = []
        ws: list[float] = []
        i = 0
        while i < len(u_sorted):
            j = i + 1
            while j < len(u_sorted) and u_sorted[j] == u_sorted[i]:
                j += 1
            xs.append(float(u_sorted[i]))
            ys.append(float(np.mean(q_sorted[i:j])))
            ws.append(float(j - i))
            i = j
        # Non-increasing in u == non-decreasing in -u.
        neg_x = [-x for x in reversed(xs)]
        rev_y = list(reversed(ys))
        rev_w = list(reversed(ws))
        blocks = _pava_nondecreasing(
            np.asarray(neg_x), np.asarray(rev_y), np.asarray(rev_w)
        )
        knots_u = [-cx for _, cx, _ in reversed(blocks)]
        knots_c = [float(np.clip(cy, 0.0, 1.0)) for _, _, cy in reversed(blocks)]
        self.knots_u_ = np.asarray(knots_u)
        self.knots_c_ = np.asarray(knots_c)
        self.fitted_ = True
        return self

    def _apply(self, u: np.ndarray) -> np.ndarray:
        # np.interp needs increasing xp; confidence values are non-increasing.
        return np.interp(u, self.knots_u_, self.knots_c_)

    def _state(self) -> dict:
        return {"knots": [[float(x), float(c)] for x, c in zip(self.knots_u_, self.knots_c_)]}

    @classmethod
    def from_dict(cls, obj: dict) -> "IsotonicPcc":
        scaler = cls()
        knots = obj["knots"]
        scaler.knots_u_ = np.array([k[0] for k in knots], dtype=float)
        scaler.knots_c_ = np.array([k[1] for k in knots], dtype=float)
        scaler.fitted_ = True
        return scaler


SCALER_KINDS = {
    "linear": LinearScaler,
    "quantile": QuantileScaler,
    "binned_pcc": BinnedPcc,
    "isotonic_pcc": IsotonicPcc,
}


def fit_scaler(kind: str, uncertainties, qualities=None, **params) -> _ScalerBase:
    if kind not in SCALER_KINDS:
        raise ValueError(f"unknown scaler kind {kind!r}")
    return SCALER_KINDS[kind](**params).fit(uncertainties, qualities)


def save_scaler(scaler: _ScalerBase, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(scaler.to_dict(), handle, sort_keys=True)
        handle.write("\n")


def load_scaler(path) -> _ScalerBase:
    with open(path, "r", encoding="utf-8") as handle:
        obj = json.load(handle)
    kind = obj.get("kind")
    if kind not in SCALER_KINDS:
        raise ValueError(f"unknown scaler kind {kind!r}")
    return SCALER_KINDS[kind].from_dict(obj)
