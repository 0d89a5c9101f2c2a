"""scikit-learn style wrappers around the path functionals.

Inputs are sequences of StepPaths (or of (H, X) pairs for the
consecutive-increment modulus); outputs are plain float arrays with one
row per sample.  Importing this module pulls in scikit-learn, so the
rest of the package does not import it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import metrics as _m
from .errors import BadParameter, InsufficientData, NotFittedError
from .montecarlo import QUANTILES, _trend, wilson_interval
from .paths import StepPath, sup_norm

__all__ = ["ModulusTransformer", "IncrementProbability", "TrendEstimator"]


def _check_fitted(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


def _check_paths(X) -> list[StepPath]:
    paths = list(X)
    if not paths:
        raise InsufficientData("no paths given")
    for p in paths:
        if not isinstance(p, StepPath):
            raise BadParameter(f"expected StepPath, got {type(p).__name__}")
    return paths


class ModulusTransformer(BaseEstimator, TransformerMixin):
    """Maps each path to ``[|x|*_T, w'(theta), w''(theta), ...]`` for every
    theta in ``thetas``.  ``fit`` records the column quantiles."""

    def __init__(self, thetas=(0.05,), T=None, moduli=("w_prime", "w_dprime")):
        self.thetas = thetas
        self.T = T
        self.moduli = moduli

    def _columns(self):
        fns = {"w_prime": _m.w_prime, "w_dprime": _m.w_dprime, "v_tilde": _m.v_tilde}
        for name in self.moduli:
            if name not in fns:
                raise BadParameter(f"unknown modulus {name!r}")
        return [("sup_norm", None)] + [(name, th) for th in self.thetas for name in self.moduli], fns

    def get_feature_names_out(self, input_features=None):
        cols, _ = self._columns()
        return np.array([c if th is None else f"{c}[{th}]" for c, th in cols], dtype=object)

    def transform(self, X):
        paths = _check_paths(X)
        cols, fns = self._columns()
        out = np.empty((len(paths), len(cols)))
        for i, p in enumerate(paths):
            for j, (name, th) in enumerate(cols):
                out[i, j] = sup_norm(p, self.T) if th is None else fns[name](p, th, self.T)
        return out

    def fit(self, X, y=None):
        Z = self.transform(X)
        self.quantiles_ = np.quantile(Z, QUANTILES, axis=0)
        self.n_samples_ = Z.shape[0]
        return self

    def quantile(self, level: float) -> np.ndarray:
        _check_fitted(self, "quantiles_")
        if level not in QUANTILES:
            raise BadParameter(f"level must be one of {QUANTILES}")
        return self.quantiles_[QUANTILES.index(level)]


class IncrementProbability(BaseEstimator):
    """Estimates ``P(w_hat_delta(H, X) > gamma)`` for each delta from
    a sample of (H, X) pairs, with Wilson intervals."""

    def __init__(self, deltas=(0.01,), gamma=0.1, T=None):
        self.deltas = deltas
        self.gamma = gamma
        self.T = T

    def transform(self, pairs) -> np.ndarray:
        pairs = list(pairs)
        if not pairs:
            raise InsufficientData("no pairs given")
        return np.array([[_m.consecutive_increment(H, X, d, self.T) for d in self.deltas] for H, X in pairs])

    def fit(self, pairs, y=None):
        if not self.gamma > 0:
            raise BadParameter("gamma must be positive")
        W = self.transform(pairs)
        hits = (W > self.gamma).sum(axis=0)
        N = W.shape[0]
        self.probability_ = hits / N
        self.interval_ = np.array([wilson_interval(int(k), N) for k in hits])
        return self

    def predict(self, pairs) -> np.ndarray:
        """Per-pair indicator matrix of exceedances."""
        _check_fitted(self, "probability_")
        return (self.transform(pairs) > self.gamma).astype(float)


class TrendEstimator(BaseEstimator):
    """Power-law fit ``median ~ C n^slope`` with a monotonicity verdict.

    ``fit(ns, samples)`` takes one sample array (or one median) per n.
    """

    def fit(self, ns: Sequence[int], samples, y=None):
        from .montecarlo import _value_stats

        med, lo, hi = [], [], []
        for s in samples:
            v = np.atleast_1d(np.asarray(s, dtype=float))
            if v.size == 1:
                med.append(v[0]); lo.append(v[0]); hi.append(v[0])
            else:
                st = _value_stats(v)
                med.append(st["median"]); lo.append(st["median_lo"]); hi.append(st["median_hi"])
        if len(med) != len(ns):
            raise BadParameter("one sample per n is required")
        t = _trend("value", "", list(ns), med, lo, hi)
        self.summary_ = t
        self.verdict_ = t.verdict
        self.slope_ = t.slope
        if t.slope is not None:
            logn = np.log(np.asarray(t.ns, dtype=float))
            self.intercept_ = float(np.mean(np.log(np.abs(t.medians)) - t.slope * logn))
            self.sign_ = float(np.sign(t.medians[-1]))
        return self

    def predict(self, ns) -> np.ndarray:
        _check_fitted(self, "summary_")
        if self.slope_ is None:
            raise InsufficientData("medians contain zeros; no power law was fitted")
        return self.sign_ * np.exp(self.intercept_ + self.slope_ * np.log(np.asarray(ns, dtype=float)))
