"""Cubic radial-basis interpolation of micro outputs over the input space.

The interpolant is s(x) = sum_i w_i |x - x_i|^3 + c0 + c.x (cubic kernel
plus a linear polynomial tail), fitted by solving the symmetric augmented
system

    [ K  P ] [w]   [y]
    [ P' 0 ] [c] = [0],     K_ij = |x_i - x_j|^3,  P_i = (1, x_i).

Inputs are rescaled internally to the training bounding box (the physical
dimensions differ by orders of magnitude); the rescaling is affine, so
exactness at the centers and exact reproduction of affine data both carry
over to the original coordinates.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator

__all__ = ["CubicRBFInterpolator", "loo_predictions"]


def _as_2d_floats(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-d (n_points, n_dims), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


class CubicRBFInterpolator(BaseEstimator):
    """Exact scattered-data interpolator with a cubic kernel and linear tail.

    sklearn-style estimator: ``fit(X, y)`` then ``predict(X)``. y may be
    (n_samples,) or (n_samples, n_outputs); all outputs share one
    factorization. The fitted interpolant passes through its centers to
    machine precision and reproduces affine functions exactly.
    """

    #: relative residual allowed at the interpolation centers
    center_residual_tol = 1e-9

    def fit(self, X, y):
        X = _as_2d_floats(X, "X")
        y = np.asarray(y, dtype=float)
        squeeze = y.ndim == 1
        if squeeze:
            y = y[:, None]
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs vs {y.shape[0]} outputs")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        n, d = X.shape
        if n < d + 2:
            raise ValueError(
                f"need at least n_dims+2 = {d + 2} centers for the linear tail, got {n}"
            )
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        span[span == 0.0] = 1.0
        Xs = (X - lo) / span
        diff = Xs[:, None, :] - Xs[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        dup = np.argwhere((r < 1e-13) & ~np.eye(n, dtype=bool))
        if dup.size:
            i, j = dup[0]
            raise ValueError(
                f"duplicate interpolation centers: rows {i} and {j} coincide"
            )
        a = np.zeros((n + d + 1, n + d + 1))
        a[:n, :n] = r**3
        a[:n, n] = 1.0
        a[:n, n + 1:] = Xs
        a[n, :n] = 1.0
        a[n + 1:, :n] = Xs.T
        rhs = np.zeros((n + d + 1, y.shape[1]))
        rhs[:n] = y
        try:
            lu, piv = scipy.linalg.lu_factor(a)
            coef = scipy.linalg.lu_solve((lu, piv), rhs)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise ValueError(f"singular interpolation system: {exc}") from exc
        if not np.all(np.isfinite(coef)):
            raise ValueError(
                "singular interpolation system (degenerate center geometry)"
            )
        # exactness check at the centers doubles as a degeneracy guard
        fitted = a[:n] @ coef
        scale = max(float(np.max(np.abs(y))), 1.0)
        resid = float(np.max(np.abs(fitted - y))) / scale
        if resid > self.center_residual_tol:
            raise ValueError(
                f"interpolation system near-singular: center residual {resid:.3e} "
                f"(collinear or clustered centers?)"
            )
        self.n_features_in_ = d
        self.centers_ = X.copy()
        self.lo_ = lo
        self.span_ = span
        self.coef_ = coef
        self.lu_ = (lu, piv)
        self.squeeze_ = squeeze
        return self

    def _eval_matrix(self, X: np.ndarray) -> np.ndarray:
        """[kernel block | 1 | x] rows for query points (scaled space)."""
        Xs = (X - self.lo_) / self.span_
        Cs = (self.centers_ - self.lo_) / self.span_
        diff = Xs[:, None, :] - Cs[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        q = np.empty((X.shape[0], Cs.shape[0] + Cs.shape[1] + 1))
        q[:, : Cs.shape[0]] = r**3
        q[:, Cs.shape[0]] = 1.0
        q[:, Cs.shape[0] + 1:] = Xs
        return q

    def predict(self, X) -> np.ndarray:
        X = _as_2d_floats(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"query has {X.shape[1]} dims, trained on {self.n_features_in_}"
            )
        out = self._eval_matrix(X) @ self.coef_
        return out[:, 0] if self.squeeze_ else out

    def query_weights(self, X) -> np.ndarray:
        """Weights W such that predictions at X equal W @ y for *any* output
        set y fitted on the same centers: W = (A^-1 q)^T restricted to the
        kernel rows (A is symmetric). Lets callers re-use one geometry for
        many per-step output vectors without re-solving.
        """
        X = _as_2d_floats(X, "X")
        q = self._eval_matrix(X)
        w = scipy.linalg.lu_solve(self.lu_, q.T)
        return w[: self.centers_.shape[0]].T


def loo_predictions(X, y) -> np.ndarray:
    """Leave-one-out predictions by explicit refits.

    Entry i is the interpolant fitted on all data except (X[i], y[i]),
    evaluated at X[i] -- literally fit+predict per fold, so the result is
    bit-identical to doing those refits by hand. This is the reference
    semantics; fast paths elsewhere must match it.
    """
    X = _as_2d_floats(X, "X")
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    yy = y[:, None] if squeeze else y
    n = X.shape[0]
    preds = np.empty((n, yy.shape[1]))
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        mask[i] = False
        preds[i] = CubicRBFInterpolator().fit(X[mask], yy[mask]).predict(X[i][None, :])
        mask[i] = True
    return preds[:, 0] if squeeze else preds
