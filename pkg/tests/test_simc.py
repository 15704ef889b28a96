"""Semi-intrusive Monte Carlo — Test Suite.

Proves:
 Group 1 — Error bounds (LOO twins)
   1.  u == u_tilde gives exactly zero bounds and an accept
   2.  two-point arithmetic: |u-u_tilde| = {0.1, 0.3} -> mean 0.2,
       std 0.14142135623730953
   3.  exactly tied comparison rejects (conservative rule)
   4.  decision is monotone in the residual scale: growing residuals can
       flip accept->reject only

 Group 2 — Estimator consistency
   5.  N_mu = N is bit-exact against run_mc (store "final" and "all")
   6.  affine micro response: interpolation is exact, so pooled moments
       match full MC at machine precision and the test accepts
   7.  rejection returns the subsample MC flagged as fallback

 Group 3 — Benchmark behavior
   8.  case 1 desk configuration accepts; SIMC runs faster than MC
   9.  subsample indices are unique and honor the selection strategy
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from musc_up.coupling import Field, Grid1D, TimeScales
from musc_up.models.case1 import Case1Model, case1_config, case1_distribution
from musc_up.montecarlo import run_mc
from musc_up.simc import (
    ErrorBoundReport,
    SamplingPlan,
    error_bounds,
    interpolation_test,
    run_simc,
    select_subsample,
)
from musc_up.sampling import InputDistribution


# ── Group 1 — Error bounds (LOO twins) ───────────────────────────────────────


def test_zero_residuals_accept():
    rng = np.random.default_rng(0)
    u = rng.random((12, 9))
    report = error_bounds(u, u.copy(), seed=1)
    np.testing.assert_array_equal(report.eps_mean, 0.0)
    np.testing.assert_array_equal(report.eps_std, 0.0)
    assert report.decision == "accept"


def test_two_point_bounds():
    u = np.array([[0.1], [0.3]])
    report = error_bounds(u, np.zeros((2, 1)), seed=0)
    assert report.eps_mean[0] == pytest.approx(0.2, rel=1e-15)
    assert report.eps_std[0] == pytest.approx(0.14142135623730953, rel=1e-12)
    assert report.n_folds == 2


def test_exact_tie_rejects():
    """Equal spatial means on the mean side must reject even though the std
    side passes strictly."""
    shape = (4,)
    report = ErrorBoundReport(
        eps_mean=np.full(shape, 0.5),
        eps_std=np.full(shape, 0.01),
        ci_mean=(np.full(shape, 0.4), np.full(shape, 1.0)),
        ci_std=(np.full(shape, 0.0), np.full(shape, 0.02)),
        mc_ci_halfwidth_mean=np.full(shape, 1.0),
        mc_ci_halfwidth_std=np.full(shape, 0.5),
        level=0.95,
        n_folds=10,
    )
    assert interpolation_test(report) == "reject"


def test_decision_monotone_in_residual_scale():
    """Same seed keeps the bootstrap resamples fixed, so scaling residuals
    scales the bound CIs exactly; decisions may only march accept->reject."""
    rng = np.random.default_rng(5)
    u = rng.random((20, 7)) + 1.0
    base = rng.standard_normal((20, 7)) * 1e-4
    decisions = []
    for scale in (1.0, 10.0, 100.0, 1000.0, 10000.0):
        report = error_bounds(u, u + scale * base, seed=11)
        decisions.append(report.decision)
    assert decisions[0] == "accept"
    assert decisions[-1] == "reject"
    first_reject = decisions.index("reject")
    assert all(d == "reject" for d in decisions[first_reject:]), decisions


# ── Group 2 — Estimator consistency ──────────────────────────────────────────


def test_nmu_equals_n_bit_exact():
    dist = case1_distribution()
    cfg = case1_config(dist=dist)
    model = Case1Model(cfg)
    scales = cfg.time_scales()
    for store in ("final", "all"):
        mc = run_mc(model, dist, scales, 12, seed=4, store=store)
        si = run_simc(model, dist, scales, SamplingPlan(12, 12), seed=4, store=store)
        assert si.decision == "accept"
        for a, b in zip(si.moments.estimates, mc.moments.estimates):
            assert np.array_equal(a.mean, b.mean)
            assert np.array_equal(a.std, b.std)


class _AffineMicroModel:
    """Toy coupled pair whose micro output is affine in the inputs, making
    cubic-RBF interpolation exact: SIMC must match plain MC to roundoff."""

    n_inputs = 2
    grid = Grid1D(n=6, dx=1.0 / 6.0, length=1.0)

    def params_from_xi(self, xi):
        return (float(xi[0]), float(xi[1]))

    def initial_state(self):
        return Field(np.zeros(6), self.grid)

    def micro_step(self, state, params, dt_micro, n_micro):
        a, b = params
        profile = a + 2.0 * b * np.linspace(0.0, 1.0, 6)
        return Field(state.values * 0.5 + profile, self.grid)

    def macro_step(self, state, v, params, dt):
        return Field(state.values + dt * v.values, self.grid)


def test_affine_micro_interpolation_exact():
    model = _AffineMicroModel()
    dist = InputDistribution(np.array([1.0, 2.0]), np.array([0.2, 0.2]))
    scales = TimeScales.from_macro(0.5, 2, 3.0)
    mc = run_mc(model, dist, scales, 40, seed=8, store="final")
    si = run_simc(model, dist, scales, SamplingPlan(40, 10), seed=8, store="final")
    assert si.decision == "accept"
    assert not si.fallback
    np.testing.assert_allclose(
        si.moments.final.mean, mc.moments.final.mean, rtol=1e-12, atol=1e-13
    )
    np.testing.assert_allclose(
        si.moments.final.std, mc.moments.final.std, rtol=1e-10, atol=1e-13
    )
    # the LOO twins are exact too, so the bounds collapse to roundoff
    assert np.max(report_bound := si.bounds.eps_mean) < 1e-12, report_bound.max()


class _RoughMicroModel(_AffineMicroModel):
    """Micro output oscillates fast in xi_0: 10 centers cannot interpolate,
    LOO residuals blow past the subsample MC precision and the test rejects."""

    def micro_step(self, state, params, dt_micro, n_micro):
        a, b = params
        profile = np.sin(400.0 * a) + 0.0 * b + np.linspace(0.0, 1.0, 6)
        return Field(state.values * 0.5 + profile, self.grid)


def test_reject_returns_flagged_fallback():
    model = _RoughMicroModel()
    dist = InputDistribution(np.array([1.0, 2.0]), np.array([0.2, 0.2]))
    scales = TimeScales.from_macro(0.5, 2, 3.0)
    si = run_simc(model, dist, scales, SamplingPlan(60, 10), seed=2, store="final")
    assert si.decision == "reject"
    assert si.fallback
    np.testing.assert_array_equal(si.moments.final.mean, si.sub_moments.final.mean)
    np.testing.assert_array_equal(si.moments.final.std, si.sub_moments.final.std)
    assert si.sub_moments.final.n_samples == 10


# ── Group 3 — Benchmark behavior ─────────────────────────────────────────────


def test_case1_accepts_and_outpaces_mc():
    dist = case1_distribution()
    cfg = case1_config(dist=dist)
    model = Case1Model(cfg)
    scales = cfg.time_scales()
    t0 = time.perf_counter()
    mc = run_mc(model, dist, scales, 400, seed=0, store="final")
    t_mc = time.perf_counter() - t0
    t0 = time.perf_counter()
    si = run_simc(model, dist, scales, SamplingPlan(400, 50), seed=0, store="final")
    t_si = time.perf_counter() - t0
    assert si.decision == "accept"
    rel = np.max(np.abs(si.moments.final.std - mc.moments.final.std) / mc.moments.final.std)
    assert rel < 5e-3, f"SIMC std deviates {rel:.2e} from same-seed MC"
    assert t_si < t_mc, f"SIMC {t_si:.2f}s not faster than MC {t_mc:.2f}s"


def test_subsample_selection():
    dist = case1_distribution()
    from musc_up.sampling import draw_samples

    s = draw_samples(dist, 100, seed=1)
    maximin = select_subsample(s, 20, "maximin")
    first = select_subsample(s, 20, "first")
    assert len(set(maximin.tolist())) == 20
    np.testing.assert_array_equal(first, np.arange(20))
    with pytest.raises(ValueError):
        select_subsample(s, 20, "random")
