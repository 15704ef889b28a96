"""Semi-intrusive Monte Carlo: run the micro model on a small subsample and
interpolate its per-step outputs over the input space for everyone else.

All chains advance together, one macro step at a time. At each step the
n_micro_samples training chains run the real micro model; their outputs are
the training data for that step's interpolant (one interpolant per macro
step, all sharing the same centers, hence one factorization reused
throughout), which supplies the micro results for the remaining chains.

The method self-assesses with a leave-one-out test: a third group of chains
evolves with fold-interpolated micro outputs, and the absolute difference
between each training chain and its fold twin at the reported time yields
estimated error bounds (mean and std of |u - u_tilde|). The estimate is
accepted only when those bounds plus their bootstrap-CI upper offsets are
below the subsample MC's own CI half-widths (spatial means, both
estimators, strict inequality; ties reject). On rejection the subsample MC
estimate is returned, flagged as fallback.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coupling import Field, NonFiniteStateError, TimeScales
from .interpolation import CubicRBFInterpolator
from .moments import bootstrap_ci, estimate_moments
from .montecarlo import MomentHistory, moments_per_time
from .sampling import InputDistribution, SampleSet, draw_samples
from .timing import TimingBreakdown

__all__ = [
    "SamplingPlan",
    "select_subsample",
    "ErrorBoundReport",
    "error_bounds",
    "interpolation_test",
    "SIMCResult",
    "run_simc",
]


@dataclass(frozen=True)
class SamplingPlan:
    """How many samples run the full model vs. the interpolated one."""

    n_samples: int
    n_micro_samples: int = 50
    selection: str = "maximin"

    def __post_init__(self):
        if not 2 <= self.n_micro_samples <= self.n_samples:
            raise ValueError(
                f"need 2 <= n_micro_samples <= n_samples, got "
                f"{self.n_micro_samples} of {self.n_samples}"
            )
        if self.selection not in ("maximin", "first"):
            raise ValueError(f"selection must be 'maximin' or 'first', got {self.selection!r}")


def select_subsample(samples, n_micro_samples: int, strategy: str = "maximin") -> np.ndarray:
    """Indices of the micro-model subsample.

    "maximin" greedily maximizes the minimum pairwise distance (in the
    per-dimension min-max normalized cube), seeded by the first sample;
    "first" takes the first n_micro_samples indices. Ties resolve to the
    lowest index, so the result is deterministic.
    """
    inputs = samples.inputs if isinstance(samples, SampleSet) else np.asarray(samples, float)
    n = inputs.shape[0]
    if not 1 <= n_micro_samples <= n:
        raise ValueError(f"need 1 <= n_micro_samples <= {n}, got {n_micro_samples}")
    if strategy == "first":
        return np.arange(n_micro_samples)
    if strategy != "maximin":
        raise ValueError(f"unknown strategy {strategy!r}")
    lo = inputs.min(axis=0)
    span = inputs.max(axis=0) - lo
    span[span == 0.0] = 1.0
    pts = (inputs - lo) / span
    chosen = [0]
    dmin = np.sum((pts - pts[0]) ** 2, axis=1)
    dmin[0] = -np.inf
    while len(chosen) < n_micro_samples:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.sum((pts - pts[nxt]) ** 2, axis=1))
        dmin[nxt] = -np.inf
    return np.array(sorted(chosen))


@dataclass
class ErrorBoundReport:
    """Interpolation-error bounds against the subsample MC's own precision.

    eps_mean/eps_std are the pointwise mean and std of |u - u_tilde| over the
    leave-one-out folds; ci_mean/ci_std are their percentile-bootstrap
    intervals; mc_ci_halfwidth_mean/std are the half-widths of the subsample
    MC's CIs for the corresponding estimator. decision is "accept" or
    "reject" per the interpolation test.
    """

    eps_mean: np.ndarray
    eps_std: np.ndarray
    ci_mean: tuple
    ci_std: tuple
    mc_ci_halfwidth_mean: np.ndarray
    mc_ci_halfwidth_std: np.ndarray
    level: float
    n_folds: int
    decision: str = ""

    def summary(self) -> dict:
        """Spatial means of the quantities the accept/reject rule compares."""
        return {
            "mean_bound": float(np.mean(self.eps_mean)),
            "mean_bound_upper": float(np.mean(self.ci_mean[1])),
            "mc_ci_halfwidth_mean": float(np.mean(self.mc_ci_halfwidth_mean)),
            "std_bound": float(np.mean(self.eps_std)),
            "std_bound_upper": float(np.mean(self.ci_std[1])),
            "mc_ci_halfwidth_std": float(np.mean(self.mc_ci_halfwidth_std)),
            "decision": self.decision,
        }


def error_bounds(
    u: np.ndarray,
    u_tilde: np.ndarray,
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> ErrorBoundReport:
    """Estimated interpolation-error bounds from leave-one-out twins.

    u: (n_folds, ...) exact outputs at the tested time; u_tilde: the
    corresponding chains driven by fold-interpolated micro outputs. The
    bounds are the pointwise mean and (n-1)-divisor std of |u - u_tilde|;
    the MC reference half-widths come from bootstrapping u itself.
    """
    u = np.asarray(u, dtype=float)
    u_tilde = np.asarray(u_tilde, dtype=float)
    if u.shape != u_tilde.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {u_tilde.shape}")
    diff = np.abs(u - u_tilde)
    est = estimate_moments(diff)
    ci_mean = bootstrap_ci(diff, "mean", level, n_resamples, seed)
    ci_std = bootstrap_ci(diff, "std", level, n_resamples, seed)
    mc_mean_lo, mc_mean_hi = bootstrap_ci(u, "mean", level, n_resamples, seed)
    mc_std_lo, mc_std_hi = bootstrap_ci(u, "std", level, n_resamples, seed)
    report = ErrorBoundReport(
        eps_mean=est.mean,
        eps_std=est.std,
        ci_mean=ci_mean,
        ci_std=ci_std,
        mc_ci_halfwidth_mean=0.5 * (mc_mean_hi - mc_mean_lo),
        mc_ci_halfwidth_std=0.5 * (mc_std_hi - mc_std_lo),
        level=level,
        n_folds=u.shape[0],
    )
    report.decision = interpolation_test(report)
    return report


def interpolation_test(report: ErrorBoundReport) -> str:
    """Accept iff, for BOTH estimators, the spatial mean of the bound's CI
    upper endpoint is strictly below the spatial mean of the subsample MC CI
    half-width. Ties reject. Scaling all residuals up can only flip accept
    to reject, never the reverse (both bound and its CI scale together).
    """
    mean_ok = float(np.mean(report.ci_mean[1])) < float(np.mean(report.mc_ci_halfwidth_mean))
    std_ok = float(np.mean(report.ci_std[1])) < float(np.mean(report.mc_ci_halfwidth_std))
    return "accept" if (mean_ok and std_ok) else "reject"


@dataclass
class SIMCResult:
    """moments holds the returned estimate (pooled SIMC when accepted, the
    subsample MC when rejected — then fallback is True). simc_moments and
    sub_moments keep both candidates for diagnostics."""

    moments: MomentHistory
    decision: str
    fallback: bool
    bounds: ErrorBoundReport
    simc_moments: MomentHistory
    sub_moments: MomentHistory
    subsample_indices: np.ndarray
    timing: TimingBreakdown
    n_samples: int
    seed: int
    step_reports: list | None = None


def _fold_weights(centers: np.ndarray) -> list:
    """Per-fold query weights: entry i maps the other centers' outputs to the
    fold interpolant's prediction at center i (same linear functional an
    explicit refit evaluates)."""
    n = centers.shape[0]
    weights = []
    mask = np.ones(n, dtype=bool)
    dummy = np.zeros((n - 1, 1))
    for i in range(n):
        mask[i] = False
        fold = CubicRBFInterpolator().fit(centers[mask], dummy)
        weights.append(fold.query_weights(centers[i][None, :])[0])
        mask[i] = True
    return weights


def run_simc(
    model,
    dist: InputDistribution,
    scales: TimeScales,
    plan: SamplingPlan,
    seed: int,
    store: str = "all",
    level: float = 0.95,
    n_resamples: int = 1000,
    test_per_step: bool = False,
) -> SIMCResult:
    """Semi-intrusive MC over the coupled model (see module docstring).

    With n_micro_samples == n_samples there is nothing to interpolate and the
    pooled estimate equals run_mc's bit for bit. Identical inputs (fully
    degenerate distribution) collapse the interpolant to a copy of the single
    distinct chain's output.
    """
    if store not in ("all", "final"):
        raise ValueError(f"store must be 'all' or 'final', got {store!r}")
    t_start = time.perf_counter()
    micro_s = 0.0
    macro_s = 0.0

    n = plan.n_samples
    samples = draw_samples(dist, n, seed)
    idx_mu = select_subsample(samples, plan.n_micro_samples, plan.selection)
    in_mu = np.zeros(n, dtype=bool)
    in_mu[idx_mu] = True
    idx_other = np.nonzero(~in_mu)[0]
    n_mu = idx_mu.size

    params = [model.params_from_xi(samples.inputs[j]) for j in range(n)]
    initial = model.initial_state()
    grid = initial.grid
    centers = samples.inputs[idx_mu]

    # collapse to a copy predictor when every center coincides (deterministic
    # inputs); otherwise precompute the shared geometry once
    distinct = np.unique(centers, axis=0).shape[0]
    degenerate = distinct == 1
    if not degenerate:
        geom = CubicRBFInterpolator().fit(centers, np.zeros((n_mu, 1)))
        w_other = (
            geom.query_weights(samples.inputs[idx_other]) if idx_other.size else None
        )
        w_loo = _fold_weights(centers)

    state_mu = [initial.copy() for _ in range(n_mu)]
    state_other = [initial.copy() for _ in range(idx_other.size)]
    state_loo = [initial.copy() for _ in range(n_mu)]
    n_steps = scales.n_steps
    fshape = initial.values.shape

    # per-chain stored trajectories (macro states), including t=0 when store="all"
    traj_mu = [[state_mu[i].copy()] for i in range(n_mu)] if store == "all" else None
    traj_other = (
        [[state_other[j].copy()] for j in range(idx_other.size)] if store == "all" else None
    )
    loo_history = [[] for _ in range(n_mu)] if test_per_step else None

    for step in range(1, n_steps + 1):
        # training chains: real micro model, then their macro step
        v_list = []
        t0 = time.perf_counter()
        for i in range(n_mu):
            v_list.append(
                model.micro_step(state_mu[i], params[idx_mu[i]], scales.dt_micro, scales.n_micro)
            )
        micro_s += time.perf_counter() - t0
        vmat = np.stack([v.values.reshape(-1) for v in v_list])

        t0 = time.perf_counter()
        for i in range(n_mu):
            state_mu[i] = model.macro_step(
                state_mu[i], v_list[i], params[idx_mu[i]], scales.dt_macro
            )
            if not np.all(np.isfinite(state_mu[i].values)):
                raise NonFiniteStateError(step, params[idx_mu[i]])
        macro_s += time.perf_counter() - t0

        # injected chains: interpolated micro output, same macro step
        if idx_other.size:
            if degenerate:
                v_other = np.broadcast_to(vmat[0], (idx_other.size, vmat.shape[1]))
            else:
                v_other = w_other @ vmat
            t0 = time.perf_counter()
            for j in range(idx_other.size):
                vf = Field(v_other[j].reshape(fshape), grid)
                state_other[j] = model.macro_step(
                    state_other[j], vf, params[idx_other[j]], scales.dt_macro
                )
                if not np.all(np.isfinite(state_other[j].values)):
                    raise NonFiniteStateError(step, params[idx_other[j]])
            macro_s += time.perf_counter() - t0

        # leave-one-out twins (test overhead, not booked as model time)
        for i in range(n_mu):
            if degenerate:
                other_first = 1 if i == 0 else 0
                v_loo = vmat[other_first]
            else:
                mask = np.ones(n_mu, dtype=bool)
                mask[i] = False
                v_loo = w_loo[i] @ vmat[mask]
            vf = Field(v_loo.reshape(fshape), grid)
            state_loo[i] = model.macro_step(state_loo[i], vf, params[idx_mu[i]], scales.dt_macro)
            if test_per_step:
                loo_history[i].append(state_loo[i])

        if store == "all":
            for i in range(n_mu):
                traj_mu[i].append(state_mu[i])
            for j in range(idx_other.size):
                traj_other[j].append(state_other[j])

    # assemble outputs in original sample order
    if store == "all":
        times = np.arange(n_steps + 1) * scales.dt_macro
        per_sample = [None] * n
        for pos, i in enumerate(idx_mu):
            per_sample[i] = np.stack([s.values for s in traj_mu[pos]])
        for pos, j in enumerate(idx_other):
            per_sample[j] = np.stack([s.values for s in traj_other[pos]])
        outputs = np.stack(per_sample)
    else:
        times = np.array([n_steps * scales.dt_macro])
        per_sample = [None] * n
        for pos, i in enumerate(idx_mu):
            per_sample[i] = state_mu[pos].values[None]
        for pos, j in enumerate(idx_other):
            per_sample[j] = state_other[pos].values[None]
        outputs = np.stack(per_sample)

    u_final = np.stack([state_mu[i].values for i in range(n_mu)])
    u_tilde_final = np.stack([state_loo[i].values for i in range(n_mu)])

    step_reports = None
    if test_per_step and store == "all":
        step_reports = []
        for it in range(1, n_steps + 1):
            u_t = np.stack([traj_mu[i][it].values for i in range(n_mu)])
            ut_t = np.stack([loo_history[i][it - 1].values for i in range(n_mu)])
            step_reports.append(error_bounds(u_t, ut_t, level, n_resamples, seed))
        bounds = step_reports[-1]
        decision = "accept" if all(r.decision == "accept" for r in step_reports) else "reject"
    else:
        bounds = error_bounds(u_final, u_tilde_final, level, n_resamples, seed)
        decision = bounds.decision

    simc_moments = moments_per_time(outputs, times, grid, level, n_resamples, seed)
    sub_moments = moments_per_time(outputs[idx_mu], times, grid, level, n_resamples, seed)
    fallback = decision != "accept"
    moments = sub_moments if fallback else simc_moments

    total = time.perf_counter() - t_start
    return SIMCResult(
        moments=moments,
        decision=decision,
        fallback=fallback,
        bounds=bounds,
        simc_moments=simc_moments,
        sub_moments=sub_moments,
        subsample_indices=idx_mu,
        timing=TimingBreakdown(total_s=total, micro_s=micro_s, macro_s=macro_s),
        n_samples=n,
        seed=seed,
        step_reports=step_reports,
    )
