"""Gaussian-process surrogate for the micro-output map, and the metamodel
uncertainty-propagation driver built on it.

One anisotropic squared-exponential kernel is shared by every output
component (grid point / macro step), so fitting costs a single Cholesky
factorization plus one weight vector per output. Hyperparameters maximize
the summed log marginal likelihood by a gradient-free coordinate search
(multistart, bounded evaluation budget) -- no external optimizer.

run_metamodel_up mirrors the semi-intrusive sampling split: a small
low-discrepancy design of full coupled runs trains the surrogate, then a
plain MC over the coupled model runs with every micro call replaced by the
GP posterior mean. Training chains run twice (a hyperparameter-selection
pass storing only a thinned set of step outputs, then a lockstep
weight-refit pass interleaved with the prediction chains) so that memory
stays bounded on large grids.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin

from .coupling import Field, NonFiniteStateError, TimeScales
from .montecarlo import MomentHistory, moments_per_time
from .sampling import InputDistribution, draw_samples, generator_for, tensor_design
from .timing import TimingBreakdown

__all__ = ["GaussianProcessSurrogate", "GPConfig", "MetamodelResult", "run_metamodel_up"]


@dataclass(frozen=True)
class GPConfig:
    """Surrogate training knobs for run_metamodel_up."""

    n_train: int = 25
    nugget: float = 1e-8
    n_restarts: int = 5
    max_evals: int = 200
    lml_steps: int = 4

    def __post_init__(self):
        if self.n_train < 4:
            raise ValueError(f"n_train must be >= 4, got {self.n_train}")
        if not 0 < self.nugget <= 1e-4:
            raise ValueError(f"nugget must be in (0, 1e-4], got {self.nugget}")
        if self.n_restarts < 1 or self.max_evals < 10:
            raise ValueError("need n_restarts >= 1 and max_evals >= 10")


class GaussianProcessSurrogate(RegressorMixin, BaseEstimator):
    """Multi-output GP regression with a shared anisotropic SE kernel.

    k(x, x') = s^2 * exp(-1/2 sum_d ((x_d - x'_d)/l_d)^2) + nugget on the
    diagonal. Targets are centered per output and scaled by one global std;
    the nugget lives on that normalized scale. Far from the training hull the
    posterior mean returns to the per-output prior mean and the variance to
    s^2 + nugget. Fixed seed implies identical hyperparameters.
    """

    def __init__(
        self,
        lengthscales=None,
        signal_variance: float | None = None,
        nugget: float = 1e-8,
        n_restarts: int = 5,
        max_evals: int = 200,
        seed: int = 0,
    ):
        self.lengthscales = lengthscales
        self.signal_variance = signal_variance
        self.nugget = nugget
        self.n_restarts = n_restarts
        self.max_evals = max_evals
        self.seed = seed

    # -- kernel machinery -------------------------------------------------

    @staticmethod
    def _sqdist(a: np.ndarray, b: np.ndarray, ell: np.ndarray) -> np.ndarray:
        d = a[:, None, :] / ell - b[None, :, :] / ell
        return np.sum(d * d, axis=-1)

    def _kernel(self, a, b, ell, s2):
        return s2 * np.exp(-0.5 * self._sqdist(a, b, ell))

    def _chol_with_escalation(self, kmat: np.ndarray, nugget: float):
        """Cholesky with x10 nugget escalation up to 1e-4, then error."""
        n = kmat.shape[0]
        nug = nugget
        while True:
            try:
                return scipy.linalg.cho_factor(kmat + nug * np.eye(n), lower=True), nug
            except scipy.linalg.LinAlgError:
                nug *= 10.0
                if nug > 1e-4:
                    raise ValueError(
                        "kernel factorization failed even at nugget 1e-4 "
                        "(degenerate training inputs?)"
                    )

    def _lml(self, x, y, ell, s2, nugget) -> float:
        """Summed log marginal likelihood over all output components."""
        try:
            (cf, lower), nug = self._chol_with_escalation(self._kernel(x, x, ell, s2), nugget)
        except ValueError:
            return -np.inf
        alpha = scipy.linalg.cho_solve((cf, lower), y)
        logdet = 2.0 * np.sum(np.log(np.diag(cf)))
        m = y.shape[1]
        n = y.shape[0]
        return float(
            -0.5 * np.sum(y * alpha) - 0.5 * m * logdet - 0.5 * m * n * np.log(2 * np.pi)
        )

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        self._squeeze = y.ndim == 1
        if self._squeeze:
            y = y[:, None]
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs vs {y.shape[0]} outputs")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite training data")
        n, d = X.shape
        if n < 2:
            raise ValueError("need at least 2 training points")

        self.y_mean_ = y.mean(axis=0)
        yc = y - self.y_mean_
        scale = float(yc.std())
        self.y_scale_ = scale
        yn = yc / scale if scale > 0 else np.zeros_like(yc)

        span = X.max(axis=0) - X.min(axis=0)
        span[span == 0.0] = 1.0

        if self.lengthscales is not None and self.signal_variance is not None:
            ell = np.asarray(self.lengthscales, dtype=float)
            s2 = float(self.signal_variance)
            self.lml_starts_ = []
        else:
            ell, s2 = self._optimize(X, yn, span)
        self.ell_ = ell
        self.s2_ = s2

        (cf, lower), nug = self._chol_with_escalation(
            self._kernel(X, X, ell, s2), self.nugget
        )
        self.nugget_ = nug
        self.chol_ = (cf, lower)
        self.alpha_ = scipy.linalg.cho_solve((cf, lower), yn)
        self.X_ = X.copy()
        self.n_features_in_ = d
        self.lml_ = self._lml(X, yn, ell, s2, self.nugget)
        return self

    def _optimize(self, x, yn, span):
        """Multistart coordinate search on (log l_1..log l_d, log s2)."""
        rng = generator_for(self.seed, purpose=4)
        d = x.shape[1]
        starts = [np.concatenate([np.log(span), [0.0]])]
        for _ in range(self.n_restarts - 1):
            ls = np.log(span) + rng.uniform(-2.3, 2.3, size=d)
            starts.append(np.concatenate([ls, [rng.uniform(-2.3, 2.3)]]))

        lo = np.concatenate([np.log(span) - 4.6, [-9.0]])
        hi = np.concatenate([np.log(span) + 4.6, [9.0]])

        def objective(theta):
            return self._lml(x, yn, np.exp(theta[:d]), float(np.exp(theta[d])), self.nugget)

        best_theta, best_val = None, -np.inf
        self.lml_starts_ = []
        for theta0 in starts:
            theta = np.clip(theta0, lo, hi)
            val = objective(theta)
            self.lml_starts_.append(val)
            evals = 1
            step = np.full(d + 1, 0.8)
            while evals < self.max_evals and np.max(step) > 1e-2:
                improved = False
                for c in range(d + 1):
                    if evals >= self.max_evals:
                        break
                    for sign in (+1.0, -1.0):
                        cand = theta.copy()
                        cand[c] = np.clip(cand[c] + sign * step[c], lo[c], hi[c])
                        v = objective(cand)
                        evals += 1
                        if v > val:
                            theta, val = cand, v
                            improved = True
                            break
                        if evals >= self.max_evals:
                            break
                if not improved:
                    step *= 0.5
            if val > best_val:
                best_theta, best_val = theta, val
        return np.exp(best_theta[:d]), float(np.exp(best_theta[d]))

    # -- prediction ----------------------------------------------------------

    def _check_query(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"query has {X.shape[1]} dims, trained on {self.n_features_in_}"
            )
        return X

    def predict(self, X, return_var: bool = False):
        """Posterior mean (raw units); optionally the predictive variance,
        one value per query point (shared by all outputs, which share the
        kernel). Negative variances from roundoff clamp to zero with a
        warning."""
        X = self._check_query(X)
        kq = self._kernel(X, self.X_, self.ell_, self.s2_)
        mean_n = kq @ self.alpha_
        mean = mean_n * self.y_scale_ + self.y_mean_
        if self._squeeze:
            mean = mean[:, 0]
        if not return_var:
            return mean
        solved = scipy.linalg.cho_solve(self.chol_, kq.T)
        var_n = self.s2_ + self.nugget_ - np.sum(kq * solved.T, axis=1)
        if np.any(var_n < 0):
            if np.any(var_n < -1e-10):
                warnings.warn(
                    f"predictive variance clamped (min {var_n.min():.3e})",
                    RuntimeWarning,
                )
            var_n = np.maximum(var_n, 0.0)
        return mean, var_n * self.y_scale_**2

    def query_weights(self, X) -> np.ndarray:
        """Weights W with posterior mean at X equal to W @ y_normalized for
        any normalized target set on the same inputs/kernel: W = k(X,.) K^-1.
        Lets per-step outputs reuse one factorization."""
        X = self._check_query(X)
        kq = self._kernel(X, self.X_, self.ell_, self.s2_)
        return scipy.linalg.cho_solve(self.chol_, kq.T).T

    # -- persistence -----------------------------------------------------------

    def save(self, path: str) -> None:
        """Serialize inputs, hyperparameters and weights to an .npz artifact."""
        np.savez(
            path,
            X=self.X_,
            ell=self.ell_,
            s2=np.array([self.s2_]),
            nugget=np.array([self.nugget_]),
            y_mean=self.y_mean_,
            y_scale=np.array([self.y_scale_]),
            alpha=self.alpha_,
            squeeze=np.array([int(self._squeeze)]),
            seed=np.array([self.seed]),
        )

    @classmethod
    def load(cls, path: str) -> "GaussianProcessSurrogate":
        data = np.load(path)
        model = cls(
            lengthscales=data["ell"],
            signal_variance=float(data["s2"][0]),
            nugget=float(data["nugget"][0]),
            seed=int(data["seed"][0]),
        )
        model.X_ = data["X"]
        model.ell_ = data["ell"]
        model.s2_ = float(data["s2"][0])
        model.nugget_ = float(data["nugget"][0])
        model.y_mean_ = data["y_mean"]
        model.y_scale_ = float(data["y_scale"][0])
        model.alpha_ = data["alpha"]
        model._squeeze = bool(data["squeeze"][0])
        model.n_features_in_ = model.X_.shape[1]
        kmat = model._kernel(model.X_, model.X_, model.ell_, model.s2_)
        model.chol_ = scipy.linalg.cho_factor(
            kmat + model.nugget_ * np.eye(kmat.shape[0]), lower=True
        )
        model.lml_starts_ = []
        return model


@dataclass
class MetamodelResult:
    moments: MomentHistory
    timing: TimingBreakdown
    surrogate: GaussianProcessSurrogate
    n_samples: int
    seed: int


def run_metamodel_up(
    model,
    dist: InputDistribution,
    scales: TimeScales,
    n_samples: int,
    seed: int,
    config: GPConfig | None = None,
    store: str = "all",
    level: float = 0.95,
    n_resamples: int = 1000,
) -> MetamodelResult:
    """Metamodel UP: train the GP on coupled runs at a low-discrepancy design,
    then plain MC with every micro call replaced by the GP posterior mean.

    The returned surrogate is the hyperparameter owner (fitted on the thinned
    training outputs); per-step prediction weights are refit from the same
    factorization during propagation.
    """
    if config is None:
        config = GPConfig()
    if store not in ("all", "final"):
        raise ValueError(f"store must be 'all' or 'final', got {store!r}")
    t_start = time.perf_counter()
    micro_s = 0.0
    macro_s = 0.0

    design = tensor_design(dist, config.n_train, seed)
    train_params = [model.params_from_xi(design[i]) for i in range(config.n_train)]
    initial = model.initial_state()
    grid = initial.grid
    fshape = initial.values.shape
    n_steps = scales.n_steps

    # pass 1: full training runs, keeping micro outputs at a thinned set of
    # steps as the marginal-likelihood data
    lml_idx = sorted(
        set(np.linspace(1, n_steps, min(config.lml_steps, n_steps)).astype(int))
    )
    state = [initial.copy() for _ in range(config.n_train)]
    lml_blocks = []
    for step in range(1, n_steps + 1):
        t0 = time.perf_counter()
        v_list = [
            model.micro_step(state[i], train_params[i], scales.dt_micro, scales.n_micro)
            for i in range(config.n_train)
        ]
        micro_s += time.perf_counter() - t0
        if step in lml_idx:
            lml_blocks.append(np.stack([v.values.reshape(-1) for v in v_list]))
        t0 = time.perf_counter()
        for i in range(config.n_train):
            state[i] = model.macro_step(state[i], v_list[i], train_params[i], scales.dt_macro)
            if not np.all(np.isfinite(state[i].values)):
                raise NonFiniteStateError(step, train_params[i])
        macro_s += time.perf_counter() - t0

    surrogate = GaussianProcessSurrogate(
        nugget=config.nugget,
        n_restarts=config.n_restarts,
        max_evals=config.max_evals,
        seed=seed,
    ).fit(design, np.concatenate(lml_blocks, axis=1))

    # pass 2: lockstep propagation; training chains rerun to regenerate each
    # step's outputs, prediction chains consume the GP mean
    samples = draw_samples(dist, n_samples, seed)
    pred_params = [model.params_from_xi(samples.inputs[j]) for j in range(n_samples)]
    w_pred = surrogate.query_weights(samples.inputs)

    state_tr = [initial.copy() for _ in range(config.n_train)]
    state_pr = [initial.copy() for _ in range(n_samples)]
    traj = [[state_pr[j].copy()] for j in range(n_samples)] if store == "all" else None

    for step in range(1, n_steps + 1):
        t0 = time.perf_counter()
        v_list = [
            model.micro_step(state_tr[i], train_params[i], scales.dt_micro, scales.n_micro)
            for i in range(config.n_train)
        ]
        micro_s += time.perf_counter() - t0
        vmat = np.stack([v.values.reshape(-1) for v in v_list])
        t0 = time.perf_counter()
        for i in range(config.n_train):
            state_tr[i] = model.macro_step(state_tr[i], v_list[i], train_params[i], scales.dt_macro)
        macro_s += time.perf_counter() - t0

        # per-step weight refit: center, scale, predict, un-normalize
        v_mean = vmat.mean(axis=0)
        vc = vmat - v_mean
        v_scale = float(vc.std())
        vn = vc / v_scale if v_scale > 0 else np.zeros_like(vc)
        v_pred = (w_pred @ vn) * v_scale + v_mean

        t0 = time.perf_counter()
        for j in range(n_samples):
            vf = Field(v_pred[j].reshape(fshape), grid)
            state_pr[j] = model.macro_step(state_pr[j], vf, pred_params[j], scales.dt_macro)
            if not np.all(np.isfinite(state_pr[j].values)):
                raise NonFiniteStateError(step, pred_params[j])
        macro_s += time.perf_counter() - t0
        if store == "all":
            for j in range(n_samples):
                traj[j].append(state_pr[j])

    if store == "all":
        times = np.arange(n_steps + 1) * scales.dt_macro
        outputs = np.stack([np.stack([s.values for s in t]) for t in traj])
    else:
        times = np.array([n_steps * scales.dt_macro])
        outputs = np.stack([s.values[None] for s in state_pr])

    history = moments_per_time(outputs, times, grid, level, n_resamples, seed)
    total = time.perf_counter() - t_start
    return MetamodelResult(
        moments=history,
        timing=TimingBreakdown(total_s=total, micro_s=micro_s, macro_s=macro_s),
        surrogate=surrogate,
        n_samples=n_samples,
        seed=seed,
    )
