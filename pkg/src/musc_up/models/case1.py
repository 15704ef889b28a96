"""1D reaction-diffusion benchmark (periodic, fast linear reaction).

    du/dt = d * d2u/dx2 + k * u        on [0, 1), periodic

The diffusion term is the slow (macro) scale, the linear reaction the fast
(micro) scale: one macro step of size dt_macro wraps n_micro explicit Euler
reaction substeps of size dt_micro = dt_macro / n_micro. The reaction rate is
tied to the scale separation, E[k] = n_micro * E[d] / dx**2, so larger
n_micro means a genuinely stiffer and costlier micro model.

The initial profile u0(x) = 1 + sin(pi*(4x - 1/2)) excites only the constant
mode and the 4*pi wavenumber, so the exact solution is a two-term exponential
(``analytic_solution``), which serves as the reference for verification and
for quadrature oracles over the uncertain inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coupling import Field, Grid1D, TimeScales
from ..sampling import InputDistribution

__all__ = [
    "Params1D",
    "Case1Config",
    "case1_distribution",
    "case1_config",
    "init_1d",
    "diffusion_step_1d",
    "reaction_micro_1d",
    "analytic_solution_1d",
    "Case1Model",
]

#: nominal diffusion coefficient (dimensionless)
D_MEAN = 0.405
#: relative half-width of the uniform input uncertainty
REL_HALF_WIDTH = 0.1


@dataclass(frozen=True)
class Params1D:
    """Per-sample physical parameters."""

    d: float
    k: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.d}")
        if not np.isfinite(self.k):
            raise ValueError(f"reaction rate must be finite, got {self.k}")


@dataclass(frozen=True)
class Case1Config:
    """Grid/stepping configuration. The CFL check uses d_max, the largest
    diffusion coefficient the run can encounter (upper support bound)."""

    dx: float = 1e-2
    n_micro: int = 100
    dt_macro: float = 2.5e-7
    t_end: float = 5e-6
    d_max: float = D_MEAN * (1 + REL_HALF_WIDTH)

    def __post_init__(self):
        if self.dx <= 0 or self.dt_macro <= 0 or self.t_end <= 0:
            raise ValueError("dx, dt_macro and t_end must be positive")
        cfl = self.d_max * self.dt_macro / self.dx**2
        if cfl > 0.5 * (1 + 1e-12):
            raise ValueError(
                f"diffusion stability violated: d*dt/dx^2 = {cfl:.6g} > 0.5"
            )

    @property
    def grid(self) -> Grid1D:
        n = int(round(1.0 / self.dx))
        return Grid1D(n=n, dx=self.dx, length=1.0)

    def time_scales(self) -> TimeScales:
        return TimeScales.from_macro(self.dt_macro, self.n_micro, self.t_end)


def case1_distribution(
    n_micro: int = 100,
    dx: float = 1e-2,
    d_mean: float = D_MEAN,
    rel_half_width: float = REL_HALF_WIDTH,
) -> InputDistribution:
    """Uniform inputs (d, k): mean reaction rate k = n_micro * d_mean / dx**2."""
    k_mean = n_micro * d_mean / dx**2
    return InputDistribution(
        means=np.array([d_mean, k_mean]),
        rel_half_widths=np.array([rel_half_width, rel_half_width]),
        names=("d", "k"),
    )


def case1_config(
    n_micro: int = 100,
    dx: float = 1e-2,
    n_steps: int = 20,
    growth: float = 2.0,
    dt_macro: float | None = None,
    t_end: float | None = None,
    dist: InputDistribution | None = None,
) -> Case1Config:
    """Default configuration: dt_macro set so the mean amplification over the
    horizon is e**growth (keeps magnitudes representable and the output CV
    moderate), clamped to the diffusion CFL bound; t_end = n_steps * dt_macro.
    """
    if dist is None:
        dist = case1_distribution(n_micro=n_micro, dx=dx)
    d_max = float(dist.upper[0])
    k_mean = float(dist.means[1])
    if dt_macro is None:
        dt_macro = growth / (k_mean * n_steps)
        dt_macro = min(dt_macro, 0.5 * dx**2 / d_max)
    if t_end is None:
        t_end = n_steps * dt_macro
    return Case1Config(dx=dx, n_micro=n_micro, dt_macro=dt_macro, t_end=t_end, d_max=d_max)


def init_1d(grid: Grid1D) -> Field:
    """u0(x) = 1 + sin(pi*(4x - 1/2)); min 0, max 2 on the periodic grid."""
    x = grid.points()
    return Field(1.0 + np.sin(np.pi * (4.0 * x - 0.5)), grid)


def diffusion_step_1d(state: Field, params: Params1D, dt: float) -> Field:
    """One explicit Euler step of periodic centered-difference diffusion.

    Stability requires d*dt/dx^2 <= 1/2; a violation raises with the offending
    CFL number. A single Fourier mode of wavenumber j is damped by the factor
    1 - 4*(d*dt/dx^2)*sin(pi*j*dx)**2, and the discrete sum is conserved.
    """
    u = state.values
    dx = state.grid.dx
    cfl = params.d * dt / dx**2
    if cfl > 0.5 * (1 + 1e-12):
        raise ValueError(f"diffusion stability violated: d*dt/dx^2 = {cfl:.6g} > 0.5")
    lap = np.roll(u, -1) + np.roll(u, 1) - 2.0 * u
    return Field(u + cfl * lap, state.grid)


def reaction_micro_1d(
    state: Field, params: Params1D, dt_micro: float, n_micro: int
) -> Field:
    """n_micro explicit Euler substeps of du/dt = k*u.

    Each substep multiplies by (1 + k*dt_micro); the loop is the micro model's
    genuine cost (it scales with n_micro by design). |k*dt_micro| < 1 is the
    explicit-Euler sanity bound.
    """
    kdt = params.k * dt_micro
    if abs(kdt) >= 1.0:
        raise ValueError(f"reaction substep unstable: |k*dt_micro| = {abs(kdt):.6g} >= 1")
    u = state.values.copy()
    for _ in range(n_micro):
        u *= 1.0 + kdt
    return Field(u, state.grid)


def analytic_solution_1d(x: np.ndarray, t: float, params: Params1D) -> np.ndarray:
    """Exact continuum solution for the benchmark initial profile:

        u(x, t) = exp(k t) + exp((k - 16 pi^2 d) t) * sin(4 pi x - pi/2)
    """
    x = np.asarray(x, dtype=float)
    return np.exp(params.k * t) + np.exp(
        (params.k - 16.0 * np.pi**2 * params.d) * t
    ) * np.sin(4.0 * np.pi * x - 0.5 * np.pi)


class Case1Model:
    """Bundles the benchmark's macro/micro steps behind the coupling contract.

    Operator splitting per macro step: reaction (micro) first, then one
    diffusion step applied to the micro result.
    """

    n_inputs = 2

    def __init__(self, config: Case1Config | None = None):
        self.config = config if config is not None else case1_config()

    def params_from_xi(self, xi: np.ndarray) -> Params1D:
        return Params1D(d=float(xi[0]), k=float(xi[1]))

    def initial_state(self) -> Field:
        return init_1d(self.config.grid)

    def macro_step(self, state: Field, micro_result: Field, params: Params1D, dt: float) -> Field:
        return diffusion_step_1d(micro_result, params, dt)

    def micro_step(self, state: Field, params: Params1D, dt_micro: float, n_micro: int) -> Field:
        return reaction_micro_1d(state, params, dt_micro, n_micro)

    def time_scales(self) -> TimeScales:
        return self.config.time_scales()
