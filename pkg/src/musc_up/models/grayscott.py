"""Gray-Scott reaction-diffusion model on [0, 2.5]^2 with zero-flux walls.

    du/dt = Du * lap(u) + F(1 - u) - u v^2
    dv/dt = Dv * lap(v) - (F + k) v + u v^2

Diffusion is the macro scale; the pointwise kinetics are the micro scale
(n_micro explicit Euler substeps per macro step). The state is a
two-component Field (u first, v second) on a cell-centered grid; the
reflected-ghost Laplacian conserves each species' discrete sum exactly.

(u, v) = (1, 0) is a fixed point of the full dynamics, and x<->y symmetric
data stays symmetric under both steps. Near the nominal feed/kill rates the
long-time patterns depend extremely sensitively on (F, k), which is what
makes this the hard target for surrogate-based uncertainty propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coupling import Field, Grid2D, TimeScales
from ..sampling import InputDistribution

__all__ = [
    "GSParams",
    "GrayScottConfig",
    "grayscott_distribution",
    "grayscott_config",
    "gs_initial_profile",
    "gs_init",
    "gs_diffusion_step",
    "gs_reaction_micro",
    "GrayScottModel",
]

F_MEAN = 0.0385
K_MEAN = 0.052
DU = 2e-5
DV = 1e-5
REL_HALF_WIDTH = 0.01


@dataclass(frozen=True)
class GSParams:
    """Per-sample kinetics (F, k) plus the fixed diffusivities."""

    f: float
    k: float
    du: float = DU
    dv: float = DV

    def __post_init__(self):
        for name in ("f", "k", "du", "dv"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class GrayScottConfig:
    """Grid/stepping configuration; checks the diffusion CFL bound
    max(Du,Dv)*dt*(1/dx^2+1/dy^2) <= 1/2 and the configured kinetics substep
    limit at construction."""

    nx: int = 256
    ny: int = 256
    length: float = 2.5
    dt_macro: float = 1.0
    t_end: float = 5000.0
    n_micro: int = 3
    du: float = DU
    dv: float = DV
    reaction_dt_limit: float = 0.5

    def __post_init__(self):
        g = self.grid
        cfl = max(self.du, self.dv) * self.dt_macro * (1.0 / g.dx**2 + 1.0 / g.dy**2)
        if cfl > 0.5 * (1 + 1e-12):
            raise ValueError(
                f"diffusion stability violated: max(Du,Dv)*dt*(1/dx^2+1/dy^2) = {cfl:.6g} > 0.5"
            )
        dt_micro = self.dt_macro / self.n_micro
        if dt_micro > self.reaction_dt_limit:
            raise ValueError(
                f"kinetics substep dt_micro={dt_micro:.6g} above the configured "
                f"stability limit {self.reaction_dt_limit}"
            )

    @property
    def grid(self) -> Grid2D:
        return Grid2D(nx=self.nx, ny=self.ny, lx=self.length, ly=self.length)

    def time_scales(self) -> TimeScales:
        return TimeScales.from_macro(self.dt_macro, self.n_micro, self.t_end)


def grayscott_distribution(
    f_mean: float = F_MEAN,
    k_mean: float = K_MEAN,
    rel_half_width: float = REL_HALF_WIDTH,
) -> InputDistribution:
    """Uniform (F, k) with 1% relative half-width by default."""
    return InputDistribution(
        means=np.array([f_mean, k_mean]),
        rel_half_widths=np.array([rel_half_width, rel_half_width]),
        names=("F", "k"),
    )


def grayscott_config(nx: int = 256, ny: int = 256, **kwargs) -> GrayScottConfig:
    """Configuration with pattern-forming defaults (t_end long enough for
    visible structure); pass nx/ny/t_end overrides for reduced-cost runs."""
    return GrayScottConfig(nx=nx, ny=ny, **kwargs)


def gs_initial_profile(x: np.ndarray, y: np.ndarray) -> tuple:
    """Closed-form initial condition at arbitrary coordinates.

    Inside the square [0.75, 1.75]^2:
        v = 1/4 sin^2(4 pi x) sin^2(4 pi y),   u = -2 v + 1
    outside both species are 0. Peak v value is 1/4 at the interior lattice
    where both sine factors are +-1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= 0.75) & (x <= 1.75) & (y >= 0.75) & (y <= 1.75)
    v = np.where(
        inside,
        0.25 * np.sin(4 * np.pi * x) ** 2 * np.sin(4 * np.pi * y) ** 2,
        0.0,
    )
    u = np.where(inside, -2.0 * v + 1.0, 0.0)
    return u, v


def gs_init(grid: Grid2D) -> Field:
    """Two-component initial Field (u, v) on the grid's cell centers."""
    xx, yy = grid.points()
    u, v = gs_initial_profile(xx, yy)
    return Field(np.stack([u, v]), grid)


def _lap_neumann(a: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """five-point Laplacian with reflected (zero-flux) ghost cells"""
    p = np.pad(a, 1, mode="edge")
    return (p[:-2, 1:-1] - 2.0 * a + p[2:, 1:-1]) / dx**2 + (
        p[1:-1, :-2] - 2.0 * a + p[1:-1, 2:]
    ) / dy**2


def gs_diffusion_step(state: Field, params: GSParams, dt: float) -> Field:
    """One explicit Euler diffusion step for both species (zero-flux walls).

    Conserves the discrete sum of each species exactly up to roundoff.
    """
    grid = state.grid
    cfl = max(params.du, params.dv) * dt * (1.0 / grid.dx**2 + 1.0 / grid.dy**2)
    if cfl > 0.5 * (1 + 1e-12):
        raise ValueError(
            f"diffusion stability violated: max(Du,Dv)*dt*(1/dx^2+1/dy^2) = {cfl:.6g} > 0.5"
        )
    u, v = state.values
    un = u + dt * params.du * _lap_neumann(u, grid.dx, grid.dy)
    vn = v + dt * params.dv * _lap_neumann(v, grid.dx, grid.dy)
    return Field(np.stack([un, vn]), grid)


def gs_reaction_micro(
    state: Field, params: GSParams, dt_micro: float, n_micro: int
) -> Field:
    """n_micro explicit Euler substeps of the pointwise Gray-Scott kinetics.

    (1, 0) is stationary exactly; non-finite results raise with the offending
    grid location.
    """
    u = state.values[0].copy()
    v = state.values[1].copy()
    for _ in range(n_micro):
        uvv = u * v * v
        u += dt_micro * (params.f * (1.0 - u) - uvv)
        v += dt_micro * (uvv - (params.f + params.k) * v)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        bad = np.argwhere(~(np.isfinite(u) & np.isfinite(v)))
        raise ValueError(
            f"kinetics produced non-finite values, first at grid index {tuple(bad[0])}"
        )
    return Field(np.stack([u, v]), state.grid)


class GrayScottModel:
    """Gray-Scott behind the coupling contract: kinetics as the micro model,
    diffusion of the reacted state as the macro step."""

    n_inputs = 2

    def __init__(self, config: GrayScottConfig | None = None):
        self.config = config if config is not None else grayscott_config()

    def params_from_xi(self, xi: np.ndarray) -> GSParams:
        return GSParams(
            f=float(xi[0]), k=float(xi[1]), du=self.config.du, dv=self.config.dv
        )

    def initial_state(self) -> Field:
        return gs_init(self.config.grid)

    def macro_step(self, state: Field, micro_result: Field, params: GSParams, dt: float) -> Field:
        return gs_diffusion_step(micro_result, params, dt)

    def micro_step(self, state: Field, params: GSParams, dt_micro: float, n_micro: int) -> Field:
        return gs_reaction_micro(state, params, dt_micro, n_micro)

    def time_scales(self) -> TimeScales:
        return self.config.time_scales()
