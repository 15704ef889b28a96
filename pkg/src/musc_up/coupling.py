"""Macro/micro coupling core: grids, fields, time scales and the coupled loop.

The coupling contract is deliberately small: a macro model advances the state
one macro step given the micro model's output for that step, a micro model
produces that output by running n_micro substeps from the current state. Both
are pure functions of their inputs; all randomness lives in the parameter
vector passed through unchanged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

__all__ = [
    "TimeScales",
    "Grid1D",
    "Grid2D",
    "Field",
    "Trajectory",
    "StepTimer",
    "NonFiniteStateError",
    "run_coupled",
    "run_coupled_with_injected_micro",
]

#: relative tolerance for the dt_macro == n_micro * dt_micro identity
_DT_REL_TOL = 1e-12


class NonFiniteStateError(RuntimeError):
    """A coupled run produced NaN/Inf; carries the macro step index and params."""

    def __init__(self, step: int, params: Any, detail: str = ""):
        self.step = step
        self.params = params
        msg = f"non-finite state at macro step {step} (params={params!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class TimeScales:
    """Macro and micro time steps with the scale-separation bookkeeping.

    dt_macro must equal n_micro * dt_micro to relative tolerance 1e-12; the
    horizon t_end must allow at least one macro step.
    """

    dt_macro: float
    dt_micro: float
    n_micro: int
    t_end: float

    def __post_init__(self):
        if self.dt_macro <= 0 or self.dt_micro <= 0:
            raise ValueError(
                f"time steps must be positive (dt_macro={self.dt_macro}, "
                f"dt_micro={self.dt_micro})"
            )
        if self.n_micro < 1:
            raise ValueError(f"n_micro must be >= 1, got {self.n_micro}")
        expected = self.n_micro * self.dt_micro
        if abs(self.dt_macro - expected) > _DT_REL_TOL * abs(self.dt_macro):
            raise ValueError(
                f"dt_macro={self.dt_macro} != n_micro*dt_micro={expected} "
                f"(relative mismatch {abs(self.dt_macro - expected) / self.dt_macro:.3e})"
            )
        if self.t_end < self.dt_macro:
            raise ValueError(
                f"t_end={self.t_end} admits no macro step (dt_macro={self.dt_macro})"
            )

    @property
    def n_steps(self) -> int:
        """Number of macro steps: the trajectory ends at the largest multiple
        of dt_macro that is <= t_end (tiny tolerance absorbs roundoff)."""
        return int(np.floor(self.t_end / self.dt_macro * (1.0 + 1e-12)))

    @classmethod
    def from_macro(cls, dt_macro: float, n_micro: int, t_end: float) -> "TimeScales":
        """Build with dt_micro derived as dt_macro / n_micro (identity exact)."""
        return cls(dt_macro, dt_macro / n_micro, n_micro, t_end)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0, length): points x_i = i*dx, i = 0..n-1."""

    n: int
    dx: float
    length: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need at least 3 grid points, got {self.n}")
        if abs(self.n * self.dx - self.length) > 1e-9 * self.length:
            raise ValueError(
                f"n*dx={self.n * self.dx} does not tile length={self.length}"
            )

    @property
    def shape(self) -> tuple:
        return (self.n,)

    @property
    def npoints(self) -> int:
        return self.n

    def points(self) -> np.ndarray:
        return np.arange(self.n) * self.dx


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered grid on [0,Lx]x[0,Ly]: x_i = (i+1/2)*dx.

    Cell-centering makes the reflected-ghost (zero-flux) Laplacian conserve
    the discrete sum exactly, which the conservation contract requires.
    """

    nx: int
    ny: int
    lx: float = 2.5
    ly: float = 2.5

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"need at least 3x3 points, got {self.nx}x{self.ny}")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @property
    def npoints(self) -> int:
        return self.nx * self.ny

    def points(self) -> tuple:
        """Meshgrid (ij indexing) of cell-center coordinates."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class Field:
    """State values on a grid. The trailing axes of ``values`` match the grid
    shape; an optional leading axis holds components (e.g. the two Gray-Scott
    species). Values must be finite; the coupled loop enforces this after
    every macro step (with step context), and ``validate`` checks on demand,
    so the constructor stays cheap enough for hot loops."""

    values: np.ndarray
    grid: Any

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        gshape = self.grid.shape
        if self.values.shape[-len(gshape):] != gshape:
            raise ValueError(
                f"field shape {self.values.shape} does not end with grid shape {gshape}"
            )

    def validate(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        return self

    def copy(self) -> "Field":
        out = object.__new__(Field)
        out.values = self.values.copy()
        out.grid = self.grid
        return out


@dataclass
class Trajectory:
    """Macro-time history: times[i] is the time of states[i]."""

    times: np.ndarray
    states: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError(
                f"{len(self.times)} times vs {len(self.states)} states"
            )
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final(self) -> Field:
        return self.states[-1]


class StepTimer:
    """Accumulates wall time attributed to micro and macro step calls."""

    __slots__ = ("micro_s", "macro_s")

    def __init__(self):
        self.micro_s = 0.0
        self.macro_s = 0.0

    def add(self, other: "StepTimer") -> None:
        self.micro_s += other.micro_s
        self.macro_s += other.macro_s


MacroStep = Callable[[Field, Field, Any, float], Field]
MicroStep = Callable[[Field, Any, float, int], Field]


def _check_finite(state: Field, step: int, params: Any) -> None:
    if not np.all(np.isfinite(state.values)):
        bad = np.argwhere(~np.isfinite(state.values))
        raise NonFiniteStateError(
            step, params, f"first offending index {tuple(bad[0])}"
        )


def run_coupled(
    macro: MacroStep,
    micro: MicroStep,
    params: Any,
    scales: TimeScales,
    initial: Field,
    store: str = "all",
    timer: StepTimer | None = None,
) -> Trajectory:
    """Advance the coupled pair from t=0 to the largest multiple of dt_macro
    <= t_end. Each macro step consumes the micro result computed from the
    previous state: state <- macro(state, micro(state)).

    store="all" keeps every macro state (including t=0); store="final" keeps
    only the last one (memory control for large grids).
    """
    if store not in ("all", "final"):
        raise ValueError(f"store must be 'all' or 'final', got {store!r}")
    n_steps = scales.n_steps
    state = initial.copy()
    states = [initial.copy()] if store == "all" else []
    for step in range(1, n_steps + 1):
        if timer is None:
            v = micro(state, params, scales.dt_micro, scales.n_micro)
            state = macro(state, v, params, scales.dt_macro)
        else:
            t0 = time.perf_counter()
            v = micro(state, params, scales.dt_micro, scales.n_micro)
            t1 = time.perf_counter()
            state = macro(state, v, params, scales.dt_macro)
            timer.macro_s += time.perf_counter() - t1
            timer.micro_s += t1 - t0
        _check_finite(state, step, params)
        if store == "all":
            states.append(state)
    if store == "all":
        times = np.arange(n_steps + 1) * scales.dt_macro
    else:
        times = np.array([n_steps * scales.dt_macro])
        states = [state]
    return Trajectory(times, states)


def run_coupled_with_injected_micro(
    macro: MacroStep,
    micro_results: Sequence[Field],
    params: Any,
    scales: TimeScales,
    initial: Field,
    store: str = "all",
    timer: StepTimer | None = None,
) -> Trajectory:
    """run_coupled with the micro model replaced by a precomputed lookup:
    micro_results[s-1] is used at macro step s. The list length must equal the
    number of macro steps."""
    if store not in ("all", "final"):
        raise ValueError(f"store must be 'all' or 'final', got {store!r}")
    n_steps = scales.n_steps
    if len(micro_results) != n_steps:
        raise ValueError(
            f"expected {n_steps} injected micro results, got {len(micro_results)}"
        )
    state = initial.copy()
    states = [initial.copy()] if store == "all" else []
    for step in range(1, n_steps + 1):
        if timer is None:
            state = macro(state, micro_results[step - 1], params, scales.dt_macro)
        else:
            t1 = time.perf_counter()
            state = macro(state, micro_results[step - 1], params, scales.dt_macro)
            timer.macro_s += time.perf_counter() - t1
        _check_finite(state, step, params)
        if store == "all":
            states.append(state)
    if store == "all":
        times = np.arange(n_steps + 1) * scales.dt_macro
    else:
        times = np.array([n_steps * scales.dt_macro])
        states = [state]
    return Trajectory(times, states)
