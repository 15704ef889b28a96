"""musc-up: uncertainty propagation for time-scale-separated coupled models.

The package couples a slow macro solver to a fast micro solver behind one
stepping contract, and propagates uncertain model inputs through the coupled
system with four methods sharing that contract:

* plain Monte Carlo over full coupled runs,
* semi-intrusive MC, where only a subsample runs the micro model and a cubic
  RBF interpolant fills in the rest -- guarded by a leave-one-out error bound
  that accepts or rejects the interpolation against the MC noise floor,
* a Gaussian-process metamodel of the micro response trained on a small
  design of full runs,
* polynomial chaos, intrusive on the micro side and non-intrusively
  projected on the macro side.

Two reaction-diffusion testbeds are included: a periodic 1D problem with an
analytic solution, and the Gray-Scott pattern-forming system.
"""

from .coupling import (
    Field,
    Grid1D,
    Grid2D,
    NonFiniteStateError,
    StepTimer,
    TimeScales,
    Trajectory,
    run_coupled,
    run_coupled_with_injected_micro,
)
from .gp import GaussianProcessSurrogate, GPConfig, MetamodelResult, run_metamodel_up
from .interpolation import CubicRBFInterpolator
from .moments import MomentEstimate, bootstrap_ci, estimate_moments
from .montecarlo import MCResult, MomentHistory, run_mc
from .pc import (
    PCBasis,
    PCDivergenceError,
    PCResult,
    build_basis,
    coupled_pc_run,
    galerkin_multiply,
    galerkin_run_1d,
    galerkin_run_gs,
    moments_from_pc,
)
from .sampling import InputDistribution, SampleSet, draw_samples, tensor_design
from .simc import (
    ErrorBoundReport,
    SamplingPlan,
    SIMCResult,
    error_bounds,
    interpolation_test,
    run_simc,
    select_subsample,
)
from .timing import TimingBreakdown

__version__ = "0.1.0"

__all__ = [
    "CubicRBFInterpolator",
    "ErrorBoundReport",
    "Field",
    "GPConfig",
    "GaussianProcessSurrogate",
    "Grid1D",
    "Grid2D",
    "InputDistribution",
    "MCResult",
    "MetamodelResult",
    "MomentEstimate",
    "MomentHistory",
    "NonFiniteStateError",
    "PCBasis",
    "PCDivergenceError",
    "PCResult",
    "SIMCResult",
    "SampleSet",
    "SamplingPlan",
    "StepTimer",
    "TimeScales",
    "TimingBreakdown",
    "Trajectory",
    "bootstrap_ci",
    "build_basis",
    "coupled_pc_run",
    "draw_samples",
    "error_bounds",
    "estimate_moments",
    "galerkin_multiply",
    "galerkin_run_1d",
    "galerkin_run_gs",
    "interpolation_test",
    "moments_from_pc",
    "run_coupled",
    "run_coupled_with_injected_micro",
    "run_mc",
    "run_metamodel_up",
    "run_simc",
    "select_subsample",
    "tensor_design",
    "__version__",
]
