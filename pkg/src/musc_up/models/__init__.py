"""Coupled reaction-diffusion testbeds behind the macro/micro contract."""

from .case1 import (
    Case1Config,
    Case1Model,
    Params1D,
    analytic_solution_1d,
    case1_config,
    case1_distribution,
    diffusion_step_1d,
    init_1d,
    reaction_micro_1d,
)
from .grayscott import (
    GrayScottConfig,
    GrayScottModel,
    GSParams,
    grayscott_config,
    grayscott_distribution,
    gs_diffusion_step,
    gs_init,
    gs_initial_profile,
    gs_reaction_micro,
)

__all__ = [
    "Case1Config",
    "Case1Model",
    "GSParams",
    "GrayScottConfig",
    "GrayScottModel",
    "Params1D",
    "analytic_solution_1d",
    "case1_config",
    "case1_distribution",
    "diffusion_step_1d",
    "grayscott_config",
    "grayscott_distribution",
    "gs_diffusion_step",
    "gs_init",
    "gs_initial_profile",
    "gs_reaction_micro",
    "init_1d",
    "reaction_micro_1d",
]
