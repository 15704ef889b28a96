"""Experiment configuration: JSON schema, validation, and dispatch.

A run is described by one JSON document selecting a model (with physical
parameter overrides and input spread) and a propagation method (with its
options). Validation reports every violation in one pass, not just the
first, and unknown keys are rejected everywhere -- a typo'd option name
fails loudly instead of silently running with defaults.

run_experiment builds the model, runs the method, and writes the artifact
triple (moments.csv / report.json / timing.json) into the output directory.
The process exit code contract: 0 on success, 2 when the semi-intrusive
error test rejected (artifacts are still written, carrying the fallback
estimate), 1 on any error.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass

import numpy as np
import jsonschema

from .coupling import Grid1D, Grid2D
from .gp import GPConfig, run_metamodel_up
from .models.case1 import REL_HALF_WIDTH as CASE1_RHO
from .models.case1 import Case1Model, case1_config, case1_distribution
from .models.grayscott import REL_HALF_WIDTH as GS_RHO
from .models.grayscott import GrayScottModel, grayscott_config, grayscott_distribution
from .montecarlo import run_mc
from .pc import coupled_pc_run, galerkin_run_1d, galerkin_run_gs
from .report import (
    REPORT_VERSION,
    load_moments_csv,
    mean_relative_std_error,
    write_json,
    write_moments_csv,
)
from .simc import SamplingPlan, run_simc

__all__ = [
    "CONFIG_SCHEMA",
    "ConfigError",
    "EXIT_ERROR",
    "EXIT_OK",
    "EXIT_REJECTED",
    "RunOutcome",
    "load_config",
    "normalize_config",
    "run_experiment",
    "validate_config",
]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_CASE1_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_micro": {"type": "integer", "minimum": 1},
        "dx": _POSITIVE,
        "n_steps": {"type": "integer", "minimum": 1},
        "growth": _POSITIVE,
        "dt_macro": _POSITIVE,
        "t_end": _POSITIVE,
    },
}

_GRAYSCOTT_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "nx": {"type": "integer", "minimum": 3},
        "ny": {"type": "integer", "minimum": 3},
        "length": _POSITIVE,
        "dt_macro": _POSITIVE,
        "t_end": _POSITIVE,
        "n_micro": {"type": "integer", "minimum": 1},
        "du": _POSITIVE,
        "dv": _POSITIVE,
        "reaction_dt_limit": _POSITIVE,
    },
}

_METHOD_OPTIONS = {
    "mc": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n_samples"],
        "properties": {"n_samples": {"type": "integer", "minimum": 2}},
    },
    "simc": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n_samples"],
        "properties": {
            "n_samples": {"type": "integer", "minimum": 2},
            "n_micro_samples": {"type": "integer", "minimum": 2},
            "selection": {"enum": ["maximin", "first"]},
            "test_per_step": {"type": "boolean"},
        },
    },
    "gp": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n_samples"],
        "properties": {
            "n_samples": {"type": "integer", "minimum": 2},
            "n_train": {"type": "integer", "minimum": 4},
            "nugget": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-4},
            "n_restarts": {"type": "integer", "minimum": 1},
            "max_evals": {"type": "integer", "minimum": 10},
            "lml_steps": {"type": "integer", "minimum": 1},
        },
    },
    "pc": {
        "type": "object",
        "additionalProperties": False,
        "required": ["order"],
        "properties": {
            "order": {"type": "integer", "minimum": 0},
            "level": {"type": "integer", "minimum": 1},
            "variant": {"enum": ["coupled", "intrusive"]},
        },
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "method"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["case1", "grayscott"]},
                "rho": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "params": {"type": "object"},
            },
            "allOf": [
                {
                    "if": {"properties": {"name": {"const": "case1"}}, "required": ["name"]},
                    "then": {"properties": {"params": _CASE1_PARAMS}},
                },
                {
                    "if": {"properties": {"name": {"const": "grayscott"}}, "required": ["name"]},
                    "then": {"properties": {"params": _GRAYSCOTT_PARAMS}},
                },
            ],
        },
        "method": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "options"],
            "properties": {
                "name": {"enum": list(_METHOD_OPTIONS)},
                "options": {"type": "object"},
            },
            "allOf": [
                {
                    "if": {"properties": {"name": {"const": name}}, "required": ["name"]},
                    "then": {"properties": {"options": schema}},
                }
                for name, schema in _METHOD_OPTIONS.items()
            ],
        },
        "seed": {"type": "integer", "minimum": 0},
        "store": {"enum": ["all", "final"]},
        "ci_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_resamples": {"type": "integer", "minimum": 10},
        "threads": {"type": "integer", "minimum": 1},
    },
}

_TOP_DEFAULTS = {
    "seed": 0,
    "store": "final",
    "ci_level": 0.95,
    "n_resamples": 1000,
    "threads": 1,
}

_METHOD_DEFAULTS = {
    "mc": {},
    "simc": {"n_micro_samples": 50, "selection": "maximin", "test_per_step": False},
    "gp": {"n_train": 25, "nugget": 1e-8, "n_restarts": 5, "max_evals": 200, "lml_steps": 4},
    "pc": {"variant": "coupled"},
}

_MODEL_RHO_DEFAULTS = {"case1": CASE1_RHO, "grayscott": GS_RHO}


class ConfigError(ValueError):
    """Invalid configuration; carries the full list of violations."""

    def __init__(self, errors: list):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


def validate_config(config: dict) -> list:
    """All schema violations as '<json path>: <message>' strings (empty when
    the document is valid)."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    found = []
    for err in validator.iter_errors(config):
        # surface the specific branch failures, not the opaque allOf wrapper
        leaves = sorted(err.context, key=lambda e: e.json_path) if err.context else [err]
        for leaf in leaves:
            found.append(f"{leaf.json_path}: {leaf.message}")
    return sorted(set(found))


def normalize_config(config: dict) -> dict:
    """Validated deep copy with every default filled in."""
    errors = validate_config(config)
    if errors:
        raise ConfigError(errors)
    cfg = copy.deepcopy(config)
    for key, value in _TOP_DEFAULTS.items():
        cfg.setdefault(key, value)
    cfg["model"].setdefault("params", {})
    cfg["model"].setdefault("rho", _MODEL_RHO_DEFAULTS[cfg["model"]["name"]])
    opts = dict(_METHOD_DEFAULTS[cfg["method"]["name"]])
    opts.update(cfg["method"]["options"])
    cfg["method"]["options"] = opts
    return cfg


def load_config(path: str) -> dict:
    """Parse and normalize a configuration file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"$: not valid JSON ({exc})"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["$: top level must be a JSON object"])
    return normalize_config(raw)


def build_problem(cfg: dict):
    """(model, distribution, time scales) from a normalized configuration."""
    name = cfg["model"]["name"]
    rho = cfg["model"]["rho"]
    params = cfg["model"]["params"]
    if name == "case1":
        dist = case1_distribution(
            n_micro=params.get("n_micro", 100),
            dx=params.get("dx", 1e-2),
            rel_half_width=rho,
        )
        model = Case1Model(case1_config(dist=dist, **params))
    else:
        dist = grayscott_distribution(rel_half_width=rho)
        model = GrayScottModel(grayscott_config(**params))
    return model, dist, model.time_scales()


def _grid_meta(grid) -> dict:
    if isinstance(grid, Grid1D):
        return {"kind": "1d", "n": grid.n, "dx": grid.dx, "length": grid.length}
    if isinstance(grid, Grid2D):
        return {
            "kind": "2d", "nx": grid.nx, "ny": grid.ny,
            "lx": grid.lx, "ly": grid.ly, "dx": grid.dx, "dy": grid.dy,
        }
    raise TypeError(f"unsupported grid type {type(grid).__name__}")


def _summary_stats(est) -> dict:
    out = {}
    for label, field in (("mean", est.mean), ("std", est.std)):
        out[label] = {
            "spatial_mean": float(np.mean(field)),
            "min": float(np.min(field)),
            "max": float(np.max(field)),
        }
    return out


@dataclass
class RunOutcome:
    exit_code: int
    payload: dict
    result: object


def run_experiment(
    config: dict,
    out_dir: str,
    seed: int | None = None,
    threads: int | None = None,
    reference_csv: str | None = None,
) -> RunOutcome:
    """Run one configured experiment and write its artifacts into out_dir.

    seed/threads override the configured values (command-line precedence).
    reference_csv, when given, points at a moments.csv whose std field serves
    as the reference for the mean relative std error recorded in report.json;
    without it that entry is null and scoring is left to the compare command.
    """
    cfg = normalize_config(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    if threads is not None:
        cfg["threads"] = int(threads)

    model, dist, scales = build_problem(cfg)
    method = cfg["method"]["name"]
    opts = cfg["method"]["options"]
    store = cfg["store"]
    ci_level = cfg["ci_level"]
    n_resamples = cfg["n_resamples"]
    run_seed = cfg["seed"]

    decision = None
    method_meta = {"name": method, "options": opts}
    extra_artifacts = {}
    os.makedirs(out_dir, exist_ok=True)

    if method == "mc":
        result = run_mc(
            model, dist, scales, opts["n_samples"], run_seed,
            store=store, level=ci_level, n_resamples=n_resamples,
            threads=cfg["threads"],
        )
        n_samples = result.n_samples
    elif method == "simc":
        plan = SamplingPlan(
            n_samples=opts["n_samples"],
            n_micro_samples=opts["n_micro_samples"],
            selection=opts["selection"],
        )
        result = run_simc(
            model, dist, scales, plan, run_seed,
            store=store, level=ci_level, n_resamples=n_resamples,
            test_per_step=opts["test_per_step"],
        )
        n_samples = result.n_samples
        decision = result.decision
        method_meta["decision"] = result.decision
        method_meta["fallback"] = result.fallback
        method_meta["n_micro_samples"] = plan.n_micro_samples
        method_meta["subsample_indices"] = [int(i) for i in result.subsample_indices]
        method_meta["error_bound"] = result.bounds.summary()
    elif method == "gp":
        gp_config = GPConfig(
            n_train=opts["n_train"], nugget=opts["nugget"],
            n_restarts=opts["n_restarts"], max_evals=opts["max_evals"],
            lml_steps=opts["lml_steps"],
        )
        result = run_metamodel_up(
            model, dist, scales, opts["n_samples"], run_seed,
            config=gp_config, store=store, level=ci_level, n_resamples=n_resamples,
        )
        n_samples = result.n_samples
        surrogate_name = "surrogate.npz"
        result.surrogate.save(os.path.join(out_dir, surrogate_name))
        extra_artifacts["surrogate_npz"] = surrogate_name
        method_meta["surrogate"] = {
            "lengthscales": [float(v) for v in result.surrogate.ell_],
            "signal_variance": float(result.surrogate.s2_),
            "nugget": float(result.surrogate.nugget_),
            "log_marginal_likelihood": float(result.surrogate.lml_),
        }
    elif method == "pc":
        if opts["variant"] == "coupled":
            result = coupled_pc_run(model, dist, opts["order"], opts.get("level"), store=store)
        elif isinstance(model, Case1Model):
            result = galerkin_run_1d(model.config, dist, opts["order"], opts.get("level"), store=store)
        else:
            result = galerkin_run_gs(model.config, dist, opts["order"], opts.get("level"), store=store)
        n_samples = 0
        method_meta["n_terms"] = result.basis.n_terms
        method_meta["level"] = result.basis.level
    else:  # unreachable behind the schema
        raise ConfigError([f"$.method.name: unknown method {method!r}"])

    est = result.moments.final
    grid = result.moments.grid
    write_moments_csv(os.path.join(out_dir, "moments.csv"), grid, est)
    with open(os.path.join(out_dir, "timing.json"), "w") as fh:
        json.dump(result.timing.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    mean_rel_std_error = None
    if reference_csv is not None:
        ref_cols = load_moments_csv(reference_csv)
        mean_rel_std_error = mean_relative_std_error(
            np.asarray(est.std).reshape(-1), ref_cols["std"]
        )

    payload = {
        "version": REPORT_VERSION,
        "model": {
            "name": cfg["model"]["name"],
            "rho": cfg["model"]["rho"],
            "params": cfg["model"]["params"],
            "grid": _grid_meta(grid),
            "time": {
                "dt_macro": scales.dt_macro,
                "dt_micro": scales.dt_micro,
                "n_micro": scales.n_micro,
                "t_end": scales.t_end,
                "n_steps": scales.n_steps,
            },
            "input_means": [float(v) for v in dist.means],
            "input_names": list(dist.names),
        },
        "method": method_meta,
        "seed": run_seed,
        "config": cfg,
        "timing": result.timing.to_dict(),
        "mean_rel_std_error": mean_rel_std_error,
        "store": store,
        "ci_level": ci_level,
        "n_resamples": n_resamples,
        "threads": cfg["threads"],
        "n_samples": n_samples,
        "final_time": float(result.moments.times[-1]),
        "n_stored_times": len(result.moments.times),
        "summary": _summary_stats(est),
        "decision": decision,
        "artifacts": {
            "moments_csv": "moments.csv",
            "timing_json": "timing.json",
            **extra_artifacts,
        },
    }
    write_json(os.path.join(out_dir, "report.json"), payload)
    exit_code = EXIT_REJECTED if decision == "reject" else EXIT_OK
    return RunOutcome(exit_code=exit_code, payload=payload, result=result)
