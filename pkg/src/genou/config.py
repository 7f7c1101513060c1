"""Experiment configuration: a JSON key-value tree with strict validation.

Unknown keys are rejected, all violations are reported at once, and parsing
then serialising is a fixed point (defaults are filled in and echoed back).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError
from .models import (
    BrownianExponent,
    CogarchCPP,
    DeterministicAbs,
    Gaussian,
    LevyModel,
    Nelson,
    TwoPoint,
)

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "model_from_spec", "model_to_spec"]

TASKS = (
    "simulate",
    "constants",
    "verify_identities",
    "tails",
    "extremes",
    "acf_rates",
    "integrated_limit",
)

_DEFAULTS = {
    "h": 1.0,
    "sizes": [1000],
    "reps": 200,
    "seed": 0,
    "output_dir": "out",
    "tolerances": {},
    "n_paths": 20000,
    "subgrid": 16,
}

_TOLERANCE_DEFAULTS = {
    "identity_z": 3.0,
    "tail_ratio_rel": 0.25,
    "hill_rel": 0.10,
    "theta_sigmas": 3.0,
    "slope_band": 0.12,
    "ks_limit": 0.05,
}

_MODEL_KEYS = {
    "nelson": {"lambda", "a", "sigma"},
    "cogarch": {"beta", "c", "lambda_g", "mu", "jump_law"},
    "brownian_exponent": {"m", "sigma", "eta_rate"},
}

_JUMP_KEYS = {
    "two_point": {"z"},
    "gaussian": {"sd"},
    "const_abs": {"z"},
}


@dataclass
class ExperimentConfig:
    model: LevyModel
    tasks: list
    h: float = 1.0
    sizes: list = field(default_factory=lambda: [1000])
    reps: int = 200
    seed: int = 0
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    n_paths: int = 20000
    subgrid: int = 16

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, _TOLERANCE_DEFAULTS[name]))


def model_from_spec(spec: dict, problems: list) -> LevyModel | None:
    """Build a model from its config subtree, appending problems in place."""
    if not isinstance(spec, dict):
        problems.append("model: must be an object")
        return None
    family = spec.get("family")
    if family not in _MODEL_KEYS:
        problems.append(f"model.family: expected one of {sorted(_MODEL_KEYS)}, got {family!r}")
        return None
    unknown = set(spec) - _MODEL_KEYS[family] - {"family"}
    if unknown:
        problems.append(f"model: unknown keys for family '{family}': {sorted(unknown)}")

    def num(key, positive=False, nonneg=False, default=None):
        if key not in spec:
            if default is not None:
                return default
            problems.append(f"model.{key}: required for family '{family}'")
            return None
        v = spec[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            problems.append(f"model.{key}: must be a finite number")
            return None
        if positive and v <= 0:
            problems.append(f"model.{key}: must be > 0")
            return None
        if nonneg and v < 0:
            problems.append(f"model.{key}: must be >= 0")
            return None
        return float(v)

    if family == "nelson":
        lam, a, sigma = num("lambda", positive=True), num("a", nonneg=True), num("sigma", positive=True)
        if None in (lam, a, sigma):
            return None
        return Nelson(lam=lam, a=a, sigma=sigma)
    if family == "brownian_exponent":
        m, sigma = num("m"), num("sigma", positive=True)
        eta = num("eta_rate", nonneg=True, default=0.0)
        if None in (m, sigma, eta):
            return None
        return BrownianExponent(m=m, sigma=sigma, eta_rate=eta)

    beta, c = num("beta", nonneg=True), num("c", positive=True)
    lam_g, mu = num("lambda_g", nonneg=True), num("mu", nonneg=True)
    jl_spec = spec.get("jump_law")
    law = None
    if not isinstance(jl_spec, dict) or jl_spec.get("law") not in _JUMP_KEYS:
        problems.append(f"model.jump_law.law: expected one of {sorted(_JUMP_KEYS)}")
    else:
        kind = jl_spec["law"]
        unknown = set(jl_spec) - _JUMP_KEYS[kind] - {"law"}
        if unknown:
            problems.append(f"model.jump_law: unknown keys: {sorted(unknown)}")
        par = jl_spec.get("z" if kind != "gaussian" else "sd")
        if not isinstance(par, (int, float)) or isinstance(par, bool) or par <= 0:
            problems.append("model.jump_law: magnitude/sd must be a number > 0")
        else:
            law = {"two_point": TwoPoint, "gaussian": Gaussian, "const_abs": DeterministicAbs}[
                kind
            ](float(par))
    if None in (beta, c, lam_g, mu) or law is None:
        return None
    return CogarchCPP(beta=beta, c=c, lambda_g=lam_g, mu=mu, jump_law=law)


def model_to_spec(model: LevyModel) -> dict:
    if isinstance(model, Nelson):
        return {"family": "nelson", "lambda": model.lam, "a": model.a, "sigma": model.sigma}
    if isinstance(model, BrownianExponent):
        return {
            "family": "brownian_exponent",
            "m": model.m,
            "sigma": model.sigma,
            "eta_rate": model.eta_rate,
        }
    law = model.jump_law
    if isinstance(law, TwoPoint):
        jl = {"law": "two_point", "z": law.z}
    elif isinstance(law, Gaussian):
        jl = {"law": "gaussian", "sd": law.sd}
    else:
        jl = {"law": "const_abs", "z": law.z}
    return {
        "family": "cogarch",
        "beta": model.beta,
        "c": model.c,
        "lambda_g": model.lambda_g,
        "mu": model.mu,
        "jump_law": jl,
    }


def parse_config(document: str) -> ExperimentConfig:
    """Parse and validate an experiment config document.

    Raises ParseError for malformed JSON (with line/column) and
    ValidationError listing every field violation at once.
    """
    try:
        tree = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(tree, dict):
        raise ParseError("top level must be an object")

    problems: list[str] = []
    known = {"model", "tasks"} | set(_DEFAULTS)
    unknown = set(tree) - known
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")

    model = model_from_spec(tree.get("model", None), problems)
    if "model" not in tree:
        problems.append("model: required")

    tasks = tree.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        problems.append("tasks: must be a non-empty list")
        tasks = []
    else:
        bad = [t for t in tasks if t not in TASKS]
        if bad:
            problems.append(f"tasks: unknown task names {bad}; valid: {list(TASKS)}")

    merged = dict(_DEFAULTS)
    for k in _DEFAULTS:
        if k in tree:
            merged[k] = tree[k]

    def check_num(key, cond, desc):
        v = merged[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not cond(v):
            problems.append(f"{key}: {desc}")

    check_num("h", lambda v: v > 0, "must be a number > 0")
    check_num("reps", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1")
    check_num("seed", lambda v: isinstance(v, int), "must be an integer")
    check_num("n_paths", lambda v: isinstance(v, int) and v >= 100, "must be an integer >= 100")
    check_num("subgrid", lambda v: isinstance(v, int) and v >= 1, "must be an integer >= 1")
    if not isinstance(merged["sizes"], list) or not merged["sizes"] or any(
        not isinstance(s, int) or s < 10 for s in merged["sizes"]
    ):
        problems.append("sizes: must be a non-empty list of integers >= 10")
    if not isinstance(merged["output_dir"], str) or not merged["output_dir"]:
        problems.append("output_dir: must be a non-empty string")
    if not isinstance(merged["tolerances"], dict) or any(
        k not in _TOLERANCE_DEFAULTS for k in merged["tolerances"]
    ):
        problems.append(f"tolerances: keys must be among {sorted(_TOLERANCE_DEFAULTS)}")

    if problems:
        raise ValidationError(problems)

    return ExperimentConfig(
        model=model,
        tasks=list(tasks),
        h=float(merged["h"]),
        sizes=[int(s) for s in merged["sizes"]],
        reps=int(merged["reps"]),
        seed=int(merged["seed"]),
        output_dir=merged["output_dir"],
        tolerances=dict(merged["tolerances"]),
        n_paths=int(merged["n_paths"]),
        subgrid=int(merged["subgrid"]),
    )


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical JSON with defaults echoed back; parse(serialize(c)) == c."""
    tree = {
        "model": model_to_spec(config.model),
        "tasks": config.tasks,
        "h": config.h,
        "sizes": config.sizes,
        "reps": config.reps,
        "seed": config.seed,
        "output_dir": config.output_dir,
        "tolerances": config.tolerances,
        "n_paths": config.n_paths,
        "subgrid": config.subgrid,
    }
    return json.dumps(tree, indent=2, sort_keys=True) + "\n"
