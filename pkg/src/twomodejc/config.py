"""Experiment configuration: TOML with dotted keys, validated before any work starts.

Example::

    model.omega0 = 0.98
    model.omega1 = 0.25
    model.omega2 = 1.0
    model.g1 = 0.01
    model.g2 = "opt"          # closed-form optimum for the near-resonant mode
    init.alpha1 = 4.0
    init.alpha2 = "4+0j"      # complex values may be given as strings
    run.method = "fluctuation"
    run.t_end_T = 5           # in units of T = pi/|delta2|
    run.samples = 401
    run.reference = "exact"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import magnus
from .errors import ValidationError
from . import exact
from .exact import FOCK_TOL
from .model import InitialState, ModelParams
from .optimize import BACKENDS, SearchConfig, seed_from_magnus
from .simulate import RunSpec

SCHEMA = {
    "model": {"omega0", "omega1", "omega2", "g1", "g2"},
    "init": {"c_e", "c_g", "alpha1", "alpha2"},
    "run": {"method", "t_end", "t_end_T", "samples", "reference", "fidelity", "exact_solver"},
    "fock": {"n1max", "n2max"},
    "tol": {"coefficient", "fock"},
    "optimize": {"backend", "g2_min", "g2_max", "points", "target_time", "target_T", "seed", "residual_tol", "nmax"},
    "output": {"path", "name"},
}


def _number(value, key, kind=float):
    if isinstance(value, bool):
        raise ValidationError(f"expected a number, got {value!r}", key=key)
    try:
        if kind is complex:
            return complex(value.replace(" ", "") if isinstance(value, str) else value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"expected {kind.__name__}, got {value!r}", key=key) from None


@dataclass
class ExperimentConfig:
    params: ModelParams
    init: InitialState
    run: Optional[RunSpec]
    search: Optional[SearchConfig]
    output_path: str = "out"
    output_name: str = "trajectory"
    raw: dict = field(default_factory=dict, repr=False)


def flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(flatten(v, key + "."))
        else:
            flat[key] = v
    return flat


def load(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}", key="--config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", key="--config") from None


def parse(doc: dict, method: Optional[str] = None, tol: Optional[float] = None) -> ExperimentConfig:
    """Validate a parsed document; ``method``/``tol`` are CLI overrides."""
    doc = {k: v for k, v in doc.items() if k != "curves"}
    flat = flatten(doc)
    for key in flat:
        section, _, name = key.partition(".")
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ValidationError("unknown configuration key", key=key)

    def get(key, default=None, kind=float):
        if key not in flat:
            return default
        return _number(flat[key], key, kind)

    for key in ("model.omega0", "model.omega1", "model.omega2", "model.g1", "init.alpha1", "init.alpha2"):
        if key not in flat:
            raise ValidationError("required key missing", key=key)
    alpha1 = get("init.alpha1", kind=complex)
    alpha2 = get("init.alpha2", kind=complex)
    init = InitialState(get("init.c_e", 1.0, complex), get("init.c_g", 0.0, complex), alpha1, alpha2)

    omega0, omega1, omega2 = get("model.omega0"), get("model.omega1"), get("model.omega2")
    g2_raw = flat.get("model.g2", "opt")
    if g2_raw == "opt":
        if abs(alpha2) == 0:
            raise ValidationError("'opt' needs alpha2 != 0", key="model.g2")
        g2 = magnus.optimal_g2(omega0 - omega2, abs(alpha2), 0)
    else:
        g2 = _number(g2_raw, "model.g2")
    params = ModelParams(omega0, omega1, omega2, get("model.g1"), g2)

    coef_tol = tol if tol is not None else get("tol.coefficient", 1e-10)
    fock_tol = tol if tol is not None else get("tol.fock", FOCK_TOL)

    run = None
    run_method = method or flat.get("run.method")
    if run_method is not None:
        if "run.t_end" in flat and "run.t_end_T" in flat:
            raise ValidationError("give either run.t_end or run.t_end_T", key="run.t_end")
        if "run.t_end_T" in flat:
            t_end = get("run.t_end_T") * magnus.coherence_time(params.delta2)
        elif "run.t_end" in flat:
            t_end = get("run.t_end")
        else:
            raise ValidationError("required key missing", key="run.t_end")
        run = RunSpec(
            params,
            init,
            t_end,
            get("run.samples", 401, int),
            str(run_method),
            flat.get("run.reference") or None,
            flat.get("run.fidelity", "state"),
            get("fock.n1max", None, int),
            get("fock.n2max", None, int),
            coef_tol,
            fock_tol,
            flat.get("run.exact_solver", "rk"),
        )
        if run.method == "exact" or run.reference == "exact":
            space = run.space
            # fail now, with the suggested bound, rather than after the cheap backends ran
            exact.coherent_state(init.alpha1, space.n1max)
            exact.coherent_state(init.alpha2, space.n2max)

    search = None
    if any(k.startswith("optimize.") for k in flat):
        backend = flat.get("optimize.backend", "semiclassical")
        if backend not in BACKENDS:
            raise ValidationError(f"unknown backend {backend!r}", key="optimize.backend")
        lo_default, hi_default = seed_from_magnus(params.delta2, abs(alpha2)) if abs(alpha2) else (None, None)
        T = magnus.coherence_time(params.delta2)
        if "optimize.target_T" in flat:
            target = get("optimize.target_T") * T
        else:
            target = get("optimize.target_time", T)
        lo = get("optimize.g2_min", lo_default)
        hi = get("optimize.g2_max", hi_default)
        if lo is None or hi is None:
            raise ValidationError("bracket needed when alpha2 = 0", key="optimize.g2_min")
        search = SearchConfig(
            lo,
            hi,
            target,
            backend,
            get("optimize.points", 64, int),
            get("optimize.seed", None),
            get("optimize.residual_tol", 1e-4),
            get("optimize.nmax", None, int),
            None,
            coef_tol,
            coef_tol,
        )

    return ExperimentConfig(
        params,
        init,
        run,
        search,
        str(flat.get("output.path", "out")),
        str(flat.get("output.name", "trajectory")),
        doc,
    )


def load_config(path, method=None, tol=None) -> ExperimentConfig:
    return parse(load(path), method, tol)


def shipped_config_dir() -> Path:
    return Path(__file__).parent / "configs"


def resolve(doc: dict, overrides: dict[str, Any]) -> dict:
    """Copy of ``doc`` with dotted-key overrides applied."""
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in doc.items()}
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        out.setdefault(section, {})[name] = value
    return out
