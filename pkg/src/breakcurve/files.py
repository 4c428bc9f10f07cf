# files.py
"""Deterministic file persistence: JSON with fixed field order and floats at
10 significant digits, plus the curve/conditions readers and fit-result
schemas shared by the CLI and tests.

JSON keys carry units (e.g. ``kt_l_per_g_hr``) so unit bugs stay greppable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ParseError
from .estimation import FitResult
from .units import (
    CONDITIONS_JSON_KEYS,
    ExperimentConditions,
    g_per_l_to_ppb,
    hr_to_min,
    to_canonical,
)


def _format_floats(obj: Any) -> Any:
    """Recursively re-quantize floats to 10 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{obj:.10g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _format_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_format_floats(v) for v in obj]
    return obj


def dump_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(_format_floats(obj), indent=2) + "\n")


def load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_conditions(path: str | Path) -> ExperimentConditions:
    """Read a conditions JSON file (strict schema) into canonical form."""
    doc = load_json(path)
    unknown = set(doc) - CONDITIONS_JSON_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown conditions keys {sorted(unknown)}")
    try:
        return to_canonical(doc)
    except (ParseError, ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


# per-model mapping from internal parameter names to unit-tagged JSON keys
PARAM_KEYS: dict[str, dict[str, str]] = {
    "thomas": {"kt": "kt_l_per_g_hr", "qm": "qm_g_per_l"},
    "yoon-nelson": {"kyn": "kyn_per_hr", "tau": "tau_hr"},
    "clark": {"a": "a", "r": "r_per_hr", "n": "n"},
    "wolborska": {"beta_a": "beta_a_per_hr", "n0": "n0_g_per_l"},
}


def conditions_to_dict(cond: ExperimentConditions) -> dict:
    doc = {
        "resin_id": cond.resin_id,
        "c0_ppb": g_per_l_to_ppb(cond.c0),
        "q_l_per_hr": cond.q,
        "v_ml": cond.v * 1e3,
        "ct_min": hr_to_min(cond.ct),
    }
    if cond.u0 is not None:
        doc["u0_cm_per_min"] = cond.u0
    if cond.z is not None:
        doc["z_cm"] = cond.z
    return doc


def fit_result_to_dict(
    fit: FitResult, cond: ExperimentConditions, curve_file: str | None = None
) -> dict:
    keys = PARAM_KEYS[fit.model]
    doc = {
        "model": fit.model,
        "resin_id": cond.resin_id,
        "conditions": conditions_to_dict(cond),
        "params": {keys[n]: v for n, v in fit.params.items()},
        "pinned": {keys[n]: v for n, v in fit.pinned.items()},
        "stats": {
            "rsse": fit.rsse,
            "hfe_pct": fit.hfe,
            "r_squared": fit.r_squared,
            "n_points_used": fit.n_points_used,
            "excluded_points": fit.excluded_points,
        },
        "bounds": {keys[n]: list(b) for n, b in fit.bounds.items()} if fit.bounds else None,
        "active_bounds": {keys[n]: flag for n, flag in fit.active_bounds.items()},
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    if curve_file is not None:
        doc["curve_file"] = str(curve_file)
    return doc


def fit_result_from_dict(doc: dict) -> tuple[FitResult, ExperimentConditions]:
    """Inverse of fit_result_to_dict (bounds/diagnostics restored as stored)."""
    model = doc["model"]
    inverse = {v: k for k, v in PARAM_KEYS[model].items()}
    cond = to_canonical(dict(doc["conditions"]))
    fit = FitResult(
        model=model,
        params={inverse[k]: v for k, v in doc["params"].items()},
        rsse=doc["stats"]["rsse"],
        hfe=doc["stats"]["hfe_pct"],
        r_squared=doc["stats"]["r_squared"],
        n_points_used=doc["stats"]["n_points_used"],
        excluded_points=doc["stats"]["excluded_points"],
        bounds={inverse[k]: tuple(b) for k, b in doc["bounds"].items()} if doc.get("bounds") else None,
        active_bounds={inverse[k]: f for k, f in doc.get("active_bounds", {}).items()},
        converged=doc["converged"],
        iterations=doc["iterations"],
        pinned={inverse[k]: v for k, v in doc.get("pinned", {}).items()},
    )
    return fit, cond


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    """Plain delimited output with the same 10-significant-digit float policy."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
