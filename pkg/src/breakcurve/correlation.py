# correlation.py
"""Predictive scheme built on top of the Thomas model: average the fitted
capacity across experiments, refit the rate constant per experiment with the
capacity pinned, regress the rate constant linearly on contact time and inlet
concentration, and forecast full breakthrough curves at new conditions.

Coefficient units are deliberately non-canonical (contact time in minutes,
inlet concentration in ppb) to match how such correlations are reported;
conversion back to canonical units happens at prediction time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import models
from .errors import DegenerateDesignError, ExtrapolationError, ModelMismatchError
from .estimation import FitResult
from .models import ThomasParams
from .units import ExperimentConditions


@dataclass(frozen=True)
class CorrelationModel:
    """kt = a*CT + b*C0 + c with CT in minutes and C0 in ppb.

    sources holds the (CT min, C0 ppb, kt) triples the coefficients were
    built from; predictions outside their convex hull warn.
    """

    qm_fixed: float  # g/L
    a: float  # per minute of contact time
    b: float  # per ppb of inlet concentration
    c: float  # intercept, L/(g.hr)
    resin_id: str = ""
    sources: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.qm_fixed <= 0:
            raise ValueError(f"qm_fixed must be positive, got {self.qm_fixed}")


def average_qm(fits: Sequence[FitResult]) -> float:
    """Arithmetic mean of the fitted capacities of a set of Thomas fits."""
    if not fits:
        raise ValueError("need at least one fit to average")
    qms = []
    for f in fits:
        if f.model != "thomas":
            raise ModelMismatchError(f"average_qm expects thomas fits, got {f.model!r}")
        qms.append({**f.params, **f.pinned}["qm"])
    return float(np.mean(qms))


def fit_plane(triples: Sequence[tuple[float, float, float]]) -> tuple[float, float, float]:
    """Least-squares plane kt = a*CT + b*C0 + c through (CT, C0, kt) triples.

    Exact when the triples are coplanar.  Requires at least 3 triples with
    both CT and C0 actually varied; a collapsed dimension is an error (use
    fit_line for single-variable data).
    """
    if len(triples) < 3:
        raise DegenerateDesignError(f"need at least 3 triples for a plane, got {len(triples)}")
    arr = np.asarray(triples, dtype=float)
    ct, c0, kt = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.ptp(ct) == 0.0:
        raise DegenerateDesignError("contact time not varied")
    if np.ptp(c0) == 0.0:
        raise DegenerateDesignError("inlet concentration not varied")
    design = np.column_stack([ct, c0, np.ones(len(arr))])
    coef, *_ = np.linalg.lstsq(design, kt, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def fit_line(pairs: Sequence[tuple[float, float]], which: str = "ct") -> tuple[float, float]:
    """Ordinary least squares line kt = slope*x + intercept.

    which names the regressor ("ct" or "c0") and only affects diagnostics.
    """
    if which not in ("ct", "c0"):
        raise ValueError(f"which must be 'ct' or 'c0', got {which!r}")
    if len(pairs) < 2:
        raise DegenerateDesignError(f"need at least 2 pairs for a line, got {len(pairs)}")
    arr = np.asarray(pairs, dtype=float)
    x, kt = arr[:, 0], arr[:, 1]
    axis = "contact time" if which == "ct" else "inlet concentration"
    if np.ptp(x) == 0.0:
        raise DegenerateDesignError(f"{axis} not varied")
    slope, intercept = np.polyfit(x, kt, 1)
    return float(slope), float(intercept)


def _inside_hull(sources: Sequence[tuple[float, float, float]], ct: float, c0: float) -> bool:
    pts = np.asarray([(s[0], s[1]) for s in sources], dtype=float)
    if len(pts) >= 3:
        try:
            from scipy.spatial import Delaunay, QhullError

            return bool(Delaunay(pts).find_simplex([ct, c0]) >= 0)
        except QhullError:
            pass  # collinear sources: fall back to the bounding box
    return bool(
        pts[:, 0].min() <= ct <= pts[:, 0].max() and pts[:, 1].min() <= c0 <= pts[:, 1].max()
    )


def predict_kt(m: CorrelationModel, ct_min: float, c0_ppb: float) -> float:
    """Correlated rate constant at the given conditions, L/(g.hr).

    Warns when the query point lies outside the hull of the source
    experiments; a nonpositive prediction means the linear correlation was
    pushed past its validity and is an error.
    """
    if ct_min <= 0 or c0_ppb <= 0:
        raise ValueError("contact time and inlet concentration must be positive")
    kt = m.a * ct_min + m.b * c0_ppb + m.c
    if m.sources and not _inside_hull(m.sources, ct_min, c0_ppb):
        warnings.warn(
            f"conditions (CT={ct_min} min, C0={c0_ppb} ppb) outside the source-experiment hull",
            stacklevel=2,
        )
    if kt <= 0:
        raise ExtrapolationError("correlation extrapolated past validity (predicted kt <= 0)")
    return float(kt)


def predict_curve(m: CorrelationModel, cond: ExperimentConditions, times) -> np.ndarray:
    """Full improved-model prediction: correlated kt plus the fixed capacity,
    evaluated through the Thomas forward on the given time grid (hours)."""
    kt = predict_kt(m, cond.ct_min, cond.c0_ppb)
    return models.thomas_forward(ThomasParams(kt, m.qm_fixed), cond, np.asarray(times, dtype=float))


def model_to_dict(m: CorrelationModel) -> dict:
    """JSON-ready representation with unit-tagged keys."""
    return {
        "resin_id": m.resin_id,
        "qm_fixed_g_per_l": m.qm_fixed,
        "a_per_min": m.a,
        "b_per_ppb": m.b,
        "c": m.c,
        "sources": [
            {"ct_min": s[0], "c0_ppb": s[1], "kt_l_per_g_hr": s[2]} for s in m.sources
        ],
    }


def model_from_dict(doc: dict) -> CorrelationModel:
    return CorrelationModel(
        qm_fixed=doc["qm_fixed_g_per_l"],
        a=doc["a_per_min"],
        b=doc["b_per_ppb"],
        c=doc["c"],
        resin_id=doc.get("resin_id", ""),
        sources=tuple(
            (s["ct_min"], s["c0_ppb"], s["kt_l_per_g_hr"]) for s in doc.get("sources", [])
        ),
    )
