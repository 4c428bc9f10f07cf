# units.py
"""Canonical unit system and the experiment / curve data model.

Canonical internal units are g/L for concentrations, L for volumes, hr for
times, and L/hr for flow rates.  The fitted rate constant is reported in
L/(g.hr), so the logistic exponent K_T*q_m*CT - K_T*C0*t is dimensionless
only in this system.  All accepted field inputs and their conversions:

    c0_ppb  -> g/L   (x 1e-6)          v_ml   -> L   (x 1e-3)
    ct_min  -> hr    (/ 60)            canonical keys pass through unchanged
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

from .errors import ParseError

PPB_TO_G_PER_L = 1e-6

# declared-vs-recomputed contact time tolerance (relative)
CT_REL_TOL = 0.05
# bed volume vs column geometry tolerance (relative)
GEOMETRY_REL_TOL = 0.10


def ppb_to_g_per_l(x: float) -> float:
    """ppb (ug/L) -> g/L."""
    return x * PPB_TO_G_PER_L


def g_per_l_to_ppb(x: float) -> float:
    """g/L -> ppb (ug/L)."""
    return x / PPB_TO_G_PER_L


def min_to_hr(x: float) -> float:
    return x / 60.0


def hr_to_min(x: float) -> float:
    return x * 60.0


def ml_to_l(x: float) -> float:
    return x * 1e-3


@dataclass(frozen=True)
class ExperimentConditions:
    """One column experiment, all fields in canonical units.

    c0 in g/L, q in L/hr, v in L, ct in hr.  Optional geometry fields keep
    their natural units: u0 in cm/min, z and column_diameter in cm,
    resin_mass in kg (only needed for the mass form of the Thomas model).
    """

    c0: float
    q: float
    v: float
    ct: float
    resin_id: str = ""
    resin_mass: float | None = None
    u0: float | None = None
    z: float | None = None
    column_diameter: float | None = None

    def __post_init__(self) -> None:
        for name in ("c0", "q", "v", "ct"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        ct_vq = self.v / self.q
        if abs(self.ct - ct_vq) / ct_vq > CT_REL_TOL:
            raise ValueError(
                f"contact time {self.ct} hr inconsistent with V/Q = {ct_vq:.6g} hr "
                f"(beyond {CT_REL_TOL:.0%} tolerance)"
            )
        if self.z is not None and self.column_diameter is not None:
            # cross-check bed volume against cylinder geometry (cm^3 -> L)
            v_geom = self.z * math.pi * (self.column_diameter / 2.0) ** 2 * 1e-3
            if abs(self.v - v_geom) / v_geom > GEOMETRY_REL_TOL:
                raise ValueError(
                    f"resin volume {self.v} L inconsistent with column geometry "
                    f"({v_geom:.4g} L from Z and diameter)"
                )

    @property
    def c0_ppb(self) -> float:
        return g_per_l_to_ppb(self.c0)

    @property
    def ct_min(self) -> float:
        return hr_to_min(self.ct)


# raw-input key -> (canonical field, conversion)
_FIELD_CONVERSIONS = {
    "c0_ppb": ("c0", ppb_to_g_per_l),
    "c0_g_per_l": ("c0", None),
    "q_l_per_hr": ("q", None),
    "v_ml": ("v", ml_to_l),
    "v_l": ("v", None),
    "ct_min": ("ct", min_to_hr),
    "ct_hr": ("ct", None),
    "resin_mass_kg": ("resin_mass", None),
    "u0_cm_per_min": ("u0", None),
    "z_cm": ("z", None),
    "column_diameter_cm": ("column_diameter", None),
    "resin_id": ("resin_id", None),
}

# the on-disk conditions JSON schema is a strict subset of the accepted keys
CONDITIONS_JSON_KEYS = frozenset(
    {"c0_ppb", "q_l_per_hr", "v_ml", "ct_min", "u0_cm_per_min", "z_cm", "resin_id"}
)


def to_canonical(raw: Mapping | ExperimentConditions) -> ExperimentConditions:
    """Convert a raw conditions mapping with unit-tagged keys to canonical form.

    Idempotent: an ExperimentConditions instance passes through unchanged, and
    canonical-unit keys convert with factor 1.  A declared contact time is kept
    when it agrees with V/Q within 5%; beyond that V/Q wins and a warning is
    emitted (the declared value is presumed a transcription slip).
    """
    if isinstance(raw, ExperimentConditions):
        return raw

    fields: dict = {}
    for key, value in raw.items():
        if key not in _FIELD_CONVERSIONS:
            raise ParseError(f"unknown unit tag or field: {key!r}")
        target, convert = _FIELD_CONVERSIONS[key]
        if target in fields:
            raise ParseError(f"field {target!r} given twice (via {key!r})")
        fields[target] = convert(value) if convert else value

    for required in ("c0", "q", "v"):
        if required not in fields:
            raise ParseError(f"missing required field {required!r}")

    ct_vq = fields["v"] / fields["q"]
    declared = fields.get("ct")
    if declared is None:
        fields["ct"] = ct_vq
    elif abs(declared - ct_vq) / ct_vq > CT_REL_TOL:
        warnings.warn(
            f"declared contact time {hr_to_min(declared):.4g} min disagrees with "
            f"V/Q = {hr_to_min(ct_vq):.4g} min; using V/Q",
            stacklevel=2,
        )
        fields["ct"] = ct_vq

    return ExperimentConditions(**fields)


@dataclass(frozen=True)
class BreakthroughCurve:
    """Effluent time series: (t in hr, dimensionless ratio C/C0).

    Points with ratio exactly 0 are kept but their indices recorded; the
    relative-error objective cannot use them and the estimation layer
    excludes them explicitly.
    """

    times: tuple[float, ...]
    ratios: tuple[float, ...]
    conditions: ExperimentConditions
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.times) != len(self.ratios):
            raise ValueError("times and ratios must have equal length")
        if len(self.times) < 3:
            raise ValueError(f"need at least 3 points, got {len(self.times)}")
        if self.times[0] < 0:
            raise ValueError("time must be nonnegative")
        for i in range(1, len(self.times)):
            if self.times[i] <= self.times[i - 1]:
                raise ValueError(f"time not increasing at row {i + 1}")
        for i, y in enumerate(self.ratios):
            if not 0.0 <= y <= 1.0:
                raise ValueError(f"ratio {y} outside [0, 1] at row {i + 1}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def zero_point_indices(self) -> tuple[int, ...]:
        return tuple(i for i, y in enumerate(self.ratios) if y == 0.0)


def ingest_curve(
    source: str | TextIO | Iterable[str],
    conditions: ExperimentConditions,
    label: str = "",
) -> BreakthroughCurve:
    """Parse a curve CSV into a validated BreakthroughCurve.

    Header is either ``t_hr,ratio`` or ``t_hr,c_ppb``; in concentration mode
    each value is divided by the inlet concentration.  Lines starting with
    ``#`` are ignored.
    """
    if isinstance(source, str):
        with open(source, newline="") as fh:
            return ingest_curve(fh, conditions, label or source)

    lines = [ln for ln in source if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("empty curve file")

    reader = csv.reader(io.StringIO("".join(ln if ln.endswith("\n") else ln + "\n" for ln in lines)))
    header = [h.strip() for h in next(reader)]
    if header == ["t_hr", "ratio"]:
        concentration_mode = False
    elif header == ["t_hr", "c_ppb"]:
        concentration_mode = True
    else:
        raise ParseError(f"unrecognized curve header {header!r}; expected t_hr,ratio or t_hr,c_ppb")

    times: list[float] = []
    ratios: list[float] = []
    for row_no, row in enumerate(reader, start=2):
        if len(row) != 2:
            raise ParseError(f"row {row_no}: expected 2 columns, got {len(row)}")
        try:
            t = float(row[0])
            value = float(row[1])
        except ValueError as exc:
            raise ParseError(f"row {row_no}: {exc}") from exc
        y = value / conditions.c0_ppb if concentration_mode else value
        times.append(t)
        ratios.append(y)

    try:
        return BreakthroughCurve(tuple(times), tuple(ratios), conditions, label)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def breakthrough_ratio(limit_ppb: float, c0_ppb: float) -> float:
    """Dimensionless bed-exhaustion threshold: regulatory limit over inlet.

    Both arguments in ppb.  Errors when the inlet is already at or below the
    limit (no breakthrough threshold exists).
    """
    if limit_ppb <= 0:
        raise ValueError("limit must be positive")
    if limit_ppb >= c0_ppb:
        raise ValueError("inlet already below limit")
    return limit_ppb / c0_ppb
