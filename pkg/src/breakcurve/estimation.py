# estimation.py
"""Fit-quality statistics, box-constrained parameter fitting, and Thomas
sensitivity analysis.

The fitting objective is the residual sum of squared *relative* errors
(normalized by the calculated value), which is undefined where the model
predicts ~0; such points are excluded below a fixed threshold and counted.
The optimizer is derivative-free simplex descent in log-parameter space with
a deterministic 5-point multi-start schedule, so repeated fits of the same
data are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import models
from .errors import ModelMismatchError, ObjectiveUndefinedError
from .models import ThomasParams
from .units import BreakthroughCurve, ExperimentConditions

# calculated ratios below this are excluded from the relative-error sums
EPSILON_CALC = 1e-6

# a fitted value this close to a bound (scaled by box width) counts as active
ACTIVE_BOUND_TOL = 1e-3

MODEL_ORDER = ("thomas", "yoon-nelson", "clark", "wolborska")

# default multi-start search boxes (linear space) per model parameter
_DEFAULT_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "thomas": {"kt": (1e1, 1e4), "qm": (1e-2, 1e0)},
    "yoon-nelson": {"kyn": (1e-4, 1e2), "tau": (1e-2, 1e4)},
    "clark": {"a": (1e-2, 1e6), "r": (1e-4, 1e2), "n": (1.2, 6.0)},
    "wolborska": {"beta_a": (1e-3, 1e3), "n0": (1e-5, 1e1)},
}

_N_STARTS = 5


def excluded_points(calc: Sequence[float]) -> int:
    """Number of points whose calculated ratio falls below the exclusion threshold."""
    return int((np.asarray(calc, dtype=float) < EPSILON_CALC).sum())


def rsse(calc: Sequence[float], exp: Sequence[float]) -> float:
    """Residual sum of squared relative errors, sum(((cal - exp)/cal)^2).

    Points with cal below the threshold are excluded; if nothing survives the
    objective is undefined.
    """
    c = np.asarray(calc, dtype=float)
    e = np.asarray(exp, dtype=float)
    if c.shape != e.shape:
        raise ValueError("calc and exp series must have equal length")
    mask = c >= EPSILON_CALC
    if not mask.any():
        raise ObjectiveUndefinedError("objective undefined on this curve (all points excluded)")
    return float((((c[mask] - e[mask]) / c[mask]) ** 2).sum())


def hfe(calc: Sequence[float], exp: Sequence[float], p: int = 2) -> float:
    """Hybrid fractional error, percent: (100/(n-p)) * sum((cal-exp)^2 / cal).

    n is the number of points surviving the same exclusion rule as rsse; p is
    the model's parameter count.
    """
    c = np.asarray(calc, dtype=float)
    e = np.asarray(exp, dtype=float)
    if c.shape != e.shape:
        raise ValueError("calc and exp series must have equal length")
    mask = c >= EPSILON_CALC
    n = int(mask.sum())
    if n == 0:
        raise ObjectiveUndefinedError("objective undefined on this curve (all points excluded)")
    if n <= p:
        raise ValueError(f"need more points than parameters (n={n}, p={p})")
    return float(100.0 / (n - p) * (((c[mask] - e[mask]) ** 2) / c[mask]).sum())


def r_squared(calc: Sequence[float], exp: Sequence[float]) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot on the ratio series."""
    c = np.asarray(calc, dtype=float)
    e = np.asarray(exp, dtype=float)
    if c.shape != e.shape:
        raise ValueError("calc and exp series must have equal length")
    if len(e) < 2:
        raise ValueError("need at least 2 points")
    ss_tot = ((e - e.mean()) ** 2).sum()
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined for a constant experimental series")
    return float(1.0 - ((e - c) ** 2).sum() / ss_tot)


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    rsse: float
    hfe: float | None
    r_squared: float
    n_points_used: int
    excluded_points: int
    bounds: dict[str, tuple[float, float]] | None
    active_bounds: dict[str, bool]
    converged: bool
    iterations: int
    pinned: dict[str, float] = field(default_factory=dict)

    def thomas_params(self) -> ThomasParams:
        if self.model != "thomas":
            raise ModelMismatchError(f"expected a thomas fit, got {self.model!r}")
        all_params = {**self.params, **self.pinned}
        return ThomasParams(all_params["kt"], all_params["qm"])


# ---------------------------------------------------------------------------
# model plumbing for the optimizer
# ---------------------------------------------------------------------------


def _forward_builder(
    model: str, cond: ExperimentConditions, times: np.ndarray, pin: Mapping[str, float]
) -> tuple[list[str], Callable[[Sequence[float]], np.ndarray]]:
    """Free-parameter names plus a vectorized forward over the curve times."""
    if model == "thomas":
        names = [n for n in ("kt", "qm") if n not in pin]

        def forward(values):
            p = dict(zip(names, values), **pin)
            return models.thomas_forward(ThomasParams(p["kt"], p["qm"]), cond, times)

    elif model == "yoon-nelson":
        names = [n for n in ("kyn", "tau") if n not in pin]

        def forward(values):
            p = dict(zip(names, values), **pin)
            return models.yoon_nelson_forward(models.YoonNelsonParams(p["kyn"], p["tau"]), times)

    elif model == "clark":
        names = [n for n in ("a", "r", "n") if n not in pin]

        def forward(values):
            p = dict(zip(names, values), **pin)
            return models.clark_forward(models.ClarkParams(p["a"], p["r"], p["n"]), times)

    elif model == "wolborska":
        if cond.z is None or cond.u0 is None:
            raise ModelMismatchError("wolborska requires z_cm and u0_cm_per_min in conditions")
        names = [n for n in ("beta_a", "n0") if n not in pin]

        def forward(values):
            p = dict(zip(names, values), **pin)
            return models.wolborska_forward(models.WolborskaParams(p["beta_a"], p["n0"]), cond, times)

    else:
        raise ModelMismatchError(f"unknown model {model!r}")

    if not names:
        raise ValueError("no free parameters left to fit")
    return names, forward


def _to_log(name: str, value: float) -> float:
    # Clark's n lives on (1, inf); everything else on (0, inf)
    return np.log(value - 1.0) if name == "n" else np.log(value)


def _from_log(name: str, x: float) -> float:
    return 1.0 + np.exp(x) if name == "n" else float(np.exp(x))


def _start_schedule(
    names: list[str], ranges: Mapping[str, tuple[float, float]], init: Mapping[str, float] | None
) -> list[np.ndarray]:
    """Deterministic multi-starts: the diagonal of a per-parameter log grid."""
    grids = {
        name: np.linspace(_to_log(name, ranges[name][0]), _to_log(name, ranges[name][1]), _N_STARTS)
        for name in names
    }
    starts = [np.array([grids[name][i] for name in names]) for i in range(_N_STARTS)]
    if init is not None:
        starts.insert(0, np.array([_to_log(name, init[name]) for name in names]))
    return starts


def fit(
    curve: BreakthroughCurve,
    model: str = "thomas",
    init: Mapping[str, float] | None = None,
    bounds: Mapping[str, tuple[float, float]] | None = None,
    pin: Mapping[str, float] | None = None,
    hfe_p: int | None = None,
) -> FitResult:
    """Fit a breakthrough model to a curve by minimizing rsse.

    bounds, when given, is a per-parameter (lower, upper) box in linear
    space; the fitted point is clamped inside it and parameters landing on a
    bound (within 1e-3 of the box width) are flagged active.  pin fixes named
    parameters at supplied values (e.g. Clark's n, or qm for the fixed-qm
    workflow).  Deterministic: a fixed multi-start schedule and no randomness.
    """
    pin = dict(pin or {})
    times = np.asarray(curve.times, dtype=float)
    y = np.asarray(curve.ratios, dtype=float)
    names, forward = _forward_builder(model, curve.conditions, times, pin)

    if bounds is not None:
        for name, (lo, hi) in bounds.items():
            if name not in names:
                raise ValueError(f"bound on unknown or pinned parameter {name!r}")
            if not 0 < lo < hi:
                raise ValueError(f"invalid bounds for {name!r}: ({lo}, {hi})")
            if init is not None and not lo <= init[name] <= hi:
                raise ValueError(f"init for {name!r} outside bounds")
        if set(bounds) != set(names):
            raise ValueError("bounds must cover every free parameter")

    ranges = dict(_DEFAULT_RANGES[model])
    if model == "yoon-nelson":
        # keep the plateau of the logistic reachable for slow curves
        ranges["tau"] = (1e-2, max(1e1, 10.0 * times[-1]))
    if bounds is not None:
        ranges.update(bounds)

    lo_log = np.array([_to_log(n, ranges[n][0]) for n in names])
    hi_log = np.array([_to_log(n, ranges[n][1]) for n in names])

    def clamp(x: np.ndarray) -> np.ndarray:
        return np.clip(x, lo_log, hi_log) if bounds is not None else x

    def objective(x: np.ndarray) -> float:
        values = [_from_log(n, v) for n, v in zip(names, clamp(x))]
        try:
            with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                calc = forward(values)
                if not np.all(np.isfinite(calc)):
                    return 1e30
                # the exclusion rule is for small-t points the model legitimately
                # predicts as ~0; penalize parameters that "exclude away" points
                # the data says are significant, or the optimizer games the rule
                gamed = int(((np.asarray(calc) < EPSILON_CALC) & (y > EPSILON_CALC)).sum())
                return rsse(calc, y) + 1e3 * gamed
        except (ObjectiveUndefinedError, ValueError, OverflowError):
            return 1e30

    best = None
    total_iters = 0
    for x0 in _start_schedule(names, ranges, init):
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000, "maxfev": 8000},
        )
        total_iters += int(res.nit)
        if best is None or res.fun < best.fun:
            best = res

    x_final = clamp(best.x)
    fitted = {n: _from_log(n, v) for n, v in zip(names, x_final)}
    calc = forward([fitted[n] for n in names])

    n_excluded = excluded_points(calc)
    n_used = len(y) - n_excluded
    p = hfe_p if hfe_p is not None else len(names) + len(pin)
    try:
        hfe_value: float | None = hfe(calc, y, p)
    except ValueError:
        hfe_value = None

    active = {n: False for n in names}
    if bounds is not None:
        for n in names:
            lo, hi = bounds[n]
            width = hi - lo
            active[n] = min(abs(fitted[n] - lo), abs(fitted[n] - hi)) / width < ACTIVE_BOUND_TOL

    return FitResult(
        model=model,
        params=fitted,
        rsse=rsse(calc, y),
        hfe=hfe_value,
        r_squared=r_squared(calc, y),
        n_points_used=n_used,
        excluded_points=n_excluded,
        bounds={n: tuple(bounds[n]) for n in names} if bounds is not None else None,
        active_bounds=active,
        converged=bool(best.success and best.fun < 1e30),
        iterations=total_iters,
        pinned=pin,
    )


def fit_fixed_qm(
    curve: BreakthroughCurve,
    qm: float,
    bounds_kt: tuple[float, float] | None = None,
    hfe_p: int = 2,
) -> FitResult:
    """One-dimensional Thomas fit with the capacity pinned.

    The HFE parameter count stays at 2 by default (the model still has two
    parameters, one supplied externally); pass hfe_p=1 to count only the free
    one.
    """
    if qm <= 0:
        raise ValueError(f"qm must be positive, got {qm}")
    bounds = {"kt": bounds_kt} if bounds_kt is not None else None
    return fit(curve, "thomas", bounds=bounds, pin={"qm": qm}, hfe_p=hfe_p)


# ---------------------------------------------------------------------------
# Thomas sensitivity analysis
# ---------------------------------------------------------------------------


def _logistic_weight(z):
    # exp(z)/(1+exp(z))^2, computed without overflow
    return expit(z) * expit(-z)


def sensitivity_kt(p: ThomasParams, cond: ExperimentConditions, t):
    """dY/dK_T = (C0*t - qm*CT) * exp(z)/(1+exp(z))^2, z the Thomas exponent.

    Zero exactly at the half-breakthrough time and changes sign there: a
    faster rate constant steepens the curve around t50.
    """
    t = np.asarray(t, dtype=float)
    z = models.thomas_exponent(p, cond, t)
    return (cond.c0 * t - p.qm * cond.ct) * _logistic_weight(z)


def sensitivity_qm(p: ThomasParams, cond: ExperimentConditions, t):
    """dY/dq_m = -K_T*CT * exp(z)/(1+exp(z))^2; nonpositive everywhere."""
    t = np.asarray(t, dtype=float)
    z = models.thomas_exponent(p, cond, t)
    return -p.kt * cond.ct * _logistic_weight(z)


@dataclass(frozen=True)
class SensitivityProfile:
    times: np.ndarray
    dy_dkt: np.ndarray
    dy_dqm: np.ndarray
    fd_check: float  # max relative deviation of analytic vs central differences


def _fd_relative(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / scale))


def sensitivity_profile(
    p: ThomasParams, cond: ExperimentConditions, times, rel_step: float = 1e-4
) -> SensitivityProfile:
    """Analytic sensitivities on a grid, cross-checked by central differences.

    The finite-difference comparison is restricted to the regime where the
    logistic weight has not saturated (|z| < ln(1e6)); outside it both sides
    are numerically zero and the ratio is meaningless.
    """
    times = np.asarray(times, dtype=float)
    dy_dkt = sensitivity_kt(p, cond, times)
    dy_dqm = sensitivity_qm(p, cond, times)

    z = models.thomas_exponent(p, cond, times)
    mask = np.abs(z) < np.log(1e6)

    d_kt = rel_step * p.kt
    fd_kt = (
        models.thomas_forward(ThomasParams(p.kt + d_kt, p.qm), cond, times)
        - models.thomas_forward(ThomasParams(p.kt - d_kt, p.qm), cond, times)
    ) / (2.0 * d_kt)
    d_qm = rel_step * p.qm
    fd_qm = (
        models.thomas_forward(ThomasParams(p.kt, p.qm + d_qm), cond, times)
        - models.thomas_forward(ThomasParams(p.kt, p.qm - d_qm), cond, times)
    ) / (2.0 * d_qm)

    fd_check = max(
        _fd_relative(dy_dkt[mask], fd_kt[mask]) if mask.any() else 0.0,
        _fd_relative(dy_dqm[mask], fd_qm[mask]) if mask.any() else 0.0,
    )
    return SensitivityProfile(times, dy_dkt, dy_dqm, fd_check)
