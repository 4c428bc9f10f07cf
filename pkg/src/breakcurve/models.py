# models.py
"""Forward evaluation of the four breakthrough models and closed-form times.

All forwards return the effluent ratio C/C0 in [0, 1] for times in hours and
canonical-unit conditions.  The Thomas and Yoon-Nelson models are the same
logistic under the mapping K_YN = K_T*C0, tau = q_m*CT/C0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .units import ExperimentConditions


@dataclass(frozen=True)
class ThomasParams:
    """kt in L/(g.hr); qm in g contaminant per L resin (volume basis)."""

    kt: float
    qm: float

    def __post_init__(self) -> None:
        if self.kt <= 0 or self.qm <= 0:
            raise ValueError(f"Thomas parameters must be positive: kt={self.kt}, qm={self.qm}")


@dataclass(frozen=True)
class YoonNelsonParams:
    """kyn in 1/hr; tau (half-breakthrough time) in hr."""

    kyn: float
    tau: float

    def __post_init__(self) -> None:
        if self.kyn <= 0 or self.tau <= 0:
            raise ValueError(f"Yoon-Nelson parameters must be positive: kyn={self.kyn}, tau={self.tau}")


@dataclass(frozen=True)
class ClarkParams:
    """a dimensionless amplitude; r in 1/hr; n > 1 Freundlich exponent."""

    a: float
    r: float
    n: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.r <= 0:
            raise ValueError(f"Clark a and r must be positive: a={self.a}, r={self.r}")
        if self.n <= 1:
            raise ValueError(f"Clark exponent n must exceed 1, got {self.n}")


@dataclass(frozen=True)
class WolborskaParams:
    """beta_a in 1/hr (kinetic coefficient); n0 in g/L (bed capacity)."""

    beta_a: float
    n0: float

    def __post_init__(self) -> None:
        if self.beta_a <= 0 or self.n0 <= 0:
            raise ValueError(
                f"Wolborska parameters must be positive: beta_a={self.beta_a}, n0={self.n0}"
            )


def thomas_exponent(p: ThomasParams, cond: ExperimentConditions, t, basis: str = "volume"):
    """The logistic exponent K_T*q_m*CT - K_T*C0*t (dimensionless).

    basis="mass" substitutes M/Q for V/Q, for capacities expressed per unit
    resin mass; requires conditions.resin_mass.
    """
    if basis == "volume":
        contact = cond.ct
    elif basis == "mass":
        if cond.resin_mass is None:
            raise ValueError("mass basis requires resin_mass in conditions")
        contact = cond.resin_mass / cond.q
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return p.kt * p.qm * contact - p.kt * cond.c0 * np.asarray(t, dtype=float)


def thomas_forward(p: ThomasParams, cond: ExperimentConditions, t, basis: str = "volume"):
    """Effluent ratio 1 / (exp(K_T*q_m*CT - K_T*C0*t) + 1).

    Saturates exactly to 0/1 once the exponent leaves the floating range, so
    extreme parameters never overflow.  Accepts scalar or array t.
    """
    return expit(-thomas_exponent(p, cond, t, basis))


def yoon_nelson_forward(p: YoonNelsonParams, t):
    """Logistic ratio exp(kyn*(t - tau)) / (1 + exp(kyn*(t - tau)))."""
    return expit(p.kyn * (np.asarray(t, dtype=float) - p.tau))


def clark_forward(p: ClarkParams, t):
    """Ratio (1 + a*exp(-r*t))^(-1/(n-1))."""
    return (1.0 + p.a * np.exp(-p.r * np.asarray(t, dtype=float))) ** (-1.0 / (p.n - 1.0))


def wolborska_forward(p: WolborskaParams, cond: ExperimentConditions, t):
    """Low-concentration approximation exp((beta_a*C0/N0)*t - beta_a*Z/U0).

    Z/U0 (cm over cm/min) is converted from minutes to hours so the exponent
    is dimensionless with beta_a in 1/hr.  The output is clamped at 1: the
    model is only meaningful in the low-ratio regime and its exponential grows
    without bound.
    """
    if cond.z is None:
        raise ValueError("Wolborska model requires bed depth z in conditions")
    if cond.u0 is None:
        raise ValueError("Wolborska model requires linear velocity u0 in conditions")
    lag_hr = (cond.z / cond.u0) / 60.0
    exponent = (p.beta_a * cond.c0 / p.n0) * np.asarray(t, dtype=float) - p.beta_a * lag_hr
    return np.exp(np.minimum(exponent, 0.0))


class LinearizedCurve(NamedTuple):
    times: np.ndarray
    transformed: np.ndarray  # ln(C0/C - 1)
    n_excluded: int


def thomas_linearized(curve) -> LinearizedCurve:
    """Transform a curve to (t, ln(C0/C - 1)) for linear least squares.

    Points at ratio exactly 0 or 1 are excluded (the log is undefined) and
    counted.  Slope of the line is -K_T*C0; intercept is K_T*q_m*CT.
    """
    t = np.asarray(curve.times, dtype=float)
    y = np.asarray(curve.ratios, dtype=float)
    usable = (y > 0.0) & (y < 1.0)
    n_excluded = int((~usable).sum())
    if usable.sum() < 2:
        raise ValueError("no linearizable points (need at least 2 with 0 < ratio < 1)")
    return LinearizedCurve(t[usable], np.log(1.0 / y[usable] - 1.0), n_excluded)


class BreakthroughTime(NamedTuple):
    time_hr: float
    already_past: bool  # model starts above the target at t = 0


def breakthrough_time(
    p: ThomasParams, cond: ExperimentConditions, target_ratio: float
) -> BreakthroughTime:
    """Closed-form time at which the Thomas curve reaches a target ratio.

    t = (q_m*CT - ln(1/target - 1)/K_T) / C0; at target 0.5 this is the
    half-breakthrough time t50 = q_m*CT/C0.  A negative result means the
    modeled bed is already past the target at t = 0 and is flagged, not
    raised.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ValueError(f"target ratio must be in (0, 1), got {target_ratio}")
    t = (p.qm * cond.ct - math.log(1.0 / target_ratio - 1.0) / p.kt) / cond.c0
    return BreakthroughTime(t, t < 0.0)
