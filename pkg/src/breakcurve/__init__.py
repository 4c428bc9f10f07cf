"""breakcurve: fixed-bed ion-exchange breakthrough curve modeling.

Forward models (Thomas, Yoon-Nelson, Clark, Wolborska), relative-error
parameter fitting with box constraints, Thomas sensitivity analysis, and a
predictive correlation of the rate constant against contact time and inlet
concentration.
"""

__version__ = "0.1.0"

from .correlation import (
    CorrelationModel,
    average_qm,
    fit_line,
    fit_plane,
    predict_curve,
    predict_kt,
)
from .estimation import (
    FitResult,
    SensitivityProfile,
    fit,
    fit_fixed_qm,
    hfe,
    r_squared,
    rsse,
    sensitivity_kt,
    sensitivity_profile,
    sensitivity_qm,
)
from .models import (
    BreakthroughTime,
    ClarkParams,
    ThomasParams,
    WolborskaParams,
    YoonNelsonParams,
    breakthrough_time,
    clark_forward,
    thomas_forward,
    thomas_linearized,
    wolborska_forward,
    yoon_nelson_forward,
)
from .units import (
    BreakthroughCurve,
    ExperimentConditions,
    breakthrough_ratio,
    ingest_curve,
    to_canonical,
)

__all__ = [
    "BreakthroughCurve",
    "BreakthroughTime",
    "ClarkParams",
    "CorrelationModel",
    "ExperimentConditions",
    "FitResult",
    "SensitivityProfile",
    "ThomasParams",
    "WolborskaParams",
    "YoonNelsonParams",
    "average_qm",
    "breakthrough_ratio",
    "breakthrough_time",
    "clark_forward",
    "fit",
    "fit_fixed_qm",
    "fit_line",
    "fit_plane",
    "hfe",
    "ingest_curve",
    "predict_curve",
    "predict_kt",
    "r_squared",
    "rsse",
    "sensitivity_kt",
    "sensitivity_profile",
    "sensitivity_qm",
    "thomas_forward",
    "thomas_linearized",
    "to_canonical",
    "wolborska_forward",
    "yoon_nelson_forward",
]
