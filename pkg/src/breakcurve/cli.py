# cli.py
"""breakcurve command line: fit | compare | correlate | predict | sensitivity.

Exit codes are stable API: 0 ok, 2 parse/input error, 3 objective undefined,
4 model or resin mismatch, 5 degenerate regression design, 6 correlation
extrapolation.  All result files are deterministic (fixed field order, floats
at 10 significant digits); the per-run manifest carries the only timestamp
and is written last as the completion marker.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, correlation, estimation, models, refdata
from .errors import (
    DegenerateDesignError,
    ExtrapolationError,
    ModelMismatchError,
    ObjectiveUndefinedError,
    ParseError,
)
from .files import (
    PARAM_KEYS,
    conditions_to_dict,
    dump_json,
    fit_result_from_dict,
    fit_result_to_dict,
    load_conditions,
    load_json,
    write_csv,
)
from .models import ThomasParams
from .units import BreakthroughCurve, ExperimentConditions, breakthrough_ratio, ingest_curve

_EXIT_CODES = [
    (ParseError, 2),
    (OSError, 2),
    (ValueError, 2),
    (ObjectiveUndefinedError, 3),
    (ModelMismatchError, 4),
    (DegenerateDesignError, 5),
    (ExtrapolationError, 6),
]

N_SAMPLES = 200


def _q10(x: float) -> float:
    # the persisted-file float policy; sampling uses the same quantized values
    # so written curves re-evaluate exactly against the written parameters
    return float(f"{x:.10g}")


def _forward(model: str, params: dict[str, float], cond: ExperimentConditions, times):
    if model == "thomas":
        return models.thomas_forward(ThomasParams(params["kt"], params["qm"]), cond, times)
    if model == "yoon-nelson":
        return models.yoon_nelson_forward(models.YoonNelsonParams(params["kyn"], params["tau"]), times)
    if model == "clark":
        return models.clark_forward(models.ClarkParams(params["a"], params["r"], params["n"]), times)
    if model == "wolborska":
        return models.wolborska_forward(models.WolborskaParams(params["beta_a"], params["n0"]), cond, times)
    raise ModelMismatchError(f"unknown model {model!r}")


def _sample_grid(t_max: float) -> np.ndarray:
    return np.array([_q10(t) for t in np.linspace(0.0, t_max, N_SAMPLES)])


def _write_curve_csv(path: Path, model: str, params: dict, cond, curve: BreakthroughCurve | None, t_max: float) -> None:
    """Model curve at 200 sampled times, with the data rows tagged alongside."""
    qparams = {k: _q10(v) for k, v in params.items()}
    times = _sample_grid(t_max)
    ratios = np.atleast_1d(_forward(model, qparams, cond, times))
    rows = [[float(t), float(r), "model"] for t, r in zip(times, ratios)]
    if curve is not None:
        rows += [[float(t), float(y), "data"] for t, y in zip(curve.times, curve.ratios)]
    write_csv(path, ["t_hr", "ratio", "kind"], rows)


def _write_manifest(out: Path, stem: str, command: str, inputs: list[str], options: dict, outputs: list[Path]) -> None:
    for path in outputs:
        if not (path.exists() and path.stat().st_size > 0):
            raise RuntimeError(f"output {path} missing or empty")
    dump_json(
        out / f"{stem}.manifest.json",
        {
            "command": command,
            "inputs": [str(p) for p in inputs],
            "options": {k: v for k, v in sorted(options.items())},
            "outputs": [str(p) for p in outputs],
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "tool_version": __version__,
        },
    )


def _parse_init(text: str, names: list[str]) -> dict[str, float]:
    parts = text.split(",")
    if len(parts) != len(names):
        raise ParseError(f"--init expects {len(names)} comma-separated values for {names}")
    try:
        return {n: float(v) for n, v in zip(names, parts)}
    except ValueError as exc:
        raise ParseError(f"--init: {exc}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    cond = load_conditions(args.conditions)
    curve = ingest_curve(args.curve, cond)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.curve).stem

    pin: dict[str, float] = {}
    if args.pin_qm is not None:
        if args.model != "thomas":
            raise ModelMismatchError("--pin-qm applies to the thomas model only")
        pin["qm"] = args.pin_qm
    if args.pin_n is not None:
        if args.model != "clark":
            raise ModelMismatchError("--pin-n applies to the clark model only")
        pin["n"] = args.pin_n

    free_names = [n for n in PARAM_KEYS[args.model] if n not in pin]
    init = _parse_init(args.init, free_names) if args.init else None
    bounds = None
    if args.bounds_pct is not None:
        if init is None:
            raise ParseError("--bounds-pct requires --init to center the box")
        frac = args.bounds_pct / 100.0
        bounds = {n: (v * (1 - frac), v * (1 + frac)) for n, v in init.items()}

    result = estimation.fit(curve, args.model, init=init, bounds=bounds, pin=pin)

    fit_path = out / f"{stem}.fit.json"
    curve_path = out / f"{stem}.curve.csv"
    dump_json(fit_path, fit_result_to_dict(result, cond, curve_file=args.curve))
    _write_curve_csv(
        curve_path, args.model, {**result.params, **result.pinned}, cond, curve, 1.2 * curve.times[-1]
    )
    _write_manifest(out, stem, "fit", [args.curve, args.conditions], _options(args), [fit_path, curve_path])
    return 0


def _options(args) -> dict:
    skip = {"func", "curve", "conditions", "out", "fits", "correlation", "fit", "measured"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def _round_sig(x: float, digits: int = 8) -> float:
    # values at numerical-noise level count as exact ties
    if abs(x) < 1e-10:
        return 0.0
    return float(f"{x:.{digits}g}")


def cmd_compare(args) -> int:
    cond = load_conditions(args.conditions)
    curve = ingest_curve(args.curve, cond)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.curve).stem

    entries = []
    results: dict[str, estimation.FitResult] = {}
    for model in estimation.MODEL_ORDER:
        try:
            res = estimation.fit(curve, model)
        except (ModelMismatchError, ObjectiveUndefinedError) as exc:
            entries.append({"model": model, "failed": True, "reason": str(exc)})
            continue
        results[model] = res
        entry = fit_result_to_dict(res, cond)
        del entry["conditions"]
        if model == "wolborska" and max(curve.ratios) <= 0.2:
            entry["note"] = "low-concentration regime: data stays in the model's validity range"
        elif model == "wolborska":
            entry["note"] = "validity limited to low effluent ratios"
        entries.append(entry)

    ranked = sorted(
        (m for m in results if results[m].converged),
        key=lambda m: (
            _round_sig(results[m].rsse),
            _round_sig(results[m].hfe) if results[m].hfe is not None else float("inf"),
            estimation.MODEL_ORDER.index(m),
        ),
    )
    if not ranked:
        raise ObjectiveUndefinedError("no model converged on this curve")
    best = ranked[0]

    # +-5% band: pointwise min/max over the winner's curves with each
    # parameter perturbed 5% up and down in turn
    best_params = {**results[best].params, **results[best].pinned}
    times = _sample_grid(1.2 * curve.times[-1])
    variants = [np.atleast_1d(_forward(best, best_params, cond, times))]
    for name in results[best].params:
        for factor in (0.95, 1.05):
            perturbed = dict(best_params)
            perturbed[name] = best_params[name] * factor
            variants.append(np.atleast_1d(_forward(best, perturbed, cond, times)))
    stacked = np.vstack(variants)
    envelope_path = out / f"{stem}.envelope.csv"
    write_csv(
        envelope_path,
        ["t_hr", "ratio", "lower", "upper"],
        [
            [float(t), _q10(float(stacked[0, i])), _q10(float(stacked[1:, i].min())), _q10(float(stacked[1:, i].max()))]
            for i, t in enumerate(times)
        ],
    )

    report_path = out / f"{stem}.compare.json"
    dump_json(
        report_path,
        {
            "band_construction": "pointwise min/max over the best model's curves with each parameter perturbed +-5%",
            "best_model": best,
            "ranking": ranked,
            "models": entries,
            "conditions": conditions_to_dict(cond),
            "envelope_file": envelope_path.name,
        },
    )
    _write_manifest(out, stem, "compare", [args.curve, args.conditions], _options(args), [report_path, envelope_path])
    return 0


def cmd_correlate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fits = []
    for path in args.fits:
        fit, cond = fit_result_from_dict(load_json(path))
        if fit.model != "thomas":
            raise ModelMismatchError(f"{path}: correlate needs thomas fits, got {fit.model!r}")
        fits.append((path, fit, cond, load_json(path).get("curve_file")))

    resins = {cond.resin_id for _, _, cond, _ in fits}
    if len(resins) > 1:
        raise ModelMismatchError(f"mixed resins in inputs: {sorted(resins)}")
    resin = resins.pop()

    qm_fixed = correlation.average_qm([f for _, f, _, _ in fits])

    triples = []
    for path, fit, cond, curve_file in fits:
        if curve_file and Path(curve_file).exists():
            refit = estimation.fit_fixed_qm(ingest_curve(curve_file, cond), qm_fixed)
            kt = refit.params["kt"]
        else:
            kt = {**fit.params, **fit.pinned}["kt"]
        triples.append((cond.ct_min, cond.c0_ppb, kt))

    if args.line_ct or args.line_c0:
        which = "ct" if args.line_ct else "c0"
        x_index = 0 if args.line_ct else 1
        slope, intercept = correlation.fit_line([(t[x_index], t[2]) for t in triples], which)
        a, b = (slope, 0.0) if args.line_ct else (0.0, slope)
        c = intercept
    else:
        a, b, c = correlation.fit_plane(triples)

    model = correlation.CorrelationModel(qm_fixed, a, b, c, resin, tuple(triples))
    doc = correlation.model_to_dict(model)

    published = {"A600E": refdata.A600E_CORRELATION, "A520E": refdata.A520E_CORRELATION}.get(resin)
    if published is not None:
        doc["published_reference"] = {
            "qm_fixed_g_per_l": published.qm_fixed,
            "a_per_min": published.a,
            "b_per_ppb": published.b,
            "c": published.c,
            "note": (
                "reported reference constants for this resin; they are not an exact "
                "least-squares fit of the tabulated rate constants, so the refit above "
                "may legitimately differ"
            ),
        }

    model_path = out / f"{resin.lower() or 'correlation'}.correlation.json"
    dump_json(model_path, doc)
    _write_manifest(out, model_path.stem, "correlate", list(args.fits), _options(args), [model_path])
    return 0


def cmd_predict(args) -> int:
    m = correlation.model_from_dict(load_json(args.correlation))
    cond = load_conditions(args.conditions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.conditions).stem

    kt = correlation.predict_kt(m, cond.ct_min, cond.c0_ppb)
    params = ThomasParams(kt, m.qm_fixed)
    t50 = models.breakthrough_time(params, cond, 0.5)
    t10 = models.breakthrough_time(params, cond, 0.1)
    limit_ratio = breakthrough_ratio(args.limit_ppb, cond.c0_ppb)
    t_limit = models.breakthrough_time(params, cond, limit_ratio)

    curve_path = out / f"{stem}.curve.csv"
    measured = ingest_curve(args.measured, cond) if args.measured else None
    _write_curve_csv(curve_path, "thomas", {"kt": kt, "qm": m.qm_fixed}, cond, measured, 2.0 * t50.time_hr)

    doc = {
        "resin_id": m.resin_id,
        "conditions": conditions_to_dict(cond),
        "kt_l_per_g_hr": kt,
        "qm_g_per_l": m.qm_fixed,
        "t50_hr": t50.time_hr,
        "t10_hr": t10.time_hr,
        "limit_ppb": args.limit_ppb,
        "limit_ratio": limit_ratio,
        "time_to_limit_hr": t_limit.time_hr,
        "already_past_limit_at_t0": t_limit.already_past,
        "curve_file": curve_path.name,
    }
    if measured is not None:
        calc = models.thomas_forward(params, cond, np.asarray(measured.times))
        doc["hfe_vs_measured_pct"] = estimation.hfe(calc, measured.ratios, p=2)
        doc["rsse_vs_measured"] = estimation.rsse(calc, measured.ratios)

    report_path = out / f"{stem}.predict.json"
    dump_json(report_path, doc)
    inputs = [args.correlation, args.conditions] + ([args.measured] if args.measured else [])
    _write_manifest(out, stem, "predict", inputs, _options(args), [report_path, curve_path])
    return 0


def cmd_sensitivity(args) -> int:
    fit, embedded_cond = fit_result_from_dict(load_json(args.fit))
    cond = load_conditions(args.conditions) if args.conditions else embedded_cond
    params = fit.thomas_params()  # raises ModelMismatchError for non-thomas fits
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.fit).stem.removesuffix(".fit")

    t50 = params.qm * cond.ct / cond.c0
    t_max = args.t_max if args.t_max is not None else 2.0 * t50
    times = np.linspace(0.0, t_max, args.points)
    profile = estimation.sensitivity_profile(params, cond, times)

    envelopes = {}
    for tag, p in {
        "ratio": params,
        "ratio_kt_minus5": ThomasParams(0.95 * params.kt, params.qm),
        "ratio_kt_plus5": ThomasParams(1.05 * params.kt, params.qm),
        "ratio_qm_minus5": ThomasParams(params.kt, 0.95 * params.qm),
        "ratio_qm_plus5": ThomasParams(params.kt, 1.05 * params.qm),
    }.items():
        envelopes[tag] = np.atleast_1d(models.thomas_forward(p, cond, times))

    csv_path = out / f"{stem}.sensitivity.csv"
    header = ["t_hr", "dy_dkt", "dy_dqm", *envelopes.keys()]
    rows = [
        [float(times[i]), float(profile.dy_dkt[i]), float(profile.dy_dqm[i])]
        + [float(env[i]) for env in envelopes.values()]
        for i in range(len(times))
    ]
    write_csv(csv_path, header, rows)
    inputs = [args.fit] + ([args.conditions] if args.conditions else [])
    _write_manifest(out, stem, "sensitivity", inputs, _options(args), [csv_path])
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breakcurve",
        description="Fixed-bed breakthrough curve modeling, fitting, and prediction",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model to a breakthrough curve")
    p.add_argument("--curve", required=True, help="curve CSV (t_hr,ratio or t_hr,c_ppb)")
    p.add_argument("--conditions", required=True, help="conditions JSON")
    p.add_argument("--model", default="thomas", choices=list(estimation.MODEL_ORDER))
    p.add_argument("--init", help="comma-separated initial values for the free parameters")
    p.add_argument("--bounds-pct", type=float, help="box half-width in percent around --init")
    p.add_argument("--pin-qm", type=float, help="fix the Thomas capacity (g/L), fit only kt")
    p.add_argument("--pin-n", type=float, help="fix the Clark exponent")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="fit all four models and rank them")
    p.add_argument("--curve", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("correlate", help="build a rate-constant correlation from fits")
    p.add_argument("fits", nargs="+", help="fit JSON files (thomas, same resin)")
    p.add_argument("--line-ct", action="store_true", help="single-variable line in contact time")
    p.add_argument("--line-c0", action="store_true", help="single-variable line in inlet concentration")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("predict", help="forecast breakthrough at new conditions")
    p.add_argument("--correlation", required=True, help="correlation model JSON")
    p.add_argument("--conditions", required=True)
    p.add_argument("--limit-ppb", type=float, default=refdata.REGULATORY_LIMIT_PPB)
    p.add_argument("--measured", help="optional measured curve CSV to score the prediction")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sensitivity", help="parameter sensitivity profile of a thomas fit")
    p.add_argument("--fit", required=True, help="fit JSON (thomas)")
    p.add_argument("--conditions", help="conditions JSON (default: embedded in the fit)")
    p.add_argument("--t-max", type=float, help="grid end in hours (default 2*t50)")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sensitivity)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tuple(exc for exc, _ in _EXIT_CODES) as exc:
        for exc_type, code in _EXIT_CODES:
            if isinstance(exc, exc_type):
                print(f"breakcurve: {exc}", file=sys.stderr)
                return code
        raise  # unreachable


if __name__ == "__main__":
    sys.exit(main())
