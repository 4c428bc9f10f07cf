import json

import numpy as np
import pytest

from breakcurve import refdata
from breakcurve.cli import main
from breakcurve.files import write_csv
from breakcurve.models import ThomasParams, thomas_forward
from breakcurve.units import ExperimentConditions


def bundled(name):
    return str(refdata.bundled_path(name))


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def exp1_args():
    return [
        "--curve", bundled("exp1.synthetic.csv"),
        "--conditions", bundled("exp1.conditions.json"),
    ]


class TestFitCommand:
    def test_recovers_reference_parameters(self, tmp_path, exp1_args):
        assert run(["fit", *exp1_args, "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "exp1.synthetic.fit.json").read_text())
        assert doc["params"]["kt_l_per_g_hr"] == pytest.approx(502.0, rel=1e-3)
        assert doc["params"]["qm_g_per_l"] == pytest.approx(0.3828, rel=1e-3)
        assert doc["converged"] is True

    def test_writes_manifest_last_and_complete(self, tmp_path, exp1_args):
        run(["fit", *exp1_args, "--out", tmp_path])
        manifest = json.loads((tmp_path / "exp1.synthetic.manifest.json").read_text())
        assert manifest["command"] == "fit"
        for out in manifest["outputs"]:
            assert (tmp_path / out.split("/")[-1]).stat().st_size > 0

    def test_byte_identical_reruns(self, tmp_path, exp1_args):
        run(["fit", *exp1_args, "--out", tmp_path / "a"])
        run(["fit", *exp1_args, "--out", tmp_path / "b"])
        for name in ("exp1.synthetic.fit.json", "exp1.synthetic.curve.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_curve_csv_reevaluates_under_persisted_params(self, tmp_path, exp1_args):
        run(["fit", *exp1_args, "--out", tmp_path])
        doc = json.loads((tmp_path / "exp1.synthetic.fit.json").read_text())
        p = ThomasParams(doc["params"]["kt_l_per_g_hr"], doc["params"]["qm_g_per_l"])
        cond = refdata.experiment_conditions(1)
        for line in (tmp_path / "exp1.synthetic.curve.csv").read_text().splitlines()[1:]:
            t, ratio, kind = line.split(",")
            if kind == "model":
                assert f"{float(thomas_forward(p, cond, float(t))):.10g}" == ratio

    def test_pin_n_clark(self, tmp_path, exp1_args):
        assert run(["fit", *exp1_args, "--model", "clark", "--pin-n", "2", "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "exp1.synthetic.fit.json").read_text())
        assert doc["pinned"] == {"n": 2.0}
        assert set(doc["params"]) == {"a", "r_per_hr"}

    def test_pin_qm_thomas(self, tmp_path, exp1_args):
        assert run(["fit", *exp1_args, "--pin-qm", "0.254", "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "exp1.synthetic.fit.json").read_text())
        assert doc["pinned"] == {"qm_g_per_l": 0.254}

    def test_bounds_flags_mark_active(self, tmp_path):
        curve4 = bundled("exp4.synthetic.csv")
        cond4 = bundled("exp4.conditions.json")
        assert run([
            "fit", "--curve", curve4, "--conditions", cond4,
            "--init", "502,0.3828", "--bounds-pct", "30", "--out", tmp_path,
        ]) == 0
        doc = json.loads((tmp_path / "exp4.synthetic.fit.json").read_text())
        assert any(doc["active_bounds"].values())

    def test_missing_conditions_file_exit_2(self, tmp_path, exp1_args):
        code = run(["fit", "--curve", exp1_args[1], "--conditions", tmp_path / "nope.json", "--out", tmp_path])
        assert code == 2

    def test_unparseable_curve_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t_hr,ratio\n10,0.2\n5,0.3\n20,0.4\n")
        assert run(["fit", "--curve", bad, "--conditions", bundled("exp1.conditions.json"), "--out", tmp_path]) == 2


class TestCompareCommand:
    def test_thomas_wins_tiebreak_on_synthetic_thomas_data(self, tmp_path, exp1_args):
        assert run(["compare", *exp1_args, "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "exp1.synthetic.compare.json").read_text())
        assert doc["best_model"] in ("thomas", "yoon-nelson")
        assert doc["best_model"] == "thomas"  # declared tiebreak order

    def test_best_rsse_is_minimal(self, tmp_path, exp1_args):
        run(["compare", *exp1_args, "--out", tmp_path])
        doc = json.loads((tmp_path / "exp1.synthetic.compare.json").read_text())
        fitted = [m for m in doc["models"] if not m.get("failed")]
        best = next(m for m in fitted if m["model"] == doc["best_model"])
        for m in fitted:
            assert best["stats"]["rsse"] <= m["stats"]["rsse"] + 1e-10

    def test_envelope_brackets_nominal(self, tmp_path, exp1_args):
        run(["compare", *exp1_args, "--out", tmp_path])
        rows = (tmp_path / "exp1.synthetic.envelope.csv").read_text().splitlines()[1:]
        for row in rows:
            _, ratio, lower, upper = map(float, row.split(","))
            assert lower - 1e-12 <= ratio <= upper + 1e-12

    def test_low_ratio_data_flags_wolborska_regime(self, tmp_path):
        # generate data from the low-concentration model itself, clipped low
        cond = ExperimentConditions(
            c0=1.473e-5, q=0.85, v=0.0106, ct=0.0125, u0=8.0, z=6.0, resin_id="A600E"
        )
        from breakcurve.models import WolborskaParams, wolborska_forward

        p = WolborskaParams(240.0, 0.5)
        t = np.linspace(0.0, 150.0, 25)
        y = np.asarray(wolborska_forward(p, cond, t))
        assert y.max() < 0.2
        curve_path = tmp_path / "low.csv"
        write_csv(curve_path, ["t_hr", "ratio"], [[float(a), float(b)] for a, b in zip(t, y)])
        cond_path = tmp_path / "low.conditions.json"
        cond_path.write_text(json.dumps({
            "resin_id": "A600E", "c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6,
            "ct_min": 0.75, "u0_cm_per_min": 8.0, "z_cm": 6.0,
        }))
        assert run(["compare", "--curve", curve_path, "--conditions", cond_path, "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "low.compare.json").read_text())
        wol = next(m for m in doc["models"] if m.get("model") == "wolborska")
        assert "low-concentration regime" in wol["note"]
        assert wol["stats"]["rsse"] == pytest.approx(0.0, abs=1e-8)

    def test_empty_curve_exit_2(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert run(["compare", "--curve", empty, "--conditions", bundled("exp1.conditions.json"), "--out", tmp_path]) == 2


@pytest.fixture(scope="module")
def fit_files(tmp_path_factory):
    """Thomas fit.json files for experiments 1, 3, 4, 5 from bundled curves."""
    out = tmp_path_factory.mktemp("fits")
    paths = []
    for n in (1, 3, 4, 5):
        run([
            "fit", "--curve", bundled(f"exp{n}.synthetic.csv"),
            "--conditions", bundled(f"exp{n}.conditions.json"), "--out", out,
        ])
        paths.append(out / f"exp{n}.synthetic.fit.json")
    return paths


class TestCorrelateCommand:
    def test_builds_plane_model(self, tmp_path, fit_files):
        assert run(["correlate", *fit_files, "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "a600e.correlation.json").read_text())
        assert doc["resin_id"] == "A600E"
        assert doc["qm_fixed_g_per_l"] == pytest.approx(0.2539, abs=1e-3)
        assert len(doc["sources"]) == 4
        assert "published_reference" in doc
        assert doc["published_reference"]["c"] == 1247.0

    def test_coplanar_synthetic_fits_recover_published_plane(self, tmp_path):
        # four fits whose stored rate constants lie exactly on the published
        # plane: the refit must reproduce its coefficients
        a, b, c = -264.0, 10.45, 1247.0
        paths = []
        for i, (ct, c0) in enumerate([(0.5, 14.73), (0.75, 14.73), (0.5, 44.47), (0.75, 44.47)]):
            kt = a * ct + b * c0 + c
            doc = {
                "model": "thomas",
                "resin_id": "A600E",
                "conditions": {"resin_id": "A600E", "c0_ppb": c0, "q_l_per_hr": 0.85,
                               "v_ml": 0.85 * ct / 60 * 1000, "ct_min": ct},
                "params": {"kt_l_per_g_hr": kt},
                "pinned": {"qm_g_per_l": 0.254},
                "stats": {"rsse": 0.0, "hfe_pct": 0.0, "r_squared": 1.0,
                          "n_points_used": 30, "excluded_points": 0},
                "bounds": None, "active_bounds": {}, "converged": True, "iterations": 1,
            }
            p = tmp_path / f"plane{i}.fit.json"
            p.write_text(json.dumps(doc))
            paths.append(p)
        assert run(["correlate", *paths, "--out", tmp_path]) == 0
        out = json.loads((tmp_path / "a600e.correlation.json").read_text())
        assert out["a_per_min"] == pytest.approx(a, rel=1e-9)
        assert out["b_per_ppb"] == pytest.approx(b, rel=1e-9)
        assert out["c"] == pytest.approx(c, rel=1e-9)

    def test_mixed_resins_exit_4(self, tmp_path, fit_files):
        doc = json.loads(fit_files[0].read_text())
        doc["conditions"]["resin_id"] = "A520E"
        doc["resin_id"] = "A520E"
        alien = tmp_path / "alien.fit.json"
        alien.write_text(json.dumps(doc))
        assert run(["correlate", fit_files[1], alien, tmp_path / "x", "--out", tmp_path]) in (2, 4)
        assert run(["correlate", fit_files[1], fit_files[2], alien, "--out", tmp_path]) == 4

    def test_single_fit_exit_5(self, tmp_path, fit_files):
        assert run(["correlate", fit_files[0], "--out", tmp_path]) == 5

    def test_line_ct_mode(self, tmp_path, fit_files):
        # experiments 1 and 3 share C0; a plane would be degenerate in C0
        assert run(["correlate", fit_files[0], fit_files[1], "--line-ct", "--out", tmp_path]) == 0
        doc = json.loads((tmp_path / "a600e.correlation.json").read_text())
        assert doc["b_per_ppb"] == 0.0

    def test_degenerate_axis_named(self, tmp_path, fit_files):
        assert run(["correlate", fit_files[0], fit_files[1], "--out", tmp_path]) == 5


class TestPredictCommand:
    def test_experiment_6_report(self, tmp_path):
        assert run([
            "predict", "--correlation", bundled("a600e.correlation.json"),
            "--conditions", bundled("exp6.conditions.json"), "--out", tmp_path,
        ]) == 0
        doc = json.loads((tmp_path / "exp6.conditions.predict.json").read_text())
        assert doc["kt_l_per_g_hr"] == pytest.approx(1264.8, abs=0.05)
        assert doc["t50_hr"] == pytest.approx(153.75, abs=0.01)
        assert doc["limit_ratio"] == pytest.approx(0.4843, abs=1e-4)
        # time-to-limit must invert the forward curve at the limit ratio
        p = ThomasParams(doc["kt_l_per_g_hr"], doc["qm_g_per_l"])
        cond = refdata.experiment_conditions(6)
        assert thomas_forward(p, cond, doc["time_to_limit_hr"]) == pytest.approx(
            doc["limit_ratio"], abs=1e-6
        )

    def test_measured_curve_scoring(self, tmp_path):
        cond = refdata.experiment_conditions(6)
        truth = ThomasParams(1264.8, 0.254)
        t = np.linspace(0.0, 300.0, 25)
        y = np.asarray(thomas_forward(truth, cond, t))
        measured = tmp_path / "measured.csv"
        write_csv(measured, ["t_hr", "ratio"], [[float(a), float(b)] for a, b in zip(t, y)])
        assert run([
            "predict", "--correlation", bundled("a600e.correlation.json"),
            "--conditions", bundled("exp6.conditions.json"),
            "--measured", measured, "--out", tmp_path,
        ]) == 0
        doc = json.loads((tmp_path / "exp6.conditions.predict.json").read_text())
        assert doc["hfe_vs_measured_pct"] == pytest.approx(0.0, abs=1e-6)

    def test_inlet_below_limit_exit_2(self, tmp_path, capsys):
        cond_path = tmp_path / "weak.json"
        cond_path.write_text(json.dumps({
            "resin_id": "A600E", "c0_ppb": 5.0, "q_l_per_hr": 40.8, "v_ml": 510.0, "ct_min": 0.75,
        }))
        code = run([
            "predict", "--correlation", bundled("a600e.correlation.json"),
            "--conditions", cond_path, "--limit-ppb", "10", "--out", tmp_path,
        ])
        assert code == 2
        assert "inlet already below limit" in capsys.readouterr().err

    def test_extrapolation_exit_6(self, tmp_path):
        cond_path = tmp_path / "far.json"
        # 10 minute contact time pushes the correlated rate constant negative
        cond_path.write_text(json.dumps({
            "resin_id": "A600E", "c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 141.7,
        }))
        with pytest.warns(UserWarning, match="hull"):
            code = run([
                "predict", "--correlation", bundled("a600e.correlation.json"),
                "--conditions", cond_path, "--out", tmp_path,
            ])
        assert code == 6


class TestSensitivityCommand:
    def test_profile_columns_and_signs(self, tmp_path, exp1_args):
        run(["fit", *exp1_args, "--out", tmp_path])
        assert run(["sensitivity", "--fit", tmp_path / "exp1.synthetic.fit.json", "--out", tmp_path]) == 0
        lines = (tmp_path / "exp1.synthetic.sensitivity.csv").read_text().splitlines()
        assert lines[0].split(",") == [
            "t_hr", "dy_dkt", "dy_dqm", "ratio",
            "ratio_kt_minus5", "ratio_kt_plus5", "ratio_qm_minus5", "ratio_qm_plus5",
        ]
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        t, dy_dkt, dy_dqm = rows[:, 0], rows[:, 1], rows[:, 2]
        assert np.all(dy_dqm <= 0)
        # single sign change at t50 = 324.85 hr
        crossings = np.nonzero(np.diff(np.sign(dy_dkt[dy_dkt != 0])))[0]
        assert len(crossings) == 1
        assert abs(t[crossings[0]] - 324.85) < (t[1] - t[0]) * 2
        # the +-5% envelopes bracket the nominal curve pointwise
        assert np.all(np.minimum(rows[:, 4], rows[:, 5]) <= rows[:, 3] + 1e-12)
        assert np.all(rows[:, 3] <= np.maximum(rows[:, 4], rows[:, 5]) + 1e-12)

    def test_non_thomas_fit_exit_4(self, tmp_path, exp1_args):
        run(["fit", *exp1_args, "--model", "yoon-nelson", "--out", tmp_path])
        assert run(["sensitivity", "--fit", tmp_path / "exp1.synthetic.fit.json", "--out", tmp_path]) == 4


def test_data_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BREAKCURVE_DATA", str(tmp_path))
    with pytest.raises(FileNotFoundError):
        refdata.bundled_path("exp1.conditions.json")
    monkeypatch.delenv("BREAKCURVE_DATA")
    assert refdata.bundled_path("exp1.conditions.json").exists()
