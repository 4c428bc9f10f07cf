import io

import pytest

from breakcurve.errors import ParseError
from breakcurve.units import (
    BreakthroughCurve,
    breakthrough_ratio,
    g_per_l_to_ppb,
    ingest_curve,
    ppb_to_g_per_l,
    to_canonical,
)
from breakcurve import refdata


def test_ppb_conversion():
    assert ppb_to_g_per_l(14.73) == pytest.approx(1.473e-5, rel=1e-12)


def test_ppb_round_trip():
    for x in (14.73, 44.47, 20.65, 1e-3, 1e6):
        assert g_per_l_to_ppb(ppb_to_g_per_l(x)) == pytest.approx(x, rel=1e-12)


def test_minutes_to_hours():
    cond = to_canonical({"c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6, "ct_min": 0.75})
    assert cond.ct == 0.0125


def test_declared_ct_kept_when_consistent():
    # V/Q = 0.748 min agrees with the declared 0.75 min within 5%
    cond = to_canonical({"c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6, "ct_min": 0.75})
    assert cond.v / cond.q == pytest.approx(0.01247, rel=1e-3)
    assert cond.ct == 0.0125


def test_ct_recomputed_from_v_over_q_when_missing():
    cond = to_canonical({"c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6})
    assert cond.ct == pytest.approx(0.0106 / 0.85, rel=1e-12)


def test_inconsistent_ct_warns_and_uses_v_over_q():
    with pytest.warns(UserWarning, match="using V/Q"):
        cond = to_canonical({"c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 7.1, "ct_min": 1.5})
    assert cond.ct == pytest.approx(0.0071 / 0.85, rel=1e-12)


def test_idempotent_on_conditions_instance():
    cond = refdata.experiment_conditions(1)
    assert to_canonical(cond) is cond


def test_idempotent_on_canonical_keys():
    cond = refdata.experiment_conditions(1)
    again = to_canonical({"c0_g_per_l": cond.c0, "q_l_per_hr": cond.q, "v_l": cond.v, "ct_hr": cond.ct})
    assert again.c0 == cond.c0 and again.v == cond.v and again.ct == cond.ct


def test_unknown_unit_tag_rejected():
    with pytest.raises(ParseError, match="c0_mg_per_l"):
        to_canonical({"c0_mg_per_l": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6})


def test_missing_required_field():
    with pytest.raises(ParseError, match="'v'"):
        to_canonical({"c0_ppb": 14.73, "q_l_per_hr": 0.85})


@pytest.mark.parametrize("number", range(1, 8))
def test_reference_contact_times_consistent(number):
    # every tabulated row except 8 has declared CT within 5% of V/Q
    cond = refdata.experiment_conditions(number)
    assert abs(cond.ct - cond.v / cond.q) / (cond.v / cond.q) <= 0.05


def test_reference_row_8_trusts_v_over_q():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cond = refdata.experiment_conditions(8)
    assert cond.ct_min == pytest.approx(0.5012, rel=1e-3)


def test_geometry_cross_check_rejects_bad_volume():
    with pytest.raises(ValueError, match="geometry"):
        to_canonical(
            {"c0_ppb": 14.73, "q_l_per_hr": 0.85, "v_ml": 10.6, "ct_min": 0.75,
             "z_cm": 100.0, "column_diameter_cm": 1.5}
        )


class TestBreakthroughCurve:
    def test_requires_three_points(self):
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ValueError, match="3 points"):
            BreakthroughCurve((0.0, 1.0), (0.1, 0.2), cond)

    def test_rejects_nonmonotone_time(self):
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ValueError, match="row 3"):
            BreakthroughCurve((0.0, 10.0, 5.0), (0.1, 0.2, 0.3), cond)

    def test_rejects_ratio_above_one(self):
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ValueError, match=r"outside \[0, 1\]"):
            BreakthroughCurve((0.0, 1.0, 2.0), (0.1, 1.2, 0.3), cond)

    def test_zero_points_flagged_not_dropped(self):
        cond = refdata.experiment_conditions(1)
        curve = BreakthroughCurve((0.0, 1.0, 2.0), (0.0, 0.2, 0.3), cond)
        assert len(curve) == 3
        assert curve.zero_point_indices == (0,)


class TestIngestCurve:
    def test_ratio_mode_passthrough(self):
        cond = refdata.experiment_conditions(1)
        curve = ingest_curve(io.StringIO("t_hr,ratio\n0,0.0\n100,0.1\n300,0.5\n"), cond)
        assert curve.ratios == (0.0, 0.1, 0.5)

    def test_concentration_mode_divides_by_inlet(self):
        cond = refdata.experiment_conditions(1)
        curve = ingest_curve(
            io.StringIO("t_hr,c_ppb\n0,0\n100,1.473\n300,7.365\n"), cond
        )
        assert curve.ratios[1] == pytest.approx(0.1, rel=1e-12)

    def test_comment_lines_ignored(self):
        cond = refdata.experiment_conditions(1)
        curve = ingest_curve(
            io.StringIO("# provenance: synthetic\nt_hr,ratio\n0,0.1\n# midway\n1,0.2\n2,0.3\n"),
            cond,
        )
        assert len(curve) == 3

    def test_nonmonotone_time_names_row(self):
        # data rows are numbered from 1; the second point is the offender
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ParseError, match="row 2"):
            ingest_curve(io.StringIO("t_hr,ratio\n10,0.2\n5,0.3\n20,0.4\n"), cond)

    def test_bad_header(self):
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ParseError, match="header"):
            ingest_curve(io.StringIO("time,value\n0,0.1\n"), cond)

    def test_too_few_rows(self):
        cond = refdata.experiment_conditions(1)
        with pytest.raises(ParseError, match="3 points"):
            ingest_curve(io.StringIO("t_hr,ratio\n0,0.1\n1,0.2\n"), cond)


class TestBreakthroughRatio:
    def test_experiment_1_threshold(self):
        assert breakthrough_ratio(10.0, 14.73) == pytest.approx(0.6789, abs=1e-4)

    def test_experiment_6_threshold(self):
        assert breakthrough_ratio(10.0, 20.65) == pytest.approx(0.4843, abs=1e-4)

    def test_inlet_at_limit_errors(self):
        with pytest.raises(ValueError, match="inlet already below limit"):
            breakthrough_ratio(10.0, 10.0)

    def test_inlet_below_limit_errors(self):
        with pytest.raises(ValueError, match="inlet already below limit"):
            breakthrough_ratio(10.0, 5.0)
