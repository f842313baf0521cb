import json
import math
import os
import pathlib

import pytest

import valstudy

DATA = pathlib.Path(os.environ.get("VALSTUDY_TEST_DATA", pathlib.Path(__file__).resolve().parents[1] / "data"))


def test_daily_to_monthly():
    assert valstudy.daily_to_monthly(100.0) == pytest.approx(3047.9166666666667, abs=1e-9)
    with pytest.raises(valstudy.DataError):
        valstudy.daily_to_monthly(-1.0)


def test_bias_regime_sign_reversal():
    b = valstudy.bias_regime(0.1, 0.4, -0.6)
    assert b["regime"] == "sign_reversed"
    assert b["factor"] == pytest.approx(-0.02 / 0.26)


def test_reliability_from_moments():
    cov = [[0.0] * 2 for _ in range(2)]
    cov[0][0], cov[1][1] = 0.744, 0.043
    level, fd = valstudy.reliability_classical(cov, 1)
    assert level[0] == pytest.approx(0.744 / 0.787)
    assert fd == []


def test_ols_matches_fixture():
    y = [3.1, 2.4, 4.9, 8.2, 7.0, 6.1, 9.3, 13.8, 10.2, 12.9]
    x = [[i + 1, v] for i, v in enumerate([2.0, -1.0, 0.5, 3.0, 1.5, -2.0, 0.0, 4.0, -0.5, 1.0])]
    r = valstudy.ols(y, x, ["x1", "x2"])
    assert r["names"] == ["(intercept)", "x1", "x2"]
    assert r["robust_se"][1] == pytest.approx(0.049378390938709361863, abs=1e-10)
    assert r["f_p_value"] < 1e-6


def test_config_errors_raise():
    with pytest.raises(valstudy.ConfigError, match="income.rho"):
        valstudy.oracle({"dgp": {"income": {"rho": 2.0}}})


def test_simulate_and_analyze(tmp_path):
    cfg = {
        "seed": 3,
        "dgp": {"n_units": 1500, "income": {"signal_var": 0.744}, "error": {"noise_var": 0.043}},
        "balance": {"horizon": 1},
        "analyses": [{"type": "reliability", "method": "classical", "horizon": 1}],
    }
    panel = valstudy.simulate(cfg, tmp_path / "sim")
    oracle = json.loads((tmp_path / "sim" / "oracle.json").read_text())["oracle"]
    report = valstudy.analyze(cfg, panel)
    assert report["schema_version"] == valstudy.REPORT_SCHEMA_VERSION
    est = report["analyses"][0]["rows"][0]["classical_level"]
    assert math.isclose(est, oracle["lambda_level"], abs_tol=0.03)
    again = valstudy.analyze(cfg, panel, out_dir=tmp_path / "rep")
    assert again == report


def test_harmonize_fixture(tmp_path):
    ledger = valstudy.harmonize(
        json.loads((DATA / "harmonize" / "config.json").read_text()),
        DATA / "harmonize" / "spells.csv",
        DATA / "harmonize" / "survey.csv",
        tmp_path,
        base_dir=DATA / "harmonize",
    )
    assert [row["observations"] for row in ledger] == [12, 11, 10, 9, 8, 7, 6, 5, 4]
