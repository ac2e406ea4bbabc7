import json

import mpmath
import numpy as np
import pandas as pd
import pytest

from pegstress.calibration import (
    CalibrationSettings, HybridFractions, ShockCalibration, bank_failure_probability, calibrate_coin,
    calibrate_gamma_generic, calibrate_gamma_usdc, daily_failure_probability, derive_alpha_beta,
    estimate_noise, event_window_drop, fit_volume_lognormal, nearest_rank,
)
from pegstress.config import RunConfig
from pegstress.econometrics import regress_peg_deviation
from pegstress.errors import DomainError, InputError
from pegstress.ingest import BankFailureTable, align_panel, load_coin_csv, load_failures

from conftest import DATA_DIR, SAMPLE_CONFIG, make_calibration, make_series


def oracle_p_base(rho):
    mpmath.mp.dps = 50
    return float(1 - (1 - mpmath.mpf(rho)) ** (mpmath.mpf(1) / 365))


def test_nearest_rank():
    assert nearest_rank(range(1, 101), 95) == 95
    assert nearest_rank([3, 1, 2], 50) == 2
    assert nearest_rank([5], 95) == 5
    with pytest.raises(DomainError):
        nearest_rank([], 95)


def test_fractions_validate():
    assert HybridFractions().as_tuple() == (0.5, 0.1, 0.2)
    with pytest.raises(DomainError):
        HybridFractions(f_beta=1.5)
    assert HybridFractions().replace(f_gamma=0.3).f_gamma == 0.3


def test_volume_fit_recovery():
    rng = np.random.default_rng(1)
    fit = fit_volume_lognormal(rng.lognormal(20, 0.5, 10_000))
    assert abs(fit.mu_lnV - 20) < 0.02 and abs(fit.sigma_lnV - 0.5) < 0.02


def test_volume_fit_rules():
    with pytest.raises(DomainError, match="degenerate fit"):
        fit_volume_lognormal(np.full(50, 7.0))
    with pytest.raises(InputError):
        fit_volume_lognormal(np.arange(1.0, 30.0))
    v = np.concatenate([np.arange(1.0, 41.0), [0.0, -1.0, np.nan]])
    fit = fit_volume_lognormal(v)
    assert fit.excluded == 2
    assert fit.v_bar == pytest.approx(20.5)
    assert fit.v95 == 38.0


def test_bank_failure_probability():
    assert bank_failure_probability({2023: (0, 4100)}) == (0.0, 0.0)
    rho, p = bank_failure_probability({2023: (5, 4100), 2024: (2, 4000)})
    assert rho == 7 / 8100
    assert p == pytest.approx(oracle_p_base(7 / 8100), rel=1e-14)
    assert daily_failure_probability(0.003) == pytest.approx(8.229e-6, rel=1e-3)
    assert abs(daily_failure_probability(0.003) - oracle_p_base(0.003)) < 1e-12
    with pytest.raises(DomainError):
        daily_failure_probability(1.0)
    with pytest.raises(DomainError):
        bank_failure_probability({2023: (0, 0)})
    t = BankFailureTable({2023: (5, 4100), 2024: (2, 4000)})
    assert bank_failure_probability(t)[0] == 7 / 8100


def test_p_base_monotone():
    rhos = np.linspace(0, 0.99, 200)
    ps = [daily_failure_probability(r) for r in rhos]
    assert ps[0] == 0 and all(b > a for a, b in zip(ps, ps[1:]))
    assert daily_failure_probability(1 - 1e-15) > 0.09


def _event_series(price_on_event, volume_on_event=1e8):
    prices = np.ones(20)
    vols = np.full(20, 1e8)
    prices[9] = price_on_event
    vols[9] = volume_on_event
    return make_series(prices, start="2023-03-01", total_volume=vols)


def test_gamma_usdc():
    frozen = 3.3e9 / 56.41e9
    assert frozen == pytest.approx(0.058500, abs=1e-6)
    s = _event_series(0.90)
    g = calibrate_gamma_usdc(s, 0.0, 1e8)
    assert g == pytest.approx(-0.10 / frozen, rel=1e-12)
    assert g == pytest.approx(-1.7094, abs=1e-3)
    assert calibrate_gamma_usdc(_event_series(1.0), 0.0, 1e8) == 0.0
    # volume impact is netted out
    g2 = calibrate_gamma_usdc(_event_series(0.90, 3e8), -0.01, 1e8)
    assert g2 == pytest.approx((-0.10 + 0.03) / frozen, rel=1e-12)
    # homogeneous in (frozen, base)
    assert calibrate_gamma_usdc(s, 0.0, 1e8, frozen_usd=6.6e9, base_usd=112.82e9) == pytest.approx(g, rel=1e-15)
    with pytest.raises(InputError):
        calibrate_gamma_usdc(make_series(np.ones(3), start="2024-01-01"), 0.0, 1e8)
    with pytest.raises(DomainError):
        calibrate_gamma_usdc(s, 0.0, 1e8, frozen_usd=0.0)


def test_gamma_generic_and_window():
    assert calibrate_gamma_generic(0.01, -0.02) == pytest.approx(-2.0)
    assert calibrate_gamma_generic(0.01, 0.0) == 0.0
    with pytest.raises(DomainError):
        calibrate_gamma_generic(0.0, -0.02)
    prices = np.ones(20)
    prices[10] = 0.95  # 2023-03-11
    prices[14] = 0.90  # 2023-03-15, outside the 3-day window
    s = make_series(prices, start="2023-03-01")
    assert event_window_drop(s) == pytest.approx(-0.05)


def test_alpha_beta():
    class Fake:
        def __init__(self, phi, b):
            self.v = {"peg_deviation_lag1": phi, "total_volume": b}

        def __getitem__(self, k):
            return type("C", (), {"value": self.v[k]})()

    a, b = derive_alpha_beta(Fake(0.709, -8.91e-13), 2.8375e8)
    assert a == pytest.approx(0.291)
    assert b == pytest.approx(-2.53e-4, rel=1e-3)
    assert derive_alpha_beta(Fake(0.0, 0.0), 1.0)[0] == 1.0
    with pytest.raises(DomainError, match="non-mean-reverting"):
        derive_alpha_beta(Fake(1.0, 0.0), 1.0)


def test_alpha_beta_from_synthetic_regression():
    rng = np.random.default_rng(8)
    n = 3000
    vol = rng.lognormal(20, 0.4, n)
    dev = np.zeros(n)
    for t in range(1, n):
        dev[t] = 0.6 * dev[t - 1] - 2e-12 * vol[t] + rng.normal(0, 1e-4)
    frame = pd.DataFrame({"peg_deviation": dev, "total_volume": vol,
                          "market_cap": rng.lognormal(23, 0.05, n)})
    res = regress_peg_deviation(frame)
    a, b = derive_alpha_beta(res, vol.mean())
    assert a == pytest.approx(0.4, abs=0.03)
    assert b == pytest.approx(-2e-12 * vol.mean(), rel=0.1)


def test_noise_estimate():
    assert estimate_noise(make_series(np.ones(150)), 0.3) == 0.0
    rng = np.random.default_rng(12)
    p = np.empty(5000)
    p[0] = 1.0
    for t in range(4999):
        p[t + 1] = p[t] + 0.3 * (1 - p[t]) + rng.normal(0, 0.002)
    est = estimate_noise(make_series(p), 0.3)
    assert abs(est / 0.002 - 1) < 0.1
    with pytest.raises(InputError):
        estimate_noise(make_series(np.ones(50)), 0.3)


def test_calibration_json_round_trip():
    cal = make_calibration(provenance={"alpha": "x"})
    back = ShockCalibration.from_dict(json.loads(json.dumps(cal.to_dict())))
    assert back == cal
    with pytest.raises(InputError):
        ShockCalibration.from_dict({"coin_id": "x", "parameters": {}})


def test_calibration_invariants():
    with pytest.raises(DomainError):
        make_calibration(sigma_lnV=0.0)
    with pytest.raises(DomainError):
        make_calibration(p_red=1.5)
    with pytest.raises(DomainError):
        make_calibration(v95=1.0)


def test_full_calibration_on_sample_data():
    cfg = RunConfig.load(SAMPLE_CONFIG)
    failures = load_failures(DATA_DIR / "failed_banks.csv", DATA_DIR / "bank_totals.csv")
    assert failures.skipped == 1
    for coin in ("usdc", "dai"):
        series = load_coin_csv(DATA_DIR / f"{coin}.csv", coin)
        panel = align_panel([series], [], series.start, series.end).coin(coin)
        ols = regress_peg_deviation(panel)
        cal = calibrate_coin(series, ols, failures, cfg.calibration_settings())
        assert all(cal.provenance[name] for name in cal.to_dict()["parameters"])
        assert cal.alpha == pytest.approx(1 - ols["peg_deviation_lag1"].value)
        assert cal.gamma < 0
    assert "assumed 1% frozen" in cal.provenance["gamma"]
    over = CalibrationSettings(overrides={"dai": {"sigma_eps": 0.0}})
    assert calibrate_coin(series, ols, failures, over).sigma_eps == 0.0
    with pytest.raises(InputError):
        calibrate_coin(series, ols, failures, CalibrationSettings(overrides={"dai": {"bogus": 1}}))
