import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from pegstress.calibration import ShockCalibration
from pegstress.ingest import CoinSeries

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "pegstress" / "data"
SAMPLE_CONFIG = DATA_DIR / "sample_config.json"


def make_calibration(**kw) -> ShockCalibration:
    """USDC-like parameters; every field can be overridden."""
    values = dict(
        coin_id="usdc", alpha=0.291, beta_sim=-0.0025, gamma=-1.7094, delta=1.0,
        mu_lnV=22.0, sigma_lnV=0.5, v_bar=4.0e9, v95=8.0e9, p_base=8.229e-6,
        p_red=0.001, sigma_eps=0.002, mktcap_bar=40.0e9, rho=0.003,
    )
    values.update(kw)
    return ShockCalibration(**values)


def make_series(prices, coin_id="usdc", start="2023-01-01", market_cap=None, total_volume=None) -> CoinSeries:
    prices = np.asarray(prices, dtype=float)
    d0 = dt.date.fromisoformat(start)
    dates = [d0 + dt.timedelta(days=i) for i in range(len(prices))]
    if market_cap is None:
        market_cap = np.full(len(prices), 1.0e9)
    if total_volume is None:
        total_volume = np.full(len(prices), 1.0e8)
    return CoinSeries.from_arrays(coin_id, dates, prices, market_cap, total_volume)


@pytest.fixture
def calibration():
    return make_calibration()


@pytest.fixture
def sample_config():
    return SAMPLE_CONFIG


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
