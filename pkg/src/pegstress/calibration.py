"""Deriving the Monte Carlo shock parameters from market data.

Each coin gets a :class:`ShockCalibration`: volume distribution, bank
failure probability, mean-reversion and volume-impact coefficients from the
peg-deviation regression, a reserve-shock coefficient from the March 2023
depeg, redemption settings and a residual noise scale.  Every field carries
a short provenance note that ends up in the calibration JSON.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .econometrics import OlsResult
from .errors import DomainError, InputError
from .ingest import BankFailureTable, CoinSeries

MIN_VOLUME_OBS = 30
MIN_NOISE_RUN = 100

# Frozen USDC reserves at SVB and the deposit base they are measured against.
SVB_FROZEN_USD = 3.3e9
SVB_BASE_USD = 56.41e9
SVB_EVENT_DATE = dt.date(2023, 3, 10)

DEFAULT_P_RED = 0.001
DEFAULT_DELTA = 1.0
DEFAULT_ASSUMED_FROZEN = 0.01
DEFAULT_EVENT_WINDOW_DAYS = 3


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    x = np.sort(np.asarray(values, dtype=float))
    if len(x) == 0:
        raise DomainError("percentile of empty sample")
    rank = max(1, math.ceil(pct / 100.0 * len(x)))
    return float(x[min(rank, len(x)) - 1])


@dataclass(frozen=True)
class HybridFractions:
    f_beta: float = 0.5
    f_gamma: float = 0.1
    f_delta: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{f.name}={v} outside [0, 1]")

    def replace(self, **kw) -> "HybridFractions":
        return HybridFractions(**{**asdict(self), **kw})

    def as_tuple(self):
        return (self.f_beta, self.f_gamma, self.f_delta)


BASELINE_FRACTIONS = HybridFractions(0.5, 0.1, 0.2)

_PARAMS = ("alpha", "beta_sim", "gamma", "delta", "mu_lnV", "sigma_lnV", "v_bar", "v95",
           "p_base", "p_red", "sigma_eps", "mktcap_bar", "rho")


@dataclass(frozen=True)
class ShockCalibration:
    coin_id: str
    alpha: float
    beta_sim: float
    gamma: float
    delta: float
    mu_lnV: float
    sigma_lnV: float
    v_bar: float
    v95: float
    p_base: float
    p_red: float
    sigma_eps: float
    mktcap_bar: float
    rho: float = 0.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma_lnV > 0:
            raise DomainError("sigma_lnV must be positive")
        for name in ("p_base", "p_red"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        if self.sigma_eps < 0:
            raise DomainError("sigma_eps must be non-negative")
        if self.v_bar <= 0 or self.mktcap_bar <= 0:
            raise DomainError("v_bar and mktcap_bar must be positive")
        if self.v95 < math.exp(self.mu_lnV) * (1 - 1e-12):
            raise DomainError("v95 below the fitted median volume")

    def replace(self, **kw) -> "ShockCalibration":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return ShockCalibration(**d)

    def to_dict(self) -> dict:
        return {
            "coin_id": self.coin_id,
            "parameters": {
                name: {"value": getattr(self, name), "provenance": self.provenance.get(name, "")}
                for name in _PARAMS
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShockCalibration":
        try:
            params = d["parameters"]
            values = {name: float(params[name]["value"]) for name in _PARAMS}
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed calibration entry: {exc}") from None
        prov = {name: params[name]["provenance"] for name in _PARAMS if params[name].get("provenance")}
        return cls(coin_id=d["coin_id"], provenance=prov, **values)


class VolumeFit(NamedTuple):
    mu_lnV: float
    sigma_lnV: float
    v_bar: float
    v95: float
    excluded: int


def fit_volume_lognormal(volumes) -> VolumeFit:
    """Lognormal fit of positive daily volumes.

    Accepts a :class:`CoinSeries` or raw values.  Zero, negative and null
    volumes are excluded and counted.
    """
    v = volumes.total_volume if isinstance(volumes, CoinSeries) else volumes
    v = np.asarray(v, dtype=float)
    v = v[~np.isnan(v)]
    pos = v[v > 0]
    excluded = len(v) - len(pos)
    if len(pos) < MIN_VOLUME_OBS:
        raise InputError(f"need at least {MIN_VOLUME_OBS} positive volumes, got {len(pos)}")
    logs = np.log(pos)
    mu = math.fsum(logs) / len(logs)
    d = logs - mu
    sigma = math.sqrt(math.fsum(d * d) / (len(logs) - 1))
    if sigma <= 0:
        raise DomainError("degenerate fit: log-volume standard deviation is zero")
    return VolumeFit(mu, sigma, math.fsum(pos) / len(pos), nearest_rank(pos, 95), excluded)


def bank_failure_probability(table) -> tuple[float, float]:
    """Pooled annual failure rate and the equivalent daily probability.

    ``rho = sum(failures) / sum(total banks)`` and
    ``p_base = 1 - (1 - rho) ** (1/365)``.
    """
    if isinstance(table, BankFailureTable):
        failures, banks = table.total_failures, table.total_banks
    else:
        failures = sum(f for f, _ in table.values())
        banks = sum(t for _, t in table.values())
    if banks <= 0:
        raise DomainError("total bank count must be positive")
    rho = failures / banks
    return rho, daily_failure_probability(rho)


def daily_failure_probability(rho: float) -> float:
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"annual failure rate {rho} outside [0, 1)")
    # expm1/log1p keep full precision for the tiny rates involved
    return -math.expm1(math.log1p(-rho) / 365.0)


def price_on(series: CoinSeries, day) -> tuple[float, float]:
    """(price, volume) observed on ``day``."""
    d = np.datetime64(day, "D")
    idx = np.flatnonzero(series.dates == d)
    if len(idx) == 0 or np.isnan(series.price[idx[0]]):
        raise InputError(f"{series.coin_id}: no price on {day}")
    return float(series.price[idx[0]]), float(series.total_volume[idx[0]])


def calibrate_gamma_usdc(series: CoinSeries, beta_sim: float, v_bar: float,
                         event_date=SVB_EVENT_DATE, frozen_usd: float = SVB_FROZEN_USD,
                         base_usd: float = SVB_BASE_USD) -> float:
    """Reserve-shock coefficient from the observed event-day drop.

    The volume impact ``beta_sim * V_event / v_bar`` is removed from the
    event-day deviation and the remainder is divided by the frozen share
    ``frozen_usd / base_usd``.
    """
    if base_usd <= 0 or frozen_usd <= 0:
        raise DomainError("frozen share must be positive")
    frozen = frozen_usd / base_usd
    price, volume = price_on(series, event_date)
    dp_obs = price - 1.0
    volume_impact = beta_sim * (volume / v_bar) if not math.isnan(volume) else 0.0
    return (dp_obs - volume_impact) / frozen


def calibrate_gamma_generic(assumed_frozen_fraction: float, reference_drop: float) -> float:
    if assumed_frozen_fraction <= 0:
        raise DomainError("assumed frozen fraction must be positive")
    return reference_drop / assumed_frozen_fraction


def event_window_drop(series: CoinSeries, event_date=SVB_EVENT_DATE,
                      days: int = DEFAULT_EVENT_WINDOW_DAYS) -> float:
    """Lowest price in [event_date, event_date + days] minus one."""
    sub = series.window(event_date, np.datetime64(event_date, "D") + days)
    prices = sub.price[~np.isnan(sub.price)]
    if len(prices) == 0:
        raise InputError(f"{series.coin_id}: no prices in event window from {event_date}")
    return float(prices.min()) - 1.0


def derive_alpha_beta(ols: OlsResult, v_bar: float, lag_term: str = "peg_deviation_lag1",
                      volume_term: str = "total_volume") -> tuple[float, float]:
    """Map the AR(1) persistence and volume slope onto simulator units.

    ``alpha = 1 - phi`` and ``beta_sim = b_vol * v_bar``.
    """
    phi = ols[lag_term].value
    if abs(phi) >= 1:
        raise DomainError(f"non-mean-reverting fit: lag coefficient {phi}")
    return 1.0 - phi, ols[volume_term].value * v_bar


def longest_consecutive_run(series: CoinSeries) -> int:
    observed = ~np.isnan(series.daily()["price"].to_numpy())
    best = run = 0
    for flag in observed:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best


def estimate_noise(series: CoinSeries, alpha: float) -> float:
    """Std of ``(P[t+1] - P[t]) - alpha * (1 - P[t])`` over consecutive observed days."""
    if longest_consecutive_run(series) < MIN_NOISE_RUN:
        raise InputError(f"{series.coin_id}: need {MIN_NOISE_RUN} consecutive observations to estimate noise")
    p = series.daily()["price"].to_numpy(dtype=float)
    r = (p[1:] - p[:-1]) - alpha * (1.0 - p[:-1])
    r = r[~np.isnan(r)]
    mean = math.fsum(r) / len(r)
    d = r - mean
    return math.sqrt(math.fsum(d * d) / (len(r) - 1))


@dataclass
class CalibrationSettings:
    event_date: dt.date = SVB_EVENT_DATE
    frozen_usd: float = SVB_FROZEN_USD
    base_usd: float = SVB_BASE_USD
    svb_coins: tuple = ("usdc",)
    assumed_frozen_fraction: float = DEFAULT_ASSUMED_FROZEN
    event_window_days: int = DEFAULT_EVENT_WINDOW_DAYS
    p_red: float = DEFAULT_P_RED
    delta: float = DEFAULT_DELTA
    overrides: dict = field(default_factory=dict)


def calibrate_coin(series: CoinSeries, ols: OlsResult, failures: BankFailureTable,
                   settings: CalibrationSettings | None = None) -> ShockCalibration:
    """Full calibration of one coin from its history and fitted regression."""
    s = settings or CalibrationSettings()
    prov: dict[str, str] = {}

    vf = fit_volume_lognormal(series)
    prov["mu_lnV"] = f"mean log volume over {len(series) - vf.excluded} positive days"
    prov["sigma_lnV"] = "sample std of log volume"
    prov["v_bar"] = "arithmetic mean of positive daily volume"
    prov["v95"] = "nearest-rank 95th percentile of daily volume"

    rho, p_base = bank_failure_probability(failures)
    years = sorted(failures.years)
    span = f"{years[0]}-{years[-1]}" if years else "no years"
    prov["rho"] = f"{failures.total_failures} failures / {failures.total_banks} bank-years ({span})"
    prov["p_base"] = "1 - (1 - rho)^(1/365)"

    alpha, beta_sim = derive_alpha_beta(ols, vf.v_bar)
    phi = ols["peg_deviation_lag1"].value
    prov["alpha"] = f"1 - lag-1 deviation coefficient ({phi:.6g}), n={ols.nobs}"
    prov["beta_sim"] = f"volume coefficient {ols['total_volume'].value:.6g} x v_bar"

    if series.coin_id in s.svb_coins:
        gamma = calibrate_gamma_usdc(series, beta_sim, vf.v_bar, s.event_date, s.frozen_usd, s.base_usd)
        prov["gamma"] = (f"event-day drop on {s.event_date} net of volume impact / "
                         f"frozen share {s.frozen_usd:g}/{s.base_usd:g}")
    else:
        drop = event_window_drop(series, s.event_date, s.event_window_days)
        gamma = calibrate_gamma_generic(s.assumed_frozen_fraction, drop)
        prov["gamma"] = (f"assumed {s.assumed_frozen_fraction:.0%} frozen; min price in "
                         f"{s.event_window_days}-day window from {s.event_date} minus 1 = {drop:.6g}")

    sigma_eps = estimate_noise(series, alpha)
    prov["sigma_eps"] = "std of mean-reversion residuals"
    prov["p_red"] = "configured daily mass-redemption probability"
    prov["delta"] = "configured redemption impact magnitude"
    mcap = series.market_cap[~np.isnan(series.market_cap)]
    if len(mcap) == 0:
        raise InputError(f"{series.coin_id}: no market cap observations")
    prov["mktcap_bar"] = "arithmetic mean of daily market cap"

    values = dict(alpha=alpha, beta_sim=beta_sim, gamma=gamma, delta=s.delta,
                  mu_lnV=vf.mu_lnV, sigma_lnV=vf.sigma_lnV, v_bar=vf.v_bar, v95=vf.v95,
                  p_base=p_base, p_red=s.p_red, sigma_eps=sigma_eps,
                  mktcap_bar=math.fsum(mcap) / len(mcap), rho=rho)
    for name, v in s.overrides.get(series.coin_id, {}).items():
        if name not in values:
            raise InputError(f"unknown calibration override {name!r}")
        values[name] = float(v)
        prov[name] = f"config override ({v!r})"
    return ShockCalibration(coin_id=series.coin_id, provenance=prov, **values)
