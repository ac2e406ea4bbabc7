"""Paired Monte Carlo stress test of the current and hybrid regimes.

Daily price recursion::

    P[t+1] = P[t] + alpha*(1 - P[t]) + beta*V[t]/v_bar + gamma*L[t]
             - delta*R[t]/mktcap[t] + eps[t]

``gamma`` is calibrated negative, ``delta`` is a positive magnitude applied
with a minus sign, ``beta`` keeps the regression sign.  The hybrid regime
scales (beta, gamma, delta) by (f_beta, f_gamma, f_delta).  Both regimes of
a trial consume the same shock realisations.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .calibration import BASELINE_FRACTIONS, HybridFractions, ShockCalibration
from .errors import DomainError, SimulationError
from .rng import channel_draws

SIM_START = dt.date(2019, 11, 1)
SIM_END = dt.date(2025, 4, 30)
MULTIPLIERS = (50, 100, 200, 500)
FROZEN_LOG_MEAN = -3.0
FROZEN_LOG_SD = 0.5
REDEMPTION_SCALE = 0.05
REDEMPTION_LOG_SD = 1.0


def horizon_days(start=SIM_START, end=SIM_END) -> int:
    """Number of daily steps T between two dates (prices P_0..P_T)."""
    start, end = dt.date.fromisoformat(str(start)), dt.date.fromisoformat(str(end))
    if end <= start:
        raise DomainError("simulation end must be after start")
    return (end - start).days


@dataclass(frozen=True)
class SimConfig:
    days: int = field(default_factory=horizon_days)
    trials: int = 20_000
    seed: int = 20250430
    multiplier: float = 100
    off_peg_tolerance: float = 0.01
    fractions: HybridFractions = BASELINE_FRACTIONS
    noise_enabled: bool = True
    price_floor: float = 0.0
    volume_impact: bool = True
    reserve_impact: bool = True
    redemption_impact: bool = True
    mktcap_path: tuple | None = None
    block_size: int = 500

    def __post_init__(self):
        if self.days < 1 or self.trials < 1:
            raise DomainError("days and trials must be at least 1")
        if self.off_peg_tolerance <= 0:
            raise DomainError("off-peg tolerance must be positive")
        if self.multiplier < 0:
            raise DomainError("extreme-day multiplier must be non-negative")
        if self.mktcap_path is not None and len(self.mktcap_path) < self.days:
            raise DomainError("replayed market-cap path shorter than the horizon")

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class DailyShocks:
    """Shock realisations; fields are scalars for one day or arrays over days/trials."""

    volume: np.ndarray
    failure: np.ndarray
    frozen: np.ndarray
    redemption: np.ndarray
    redemption_usd: np.ndarray
    noise: np.ndarray

    def day(self, t: int) -> "DailyShocks":
        return DailyShocks(*(getattr(self, f)[t] for f in self.__dataclass_fields__))


class ImpactParams(NamedTuple):
    alpha: float
    beta: float
    gamma: float
    delta: float


def regime_params(cal: ShockCalibration, cfg: SimConfig, fractions: HybridFractions | None = None) -> ImpactParams:
    """Effective coefficients; ``fractions=None`` is the current regime."""
    beta = cal.beta_sim if cfg.volume_impact else 0.0
    gamma = cal.gamma if cfg.reserve_impact else 0.0
    delta = cal.delta if cfg.redemption_impact else 0.0
    if fractions is not None:
        beta, gamma, delta = fractions.f_beta * beta, fractions.f_gamma * gamma, fractions.f_delta * delta
    return ImpactParams(cal.alpha, beta, gamma, delta)


def shocks_from_variates(cal: ShockCalibration, cfg: SimConfig, z: dict) -> DailyShocks:
    """Turn raw channel variates into shocks (works on any array shape)."""
    volume = np.exp(cal.mu_lnV + cal.sigma_lnV * z["volume"])
    extreme_p = min(1.0, cfg.multiplier * cal.p_base)
    p_fail = np.where(volume > cal.v95, extreme_p, cal.p_base)
    failure = z["failure"] < p_fail
    frozen = np.minimum(np.exp(FROZEN_LOG_MEAN + FROZEN_LOG_SD * z["frozen"]), 1.0)
    frozen = np.where(failure, frozen, 0.0)
    redemption = z["redemption"] < cal.p_red
    size = np.exp(math.log(REDEMPTION_SCALE * cal.mktcap_bar) + REDEMPTION_LOG_SD * z["redemption_size"])
    redemption_usd = np.where(redemption, size, 0.0)
    if cfg.noise_enabled:
        noise = cal.sigma_eps * z["noise"]
    else:
        noise = np.zeros_like(volume)
    return DailyShocks(volume, failure, frozen, redemption, redemption_usd, noise)


def draw_shocks(cal: ShockCalibration, cfg: SimConfig, trial_index: int) -> DailyShocks:
    """All daily shocks of one trial (arrays of length ``cfg.days``)."""
    return shocks_from_variates(cal, cfg, channel_draws(cfg.seed, trial_index, cfg.days))


def draw_daily_shocks(cal: ShockCalibration, cfg: SimConfig, trial_index: int, day: int) -> DailyShocks:
    if not 0 <= day < cfg.days:
        raise DomainError(f"day {day} outside horizon")
    return draw_shocks(cal, cfg, trial_index).day(day)


def step_price(price, shocks: DailyShocks, params: ImpactParams, v_bar: float, mktcap,
               price_floor: float = 0.0):
    """One day of the recursion.  Returns ``(next_price, clamped)``.

    Broadcasts: ``price`` may be (regimes, trials) with shock fields of
    shape (trials,) and params of shape (regimes, 1).
    """
    with np.errstate(all="ignore"):  # non-finite results are reported by the caller
        nxt = (price
               + params.alpha * (1.0 - price)
               + params.beta * (shocks.volume / v_bar)
               + params.gamma * shocks.frozen
               - params.delta * (shocks.redemption_usd / mktcap)
               + shocks.noise)
    clamped = nxt < price_floor
    nxt = np.where(clamped, price_floor, nxt)
    if np.ndim(nxt) == 0:
        return float(nxt), bool(clamped)
    return nxt, clamped


class TrialOutcome(NamedTuple):
    peak_dev: float
    off_peg_days: int
    regime: str = "current"
    clamped_days: int = 0


@dataclass(frozen=True)
class TrialPath:
    prices: np.ndarray
    regime: str
    clamped_days: int = 0


def outcome_metrics(path, tolerance: float = 0.01, regime: str | None = None) -> TrialOutcome:
    """Peak absolute deviation and off-peg day count over P_0..P_T."""
    if isinstance(path, TrialPath):
        prices, regime, clamped = path.prices, regime or path.regime, path.clamped_days
    else:
        prices, clamped = np.asarray(path, dtype=float), 0
    if len(prices) == 0:
        raise DomainError("empty path")
    dev = np.abs(prices - 1.0)
    return TrialOutcome(float(dev.max()), int((dev > tolerance).sum()), regime or "current", clamped)


def _stack_params(cal, cfg, fraction_sets):
    rows = [regime_params(cal, cfg, None)] + [regime_params(cal, cfg, f) for f in fraction_sets]
    return ImpactParams(*(np.array([getattr(r, name) for r in rows])[:, None] for name in ImpactParams._fields))


def _mktcap(cal, cfg, t):
    return cal.mktcap_bar if cfg.mktcap_path is None else cfg.mktcap_path[t]


def simulate_block(cal: ShockCalibration, cfg: SimConfig, trials: Sequence[int],
                   fraction_sets: Sequence[HybridFractions]):
    """Run a batch of trials for the current regime plus each fraction set.

    Returns ``(peak, off, clamped)`` arrays of shape (1 + len(fraction_sets), len(trials)).
    """
    trials = list(trials)
    T = cfg.days
    raw = [channel_draws(cfg.seed, i, T) for i in trials]
    z = {name: np.ascontiguousarray(np.stack([r[name] for r in raw], axis=1)) for name in raw[0]}
    shocks = shocks_from_variates(cal, cfg, z)
    params = _stack_params(cal, cfg, fraction_sets)
    shape = (1 + len(fraction_sets), len(trials))
    price = np.ones(shape)
    peak = np.zeros(shape)
    off = np.zeros(shape, dtype=np.int64)
    clamped = np.zeros(shape, dtype=np.int64)
    tol = cfg.off_peg_tolerance
    for t in range(T):
        price, hit = step_price(price, shocks.day(t), params, cal.v_bar, _mktcap(cal, cfg, t), cfg.price_floor)
        if not np.isfinite(price).all():
            bad = np.argwhere(~np.isfinite(price))[0]
            raise SimulationError("non-finite price", trial=trials[bad[1]], day=t + 1)
        dev = np.abs(price - 1.0)
        np.maximum(peak, dev, out=peak)
        off += dev > tol
        clamped += hit
    return peak, off, clamped


def simulate_path(cal: ShockCalibration, cfg: SimConfig, trial_index: int,
                  fractions: HybridFractions | None = None) -> TrialPath:
    """Full price path of one trial, one day at a time (reference route)."""
    shocks = draw_shocks(cal, cfg, trial_index)
    params = regime_params(cal, cfg, fractions)
    prices = np.empty(cfg.days + 1)
    prices[0] = 1.0
    clamped = 0
    for t in range(cfg.days):
        prices[t + 1], hit = step_price(prices[t], shocks.day(t), params, cal.v_bar,
                                        _mktcap(cal, cfg, t), cfg.price_floor)
        if not math.isfinite(prices[t + 1]):
            raise SimulationError("non-finite price", trial=trial_index, day=t + 1)
        clamped += hit
    return TrialPath(prices, "current" if fractions is None else "hybrid", clamped)


@dataclass(frozen=True)
class RegimeOutcomes:
    peak_dev: np.ndarray
    off_peg_days: np.ndarray
    clamped_days: np.ndarray
    regime: str

    def outcome(self, i: int) -> TrialOutcome:
        return TrialOutcome(float(self.peak_dev[i]), int(self.off_peg_days[i]), self.regime,
                            int(self.clamped_days[i]))


@dataclass(frozen=True)
class SimulationResult:
    """Per-trial outcomes of both regimes, indexed 0..N-1."""

    coin_id: str
    current: RegimeOutcomes
    hybrid: RegimeOutcomes
    fractions: HybridFractions
    multiplier: float

    @property
    def trials(self) -> int:
        return len(self.current.peak_dev)

    def pairs(self) -> list[tuple[TrialOutcome, TrialOutcome]]:
        return [(self.current.outcome(i), self.hybrid.outcome(i)) for i in range(self.trials)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "regime", "peak_dev", "off_peg_days", "clamped_days"])
        for i in range(self.trials):
            for reg in (self.current, self.hybrid):
                w.writerow([i, reg.regime, repr(float(reg.peak_dev[i])),
                            int(reg.off_peg_days[i]), int(reg.clamped_days[i])])
        return buf.getvalue()


def run_trial_pair(cal: ShockCalibration, cfg: SimConfig, trial_index: int) -> tuple[TrialOutcome, TrialOutcome]:
    if not 0 <= trial_index < cfg.trials:
        raise DomainError(f"trial index {trial_index} outside 0..{cfg.trials - 1}")
    peak, off, clamped = simulate_block(cal, cfg, [trial_index], [cfg.fractions])
    return (TrialOutcome(float(peak[0, 0]), int(off[0, 0]), "current", int(clamped[0, 0])),
            TrialOutcome(float(peak[1, 0]), int(off[1, 0]), "hybrid", int(clamped[1, 0])))


def _block_job(args):
    cal, cfg, lo, hi, fraction_sets = args
    try:
        return simulate_block(cal, cfg, range(lo, hi), fraction_sets)
    except SimulationError as exc:
        return exc


def run_many(cal: ShockCalibration, cfg: SimConfig, fraction_sets: Sequence[HybridFractions],
             workers: int = 1):
    """Current regime plus several hybrid variants over the same trials.

    Output is independent of ``workers``: trials are split into fixed
    blocks and reassembled by index.
    """
    bounds = [(lo, min(lo + cfg.block_size, cfg.trials)) for lo in range(0, cfg.trials, cfg.block_size)]
    jobs = [(cal, cfg, lo, hi, list(fraction_sets)) for lo, hi in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_job, jobs))
    else:
        parts = [_block_job(j) for j in jobs]
    failures = [p for p in parts if isinstance(p, SimulationError)]
    if failures:
        detail = "; ".join(str(f) for f in failures)
        raise SimulationError(f"{len(failures)} block(s) failed: {detail}")
    peak = np.concatenate([p[0] for p in parts], axis=1)
    off = np.concatenate([p[1] for p in parts], axis=1)
    clamped = np.concatenate([p[2] for p in parts], axis=1)
    current = RegimeOutcomes(peak[0], off[0], clamped[0], "current")
    return current, [RegimeOutcomes(peak[k], off[k], clamped[k], "hybrid") for k in range(1, len(peak))]


def run_simulation(cal: ShockCalibration, cfg: SimConfig, workers: int = 1) -> SimulationResult:
    current, (hybrid,) = run_many(cal, cfg, [cfg.fractions], workers)
    return SimulationResult(cal.coin_id, current, hybrid, cfg.fractions, cfg.multiplier)
