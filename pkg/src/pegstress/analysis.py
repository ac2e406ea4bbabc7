"""Aggregating paired outcomes, sensitivity sweeps and the bank-run example."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .calibration import HybridFractions, ShockCalibration, nearest_rank
from .errors import DomainError
from .simulator import MULTIPLIERS, RegimeOutcomes, SimConfig, SimulationResult, TrialOutcome, run_many

DEFAULT_EPSILON = 0.01
DEFAULT_GRID = tuple(round(0.1 * i, 10) for i in range(11))
SWEEP_PARAMETERS = ("f_beta", "f_gamma", "f_delta")

# Values held fixed in each one-dimensional sweep.  Note the redemption sweep
# holds f_gamma at 0.2, not the 0.1 baseline.
SWEEP_FIXED = {
    "f_gamma": {"f_beta": 0.5, "f_delta": 0.2},
    "f_beta": {"f_gamma": 0.1, "f_delta": 0.2},
    "f_delta": {"f_beta": 0.5, "f_gamma": 0.2},
}


class Improvement(NamedTuple):
    pct_peak: float
    pct_off: float
    excluded: bool
    off_excluded: bool


def percent_improvement(current: TrialOutcome, hybrid: TrialOutcome,
                        epsilon: float = DEFAULT_EPSILON) -> Improvement:
    """Relative reduction (in %) of peak deviation and off-peg days.

    A trial whose current-regime peak is below ``epsilon`` had nothing to
    improve on: it scores 0 and is flagged excluded.  Same for zero
    current off-peg days.
    """
    excluded = current.peak_dev < epsilon
    pct_peak = 0.0 if excluded else 100.0 * (current.peak_dev - hybrid.peak_dev) / current.peak_dev
    off_excluded = current.off_peg_days == 0
    pct_off = 0.0 if off_excluded else 100.0 * (current.off_peg_days - hybrid.off_peg_days) / current.off_peg_days
    return Improvement(pct_peak, pct_off, excluded, off_excluded)


def improvement_arrays(current: RegimeOutcomes, hybrid: RegimeOutcomes, epsilon: float = DEFAULT_EPSILON):
    """Vectorised :func:`percent_improvement`; returns (pct_peak, pct_off, included, off_included)."""
    pc, ph = current.peak_dev, hybrid.peak_dev
    oc = current.off_peg_days.astype(float)
    oh = hybrid.off_peg_days.astype(float)
    included = pc >= epsilon
    off_included = oc > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pct_peak = np.where(included, 100.0 * (pc - ph) / pc, 0.0)
        pct_off = np.where(off_included, 100.0 * (oc - oh) / oc, 0.0)
    return pct_peak, pct_off, included, off_included


def _mean_sd(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(x) / n
    if n == 1:
        return mean, 0.0
    d = x - mean
    return mean, math.sqrt(math.fsum(d * d) / (n - 1))


@dataclass(frozen=True)
class PairedSummary:
    coin_id: str
    trials: int
    included: int
    excluded: int
    mean_pct_peak: float
    sd_pct_peak: float
    included_off: int
    mean_pct_off: float
    sd_pct_off: float
    mean_peak_current: float
    mean_peak_hybrid: float
    p95_peak_current: float
    p95_peak_hybrid: float
    mean_off_current: float
    mean_off_hybrid: float
    median_off_current: float
    median_off_hybrid: float

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(result, epsilon: float = DEFAULT_EPSILON, coin_id: str | None = None) -> PairedSummary:
    """Improvement and regime statistics over paired outcomes.

    ``result`` is a :class:`SimulationResult` or a sequence of
    ``(current, hybrid)`` :class:`TrialOutcome` pairs.  Improvement means
    and sample SDs use only included trials; regime-level statistics use
    every trial.
    """
    if isinstance(result, SimulationResult):
        cur, hyb, coin_id = result.current, result.hybrid, coin_id or result.coin_id
    else:
        pairs = list(result)
        if not pairs:
            raise DomainError("summarize needs at least one trial")
        cur = RegimeOutcomes(np.array([c.peak_dev for c, _ in pairs]), np.array([c.off_peg_days for c, _ in pairs]),
                             np.array([c.clamped_days for c, _ in pairs]), "current")
        hyb = RegimeOutcomes(np.array([h.peak_dev for _, h in pairs]), np.array([h.off_peg_days for _, h in pairs]),
                             np.array([h.clamped_days for _, h in pairs]), "hybrid")
    n = len(cur.peak_dev)
    pct_peak, pct_off, inc, inc_off = improvement_arrays(cur, hyb, epsilon)
    if not inc.any():
        warnings.warn(f"{coin_id}: every trial is below the calm-trial threshold {epsilon}", stacklevel=2)
    mp, sp = _mean_sd(pct_peak[inc])
    mo, so = _mean_sd(pct_off[inc_off])
    mean = lambda x: math.fsum(x) / len(x)  # noqa: E731
    return PairedSummary(
        coin_id=coin_id or "",
        trials=n,
        included=int(inc.sum()),
        excluded=int(n - inc.sum()),
        mean_pct_peak=mp,
        sd_pct_peak=sp,
        included_off=int(inc_off.sum()),
        mean_pct_off=mo,
        sd_pct_off=so,
        mean_peak_current=mean(cur.peak_dev),
        mean_peak_hybrid=mean(hyb.peak_dev),
        p95_peak_current=nearest_rank(cur.peak_dev, 95),
        p95_peak_hybrid=nearest_rank(hyb.peak_dev, 95),
        mean_off_current=mean(cur.off_peg_days.astype(float)),
        mean_off_hybrid=mean(hyb.off_peg_days.astype(float)),
        median_off_current=float(np.median(cur.off_peg_days)),
        median_off_hybrid=float(np.median(hyb.off_peg_days)),
    )


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    grid: tuple
    summaries: list
    fixed: dict
    multiplier: float
    hybrid: list  # RegimeOutcomes per grid point, kept for paired tests

    def rows(self) -> list[dict]:
        out = []
        for value, s in zip(self.grid, self.summaries):
            row = {"parameter": self.parameter, "value": value, "multiplier": self.multiplier}
            row.update(self.fixed)
            row.update(s.as_dict())
            out.append(row)
        return out


def sweep_fractions(parameter: str, grid: Sequence[float], fixed: dict | None = None) -> list[HybridFractions]:
    if parameter not in SWEEP_PARAMETERS:
        raise DomainError(f"unknown sweep parameter {parameter!r}")
    grid = list(grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("sweep grid must be strictly increasing")
    fixed = dict(SWEEP_FIXED[parameter] if fixed is None else fixed)
    fixed.pop(parameter, None)
    return [HybridFractions(**{**fixed, parameter: g}) for g in grid]


def sweep(cal: ShockCalibration, cfg: SimConfig, parameter: str, grid: Sequence[float] = DEFAULT_GRID,
          fixed: dict | None = None, m_values: Sequence[float] = MULTIPLIERS, workers: int = 1,
          epsilon: float = DEFAULT_EPSILON) -> list[SweepResult]:
    """One-dimensional sweep of a hybrid fraction for each extreme-day multiplier.

    Every grid point and multiplier uses the same seed, so all variants see
    identical random draws.
    """
    fraction_sets = sweep_fractions(parameter, grid, fixed)
    held = {k: v for k, v in asdict(fraction_sets[0]).items() if k != parameter}
    results = []
    for m in m_values:
        run_cfg = cfg.replace(multiplier=m)
        current, hybrids = run_many(cal, run_cfg, fraction_sets, workers)
        summaries = [
            summarize(SimulationResult(cal.coin_id, current, h, f, m), epsilon)
            for h, f in zip(hybrids, fraction_sets)
        ]
        results.append(SweepResult(parameter, tuple(grid), summaries, held, m, hybrids))
    return results


class PairedTest(NamedTuple):
    lower: float
    upper: float
    mean_diff: float
    t_stat: float
    p_value: float
    violated: bool


def paired_monotonicity(grid: Sequence[float], samples: Sequence[np.ndarray], level: float = 0.01) -> list[PairedTest]:
    """Two-sided paired t-tests between consecutive grid points.

    A step is a violation when the mean decreases and the decrease is
    significant at ``level``.
    """
    out = []
    for (a, xa), (b, xb) in zip(zip(grid, samples), list(zip(grid, samples))[1:]):
        d = np.asarray(xb, dtype=float) - np.asarray(xa, dtype=float)
        mean = math.fsum(d) / len(d)
        # differences constant up to rounding have no sampling spread to test
        if np.ptp(d) <= 64 * np.finfo(float).eps * np.abs(d).max():
            t, p = (0.0, 1.0) if mean == 0 else (math.copysign(math.inf, mean), 0.0)
        else:
            t, p = stats.ttest_1samp(d, 0.0)
            t, p = float(t), float(p)
        out.append(PairedTest(a, b, mean, t, p, bool(mean < 0 and p < level)))
    return out


@dataclass(frozen=True)
class RunEquilibrium:
    hold_value: float
    fire_sale_value: float
    insured: bool
    equilibria: frozenset

    @property
    def run_possible(self) -> bool:
        return "run" in self.equilibria


def dybvig_equilibria(hold_value: float, fire_sale_value: float, insured: bool) -> RunEquilibrium:
    """Equilibria of the two-action deposit game, claims normalised to $1.

    Waiting is an equilibrium when the held asset covers the claim (or the
    claim is insured).  A run is self-fulfilling when an uninsured depositor
    who waits during a run would recover less than the $1 that early
    withdrawers get.
    """
    if hold_value < 0 or fire_sale_value < 0:
        raise DomainError("asset values must be non-negative")
    if fire_sale_value > hold_value:
        raise DomainError("fire-sale value cannot exceed the hold-to-maturity value")
    eq = set()
    if hold_value >= 1.0 or insured:
        eq.add("no-run")
    if not insured and fire_sale_value < 1.0:
        eq.add("run")
    return RunEquilibrium(hold_value, fire_sale_value, insured, frozenset(eq))
