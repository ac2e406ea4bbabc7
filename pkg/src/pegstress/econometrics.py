"""OLS with lagged regressors and the augmented Dickey-Fuller test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats

from .errors import DomainError, InputError, SingularMatrixError

# Peg deviation regressed on contemporaneous and lagged volume / market cap
# plus yesterday's deviation.  Macro series can be appended to this list.
PEG_MODEL_TERMS: list[tuple[str, int]] = [
    ("total_volume", 0),
    ("market_cap", 0),
    ("peg_deviation", 1),
    ("total_volume", 1),
    ("market_cap", 1),
]

TERM_LABELS = {
    "const": "Constant",
    "total_volume": "Total Volume",
    "market_cap": "Market Cap",
    "peg_deviation_lag1": "PegDev (lag1)",
    "total_volume_lag1": "Volume (lag1)",
    "market_cap_lag1": "M.Cap (lag1)",
}

# Asymptotic Dickey-Fuller critical values at 1%, 5%, 10%.
ADF_CRITICAL_VALUES = {
    "n": {"1%": -2.58, "5%": -1.95, "10%": -1.62},
    "c": {"1%": -3.43, "5%": -2.86, "10%": -2.57},
    "ct": {"1%": -3.96, "5%": -3.41, "10%": -3.12},
}


def significance_code(p: float) -> str:
    if p is None or not (p == p):  # NaN
        return "n.s."
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "n.s."


def term_name(column: str, lag: int) -> str:
    return column if lag == 0 else f"{column}_lag{lag}"


@dataclass(frozen=True)
class DesignMatrix:
    """Named regressor columns over a row index, plus the listwise-deletion mask."""

    names: list[str]
    values: np.ndarray          # shape (rows, columns), NaN where unavailable
    mask: np.ndarray            # True = row used in the fit
    index: np.ndarray | None = None
    response: np.ndarray | None = None
    response_name: str | None = None

    @property
    def nobs(self) -> int:
        return int(self.mask.sum())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def build_lagged_design(panel: pd.DataFrame, spec: Sequence[tuple[str, int]],
                        response: str | None = None) -> DesignMatrix:
    """Build lag-shifted columns from a daily frame.

    The lag-l column at row t holds the value at t-l.  Rows where any
    regressor (or the response, if given) is null are masked out, which
    also removes the first max-lag rows.
    """
    cols, names = [], []
    for column, lag in spec:
        if lag < 0:
            raise DomainError(f"negative lag for {column}")
        if column not in panel.columns:
            raise InputError(f"design column {column!r} not in panel")
        cols.append(panel[column].shift(lag).to_numpy(dtype=float))
        names.append(term_name(column, lag))
    values = np.column_stack(cols) if cols else np.empty((len(panel), 0))
    mask = ~np.isnan(values).any(axis=1)
    y = None
    if response is not None:
        if response not in panel.columns:
            raise InputError(f"response column {response!r} not in panel")
        y = panel[response].to_numpy(dtype=float)
        mask &= ~np.isnan(y)
    if not mask.any():
        raise InputError("every row of the design is masked")
    return DesignMatrix(names, values, mask, panel.index.to_numpy(), y, response)


class Coefficient(NamedTuple):
    value: float
    std_error: float
    t_stat: float
    p_value: float
    code: str


@dataclass(frozen=True)
class OlsResult:
    names: list[str]
    params: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    r_squared: float
    nobs: int
    df_resid: int

    def __getitem__(self, name: str) -> Coefficient:
        i = self.names.index(name)
        p = float(self.p_values[i])
        return Coefficient(float(self.params[i]), float(self.std_errors[i]),
                           float(self.t_stats[i]), p, significance_code(p))

    @property
    def rss(self) -> float:
        return math.fsum(self.residuals ** 2)

    def to_dict(self) -> dict:
        return {
            "nobs": self.nobs,
            "df_resid": self.df_resid,
            "r_squared": self.r_squared,
            "coefficients": {
                n: dict(zip(Coefficient._fields, self[n])) for n in self.names
            },
        }


def _rank_check(Xs: np.ndarray, names: list[str]) -> None:
    _, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(Xs.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0.0)
    rank = int((diag > tol).sum())
    if rank < Xs.shape[1]:
        raise SingularMatrixError([names[i] for i in sorted(piv[rank:])])


def ols_fit(y, X, names: Sequence[str] | None = None, intercept: bool = True) -> OlsResult:
    """Least squares via QR of the column-equilibrated design.

    ``X`` is a :class:`DesignMatrix` (its mask and optional response are
    honoured) or a plain 2-D array.  Standard errors use
    ``RSS / (n - p)`` and p-values are two-sided Student-t.
    """
    if isinstance(X, DesignMatrix):
        names = list(X.names)
        mask = X.mask
        if y is None:
            y = X.response
        Xv = X.values[mask]
        yv = np.asarray(y, dtype=float)[mask]
    else:
        Xv = np.asarray(X, dtype=float)
        if Xv.ndim == 1:
            Xv = Xv[:, None]
        yv = np.asarray(y, dtype=float)
        names = list(names) if names is not None else [f"x{i}" for i in range(Xv.shape[1])]
    if intercept:
        Xv = np.column_stack([np.ones(len(Xv)), Xv])
        names = ["const"] + names
    n, p = Xv.shape
    if len(yv) != n:
        raise InputError("response and design have different row counts")
    if not (np.all(np.isfinite(Xv)) and np.all(np.isfinite(yv))):
        raise InputError("non-finite values in regression inputs")
    if n < p + 1:
        raise InputError(f"need at least {p + 1} rows for {p} regressors, got {n}")

    scale = np.sqrt((Xv * Xv).sum(axis=0))
    zero = scale == 0
    if zero.any():
        raise SingularMatrixError([names[i] for i in np.flatnonzero(zero)])
    Xs = Xv / scale
    _rank_check(Xs, names)

    Q, R = np.linalg.qr(Xs)
    beta = linalg.solve_triangular(R, Q.T @ yv) / scale
    resid = yv - Xv @ beta
    df = n - p
    rss = math.fsum(resid * resid)
    sigma2 = rss / df
    Rinv = linalg.solve_triangular(R, np.eye(p))
    cov_diag = (Rinv * Rinv).sum(axis=1) / scale ** 2
    se = np.sqrt(sigma2 * cov_diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(tvals), df)
    pvals = np.where(np.isnan(tvals), np.nan, pvals)

    centre = yv.mean() if intercept else 0.0
    tss = math.fsum((yv - centre) ** 2)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return OlsResult(names, beta, se, tvals, pvals, resid, r2, n, df)


def regress_peg_deviation(frame: pd.DataFrame, terms=PEG_MODEL_TERMS) -> OlsResult:
    """Fit the daily peg-deviation model on a per-coin panel view."""
    design = build_lagged_design(frame, terms, response="peg_deviation")
    return ols_fit(None, design)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lags: int
    trend: str
    critical_values: dict
    reject: dict
    gamma: float
    nobs: int
    ic: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _adf_design(y: np.ndarray, k: int, trend: str, skip: int):
    """Regressors for Δy_t on [trend terms], y_{t-1}, Δy_{t-1..t-k}.

    ``skip`` rows are dropped from the front so that different lag orders
    can share one estimation sample.
    """
    dy = np.diff(y)
    start = max(k, skip)
    target = dy[start:]
    cols = [y[start:-1]]
    names = ["y_lag1"]
    for i in range(1, k + 1):
        cols.append(dy[start - i:len(dy) - i])
        names.append(f"dy_lag{i}")
    if trend == "ct":
        cols.insert(0, np.arange(1, len(target) + 1, dtype=float))
        names.insert(0, "trend")
    X = np.column_stack(cols)
    return target, X, names


def adf_test(y, k: int | None = 1, trend: str = "c", autolag: str | None = None,
             maxlag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller unit-root test.

    ``trend`` is ``"n"`` (none), ``"c"`` (constant) or ``"ct"`` (constant
    and linear trend).  With ``autolag="aic"`` or ``"bic"`` the lag order
    is chosen over 0..maxlag on a common sample, then the test is refit on
    the full sample at the chosen order.
    """
    if trend not in ADF_CRITICAL_VALUES:
        raise DomainError(f"unknown deterministic spec {trend!r}")
    y = np.asarray(y, dtype=float)
    y = y[~np.isnan(y)]
    n = len(y)
    if autolag is not None:
        if autolag not in ("aic", "bic"):
            raise DomainError(f"unknown information criterion {autolag!r}")
        if maxlag is None:
            maxlag = int(math.ceil(12.0 * (n / 100.0) ** 0.25))
        maxlag = min(maxlag, n // 2 - 12)
        if maxlag < 0:
            raise InputError(f"series of length {n} too short for ADF")
        best = None
        for lag in range(maxlag + 1):
            target, X, names = _adf_design(y, lag, trend, maxlag)
            res = ols_fit(target, X, names, intercept=trend != "n")
            m = res.nobs
            penalty = 2.0 * len(res.names) if autolag == "aic" else len(res.names) * math.log(m)
            crit = m * math.log(res.rss / m) + penalty
            if best is None or crit < best[0]:
                best = (crit, lag)
        k = best[1]
    if k is None or k < 0:
        raise DomainError("lag order must be non-negative")
    if n <= k + 10:
        raise InputError(f"series of length {n} too short for ADF with {k} lags")
    target, X, names = _adf_design(y, k, trend, 0)
    res = ols_fit(target, X, names, intercept=trend != "n")
    coef = res["y_lag1"]
    crit = ADF_CRITICAL_VALUES[trend]
    reject = {level: bool(coef.t_stat < cv) for level, cv in crit.items()}
    return AdfResult(coef.t_stat, k, trend, dict(crit), reject, coef.value, res.nobs, autolag)
