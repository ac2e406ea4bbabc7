"""Loading and aligning raw market, macro and bank-failure data.

CoinGecko exports (``snapped_at,price,market_cap,total_volume``), FRED
two-column CSVs (``DATE,<SERIES_ID>``) and the FDIC failed-bank list are
read into small immutable containers.  :func:`align_panel` puts everything
on one daily calendar: coin columns stay null on missing days, monthly
macro columns are forward filled, nothing is ever back filled.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

from .errors import InputError, RowError, SchemaError, ValidationError

COIN_FIELDS = ("price", "market_cap", "total_volume")

DEFAULT_HEADER_ALIASES: dict[str, list[str]] = {
    "date": ["snapped_at", "date"],
    "price": ["price"],
    "market_cap": ["market_cap"],
    "total_volume": ["total_volume"],
}

FRED_MISSING = "."

FAILURE_WINDOW = (2019, 2025)

_DATE_PREFIX = re.compile(r"^\d{4}-\d{2}-\d{2}")


class RawRow(NamedTuple):
    date: dt.date
    price: float
    market_cap: float
    total_volume: float


def parse_date(text: str) -> dt.date:
    """Parse ``YYYY-MM-DD`` or a CoinGecko ``snapped_at`` timestamp to a UTC date."""
    s = text.strip()
    if not _DATE_PREFIX.match(s):
        raise ValueError(f"unrecognised date {text!r}")
    if len(s) == 10:
        return dt.date.fromisoformat(s)
    if s.endswith(" UTC"):
        s = s[:-4] + "+00:00"
    elif s.endswith("Z"):
        s = s[:-1] + "+00:00"
    stamp = dt.datetime.fromisoformat(s)
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(dt.timezone.utc)
    return stamp.date()


def _parse_number(text: str) -> float:
    s = text.strip()
    if s == "" or s.lower() in ("nan", "null", "none"):
        return math.nan
    value = float(s)
    if math.isinf(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _resolve_columns(header, aliases, path, required):
    cleaned = [h.strip().replace("\ufeff", "").replace("\xa0", "") for h in header]
    positions = {}
    for canonical in required:
        names = aliases.get(canonical, [canonical])
        for name in names:
            if name in cleaned:
                positions[canonical] = cleaned.index(name)
                break
        else:
            raise SchemaError(canonical, path)
    return positions


def _to_datetime64(dates: Sequence[dt.date]) -> np.ndarray:
    return np.array([np.datetime64(d, "D") for d in dates], dtype="datetime64[D]")


@dataclass(frozen=True)
class CoinSeries:
    """Date-ordered daily observations of one coin (no duplicate dates)."""

    coin_id: str
    dates: np.ndarray
    price: np.ndarray
    market_cap: np.ndarray
    total_volume: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if not (len(self.price) == len(self.market_cap) == len(self.total_volume) == n):
            raise ValidationError("coin series columns differ in length")
        if n > 1 and not np.all(np.diff(self.dates).astype(np.int64) > 0):
            raise ValidationError(f"{self.coin_id}: dates are not strictly increasing")

    @classmethod
    def from_arrays(cls, coin_id, dates, price, market_cap=None, total_volume=None):
        dates = np.asarray(dates, dtype="datetime64[D]")
        n = len(dates)
        nan = np.full(n, np.nan)
        return cls(
            coin_id,
            dates,
            np.asarray(price, dtype=float),
            nan.copy() if market_cap is None else np.asarray(market_cap, dtype=float),
            nan.copy() if total_volume is None else np.asarray(total_volume, dtype=float),
        )

    def __len__(self):
        return len(self.dates)

    def rows(self) -> Iterator[RawRow]:
        for d, p, m, v in zip(self.dates, self.price, self.market_cap, self.total_volume):
            yield RawRow(d.astype(dt.date), float(p), float(m), float(v))

    @property
    def start(self) -> dt.date:
        return self.dates[0].astype(dt.date)

    @property
    def end(self) -> dt.date:
        return self.dates[-1].astype(dt.date)

    @property
    def gaps(self) -> list[dt.date]:
        """Calendar days inside the series span with no observation."""
        if len(self) == 0:
            return []
        full = np.arange(self.dates[0], self.dates[-1] + 1)
        missing = np.setdiff1d(full, self.dates)
        return [d.astype(dt.date) for d in missing]

    def daily(self) -> pd.DataFrame:
        """Frame on the full calendar of the series span; missing days are NaN."""
        frame = pd.DataFrame(
            {"price": self.price, "market_cap": self.market_cap, "total_volume": self.total_volume},
            index=pd.DatetimeIndex(self.dates.astype("datetime64[ns]"), name="date"),
        )
        if len(frame):
            frame = frame.reindex(pd.date_range(frame.index[0], frame.index[-1], freq="D", name="date"))
        return frame

    def window(self, start=None, end=None) -> "CoinSeries":
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return CoinSeries(self.coin_id, self.dates[mask], self.price[mask],
                          self.market_cap[mask], self.total_volume[mask])


def load_coin_csv(path, coin_id: str, aliases: Mapping[str, Sequence[str]] | None = None) -> CoinSeries:
    """Read a CoinGecko-style export into a :class:`CoinSeries`.

    Empty cells are kept as nulls; they are never interpolated.  Raises
    :class:`SchemaError` for a missing column, :class:`RowError` (with the
    1-based file line) for an unparseable or negative number and
    :class:`ValidationError` for repeated dates.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    aliases = {**DEFAULT_HEADER_ALIASES, **(aliases or {})}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        cols = _resolve_columns(header, aliases, path, ("date",) + COIN_FIELDS)
        records = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                day = parse_date(row[cols["date"]])
            except (ValueError, IndexError) as exc:
                raise RowError(line, f"bad date: {exc}", path) from None
            values = []
            for name in COIN_FIELDS:
                try:
                    v = _parse_number(row[cols[name]])
                except (ValueError, IndexError):
                    cell = row[cols[name]] if cols[name] < len(row) else ""
                    raise RowError(line, f"unparseable {name} {cell!r}", path) from None
                if v < 0:
                    raise RowError(line, f"negative {name} {v!r}", path)
                values.append(v)
            records.append((day, *values))

    records.sort(key=lambda r: r[0])
    for a, b in zip(records, records[1:]):
        if a[0] == b[0]:
            raise ValidationError(f"{path}: duplicate date {a[0].isoformat()}")
    if not records:
        return CoinSeries.from_arrays(coin_id, [], [], [], [])
    days, price, mcap, vol = zip(*records)
    return CoinSeries(coin_id, _to_datetime64(days), np.array(price), np.array(mcap), np.array(vol))


def write_coin_csv(series: CoinSeries, path) -> None:
    """Write in CoinGecko export layout (used for the bundled sample data)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snapped_at", "price", "market_cap", "total_volume"])
        for r in series.rows():
            w.writerow([f"{r.date.isoformat()} 00:00:00 UTC", repr(r.price), repr(r.market_cap), repr(r.total_volume)])


@dataclass(frozen=True)
class MacroSeries:
    series_id: str
    frequency: str
    dates: np.ndarray
    values: np.ndarray
    dropped: int = 0

    def __len__(self):
        return len(self.dates)


_SPACING = {"daily": (0, 7), "monthly": (28, 31)}


def load_macro_csv(path, series_id: str, frequency: str = "monthly") -> MacroSeries:
    """Read a FRED ``DATE,<SERIES_ID>`` export; ``"."`` rows are dropped and counted."""
    if frequency not in _SPACING:
        raise InputError(f"unknown frequency {frequency!r}")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    dates, values, dropped = [], [], 0
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and len(header) < 2:
            raise SchemaError("value", path)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            try:
                day = parse_date(row[0])
            except (ValueError, IndexError) as exc:
                raise RowError(line, f"bad date: {exc}", path) from None
            cell = row[1].strip() if len(row) > 1 else ""
            if cell in (FRED_MISSING, ""):
                dropped += 1
                continue
            try:
                v = float(cell)
            except ValueError:
                raise RowError(line, f"unparseable value {cell!r}", path) from None
            dates.append(day)
            values.append(v)
    if not dates:
        raise InputError(f"{path}: no observations")
    for a, b in zip(dates, dates[1:]):
        if b <= a:
            raise ValidationError(f"{path}: dates not monotone at {b.isoformat()}")
    d64 = _to_datetime64(dates)
    if len(d64) > 2:
        spacing = float(np.median(np.diff(d64).astype(np.int64)))
        lo, hi = _SPACING[frequency]
        if not lo <= spacing <= hi:
            warnings.warn(
                f"{series_id}: declared {frequency} but median spacing is {spacing:g} days",
                stacklevel=2,
            )
    return MacroSeries(series_id, frequency, d64, np.array(values, dtype=float), dropped)


@dataclass(frozen=True)
class AlignedPanel:
    """Daily panel.  Coin columns are ``<coin>.<field>``, macro columns ``macro.<id>``."""

    frame: pd.DataFrame
    fill_policy: dict = field(default_factory=dict)

    def coin(self, coin_id: str, with_macros: bool = True) -> pd.DataFrame:
        """Per-coin view with bare field names plus ``peg_deviation``."""
        prefix = f"{coin_id}."
        cols = [c for c in self.frame.columns if c.startswith(prefix)]
        if not cols:
            raise InputError(f"coin {coin_id!r} not in panel")
        out = self.frame[cols].rename(columns=lambda c: c[len(prefix):])
        out["peg_deviation"] = out["price"] - 1.0
        if with_macros:
            for c in self.frame.columns:
                if c.startswith("macro."):
                    out[c[len("macro."):]] = self.frame[c]
        return out

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index_label="date", date_format="%Y-%m-%d", lineterminator="\n")

    @classmethod
    def read_csv(cls, path) -> "AlignedPanel":
        frame = pd.read_csv(path, index_col="date", parse_dates=["date"], float_precision="round_trip")
        frame.index.freq = "D"
        frame = frame.astype(float)
        policy = {c: ("ffill" if c.startswith("macro.") else "none") for c in frame.columns}
        return cls(frame, policy)


def align_panel(coins: Sequence[CoinSeries], macros: Sequence[MacroSeries] = (), start=None, end=None) -> AlignedPanel:
    if not coins:
        raise InputError("align_panel needs at least one coin series")
    if start is None:
        start = min(c.start for c in coins if len(c))
    if end is None:
        end = max(c.end for c in coins if len(c))
    start, end = pd.Timestamp(start), pd.Timestamp(end)
    if start > end:
        raise InputError(f"window start {start.date()} after end {end.date()}")
    index = pd.date_range(start, end, freq="D", name="date")
    columns: dict[str, pd.Series] = {}
    policy: dict[str, str] = {}
    overlap = 0
    for coin in coins:
        daily = coin.daily()
        for name in COIN_FIELDS:
            col = f"{coin.coin_id}.{name}"
            columns[col] = daily[name].reindex(index)
            policy[col] = "none"
        overlap += int(columns[f"{coin.coin_id}.price"].notna().sum())
    if overlap == 0:
        raise InputError(f"no coin observations in window {start.date()}..{end.date()}")
    for m in macros:
        s = pd.Series(m.values, index=pd.DatetimeIndex(m.dates.astype("datetime64[ns]")))
        col = f"macro.{m.series_id}"
        if m.frequency == "monthly":
            # forward fill only: union with the daily index, pad, then slice
            s = s.reindex(s.index.union(index)).ffill().reindex(index)
            policy[col] = "ffill"
        else:
            s = s.reindex(index)
            policy[col] = "none"
        columns[col] = s
    frame = pd.DataFrame(columns, index=index)
    return AlignedPanel(frame, policy)


@dataclass(frozen=True)
class BankFailureTable:
    """Per-year ``(failures, total_banks)`` restricted to the calibration window."""

    years: dict
    skipped: int = 0

    def __post_init__(self):
        for year, (fails, total) in self.years.items():
            if total <= 0:
                raise ValidationError(f"{year}: total_banks must be positive")
            if fails > total:
                raise ValidationError(f"{year}: failures ({fails}) exceed total banks ({total})")

    @property
    def total_failures(self) -> int:
        return sum(f for f, _ in self.years.values())

    @property
    def total_banks(self) -> int:
        return sum(t for _, t in self.years.values())


_FAILURE_DATE_COLUMNS = ["Closing Date", "closing_date", "date"]
_FAILURE_DATE_FORMATS = ("%d-%b-%y", "%d-%b-%Y", "%Y-%m-%d", "%m/%d/%Y", "%m/%d/%y")


def _failure_year(text: str) -> int:
    s = text.strip()
    for fmt in _FAILURE_DATE_FORMATS:
        try:
            return dt.datetime.strptime(s, fmt).year
        except ValueError:
            continue
    raise ValueError(f"cannot extract year from {text!r}")


def _read_text(path: Path) -> str:
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def load_failures(failed_list_path, totals_path, window=FAILURE_WINDOW) -> BankFailureTable:
    """Count FDIC failures per year and pair them with total bank counts.

    Failures dated outside ``window`` are skipped and counted, not rejected.
    """
    failed_list_path, totals_path = Path(failed_list_path), Path(totals_path)
    for p in (failed_list_path, totals_path):
        if not p.is_file():
            raise InputError(f"file not found: {p}")
    lo, hi = window

    totals: dict[int, int] = {}
    reader = csv.reader(_read_text(totals_path).splitlines())
    header = next(reader, None) or []
    cols = _resolve_columns(header, {"year": ["year", "Year"], "total_banks": ["total_banks", "Total Banks"]},
                            totals_path, ("year", "total_banks"))
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            year = int(row[cols["year"]])
            total = int(float(row[cols["total_banks"]]))
        except (ValueError, IndexError):
            raise RowError(line, f"bad totals row {row!r}", totals_path) from None
        if lo <= year <= hi:
            totals[year] = total

    failures = {y: 0 for y in totals}
    skipped = 0
    reader = csv.reader(_read_text(failed_list_path).splitlines())
    header = next(reader, None) or []
    cols = _resolve_columns(header, {"date": _FAILURE_DATE_COLUMNS}, failed_list_path, ("date",))
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            year = _failure_year(row[cols["date"]])
        except (ValueError, IndexError) as exc:
            raise RowError(line, str(exc), failed_list_path) from None
        if not lo <= year <= hi:
            skipped += 1
            continue
        if year not in totals:
            raise ValidationError(f"no total bank count for failure year {year}")
        failures[year] += 1
    return BankFailureTable({y: (failures[y], totals[y]) for y in sorted(totals)}, skipped)
