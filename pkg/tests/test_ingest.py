import datetime as dt

import numpy as np
import pandas as pd
import pytest

from pegstress.errors import InputError, RowError, SchemaError, ValidationError
from pegstress.ingest import (
    AlignedPanel, align_panel, load_coin_csv, load_failures, load_macro_csv, parse_date, write_coin_csv,
)

from conftest import DATA_DIR, make_series, write

HEADER = "snapped_at,price,market_cap,total_volume\n"


def test_parse_date_forms():
    assert parse_date("2023-03-10") == dt.date(2023, 3, 10)
    assert parse_date("2023-03-10 00:00:00 UTC") == dt.date(2023, 3, 10)
    assert parse_date("2023-03-10T00:00:00Z") == dt.date(2023, 3, 10)


def test_three_rows_sorted(tmp_path):
    p = write(tmp_path / "c.csv", HEADER
              + "2023-01-03 00:00:00 UTC,1.001,3,30\n"
              + "2023-01-01 00:00:00 UTC,0.999,1,10\n"
              + "2023-01-02 00:00:00 UTC,1.000,2,20\n")
    s = load_coin_csv(p, "usdc")
    assert len(s) == 3
    assert list(s.dates.astype(str)) == ["2023-01-01", "2023-01-02", "2023-01-03"]
    assert list(s.price) == [0.999, 1.0, 1.001]
    assert list(s.total_volume) == [10, 20, 30]


def test_missing_price_column(tmp_path):
    p = write(tmp_path / "c.csv", "snapped_at,market_cap,total_volume\n2023-01-01,1,1\n")
    with pytest.raises(SchemaError) as e:
        load_coin_csv(p, "usdc")
    assert "price" in str(e.value)


def test_duplicate_date_named(tmp_path):
    p = write(tmp_path / "c.csv", HEADER + "2023-01-01,1,1,1\n2023-01-01 00:00:00 UTC,1,1,1\n")
    with pytest.raises(ValidationError) as e:
        load_coin_csv(p, "usdc")
    assert "2023-01-01" in str(e.value)


def test_unparseable_number_reports_line(tmp_path):
    p = write(tmp_path / "c.csv", HEADER + "2023-01-01,1,1,1\n2023-01-02,abc,1,1\n")
    with pytest.raises(RowError) as e:
        load_coin_csv(p, "usdc")
    assert e.value.line == 3


def test_empty_cells_are_null(tmp_path):
    p = write(tmp_path / "c.csv", HEADER + "2023-01-01,1,1,\n")
    s = load_coin_csv(p, "usdc")
    assert np.isnan(s.total_volume[0])


def test_header_alias(tmp_path):
    p = write(tmp_path / "c.csv", "day,close,mcap,vol\n2023-01-01,1,2,3\n")
    aliases = {"date": ["day"], "price": ["close"], "market_cap": ["mcap"], "total_volume": ["vol"]}
    s = load_coin_csv(p, "x", aliases)
    assert (s.price[0], s.market_cap[0], s.total_volume[0]) == (1, 2, 3)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_coin_csv(tmp_path / "nope.csv", "usdc")


def test_coin_csv_round_trip(tmp_path):
    s = load_coin_csv(DATA_DIR / "usdc.csv", "usdc")
    write_coin_csv(s, tmp_path / "out.csv")
    back = load_coin_csv(tmp_path / "out.csv", "usdc")
    np.testing.assert_array_equal(back.dates, s.dates)
    np.testing.assert_array_equal(back.price, s.price)
    np.testing.assert_array_equal(back.market_cap, s.market_cap)


def test_sample_data_gaps():
    s = load_coin_csv(DATA_DIR / "usdt.csv", "usdt")
    assert len(s.gaps) == 2
    assert len(s) <= 200


def test_macro_sentinel(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,DFF\n2020-01-01,1.55\n2020-02-01,.\n")
    m = load_macro_csv(p, "DFF")
    assert len(m) == 1 and m.dropped == 1
    assert m.values[0] == 1.55


def test_macro_empty(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,DFF\n")
    with pytest.raises(InputError, match="no observations"):
        load_macro_csv(p, "DFF")


def test_macro_non_monotone(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,X\n2020-02-01,1\n2020-01-01,2\n")
    with pytest.raises(ValidationError):
        load_macro_csv(p, "X")


def test_macro_spacing_warning(tmp_path):
    rows = "".join(f"2020-01-{d:02d},{d}\n" for d in range(1, 11))
    p = write(tmp_path / "m.csv", "DATE,X\n" + rows)
    with pytest.warns(UserWarning, match="monthly"):
        m = load_macro_csv(p, "X", "monthly")
    assert len(m) == 10


def test_align_identity():
    s = make_series([1.0, 0.99, 1.01, 1.0])
    panel = align_panel([s], [], s.start, s.end)
    view = panel.coin("usdc")
    np.testing.assert_array_equal(view["price"].to_numpy(), s.price)
    assert len(view) == 4


def test_align_forward_fill_and_no_backfill(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,M2\n2023-03-01,4.33\n2023-04-01,4.5\n")
    m = load_macro_csv(p, "M2", "monthly")
    s = make_series(np.ones(60), start="2023-02-20")
    panel = align_panel([s], [m], "2023-02-20", "2023-04-10")
    col = panel.frame["macro.M2"]
    assert col[pd.Timestamp("2023-03-15")] == 4.33
    assert np.isnan(col[pd.Timestamp("2023-02-28")])
    assert col[pd.Timestamp("2023-04-10")] == 4.5


def test_align_ffill_from_before_window(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,M2\n2023-01-01,7.0\n")
    m = load_macro_csv(p, "M2", "monthly")
    s = make_series(np.ones(5), start="2023-02-01")
    panel = align_panel([s], [m], "2023-02-01", "2023-02-05")
    assert (panel.frame["macro.M2"] == 7.0).all()


def test_align_missing_days_null():
    s = make_series([1.0, 1.0, 1.0])
    s = s.window(end=s.start)  # one observation only
    panel = align_panel([s], [], s.start, s.start + dt.timedelta(days=3))
    assert panel.frame["usdc.price"].isna().sum() == 3


def test_align_no_overlap():
    s = make_series([1.0, 1.0], start="2023-01-01")
    with pytest.raises(InputError):
        align_panel([s], [], "2024-01-01", "2024-02-01")


def test_panel_round_trip(tmp_path):
    p = write(tmp_path / "m.csv", "DATE,M2\n2023-01-01,7.123456789012345\n")
    m = load_macro_csv(p, "M2", "monthly")
    rng = np.random.default_rng(3)
    s = make_series(1 + rng.normal(0, 1e-3, 40), start="2023-01-01",
                    market_cap=rng.uniform(1e9, 2e9, 40), total_volume=rng.uniform(1e7, 1e8, 40))
    panel = align_panel([s], [m])
    panel.to_csv(tmp_path / "panel.csv")
    back = AlignedPanel.read_csv(tmp_path / "panel.csv")
    pd.testing.assert_frame_equal(back.frame, panel.frame, check_exact=True, check_freq=False)
    assert back.fill_policy == panel.fill_policy


def test_failures_counts(tmp_path):
    totals = write(tmp_path / "t.csv", "year,total_banks\n2023,4100\n2024,4000\n")
    rows = ["Bank Name,Closing Date"] + [f"B{i},1{i}-Mar-23" for i in range(5)]
    rows += ["Old,15-Sep-08", "C,01-Feb-24", "D,02-Feb-24"]
    failed = write(tmp_path / "f.csv", "\n".join(rows) + "\n")
    t = load_failures(failed, totals)
    assert t.years[2023] == (5, 4100)
    assert t.years[2024] == (2, 4000)
    assert t.skipped == 1


def test_failures_none(tmp_path):
    totals = write(tmp_path / "t.csv", "year,total_banks\n2023,4100\n")
    failed = write(tmp_path / "f.csv", "Bank Name,Closing Date\n")
    t = load_failures(failed, totals)
    assert t.years == {2023: (0, 4100)}
    assert t.total_failures == 0
