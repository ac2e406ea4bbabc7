"""Regenerate the synthetic sample dataset bundled with the package.

The files mimic the layouts of CoinGecko, FRED and FDIC exports but the
numbers are simulated; they exist so the CLI and tests run offline.

    python3 scripts/make_sample_data.py [outdir]
"""

import datetime as dt
import json
import sys
from pathlib import Path

import numpy as np

START = dt.date(2022, 12, 1)
DAYS = 200
EVENT = dt.date(2023, 3, 10)

COINS = {
    # phi, noise sd, log-volume mean, market cap, scripted event prices
    "usdc": (0.70, 0.0004, np.log(5.0e9), 43.0e9, {0: 0.90, 1: 0.87, 2: 0.92, 3: 0.975, 4: 0.993}),
    "usdt": (0.38, 0.0003, np.log(2.6e10), 70.0e9, {1: 0.997, 2: 0.9985}),
    "dai": (0.78, 0.0006, np.log(3.0e8), 5.5e9, {1: 0.92, 2: 0.95, 3: 0.985}),
}
# calendar days with no row at all, and days with an empty volume cell
GAPS = {"usdc": [20], "usdt": [12, 13], "dai": [30]}
NULL_VOLUME = {"usdt": [40]}


def coin_rows(rng, coin):
    phi, sd, mu_v, mcap, event = COINS[coin]
    ev = (EVENT - START).days
    dev = 0.0
    rows = []
    for i in range(DAYS):
        day = START + dt.timedelta(days=i)
        dev = phi * dev + rng.normal(0.0, sd)
        if i - ev in event:
            dev = event[i - ev] - 1.0
        spike = 6.0 if 0 <= i - ev <= 2 else 1.0
        volume = float(np.exp(mu_v + rng.normal(0.0, 0.35))) * spike
        cap = mcap * (1.0 - 0.0005 * i) * (1.0 + rng.normal(0.0, 0.003))
        if i in GAPS.get(coin, []):
            continue
        vol_cell = "" if i in NULL_VOLUME.get(coin, []) else f"{volume:.2f}"
        rows.append(f"{day.isoformat()} 00:00:00 UTC,{1.0 + dev:.6f},{cap:.2f},{vol_cell}")
    return rows


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20230310)
    for coin in COINS:
        lines = ["snapped_at,price,market_cap,total_volume"] + coin_rows(rng, coin)
        (out / f"{coin}.csv").write_text("\n".join(lines) + "\n")

    # effective fed funds, daily with FRED-style "." holes on some days
    dff = ["observation_date,DFF"]
    rate = 4.33
    for i in range(DAYS):
        day = START + dt.timedelta(days=i)
        if i in (14, 63, 120):
            rate += 0.25
        dff.append(f"{day.isoformat()},{'.' if day.weekday() == 6 and i % 3 == 0 else f'{rate:.2f}'}")
    (out / "dff.csv").write_text("\n".join(dff) + "\n")

    m2 = ["observation_date,M2REAL"]
    level = 7060.0
    for m in range(11, 19):
        y, mo = 2022 + (m - 1) // 12, (m - 1) % 12 + 1
        level -= 18.0 + rng.normal(0.0, 4.0)
        m2.append(f"{y}-{mo:02d}-01,{level:.1f}")
    (out / "m2real.csv").write_text("\n".join(m2) + "\n")

    totals = {2019: 5177, 2020: 5002, 2021: 4839, 2022: 4706, 2023: 4587, 2024: 4487, 2025: 4450}
    (out / "bank_totals.csv").write_text(
        "year,total_banks\n" + "".join(f"{y},{n}\n" for y, n in totals.items()))
    failures = {2008: 1, 2019: 4, 2020: 4, 2023: 5, 2024: 2, 2025: 1}
    rows = ["Bank Name,City,State,Cert,Acquiring Institution,Closing Date,Fund"]
    k = 0
    for year, n in failures.items():
        for j in range(n):
            k += 1
            d = dt.date(year, 1 + (j * 3) % 12, 10 + j)
            rows.append(f"Sample Bank {k},Springfield,XX,{10000 + k},Other Bank,{d.strftime('%d-%b-%y')},{10500 + k}")
    (out / "failed_banks.csv").write_text("\n".join(rows) + "\n")

    config = {
        "coins": list(COINS),
        "data": {
            "coins": {c: f"{c}.csv" for c in COINS},
            "macro": {"DFF": {"path": "dff.csv", "frequency": "daily"},
                      "M2REAL": {"path": "m2real.csv", "frequency": "monthly"}},
            "failed_banks": "failed_banks.csv",
            "bank_totals": "bank_totals.csv",
        },
        "window": {"start": START.isoformat(), "end": (START + dt.timedelta(days=DAYS - 1)).isoformat()},
    }
    (out / "sample_config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "pegstress" / "data"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
