"""Run configuration: one JSON file merged over built-in defaults.

Relative data paths resolve against the directory holding the config file.
The default config path can be set with ``PEGSTRESS_CONFIG``; otherwise
the bundled sample configuration is used.
"""

from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .analysis import DEFAULT_GRID, SWEEP_FIXED
from .calibration import CalibrationSettings, HybridFractions
from .econometrics import PEG_MODEL_TERMS
from .errors import DomainError, InputError
from .ingest import DEFAULT_HEADER_ALIASES
from .simulator import MULTIPLIERS, SimConfig, horizon_days

ENV_VAR = "PEGSTRESS_CONFIG"
BUNDLED_CONFIG = Path(__file__).parent / "data" / "sample_config.json"

DEFAULTS: dict = {
    "coins": ["usdc", "usdt", "dai"],
    "data": {"coins": {}, "macro": {}, "failed_banks": None, "bank_totals": None},
    "header_aliases": DEFAULT_HEADER_ALIASES,
    "window": {"start": None, "end": None},
    "metrics": {
        "off_peg_tolerance": 0.001,
        "exact_peg_tolerance": 5e-5,
        "volatility_windows": [7, 30],
        "ddof": 1,
    },
    "regression": {
        "terms": [list(t) for t in PEG_MODEL_TERMS],
        "macro_terms": [],
        "adf_lags": 1,
        "adf_trend": "c",
        "adf_autolag": None,
    },
    "calibration": {
        "event_date": "2023-03-10",
        "frozen_usd": 3.3e9,
        "base_usd": 56.41e9,
        "svb_coins": ["usdc"],
        "assumed_frozen_fraction": 0.01,
        "event_window_days": 3,
        "p_red": 0.001,
        "delta": 1.0,
        "failure_window": [2019, 2025],
        "overrides": {},
    },
    "simulation": {
        "trials": 20000,
        "seed": 20250430,
        "start": "2019-11-01",
        "end": "2025-04-30",
        "days": None,
        "multiplier": 100,
        "off_peg_tolerance": 0.01,
        "fractions": {"f_beta": 0.5, "f_gamma": 0.1, "f_delta": 0.2},
        "noise": True,
        "price_floor": 0.0,
        "channels": {"volume": True, "reserve": True, "redemption": True},
        "mktcap": "mean",
        "block_size": 500,
    },
    "analysis": {"epsilon": 0.01},
    "sweep": {
        "grid": list(DEFAULT_GRID),
        "multipliers": list(MULTIPLIERS),
        "fixed_mode": "per_sweep",
        "fixed": copy.deepcopy(SWEEP_FIXED),
    },
    "figures": True,
    "output_dir": "out",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("header_aliases",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def digest(obj) -> str:
    """SHA-256 of canonical JSON (sorted keys, fixed separators)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    source: Path | None = None

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        if path is None:
            path = os.environ.get(ENV_VAR) or BUNDLED_CONFIG
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
        cfg = cls(_merge(DEFAULTS, user), path.resolve().parent, path)
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "RunConfig":
        cfg = cls(_merge(DEFAULTS, d), Path(base_dir))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        w = self.raw["window"]
        if w["start"] and w["end"] and dt.date.fromisoformat(w["start"]) > dt.date.fromisoformat(w["end"]):
            raise InputError("window start after end")
        if self.raw["sweep"]["fixed_mode"] not in ("per_sweep", "baseline"):
            raise InputError("sweep.fixed_mode must be 'per_sweep' or 'baseline'")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def digest(self) -> str:
        return digest(self.raw)

    def section_digest(self, *keys) -> str:
        return digest({k: self.raw[k] for k in keys})

    def path(self, p) -> Path:
        if p is None:
            raise InputError("data path not configured")
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def coin_path(self, coin: str) -> Path:
        paths = self.raw["data"]["coins"]
        if coin not in paths:
            raise InputError(f"no data path configured for coin {coin!r}")
        return self.path(paths[coin])

    @property
    def window(self):
        w = self.raw["window"]
        conv = lambda s: dt.date.fromisoformat(s) if s else None  # noqa: E731
        return conv(w["start"]), conv(w["end"])

    @property
    def coins(self) -> list[str]:
        return list(self.raw["coins"])

    def calibration_settings(self) -> CalibrationSettings:
        c = self.raw["calibration"]
        return CalibrationSettings(
            event_date=dt.date.fromisoformat(c["event_date"]),
            frozen_usd=float(c["frozen_usd"]),
            base_usd=float(c["base_usd"]),
            svb_coins=tuple(c["svb_coins"]),
            assumed_frozen_fraction=float(c["assumed_frozen_fraction"]),
            event_window_days=int(c["event_window_days"]),
            p_red=float(c["p_red"]),
            delta=float(c["delta"]),
            overrides=c["overrides"],
        )

    def sim_config(self, **overrides) -> SimConfig:
        s = self.raw["simulation"]
        days = s["days"] if s["days"] is not None else horizon_days(s["start"], s["end"])
        ch = s["channels"]
        try:
            fractions = HybridFractions(**s["fractions"])
        except (DomainError, TypeError) as exc:
            raise InputError(f"simulation.fractions: {exc}") from None
        kw = dict(
            days=int(days),
            trials=int(s["trials"]),
            seed=int(s["seed"]),
            multiplier=float(s["multiplier"]),
            off_peg_tolerance=float(s["off_peg_tolerance"]),
            fractions=fractions,
            noise_enabled=bool(s["noise"]),
            price_floor=float(s["price_floor"]),
            volume_impact=bool(ch["volume"]),
            reserve_impact=bool(ch["reserve"]),
            redemption_impact=bool(ch["redemption"]),
            block_size=int(s["block_size"]),
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return SimConfig(**kw)
        except DomainError as exc:
            raise InputError(f"simulation config: {exc}") from None

    def sweep_fixed(self, parameter: str) -> dict:
        sw = self.raw["sweep"]
        if sw["fixed_mode"] == "baseline":
            base = dict(self.raw["simulation"]["fractions"])
            base.pop(parameter, None)
            return base
        return dict(sw["fixed"][parameter])
