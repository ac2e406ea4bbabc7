"""Command-line entry point.

Subcommands: stats, peg, adf, regress, calibrate, simulate, sweep, report.
Exit codes: 0 success, 1 computation failure, 2 input or configuration
error.  Errors are printed to stderr as a single JSON line.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SWEEP_PARAMETERS, paired_monotonicity, summarize, sweep
from .calibration import HybridFractions, ShockCalibration, calibrate_coin
from .config import RunConfig, digest
from .econometrics import adf_test, build_lagged_design, ols_fit
from .errors import DomainError, InputError, PegStressError
from .ingest import align_panel, load_coin_csv, load_failures, load_macro_csv
from .metrics import coin_descriptives, peg_stats, rolling_volatility
from .simulator import RegimeOutcomes, SimulationResult, run_simulation
from .tables import csv_text, regression_table, text_table

CALIBRATION_SECTIONS = ("data", "window", "header_aliases", "regression", "calibration")


class Outputs:
    """Writes files into the output directory and keeps a hash inventory."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def write(self, name: str, content) -> Path:
        path = self.root / name
        data = content.encode("utf-8") if isinstance(content, str) else content
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return path

    def register(self, name: str) -> None:
        self.files[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, (dt.date,)):
        return o.isoformat()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _coins(args, cfg: RunConfig) -> list[str]:
    if getattr(args, "coins", None):
        return [c.strip().lower() for c in args.coins.split(",") if c.strip()]
    return cfg.coins


def _load_coin(cfg: RunConfig, coin: str):
    series = load_coin_csv(cfg.coin_path(coin), coin, cfg["header_aliases"])
    start, end = cfg.window
    return series.window(start, end)


def _load_macros(cfg: RunConfig):
    out = []
    for sid, spec in cfg["data"]["macro"].items():
        out.append(load_macro_csv(cfg.path(spec["path"]), sid, spec.get("frequency", "monthly")))
    return out


def _regress(cfg: RunConfig, series, macros):
    start, end = cfg.window
    panel = align_panel([series], macros, start or series.start, end or series.end)
    frame = panel.coin(series.coin_id)
    reg = cfg["regression"]
    terms = [tuple(t) for t in reg["terms"]] + [tuple(t) for t in reg["macro_terms"]]
    design = build_lagged_design(frame, terms, response="peg_deviation")
    return ols_fit(None, design)


# -- commands ---------------------------------------------------------------

def cmd_stats(args, cfg, out: Outputs):
    ddof = int(cfg["metrics"]["ddof"])
    rows, long_rows, blob = [], [], {}
    for coin in _coins(args, cfg):
        d = coin_descriptives(_load_coin(cfg, coin), ddof)
        blob[coin] = {k: v.as_dict() for k, v in d.items()}
        rows.append([coin.upper(), d["price"].mean, d["price"].std, d["market_cap"].mean,
                     d["market_cap"].std, d["total_volume"].mean])
        for var, s in d.items():
            long_rows.append([coin, var, s.mean, s.median, s.std, s.min, s.max, s.range, s.count])
    headers = ["Coin", "Price Mean", "Price Std", "Market Cap Mean", "Market Cap Std", "Volume Mean"]
    text = text_table(headers, rows, "Descriptive statistics")
    out.write("descriptives.txt", text)
    out.write("descriptives.csv", csv_text(["coin", "variable", "mean", "median", "std", "min", "max", "range", "count"],
                                     long_rows))
    out.write_json("descriptives.json", blob)
    return text


def _peg_tables(args, cfg):
    m = cfg["metrics"]
    windows = [int(w) for w in m["volatility_windows"]]
    t2, t3, blob = [], [], {}
    for coin in _coins(args, cfg):
        series = _load_coin(cfg, coin)
        ps = peg_stats(series, m["off_peg_tolerance"], m["exact_peg_tolerance"])
        vols = {w: rolling_volatility(series, w).mean() for w in windows}
        blob[coin] = {"peg": ps.as_dict(), "rolling_volatility": {str(w): v for w, v in vols.items()}}
        t2.append([coin.upper(), ps.avg_abs_deviation, ps.price_std, ps.max_abs_deviation,
                   100 * ps.off_peg_day_share, 100 * ps.exact_peg_share, ps.longest_on_peg_run])
        t3.append([coin.upper()] + [100 * vols[w] for w in windows])
    h2 = ["Coin", "Avg Abs Deviation", "Std Dev (Price)", "Max Deviation", "Off-Peg Days (%)",
          "At-Peg Days (%)", "Longest On-Peg Run"]
    h3 = ["Coin"] + [f"Avg sigma_{w} (%)" for w in windows]
    return h2, t2, h3, t3, blob


def cmd_peg(args, cfg, out: Outputs):
    h2, t2, h3, t3, blob = _peg_tables(args, cfg)
    m = cfg["metrics"]
    text = (text_table(h2, t2, f"Peg deviation (off-peg tolerance {m['off_peg_tolerance']}, "
                               f"at-peg tolerance {m['exact_peg_tolerance']})")
            + "\n" + text_table(h3, t3, "Average rolling volatility"))
    out.write("peg_stats.csv", csv_text(h2, t2))
    out.write("volatility.csv", csv_text(h3, t3))
    out.write("peg.txt", text)
    out.write_json("peg.json", blob)
    return text


def cmd_adf(args, cfg, out: Outputs):
    reg = cfg["regression"]
    lags = args.lags if args.lags is not None else reg["adf_lags"]
    trend = args.trend or reg["adf_trend"]
    autolag = args.autolag or reg["adf_autolag"]
    rows, blob = [], {}
    for coin in _coins(args, cfg):
        series = _load_coin(cfg, coin)
        res = adf_test(series.price, k=lags, trend=trend, autolag=autolag)
        blob[coin] = res.to_dict()
        rows.append([coin.upper(), res.statistic, res.lags, res.nobs, res.critical_values["1%"],
                     res.critical_values["5%"], "yes" if res.reject["1%"] else "no",
                     "yes" if res.reject["5%"] else "no"])
    headers = ["Coin", "ADF stat", "Lags", "Obs", "CV 1%", "CV 5%", "Reject 1%", "Reject 5%"]
    text = text_table(headers, rows, f"Augmented Dickey-Fuller (deterministic terms: {trend})")
    out.write("adf.txt", text)
    out.write("adf.csv", csv_text(headers, rows))
    out.write_json("adf.json", blob)
    return text


def cmd_regress(args, cfg, out: Outputs):
    macros = _load_macros(cfg)
    results = {coin: _regress(cfg, _load_coin(cfg, coin), macros) for coin in _coins(args, cfg)}
    headers, rows = regression_table(results)
    text = text_table(headers, rows, "OLS: daily peg deviation (*** p<0.001, ** p<0.01, * p<0.05)")
    out.write("regression.txt", text)
    out.write("regression.csv", csv_text(headers, rows))
    out.write_json("regress.json", {c: r.to_dict() for c, r in results.items()})
    return text


def cmd_calibrate(args, cfg, out: Outputs):
    macros = _load_macros(cfg)
    failures = load_failures(cfg.path(cfg["data"]["failed_banks"]), cfg.path(cfg["data"]["bank_totals"]),
                             tuple(cfg["calibration"]["failure_window"]))
    settings = cfg.calibration_settings()
    cals = {}
    for coin in _coins(args, cfg):
        series = _load_coin(cfg, coin)
        cals[coin] = calibrate_coin(series, _regress(cfg, series, macros), failures, settings)
    blob = {
        "config_digest": cfg.section_digest(*CALIBRATION_SECTIONS),
        "failures_skipped_outside_window": failures.skipped,
        "coins": {c: cal.to_dict() for c, cal in cals.items()},
    }
    out.write_json("calibration.json", blob)
    rows = [[name] + [cals[c].to_dict()["parameters"][name]["value"] for c in cals]
            for name in cals[next(iter(cals))].to_dict()["parameters"]]
    text = text_table(["Parameter"] + [c.upper() for c in cals], rows, "Shock calibration")
    out.write("calibration.txt", text)
    return text


def _read_calibration(args, cfg, out: Outputs):
    path = Path(args.calibration) if getattr(args, "calibration", None) else out.root / "calibration.json"
    if not path.is_file():
        raise InputError(f"calibration file not found: {path} (run 'calibrate' first)")
    raw = path.read_bytes()
    try:
        blob = json.loads(raw)
        cals = {c: ShockCalibration.from_dict(d) for c, d in blob["coins"].items()}
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed calibration file ({exc})") from None
    if blob.get("config_digest") != cfg.section_digest(*CALIBRATION_SECTIONS):
        print(f"pegstress: warning: {path.name} was produced from a different configuration", file=sys.stderr)
    return cals, hashlib.sha256(raw).hexdigest()


def _sim_config(args, cfg, coin=None):
    fractions = None
    if getattr(args, "fractions", None):
        try:
            fb, fg, fd = (float(x) for x in args.fractions.split(","))
        except ValueError:
            raise InputError("--fractions expects three comma-separated numbers") from None
        try:
            fractions = HybridFractions(fb, fg, fd)
        except DomainError as exc:
            raise InputError(f"--fractions: {exc}") from None
    sim = cfg.sim_config(trials=getattr(args, "trials", None), days=getattr(args, "days", None),
                         seed=args.seed, multiplier=getattr(args, "multiplier", None), fractions=fractions)
    if getattr(args, "no_noise", False):
        sim = sim.replace(noise_enabled=False)
    if coin is not None and cfg["simulation"]["mktcap"] == "replay":
        mc = _load_coin(cfg, coin).daily()["market_cap"].ffill().dropna().to_numpy()
        if len(mc) == 0:
            raise InputError(f"{coin}: no market cap history to replay")
        sim = sim.replace(mktcap_path=tuple(np.resize(mc, sim.days).tolist()))
    return sim


def _summary_table(summaries):
    headers = ["Coin", "Mean %dPeak", "SD", "Mean %dOff", "SD", "E[Peak] cur", "E[Peak] hyb",
               "P95 Peak cur", "P95 Peak hyb", "Mean Off cur", "Mean Off hyb", "Included", "Trials"]
    rows = [[s.coin_id.upper(), s.mean_pct_peak, s.sd_pct_peak, s.mean_pct_off, s.sd_pct_off,
             s.mean_peak_current, s.mean_peak_hybrid, s.p95_peak_current, s.p95_peak_hybrid,
             s.mean_off_current, s.mean_off_hybrid, s.included, s.trials] for s in summaries]
    return headers, rows


def cmd_simulate(args, cfg, out: Outputs):
    cals, cal_digest = _read_calibration(args, cfg, out)
    epsilon = float(cfg["analysis"]["epsilon"])
    summaries = []
    sim = None
    for coin in _coins(args, cfg):
        if coin not in cals:
            raise InputError(f"coin {coin!r} missing from calibration file")
        sim = _sim_config(args, cfg, coin)
        result = run_simulation(cals[coin], sim, workers=args.workers)
        out.write(f"outcomes_{coin}.csv", result.to_csv())
        s = summarize(result, epsilon)
        summaries.append(s)
        out.write_json(f"summary_{coin}.json", {
            "summary": s.as_dict(),
            "config": {"days": sim.days, "trials": sim.trials, "seed": sim.seed, "multiplier": sim.multiplier,
                       "fractions": sim.fractions.as_tuple(), "noise": sim.noise_enabled,
                       "mean_reversion": "alpha*(1 - P_t)"},
        })
    headers, rows = _summary_table(summaries)
    text = text_table(headers, rows, "Monte Carlo summary (hybrid vs current)")
    out.write("mc_summary.txt", text)
    out.write("mc_summary.csv", csv_text(headers, rows))
    return text, {"calibration_digest": cal_digest, "seed": sim.seed if sim else None}


def cmd_sweep(args, cfg, out: Outputs):
    cals, cal_digest = _read_calibration(args, cfg, out)
    epsilon = float(cfg["analysis"]["epsilon"])
    params = SWEEP_PARAMETERS if args.param == "all" else (args.param,)
    grid = [float(x) for x in args.grid.split(",")] if args.grid else cfg["sweep"]["grid"]
    ms = [float(x) for x in args.multipliers.split(",")] if args.multipliers else cfg["sweep"]["multipliers"]
    texts = []
    sim = None
    for param in params:
        combined = {}
        for coin in _coins(args, cfg):
            if coin not in cals:
                raise InputError(f"coin {coin!r} missing from calibration file")
            sim = _sim_config(args, cfg, coin)
            results = sweep(cals[coin], sim, param, grid, cfg.sweep_fixed(param), ms, args.workers, epsilon)
            rows = [r for res in results for r in res.rows()]
            headers = list(rows[0])
            out.write(f"sweep_{param}_{coin}.csv", csv_text(headers, [[r[h] for h in headers] for r in rows]))
            combined[coin] = [
                {"multiplier": res.multiplier, "fixed": res.fixed, "grid": list(res.grid),
                 "summaries": [s.as_dict() for s in res.summaries],
                 "monotonicity": [t._asdict() for t in paired_monotonicity(
                     res.grid, [h.peak_dev for h in res.hybrid])]}
                for res in results
            ]
            t_rows = [[f"{res.multiplier:g}", g, s.mean_pct_peak, s.mean_pct_off, s.mean_peak_hybrid]
                      for res in results for g, s in zip(res.grid, res.summaries)]
            texts.append(text_table(["M", param, "Mean %dPeak", "Mean %dOff", "E[Peak] hyb"], t_rows,
                                    f"Sweep of {param} for {coin.upper()}"))
        out.write_json(f"sweep_{param}.json", combined)
    text = "\n".join(texts)
    out.write(f"sweep_{args.param}.txt", text)
    return text, {"calibration_digest": cal_digest, "seed": sim.seed if sim else None}


def _read_outcomes(path: Path, coin: str) -> SimulationResult:
    import csv
    cur = {"p": [], "o": [], "c": []}
    hyb = {"p": [], "o": [], "c": []}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            tgt = cur if row["regime"] == "current" else hyb
            tgt["p"].append(float(row["peak_dev"]))
            tgt["o"].append(int(row["off_peg_days"]))
            tgt["c"].append(int(row["clamped_days"]))
    mk = lambda d, r: RegimeOutcomes(np.array(d["p"]), np.array(d["o"]), np.array(d["c"]), r)  # noqa: E731
    return SimulationResult(coin, mk(cur, "current"), mk(hyb, "hybrid"), None, None)


def cmd_report(args, cfg, out: Outputs):
    from .analysis import improvement_arrays
    from .plotting import deviation_figure, improvement_boxplot

    h2, t2, h3, t3, _ = _peg_tables(args, cfg)
    macros = _load_macros(cfg)
    coins = _coins(args, cfg)
    series = {c: _load_coin(cfg, c) for c in coins}
    regs = {c: _regress(cfg, series[c], macros) for c in coins}
    h4, t4 = regression_table(regs)
    parts = [text_table(h2, t2, "Peg deviation"), text_table(h3, t3, "Average rolling volatility (%)"),
             text_table(h4, t4, "OLS: daily peg deviation")]

    epsilon = float(cfg["analysis"]["epsilon"])
    results = {c: _read_outcomes(out.root / f"outcomes_{c}.csv", c)
               for c in coins if (out.root / f"outcomes_{c}.csv").is_file()}
    if results:
        h6, t6 = _summary_table([summarize(r, epsilon) for r in results.values()])
        parts.append(text_table(h6, t6, "Monte Carlo summary"))
    else:
        parts.append("Monte Carlo summary: no outcomes found (run 'simulate' first)\n")

    if cfg["figures"] and not args.no_figures:
        for c in coins:
            name = f"deviation_{c}.svg"
            deviation_figure(series[c], out.root / name)
            out.register(name)
        if results:
            samples = {}
            for c, r in results.items():
                pct, _, inc, _ = improvement_arrays(r.current, r.hybrid, epsilon)
                samples[c] = pct[inc]
            stats = improvement_boxplot(samples, out.root / "peak_improvement_boxplot.svg")
            out.register("peak_improvement_boxplot.svg")
            out.write_json("boxplot_stats.json", [
                {"label": s["label"], "q1": s["q1"], "med": s["med"], "q3": s["q3"],
                 "whislo": s["whislo"], "whishi": s["whishi"]} for s in stats])
    text = "\n".join(parts)
    out.write("report.txt", text)
    return text


COMMANDS = {
    "stats": cmd_stats, "peg": cmd_peg, "adf": cmd_adf, "regress": cmd_regress,
    "calibrate": cmd_calibrate, "simulate": cmd_simulate, "sweep": cmd_sweep, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="simulation seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes")

    parser = argparse.ArgumentParser(prog="pegstress", parents=[common],
                                     description="Stablecoin peg statistics and paired Monte Carlo stress tests.")
    parser.add_argument("--version", action="version", version=f"pegstress {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--coins", "--coin", dest="coins", help="comma-separated coin ids (default: all configured)")
        return p

    add("stats", "descriptive statistics")
    add("peg", "peg deviation and rolling volatility")
    p = add("adf", "augmented Dickey-Fuller test")
    p.add_argument("--lags", type=int)
    p.add_argument("--trend", choices=["n", "c", "ct"])
    p.add_argument("--autolag", choices=["aic", "bic"])
    add("regress", "peg-deviation regression")
    add("calibrate", "derive simulation parameters")
    for name, help_ in (("simulate", "paired Monte Carlo run"), ("sweep", "hybrid-fraction sensitivity sweep")):
        p = add(name, help_)
        p.add_argument("--calibration", help="calibration JSON (default: <out>/calibration.json)")
        p.add_argument("--trials", type=int)
        p.add_argument("--days", type=int)
        p.add_argument("--no-noise", action="store_true")
        if name == "simulate":
            p.add_argument("--multiplier", type=float)
            p.add_argument("--fractions", help="f_beta,f_gamma,f_delta")
        else:
            p.add_argument("--param", required=True, choices=list(SWEEP_PARAMETERS) + ["all"])
            p.add_argument("--grid", help="comma-separated grid values")
            p.add_argument("--multipliers", help="comma-separated extreme-day multipliers")
    p = add("report", "render tables and figures")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("out", None), ("seed", None), ("workers", 1)):
        if not hasattr(args, name):
            setattr(args, name, default)
    started = dt.datetime.now(dt.timezone.utc)
    try:
        cfg = RunConfig.load(args.config)
        out = Outputs(Path(args.out or cfg["output_dir"]))
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = COMMANDS[args.command](args, cfg, out)
        extra = {}
        if isinstance(result, tuple):
            result, extra = result
        manifest = {
            "tool": "pegstress",
            "version": __version__,
            "command": args.command,
            "argv": list(argv) if argv is not None else sys.argv[1:],
            "config_digest": cfg.digest,
            "calibration_digest": extra.get("calibration_digest"),
            "seed": extra.get("seed"),
            "started": started.isoformat(),
            "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
            "outputs": dict(sorted(out.files.items())),
            "outputs_digest": digest(out.files),
        }
        (out.root / f"manifest_{args.command}.json").write_text(json.dumps(manifest, indent=2) + "\n")
        sys.stdout.write(result)
        return 0
    except InputError as exc:
        _error(type(exc).__name__, str(exc))
        return 2
    except PegStressError as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    except OSError as exc:
        _error(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
