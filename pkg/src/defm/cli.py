"""Command-line surface: generate, train-predict, long-term, benchmark, plot.

Every command takes an optional YAML config file (sections named after
the commands) plus flags; flags beat the file, the file beats built-in
defaults. The root seed comes from --seed, then the file, then the
DEFM_SEED environment variable, then 0. Sub-seeds are derived from the
root seed with numpy's SeedSequence over [root, cell_index, case_index]
so any grid cell can be reproduced in isolation.

All outputs are deterministic for a fixed config and seed: CSV floats
use shortest round-trip formatting and the SVG is written without a
creation date.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .baselines import forecast_ar, forecast_hes, forecast_ma
from .embedding import SeriesMatrix
from .forecaster import DefmForecaster, LongTermPlan, predict_long_term
from .lorenz import LorenzConfig, SwitchSchedule, add_noise, integrate_lorenz, sample_cases
from .metrics import ScorePair, aggregate_scores, pcc, rmse


def derive_seed(root: int, *parts: int) -> int:
    """Documented splitting rule: SeedSequence over [root, *parts]."""
    return int(np.random.SeedSequence([int(root), *[int(p) for p in parts]]).generate_state(1)[0])


def _root_seed_default() -> int:
    env = os.environ.get("DEFM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"DEFM_SEED must be an integer, got {env!r}")


def _echo_config(command: str, options: dict) -> None:
    print(f"# effective config [{command}]")
    for key in sorted(options):
        print(f"{key} = {options[key]}")


def _merged(args, command: str, defaults: dict) -> dict:
    file_values = {}
    if args.config:
        loaded = dio.load_config(args.config)
        section = loaded.get(command, {})
        if not isinstance(section, dict):
            raise SystemExit(f"config section {command!r} must be a mapping")
        file_values = section
    flag_values = {key: getattr(args, key.replace("-", "_"), None) for key in defaults}
    try:
        merged = dio.merge_options(defaults, file_values, flag_values)
    except ValueError as exc:
        raise SystemExit(str(exc))
    return merged


def _int_list(text: str) -> list[int]:
    return [int(part) for part in str(text).split(",") if part != ""]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in str(text).split(",") if part != ""]


# ---------------------------------------------------------------- generate

GENERATE_DEFAULTS = {
    "duration": 100.0, "oscillators": 30, "sigma": 10.0, "rho": 28.0,
    "beta": 8.0 / 3.0, "coupling": 0.1, "dt_integrate": 0.002,
    "dt_sample": 0.02, "transient": 100.0, "noise_variance": 0.0,
    "time_varying": False, "switch_period": 100.0, "rho_low": 28.0,
    "rho_high": 42.0, "seed": None,
}


def cmd_generate(args) -> int:
    opts = _merged(args, "generate", dict(GENERATE_DEFAULTS))
    if opts["seed"] is None:
        opts["seed"] = _root_seed_default()
    _echo_config("generate", opts)
    cfg = LorenzConfig(
        oscillators=int(opts["oscillators"]), sigma=float(opts["sigma"]),
        rho=float(opts["rho"]), beta=float(opts["beta"]),
        coupling=float(opts["coupling"]), dt_integrate=float(opts["dt_integrate"]),
        dt_sample=float(opts["dt_sample"]), transient=float(opts["transient"]),
        seed=int(opts["seed"]))
    schedule = None
    if opts["time_varying"]:
        schedule = SwitchSchedule(
            period=float(opts["switch_period"]), rho_low=float(opts["rho_low"]),
            rho_high=float(opts["rho_high"]), seed=derive_seed(int(opts["seed"]), 1))
    series = integrate_lorenz(cfg, float(opts["duration"]), schedule)
    if float(opts["noise_variance"]) > 0:
        series = add_noise(series, float(opts["noise_variance"]),
                           seed=derive_seed(int(opts["seed"]), 2))
    out = Path(args.out)
    dio.write_series_csv(out, series)
    meta = {"command": "generate", "config": {k: opts[k] for k in sorted(opts)},
            "samples": series.m, "variables": series.n}
    if schedule is not None:
        meta["switch_boundaries"] = [float(b) for b in
                                     schedule.boundaries(float(opts["duration"]))]
        meta["segment_rho"] = [
            schedule.rho_for_segment(i)
            for i in range(int(np.ceil(float(opts["duration"]) / schedule.period)))]
    dio.write_json(out.with_suffix(out.suffix + ".meta.json"), meta)
    print(f"wrote {series.m} samples x {series.n} variables to {out}")
    return 0


# ------------------------------------------------------------ train-predict

TRAIN_DEFAULTS = {
    "target": 0, "m": 45, "s_dim": 19, "attn_layers": 2, "attn_dim": 64,
    "heads": 4, "ff_dim": 128, "spatial_hidden": "128,64", "merge_hidden": "128",
    "no_temporal": False, "epochs": 1500, "lr": 5e-3, "lambda_fc": 1.0,
    "patience": 200, "tol": 1e-6, "supervised_fraction": 1.0, "seed": None,
}


def _forecaster_from(opts: dict, seed: int) -> DefmForecaster:
    return DefmForecaster(
        s_dim=int(opts["s_dim"]), target=int(opts["target"]),
        attn_layers=int(opts["attn_layers"]), attn_dim=int(opts["attn_dim"]),
        heads=int(opts["heads"]), ff_dim=int(opts["ff_dim"]),
        spatial_hidden=tuple(_int_list(opts["spatial_hidden"])),
        merge_hidden=tuple(_int_list(opts["merge_hidden"])),
        use_temporal=not bool(opts["no_temporal"]), epochs=int(opts["epochs"]),
        lr=float(opts["lr"]), lambda_fc=float(opts["lambda_fc"]),
        patience=int(opts["patience"]), tol=float(opts["tol"]),
        supervised_fraction=float(opts["supervised_fraction"]), seed=seed)


def cmd_train_predict(args) -> int:
    opts = _merged(args, "train-predict", dict(TRAIN_DEFAULTS))
    if opts["seed"] is None:
        opts["seed"] = _root_seed_default()
    _echo_config("train-predict", opts)
    series = dio.read_series_csv(args.series)
    m, s_dim, target = int(opts["m"]), int(opts["s_dim"]), int(opts["target"])
    if series.m < m:
        raise SystemExit(f"series has {series.m} rows; window needs {m}")
    window = series.window(0, m)
    model = _forecaster_from(opts, int(opts["seed"]))
    model.fit(window)
    result = model.forecast()

    horizon = s_dim - 1
    if series.m >= m + horizon:
        truth = series.data[target, m:m + horizon]
        result.score_against(truth)
        summary = f"PCC {result.pcc!r}  RMSE {result.rmse!r}"
    else:
        summary = "no held-out rows in input; metrics omitted"

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.model_.save(out_dir / "checkpoint.npz",
                      extra={"target": target, "seed": int(opts["seed"])})
    dio.write_forecast_csv(out_dir / "forecast.csv", result)
    dio.write_train_log_csv(out_dir / "train_log.csv", model.report_)
    dio.write_json(out_dir / "run.meta.json", {
        "command": "train-predict",
        "config": {k: opts[k] for k in sorted(opts)},
        "series": str(args.series),
        "stop_reason": model.report_.stop_reason,
        "best_epoch": model.report_.best_epoch,
        "best_total_loss": model.report_.best_total,
        "pcc": result.pcc, "rmse": result.rmse,
    })
    print(f"forecast horizon {horizon}: {summary}")
    print(f"artifacts in {out_dir}")
    return 0


# ---------------------------------------------------------------- long-term

LONG_TERM_DEFAULTS = {
    "target": 0, "m": 40, "s_dim": 11, "steps": 300, "feedback": "observed",
    "attn_layers": 2, "attn_dim": 64, "heads": 4, "ff_dim": 128,
    "spatial_hidden": "128,64", "merge_hidden": "128", "no_temporal": False,
    "epochs": 1500, "lr": 5e-3, "lambda_fc": 1.0, "patience": 200,
    "tol": 1e-6, "supervised_fraction": 1.0, "seed": None,
}


def cmd_long_term(args) -> int:
    opts = _merged(args, "long-term", dict(LONG_TERM_DEFAULTS))
    if opts["seed"] is None:
        opts["seed"] = _root_seed_default()
    _echo_config("long-term", opts)
    series = dio.read_series_csv(args.series)
    m, s_dim, target = int(opts["m"]), int(opts["s_dim"]), int(opts["target"])
    steps = int(opts["steps"])
    span = s_dim - 1
    if steps % span != 0:
        raise SystemExit(f"steps ({steps}) must be a multiple of s_dim-1 ({span})")
    rounds = steps // span
    feedback = str(opts["feedback"])
    if feedback not in ("observed", "hold"):
        raise SystemExit(f"--feedback must be 'observed' or 'hold', got {feedback!r}")
    needed = m + steps if feedback == "observed" else m
    if series.m < needed:
        raise SystemExit(f"series has {series.m} rows; need {needed} "
                         f"for m={m} plus {steps} observed steps")

    window = series.window(0, m)
    model = _forecaster_from(opts, int(opts["seed"]))
    model.fit(window)
    future = series.data[:, m:m + steps] if feedback == "observed" else None
    result = model.predict_long_term(rounds, future=future, others=feedback)

    truth = None
    per_window = []
    if series.m >= m + steps:
        truth = series.data[target, m:m + steps]
        for i, win in enumerate(result.windows):
            seg = truth[i * span:(i + 1) * span]
            per_window.append({"window": i, "pcc": pcc(win.estimates, seg),
                               "rmse": rmse(win.estimates, seg)})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dio.write_long_term_csv(out_dir / "long_term.csv", result, truth=truth)
    meta = {"command": "long-term", "config": {k: opts[k] for k in sorted(opts)},
            "series": str(args.series), "rounds": rounds,
            "per_window_scores": per_window}
    if truth is not None:
        meta["overall_pcc"] = pcc(result.estimates, truth)
        meta["overall_rmse"] = rmse(result.estimates, truth)
        defined = [w["pcc"] for w in per_window if w["pcc"] is not None]
        meta["mean_window_pcc"] = float(np.mean(defined)) if defined else None
        print(f"{rounds} rounds of {span}: mean window PCC {meta['mean_window_pcc']!r}")
    else:
        print(f"{rounds} rounds of {span}: no truth rows; metrics omitted")
    dio.write_json(out_dir / "run.meta.json", meta)
    print(f"artifacts in {out_dir}")
    return 0


# ---------------------------------------------------------------- benchmark

BENCHMARK_DEFAULTS = {
    "methods": "defm,ma,hes,ar,defm-no-temporal", "m_values": "40,60,80",
    "cases": 30, "s_dim": 19, "noise_variances": "0", "fractions": "1.0",
    "ma_window": 5, "hes_alpha": 0.5, "hes_trend": 0.3, "ar_order": 5,
    "epochs": 1500, "lr": 5e-3, "lambda_fc": 1.0, "patience": 200,
    "tol": 1e-6, "seed": None,
}

_METHODS = ("defm", "ma", "hes", "ar", "defm-no-temporal")


def _benchmark_forecast(method: str, case, opts: dict, model_seed: int,
                        fraction: float) -> np.ndarray:
    horizon = int(opts["s_dim"]) - 1
    y = case.window.data[case.target]
    if method == "ma":
        return forecast_ma(y, int(opts["ma_window"]), horizon)
    if method == "hes":
        return forecast_hes(y, float(opts["hes_alpha"]), float(opts["hes_trend"]), horizon)
    if method == "ar":
        return forecast_ar(y, int(opts["ar_order"]), horizon)
    forecaster = DefmForecaster(
        s_dim=int(opts["s_dim"]), target=case.target,
        use_temporal=(method == "defm"), epochs=int(opts["epochs"]),
        lr=float(opts["lr"]), lambda_fc=float(opts["lambda_fc"]),
        patience=int(opts["patience"]), tol=float(opts["tol"]),
        supervised_fraction=fraction, seed=model_seed)
    forecaster.fit(case.window)
    return forecaster.predict()


def cmd_benchmark(args) -> int:
    opts = _merged(args, "benchmark", dict(BENCHMARK_DEFAULTS))
    if opts["seed"] is None:
        opts["seed"] = _root_seed_default()
    _echo_config("benchmark", opts)
    root = int(opts["seed"])
    methods = [m.strip() for m in str(opts["methods"]).split(",") if m.strip()]
    for method in methods:
        if method not in _METHODS:
            raise SystemExit(f"unknown method {method!r}; choose from {', '.join(_METHODS)}")
    m_values = _int_list(opts["m_values"])
    variances = _float_list(opts["noise_variances"])
    fractions = _float_list(opts["fractions"])
    cases_per_cell = int(opts["cases"])
    s_dim = int(opts["s_dim"])

    base = dio.read_series_csv(args.series)
    # the benchmark works in standardized units: each variable is z-scored
    # over the full series, so RMSE is comparable across targets
    mu = base.data.mean(axis=1, keepdims=True)
    sd = base.data.std(axis=1, keepdims=True)
    sd[sd == 0.0] = 1.0
    base = SeriesMatrix((base.data - mu) / sd, dt=base.dt, var_names=base.var_names)

    rows = []
    cell = 0
    for variance in variances:
        noisy = add_noise(base, variance, seed=derive_seed(root, cell)) \
            if variance > 0 else base
        for m in m_values:
            cell += 1
            cases = sample_cases(noisy, cases_per_cell, m=m, s_dim=s_dim,
                                 seed=derive_seed(root, cell))
            for fraction in fractions:
                for method in methods:
                    if fraction < 1.0 and method in ("ma", "hes", "ar"):
                        continue
                    pairs = []
                    for case_idx, case in enumerate(cases):
                        est = _benchmark_forecast(
                            method, case, opts,
                            model_seed=derive_seed(root, cell, case_idx),
                            fraction=fraction)
                        pairs.append(ScorePair(pcc=pcc(est, case.future),
                                               rmse=rmse(est, case.future),
                                               length=len(est)))
                    agg = aggregate_scores(pairs)
                    rows.append({
                        "method": method, "m": m, "noise_variance": variance,
                        "fraction": fraction, "cases": agg.count,
                        "mean_pcc": agg.mean_pcc, "mean_rmse": agg.mean_rmse,
                        "undefined_pcc": agg.undefined_pcc,
                    })
                    print("%-16s m=%-3d var=%-4g frac=%-4g  meanPCC %s  meanRMSE %.4f"
                          % (method, m, variance, fraction,
                             "undefined" if agg.mean_pcc is None else "%.4f" % agg.mean_pcc,
                             agg.mean_rmse))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fields = ["method", "m", "noise_variance", "fraction", "cases",
              "mean_pcc", "mean_rmse", "undefined_pcc"]
    dio.write_scores_csv(out, rows, fields)
    dio.write_json(out.with_suffix(out.suffix + ".meta.json"), {
        "command": "benchmark", "config": {k: opts[k] for k in sorted(opts)},
        "series": str(args.series), "standardized": True})
    print(f"wrote {len(rows)} rows to {out}")
    return 0


# --------------------------------------------------------------------- plot

def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("svg")
    # fixed hash salt keeps the generated element ids reproducible
    matplotlib.rcParams["svg.hashsalt"] = "defm"
    import matplotlib.pyplot as plt

    paths = [Path(p) for p in args.forecasts]
    labels = args.labels.split(",") if args.labels else [p.stem for p in paths]
    if len(labels) != len(paths):
        raise SystemExit(f"{len(labels)} labels for {len(paths)} files")
    loaded = []
    for path in paths:
        columns = dio.read_forecast_csv(path)
        if "time_index" not in columns or "estimate" not in columns:
            raise SystemExit(f"{path}: expected time_index and estimate columns")
        if len(columns["time_index"]) == 0:
            raise SystemExit(f"{path}: no data rows")
        loaded.append(columns)

    fig, ax = plt.subplots(figsize=(7, 4))
    truth_drawn = False
    for label, columns in zip(labels, loaded):
        if not truth_drawn and "truth" in columns:
            ax.plot(columns["time_index"], columns["truth"], color="black",
                    linewidth=1.5, label="truth")
            truth_drawn = True
        ax.plot(columns["time_index"], columns["estimate"], marker="o",
                markersize=3, linewidth=1.0, label=label)
    first = loaded[0]
    if "truth" in first:
        p = pcc(first["estimate"], first["truth"])
        e = rmse(first["estimate"], first["truth"])
        ax.set_title("PCC %s, RMSE %.4f (%s)" %
                     ("undefined" if p is None else "%.4f" % p, e, labels[0]))
    ax.set_xlabel("time index")
    ax.set_ylabel("target value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------- main

def _add_common_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target", type=int, help="index of the variable to forecast")
    parser.add_argument("--m", type=int, help="window length in time points")
    parser.add_argument("--s-dim", type=int, help="embedding dimension S (horizon S-1)")
    parser.add_argument("--attn-layers", type=int)
    parser.add_argument("--attn-dim", type=int)
    parser.add_argument("--heads", type=int)
    parser.add_argument("--ff-dim", type=int)
    parser.add_argument("--spatial-hidden", help="comma list, e.g. 128,64")
    parser.add_argument("--merge-hidden", help="comma list, e.g. 128")
    parser.add_argument("--no-temporal", action="store_const", const=True, default=None,
                        help="drop the cross-time branch (ablation)")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--lambda-fc", type=float)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--supervised-fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defm",
        description="Self-supervised delay-embedding forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="integrate the coupled Lorenz benchmark")
    p.add_argument("--out", required=True, help="output series CSV path")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--oscillators", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--coupling", type=float)
    p.add_argument("--dt-integrate", type=float)
    p.add_argument("--dt-sample", type=float)
    p.add_argument("--transient", type=float)
    p.add_argument("--noise-variance", type=float)
    p.add_argument("--time-varying", action="store_const", const=True, default=None,
                   help="redraw rho per switch period")
    p.add_argument("--switch-period", type=float)
    p.add_argument("--rho-low", type=float)
    p.add_argument("--rho-high", type=float)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-predict", help="fit one window and forecast past it")
    p.add_argument("--series", required=True, help="input series CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int)
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_train_predict)

    p = sub.add_parser("long-term", help="iterate the fitted map over many spans")
    p.add_argument("--series", required=True, help="input series CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="total forecast length")
    p.add_argument("--feedback", choices=["observed", "hold"],
                   help="source for non-target rows when sliding the window")
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_long_term)

    p = sub.add_parser("benchmark", help="score methods over a sampled case grid")
    p.add_argument("--series", required=True, help="input series CSV")
    p.add_argument("--out", required=True, help="output score table CSV")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--methods", help="comma list from: %s" % ", ".join(_METHODS))
    p.add_argument("--m-values", help="comma list of window lengths")
    p.add_argument("--cases", type=int, help="cases per grid cell")
    p.add_argument("--s-dim", type=int)
    p.add_argument("--noise-variances", help="comma list of variances")
    p.add_argument("--fractions", help="comma list of supervised-column fractions")
    p.add_argument("--ma-window", type=int)
    p.add_argument("--hes-alpha", type=float)
    p.add_argument("--hes-trend", type=float)
    p.add_argument("--ar-order", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda-fc", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("plot", help="render forecast CSVs as an SVG line chart")
    p.add_argument("--forecasts", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--labels", help="comma list matching the forecast files")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, dio.CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
