"""Command-line interface.

Three subcommands: ``test`` runs one two-sample test on a pair of CSV
files, ``power`` estimates a rejection rate from a config file, ``sweep``
repeats the estimate along one axis.  Config files are flat INI with the
sections dataset / method / stage1 / stage2 / harness; unknown fields are
rejected by name.  All randomness flows from the single ``seed`` key.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from dataclasses import replace

from .benchmark import (
    ExperimentConfig,
    METHODS,
    SWEEP_AXES,
    THRESHOLDS,
    estimate_rejection_rate,
    run_single_trial,
    sweep,
    write_results_csv,
)
from .errors import ConfigError, DataError, NumericalError
from .model_selection import default_bandwidths, default_lambdas

__all__ = ["main", "parse_config_file", "parse_config_text", "resolved_config_ini"]

_KNOWN_FIELDS = {
    "dataset": ("kind", "n", "m", "theta", "null", "x_csv", "y_csv", "columns"),
    "method": ("name",),
    "stage1": ("r", "sigma", "lambda", "grid", "bandwidths", "lambdas", "folds",
               "falkon_centers", "cg_iters"),
    "stage2": ("alpha", "B", "threshold"),
    "harness": ("repetitions", "seed", "workers", "axis", "values"),
}


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _apply_grid_choice(config: ExperimentConfig, choice: str) -> ExperimentConfig:
    if choice == "default":
        return replace(
            config,
            bandwidths=tuple(default_bandwidths()),
            lambdas=tuple(default_lambdas()),
        )
    if choice == "none":
        return replace(config, bandwidths=None, lambdas=None)
    # anything else is a path to an INI file with a [grid] section
    parser = configparser.ConfigParser()
    parser.optionxform = str
    read = parser.read(choice)
    if not read:
        raise ConfigError(f"grid file not found: {choice}")
    if not parser.has_section("grid"):
        raise ConfigError(f"grid file {choice} needs a [grid] section")
    unknown = [k for k in parser["grid"] if k not in ("bandwidths", "lambdas")]
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown} in grid file {choice}")
    bandwidths = parser.get("grid", "bandwidths", fallback=None)
    lambdas = parser.get("grid", "lambdas", fallback=None)
    return replace(
        config,
        bandwidths=_parse_floats(bandwidths) if bandwidths else None,
        lambdas=_parse_floats(lambdas) if lambdas else None,
    )


def parse_config_text(text: str) -> tuple[ExperimentConfig, str | None, tuple | None]:
    """Parse an INI config; returns (config, sweep axis, sweep values)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from None

    problems = []
    for section in parser.sections():
        if section not in _KNOWN_FIELDS:
            problems.append(f"unknown section [{section}]")
            continue
        for field in parser[section]:
            if field not in _KNOWN_FIELDS[section]:
                problems.append(f"unknown field {field!r} in section [{section}]")
    if problems:
        raise ConfigError("; ".join(problems))

    def get(section, field, fallback=None):
        return parser.get(section, field, fallback=fallback)

    config = ExperimentConfig()
    try:
        if get("dataset", "kind"):
            config = replace(config, dataset=get("dataset", "kind"))
        if get("dataset", "n"):
            config = replace(config, n=int(get("dataset", "n")))
        if get("dataset", "m"):
            config = replace(config, m=int(get("dataset", "m")))
        if get("dataset", "theta"):
            config = replace(config, theta=float(get("dataset", "theta")))
        if get("dataset", "null"):
            config = replace(config, null=parser.getboolean("dataset", "null"))
        if get("dataset", "x_csv"):
            config = replace(config, x_csv=get("dataset", "x_csv"))
        if get("dataset", "y_csv"):
            config = replace(config, y_csv=get("dataset", "y_csv"))
        if get("dataset", "columns"):
            config = replace(config, columns=_parse_ints(get("dataset", "columns")))
        if get("method", "name"):
            config = replace(config, method=get("method", "name"))
        if get("stage1", "r"):
            config = replace(config, r=float(get("stage1", "r")))
        if get("stage1", "sigma"):
            config = replace(config, sigma=float(get("stage1", "sigma")))
        if get("stage1", "lambda"):
            config = replace(config, lam=float(get("stage1", "lambda")))
        if get("stage1", "grid"):
            config = _apply_grid_choice(config, get("stage1", "grid"))
        if get("stage1", "bandwidths"):
            config = replace(config, bandwidths=_parse_floats(get("stage1", "bandwidths")))
        if get("stage1", "lambdas"):
            config = replace(config, lambdas=_parse_floats(get("stage1", "lambdas")))
        if get("stage1", "folds"):
            config = replace(config, cv_folds=int(get("stage1", "folds")))
        if get("stage1", "falkon_centers"):
            config = replace(config, falkon_centers=int(get("stage1", "falkon_centers")))
        if get("stage1", "cg_iters"):
            config = replace(config, cg_iterations=int(get("stage1", "cg_iters")))
        if get("stage2", "alpha"):
            config = replace(config, alpha=float(get("stage2", "alpha")))
        if get("stage2", "B"):
            config = replace(config, num_permutations=int(get("stage2", "B")))
        if get("stage2", "threshold"):
            config = replace(config, threshold=get("stage2", "threshold"))
        if get("harness", "repetitions"):
            config = replace(config, repetitions=int(get("harness", "repetitions")))
        if get("harness", "seed"):
            config = replace(config, seed=int(get("harness", "seed")))
        if get("harness", "workers"):
            config = replace(config, workers=int(get("harness", "workers")))
    except ValueError as err:
        raise ConfigError(f"invalid config value: {err}") from None

    axis = get("harness", "axis") or None
    values: tuple | None = None
    if get("harness", "values"):
        raw = get("harness", "values")
        if axis == "method":
            values = tuple(v.strip() for v in raw.split(",") if v.strip())
        elif axis == "sample_size":
            values = _parse_ints(raw)
        else:
            values = _parse_floats(raw)
    if axis is not None and axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if axis is not None and not values:
        raise ConfigError("sweep axis given without values")
    config.validate()
    return config, axis, values


def parse_config_file(path) -> tuple[ExperimentConfig, str | None, tuple | None]:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    return parse_config_text(text)


def resolved_config_ini(
    config: ExperimentConfig, axis: str | None = None, values=None
) -> str:
    """Render a config (all defaults materialized) back to INI text; the
    result re-parses to an equivalent configuration."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["dataset"] = {"kind": config.dataset, "n": str(config.n), "m": str(config.m),
                         "theta": repr(config.theta), "null": str(config.null).lower()}
    if config.x_csv is not None:
        parser["dataset"]["x_csv"] = config.x_csv
    if config.y_csv is not None:
        parser["dataset"]["y_csv"] = config.y_csv
    if config.columns is not None:
        parser["dataset"]["columns"] = ",".join(str(c) for c in config.columns)
    parser["method"] = {"name": config.method}
    parser["stage1"] = {"r": repr(config.r), "lambda": repr(config.lam),
                        "folds": str(config.cv_folds), "cg_iters": str(config.cg_iterations)}
    if config.sigma is not None:
        parser["stage1"]["sigma"] = repr(config.sigma)
    if config.bandwidths is not None:
        parser["stage1"]["bandwidths"] = ",".join(repr(b) for b in config.bandwidths)
    if config.lambdas is not None:
        parser["stage1"]["lambdas"] = ",".join(repr(l) for l in config.lambdas)
    if config.falkon_centers is not None:
        parser["stage1"]["falkon_centers"] = str(config.falkon_centers)
    parser["stage2"] = {"alpha": repr(config.alpha), "B": str(config.num_permutations),
                        "threshold": config.threshold}
    parser["harness"] = {"repetitions": str(config.repetitions), "seed": str(config.seed),
                         "workers": str(config.workers)}
    if axis is not None:
        parser["harness"]["axis"] = axis
        parser["harness"]["values"] = ",".join(str(v) for v in values)
    out = []

    class _Writer:
        def write(self, chunk):
            out.append(chunk)

    parser.write(_Writer())
    return "".join(out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wits", description="Witness two-sample testing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="run one two-sample test on two CSV files")
    test.add_argument("x_csv")
    test.add_argument("y_csv")
    test.add_argument("--method", default="kfda-witness", choices=METHODS)
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--B", type=int, default=200, dest="num_permutations")
    test.add_argument("--r", type=float, default=0.5)
    test.add_argument("--sigma", type=float, default=None)
    test.add_argument("--lambda", type=float, default=1e-2, dest="lam")
    test.add_argument("--grid", default="none",
                      help="default | none | path to an INI file with a [grid] section")
    test.add_argument("--falkon-centers", type=int, default=None, dest="falkon_centers")
    test.add_argument("--cg-iters", type=int, default=50, dest="cg_iterations")
    test.add_argument("--threshold", default="permutation", choices=THRESHOLDS)
    test.add_argument("--columns", default=None,
                      help="comma-separated 0-based column indices")
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--out", default=None, help="write a one-row CSV report here")

    for name in ("power", "sweep"):
        cmd = sub.add_parser(name, help=f"run a {name} experiment from a config file")
        cmd.add_argument("config")
        cmd.add_argument("--out", default=None, help="results CSV path")
    return parser


_REPORT_COLUMNS = ("method", "statistic", "p_value", "threshold", "reject",
                   "alpha", "B", "n", "m", "seed")


def _cmd_test(args) -> int:
    from .datasets import load_csv

    columns = _parse_ints(args.columns) if args.columns else None
    x = load_csv(args.x_csv, columns=columns)
    y = load_csv(args.y_csv, columns=columns)
    config = ExperimentConfig(
        dataset="csv",
        x_csv=args.x_csv,
        y_csv=args.y_csv,
        columns=columns,
        n=x.shape[0],
        m=y.shape[0],
        method=args.method,
        sigma=args.sigma,
        lam=args.lam,
        r=args.r,
        alpha=args.alpha,
        num_permutations=args.num_permutations,
        threshold=args.threshold,
        falkon_centers=args.falkon_centers,
        cg_iterations=args.cg_iterations,
        seed=args.seed,
    )
    config = _apply_grid_choice(config, args.grid)
    config.validate()
    outcome = run_single_trial(config, 0)
    decision = "reject H0" if outcome.reject else "fail to reject H0"
    print(f"method:    {outcome.method}")
    print(f"statistic: {outcome.statistic:.6g}")
    if outcome.p_value is not None:
        print(f"p-value:   {outcome.p_value:.6g}  (B={outcome.num_permutations})")
    if outcome.threshold is not None:
        print(f"threshold: {outcome.threshold:.6g}")
    print(f"alpha:     {outcome.alpha:g}")
    print(f"decision:  {decision}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=_REPORT_COLUMNS)
            writer.writeheader()
            writer.writerow({
                "method": outcome.method,
                "statistic": outcome.statistic,
                "p_value": "" if outcome.p_value is None else outcome.p_value,
                "threshold": "" if outcome.threshold is None else outcome.threshold,
                "reject": int(outcome.reject),
                "alpha": outcome.alpha,
                "B": outcome.num_permutations or "",
                "n": x.shape[0],
                "m": y.shape[0],
                "seed": args.seed,
            })
    return 0


def _cmd_power(args, force_sweep: bool) -> int:
    config, axis, values = parse_config_file(args.config)
    if force_sweep and axis is None:
        raise ConfigError("the sweep command needs axis and values in [harness]")
    out_path = args.out or "results.csv"
    if axis is not None:
        rows = sweep(config, axis, values)
    else:
        rows = [(config, estimate_rejection_rate(config))]
    write_results_csv(rows, out_path)
    echo_path = str(out_path) + ".resolved.ini"
    with open(echo_path, "w", encoding="utf-8") as handle:
        handle.write(resolved_config_ini(config, axis, values))
    print(f"wrote {out_path} ({len(rows)} row(s)); resolved config at {echo_path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "test":
            return _cmd_test(args)
        if args.command == "power":
            return _cmd_power(args, force_sweep=False)
        if args.command == "sweep":
            return _cmd_power(args, force_sweep=True)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        # validation errors raised inside library calls
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
