"""Command line entry point: ``relchaos simulate|sweep|classify|spectral|verify``.

Exit status: 0 success, 1 verification failure, 2 configuration error.
Outputs go under ``$RELCHAOS_OUTPUT`` (default ``./relchaos-out``) unless
``--output-root`` is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from ..classify import (VERDICT_CSV_HEADER, ClassifierThresholds, classify_trace, dsw_indicator,
                        format_value, verdict_csv_row, verdict_text)
from ..core import InputError, TrajectoryTrace
from ..pde import RobinParams
from .scenario import OUTPUT_ENV, ConfigError, run_scenario
from .sweep import sweep
from .verification import SUITES, verify

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG = 0, 1, 2


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("classifier thresholds (override the scenario file)")
    g.add_argument("--threshold-burn-in-fraction", type=float, metavar="F")
    g.add_argument("--threshold-eps-dip", type=float, metavar="EPS")
    g.add_argument("--threshold-big-growth", type=float, metavar="G")
    g.add_argument("--threshold-bounded-band", type=float, nargs=2, metavar=("LO", "HI"))


def _threshold_overrides(args: argparse.Namespace) -> dict:
    return {
        "burn_in_fraction": args.threshold_burn_in_fraction,
        "eps_dip": args.threshold_eps_dip,
        "big_growth": args.threshold_big_growth,
        "bounded_band": tuple(args.threshold_bounded_band) if args.threshold_bounded_band else None,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relchaos", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("--output-root", type=Path, help=f"overrides ${OUTPUT_ENV}")
    p.add_argument("--safety", type=float, help="CFL safety factor (PDE scenarios)")
    _add_threshold_flags(p)

    p = sub.add_parser("sweep", help="run a parameter sweep file")
    p.add_argument("spec", type=Path)
    p.add_argument("--output-root", type=Path, help=f"overrides ${OUTPUT_ENV}")
    p.add_argument("--workers", type=int, help="thread count (overrides the file)")
    p.add_argument("--safety", type=float, help="CFL safety factor (PDE sweeps)")
    _add_threshold_flags(p)

    p = sub.add_parser("classify", help="classify a trace CSV with header t,value")
    p.add_argument("trace", type=Path)
    p.add_argument("--csv", action="store_true", help="print the CSV record instead of text")
    _add_threshold_flags(p)

    p = sub.add_parser("spectral", help="spectral indicators for PDE parameters")
    p.add_argument("params", nargs="+",
                   help="key=value pairs (alpha, beta, gamma, kappa) or a YAML file")

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("selector", choices=["all", *SUITES])
    p.add_argument("--report", type=Path, help="also write the JSON report here")
    return parser


def _parse_params(items: list[str]) -> RobinParams:
    if len(items) == 1 and "=" not in items[0]:
        path = Path(items[0])
        try:
            data = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read parameters: {exc}", None, str(path)) from None
        if isinstance(data, dict) and isinstance(data.get("model"), dict):
            data = data["model"]
    else:
        data = {}
        for item in items:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"expected key=value, got '{item}'", None, "<argv>")
            try:
                data[key.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"'{key}' is not a number", None, "<argv>") from None
    if not isinstance(data, dict):
        raise ConfigError("parameters must be a mapping", None, "<argv>")
    missing = [k for k in ("alpha", "beta", "gamma") if k not in data]
    if missing:
        raise ConfigError(f"missing required key '{missing[0]}'", None, "<argv>")
    return RobinParams(data["alpha"], data["beta"], data["gamma"], data.get("kappa", 0.0))


def _cmd_simulate(args) -> int:
    res = run_scenario(args.scenario, args.output_root, safety=args.safety,
                       **_threshold_overrides(args))
    print(verdict_text(res.verdict, res.spectral), end="")
    print(f"output={res.outdir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    outdir, results = sweep(args.spec, args.output_root, args.workers, safety=args.safety,
                            **_threshold_overrides(args))
    counts: dict[str, int] = {}
    for r in results:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    for k in sorted(counts):
        print(f"{k}={counts[k]}")
    print(f"output={outdir / 'regime_map.csv'}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    try:
        trace = TrajectoryTrace.from_csv(args.trace, label=args.trace.stem)
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc.strerror}", None, str(args.trace)) from None
    th = ClassifierThresholds().with_overrides(**_threshold_overrides(args))
    verdict = classify_trace(trace, th)
    if args.csv:
        print(VERDICT_CSV_HEADER)
        print(verdict_csv_row(verdict))
    else:
        print(verdict_text(verdict), end="")
    return EXIT_OK


def _cmd_spectral(args) -> int:
    ind = dsw_indicator(_parse_params(args.params))
    for key in ("rho", "eta", "rho_positive", "region_meets_imaginary_axis", "lambda_kappa",
                "lambda_kappa_positive"):
        print(f"{key}={format_value(getattr(ind, key))}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = verify(args.selector)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.report:
        args.report.write_text(text + "\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "classify": _cmd_classify,
    "spectral": _cmd_spectral,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
