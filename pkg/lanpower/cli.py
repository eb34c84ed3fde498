import argparse
import logging
import sys
from typing import Optional, Sequence

import pandas as pd

from exceptions import ConfigError, DomainError, LanPowerError, ReplicateFailureError
from models import Family, Hypothesis, ModelSpec, PerturbationSpec, simulate
from power import diagnose, power_study
from report import (
    build_config,
    ensure_writable_dir,
    ensure_writable_file,
    read_config_file,
    summarize_series,
    write_config_file,
    write_diagnostics_csv,
    write_power_csv,
    write_power_svgs,
    write_series_csv,
)
from schemas import FIGURE_PRESETS
from settings import get_settings

logger = logging.getLogger(__name__)


def _csv_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanpower", description="LAN-based Neyman-Pearson tests for AR(1)/ARCH models")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one series and write it as CSV")
    sim.add_argument("--family", choices=[f.value for f in Family], default="ar1")
    sim.add_argument("--rho0", type=float, default=0.1)
    sim.add_argument("--n", type=int, default=400)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--a", type=float, default=0.0, help="perturbation amplitude")
    sim.add_argument("--coef", type=float, default=5.0, help="coefficient in front of G")
    sim.add_argument("--b-coef", type=float, default=None, help="coefficient in front of B (arch; defaults to --coef)")
    sim.add_argument("--hypothesis", choices=[h.value for h in Hypothesis], default=None,
                     help="defaults to local_alternative when --a is non-zero")
    sim.add_argument("--burn-in", type=int, default=None)
    sim.add_argument("--output", default="series.csv")

    for name, help_text in (("power", "run the Monte Carlo power study"), ("diagnose", "report c1, second-derivative and absorption diagnostics")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", nargs="?", default=None, help="flat key=value experiment file")
        cmd.add_argument("--paper-figure", choices=sorted(FIGURE_PRESETS), default=None)
        cmd.add_argument("--family", choices=[f.value for f in Family], default=None)
        cmd.add_argument("--rho0", type=float, default=None)
        cmd.add_argument("--alpha", type=float, default=None)
        cmd.add_argument("--coef", dest="coefficient", type=float, default=None)
        cmd.add_argument("--b-coef", dest="b_coefficient", type=float, default=None)
        cmd.add_argument("--m", type=int, default=None)
        cmd.add_argument("--seed", dest="master_seed", type=int, default=None)
        cmd.add_argument("--n-list", type=_csv_list, default=None)
        cmd.add_argument("--amplitudes", dest="amplitude_grid", type=_csv_list, default=None)
        cmd.add_argument("--variants", type=_csv_list, default=None)
        cmd.add_argument("--b-mode", default=None)
        cmd.add_argument("--c1-mode", default=None)
        cmd.add_argument("--B", type=int, default=None)
        cmd.add_argument("--no-bootstrap-alongside", dest="bootstrap_alongside", action="store_false", default=None,
                         help="skip the bootstrap-bias M.E. rows reported next to the oracle ones")
        cmd.add_argument("--burn-in", type=int, default=None)
        cmd.add_argument("--output-dir", default=None)
        cmd.add_argument("--no-plot", dest="plot", action="store_false", default=None)
    return parser


_FLAG_KEYS = (
    "family", "rho0", "alpha", "coefficient", "b_coefficient", "m", "master_seed", "n_list", "amplitude_grid",
    "variants", "b_mode", "c1_mode", "B", "bootstrap_alongside", "burn_in", "output_dir", "plot",
)


def resolve_config(args: argparse.Namespace):
    """flags > config file > preset > defaults."""
    preset = dict(FIGURE_PRESETS[args.paper_figure]) if args.paper_figure else {}
    from_file = read_config_file(args.config) if args.config else {}
    flags = {key: getattr(args, key) for key in _FLAG_KEYS}
    return build_config(preset, from_file, flags)


def cmd_simulate(args: argparse.Namespace) -> int:
    hypothesis = args.hypothesis or (Hypothesis.LOCAL_ALTERNATIVE if args.a != 0.0 else Hypothesis.NULL)
    try:
        g = PerturbationSpec(amplitude_a=args.a, coefficient=args.coef)
        b = None
        if args.family == Family.ARCH.value:
            b = PerturbationSpec(amplitude_a=args.a, coefficient=args.coef if args.b_coef is None else args.b_coef)
        spec = ModelSpec(family=args.family, rho0=args.rho0, g=g, b=b, n=args.n, hypothesis=hypothesis)
        if args.burn_in is not None and args.burn_in < 0:
            raise DomainError("--burn-in must be non-negative")
        if args.seed < 0:
            raise DomainError("--seed must be non-negative")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    output = ensure_writable_file(args.output)
    if spec.variance_margin <= 0.0:
        logger.warning(f"n^-1/2 sup|B| = {1.0 - spec.variance_margin:.3g}; the conditional variance may turn negative")
    sample = simulate(spec, args.seed, args.burn_in)

    path = write_series_csv(sample, output)
    summary = summarize_series(sample)
    print(f"wrote {path} ({summary.n + 1} values)")
    print(f"mean={summary.mean:.6g} variance={summary.variance:.6g} lag1_autocorrelation={summary.lag1_autocorrelation:.6g}")
    return 0


def cmd_power(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    out = ensure_writable_dir(config.output_dir)
    csv_path = out / "power.csv"
    write_config_file(config, out / "config.resolved.txt")
    logger.info(f"power study: family={config.family.value} n={config.n_list} m={config.m} seed={config.master_seed}")
    try:
        curve = power_study(config)
    except ReplicateFailureError as exc:
        if exc.partial is not None:
            write_power_csv(exc.partial.rows, csv_path)
        marker = csv_path.with_name(csv_path.name + ".failed")
        marker.write_text(f"{exc}\n", encoding="utf-8")
        raise
    write_power_csv(curve.rows, csv_path)
    if config.plot:
        write_power_svgs(curve.rows, out)
    print(f"wrote {csv_path} ({len(curve.rows)} rows, {curve.failures} failed replicate tests)")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    out = ensure_writable_dir(config.output_dir)
    rows = diagnose(config)
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows])
    print(frame.to_string(index=False, float_format=lambda x: f"{x:.4g}"))
    write_diagnostics_csv(rows, out / "diagnostics.csv")
    return 0


COMMANDS = {"simulate": cmd_simulate, "power": cmd_power, "diagnose": cmd_diagnose}


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except LanPowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
