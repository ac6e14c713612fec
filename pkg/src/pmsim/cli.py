"""Command-line front end: ``pmsim run | validate | sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import engine
from .scenario import ScenarioError, parse_scenario, serialize_scenario

log = logging.getLogger("pmsim")

EXIT_OK, EXIT_INPUT, EXIT_SIM, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def fmt(value) -> str:
    """Locale-independent, shortest round-trip rendering."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(float(value))
    return str(value)


def load_config(args) -> engine.SimConfig:
    if args.paper_scenario:
        try:
            config = engine.builtin_config(args.paper_scenario)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
    else:
        path = Path(args.scenario)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CliError(f"{path}: file not found", EXIT_INPUT) from None
        except (OSError, UnicodeDecodeError) as exc:
            raise CliError(f"{path}: cannot read ({exc})", EXIT_INPUT) from None
        try:
            config = parse_scenario(text)
        except ScenarioError as exc:
            raise CliError(f"{path}: {exc}", EXIT_INPUT) from None
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects PARAM=VALUE, got {item!r}", EXIT_INPUT)
        try:
            config = engine.set_param(config, key.strip(), value.strip())
        except (KeyError, ValueError) as exc:
            raise CliError(f"--set {item}: {exc}", EXIT_INPUT) from None
    return config


def trace_csv(trace: engine.Trace) -> str:
    lines = [",".join(engine.COLUMNS)]
    cols = [trace[name] for name in engine.COLUMNS]
    for k in range(len(trace)):
        lines.append(",".join(repr(float(c[k])) for c in cols))
    return "\n".join(lines) + "\n"


def metrics_text(metrics: engine.Metrics) -> str:
    return "".join(f"{k}={fmt(v)}\n" for k, v in metrics.as_dict().items())


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"{path}: cannot write ({exc})", EXIT_IO) from None


def _simulate(config):
    try:
        return engine.simulate(config)
    except engine.SimulationError as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_SIM) from None


def plot_trace(trace: engine.Trace, path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # ZOH staircase, as discrete samples are held between updates
    fig, ax = plt.subplots(figsize=(7, 3.5))
    t = trace.t
    dashed = [
        ("posture_target", "tab:red", "posture target"),
        ("movement_target", "tab:blue", "movement target"),
        ("posture_apa", "tab:brown", "APA"),
        ("disturbance", "tab:gray", "ext. perturbation"),
    ]
    for name, color, label in dashed:
        if (trace[name] != 0).any():
            ax.step(t, trace[name], where="post", color=color, linestyle="--", label=label)
    ax.step(t, trace["y"], where="post", color="black", linewidth=1.5, label="plant output")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    try:
        fig.savefig(path)
    except OSError as exc:
        raise CliError(f"{path}: cannot write ({exc})", EXIT_IO) from None
    finally:
        plt.close(fig)


def cmd_run(args) -> int:
    config = load_config(args)
    for note in config.warnings:
        log.warning(note)
    trace = _simulate(config)
    metrics = engine.compute_metrics(trace, config)
    if args.out:
        _write(args.out, trace_csv(trace))
    if args.metrics:
        _write(args.metrics, metrics_text(metrics))
    if args.plot:
        plot_trace(trace, args.plot, title=args.paper_scenario or Path(args.scenario).stem)
    if not (args.out or args.metrics or args.plot):
        sys.stdout.write(metrics_text(metrics))
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args)
    for note in config.warnings:
        log.warning(note)
    sys.stdout.write(serialize_scenario(config))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise CliError("--values needs at least one value", EXIT_INPUT)
    configs = []
    for value in values:
        try:
            configs.append(engine.set_param(config, args.param, value))
        except (KeyError, ValueError) as exc:
            raise CliError(f"--param {args.param}={value}: {exc}", EXIT_INPUT) from None
    fields = list(engine.Metrics.__dataclass_fields__)
    lines = [",".join(["value"] + fields)]
    for value, cfg in zip(values, configs):
        metrics = engine.compute_metrics(_simulate(cfg), cfg).as_dict()
        lines.append(",".join([value] + [fmt(metrics[f]) for f in fields]))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, keep 2 for simulation failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pmsim", description="Parallel posture/movement control simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_source(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--paper-scenario", choices=engine.BUILTIN_SCENARIOS)
        src.add_argument("--scenario", metavar="PATH")
        p.add_argument("--set", action="append", metavar="PARAM=VALUE",
                       help="override a parameter, e.g. posture.kp=0.4 (repeatable)")

    run = sub.add_parser("run", help="simulate and write trace/metrics/plot")
    add_source(run)
    run.add_argument("--out", metavar="CSV")
    run.add_argument("--metrics", metavar="PATH")
    run.add_argument("--plot", metavar="SVG")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="parse a scenario and print its canonical form")
    add_source(val)
    val.set_defaults(func=cmd_validate)

    sw = sub.add_parser("sweep", help="one simulation per parameter value")
    add_source(sw)
    sw.add_argument("--param", required=True, metavar="PATH")
    sw.add_argument("--values", required=True, metavar="V1,V2,...")
    sw.add_argument("--out", metavar="CSV")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
