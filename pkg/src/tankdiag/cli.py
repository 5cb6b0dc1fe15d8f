"""Command line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 scenario parse
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

from .plant import NumericError
from .workbench import (METHODS, ConfigError, ExperimentReport, ScenarioParseError, Workbench,
                        _label_targets, format_set, load_config, parse_scenario, render_report)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


_OVERRIDES = (
    ("--magnitude-fraction", float, "fault magnitude as a fraction of the nominal value"),
    ("--threshold-fraction", float, "alarm threshold as a fraction of the nominal value"),
    ("--persistence", float, "seconds a residual must stay beyond threshold"),
    ("--dt", float, "integration step (s)"),
    ("--horizon", float, "simulated time (s)"),
    ("--onset", float, "onset of built-in faults (s)"),
    ("--decided-at", float, "decision time (s)"),
    ("--tol", float, "relative fit tolerance"),
    ("--noise-std", float, "measurement noise standard deviation"),
    ("--seed", int, "noise seed"),
)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config file")
    for flag, typ, text in _OVERRIDES:
        common.add_argument(flag, type=typ, help=text)

    p = _Parser(prog="tankdiag", description="Three-tank multiple-fault diagnosis workbench.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate a scenario, write a CSV trace")
    s.add_argument("scenario", help="scenario file or built-in label such as '{De1, Df2}'")
    s.add_argument("--every", type=int, default=100, help="keep every Nth sample (default 100)")
    s.add_argument("-o", "--output", help="write to this file instead of stdout")

    d = sub.add_parser("diagnose", parents=[common], help="diagnose one scenario")
    d.add_argument("scenario", help="scenario file or built-in label such as '{De1, Df2}'")
    d.add_argument("--method", default="all", help="fdi, dx, ig or all")
    d.add_argument("--format", default="text", help="text or csv")

    t = sub.add_parser("table1", parents=[common], help="run the 19 built-in scenarios")
    t.add_argument("--format", default="text", help="text or csv")
    t.add_argument("-o", "--output", help="write to this file instead of stdout")

    sub.add_parser("signature", parents=[common], help="print the FDI signature matrix")
    sub.add_parser("graph", parents=[common], help="print the influence-graph arcs")
    return p


def _config(args):
    overrides = {flag[2:].replace("-", "_"): getattr(args, flag[2:].replace("-", "_")) for flag, _, _ in _OVERRIDES}
    return load_config(args.config, **overrides)


def _scenario(bench: Workbench, arg: str):
    if _label_targets(arg) is not None and not os.path.exists(arg):
        try:
            return bench.builtin_scenario(arg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        with open(arg, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read scenario {arg!r}: {exc.strerror}") from None
    return parse_scenario(text)


def _check_format(fmt: str):
    if fmt not in ("text", "csv"):
        raise UsageError(f"unknown format {fmt!r} (expected text or csv)")


def _emit(text: str, path: str | None, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _trace_csv(trace, every: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"true_{s}" for s in trace.state_names] + list(trace.output_names))
    for k in range(0, len(trace.times), every):
        w.writerow([f"{trace.times[k]:.6g}"] + [f"{x:.9g}" for x in trace.true_state[k]]
                   + [f"{y:.9g}" for y in trace.measurements[k]])
    return buf.getvalue()


def _run(args, out) -> int:
    config = _config(args)
    bench = Workbench(config)
    cmd = args.command
    if cmd == "simulate":
        if args.every < 1:
            raise UsageError("--every must be >= 1")
        _emit(_trace_csv(bench.simulate(_scenario(bench, args.scenario)), args.every), args.output, out)
    elif cmd == "diagnose":
        if args.method != "all" and args.method not in METHODS:
            raise UsageError(f"unknown method {args.method!r} (expected fdi, dx, ig or all)")
        _check_format(args.format)
        row = bench.run_scenario(_scenario(bench, args.scenario), args.method)
        methods = METHODS if args.method == "all" else (args.method,)
        out.write(render_report(ExperimentReport([row], methods), args.format))
        if args.format == "text":
            a = row.alarms
            out.write("alarms: " + (", ".join(f"{v}{'+' if s > 0 else '-'}" for v, s in a.alarmed.items()) or "none")
                      + "\nviolated: " + (format_set(sorted(a.violated), ordered=False) if a.violated else "none") + "\n")
    elif cmd == "table1":
        _check_format(args.format)
        _emit(render_report(bench.run_table1(), args.format), args.output, out)
    elif cmd == "signature":
        out.write(bench.signature.format() + "\n")
    elif cmd == "graph":
        g = bench.graph
        for arc, gain in sorted(g.arcs.items()):
            out.write(f"{arc[0]} -> {arc[1]}  gain {gain:+g}\n")
        for v in sorted(g.nodes):
            if g.nodes[v].self_gain:
                out.write(f"{v} self  gain {g.nodes[v].self_gain:+g}\n")
    return EXIT_OK


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return _run(args, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except ConfigError as exc:
        err.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except ScenarioParseError as exc:
        err.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (NumericError, ArithmeticError) as exc:
        err.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
