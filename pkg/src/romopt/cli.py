"""Command-line entry point.

Exit status: 0 success, 1 runtime or per-sample failure, 2 configuration
or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .config import ConfigError, load_config

log = logging.getLogger("romopt")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parse_mu(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--mu expects comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="romopt", description="Reduced-order shape optimization on a workspace.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help, **kw):
        s = sub.add_parser(name, help=help)
        s.add_argument("--config", required=True, type=Path, help="study configuration (INI)")
        s.add_argument("--workspace", type=Path, help="override the configured workspace")
        s.add_argument("--seed", type=int, help="override the DOE and optimizer seeds")
        return s

    f = sub.add_parser("init-fixture", help="write the synthetic demonstration study")
    f.add_argument("directory", type=Path)
    f.add_argument("--resolution", type=int, default=16)

    add("sample", "write the design of experiments")
    s = add("offline", "run the full-order model and DMD per sample")
    s.add_argument("--samples", help="inclusive index range a..b (default all)")
    s.add_argument("--jobs", type=int, default=1)
    add("build-rom", "assemble the reduced model from completed samples")
    s = add("optimize", "minimize reduced-model resistance")
    s.add_argument("--no-plots", action="store_true")
    s = add("validate", "compare reduced and full-order resistance at a point")
    s.add_argument("--mu", type=_parse_mu, help="parameter point (default: the optimum in report.json)")
    s.add_argument("--enrich", action="store_true", help="add the point to the database and rebuild")
    add("check", "verify workspace integrity and provenance")
    s = add("spectrum", "export DMD eigenvalues")
    s.add_argument("--no-plots", action="store_true")
    s = add("energy", "export POD singular values and energy")
    s.add_argument("--no-plots", action="store_true")
    return p


def _history(ws: Path, report) -> None:
    from .plots import history_figure

    ok = [r for r in report.trace if r["ok"]]
    f = np.array([r["f"] for r in ok])
    history_figure(ws / "history.png", f, np.minimum.accumulate(f), report.baseline_resistance)


def run(args) -> int:
    if args.command == "init-fixture":
        from .fixture import write_fixture

        path = write_fixture(args.directory, args.resolution)
        print(path)
        return EXIT_OK

    config = load_config(args.config).with_overrides(args.workspace, args.seed)
    study = pipeline.Study.load(config)
    ws = study.workspace
    cmd = args.command

    if cmd == "sample":
        plan = pipeline.cmd_sample(study)
        print(f"{len(plan)} samples -> {ws / 'doe.json'}")
    elif cmd == "offline":
        outcomes = pipeline.cmd_offline(study, args.samples, args.jobs)
        failed = [o for o in outcomes if o.status == "failed"]
        for o in outcomes:
            print(f"{pipeline.sample_name(o.index)}: {o.status}" + (f" ({o.error})" if o.error else ""))
        if failed:
            return EXIT_FAIL
    elif cmd == "build-rom":
        rom = pipeline.cmd_build_rom(study)
        print(f"rank {rom.rank} from {rom.coeff_interpolant.centers.shape[0]} samples -> {ws / 'rom.bin'}")
    elif cmd == "optimize":
        report = pipeline.cmd_optimize(study)
        if not args.no_plots:
            _history(ws, report)
        print(
            f"mu* = {report.mu_opt}  R = {report.resistance_opt:.3f} N  "
            f"baseline {report.baseline_resistance:.3f} N  change {report.percent_change:+.2f}%"
        )
        for flag in report.flags:
            print(f"warning: {flag}")
    elif cmd == "validate":
        out = pipeline.cmd_validate(study, args.mu, args.enrich)
        print(json.dumps(out, indent=2))
    elif cmd == "check":
        problems = pipeline.cmd_check(study)
        for p in problems:
            print(p)
        if problems:
            return EXIT_FAIL
        print("workspace ok")
    elif cmd in ("spectrum", "energy"):
        rows = pipeline.spectrum_rows(study) if cmd == "spectrum" else pipeline.energy_rows(study)
        pipeline.write_rows_csv(ws / f"{cmd}.csv", rows)
        if not args.no_plots:
            from . import plots

            fig = plots.spectrum_figure if cmd == "spectrum" else plots.energy_figure
            fig(ws / f"{cmd}.png", rows)
        print(ws / f"{cmd}.csv")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
