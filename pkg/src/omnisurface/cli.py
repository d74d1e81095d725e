"""Command-line entry point: ``omnisurface {optimize,heatmap,sweep,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from .channel import PhaseShiftVector
from .experiments import SYSTEMS, grid_axis, heatmap, size_sweep
from .geometry import GeometryError, Point3, side_of
from .optimizer import PhasorProblem, solve_bnb
from .validation import run_suite

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3

HEATMAP_HEADER = ("x", "y", "side", "se_ios", "se_irs", "se_direct")
SWEEP_HEADER = ("m_elements", "system", "avg_se", "std_err", "n_trials")
OPTIMIZE_HEADER = ("element", "phase_index", "phase_rad")
VALIDATE_HEADER = ("check", "passed", "value", "detail")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def _parse_mu(text: str) -> Point3:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"--mu expects x,y,z, got {text!r}") from None
    if len(parts) != 3:
        raise UsageError(f"--mu expects x,y,z, got {text!r}")
    return Point3(*parts)


def _load(args) -> cfgmod.ScenarioConfig:
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.ScenarioConfig()
    if args.seed is not None:
        cfg = cfgmod.with_seed(cfg, args.seed)
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        cfg = replace(cfg, n_trials=args.trials)
    if args.dump_config:
        _write(args.dump_config, cfgmod.dumps(cfg))
    return cfg


def cmd_optimize(args) -> int:
    cfg = _load(args)
    mu = _parse_mu(args.mu)
    sc = cfg.scenario
    side = side_of(sc.panel, mu)
    problem = PhasorProblem.from_scenario(sc.panel, sc.bs, mu, sc.rf)
    res = solve_bnb(problem, sc.rf, sc.candidate_set_mode, bound=sc.bound)
    psv: PhaseShiftVector = res.phases
    rows = [(m, idx, float(ph)) for m, (idx, ph) in enumerate(zip(psv.indices, psv.phases))]
    if args.out:
        _write(args.out, csv_text(OPTIMIZE_HEADER, rows))
    for m, idx, ph in rows:
        print(f"element {m}: index {idx} phase {ph!r}")
    print(f"side {side.value}")
    print(f"se {res.se!r}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    cfg = _load(args)
    xs = grid_axis(*cfg.grid_x, cfg.grid_step)
    ys = grid_axis(*cfg.grid_y, cfg.grid_step)
    cells = heatmap(cfg.scenario, xs, ys)
    rows = [(c.x, c.y, c.side.value, c.se_ios, c.se_irs, c.se_direct) for c in cells]
    _write(args.out, csv_text(HEATMAP_HEADER, rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    points = size_sweep(cfg.scenario, cfg.sizes, cfg.n_trials, cfg.master_seed)
    rows = [
        (p.m_elements, s, p.avg_se[s], p.std_err[s], p.n_trials)
        for p in points
        for s in SYSTEMS
    ]
    _write(args.out, csv_text(SWEEP_HEADER, rows))
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_suite(quick=args.quick, seed=args.seed or 0)
    rows = [(r.check, r.passed, r.value, r.detail) for r in results]
    if args.out:
        _write(args.out, csv_text(VALIDATE_HEADER, rows))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check}: {r.detail} ({r.seconds:.1f} s)")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="omnisurface", description="Omni-surface phase optimization and coverage experiments.")
    sub = p.add_subparsers(dest="command", metavar="{optimize,heatmap,sweep,validate}", parser_class=_Parser)
    sub.required = True

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="scenario TOML file (defaults used if omitted)")
            sp.add_argument("--dump-config", metavar="PATH", help="write the effective config ('-' for stdout)")
        sp.add_argument("--seed", type=int, help="override experiment.master_seed")

    sp = sub.add_parser("optimize", help="optimize phases for one user position")
    common(sp)
    sp.add_argument("--mu", required=True, help="user position x,y,z in meters")
    sp.add_argument("--out", help="CSV of element,phase_index,phase_rad")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("heatmap", help="coverage grid CSV")
    common(sp)
    sp.add_argument("--out", help="output CSV (stdout if omitted)")
    sp.set_defaults(func=cmd_heatmap)

    sp = sub.add_parser("sweep", help="average SE versus panel size")
    common(sp)
    sp.add_argument("--out", help="output CSV (stdout if omitted)")
    sp.add_argument("--trials", type=int, help="override experiment.n_trials")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="oracle and invariant checks")
    common(sp, config=False)
    sp.add_argument("--quick", action="store_true", help="reduced suite (M <= 8)")
    sp.add_argument("--out", help="report CSV")
    sp.set_defaults(func=cmd_validate)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"omnisurface: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (cfgmod.ConfigError, GeometryError) as e:
        print(f"omnisurface: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
