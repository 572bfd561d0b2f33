"""Command line: ``dmnls ground-state``, ``dmnls study``, ``dmnls evolve``.

Exit codes: 0 success, 1 study gates failed, 2 numerical abort or
non-convergence, 3 I/O error, 64 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

from . import __version__
from .dispersion_map import NAMED_MAPS, named_map
from .errors import AbortedRunError, ConfigError, DivergenceError, DMNLSError, NumericalFailureError, StudyFailure
from .evolution import default_dt, evolve
from .ground_state import DEFAULT_TOL, petviashvili_solve
from .io import load_field, loglog_svg, save_ground_state, save_trajectory, write_csv, write_json
from .spectral_grid import SpectralGrid

EXIT_OK, EXIT_GATES, EXIT_ABORT, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 64

log = logging.getLogger("dmnls")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def build_parser():
    p = _Parser(prog="dmnls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("ground-state", help="solve for Q and write .fld + JSON sidecar")
    g.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
    g.add_argument("--n", type=int, default=1024)
    g.add_argument("--box", type=_positive(float), default=20.0)
    g.add_argument("--tol", type=_positive(float), default=None)
    g.add_argument("--max-iter", type=_positive(int), default=2000)
    g.add_argument("--out", required=True)

    s = sub.add_parser("study", help="run a convergence study from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=None, help="overrides out_dir from the config")

    e = sub.add_parser("evolve", help="one-off integration")
    e.add_argument("--init", required=True, help="path to a .fld file or 'soliton'")
    e.add_argument("--map", default="unit", help=f"one of: {', '.join(sorted(NAMED_MAPS))}")
    e.add_argument("--eps", type=_positive(float), default=1.0)
    e.add_argument("--t1", type=float, required=True)
    e.add_argument("--dt", type=_positive(float), default=None)
    e.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
    e.add_argument("--n", type=int, default=512)
    e.add_argument("--box", type=_positive(float), default=20.0)
    e.add_argument("--stride", type=_positive(int), default=10)
    e.add_argument("--linear", action="store_true", help="disable the nonlinear substep")
    e.add_argument("--out-dir", default="evolve_out")
    return p


def _writable_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {path}: {exc.strerror}") from exc
    return path


def cmd_ground_state(args):
    try:
        grid = SpectralGrid(args.dim, args.n, args.box)
    except DMNLSError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    _writable_dir(out.parent if str(out.parent) else Path("."))
    try:
        Q = petviashvili_solve(grid, args.tol, args.max_iter)
    except (DivergenceError, NumericalFailureError) as exc:
        print(f"ground-state: {exc}", file=sys.stderr)
        return EXIT_ABORT
    fld, sidecar = save_ground_state(out, Q)
    meta = Q.metadata()
    print(f"residual {Q.residual:.3e}  mass {Q.mass:.15g}  iterations {Q.iterations}  "
          f"r1 {meta['r1']:.3e}  r2 {meta['r2']:.3e}")
    print(f"wrote {fld} and {sidecar}")
    return EXIT_OK


def write_study_outputs(report, cfg, out_dir, started):
    out_dir = _writable_dir(out_dir)
    stem = f"{cfg.study}"
    files = [
        write_csv(out_dir / f"{stem}.csv", report.csv_rows(cfg.record_runtime)),
        write_json(out_dir / f"{stem}.json", report.to_json()),
    ]
    ok = [r for r in report.rows if r["error"] is not None and r["error"] > 0]
    svg = out_dir / f"{stem}.svg"
    key = "dt" if cfg.study == "order" else "eps"
    svg.write_text(loglog_svg([r[key] for r in ok], [r["error"] for r in ok], report.slope, report.intercept,
                              title=f"{cfg.study} study"))
    files.append(svg)
    manifest_path = out_dir / "manifest.json"
    manifest = {
        "config_hash": cfg.hash(),
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "files": [f.name for f in files] + [manifest_path.name],
    }
    write_json(manifest_path, manifest)
    return files + [manifest_path]


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def cmd_study(args):
    from .experiments import load_config, run_study

    started = _now()
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}") from None
    except ConfigError as exc:
        raise UsageError(f"config error: {exc}") from None
    try:
        report = run_study(cfg)
    except StudyFailure as exc:
        print(f"study: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ConfigError as exc:
        raise UsageError(f"config error: {exc}") from None
    out_dir = args.out_dir or cfg.out_dir
    write_study_outputs(report, cfg, out_dir, started)
    slope = "n/a" if report.slope is None else f"{report.slope:.6f}"
    r2 = "n/a" if report.r2 is None else f"{report.r2:.6f}"
    print(f"{cfg.study}: {len(report.rows)} rows, slope {slope}, R2 {r2}, status {report.status}")
    for name, ok in report.gates.items():
        print(f"  gate {name}: {'pass' if ok else 'FAIL'}")
    # aborted rows fail "completed"; exit 2 is reserved for runs where that is the only failure
    others = [name for name, ok in report.gates.items() if not ok and name != "completed"]
    if others:
        return EXIT_GATES
    if report.any_aborted or not report.passed:
        return EXIT_ABORT
    return EXIT_OK


def cmd_evolve(args):
    from .norms import soliton_distance

    try:
        dmap = named_map(args.map)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    Q = None
    if args.init == "soliton":
        try:
            grid = SpectralGrid(args.dim, args.n, args.box)
        except DMNLSError as exc:
            raise UsageError(str(exc)) from None
        Q = petviashvili_solve(grid, DEFAULT_TOL[grid.d])
        u0 = Q.profile
    else:
        try:
            u0, _ = load_field(args.init)
        except FileNotFoundError:
            raise UsageError(f"init file not found: {args.init}") from None
    dt = default_dt(args.eps) if args.dt is None else args.dt
    out_dir = _writable_dir(args.out_dir)
    try:
        traj = evolve(u0, (0.0, args.t1), dt, dmap, args.eps, args.stride, nonlinear=not args.linear)
    except AbortedRunError as exc:
        print(f"evolve: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except DMNLSError as exc:
        raise UsageError(str(exc)) from None
    save_trajectory(out_dir, traj)
    line = f"t1 {traj.times[-1]:.17g}  snapshots {len(traj)}  mass drift {traj.mass_drift:.3e}"
    if Q is not None and len(traj) > 1:
        line += f"  S_half distance to soliton orbit {soliton_distance(traj, Q):.6e}"
    print(line)
    return EXIT_OK


COMMANDS = {"ground-state": cmd_ground_state, "study": cmd_study, "evolve": cmd_evolve}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

