"""Command-line entry point: ``varexp <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import _kernels
from .assembly import SolverError
from .config import ConfigError, REFERENCE_CONFIG, build_config, parse_config_text
from .output import OutputError, fmt

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("varexp")

# Published reference rows, for side-by-side comparison only.
PUBLISHED_DECAY = {
    0.0: (0.477344, 0.477344), 0.1: (0.43491, 0.475403), 0.2: (0.420828, 0.473474),
    0.3: (0.407467, 0.471557), 0.4: (0.394777, 0.469651), 0.5: (0.382713, 0.467757),
    0.6: (0.371233, 0.465874), 0.7: (0.360298, 0.464003), 0.8: (0.349873, 0.462143),
    0.9: (0.339927, 0.460294), 1.0: (0.330429, 0.458456),
}
PUBLISHED_M = {
    0.0: 0.671566, 0.1: 0.671906, 0.2: 0.672586, 0.3: 0.673228, 0.4: 0.673835, 0.5: 0.674407,
    0.6: 0.674946, 0.7: 0.675454, 0.8: 0.675932, 0.9: 0.676382, 1.0: 0.676804,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _split_set(pairs):
    out = {}
    for item in pairs or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _config(args):
    if args.config == "reference":
        text, base, src = REFERENCE_CONFIG, Path.cwd(), "<reference>"
    else:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        base, src = path.parent, str(path)
    raw = parse_config_text(text, src)
    raw.update(_split_set(getattr(args, "set", None)))
    return build_config(raw, base)


def _resolve(cfg, value):
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else cfg.base_dir / p


def _print_items(items, out=None):
    out = out or sys.stdout
    for k, v in items:
        out.write(f"{k} = {fmt(v)}\n")


def _problem_and_constants(cfg):
    from .driver import build_problem, constants_for
    problem = build_problem(cfg)
    return problem, constants_for(problem, cfg)


def cmd_run(args):
    from .driver import run
    from .output import csv_text, emit_csv, emit_snapshots, emit_svg
    cfg = _config(args)
    result = run(cfg)
    csv_path = _resolve(cfg, args.csv or cfg.get("output.csv"))
    svg_path = _resolve(cfg, args.svg or cfg.get("output.svg"))
    if csv_path:
        emit_csv(result, csv_path)
        log.info("wrote %s", csv_path)
    else:
        sys.stdout.write(csv_text(result))
    if svg_path:
        emit_svg(result, svg_path)
        log.info("wrote %s", svg_path)
    if result.snapshots:
        prefix = _resolve(cfg, cfg.get("output.snapshot_prefix")) or (
            csv_path.with_suffix("") if csv_path else Path("snapshot"))
        for p in emit_snapshots(result, prefix):
            log.info("wrote %s", p)
    term = result.termination
    log.info("termination: %s at t=%g", term.status, term.t)
    return EXIT_SOLVER if term.status == "solver_failure" else EXIT_OK


def cmd_constants(args):
    cfg = _config(args)
    problem, c = _problem_and_constants(cfg)
    a = problem.admissibility
    _print_items([("p1", c.p1), ("p2", c.p2), ("q1", c.q1), ("q2", c.q2), ("sigma", c.sigma)])
    _print_items((k, v) for k, v in c.as_dict().items() if k not in ("p1", "p2", "q1", "q2", "sigma"))
    _print_items((f"note.{k}", v) for k, v in c.notes.items())
    _print_items([("admissible", a.ok), ("ordering_ok", a.ordering_ok),
                  ("sobolev_ok", a.sobolev_ok), ("sigma_ok", a.sigma_ok)])
    return EXIT_OK


def _certs(args):
    from .driver import certify, initial_datum
    cfg = _config(args)
    problem, c = _problem_and_constants(cfg)
    datum = initial_datum(cfg, problem.mesh)
    return (c,) + certify(problem, datum, c)


def cmd_check_blowup(args):
    c, blow, _, _ = _certs(args)
    _print_items(blow.fields().items())
    return EXIT_OK


def cmd_check_decay(args):
    c, _, decay, _ = _certs(args)
    if decay is None:
        print("decay certificate unavailable (see log)")
        return EXIT_OK
    _print_items(decay.fields().items())
    for t in args.times:
        print(f"delta({t:g}) = {fmt(decay.envelope(t))}")
    return EXIT_OK


def cmd_mesh_info(args):
    from .driver import build_problem
    cfg = _config(args)
    problem = build_problem(cfg)
    m = problem.mesh
    r = m.rect
    h = max((r.xmax - r.xmin) / m.nx, (r.ymax - r.ymin) / m.ny)
    _print_items([("rect", (r.xmin, r.xmax, r.ymin, r.ymax)), ("nx", m.nx), ("ny", m.ny),
                  ("vertices", m.n_vertices), ("triangles", m.n_triangles),
                  ("boundary_vertices", int(m.boundary_mask.sum())),
                  ("interior_vertices", int((~m.boundary_mask).sum())),
                  ("h", h), ("area", float(m.areas.sum())),
                  ("system_nnz", problem.system.nnz), ("backend", _kernels.backend_name())])
    if args.dump:
        try:
            m.dump(args.dump)
        except OSError as exc:
            raise OutputError(f"cannot write {args.dump}: {exc.strerror or exc}") from None
    return EXIT_OK


def cmd_reproduce_table2(args):
    from .config import reference_config
    from .driver import run
    from .output import emit_csv, emit_snapshots, emit_svg, write_table
    out = Path(args.outdir)
    over = {"lambda1.mode": "analytic-square", "decay.envelope": "always"}
    if args.dt is not None:
        over["time.dt"] = args.dt
    if args.quick:
        over.update({"estimators.starts": 4, "estimators.steps": 60})
    cfg = reference_config(**over)
    result = run(cfg, keep_snapshots=(0.0, 0.5, 1.0))
    rows = []
    for rec in result.records:
        ref = PUBLISHED_DECAY.get(round(rec.t, 6), (None, None))
        rows.append((rec.t, rec.h01, rec.delta, ref[0], ref[1]))
    write_table(out / "table2.csv", ("t", "h01", "delta", "published_h01", "published_delta"), rows)
    write_table(out / "table1.csv", ("t", "published_M", "artifact_M", "u0_h01"),
                [(rec.t, PUBLISHED_M.get(round(rec.t, 6)), result.constants.M,
                  result.notes["u0.h01_datum"]) for rec in result.records])
    emit_csv(result, out / "diagnostics.csv")
    emit_svg(result, out / "decay.svg")
    emit_snapshots(result, out / "snapshot")
    print(f"{'t':>4} {'h01':>10} {'publ.':>10} {'delta':>10} {'publ.':>10}")
    for t, h, d, ph, pd in rows:
        print(f"{t:4.1f} {h:10.6f} {ph:10.6f} {d:10.6f} {pd:10.6f}")
    print(f"artifact M = {result.constants.M:.6g} (published: {PUBLISHED_M[0.0]})")
    log.info("wrote table2.csv, table1.csv, diagnostics.csv, decay.svg to %s", out)
    return EXIT_SOLVER if result.termination.status == "solver_failure" else EXIT_OK


def make_parser():
    ap = _Parser(prog="varexp", description="Variable-exponent pseudo-parabolic FEM solver "
                 "with blow-up and decay certificates.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--backend", choices=("auto", "cython", "python"), default=None,
                    help="kernel backend (default: VAREXP_BACKEND or auto)")
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def with_config(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="config file, or 'reference' for the built-in decay setup")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.set_defaults(func=func)
        return p

    p = with_config("run", cmd_run, "simulate and write diagnostics")
    p.add_argument("--csv", help="diagnostics CSV path (default: output.csv or stdout)")
    p.add_argument("--svg", help="norm/envelope plot path (default: output.svg)")
    with_config("check-blowup", cmd_check_blowup, "evaluate the blow-up certificate")
    p = with_config("check-decay", cmd_check_decay, "evaluate the decay certificate")
    p.add_argument("--times", type=float, nargs="*", default=[0.0, 0.5, 1.0])
    with_config("constants", cmd_constants, "print the constants bundle")
    p = with_config("mesh-info", cmd_mesh_info, "print mesh statistics")
    p.add_argument("--dump", help="write the mesh as text")
    p = sub.add_parser("reproduce-table2", help="run the built-in decay experiment")
    p.add_argument("outdir")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--quick", action="store_true", help="fewer ascent starts for the constants")
    p.set_defaults(func=cmd_reproduce_table2)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.backend:
            try:
                _kernels.set_backend(args.backend)
            except ImportError as exc:
                raise ConfigError(str(exc)) from None
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
