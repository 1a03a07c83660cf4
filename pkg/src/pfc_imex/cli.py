"""``pfc-imex`` command line: certify, run, converge and render."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
import warnings
from pathlib import Path

from . import harness, output
from .config import DEFAULT_TAUS, RunConfig, parse_config
from .errors import (BoundViolation, CertificationError, ConfigurationError, ContractViolation,
                     NumericError, StructuralError)
from .stepper import ImexStepper
from .tableau import certify, load_tableau

EXIT_OK = 0
EXIT_CERTIFICATION = 1
EXIT_BLOWUP = 2
EXIT_CONFIG = 3


def _load_tableau(name):
    try:
        return load_tableau(name)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"tableau file not found: {exc.filename or name}") from None


def cmd_certify(args) -> int:
    tab = _load_tableau(args.tableau)
    cert = certify(tab, args.alpha, args.beta, args.lipschitz)
    report = {"tableau": tab.name or args.tableau, **cert.to_dict()}
    print(json.dumps(output.json_safe(report), indent=2, ensure_ascii=False))
    return EXIT_OK if cert.admissible else EXIT_CERTIFICATION


def _initial_field(cfg: RunConfig, grid):
    exp = cfg.experiment
    return harness.initial_condition(exp["kind"], grid, seed=exp["seed"], **exp["options"])


def execute_run(cfg: RunConfig, outdir: Path, phi0=None) -> dict:
    """Run one configuration and write the standard run directory."""
    grid = cfg.grid()
    if phi0 is None:
        phi0 = _initial_field(cfg, grid)
    m0_auto = not cfg.m0_resolved
    cfg = cfg.resolve_m0(phi0)
    params = cfg.params()
    cfg.output["directory"] = str(outdir)
    tab = _load_tableau(cfg.tableau)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo").write_text(cfg.dump())

    stepper = ImexStepper(grid, tab, params, dealias=cfg.flags["dealias"], strict=cfg.flags["strict"])
    meta = {
        "tableau": tab.name,
        "m0": params.m0,
        "m0_auto": m0_auto,
        "lipschitz": params.lip,
        "threads": cfg.threads,
        "certificate": {k: v for k, v in stepper.certificate.to_dict().items()
                        if k not in ("Q", "H0", "H1", "H2")},
    }
    snap_every = cfg.output["snapshot_every"] or None

    def on_snapshot(step, t, phi):
        output.write_snapshot(outdir, step, t, phi, grid, params)

    with output.CsvDiagnosticsSink(outdir / "diagnostics.csv") as sink:
        result = stepper.run(phi0, cfg.tau, cfg.t_final, sink=sink,
                             diagnostics_every=cfg.output["diagnostics_every"],
                             snapshot_every=snap_every, on_snapshot=on_snapshot)
    last = result.diagnostics[-1]
    meta.update(steps=last.step, final_energy=last.energy, final_mass=last.mass,
                bound_violated=result.state.bound_violated)
    (outdir / "metadata.json").write_text(json.dumps(output.json_safe(meta), indent=2,
                                                     ensure_ascii=False))
    return meta


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    outdir = Path(args.out or cfg.output["directory"])
    if not cfg.sweep:
        meta = execute_run(cfg, outdir)
        print(f"{meta['steps']} steps, final energy {meta['final_energy']:.12g}, "
              f"bound violated: {meta['bound_violated']}")
        return EXIT_OK

    grid = cfg.grid()
    phi0 = _initial_field(cfg, grid)
    rows = []
    for combo in cfg.sweep:
        sub = copy.deepcopy(cfg)
        sub.sweep = []
        sub.model["alpha"], sub.model["beta"], sub.tau = combo["alpha"], combo["beta"], combo["tau"]
        label = f"alpha{combo['alpha']:g}_beta{combo['beta']:g}_tau{combo['tau']:g}"
        meta = execute_run(sub, outdir / label, phi0=phi0)
        diag = output.read_diagnostics(outdir / label / "diagnostics.csv")
        max_inc = max([0.0] + [float(r["energy_delta"]) for r in diag[1:]])
        rows.append([combo["alpha"], combo["beta"], combo["tau"], meta["final_energy"], max_inc,
                     meta["certificate"]["admissible"]])
        print(f"{label}: final energy {meta['final_energy']:.12g}, max increase {max_inc:.3g}")
    with open(outdir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "tau", "final_energy", "max_energy_increase", "certified"])
        writer.writerows(rows)
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = parse_config(args.config)
    if args.fast:
        cfg.dims = [128] * len(cfg.dims)
    grid = cfg.grid()
    phi0 = _initial_field(cfg, grid)
    cfg = cfg.resolve_m0(phi0)
    tab = _load_tableau(cfg.tableau)
    outdir = Path(args.out or cfg.output["directory"])
    cfg.output["directory"] = str(outdir)
    taus = cfg.converge.get("taus", DEFAULT_TAUS)
    a_values = cfg.converge.get("a_values", [cfg.model["a"]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = harness.convergence_study(grid, tab, cfg.params(), taus, cfg.t_final,
                                          a_values=a_values, phi0=phi0)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo").write_text(cfg.dump())
    table.to_csv(outdir / "convergence.csv")
    print(table.format())
    return EXIT_OK


def cmd_render(args) -> int:
    phi, _ = output.read_snapshot(args.snapshot)
    out = Path(args.out) if args.out else Path(args.snapshot).with_suffix(".pgm")
    meta = output.write_pgm(out, phi, args.vmin, args.vmax)
    print(f"wrote {out} ({meta['width']}x{meta['height']}, range [{meta['vmin']:.6g}, {meta['vmax']:.6g}])")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfc-imex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify stabilizers for a tableau")
    p.add_argument("--tableau", required=True, help="shipped name or tableau file")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--lipschitz", type=float, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run", help="run a simulation (or a stabilizer sweep)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output.directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="temporal convergence study")
    p.add_argument("--config", required=True)
    p.add_argument("--fast", action="store_true", help="use a 128-point grid per axis")
    p.add_argument("--out", help="override output.directory")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("render", help="render a snapshot as an 8-bit PGM image")
    p.add_argument("--snapshot", required=True, help="field_<step>.f64 file")
    p.add_argument("--out", help="output .pgm path")
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)
    p.set_defaults(func=cmd_render)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            return args.func(args)
    except (ConfigurationError, StructuralError, ContractViolation) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CertificationError, BoundViolation) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except NumericError as exc:
        print(f"numeric blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
