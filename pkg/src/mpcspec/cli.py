"""Command-line driver: spectra, surfaces, background subtraction, reference-point report, validation.

All rates are in units of kappa; detunings are normalized by g_f.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from mpcspec import __version__
from mpcspec.config import ConfigError, RunConfig, load_config
from mpcspec.ensemble import (
    average_spectrum, background_subtracted, parse_grid, pg_delta, pg_table, pg_tem00, surface,
)
from mpcspec.invariants import run_invariants
from mpcspec.oracle import TraceDriftError
from mpcspec.steady import PositivityError, SolverError
from mpcspec.table1 import table1_rows

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3

log = logging.getLogger("mpcspec")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.9g" % float(x)


def _header(command: str, cfg: RunConfig, extra: dict) -> list[str]:
    lines = [f"# mpcspec {__version__}", f"# command = {command}",
             "# units: rates in kappa, detunings in g_f", "# randomness = none"]
    meta = cfg.metadata()
    meta.update(extra)
    lines += [f"# {k} = {v!r}" if isinstance(v, str) else f"# {k} = {v}" for k, v in meta.items()]
    return lines


def _csv(header: list[str], columns: list[str], rows) -> str:
    out = header + [",".join(columns)]
    out += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(out) + "\n"


def make_distribution(cfg: RunConfig):
    kind = cfg.distribution
    if kind == "delta":
        return pg_delta(cfg.params.g_f)
    if kind == "tem00":
        return pg_tem00(cfg.g_max_ratio * cfg.params.g_f, mask=(cfg.mask_x, cfg.mask_y),
                        waist=cfg.waist, wavelength=cfg.wavelength, node_count=cfg.node_count)
    return pg_table(kind.split(":", 1)[1])


def _spectrum(cfg: RunConfig) -> tuple[dict[str, str], int]:
    dist = make_distribution(cfg)
    grid = parse_grid(cfg.grid)
    spec = average_spectrum(cfg.params, dist, grid, cfg.q, cfg.workers)
    head = _header("spectrum", cfg, {"nodes": len(dist), "flagged_points": int(spec.flagged.sum())})
    rows = zip(spec.delta3, spec.npcr, spec.rho00, spec.rho33pp)
    return {"spectrum.csv": _csv(head, ["delta3_tilde", "npcr", "rho00", "rho33pp"], rows)}, EXIT_OK


def _surface(cfg: RunConfig) -> tuple[dict[str, str], int]:
    s = surface(cfg.params, parse_grid(cfg.g_grid), parse_grid(cfg.grid), cfg.q, cfg.workers)
    head = _header("surface", cfg, {"flagged_points": int(s.flagged.sum())})
    rows = ((g, d, s.npcr[i, j], s.rho00[i, j], s.rho33pp[i, j])
            for i, g in enumerate(s.g_tilde) for j, d in enumerate(s.delta3))
    cols = ["g_tilde", "delta3_tilde", "npcr", "rho00", "rho33pp"]
    return {"surface.csv": _csv(head, cols, rows)}, EXIT_OK


RUN_COLUMNS = {"all": "npcr_all", "E1=0": "npcr_E1off", "E2=0": "npcr_E2off",
               "E1=E2=0": "npcr_E1E2off"}


def _background(cfg: RunConfig) -> tuple[dict[str, str], int]:
    dist = make_distribution(cfg)
    b = background_subtracted(cfg.params, dist, parse_grid(cfg.grid), cfg.q, cfg.workers)
    flagged = sum(int(r.flagged.sum()) for r in b.runs.values())
    head = _header("background", cfg, {"nodes": len(dist), "flagged_points": flagged,
                                       "delta": "all - E1=0 - E2=0 + E1=E2=0"})
    names = list(b.runs)
    cols = ["delta3_tilde", "delta"] + [RUN_COLUMNS[n] for n in names]
    rows = (
        [d, b.delta[i]] + [b.runs[n].npcr[i] for n in names] for i, d in enumerate(b.delta3)
    )
    return {"background.csv": _csv(head, cols, rows)}, EXIT_OK


def _table1(cfg: RunConfig) -> tuple[dict[str, str], int]:
    rows = table1_rows(cfg.params, cfg.q, T=cfg.T, dt=cfg.dt)
    head = _header("table1", cfg, {"L": "per row (see column)"})
    cols = ["g_tilde", "delta3_tilde", "L", "solver", "estimate", "ratio",
            "reference_solver", "reference_estimate"]
    data = ([r.g_tilde, r.delta3_tilde, r.L, r.solver, r.estimate, r.ratio,
             r.reference_solver, r.reference_estimate] for r in rows)
    return {"table1.csv": _csv(head, cols, data)}, EXIT_OK


def _validate(cfg: RunConfig) -> tuple[dict[str, str], int]:
    checks = run_invariants(cfg.params, cfg.q)
    report = {
        "version": __version__,
        "parameters": {k: v for k, v in cfg.metadata().items()},
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
        "passed": all(c.passed for c in checks),
    }
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    return {"validate.json": text}, EXIT_OK if report["passed"] else EXIT_VALIDATION


COMMANDS = {
    "spectrum": (_spectrum, "distribution-averaged spectrum vs delta3_tilde"),
    "surface": (_surface, "single-coupling (g_tilde, delta3_tilde) surface"),
    "background": (_background, "four runs and their background-subtracted combination"),
    "table1": (_table1, "solver vs pathway estimate at the six reference points"),
    "validate": (_validate, "invariant suite, pass/fail summary"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--workers", type=int, metavar="INT", help="worker processes")
    common.add_argument("--q", type=int, metavar="INT", help="harmonic truncation order")
    common.add_argument("--grid", metavar="LO:HI:STEP", help="delta3_tilde grid")
    common.add_argument("--distribution", metavar="KIND", help="delta | tem00 | table:PATH")
    common.add_argument("--seedless", action="store_true",
                        help="assert that the run uses no randomness (always true)")
    parser = argparse.ArgumentParser(
        prog="mpcspec",
        description="Multiphoton coincidence spectra of a driven, damped atom-cavity system. "
                    "Rates are in units of kappa, detunings in units of g_f.",
    )
    parser.add_argument("--version", action="version", version=f"mpcspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    over = {}
    for key in ("out", "workers", "q", "grid", "distribution"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    if not over:
        return cfg
    text_cfg = replace(cfg, **over)
    if text_cfg.q < 1 or text_cfg.workers < 1:
        raise ConfigError("--q and --workers must be >= 1")
    parse_grid(text_cfg.grid)
    if not (text_cfg.distribution in ("delta", "tem00") or text_cfg.distribution.startswith("table:")):
        raise ConfigError("--distribution must be delta, tem00 or table:PATH")
    return text_cfg


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out_dir / name
            tmp = path.with_suffix(path.suffix + ".part")
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(tmp)
        for tmp in written:
            tmp.replace(tmp.with_suffix(""))
    except BaseException:
        for tmp in written:
            tmp.unlink(missing_ok=True)
        raise


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler, _ = COMMANDS[args.command]
    try:
        files, status = handler(cfg)
    except (SolverError, PositivityError, TraceDriftError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_all(Path(cfg.out), files)
    return status


if __name__ == "__main__":
    sys.exit(main())
