"""Command line: ``folnerlab {validate,run,check,gen}``.

Exit codes: 0 pass, 1 verdict failure, 2 validation or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from folnerlab.config import ConfigError, dump_config, geometric_schedule, load_config, parse_config
from folnerlab.dynamics import ProjectionAmbiguityError, ValidationError
from folnerlab.harness import check_inequalities, emit_csv, run_experiment, validate_config
from folnerlab.matrix import NotHermitianError, NotPositiveError, SignatureError
from folnerlab.systems import GEN_KINDS, generate_example

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="folnerlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("validate", help="check the system and model invariants")
    v.add_argument("config")

    r = sub.add_parser("run", help="norm sequence vs the invariant-state maximum; writes a CSV")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--kmax", type=int, help="truncate (list) or regenerate (geometric) the schedule up to kmax")
    r.add_argument("--schedule", choices=("geometric", "list"), help="override the schedule kind")
    r.add_argument("--json", help="also write the full report as JSON")

    c = sub.add_parser("check", help="run every inequality suite")
    c.add_argument("config")
    c.add_argument("--json", help="also write the report as JSON")

    g = sub.add_parser("gen", help="write a random valid config")
    g.add_argument("--kind", required=True, choices=GEN_KINDS)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--dim", required=True, type=int)
    g.add_argument("--out", required=True)
    return p


def _schedule_override(cfg, kind: str | None, kmax: int | None):
    if kind is None and kmax is None:
        return cfg
    if kmax is not None and kmax < 1:
        raise ConfigError("--kmax", "must be >= 1")
    top = kmax if kmax is not None else max(cfg.schedule)
    if kind == "geometric":
        return cfg.with_schedule(geometric_schedule(top))
    if kind == "list" and kmax is not None and cfg.raw.get("schedule", {}).get("kind") == "geometric":
        return cfg.with_schedule(list(range(1, top + 1)))
    ks = [k for k in cfg.schedule if k <= top]
    return cfg.with_schedule(ks or [top])


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=1, default=float) + "\n", encoding="utf-8")


def _cmd(args: argparse.Namespace) -> int:
    if args.cmd == "gen":
        try:
            raw = generate_example(args.kind, args.seed, args.dim)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        parse_config(raw)
        dump_config(raw, args.out)
        print(f"wrote {args.out}")
        return EXIT_PASS

    cfg = load_config(args.config)
    if args.cmd == "validate":
        rep = validate_config(cfg)
        for c in rep.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name} [{c.where}]: {c.residual:.3g} (tol {c.tol:.1g})")
        return EXIT_PASS if rep.ok else EXIT_INVALID

    if args.cmd == "run":
        cfg = _schedule_override(cfg, args.schedule, args.kmax)
        report = run_experiment(cfg)
        emit_csv(report, args.out)
        _write_json(args.json, report.to_dict())
        for name, ok in report.verdicts.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        print(f"m = {report.m_fixed_point:.15g} (frank-wolfe {report.m_frank_wolfe:.15g}); wrote {args.out}")
        return EXIT_PASS if report.passed else EXIT_FAIL

    report = check_inequalities(cfg)
    for s in report.suites:
        print(s.line())
    _write_json(args.json, report.to_dict())
    if report.suites and report.suites[0].passed is False:
        return EXIT_INVALID
    return EXIT_PASS if report.passed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _cmd(args)
    except (ConfigError, ValidationError, SignatureError, NotHermitianError, NotPositiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ProjectionAmbiguityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
