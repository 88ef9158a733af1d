"""Command-line interface: ``suzuki-tower <subcommand> [options]``.

Every option can also be set through an environment variable named
``SUZUKI_TOWER_<OPTION>`` (for example ``SUZUKI_TOWER_CACHE``); flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import embed as E
from . import pipeline as PL
from .cache import CacheError
from .constructions import BudgetExceededError, ConstructionError
from .geometry import GeometryError
from .perm import GeneratorFileError, PermutationError
from .report import FAIL, PASS, VerificationReport, render_value
from .valuations import ValuationError

ENV_PREFIX = "SUZUKI_TOWER_"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CACHE = 4
EXIT_BUDGET = 5
EXIT_CONSTRUCTION = 6

BUILD_TARGETS = {
    "h21": ["H21"],
    "hex22": ["H2", "H2D"],
    "l3cubed": ["L3cubed"],
    "hj": ["HJ"],
    "g24": ["G24"],
}
BUILD_GROUP = {"hex22": "u33", "hj": "j2", "g24": "g24"}
VALUATION_GEOMS = {"h2d": "H2D", "hj": "HJ"}

log = logging.getLogger("suzuki_tower")


class UsageError(Exception):
    pass


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    p.add_argument("--cache", help="cache directory (default ./suzuki-tower-cache)")
    for group in PL.GROUP_FILES:
        p.add_argument(f"--gens-{group}", metavar="FILE", help=f"generator file for {group}")
    p.add_argument("--seed", type=int, help="seed for the involution search and sampling (default 1)")
    p.add_argument("--threads", type=int, help="worker processes for valuation enumeration (default 1)")
    p.add_argument("--budget", type=int, help="node cap for embedding searches (default 1e9)")
    p.add_argument("--iso-budget", type=int, help="node cap for the direct isomorphism searches (default 1e5)")
    p.add_argument("--format", choices=("tsv", "json"), help="report format (default tsv)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="suzuki-tower",
        description="Build and verify the near polygons of the Suzuki tower and their valuation geometries.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], allow_abbrev=False, help="build a geometry into the cache")
    b.add_argument("target", choices=sorted(BUILD_TARGETS))
    b.add_argument("--gens", metavar="FILE", help="generator file for this target's group")

    v = sub.add_parser("verify", parents=[common], allow_abbrev=False, help="re-verify geometry statistics")
    grp = v.add_mutually_exclusive_group()
    grp.add_argument("--all", action="store_true", help="all six geometries (default)")
    grp.add_argument("--geom", metavar="NAME")

    for name, text in (
        ("valuations", "enumerate valuations and check the type table"),
        ("vgeom", "build the valuation geometry and check the line table"),
        ("tables", "cell-by-cell reproduction of the type and line tables"),
    ):
        sp = sub.add_parser(name, parents=[common], allow_abbrev=False, help=text)
        sp.add_argument("--geom", required=True, choices=sorted(VALUATION_GEOMS))

    lm = sub.add_parser("lemmas", parents=[common], allow_abbrev=False, help="run the valuation-geometry structure checks")
    lm.add_argument("--id", choices=sorted(PL.LEMMAS))

    em = sub.add_parser("embed", parents=[common], allow_abbrev=False, help="search for a full isometric embedding")
    em.add_argument("--small", required=True, metavar="NAME")
    em.add_argument("--big", required=True, metavar="NAME")

    sub.add_parser("pipeline", parents=[common], allow_abbrev=False, help="run every check and write the consolidated report")
    return parser


def _pick(args, name, cast=str, default=None):
    value = getattr(args, name.replace("-", "_"), None)
    if value is None:
        env = _env(name)
        if env is not None:
            try:
                value = cast(env)
            except ValueError as exc:
                raise UsageError(f"{ENV_PREFIX}{name.upper().replace('-', '_')}: {exc}") from exc
    return default if value is None else value


def config_from_args(args) -> PL.PipelineConfig:
    gens = {}
    for group in PL.GROUP_FILES:
        path = _pick(args, f"gens-{group}")
        if path:
            gens[group] = path
    if getattr(args, "gens", None):
        if args.target not in BUILD_GROUP:
            raise UsageError(f"build {args.target} takes no generator file")
        gens[BUILD_GROUP[args.target]] = args.gens
    try:
        return PL.PipelineConfig(
            cache_dir=_pick(args, "cache", default="suzuki-tower-cache"),
            gens=gens,
            seed=_pick(args, "seed", int, 1),
            threads=_pick(args, "threads", int, 1),
            budget=_pick(args, "budget", int, 10**9),
            iso_budget=_pick(args, "iso-budget", int, 10**5),
            fmt=_pick(args, "format", default="tsv"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _emit(report: VerificationReport, fmt: str, out) -> int:
    out.write(report.render(fmt))
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def _save(ws: PL.Workspace, stem: str, report: VerificationReport) -> None:
    if ws.cache is not None:
        ws.cache.write(f"reports/{stem}.tsv", report.to_tsv())
        ws.cache.write(f"reports/{stem}.json", report.to_json())


def cmd_build(ws, args, out) -> int:
    names = BUILD_TARGETS[args.target]
    for name in names:
        ws.named(name)
    report = PL.verify_geometries(ws, names)
    _save(ws, f"build-{args.target}", report)
    return _emit(report, ws.config.fmt, out)


def cmd_verify(ws, args, out) -> int:
    names = [PL.canonical_name(args.geom)] if args.geom else list(PL.GEOMETRIES)
    bad = [n for n in names if n not in PL.GEOMETRIES]
    if bad:
        raise UsageError(f"verify works on built geometries, not {bad[0]}")
    return _emit(PL.verify_geometries(ws, names), ws.config.fmt, out)


def _stage_report(ws, fn, **kw) -> VerificationReport:
    report = VerificationReport()
    fn(ws, PL.Recorder(report), **kw)
    return report


def cmd_valuations(ws, args, out) -> int:
    name = VALUATION_GEOMS[args.geom]
    report = _stage_report(ws, PL.type_table_checks, name=name)
    return _emit(report, ws.config.fmt, out)


def cmd_vgeom(ws, args, out) -> int:
    name = VALUATION_GEOMS[args.geom]
    report = _stage_report(ws, PL.line_table_checks, name=name)
    return _emit(report, ws.config.fmt, out)


def cmd_tables(ws, args, out) -> int:
    rows = PL.table_rows(ws, args.geom)
    if ws.config.fmt == "json":
        out.write(json.dumps(rows, indent=1, sort_keys=True, default=list) + "\n")
    else:
        out.write("table\trow\tcolumn\texpected\tobserved\tstatus\n")
        for r in rows:
            status = PASS if r["pass"] else FAIL
            out.write(
                f"{r['table']}\t{r['row']}\t{r['column']}\t{render_value(r['expected'])}\t"
                f"{render_value(r['observed'])}\t{status}\n"
            )
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_CHECK_FAILED


def cmd_lemmas(ws, args, out) -> int:
    report = _stage_report(ws, PL.check_lemmas, only=args.id)
    return _emit(report, ws.config.fmt, out)


def cmd_embed(ws, args, out) -> int:
    small, big = PL.canonical_name(args.small), PL.canonical_name(args.big)
    res = ws.embedding(small, big)
    payload = {"small": small, "big": big, "status": res.status}
    if res.found:
        payload["verified"] = E.verify_embedding(res.embedding).ok
        payload["map"] = list(res.embedding.point_map)
    if ws.config.fmt == "json":
        out.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        out.write(f"small\t{small}\nbig\t{big}\nstatus\t{res.status}\n")
        if res.found:
            out.write(f"verified\t{payload['verified']}\nmap\t{' '.join(map(str, payload['map']))}\n")
    if res.status == E.BUDGET:
        return EXIT_BUDGET
    if res.found and not payload["verified"]:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_pipeline(ws, args, out) -> int:
    report = PL.run_stages(ws)
    _save(ws, "pipeline", report)
    if ws.cache is not None:
        ws.cache.path("reports/timings.tsv").write_text(report.timings_tsv())
    return _emit(report, ws.config.fmt, out)


COMMANDS = {
    "build": cmd_build,
    "verify": cmd_verify,
    "valuations": cmd_valuations,
    "vgeom": cmd_vgeom,
    "tables": cmd_tables,
    "lemmas": cmd_lemmas,
    "embed": cmd_embed,
    "pipeline": cmd_pipeline,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        ws = PL.Workspace(config)
        return COMMANDS[args.command](ws, args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PL.InputError, GeneratorFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConstructionError, GeometryError, ValuationError, PermutationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
