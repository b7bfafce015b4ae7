"""Command line entry point: ``nldistill <subcommand> ...``.

Exit codes: 0 success or match, 1 invalid input, 2 mismatch against the
built-in reference lists, 3 internal or I/O error.
"""

from __future__ import annotations

import argparse
import importlib.resources
import itertools
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import presets
from .box import BoxError, NotInNonlocalSimplex, decompose, diagnostics, parse_box
from .protocol import (
    MODES,
    ExactOverflow,
    FaceNotClosedUnderWiring,
    InvalidStart,
    flow_field,
    iterate,
    threshold_crossings,
    uffink_scan,
)
from .search import (
    CombinedReducer,
    CountReducer,
    FaceSpec,
    NLCensusReducer,
    PrFixingReducer,
    SearchError,
    classify_face,
    compute_profiles,
    pr_fixing_profiles,
    read_profile_cache,
    sweep,
    write_profile_cache,
)
from .wiring import parse_wiring

log = logging.getLogger("nldistill")

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH, EXIT_INTERNAL = 0, 1, 2, 3

# dim -> number of faces expected to be fully distillable
EXPECTED_DISTILLABLE = {1: 8, 2: 12, 3: 16, 4: 0}


SUBCOMMANDS = ("verify-counts", "classify-faces", "distill", "flowmap", "uffink", "check-point")


def load_schema(subcommand: str) -> dict:
    """JSON schema of the ``--json`` document printed by ``subcommand``."""
    if subcommand not in SUBCOMMANDS:
        raise KeyError(subcommand)
    ref = importlib.resources.files("nldistill") / "schemas" / f"{subcommand}.schema.json"
    return json.loads(ref.read_text())


class UsageError(Exception):
    """Bad user input detected after argparse; maps to exit 1."""


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None


def _face(text: str, dim=None) -> FaceSpec:
    try:
        face = FaceSpec.parse(text)
    except (SearchError, ValueError) as exc:
        raise UsageError(f"bad face {text!r}: {exc}") from None
    if dim is not None and face.dim != dim:
        raise UsageError(f"face must have {dim} vertices, got {face.dim}")
    return face


def _wiring(text: str):
    try:
        return parse_wiring(text)
    except (ValueError, IndexError) as exc:
        raise UsageError(str(exc)) from None


def _emit(args, doc: dict, text_lines) -> None:
    if args.json:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        for line in text_lines:
            print(line)


def _fmt(values) -> str:
    return "{" + ", ".join(str(v) for v in values) + "}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_counts(args) -> int:
    reducer = CombinedReducer(CountReducer(), PrFixingReducer(), NLCensusReducer())
    total, fixing, census = sweep(reducer, partitions=max(args.threads, 1), threads=args.threads)
    if args.cache:
        _refresh_cache(args.cache, fixing)
    doc = {
        "total_wirings": int(total),
        "pr_fixing": len(fixing),
        "nl00_values": [str(v) for v in census.values("nl00")],
        "nl_pr_l_values": [str(v) for v in census.union_values("nl_pr_l")],
        "nl_l_pr_values": [str(v) for v in census.union_values("nl_l")],
        "counts": census.to_dict(),
    }
    expected = {
        "total_wirings": presets.TOTAL_WIRINGS,
        "pr_fixing": presets.PR_FIXING_COUNT,
        "nl00_values": list(presets.NL00_VALUES),
        "nl_pr_l_values": list(presets.NL_MIXED_VALUES),
        "nl_l_pr_values": list(presets.NL_MIXED_VALUES),
    }
    doc["matches"] = all(doc[k] == v for k, v in expected.items())
    _emit(args, doc, [
        f"total wirings   {doc['total_wirings']}",
        f"PR-fixing       {doc['pr_fixing']}",
        f"NL(W(PR,PR))    {_fmt(doc['nl00_values'])}",
        f"NL(W(PR,L_i))   {_fmt(doc['nl_pr_l_values'])}",
        f"NL(W(L_i,PR))   {_fmt(doc['nl_l_pr_values'])}",
        "match" if doc["matches"] else "MISMATCH",
    ])
    return EXIT_OK if doc["matches"] else EXIT_MISMATCH


def _refresh_cache(path: str, fixing: list) -> None:
    if Path(path).exists():
        try:
            if read_profile_cache(path).ids.tolist() == fixing:
                return
            log.warning("cache %s lists different wirings; rewriting", path)
        except (OSError, ValueError) as exc:
            log.warning("ignoring cache %s: %s", path, exc)
    write_profile_cache(path, compute_profiles(fixing))


def _distillable(report, dim: int) -> bool:
    # one- and two-vertex faces need a single wiring for the whole face
    if dim <= 2:
        return report.single_wiring_witness is not None
    return report.pointwise_distillable


def _expected_faces(dim: int) -> list:
    if dim == 1:
        return [(i,) for i in range(1, 9)]
    return list({2: presets.DISTILLABLE_PAIRS, 3: presets.DISTILLABLE_TRIPLES, 4: ()}[dim])


def cmd_classify_faces(args) -> int:
    dim = args.dim
    profiles = pr_fixing_profiles(args.cache, args.threads)
    reports = [classify_face(face, profiles) for face in itertools.combinations(range(1, 9), dim)]
    found = [list(r.face.vertices) for r in reports if _distillable(r, dim)]
    doc = {
        "dim": dim,
        "pr_fixing_wirings": len(profiles),
        "faces": [r.to_dict() for r in reports],
        "distillable": found,
        "isotropic_failures": [list(r.face.vertices) for r in reports if not r.isotropic_distillable],
    }
    lines = [
        f"{str(r.face):>8}  distillable={_distillable(r, dim)!s:<5}  "
        f"witnesses={len(r.witnesses):<4} isotropic={r.isotropic_distillable}"
        for r in reports
    ]
    lines.append(f"{len(found)} of {len(reports)} faces distillable")
    status = EXIT_OK
    if args.check:
        expected = [list(f) for f in _expected_faces(dim)]
        ok = found == expected and len(found) == EXPECTED_DISTILLABLE[dim]
        if dim == 4:
            ok = ok and len(doc["isotropic_failures"]) == len(reports)
        doc["expected"] = expected
        doc["matches"] = ok
        lines.append("check: match" if ok else "check: MISMATCH")
        status = EXIT_OK if ok else EXIT_MISMATCH
    _emit(args, doc, lines)
    return status


def _start_point(face: FaceSpec, text: str):
    values = [_fraction(v) for v in text.split(",") if v.strip()]
    try:
        if len(values) == 1:
            return face.isotropic(values[0])
        if len(values) == face.dim + 1:
            return face.point(values[0], values[1:])
    except (BoxError, ValueError) as exc:
        raise UsageError(f"invalid point: {exc}") from None
    raise UsageError(f"point needs 1 or {face.dim + 1} coordinates (c0 then the face weights)")


def cmd_distill(args) -> int:
    face = _face(args.face)
    w = _wiring(args.wiring)
    start = _start_point(face, args.point)
    try:
        traj = iterate(w, start, n_max=args.iters, tol=args.tol, mode=args.mode)
    except InvalidStart as exc:
        raise UsageError(str(exc)) from None
    crossings = threshold_crossings(traj, args.tol)
    last = traj.steps[-1]
    doc = {
        "face": list(face.vertices),
        "wiring_id": w.id,
        "wiring": str(w),
        "mode": traj.mode,
        "steps": traj.to_json(),
        "converged_at": traj.converged_at,
        "stalled_at": traj.stalled_at,
        "crossings": crossings.to_dict(),
        "final_nl": float(last.nl),
    }
    lines = [f"wiring {w.id}  {w}", f"{'n':>3} {'c0':>22} {'NL':>22} {'CHSH':>22} {'uffink':>22}"]
    for s in traj.steps:
        c0 = float(s.c[0]) if s.c is not None else float("nan")
        lines.append(f"{s.n:>3} {c0:>22.15g} {float(s.nl):>22.15g} "
                     f"{float(s.chsh_max):>22.15g} {float(s.uffink_lhs):>22.15g}")
    lines.append(f"converged_at={traj.converged_at} stalled_at={traj.stalled_at} "
                 f"cc_step={crossings.cc_step} uffink_step={crossings.uffink_step}")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_flowmap(args) -> int:
    face = _face(args.face, dim=2)
    w = _wiring(args.wiring)
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    try:
        field_ = flow_field(face, w, args.grid)
    except FaceNotClosedUnderWiring as exc:
        raise UsageError(str(exc)) from None
    Path(args.out).write_text(field_.to_csv())
    doc = {
        "face": list(face.vertices),
        "wiring_id": w.id,
        "grid": args.grid,
        "records": len(field_.records),
        "out": str(args.out),
    }
    _emit(args, doc, [f"wrote {doc['records']} records to {args.out}"])
    return EXIT_OK


def cmd_uffink(args) -> int:
    face = _face(args.face)
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    scan = uffink_scan(face, args.grid)
    doc = scan.to_dict()
    _emit(args, doc, [
        f"face {face}: {scan.satisfying_points} of {scan.nonlocal_points} nonlocal grid points "
        f"satisfy Uffink (min lhs {scan.min_lhs})",
    ])
    return EXIT_OK


def cmd_check_point(args) -> int:
    try:
        box = parse_box(args.box)
    except BoxError as exc:
        doc = {"valid": False, "error": type(exc).__name__, "message": str(exc)}
        _emit(args, doc, [f"invalid box: {exc}"])
        return EXIT_INPUT
    d = diagnostics(box)
    doc = {
        "valid": True,
        "nl": str(d.nl),
        "chsh_max": str(d.chsh_max),
        "uffink_lhs": str(d.uffink_lhs),
        "cc_trivial": d.cc_trivial,
        "nls": None,
        "error": None,
    }
    try:
        pt = decompose(box)
        doc["nls"] = {"c0": str(pt.c0), "c": [str(v) for v in pt.c]}
        where = "c = " + ", ".join(str(v) for v in pt.weights)
    except NotInNonlocalSimplex as exc:
        doc["error"] = "NotInNonlocalSimplex"
        where = str(exc)
    _emit(args, doc, [
        f"NL {d.nl}  CHSH {d.chsh_max}  Uffink {d.uffink_lhs}  CC-trivial {d.cc_trivial}",
        where,
    ])
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for check mismatches
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--cache", help="PR-fixing profile cache (CSV)")
    shared.add_argument("--threads", type=int, default=1, help="worker processes")
    shared.add_argument("--json", action="store_true", help="print a JSON document")

    parser = _Parser(prog="nldistill", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-counts", parents=[shared], help="sweep all wirings")
    p.set_defaults(func=cmd_verify_counts)

    p = sub.add_parser("classify-faces", parents=[shared], help="distillability of faces")
    p.add_argument("--dim", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--check", action="store_true", help="compare with the reference lists")
    p.set_defaults(func=cmd_classify_faces)

    p = sub.add_parser("distill", parents=[shared], help="iterate p -> W(p, p)")
    p.add_argument("--face", required=True, help="local vertices, e.g. 7,8")
    p.add_argument("--point", required=True, help="c0 alone (isotropic) or c0,c_i,...")
    p.add_argument("--wiring", required=True, help="id, table3:L7, table4:L1L3 or A0=..;A1=..;B0=..;B1=..")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--mode", choices=MODES, default="float")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("flowmap", parents=[shared], help="one-step flow on a 2D face (CSV)")
    p.add_argument("--face", required=True)
    p.add_argument("--wiring", required=True)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flowmap)

    p = sub.add_parser("uffink", parents=[shared], help="Uffink scan of a face")
    p.add_argument("--face", required=True)
    p.add_argument("--grid", type=int, default=50)
    p.set_defaults(func=cmd_uffink)

    p = sub.add_parser("check-point", parents=[shared], help="diagnostics of one box")
    p.add_argument("--box", required=True, help="16 entries p1..p16")
    p.set_defaults(func=cmd_check_point)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ExactOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
