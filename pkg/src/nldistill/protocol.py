"""Iterated distillation p -> W(p, p) and the quantities tracked along the way."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .box import (
    FREE_INDICES,
    PR,
    VERTICES,
    Box,
    CHSH_SIGNS,
    BoxError,
    NLSPoint,
    cc_trivial,
    chsh_max,
    correlators,
    local_vertex,
    mix,
    nl,
    reconstruct,
    uffink_lhs,
)
from .search import FaceSpec, _as_face, face_closure
from .wiring import Wiring, apply_wiring, parse_wiring, wire_entries

MODES = ("exact", "float")
DEFAULT_TOL = 1e-9
DEFAULT_MAX_BITS = 4096


class ExactOverflow(ArithmeticError):
    def __init__(self, step, bits):
        self.step, self.bits = step, bits
        super().__init__(
            f"exact entries reached {bits} bits at step {step}; rerun with mode='float'"
        )


class InvalidStart(ValueError):
    pass


class FaceNotClosedUnderWiring(ValueError):
    pass


@dataclass(frozen=True)
class StepRecord:
    n: int
    c: Optional[tuple]  # (c0, c1..c8) when the box lies in the nonlocal simplex
    nl: object
    chsh_max: object
    uffink_lhs: object
    cc_trivial: bool
    distance: object  # L1 distance to PR


@dataclass
class Trajectory:
    mode: str
    wiring_id: int
    boxes: list
    steps: list
    converged_at: Optional[int] = None
    stalled_at: Optional[int] = None

    @property
    def points(self) -> list:
        out = []
        for box, step in zip(self.boxes, self.steps):
            out.append(NLSPoint(step.c[0], step.c[1:]) if self.mode == "exact" and step.c else box)
        return out

    def to_json(self) -> list:
        conv = _exact_str if self.mode == "exact" else float
        return [
            {
                "n": s.n,
                "c": [conv(v) for v in s.c] if s.c is not None else None,
                "nl": conv(s.nl),
                "chsh_max": conv(s.chsh_max),
                "uffink_lhs": conv(s.uffink_lhs),
                "cc_trivial": s.cc_trivial,
            }
            for s in self.steps
        ]


def _exact_str(v) -> str:
    return str(Fraction(v))


_PR_FLOAT = np.array([float(v) for v in PR], dtype=float)


def _record(n: int, p, exact: bool) -> StepRecord:
    free = [p[k] for k in FREE_INDICES]
    total = sum(free)
    inside = total <= 1 if exact else total <= 1 + 1e-12
    c = (1 - total, *free) if inside else None
    if exact:
        distance = sum(abs(a - b) for a, b in zip(p, PR))
    else:
        distance = float(np.abs(np.asarray(p) - _PR_FLOAT).sum())
        c = tuple(float(v) for v in c) if c is not None else None
    return StepRecord(n, c, nl(p), chsh_max(p), uffink_lhs(p), cc_trivial(p), distance)


def _float_step(w: Wiring, p: np.ndarray) -> np.ndarray:
    out = np.array(wire_entries(w, p.tolist(), p.tolist()), dtype=float)
    blocks = np.clip(out.reshape(4, 4), 0.0, None)
    return (blocks / blocks.sum(axis=1, keepdims=True)).reshape(16)


def _start_box(start, mode):
    if isinstance(start, NLSPoint):
        start = reconstruct(start)
    if mode == "exact":
        try:
            return start if isinstance(start, Box) else Box(tuple(start))
        except (BoxError, TypeError, ValueError) as exc:
            raise InvalidStart(str(exc)) from None
    arr = np.array([float(v) for v in start], dtype=float)
    if arr.shape != (16,) or np.any(arr < -1e-12):
        raise InvalidStart("a float start needs 16 nonnegative entries")
    blocks = np.clip(arr.reshape(4, 4), 0.0, None)
    if np.any(np.abs(blocks.sum(axis=1) - 1) > 1e-9):
        raise InvalidStart("every input block of the start box must sum to 1")
    return (blocks / blocks.sum(axis=1, keepdims=True)).reshape(16)


def iterate(w: Wiring, start, n_max: int = 30, tol: float = DEFAULT_TOL,
            mode: str = "exact", max_bits: int = DEFAULT_MAX_BITS,
            patience: int = 3) -> Trajectory:
    """Apply p -> W(p, p) up to ``n_max`` times.

    Stops early on convergence (L1 distance to PR below ``tol``) or when NL
    has failed to grow by more than ``tol`` for ``patience`` consecutive
    steps. Exact mode raises :class:`ExactOverflow` once any numerator or
    denominator exceeds ``max_bits`` bits.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    exact = mode == "exact"
    p = _start_box(start, mode)
    first = _record(0, p, exact)
    traj = Trajectory(mode, w.id, [p], [first])
    if first.distance < tol:
        traj.converged_at = 0
        return traj
    flat = 0
    for n in range(1, n_max + 1):
        if exact:
            p = apply_wiring(w, p, p)
            bits = max(max(v.numerator.bit_length(), v.denominator.bit_length()) for v in p)
            if bits > max_bits:
                raise ExactOverflow(n, bits)
        else:
            p = _float_step(w, p)
        rec = _record(n, p, exact)
        prev = traj.steps[-1]
        traj.boxes.append(p)
        traj.steps.append(rec)
        if rec.distance < tol:
            traj.converged_at = n
            break
        flat = flat + 1 if rec.nl - prev.nl <= tol else 0
        if flat >= patience:
            traj.stalled_at = n
            break
    return traj


def closed_form_1d(c0, n: int):
    """PR weight after ``n`` rounds on a one-dimensional face: 1 - (1 - c0)^(2^n)."""
    return 1 - (1 - c0) ** (2 ** n)


def recurrence_step_78(c: Sequence) -> tuple:
    """One round of the face {L7, L8} map under the shared 1D/2D L7 wiring."""
    c0, c7, c8 = c
    return (
        (2 - c0 - c8) * c0,
        (c0 * c8 + 2 * c7 * c7 + 2 * c8 * c8) / 2,
        (c0 + 4 * c7) * c8 / 2,
    )


@dataclass(frozen=True)
class FormulaCheck:
    vertex: int
    c0: Fraction
    nl_out: Fraction
    expected: Fraction

    @property
    def ok(self) -> bool:
        return self.nl_out == self.expected


def verify_distillation_formula_1d(samples: Sequence) -> list:
    """NL(W(p, p)) against c0 (2 - c0) on every edge {PR, L_i} with its reference wiring."""
    checks = []
    for i in range(1, 9):
        w = parse_wiring(f"table3:L{i}")
        for c0 in samples:
            c0 = Fraction(c0)
            if not 0 < c0 < 1:
                raise ValueError(f"samples must lie in (0, 1), got {c0}")
            p = mix([(c0, PR), (1 - c0, local_vertex(i))])
            checks.append(FormulaCheck(i, c0, nl(apply_wiring(w, p, p)), c0 * (2 - c0)))
    return checks


# ---------------------------------------------------------------------------
# flow maps on two-dimensional faces

_VERTEX_CORR = [correlators(v) for v in VERTICES]


def _corr_of(weights: dict) -> tuple:
    return tuple(
        sum(w * _VERTEX_CORR[k][xy] for k, w in weights.items()) for xy in range(4)
    )


def _uffink_from_corr(e) -> Fraction:
    return (e[0] + e[2]) ** 2 + (e[1] - e[3]) ** 2


@dataclass(frozen=True)
class FlowRecord:
    ci: Fraction
    cj: Fraction
    dci: Fraction
    dcj: Fraction
    nl: Fraction
    uffink_lhs: Fraction


@dataclass
class FlowField:
    face: FaceSpec
    wiring_id: int
    grid_n: int
    records: list = field(default_factory=list)

    HEADER = ("ci", "cj", "dci", "dcj", "nl", "uffink_lhs")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.HEADER)
        for r in self.records:
            writer.writerow(["%.17g" % float(getattr(r, h)) for h in self.HEADER])
        return buf.getvalue()


def _point_nl(weights: dict) -> Fraction:
    e = _corr_of(weights)
    best = max(sum(s * v for s, v in zip(signs, e)) for signs in CHSH_SIGNS)
    return max(Fraction(0), (best - 2) / 2)


def flow_field(face, w: Wiring, grid_n: int) -> FlowField:
    """One-step displacement of every grid point of a closed two-dimensional face.

    Points run row-major over (c_i, c_j) with c_i + c_j <= 1 and c0 the rest.
    """
    face = _as_face(face)
    if face.dim != 2:
        raise ValueError("flow fields are defined on two-vertex faces")
    if grid_n < 1:
        raise ValueError("grid_n must be positive")
    flow = face_closure(face, w)
    if flow is None:
        raise FaceNotClosedUnderWiring(f"wiring {w.id} does not keep face {face} closed")
    i, j = face.vertices
    field_ = FlowField(face, w.id, grid_n)
    for a in range(grid_n + 1):
        for b in range(grid_n + 1 - a):
            ci, cj = Fraction(a, grid_n), Fraction(b, grid_n)
            c0 = 1 - ci - cj
            n0, ni, nj = flow((c0, ci, cj))
            weights = {0: c0, i: ci, j: cj}
            field_.records.append(FlowRecord(
                ci, cj, ni - ci, nj - cj, _point_nl(weights), _uffink_from_corr(_corr_of(weights)),
            ))
    return field_


@dataclass(frozen=True)
class Crossings:
    cc_step: Optional[int]
    uffink_step: Optional[int]
    converged_step: Optional[int]

    def to_dict(self) -> dict:
        return {"cc_trivial": self.cc_step, "uffink_violation": self.uffink_step,
                "converged": self.converged_step}


def threshold_crossings(traj: Trajectory, tol: float = DEFAULT_TOL) -> Crossings:
    """First steps with CHSH >= 4 sqrt(2/3), Uffink LHS > 4, and distance to PR < tol."""
    def first(pred):
        return next((s.n for s in traj.steps if pred(s)), None)

    return Crossings(
        first(lambda s: s.cc_trivial),
        first(lambda s: s.uffink_lhs > 4),
        first(lambda s: s.distance < tol),
    )


@dataclass(frozen=True)
class UffinkScan:
    face: FaceSpec
    grid_n: int
    nonlocal_points: int
    satisfying_points: int
    min_lhs: Fraction
    example: Optional[tuple]  # (c0, ci, cj) of the first satisfying point

    def to_dict(self) -> dict:
        return {
            "face": list(self.face.vertices),
            "grid": self.grid_n,
            "nonlocal_points": self.nonlocal_points,
            "satisfying_points": self.satisfying_points,
            "min_uffink_lhs": str(self.min_lhs) if self.min_lhs is not None else None,
            "example": [str(v) for v in self.example] if self.example else None,
            "uffink_compatible": self.satisfying_points > 0,
        }


def uffink_scan(face, grid_n: int = 50) -> UffinkScan:
    """Count nonlocal points (c0 > 0) of a face grid obeying Uffink's inequality."""
    face = _as_face(face)
    dim = face.dim
    total = hits = 0
    best, example = None, None
    for comp in itertools.product(range(grid_n + 1), repeat=dim):
        rest = grid_n - sum(comp)
        if rest <= 0:
            continue
        weights = {0: Fraction(rest, grid_n)}
        weights.update((k, Fraction(v, grid_n)) for k, v in zip(face.vertices, comp))
        lhs = _uffink_from_corr(_corr_of(weights))
        total += 1
        best = lhs if best is None else min(best, lhs)
        if lhs <= 4:
            hits += 1
            if example is None:
                example = tuple(weights[k] for k in face.support)
    return UffinkScan(face, grid_n, total, hits, best, example)
