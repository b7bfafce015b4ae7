"""Exhaustive search for two-copy distillation protocols.

Everything here runs on the memoized vertex blocks of :mod:`.wiring`: the
output of a wiring on a pair of simplex vertices is assembled from four
precomputed blocks, so a sweep over all 82**4 wirings reduces to gathers and
small integer arithmetic.

Integer conventions: block entries and correlators are numerators over 4;
``nl8`` is ``8 * NL``.
"""

from __future__ import annotations

import csv
import functools
import io
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .box import FREE_INDICES, PR, VERTICES, Box, NLSPoint, NotInNonlocalSimplex, decompose, nl
from .wiring import (
    N_COUPLERS,
    N_WIRINGS,
    Wiring,
    id_chunks,
    split_id,
    vertex_block_box,
    vertex_block_correlators,
    vertex_blocks,
)

log = logging.getLogger(__name__)

SLAB = N_COUPLERS ** 3
GRID_STEP = 20


class SearchError(ValueError):
    pass


class LocalPoint(SearchError):
    pass


class NotPrFixing(SearchError):
    pass


def chsh4_max(e):
    """Max CHSH symmetry from stacked correlators ``e`` (leading axis of 4).

    Without the product constraint the best signs give sum |E|; if the
    sign product comes out positive the smallest |E| is flipped.
    """
    a = np.abs(e)
    total = a.sum(axis=0)
    smallest = a.min(axis=0)
    negative = np.prod(np.sign(e), axis=0) < 0
    return np.where(negative, total, total - 2 * smallest)


# ---------------------------------------------------------------------------
# batches of wiring ids


class WiringBatch:
    """Vectorized view of an ascending array of wiring ids."""

    def __init__(self, ids: np.ndarray):
        self.ids = ids
        a0, a1, b0, b1 = split_id(ids)
        n = N_COUPLERS
        # flat (cA, cB) indices of the blocks for xy = 00, 01, 10, 11
        self._pairs = (a0 * n + b0, a0 * n + b1, a1 * n + b0, a1 * n + b1)

    def __len__(self):
        return len(self.ids)

    def correlators4(self, v: int, w: int) -> np.ndarray:
        table = vertex_block_correlators()[:, :, v, w].reshape(-1)
        return np.stack([table[k] for k in self._pairs]).astype(np.int16)

    def nl8(self, v: int, w: int) -> np.ndarray:
        return np.maximum(chsh4_max(self.correlators4(v, w)) - 8, 0)

    def fixes_pr(self) -> np.ndarray:
        blocks = vertex_blocks()[:, :, 0, 0].reshape(N_COUPLERS * N_COUPLERS, 4)
        ok = np.ones(len(self.ids), dtype=bool)
        pr_nums = np.array([int(4 * v) for v in PR.entries]).reshape(4, 4)
        for k, pairs in enumerate(self._pairs):
            ok &= np.all(blocks[pairs] == pr_nums[k], axis=1)
        return ok


# ---------------------------------------------------------------------------
# reducers: identity / map / combine / finalize


class Reducer:
    def identity(self):
        raise NotImplementedError

    def map(self, batch: WiringBatch):
        raise NotImplementedError

    def combine(self, left, right):
        raise NotImplementedError

    def finalize(self, acc):
        return acc


class CountReducer(Reducer):
    def identity(self):
        return 0

    def map(self, batch):
        return len(batch)

    def combine(self, left, right):
        return left + right


class PrFixingReducer(Reducer):
    def identity(self):
        return np.zeros(0, dtype=np.int64)

    def map(self, batch):
        return batch.ids[batch.fixes_pr()]

    def combine(self, left, right):
        return np.concatenate([left, right])

    def finalize(self, acc):
        return [int(v) for v in acc]


CENSUS_FUNCTIONALS = (
    [("nl00", 0, 0)]
    + [(f"nl_pr_l{i}", 0, i) for i in range(1, 9)]
    + [(f"nl_l{i}_pr", i, 0) for i in range(1, 9)]
)


class NLCensusReducer(Reducer):
    """Histogram of 8*NL for W(PR,PR), W(PR,L_i) and W(L_i,PR)."""

    def identity(self):
        return np.zeros((len(CENSUS_FUNCTIONALS), 9), dtype=np.int64)

    def map(self, batch):
        return np.stack([
            np.bincount(batch.nl8(v, w), minlength=9)
            for _, v, w in CENSUS_FUNCTIONALS
        ])

    def combine(self, left, right):
        return left + right

    def finalize(self, acc):
        return NLCensus(
            {name: {Fraction(k, 8): int(n) for k, n in enumerate(row) if n}
             for (name, _, _), row in zip(CENSUS_FUNCTIONALS, acc)}
        )


class CombinedReducer(Reducer):
    def __init__(self, *parts: Reducer):
        self.parts = parts

    def identity(self):
        return tuple(r.identity() for r in self.parts)

    def map(self, batch):
        return tuple(r.map(batch) for r in self.parts)

    def combine(self, left, right):
        return tuple(r.combine(a, b) for r, a, b in zip(self.parts, left, right))

    def finalize(self, acc):
        return tuple(r.finalize(a) for r, a in zip(self.parts, acc))


def _run_partition(reducer: Reducer, lo: int, hi: int, chunk: int):
    acc = reducer.identity()
    for ids in id_chunks(lo, hi, chunk):
        acc = reducer.combine(acc, reducer.map(WiringBatch(ids)))
    return acc


def partition_bounds(lo: int, hi: int, partitions: int) -> list:
    cuts = [lo + (hi - lo) * k // partitions for k in range(partitions + 1)]
    return list(zip(cuts[:-1], cuts[1:]))


def sweep(reducer: Reducer, lo: int = 0, hi: int = N_WIRINGS, partitions: int = 1,
          threads: int = 1, chunk: int = SLAB):
    """Map-reduce ``reducer`` over wiring ids [lo, hi).

    Partials are combined in ascending id order, so the result does not
    depend on ``partitions`` or ``threads``.
    """
    if not 0 <= lo <= hi <= N_WIRINGS:
        raise ValueError(f"bad wiring interval [{lo}, {hi})")
    if partitions < 1 or threads < 1:
        raise ValueError("partitions and threads must be positive")
    bounds = partition_bounds(lo, hi, partitions)
    if threads == 1:
        partials = [_run_partition(reducer, a, b, chunk) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_partition, reducer, a, b, chunk) for a, b in bounds]
            partials = [f.result() for f in futures]
    acc = reducer.identity()
    for part in partials:
        acc = reducer.combine(acc, part)
    return reducer.finalize(acc)


@dataclass(frozen=True)
class NLCensus:
    counts: dict  # functional name -> {nl value: count}

    def values(self, name: str) -> list:
        return sorted(self.counts[name])

    def union_values(self, prefix: str) -> list:
        found = set()
        for name, hist in self.counts.items():
            if name.startswith(prefix):
                found.update(hist)
        return sorted(found)

    def totals(self) -> dict:
        return {name: sum(hist.values()) for name, hist in self.counts.items()}

    def to_dict(self) -> dict:
        return {
            name: {str(v): n for v, n in sorted(hist.items())}
            for name, hist in self.counts.items()
        }


def nl_value_census(threads: int = 1, partitions: int = 1, lo: int = 0,
                    hi: int = N_WIRINGS) -> NLCensus:
    census = sweep(NLCensusReducer(), lo, hi, partitions=partitions, threads=threads)
    if lo == 0 and hi == N_WIRINGS:
        assert set(census.values("nl00")) <= {0, Fraction(1, 2), 1}
        assert set(census.union_values("nl_pr_l")) <= {0, 1}
        assert set(census.union_values("nl_l")) <= {0, 1}
    return census


@functools.lru_cache(maxsize=None)
def _pr_fixing(threads: int) -> tuple:
    return tuple(sweep(PrFixingReducer(), threads=threads))


def pr_fixing_wirings(threads: int = 1) -> list:
    """Ids of all wirings with W(PR, PR) = PR exactly, ascending."""
    return list(_pr_fixing(threads))


# ---------------------------------------------------------------------------
# basis tables


@dataclass(frozen=True)
class BasisTable:
    """``boxes[v][w] = W(vertex_v, vertex_w)``; vertex 0 is PR, vertex i is L_i."""

    wiring_id: int
    boxes: tuple
    nl00: Fraction
    klass: tuple  # i_k = nl(W(PR,L_k)) + nl(W(L_k,PR)), k = 1..8

    def klass_of(self, k: int) -> int:
        return self.klass[k - 1]


def basis_table(w: Wiring) -> BasisTable:
    boxes = tuple(tuple(vertex_block_box(w, v, u) for u in range(9)) for v in range(9))
    klass = tuple(int(nl(boxes[0][k]) + nl(boxes[k][0])) for k in range(1, 9))
    return BasisTable(w.id, boxes, nl(boxes[0][0]), klass)


@dataclass
class WiringProfiles:
    """Per-wiring NL profile of a set of wirings (typically the PR-fixing ones)."""

    ids: np.ndarray
    nl00_8: np.ndarray
    klass: np.ndarray  # (N, 8)

    def __len__(self):
        return len(self.ids)

    @functools.cached_property
    def correlators4(self) -> np.ndarray:
        """4*E of all 81 basis boxes, shape (N, 9, 9, 4)."""
        a0, a1, b0, b1 = split_id(self.ids)
        e = vertex_block_correlators()
        return np.stack([e[a0, b0], e[a0, b1], e[a1, b0], e[a1, b1]], axis=-1).astype(np.int64)

    @functools.cached_property
    def boxes4(self) -> np.ndarray:
        """Entry numerators (over 4) of all 81 basis boxes, shape (N, 9, 9, 16)."""
        a0, a1, b0, b1 = split_id(self.ids)
        b = vertex_blocks()
        return np.concatenate([b[a0, b0], b[a0, b1], b[a1, b0], b[a1, b1]], axis=-1)

    def index_of(self, wid: int) -> int:
        k = int(np.searchsorted(self.ids, wid))
        if k == len(self.ids) or self.ids[k] != wid:
            raise KeyError(wid)
        return k


def compute_profiles(ids: Sequence[int]) -> WiringProfiles:
    ids = np.asarray(ids, dtype=np.int64)
    batch = WiringBatch(ids)
    nl00 = batch.nl8(0, 0)
    klass = np.stack(
        [(batch.nl8(0, k) + batch.nl8(k, 0)) // 8 for k in range(1, 9)], axis=1
    ) if len(ids) else np.zeros((0, 8), dtype=np.int64)
    return WiringProfiles(ids, nl00, klass)


CACHE_HEADER = ["wiring_id", "nl00_num", "nl00_den"] + [f"i{k}" for k in range(1, 9)]


def write_profile_cache(path, profiles: WiringProfiles) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CACHE_HEADER)
    for wid, n8, row in zip(profiles.ids, profiles.nl00_8, profiles.klass):
        frac = Fraction(int(n8), 8)
        writer.writerow([int(wid), frac.numerator, frac.denominator] + [int(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_profile_cache(path) -> WiringProfiles:
    """Parse and re-verify a cache file; raise ValueError if anything is off."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CACHE_HEADER:
        raise ValueError("bad cache header")
    try:
        ids = [int(r[0]) for r in rows[1:]]
        nl00 = [Fraction(int(r[1]), int(r[2])) for r in rows[1:]]
        klass = [[int(v) for v in r[3:]] for r in rows[1:]]
    except (ValueError, IndexError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed cache row: {exc}") from None
    if any(len(r) != 8 for r in klass) or ids != sorted(set(ids)):
        raise ValueError("malformed cache rows")
    if ids and not (0 <= ids[0] and ids[-1] < N_WIRINGS):
        raise ValueError("wiring id out of range")
    fresh = compute_profiles(ids)
    if not WiringBatch(fresh.ids).fixes_pr().all():
        raise ValueError("cache lists a wiring that does not fix PR")
    if [Fraction(int(v), 8) for v in fresh.nl00_8] != nl00 or fresh.klass.tolist() != klass:
        raise ValueError("cache profile disagrees with recomputation")
    return fresh


def pr_fixing_profiles(cache: Optional[str] = None, threads: int = 1) -> WiringProfiles:
    """Profiles of the PR-fixing wirings, read from or written to ``cache``."""
    if cache is not None and Path(cache).exists():
        try:
            return read_profile_cache(cache)
        except (OSError, ValueError) as exc:
            log.warning("ignoring cache %s: %s", cache, exc)
    profiles = _default_profiles(threads)
    if cache is not None:
        write_profile_cache(cache, profiles)
    return profiles


@functools.lru_cache(maxsize=None)
def _default_profiles(threads: int) -> WiringProfiles:
    return compute_profiles(pr_fixing_wirings(threads))


# ---------------------------------------------------------------------------
# necessary condition


@dataclass(frozen=True)
class ConditionReport:
    ctilde: tuple  # (c~0, c~1, c~2)
    margin: Fraction
    passes: bool


def necessary_condition(pt: NLSPoint, bt: BasisTable) -> ConditionReport:
    """c0 (NL(B00) - 1) + sum_k c_k (i_k - 1) > 0 is needed for NL(W(p,p)) > NL(p)."""
    if pt.c0 == 0:
        raise LocalPoint("the point is local (c0 = 0)")
    ctilde = [Fraction(0)] * 3
    for ck, ik in zip(pt.c, bt.klass):
        ctilde[ik] += ck
    margin = pt.c0 * (bt.nl00 - 1) + sum(ck * (ik - 1) for ck, ik in zip(pt.c, bt.klass))
    return ConditionReport(tuple(ctilde), margin, margin > 0)


@dataclass(frozen=True)
class FaceSpec:
    """Face conv({PR} + {L_i : i in vertices}) of the nonlocal simplex."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple(sorted(set(int(v) for v in self.vertices)))
        if not verts or len(verts) != len(self.vertices) or not set(verts) <= set(range(1, 9)):
            raise SearchError(f"face must be a nonempty set of distinct indices in 1..8: {self.vertices}")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def parse(cls, text: str) -> "FaceSpec":
        return cls(tuple(int(v) for v in text.replace("L", "").split(",") if v.strip()))

    @property
    def dim(self) -> int:
        return len(self.vertices)

    @property
    def support(self) -> tuple:
        return (0,) + self.vertices

    def point(self, c0, local) -> NLSPoint:
        """Point with PR weight ``c0`` and weights ``local`` on the face's vertices."""
        weights = {0: c0}
        weights.update(zip(self.vertices, local))
        return NLSPoint.from_weights(weights)

    def isotropic(self, c0) -> NLSPoint:
        c0 = Fraction(c0)
        share = (1 - c0) / self.dim
        return self.point(c0, [share] * self.dim)

    def __str__(self):
        return ",".join(map(str, self.vertices))


def _as_face(face) -> FaceSpec:
    return face if isinstance(face, FaceSpec) else FaceSpec(tuple(face))


@dataclass(frozen=True)
class FaceCondition:
    classes: dict  # k -> i_k
    holds: bool


def face_condition(face, bt: BasisTable) -> FaceCondition:
    """c~2 > c~0 for every strictly positive weighting of the face's vertices."""
    face = _as_face(face)
    if bt.boxes[0][0] != PR:
        raise NotPrFixing(f"wiring {bt.wiring_id} does not map (PR, PR) to PR")
    classes = {k: bt.klass_of(k) for k in face.vertices}
    values = list(classes.values())
    return FaceCondition(classes, min(values) >= 1 and max(values) == 2)


# ---------------------------------------------------------------------------
# face classification


@dataclass(frozen=True)
class FaceGrid:
    """Relative-interior points of a face as integer numerators over ``den``."""

    face: FaceSpec
    den: int
    points: np.ndarray  # (G, 1 + dim), columns c0, c_{v1}, ...
    isotropic: np.ndarray  # bool mask of rows on the isotropic line

    def nls_points(self) -> list:
        return [
            self.face.point(Fraction(int(r[0]), self.den), [Fraction(int(v), self.den) for v in r[1:]])
            for r in self.points
        ]


def face_grid(face, step: int = GRID_STEP) -> FaceGrid:
    """Grid of step 1/``step`` on the open face plus its isotropic points.

    Only points with 0 < c0 < 1 and every local weight positive are kept:
    boundary points belong to lower-dimensional faces.
    """
    face = _as_face(face)
    d = face.dim
    den = step * math.lcm(*range(1, d + 1))
    scale = den // step
    pts = set()
    for comp in itertools.product(range(1, step), repeat=d):
        rest = step - sum(comp)
        if 0 < rest < step:
            pts.add((rest * scale,) + tuple(v * scale for v in comp))
    for k in range(1, step):
        share = (step - k) * scale // d
        pts.add((k * scale,) + (share,) * d)
    points = np.array(sorted(pts), dtype=np.int64).reshape(-1, d + 1)
    iso = np.all(points[:, 1:] == points[:, 1:2], axis=1)
    return FaceGrid(face, den, points, iso)


@dataclass(frozen=True)
class FaceEvaluation:
    """Per-point, per-wiring verdicts on a face grid."""

    grid: FaceGrid
    wiring_ids: np.ndarray  # all profile ids
    passes: np.ndarray  # (G, N) necessary condition
    candidates: np.ndarray  # profile indices with any passing point
    increases: np.ndarray  # (G, len(candidates)) NL(W(p,p)) > NL(p)


def evaluate_face(face, profiles: WiringProfiles, step: int = GRID_STEP,
                  all_wirings: bool = False, block: int = 256) -> FaceEvaluation:
    """Exact necessary-condition and NL-increase matrices over a face grid.

    By default the increase is only evaluated for wirings that pass the
    necessary condition somewhere; ``all_wirings`` evaluates every profile
    (used to check soundness of the condition).
    """
    face = _as_face(face)
    grid = face_grid(face, step)
    pts, den = grid.points, grid.den
    cols = [k - 1 for k in face.vertices]
    local_gain = (profiles.klass[:, cols] - 1).T  # (d, N)
    nl00_gain = (profiles.nl00_8 - 8)  # 8*(NL(B00) - 1)
    passes = (8 * pts[:, 1:] @ local_gain + pts[:, :1] * nl00_gain[None, :]) > 0
    if all_wirings:
        candidates = np.arange(len(profiles))
    else:
        candidates = np.flatnonzero(passes.any(axis=0))
    support = list(face.support)
    outer = np.einsum("gv,gw->gvw", pts, pts)
    threshold = 8 * den * den + 8 * den * pts[:, 0]
    increases = np.zeros((len(pts), len(candidates)), dtype=bool)
    for start in range(0, len(candidates), block):
        sel = candidates[start:start + block]
        e = profiles.correlators4[sel][:, support][:, :, support]  # (n, I, I, 4)
        ew = np.einsum("gvw,nvwk->kgn", outer, e)
        increases[:, start:start + len(sel)] = chsh4_max(ew) > threshold[:, None]
    return FaceEvaluation(grid, profiles.ids, passes, candidates, increases)


@dataclass(frozen=True)
class FaceReport:
    face: FaceSpec
    pointwise_distillable: bool
    single_wiring_witness: Optional[int]
    isotropic_distillable: bool
    witnesses: tuple
    sufficient_witnesses: tuple
    closed_within_face: tuple
    notes: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "face": list(self.face.vertices),
            "pointwise_distillable": self.pointwise_distillable,
            "single_wiring_witness": self.single_wiring_witness,
            "isotropic_distillable": self.isotropic_distillable,
            "witness_count": len(self.witnesses),
            "witnesses": list(self.witnesses),
            "sufficient_witnesses": list(self.sufficient_witnesses),
            "closed_within_face": list(self.closed_within_face),
            "notes": list(self.notes),
        }


def _maps_into_nls(profiles: WiringProfiles, idx: np.ndarray, pairs: list) -> np.ndarray:
    """Which of ``idx`` send every (v, w) in ``pairs`` into the nonlocal simplex."""
    b = profiles.boxes4[idx]
    free = list(FREE_INDICES)
    ok = np.ones(len(idx), dtype=bool)
    for v, w in pairs:
        ok &= b[:, v, w][:, free].sum(axis=1) <= 4
    return ok


def _closes(profiles: WiringProfiles, idx: np.ndarray, face: FaceSpec) -> np.ndarray:
    b = profiles.boxes4[idx]
    support = face.support
    outside = [FREE_INDICES[k - 1] for k in range(1, 9) if k not in face.vertices]
    ok = np.ones(len(idx), dtype=bool)
    for v, w in itertools.product(support, support):
        box = b[:, v, w]
        ok &= box[:, list(FREE_INDICES)].sum(axis=1) <= 4
        if outside:
            ok &= np.all(box[:, outside] == 0, axis=1)
    return ok


def classify_face(face, profiles: Optional[WiringProfiles] = None,
                  step: int = GRID_STEP) -> FaceReport:
    """Distillability of a face under the PR-fixing wirings.

    A grid point counts as distillable when some wiring passes the necessary
    condition there and the exact NL of W(p, p) is strictly larger than NL(p).
    Witnesses are wirings for which that holds at every grid point.
    """
    face = _as_face(face)
    if not 1 <= face.dim <= 4:
        raise SearchError(f"unsupported face dimension {face.dim}")
    if profiles is None:
        profiles = pr_fixing_profiles()
    ev = evaluate_face(face, profiles, step)
    ok = ev.passes[:, ev.candidates] & ev.increases
    point_ok = ok.any(axis=1)
    witness_idx = ev.candidates[ok.all(axis=0)] if ok.size else np.zeros(0, dtype=np.int64)
    witnesses = tuple(int(v) for v in profiles.ids[witness_idx])
    mixed = [(0, k) for k in face.vertices] + [(k, 0) for k in face.vertices]
    sufficient = profiles.ids[witness_idx[_maps_into_nls(profiles, witness_idx, mixed)]]
    closed = profiles.ids[witness_idx[_closes(profiles, witness_idx, face)]]
    notes = (
        f"grid step 1/{step} over the open face plus its isotropic line, "
        f"{len(ev.grid.points)} points, exact arithmetic",
        f"{len(profiles)} PR-fixing wirings scanned",
    )
    return FaceReport(
        face=face,
        pointwise_distillable=bool(point_ok.all()),
        single_wiring_witness=min(witnesses) if witnesses else None,
        isotropic_distillable=bool(point_ok[ev.grid.isotropic].all()),
        witnesses=witnesses,
        sufficient_witnesses=tuple(int(v) for v in sufficient),
        closed_within_face=tuple(int(v) for v in closed),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# closure and the induced quadratic map


@dataclass(frozen=True)
class QuadraticFlow:
    """c'_u = sum_{v,w} tensor[u][v][w] c_v c_w over the face's support."""

    support: tuple  # (0, v1, v2, ...)
    tensor: tuple

    def __call__(self, coords: Sequence) -> tuple:
        n = len(self.support)
        return tuple(
            sum(self.tensor[u][v][w] * coords[v] * coords[w]
                for v in range(n) for w in range(n))
            for u in range(n)
        )

    def step_point(self, pt: NLSPoint) -> NLSPoint:
        coords = [pt.weights[k] for k in self.support]
        return NLSPoint.from_weights(dict(zip(self.support, self(coords))))


def face_closure(face, w: Wiring) -> Optional[QuadraticFlow]:
    """The quadratic map on the face if W keeps every vertex pair inside it, else None."""
    face = _as_face(face)
    support = face.support
    columns = {}
    for v, u in itertools.product(support, support):
        try:
            pt = decompose(vertex_block_box(w, v, u))
        except NotInNonlocalSimplex:
            return None
        if not set(pt.support()) <= set(support):
            return None
        columns[v, u] = [pt.weights[k] for k in support]
    n = len(support)
    tensor = tuple(
        tuple(tuple(columns[support[v], support[u]][t] for u in range(n)) for v in range(n))
        for t in range(n)
    )
    return QuadraticFlow(support, tensor)
