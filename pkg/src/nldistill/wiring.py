"""Deterministic couplers and the two-copy wiring of boxes.

A coupler is a local rule ``chi(a, a1, a2, x1, x2)`` telling a party which
inputs to feed its two boxes and how to compute its final output from the two
box outputs. There are 82 extremal couplers in five classes (D, O, X, A, S);
a wiring picks one coupler per party and per final input, 82**4 in total.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import presets
from .box import BITS, VERTICES, Box, entry_index

N_COUPLERS = 82
N_WIRINGS = N_COUPLERS ** 4

_CLASS_ARITY = {"D": 1, "O": 3, "X": 3, "A": 5, "S": 5}


@dataclass(frozen=True)
class Coupler:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _CLASS_ARITY:
            raise ValueError(f"unknown coupler class {self.kind!r}")
        params = tuple(int(v) for v in self.params)
        if len(params) != _CLASS_ARITY[self.kind] or any(v not in BITS for v in params):
            raise ValueError(f"bad parameters {self.params!r} for class {self.kind}")
        object.__setattr__(self, "params", params)

    @property
    def id(self) -> int:
        return _COUPLER_IDS[self]

    @classmethod
    def parse(cls, text: str) -> "Coupler":
        """``"S:0,1,1,1,0"`` -> Coupler("S", (0, 1, 1, 1, 0))."""
        kind, _, params = text.strip().partition(":")
        return cls(kind.strip().upper(), tuple(int(v) for v in params.split(",")))

    def __str__(self):
        return f"{self.kind}:{','.join(map(str, self.params))}"


COUPLERS = tuple(
    Coupler(kind, params)
    for kind in ("D", "O", "X", "A", "S")
    for params in itertools.product(BITS, repeat=_CLASS_ARITY[kind])
)
_COUPLER_IDS = {c: k for k, c in enumerate(COUPLERS)}


def coupler_from_id(cid: int) -> Coupler:
    if not 0 <= cid < N_COUPLERS:
        raise IndexError(f"coupler id must be in 0..81, got {cid}")
    return COUPLERS[cid]


def coupler_id(c: Coupler) -> int:
    return _COUPLER_IDS[c]


def coupler_indicator(c: Coupler, a: int, a1: int, a2: int, x1: int, x2: int) -> int:
    kind, t = c.kind, c.params
    outs, ins = (a1, a2), (x1, x2)
    if kind == "D":
        # both boxes queried with input 0; their outputs are ignored
        ok = x1 == 0 and x2 == 0 and a == t[0]
    elif kind == "O":
        mu, nu, sigma = t
        ok = x1 == mu and x2 == mu and a == outs[nu] ^ sigma
    elif kind == "X":
        mu, nu, sigma = t
        ok = x1 == mu and x2 == nu and a == a1 ^ a2 ^ sigma
    elif kind == "A":
        mu, nu, sigma, delta, eps = t
        ok = x1 == mu and x2 == nu and a == ((a1 ^ sigma) & (a2 ^ delta)) ^ eps
    else:
        mu, nu, sigma, delta, eps = t
        first, second = mu, 1 - mu
        ok = (
            ins[first] == nu
            and ins[second] == outs[first] ^ sigma
            and a == outs[second] ^ (delta & outs[first]) ^ eps
        )
    return int(ok)


def _admitted(c: Coupler) -> tuple:
    """(a1, a2, x1, x2, a) for each pair of box outputs: exactly one each."""
    rows = []
    for a1, a2 in itertools.product(BITS, BITS):
        hits = [
            (a1, a2, x1, x2, a)
            for x1, x2, a in itertools.product(BITS, repeat=3)
            if coupler_indicator(c, a, a1, a2, x1, x2)
        ]
        assert len(hits) == 1, (c, a1, a2, hits)
        rows.append(hits[0])
    return tuple(rows)


_ADMITTED = tuple(_admitted(c) for c in COUPLERS)


@dataclass(frozen=True)
class PartyWiring:
    at0: Coupler
    at1: Coupler

    def at(self, bit: int) -> Coupler:
        return self.at1 if bit else self.at0


@dataclass(frozen=True)
class Wiring:
    alice: PartyWiring
    bob: PartyWiring

    @property
    def coupler_ids(self) -> tuple:
        return (self.alice.at0.id, self.alice.at1.id, self.bob.at0.id, self.bob.at1.id)

    @property
    def id(self) -> int:
        a0, a1, b0, b1 = self.coupler_ids
        return ((a0 * N_COUPLERS + a1) * N_COUPLERS + b0) * N_COUPLERS + b1

    @classmethod
    def from_ids(cls, a0: int, a1: int, b0: int, b1: int) -> "Wiring":
        c = coupler_from_id
        return cls(PartyWiring(c(a0), c(a1)), PartyWiring(c(b0), c(b1)))

    @classmethod
    def from_id(cls, wid: int) -> "Wiring":
        if not 0 <= wid < N_WIRINGS:
            raise IndexError(f"wiring id must be in 0..{N_WIRINGS - 1}, got {wid}")
        return cls.from_ids(*split_id(wid))

    def __str__(self):
        return (
            f"A0={self.alice.at0};A1={self.alice.at1};"
            f"B0={self.bob.at0};B1={self.bob.at1}"
        )


def split_id(wid):
    """Wiring id -> (a0, a1, b0, b1); works elementwise on integer arrays."""
    b1 = wid % N_COUPLERS
    rest = wid // N_COUPLERS
    b0 = rest % N_COUPLERS
    rest = rest // N_COUPLERS
    return rest // N_COUPLERS, rest % N_COUPLERS, b0, b1


def _wire_block(rows_a, rows_b, p, q):
    out = [0, 0, 0, 0]
    for a1, a2, x1, x2, a in rows_a:
        for b1, b2, y1, y2, b in rows_b:
            out[2 * a + b] += p[entry_index(a1, b1, x1, y1)] * q[entry_index(a2, b2, x2, y2)]
    return out


def wired_block(c_alice: Coupler, c_bob: Coupler, p, q) -> tuple:
    """r(ab|xy) for the input pair whose couplers are ``c_alice``, ``c_bob``."""
    return tuple(_wire_block(_ADMITTED[c_alice.id], _ADMITTED[c_bob.id], p, q))


def wire_entries(w: Wiring, p, q) -> list:
    """Two-copy composition on raw entry sequences (exact or float), no validation."""
    entries = []
    for x, y in itertools.product(BITS, BITS):
        rows_a = _ADMITTED[w.alice.at(x).id]
        rows_b = _ADMITTED[w.bob.at(y).id]
        entries.extend(_wire_block(rows_a, rows_b, p, q))
    return entries


def apply_wiring(w: Wiring, p: Box, q: Box) -> Box:
    """W(p, q): ``p`` plays the first box and ``q`` the second on both sides."""
    return Box(wire_entries(w, p, q))


def enumerate_wirings(lo: int = 0, hi: int = N_WIRINGS) -> Iterator[Wiring]:
    if not 0 <= lo <= hi <= N_WIRINGS:
        raise ValueError(f"bad wiring interval [{lo}, {hi})")
    for wid in range(lo, hi):
        yield Wiring.from_id(wid)


def id_chunks(lo: int, hi: int, size: int) -> Iterator[np.ndarray]:
    """Ascending int64 id arrays of at most ``size`` elements covering [lo, hi)."""
    if not 0 <= lo <= hi <= N_WIRINGS:
        raise ValueError(f"bad wiring interval [{lo}, {hi})")
    for start in range(lo, hi, size):
        yield np.arange(start, min(start + size, hi), dtype=np.int64)


# ---------------------------------------------------------------------------
# memoized vertex blocks


@functools.lru_cache(maxsize=None)
def indicator_array() -> np.ndarray:
    """chi[c, a, a1, a2, x1, x2] as int64, shape (82, 2, 2, 2, 2, 2)."""
    chi = np.zeros((N_COUPLERS,) + (2,) * 5, dtype=np.int64)
    for cid, rows in enumerate(_ADMITTED):
        for a1, a2, x1, x2, a in rows:
            chi[cid, a, a1, a2, x1, x2] = 1
    return chi


@functools.lru_cache(maxsize=None)
def vertex_blocks() -> np.ndarray:
    """Numerators (over 4) of wired blocks for every coupler pair and vertex pair.

    Shape (82, 82, 9, 9, 4): ``[cA, cB, v, w, 2a+b]`` is the block of
    W(vertex_v, vertex_w) whose final inputs select couplers cA and cB.
    Vertex 0 is PR, vertex i is L_i.
    """
    doubled = np.array(
        [[int(2 * v[k]) for k in range(16)] for v in VERTICES], dtype=np.int64
    ).reshape(9, 2, 2, 2, 2)  # v, x, y, a, b
    chi = indicator_array()
    blocks = np.einsum(
        "AaPQXY,BbRSUZ,vXUPR,wYZQS->ABvwab", chi, chi, doubled, doubled, optimize=True
    )
    blocks = blocks.reshape(N_COUPLERS, N_COUPLERS, 9, 9, 4)
    blocks.setflags(write=False)
    return blocks


@functools.lru_cache(maxsize=None)
def vertex_block_correlators() -> np.ndarray:
    """4*E of every memoized block, int8, shape (82, 82, 9, 9)."""
    b = vertex_blocks()
    e = (b[..., 0] + b[..., 3] - b[..., 1] - b[..., 2]).astype(np.int8)
    e.setflags(write=False)
    return e


def vertex_block_box(w: Wiring, v: int, u: int) -> Box:
    """W(vertex_v, vertex_u) assembled from the memoized blocks."""
    blocks = vertex_blocks()
    entries = []
    for x, y in itertools.product(BITS, BITS):
        nums = blocks[w.alice.at(x).id, w.bob.at(y).id, v, u]
        entries.extend(Fraction(int(n), 4) for n in nums)
    return Box(entries)


# ---------------------------------------------------------------------------
# textual wiring specs

_EXPLICIT = re.compile(r"^\s*(A0|A1|B0|B1)\s*=\s*([DOXASdoxas]\s*:\s*[01](?:\s*,\s*[01])*)\s*$")


def _preset(text: str) -> Wiring:
    table, _, label = text.partition(":")
    label = label.strip().upper()
    if table == "table3":
        key = int(label.removeprefix("L"))
        cols = presets.TABLE3[key]
    elif table == "table4":
        m = re.fullmatch(r"L(\d)L(\d)", label)
        if not m:
            raise KeyError(label)
        cols = presets.TABLE4[tuple(sorted((int(m[1]), int(m[2]))))]
    else:
        raise KeyError(table)
    a0, a1, b0, b1 = (Coupler.parse(c) for c in cols)
    return Wiring(PartyWiring(a0, a1), PartyWiring(b0, b1))


def parse_wiring(text: str) -> Wiring:
    """Decimal id, preset (``table3:L7``, ``table4:L1L3``) or explicit
    ``A0=X:0,0,0;A1=S:0,1,1,1,0;B0=X:0,0,0;B1=S:0,1,1,1,0``."""
    text = text.strip()
    if text.isdigit():
        return Wiring.from_id(int(text))
    if text.lower().startswith(("table3:", "table4:")):
        try:
            return _preset(text.lower())
        except (KeyError, ValueError):
            raise ValueError(f"unknown wiring preset {text!r}") from None
    slots = {}
    for part in filter(None, (s.strip() for s in text.split(";"))):
        m = _EXPLICIT.match(part)
        if not m:
            raise ValueError(f"cannot parse wiring component {part!r}")
        slots[m[1]] = Coupler.parse(m[2].replace(" ", ""))
    if sorted(slots) != ["A0", "A1", "B0", "B1"]:
        raise ValueError(f"wiring spec must set A0, A1, B0 and B1: {text!r}")
    return Wiring(PartyWiring(slots["A0"], slots["A1"]), PartyWiring(slots["B0"], slots["B1"]))
