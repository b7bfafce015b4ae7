"""Boxes p(ab|xy) of the CHSH scenario and their scalar functionals.

Entries are stored in the flat order ``idx = 4*(2x+y) + (2a+b)``, i.e. one
block of four outcomes per input pair, blocks ordered xy = 00, 01, 10, 11.

All functionals are duck-typed over the entry sequence: a :class:`Box` gives
exact :class:`~fractions.Fraction` results, a float array gives floats.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

BITS = (0, 1)

# positions of p2, p3, p6, p7, p10, p11, p13, p16 (the entries that vanish on PR)
FREE_INDICES = (1, 2, 5, 6, 9, 10, 12, 15)

# L_i -> (alpha, beta, gamma)
LOCAL_LABELS = {
    1: (1, 0, 1),
    2: (1, 1, 1),
    3: (0, 0, 1),
    4: (0, 1, 1),
    5: (1, 1, 0),
    6: (1, 0, 0),
    7: (0, 0, 0),
    8: (0, 1, 0),
}

# Sign patterns (s00, s01, s10, s11) with product -1. Ordered by the positions
# of the minus signs, lexicographically: one-minus patterns first.
CHSH_SIGNS = tuple(
    tuple(-1 if k in minus else 1 for k in range(4))
    for n_minus in (1, 3)
    for minus in itertools.combinations(range(4), n_minus)
)


def entry_index(a: int, b: int, x: int, y: int) -> int:
    return 4 * (2 * x + y) + 2 * a + b


class BoxError(ValueError):
    pass


class ValidationError(BoxError):
    pass


class OutOfRange(ValidationError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"entry p{index + 1} = {value} is outside [0, 1]")


class BlockNotNormalized(ValidationError):
    def __init__(self, x, y, total):
        self.x, self.y, self.total = x, y, total
        super().__init__(f"block xy={x}{y} sums to {total}, not 1")


class SignallingAlice(ValidationError):
    """Alice's marginal p(a|x) depends on Bob's input."""

    def __init__(self, a, x):
        self.a, self.x = a, x
        super().__init__(f"p(a={a}|x={x}) differs between y=0 and y=1")


class SignallingBob(ValidationError):
    """Bob's marginal p(b|y) depends on Alice's input."""

    def __init__(self, b, y):
        self.b, self.y = b, y
        super().__init__(f"p(b={b}|y={y}) differs between x=0 and x=1")


class NotInNonlocalSimplex(BoxError):
    def __init__(self, free_sum):
        self.free_sum = free_sum
        super().__init__(
            f"free coordinates sum to {free_sum} > 1; the box lies outside the "
            "simplex spanned by PR and L1..L8"
        )


def _check(entries: Sequence[Fraction]) -> None:
    if len(entries) != 16:
        raise ValidationError(f"expected 16 entries, got {len(entries)}")
    for k, v in enumerate(entries):
        if v < 0 or v > 1:
            raise OutOfRange(k, v)
    for x, y in itertools.product(BITS, BITS):
        total = sum(entries[4 * (2 * x + y) + k] for k in range(4))
        if total != 1:
            raise BlockNotNormalized(x, y, total)
    for b, y in itertools.product(BITS, BITS):
        m0, m1 = (sum(entries[entry_index(a, b, x, y)] for a in BITS) for x in BITS)
        if m0 != m1:
            raise SignallingBob(b, y)
    for a, x in itertools.product(BITS, BITS):
        m0, m1 = (sum(entries[entry_index(a, b, x, y)] for b in BITS) for y in BITS)
        if m0 != m1:
            raise SignallingAlice(a, x)


@dataclass(frozen=True)
class Box:
    """A non-signalling box with exact rational entries.

    Construction validates range, normalization and the non-signalling
    equalities; an invalid entry list raises a :class:`ValidationError`.
    """

    entries: tuple

    def __post_init__(self):
        entries = tuple(Fraction(v) for v in self.entries)
        _check(entries)
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return 16

    def p(self, a: int, b: int, x: int, y: int) -> Fraction:
        return self.entries[entry_index(a, b, x, y)]

    def block(self, x: int, y: int) -> tuple:
        start = 4 * (2 * x + y)
        return self.entries[start:start + 4]

    def __str__(self):
        return ",".join(str(v) for v in self.entries)


def _delta_box(rule) -> Box:
    return Box(
        [rule(a, b, x, y) for x, y, a, b in itertools.product(BITS, repeat=4)]
    )


def pr_box(mu: int, nu: int, sigma: int) -> Box:
    half = Fraction(1, 2)
    return _delta_box(
        lambda a, b, x, y: half if a ^ b == (x & y) ^ (mu & x) ^ (nu & y) ^ sigma else 0
    )


def local_box(alpha: int, beta: int, gamma: int, theta: int) -> Box:
    return _delta_box(
        lambda a, b, x, y: int(a == (alpha & x) ^ beta and b == (gamma & y) ^ theta)
    )


def local_vertex(i: int) -> Box:
    """L_i, the local vertex whose free coordinate ``FREE_INDICES[i-1]`` is 1."""
    if i not in LOCAL_LABELS:
        raise IndexError(f"local vertex index must be in 1..8, got {i}")
    alpha, beta, gamma = LOCAL_LABELS[i]
    return local_box(alpha, beta, gamma, (alpha & gamma) ^ beta)


PR = pr_box(0, 0, 0)
VERTICES = (PR,) + tuple(local_vertex(i) for i in range(1, 9))


def mix(terms: Iterable[tuple]) -> Box:
    terms = [(Fraction(w), box) for w, box in terms]
    for w, _ in terms:
        if w < 0:
            raise BoxError(f"negative mixing weight {w}")
    total = sum(w for w, _ in terms)
    if total != 1:
        raise BoxError(f"mixing weights sum to {total}, not 1")
    return Box([sum(w * box[k] for w, box in terms) for k in range(16)])


def validate(candidate: Sequence) -> Box:
    """Return ``candidate`` as a :class:`Box` or raise the first violated constraint."""
    return Box(tuple(candidate))


_FIELD_SPLIT = re.compile(r"[,\s]+")


def parse_box(text: str) -> Box:
    """Parse 16 comma- or whitespace-separated ``num/den`` or decimal fields."""
    fields = [f for f in _FIELD_SPLIT.split(text.strip()) if f]
    if len(fields) != 16:
        raise ValidationError(f"expected 16 fields, got {len(fields)}")
    try:
        values = [Fraction(f) for f in fields]
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"unparseable field: {exc}") from None
    return validate(values)


class Correlators(NamedTuple):
    e00: object
    e01: object
    e10: object
    e11: object

    def at(self, x: int, y: int):
        return self[2 * x + y]


def correlators(p) -> Correlators:
    """E_xy = P(a=b|xy) - P(a!=b|xy)."""
    return Correlators(*(
        p[4 * k] + p[4 * k + 3] - p[4 * k + 1] - p[4 * k + 2] for k in range(4)
    ))


def chsh_symmetries(p) -> tuple:
    e = correlators(p)
    return tuple(sum(s * v for s, v in zip(signs, e)) for signs in CHSH_SIGNS)


def chsh_max(p):
    return max(chsh_symmetries(p))


def nl(p):
    excess = (chsh_max(p) - 2) / 2
    return excess if excess > 0 else excess - excess


def free_coordinates(p) -> tuple:
    return tuple(p[k] for k in FREE_INDICES)


@dataclass(frozen=True)
class NLSPoint:
    """Weights of PR (``c0``) and L1..L8 (``c``) in a convex decomposition."""

    c0: Fraction
    c: tuple

    def __post_init__(self):
        c0 = Fraction(self.c0)
        c = tuple(Fraction(v) for v in self.c)
        if len(c) != 8:
            raise BoxError(f"expected 8 local weights, got {len(c)}")
        if c0 < 0 or any(v < 0 for v in c):
            raise BoxError("negative simplex weight")
        if c0 + sum(c) != 1:
            raise BoxError(f"simplex weights sum to {c0 + sum(c)}, not 1")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_weights(cls, weights: dict) -> "NLSPoint":
        """Build from ``{0: c0, i: c_i, ...}``; missing indices are zero."""
        return cls(weights.get(0, 0), tuple(weights.get(i, 0) for i in range(1, 9)))

    @property
    def weights(self) -> tuple:
        return (self.c0,) + self.c

    def support(self) -> tuple:
        return tuple(k for k, w in enumerate(self.weights) if w != 0)


def decompose(p: Box) -> NLSPoint:
    c = free_coordinates(p)
    total = sum(c)
    if total > 1:
        raise NotInNonlocalSimplex(total)
    return NLSPoint(1 - total, c)


def reconstruct(pt: NLSPoint) -> Box:
    return mix((w, v) for w, v in zip(pt.weights, VERTICES) if w != 0)


def uffink_lhs(p, symmetrized: bool = False):
    """(E00 + E10)^2 + (E01 - E11)^2.

    With ``symmetrized`` the maximum over the eight CHSH sign patterns applied
    to the correlators is returned instead of the plain orientation.
    """
    e = correlators(p)
    if not symmetrized:
        return (e.e00 + e.e10) ** 2 + (e.e01 - e.e11) ** 2
    # the standard pattern (+,+,+,-) reproduces the plain form
    values = []
    for s in CHSH_SIGNS:
        t = [si * ei for si, ei in zip(s, e)]
        values.append((t[0] + t[2]) ** 2 + (t[1] + t[3]) ** 2)
    return max(values)


def uffink_violates(p, symmetrized: bool = False) -> bool:
    return uffink_lhs(p, symmetrized) > 4


def cc_trivial(p) -> bool:
    """CHSH >= 4*sqrt(2/3), compared without irrationals."""
    s = chsh_max(p)
    return bool(s >= 0 and 3 * s * s >= 32)


@dataclass(frozen=True)
class PointDiagnostics:
    nl: Fraction
    chsh_max: Fraction
    uffink_lhs: Fraction
    cc_trivial: bool
    in_nls: bool


def diagnostics(p: Box) -> PointDiagnostics:
    return PointDiagnostics(
        nl=nl(p),
        chsh_max=chsh_max(p),
        uffink_lhs=uffink_lhs(p),
        cc_trivial=cc_trivial(p),
        in_nls=sum(free_coordinates(p)) <= 1,
    )
