"""Reference wirings and face lists from the literature, used by ``--check``."""

# columns: Alice x=0, Alice x=1, Bob y=0, Bob y=1
TABLE3 = {
    1: ("S:0,0,0,0,0", "X:1,1,1", "S:0,0,1,0,0", "X:1,1,0"),
    2: ("S:0,0,1,0,0", "X:1,1,0", "S:0,0,0,0,0", "X:1,1,1"),
    3: ("S:0,0,0,1,0", "X:1,1,0", "X:0,0,0", "S:0,1,0,0,0"),
    4: ("S:0,0,1,1,1", "X:1,1,1", "X:0,0,1", "S:0,1,1,0,0"),
    5: ("X:0,0,1", "S:0,1,1,0,0", "S:0,0,1,1,1", "X:1,1,1"),
    6: ("X:0,0,0", "S:0,1,0,0,0", "S:0,0,0,1,0", "X:1,1,0"),
    7: ("X:0,0,0", "S:0,1,1,1,0", "X:0,0,0", "S:0,1,1,1,0"),
    8: ("X:0,0,1", "S:0,1,0,1,1", "X:0,0,1", "S:0,1,0,1,1"),
}

TABLE4 = {
    (1, 2): ("S:0,0,0,0,0", "X:1,1,1", "S:0,0,1,0,0", "X:1,1,0"),
    (1, 3): ("S:0,0,0,0,0", "X:1,1,0", "S:0,1,1,0,0", "S:0,0,1,0,0"),
    (1, 5): ("S:0,0,0,0,0", "S:0,1,0,0,0", "S:0,0,1,0,0", "X:1,1,0"),
    (2, 4): ("S:0,0,1,0,0", "X:1,1,0", "S:0,0,0,0,0", "S:0,1,0,0,0"),
    (2, 6): ("S:0,0,1,0,0", "S:0,1,1,0,0", "S:0,0,0,0,0", "X:1,1,1"),
    (3, 4): ("S:0,0,0,1,0", "X:1,1,0", "X:0,0,0", "S:0,1,0,0,0"),
    (3, 8): ("S:0,0,0,1,0", "S:0,1,1,1,0", "X:0,0,0", "S:0,1,0,0,0"),
    (4, 7): ("S:0,0,1,1,1", "S:0,1,0,1,1", "X:0,0,1", "S:0,1,1,0,0"),
    (5, 6): ("X:0,0,0", "S:0,1,1,0,1", "S:0,0,1,1,0", "X:1,1,0"),
    (5, 7): ("X:0,0,0", "S:0,1,1,0,0", "S:0,1,0,1,0", "S:0,0,1,1,0"),
    (6, 8): ("X:0,0,0", "S:0,1,0,0,0", "S:0,0,0,1,0", "S:0,1,1,1,0"),
    (7, 8): ("X:0,0,0", "S:0,1,1,1,0", "X:0,0,0", "S:0,1,1,1,0"),
}

DISTILLABLE_PAIRS = tuple(sorted(TABLE4))

DISTILLABLE_TRIPLES = (
    (1, 2, 3), (1, 2, 4), (1, 2, 5), (1, 2, 6), (1, 3, 4), (1, 5, 6),
    (2, 3, 4), (2, 5, 6), (3, 4, 7), (3, 4, 8), (3, 7, 8), (4, 7, 8),
    (5, 6, 7), (5, 6, 8), (5, 7, 8), (6, 7, 8),
)

UFFINK_COMPATIBLE_PAIRS = (
    (1, 3), (1, 4), (1, 7), (1, 8), (2, 3), (2, 4), (2, 7), (2, 8),
    (3, 5), (3, 6), (4, 5), (4, 6), (5, 7), (5, 8), (6, 7), (6, 8),
)

UFFINK_DISTILLABLE_PAIRS = ((1, 3), (2, 4), (5, 7), (6, 8))

TOTAL_WIRINGS = 82 ** 4
PR_FIXING_COUNT = 3152
NL00_VALUES = ("0", "1/2", "1")
NL_MIXED_VALUES = ("0", "1")
