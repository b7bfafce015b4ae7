"""Nonlocality distillation of CHSH boxes by deterministic two-copy wirings."""

from .box import (
    Box,
    Correlators,
    NLSPoint,
    PointDiagnostics,
    cc_trivial,
    chsh_max,
    chsh_symmetries,
    correlators,
    decompose,
    diagnostics,
    local_box,
    local_vertex,
    mix,
    nl,
    parse_box,
    pr_box,
    reconstruct,
    uffink_lhs,
    uffink_violates,
    validate,
)
from .wiring import (
    Coupler,
    PartyWiring,
    Wiring,
    apply_wiring,
    coupler_from_id,
    coupler_id,
    coupler_indicator,
    enumerate_wirings,
    parse_wiring,
    wired_block,
)

__version__ = "0.1.0"
