"""Output-specific privacy accounting: ODP guarantees, a budget ledger and the mechanisms that benefit from it."""

from .core import (
    BOTTOM,
    BOTTOM_CELL,
    VALUE_CELL,
    DpGuarantee,
    OdpGuarantee,
    SubsetDpGuarantee,
    combine_subset_dp,
    dp_to_odp,
    is_bottom,
    odp_to_dp,
)
from .ledger import Budget, ChargeRejected, Decision, LedgerState, admit, charge, new_ledger, remaining, replay
from .noise import NoiseSource

__version__ = "0.1.0"

__all__ = [
    "BOTTOM",
    "BOTTOM_CELL",
    "VALUE_CELL",
    "DpGuarantee",
    "OdpGuarantee",
    "SubsetDpGuarantee",
    "combine_subset_dp",
    "dp_to_odp",
    "is_bottom",
    "odp_to_dp",
    "Budget",
    "ChargeRejected",
    "Decision",
    "LedgerState",
    "admit",
    "charge",
    "new_ledger",
    "remaining",
    "replay",
    "NoiseSource",
]
