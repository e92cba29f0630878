"""Privacy-budget ledger for ODP composition.

A mechanism is admitted only if its worst-case epsilon and its delta fit the
remaining budget. After it ran, the ledger charges the epsilon of the cell the
output actually fell into, and always the full declared delta.

The ledger is a pure state machine: ``charge`` returns a new state, so
histories can be replayed or branched freely.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterable

from .core import CellId, OdpGuarantee, _check_cell_id, _check_delta, _check_eps


class Decision(enum.Enum):
    CONT = "CONT"
    HALT = "HALT"


class ChargeRejected(ValueError):
    """The guarantee does not fit the remaining budget."""


class UnknownCell(KeyError):
    """The realized cell is not part of the declared partition."""


@dataclass(frozen=True)
class Budget:
    eps_total: float
    delta_total: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eps_total", _check_eps(self.eps_total, "eps_total"))
        object.__setattr__(self, "delta_total", _check_delta(self.delta_total))


@dataclass(frozen=True)
class ChargeRecord:
    mechanism_label: str
    declared: OdpGuarantee
    realized_cell: CellId
    eps_charged: float
    delta_charged: float

    def to_json_obj(self) -> dict:
        return {
            "mechanism_label": self.mechanism_label,
            "declared": self.declared.to_json_obj(),
            "realized_cell": self.realized_cell,
            "eps_charged": self.eps_charged,
            "delta_charged": self.delta_charged,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ChargeRecord":
        return cls(
            mechanism_label=str(obj["mechanism_label"]),
            declared=OdpGuarantee.from_json_obj(obj["declared"]),
            realized_cell=obj["realized_cell"],
            eps_charged=float(obj["eps_charged"]),
            delta_charged=float(obj["delta_charged"]),
        )


@dataclass(frozen=True)
class LedgerState:
    budget: Budget
    eps_remaining: float
    delta_remaining: float
    history: tuple[ChargeRecord, ...] = field(default=())

    def remaining(self) -> tuple[float, float]:
        return self.eps_remaining, self.delta_remaining


def new_ledger(b: Budget) -> LedgerState:
    return LedgerState(b, b.eps_total, b.delta_total, ())


def admit(s: LedgerState, g: OdpGuarantee) -> Decision:
    # Exact comparisons on purpose: any tolerance would let the budget be overspent.
    if g.sup_epsilon <= s.eps_remaining and g.delta <= s.delta_remaining:
        return Decision.CONT
    return Decision.HALT


def charge(s: LedgerState, g: OdpGuarantee, realized: CellId, label: str = "") -> LedgerState:
    """Charge the realized cell's epsilon and the declared delta.

    The delta charge never depends on the realized cell; letting it do so
    breaks the composition guarantee.
    """
    if admit(s, g) is Decision.HALT:
        raise ChargeRejected(
            f"{label or 'mechanism'}: needs (sup eps={g.sup_epsilon}, delta={g.delta}), "
            f"remaining ({s.eps_remaining}, {s.delta_remaining})"
        )
    try:
        cell = _check_cell_id(realized)
        eps = g.epsilon(cell)
    except (KeyError, TypeError):
        raise UnknownCell(f"{realized!r} is not a cell of {g.cell_ids!r}") from None
    record = ChargeRecord(label, g, cell, eps, g.delta)
    return LedgerState(
        s.budget,
        s.eps_remaining - eps,
        s.delta_remaining - g.delta,
        s.history + (record,),
    )


def remaining(s: LedgerState) -> tuple[float, float]:
    return s.remaining()


def export_history(s: LedgerState, fp: IO[str]) -> None:
    """Write the charge history as JSON lines, one record per line."""
    for rec in s.history:
        fp.write(json.dumps(rec.to_json_obj()) + "\n")


def read_history(lines: Iterable[str]) -> list[ChargeRecord]:
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(ChargeRecord.from_json_obj(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: malformed charge record ({exc})") from exc
    return records


def replay(b: Budget, records: Iterable[ChargeRecord]) -> LedgerState:
    """Re-run recorded charges against a fresh ledger.

    Raises ``ValueError`` if a record's stored charge disagrees with what its
    declared guarantee implies.
    """
    s = new_ledger(b)
    for i, rec in enumerate(records, start=1):
        s = charge(s, rec.declared, rec.realized_cell, rec.mechanism_label)
        got = s.history[-1]
        if got.eps_charged != rec.eps_charged or got.delta_charged != rec.delta_charged:
            raise ValueError(
                f"record {i} ({rec.mechanism_label}): stored charge "
                f"({rec.eps_charged}, {rec.delta_charged}) does not match the declared guarantee "
                f"({got.eps_charged}, {got.delta_charged})"
            )
    return s
