"""Guarantee value types and conversions between DP, subset DP and ODP.

An output-DP guarantee refines an (eps, delta) guarantee by attaching an
epsilon to every cell of a partition of the mechanism's output space. The
partition is kept intensional: a guarantee only stores cell ids, and each
mechanism knows how to map a concrete output to its cell id.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass
from typing import Any, Iterable, Sequence, Union

CellId = Union[int, str]

# Cell ids shared by the two-cell mechanisms (toy, PTR, tested ERM).
VALUE_CELL = "value"
BOTTOM_CELL = "bottom"


class _Bottom:
    """The "no response" output symbol."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()


def is_bottom(value: Any) -> bool:
    return value is BOTTOM


def _check_eps(eps: float, what: str = "epsilon") -> float:
    eps = float(eps)
    if not eps >= 0.0 or math.isinf(eps):
        raise ValueError(f"{what} must be a finite non-negative number, got {eps!r}")
    return eps


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta!r}")
    return delta


def _check_cell_id(cell: Any) -> CellId:
    if isinstance(cell, bool) or not isinstance(cell, (numbers.Integral, str)):
        raise TypeError(f"cell ids must be int or str, got {type(cell).__name__}")
    return cell if isinstance(cell, str) else int(cell)


@dataclass(frozen=True)
class DpGuarantee:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_eps(self.epsilon))
        object.__setattr__(self, "delta", _check_delta(self.delta))


@dataclass(frozen=True)
class SubsetDpGuarantee:
    """(R, eps, delta)-subset DP: the DP inequality restricted to events inside cell R."""

    cell: CellId
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cell", _check_cell_id(self.cell))
        object.__setattr__(self, "epsilon", _check_eps(self.epsilon))
        object.__setattr__(self, "delta", _check_delta(self.delta))


@dataclass(frozen=True)
class OdpGuarantee:
    """A partition (by cell id) with a per-cell epsilon and one global delta.

    ``cells`` is an ordered tuple of ``(cell_id, epsilon)`` pairs.
    """

    cells: tuple[tuple[CellId, float], ...]
    delta: float = 0.0

    def __post_init__(self):
        cells = tuple((_check_cell_id(c), _check_eps(e, f"epsilon of cell {c!r}")) for c, e in self.cells)
        if not cells:
            raise ValueError("an ODP guarantee needs at least one cell")
        ids = [c for c, _ in cells]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate cell ids in {ids!r}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "delta", _check_delta(self.delta))

    @classmethod
    def from_mapping(cls, eps_by_cell: dict, delta: float = 0.0) -> "OdpGuarantee":
        return cls(tuple(eps_by_cell.items()), delta)

    @property
    def cell_ids(self) -> tuple[CellId, ...]:
        return tuple(c for c, _ in self.cells)

    @property
    def sup_epsilon(self) -> float:
        return max(e for _, e in self.cells)

    def epsilon(self, cell: CellId) -> float:
        cell = _check_cell_id(cell)
        for c, e in self.cells:
            if c == cell and type(c) is type(cell):
                return e
        raise KeyError(cell)

    def __contains__(self, cell: object) -> bool:
        try:
            self.epsilon(cell)
        except (KeyError, TypeError):
            return False
        return True

    def as_dict(self) -> dict:
        return {c: e for c, e in self.cells}

    def to_json_obj(self) -> dict:
        return {"cells": [{"id": c, "eps": e} for c, e in self.cells], "delta": self.delta}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "OdpGuarantee":
        try:
            cells = tuple((item["id"], item["eps"]) for item in obj["cells"])
            delta = obj["delta"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed guarantee object: {obj!r}") from exc
        return cls(cells, delta)

    @classmethod
    def from_json(cls, text: str) -> "OdpGuarantee":
        return cls.from_json_obj(json.loads(text))


def _distinct_cells(cells: Sequence[CellId]) -> tuple[CellId, ...]:
    cells = tuple(_check_cell_id(c) for c in cells)
    if not cells:
        raise ValueError("cell list must be non-empty")
    if len(set(cells)) != len(cells):
        raise ValueError(f"duplicate cell ids in {cells!r}")
    return cells


def dp_to_odp(g: DpGuarantee, cells: Sequence[CellId]) -> OdpGuarantee:
    """Any (eps, delta)-DP mechanism is ODP for any partition with constant epsilon."""
    cells = _distinct_cells(cells)
    return OdpGuarantee(tuple((c, g.epsilon) for c in cells), g.delta)


def odp_to_dp(g: OdpGuarantee) -> DpGuarantee:
    """Collapse an ODP guarantee to DP by taking the worst cell."""
    return DpGuarantee(g.sup_epsilon, g.delta)


def combine_subset_dp(parts: Iterable[SubsetDpGuarantee]) -> OdpGuarantee:
    """Glue subset-DP guarantees over the cells of a partition into one ODP guarantee.

    The deltas add up; the sum is capped at 1.
    """
    parts = list(parts)
    _distinct_cells([p.cell for p in parts])
    # fsum keeps the result independent of the input order
    delta = math.fsum(p.delta for p in parts)
    return OdpGuarantee(tuple((p.cell, p.epsilon) for p in parts), min(delta, 1.0))
