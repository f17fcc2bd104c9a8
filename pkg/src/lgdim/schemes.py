"""Lalley-Gatzouras schemes: validation, composition and JSON I/O.

A scheme is a list of horizontal rows.  Row ``i`` has vertical map
``y -> b_i y + d_i`` and a list of cells; cell ``j`` of row ``i`` has
horizontal map ``x -> a_ij x + c_ij``.  Each (row, cell) pair is one map
``f_ij(x, y) = (a_ij x + c_ij, b_i y + d_i)`` of the iterated function scheme.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

TOL = 1e-12
DEFAULT_ALPHABET_CAP = 20000


class SchemeError(ValueError):
    """Raised when a scheme description violates the LG conditions.

    ``errors`` holds one human-readable message per violated inequality.
    """

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class AlphabetCapError(ValueError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"projected alphabet size {size} exceeds cap {cap}")


@dataclass(frozen=True)
class AffineCell:
    a: float
    c: float


@dataclass(frozen=True)
class SchemeRow:
    b: float
    d: float
    cells: tuple[AffineCell, ...]


@dataclass(frozen=True, eq=False)
class LGScheme:
    """A validated Lalley-Gatzouras scheme.

    Build through :func:`validate_scheme`, :func:`compose` or
    :func:`bedford_mcmullen`; the constructor does not check anything.
    """

    rows: tuple[SchemeRow, ...]
    strictly_separated: bool = False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LGScheme):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    @property
    def alphabet_size(self) -> int:
        return sum(len(r.cells) for r in self.rows)

    @property
    def row_sizes(self) -> tuple[int, ...]:
        return tuple(len(r.cells) for r in self.rows)

    # Flat views used by the numerical code.  Cells are enumerated row by row.

    @cached_property
    def cell_a(self) -> np.ndarray:
        return np.array([cell.a for r in self.rows for cell in r.cells])

    @cached_property
    def cell_c(self) -> np.ndarray:
        return np.array([cell.c for r in self.rows for cell in r.cells])

    @cached_property
    def cell_row(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.rows)), self.row_sizes)

    @cached_property
    def row_b(self) -> np.ndarray:
        return np.array([r.b for r in self.rows])

    @cached_property
    def row_d(self) -> np.ndarray:
        return np.array([r.d for r in self.rows])

    @cached_property
    def row_offsets(self) -> np.ndarray:
        """Flat index of the first cell of each row (plus a final sentinel)."""
        return np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(np.int64)

    def flat_index(self, i: int, j: int) -> int:
        """Flat cell index for 0-based row ``i`` and cell ``j``."""
        return int(self.row_offsets[i]) + j

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [
                {"b": r.b, "d": r.d, "cells": [{"a": c.a, "c": c.c} for c in r.cells]}
                for r in self.rows
            ]
        }


@dataclass(frozen=True)
class SchemeFamily:
    schemes: tuple[LGScheme, ...]

    def __post_init__(self):
        if not self.schemes:
            raise SchemeError(["family must contain at least one scheme"])

    def __len__(self) -> int:
        return len(self.schemes)

    def __getitem__(self, k: int) -> LGScheme:
        """1-based access, matching symbol values of driving sequences."""
        if not 1 <= k <= len(self.schemes):
            raise IndexError(f"scheme symbol {k} outside 1..{len(self.schemes)}")
        return self.schemes[k - 1]

    def to_dict(self) -> dict[str, Any]:
        return {"schemes": [s.to_dict() for s in self.schemes]}


def validate_scheme(raw: Any) -> LGScheme:
    """Check an unvalidated scheme description and build an :class:`LGScheme`.

    ``raw`` is either a mapping in the JSON layout
    ``{"rows": [{"b":..., "d":..., "cells": [{"a":..., "c":...}]}]}`` or an
    existing :class:`LGScheme` (re-validated).  All violations are collected
    and raised together as a :class:`SchemeError`.
    """
    if isinstance(raw, LGScheme):
        raw = raw.to_dict()
    errors: list[str] = []
    try:
        raw_rows = raw["rows"]
    except (TypeError, KeyError):
        raise SchemeError(["scheme must be an object with a 'rows' list"]) from None
    if not isinstance(raw_rows, list) or not raw_rows:
        raise SchemeError(["scheme needs at least one row"])

    rows: list[SchemeRow] = []
    strict = True
    for i, rr in enumerate(raw_rows):
        try:
            b, d = float(rr["b"]), float(rr["d"])
            raw_cells = rr["cells"]
            cells = tuple(AffineCell(float(cc["a"]), float(cc["c"])) for cc in raw_cells)
        except (TypeError, KeyError, ValueError) as exc:
            errors.append(f"row {i}: malformed row ({exc!r})")
            continue
        if not cells:
            errors.append(f"row {i}: range: row has no cells")
        if not 0.0 < b < 1.0:
            errors.append(f"row {i}: range: b={b} not in (0,1)")
        if d < -TOL:
            errors.append(f"row {i}: range: d={d} < 0")
        if d + b > 1.0 + TOL:
            errors.append(f"row {i}: range: d+b={d + b} > 1")
        for j, cell in enumerate(cells):
            if not 0.0 < cell.a < 1.0:
                errors.append(f"row {i} cell {j}: range: a={cell.a} not in (0,1)")
            if cell.c < -TOL:
                errors.append(f"row {i} cell {j}: range: c={cell.c} < 0")
            if cell.c + cell.a > 1.0 + TOL:
                errors.append(f"row {i} cell {j}: range: c+a={cell.c + cell.a} > 1")
            if b < cell.a - TOL:
                errors.append(
                    f"row {i} cell {j}: b >= a: b={b} < a={cell.a} "
                    "(horizontal contraction must not be weaker than vertical)"
                )
        for j in range(len(cells) - 1):
            lo, hi = cells[j], cells[j + 1]
            gap = hi.c - (lo.c + lo.a)
            if gap < -TOL:
                errors.append(
                    f"row {i} cell {j + 1}: overlap: c_{j + 2}={hi.c} < a_{j + 1}+c_{j + 1}={lo.a + lo.c}"
                )
            elif gap <= TOL:
                strict = False
        rows.append(SchemeRow(b, d, cells))

    for i in range(len(rows) - 1):
        lo, hi = rows[i], rows[i + 1]
        gap = hi.d - (lo.d + lo.b)
        if gap < -TOL:
            errors.append(f"row {i + 1}: ordering: d_{i + 2}={hi.d} < b_{i + 1}+d_{i + 1}={lo.b + lo.d}")
        elif gap <= TOL:
            strict = False

    if errors:
        raise SchemeError(errors)
    return LGScheme(tuple(rows), strictly_separated=strict)


def compose(F: LGScheme, G: LGScheme) -> LGScheme:
    """The scheme whose maps are ``f o g`` for every map f of F and g of G.

    Rows of the result are pairs of rows, cells are pairs of cells; both are
    sorted by offset with ties broken by pair order, which for valid inputs
    reproduces the lexicographic pair order.
    """
    rows = []
    for rf in F.rows:
        for rg in G.rows:
            cells = [
                AffineCell(cf.a * cg.a, cf.c + cf.a * cg.c) for cf in rf.cells for cg in rg.cells
            ]
            cells.sort(key=lambda cell: cell.c)  # stable: ties keep pair order
            rows.append(SchemeRow(rf.b * rg.b, rf.d + rf.b * rg.d, tuple(cells)))
    rows.sort(key=lambda r: r.d)
    return LGScheme(tuple(rows), strictly_separated=F.strictly_separated and G.strictly_separated)


def compose_word(
    family: SchemeFamily, word: Sequence[int], cap: int = DEFAULT_ALPHABET_CAP
) -> LGScheme:
    """Left fold of :func:`compose` over ``family[w]`` for the symbols of ``word``."""
    if not word:
        raise ValueError("word must be nonempty")
    size = 1
    for w in word:
        size *= family[w].alphabet_size
    if size > cap:
        raise AlphabetCapError(size, cap)
    out = family[word[0]]
    for w in word[1:]:
        out = compose(out, family[w])
    return out


def block_cell(family: SchemeFamily, word: Sequence[int], block: Sequence[tuple[int, int]]) -> int:
    """Flat cell index in ``compose_word(family, word)`` of a block of addresses.

    ``block[l]`` is a 0-based (row, cell) address into ``family[word[l]]``.
    Composition orders rows and cells lexicographically, so the index is a
    mixed-radix number; no composed scheme is needed.
    """
    if len(block) != len(word):
        raise ValueError("block length must equal word length")
    cells_before = 0  # composed cells in rows preceding the current prefix row
    width = 1  # cells in the current prefix row
    cell = 0
    for sym, (i, j) in zip(word, block):
        sizes = family[sym].row_sizes
        cells_before = cells_before * family[sym].alphabet_size + width * sum(sizes[:i])
        cell = cell * sizes[i] + j
        width *= sizes[i]
    return cells_before + cell


def bedford_mcmullen(n: int, m: int, chosen: Iterable[tuple[int, int]]) -> LGScheme:
    """Uniform-grid carpet: ``n`` columns, ``m`` rows, ``chosen`` (row, col) pairs."""
    chosen = set(chosen)
    if not chosen:
        raise SchemeError(["empty selection"])
    if n < m:
        raise SchemeError([f"n={n} < m={m}: need a=1/n <= b=1/m"])
    bad = [(r, c) for r, c in chosen if not (0 <= r < m and 0 <= c < n)]
    if bad:
        raise SchemeError([f"index out of range: {sorted(bad)}"])
    rows = []
    for r in sorted({r for r, _ in chosen}):
        cols = sorted(c for rr, c in chosen if rr == r)
        rows.append({"b": 1.0 / m, "d": r / m, "cells": [{"a": 1.0 / n, "c": c / n} for c in cols]})
    return validate_scheme({"rows": rows})


def row_counts(scheme: LGScheme) -> list[int]:
    return list(scheme.row_sizes)


def scheme_from_json(text: str) -> LGScheme:
    return validate_scheme(json.loads(text))


def scheme_to_json(scheme: LGScheme) -> str:
    return json.dumps(scheme.to_dict())


def family_from_dict(raw: Any) -> SchemeFamily:
    try:
        items = raw["schemes"]
    except (TypeError, KeyError):
        raise SchemeError(["family must be an object with a 'schemes' list"]) from None
    errors: list[str] = []
    schemes = []
    for k, item in enumerate(items):
        try:
            schemes.append(validate_scheme(item))
        except SchemeError as exc:
            errors.extend(f"scheme {k + 1}: {e}" for e in exc.errors)
    if errors:
        raise SchemeError(errors)
    return SchemeFamily(tuple(schemes))
