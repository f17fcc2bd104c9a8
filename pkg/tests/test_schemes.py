import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _gen import random_scheme
from lgdim.schemes import (
    AlphabetCapError,
    SchemeError,
    SchemeFamily,
    bedford_mcmullen,
    block_cell,
    compose,
    compose_word,
    family_from_dict,
    scheme_from_json,
    scheme_to_json,
    validate_scheme,
)

seeds = st.integers(0, 2**32 - 1)


def test_full_square_is_valid_but_touching(full_square):
    assert full_square.alphabet_size == 4
    assert not full_square.strictly_separated


def test_overlapping_cells_rejected():
    raw = {"rows": [{"b": 0.5, "d": 0.0, "cells": [{"a": 0.3, "c": 0.0}, {"a": 0.3, "c": 0.25}]}]}
    with pytest.raises(SchemeError) as info:
        validate_scheme(raw)
    assert len(info.value.errors) == 1
    assert "overlap" in info.value.errors[0] and "row 0 cell 1" in info.value.errors[0]


def test_b_less_than_a_rejected():
    raw = {"rows": [{"b": 0.4, "d": 0.0, "cells": [{"a": 0.5, "c": 0.0}]}]}
    with pytest.raises(SchemeError, match="b >= a"):
        validate_scheme(raw)


def test_every_violation_reported():
    raw = {"rows": [
        {"b": 0.6, "d": 0.0, "cells": [{"a": 0.7, "c": 0.0}]},
        {"b": 0.5, "d": 0.5, "cells": [{"a": 0.2, "c": 0.9}]},
    ]}
    with pytest.raises(SchemeError) as info:
        validate_scheme(raw)
    text = " | ".join(info.value.errors)
    assert "b >= a" in text and "ordering" in text and "c+a" in text


def test_separated_scheme_flagged():
    raw = {"rows": [{"b": 0.4, "d": 0.0, "cells": [{"a": 0.3, "c": 0.0}, {"a": 0.3, "c": 0.5}]},
                    {"b": 0.4, "d": 0.5, "cells": [{"a": 0.2, "c": 0.1}]}]}
    assert validate_scheme(raw).strictly_separated


def test_compose_single_maps(single_map):
    G = validate_scheme({"rows": [{"b": 0.4, "d": 0.1, "cells": [{"a": 0.2, "c": 0.3}]}]})
    (row,) = compose(single_map, G).rows
    (cell,) = row.cells
    assert cell.a == pytest.approx(0.05, abs=1e-15)
    assert cell.c == pytest.approx(0.175, abs=1e-15)
    assert row.b == pytest.approx(0.2, abs=1e-15)
    assert row.d == pytest.approx(0.25, abs=1e-15)


def test_full_square_refines_to_grid(full_square):
    FF = compose(full_square, full_square)
    assert len(FF.rows) == 4 and all(len(r.cells) == 4 for r in FF.rows)
    assert np.allclose(FF.cell_a, 0.25) and np.allclose(FF.row_b, 0.25)
    assert np.allclose(FF.row_d, [0, 0.25, 0.5, 0.75])
    assert np.allclose(FF.rows[0].cells[3].c, 0.75)


def _assert_same_maps(S, T, tol):
    assert S.row_sizes == T.row_sizes
    for name in ("cell_a", "cell_c", "row_b", "row_d"):
        np.testing.assert_allclose(getattr(S, name), getattr(T, name), rtol=0, atol=tol)


def test_associativity(bm32, bm32_alt, bm43):
    left = compose(compose(bm32, bm32_alt), bm43)
    right = compose(bm32, compose(bm32_alt, bm43))
    _assert_same_maps(left, right, 1e-14)


def test_compose_word(full_square, bm32, bm32_alt):
    fam = SchemeFamily((full_square,))
    assert compose_word(fam, [1]) == full_square
    assert compose_word(fam, [1, 1]) == compose(full_square, full_square)
    pair = SchemeFamily((bm32, bm32_alt))
    with pytest.raises(AlphabetCapError) as info:
        compose_word(pair, [1, 2] * 4 + [1], cap=10000)
    assert info.value.size == 3**9


def test_bedford_mcmullen_construction():
    s = bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)})
    assert s.row_sizes == (2, 1)
    assert np.allclose([c.c for c in s.rows[0].cells], [0, 2 / 3])
    assert s.rows[1].cells[0].c == pytest.approx(1 / 3)
    diag = bedford_mcmullen(2, 2, {(0, 0), (1, 1)})
    assert diag.row_sizes == (1, 1)
    with pytest.raises(SchemeError):
        bedford_mcmullen(1, 2, {(0, 0)})
    with pytest.raises(SchemeError):
        bedford_mcmullen(3, 2, set())
    with pytest.raises(SchemeError):
        bedford_mcmullen(3, 2, {(2, 0)})


@settings(max_examples=60, deadline=None)
@given(seeds, seeds)
def test_composition_closure(s1, s2):
    F = random_scheme(np.random.default_rng(s1))
    G = random_scheme(np.random.default_rng(s2))
    FG = compose(F, G)
    again = validate_scheme(FG.to_dict())
    assert again.alphabet_size == F.alphabet_size * G.alphabet_size
    if F.strictly_separated and G.strictly_separated:
        assert again.strictly_separated
    # products are exact, in lexicographic pair order
    expected_a = (F.cell_a[:, None] * G.cell_a[None, :])
    got = {(round(x, 15)) for x in FG.cell_a}
    assert got == {round(x, 15) for x in expected_a.ravel()}
    assert set(np.round(FG.row_b, 15)) == set(np.round(np.outer(F.row_b, G.row_b).ravel(), 15))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_block_cell_matches_composed_geometry(seed):
    rng = np.random.default_rng(seed)
    fam = SchemeFamily(tuple(random_scheme(rng, max_rows=2, max_cells=2) for _ in range(2)))
    word = [int(x) for x in rng.integers(1, 3, 3)]
    S = compose_word(fam, word)
    for _ in range(10):
        block, a, c, b, d = [], 1.0, 0.0, 1.0, 0.0
        for w in word:
            s = fam[w]
            i = int(rng.integers(len(s.rows)))
            j = int(rng.integers(len(s.rows[i].cells)))
            cell = s.rows[i].cells[j]
            c, a = c + a * cell.c, a * cell.a
            d, b = d + b * s.rows[i].d, b * s.rows[i].b
            block.append((i, j))
        k = block_cell(fam, word, block)
        assert S.cell_a[k] == pytest.approx(a, abs=1e-15)
        assert S.cell_c[k] == pytest.approx(c, abs=1e-14)
        r = S.cell_row[k]
        assert S.row_b[r] == pytest.approx(b, abs=1e-15)
        assert S.row_d[r] == pytest.approx(d, abs=1e-14)


def test_json_round_trip(bm43):
    text = scheme_to_json(bm43)
    again = scheme_from_json(text)
    assert again == bm43
    assert scheme_to_json(again) == text
    fam = family_from_dict(json.loads(json.dumps(SchemeFamily((bm43, bm43)).to_dict())))
    assert fam.schemes == (bm43, bm43)


def test_family_errors_name_scheme():
    with pytest.raises(SchemeError, match="scheme 2"):
        family_from_dict({"schemes": [
            {"rows": [{"b": 0.5, "d": 0, "cells": [{"a": 0.5, "c": 0}]}]},
            {"rows": [{"b": 0.4, "d": 0, "cells": [{"a": 0.5, "c": 0}]}]},
        ]})
