import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BM32_DIM
from lgdim.coupling import AddressWord, Rectangle, chi_permutation, tau_apply, validate_word
from lgdim.measures import (
    PeriodMeasure,
    block_cells,
    local_dimension_trace,
    period_measure,
    rectangle_measure,
    sample_word,
    sandwich_check,
    sandwich_sweep,
)
from lgdim.schemes import SchemeFamily, compose_word
from lgdim.sequences import SymbolSequence
from lgdim.variational import CellWeights, DomainError, FrequencyVector, maximize_dimension


@pytest.fixture
def mu32(bm32):
    fam = SchemeFamily((bm32,))
    return PeriodMeasure.from_weights(fam, [1], CellWeights.uniform(bm32))


@pytest.fixture
def mu_pair(pair_family):
    mu, _ = period_measure(pair_family, FrequencyVector.parse("1/2,1/2"))
    return mu


def test_rectangle_measure_examples(mu32):
    base = AddressWord.from_pairs([(1, 1), (2, 1), (1, 2)])
    assert math.exp(rectangle_measure(mu32, Rectangle(base, 2, 3))) == pytest.approx(2 / 27)
    assert rectangle_measure(mu32, Rectangle(base, 0, 0)) == 0.0


def test_dirac_path(bm32):
    fam = SchemeFamily((bm32,))
    mu = PeriodMeasure.from_weights(fam, [1], [0.0, 1.0, 0.0])
    path = AddressWord.from_pairs([(1, 2)] * 40)
    for n1, n2 in ((0, 0), (5, 9), (20, 40)):
        assert rectangle_measure(mu, Rectangle(path, n1, n2)) == 0.0
    trace = local_dimension_trace(mu, 0, [10, 100])
    assert trace.ratios == [0.0, 0.0]


def test_alignment_required(mu_pair):
    base = sample_word(mu_pair, 10, np.random.default_rng(0))
    with pytest.raises(DomainError):
        rectangle_measure(mu_pair, Rectangle(base, 3, 4))
    with pytest.raises(DomainError):
        local_dimension_trace(mu_pair, 0, [4, 5])


def test_decode_inverts_block_index(mu_pair):
    rows, cols, _ = mu_pair.decode
    idx = block_cells(mu_pair.family, mu_pair.period_word, rows - 1, cols - 1)
    assert idx.tolist() == list(range(mu_pair.composed.alphabet_size))


def test_sampled_words_are_valid(mu_pair):
    w = sample_word(mu_pair, 50, np.random.default_rng(3))
    validate_word(mu_pair.family, mu_pair.sequence, w)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.integers(0, 3))
def test_additivity(seed, b1, extra):
    """mu(R) equals the sum over its refinements one block deeper."""
    from lgdim.schemes import bedford_mcmullen

    fam = SchemeFamily((bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)}),
                        bedford_mcmullen(4, 3, {(0, 1), (1, 0), (1, 3), (2, 2)})))
    rng = np.random.default_rng(seed)
    word = [1, 2]
    composed = compose_word(fam, word)
    mu = PeriodMeasure.from_weights(fam, word, rng.dirichlet(np.ones(composed.alphabet_size)))
    L = mu.period
    n1, n2 = b1 * L, (b1 + extra) * L
    base = sample_word(mu, b1 + extra + 2, rng)
    parent = rectangle_measure(mu, Rectangle(base, n1, n2))
    rows, cols, crow = mu.decode
    blocks_r = base.rows.reshape(-1, L) - 1
    children = []
    # the next width block takes any cell whose rows agree with those fixed by R
    if extra:
        fixed = int(np.ravel_multi_index(blocks_r[b1], [len(fam[s].rows) for s in word]))
        cell_choices = np.flatnonzero(crow == fixed)
    else:
        cell_choices = np.arange(composed.alphabet_size)
    # the next height block takes any composed row (none is added when n1 = n2)
    row_choices = range(len(composed.rows)) if extra else [None]
    for c, r in itertools.product(cell_choices, row_choices):
        child_r = base.rows.reshape(-1, L).copy()
        child_c = base.cols.reshape(-1, L).copy()
        child_r[b1], child_c[b1] = rows[c], cols[c]
        if r is not None:
            k = np.flatnonzero(crow == r)[0]
            child_r[b1 + extra], child_c[b1 + extra] = rows[k], cols[k]
        child = AddressWord(child_r.ravel(), child_c.ravel())
        children.append(rectangle_measure(mu, Rectangle(child, n1 + L, n2 + L)))
    total = np.logaddexp.reduce(children)
    assert total == pytest.approx(parent, abs=1e-10)


def test_transport_conserves_mass(pair_family):
    omega = SymbolSequence.periodic([2, 1])
    mu, _ = period_measure(pair_family, FrequencyVector.parse("1/2,1/2"))
    rows, cols, _ = mu.decode
    chi = chi_permutation(omega, mu.sequence, 4)
    images, total = set(), []
    for a, b in itertools.product(range(mu.composed.alphabet_size), repeat=2):
        w = AddressWord(np.concatenate([rows[a], rows[b]]), np.concatenate([cols[a], cols[b]]))
        img = tau_apply(chi, w, 4)
        validate_word(pair_family, omega, img)
        images.add(tuple(img.entries))
        total.append(rectangle_measure(mu, Rectangle(w, 4, 4)))
    assert len(images) == mu.composed.alphabet_size**2
    assert math.exp(np.logaddexp.reduce(total)) == pytest.approx(1.0, abs=1e-10)


def test_full_square_ratio_is_two(full_square):
    fam = SchemeFamily((full_square,))
    mu = PeriodMeasure.from_weights(fam, [1], CellWeights.uniform(full_square))
    trace = local_dimension_trace(mu, 0, [10, 100, 1000])
    assert trace.ratios == pytest.approx([2.0, 2.0, 2.0], abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_ratio_bounds(mu_pair, seed):
    trace = local_dimension_trace(mu_pair, seed, [2, 10, 50, 200, 1000])
    assert all(0 <= r <= 2.1 for r in trace.ratios)


def test_local_dimension_bm32(bm32):
    fam = SchemeFamily((bm32,))
    rep = maximize_dimension(bm32)
    mu = PeriodMeasure.from_weights(fam, [1], rep.argmax)
    last = [local_dimension_trace(mu, s, [100, 3000]).last for s in range(8)]
    assert np.median(last) == pytest.approx(BM32_DIM, abs=0.03)


def test_sandwich_identity_transport(pair_family):
    Q = FrequencyVector.parse("1/2,1/2")
    rep = sandwich_check(pair_family, SymbolSequence.periodic([1, 2]), Q, 1000, range(4))
    assert rep.delta == 0
    for s in rep.per_seed:
        assert s["ratio_outer"] == s["ratio_inner"]
    assert rep.ok


def test_sandwich_refuses_large_mismatch(pair_family):
    with pytest.raises(DomainError):
        sandwich_check(pair_family, SymbolSequence.periodic([1, 1, 1, 1, 2]), FrequencyVector.parse("1/2,1/2"), 100, [0])


def test_sandwich_width_grows_with_delta(pair_family):
    Q = FrequencyVector.parse("3/5,2/5")
    omegas = [SymbolSequence.periodic([1, 2, 1, 2, 1]), SymbolSequence.periodic([1, 2])]
    sweep = sandwich_sweep(pair_family, omegas, Q, 500, range(3))
    widths = [(r.ratio_max - r.ratio_min) / r.dimension for r in sweep.reports]
    assert widths[1] > widths[0]
    assert sweep.slope > 0
