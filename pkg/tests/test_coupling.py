import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgdim.coupling import (
    AddressWord,
    CouplingError,
    Permutation,
    Rectangle,
    approximate_square,
    chi_permutation,
    exponent_ladder,
    fit_k,
    fit_k_from_reports,
    image_bounds,
    inclusion_exponent_report,
    random_word,
    rectangle_extents,
    symbolic_distance,
    tau_apply,
    tau_inverse,
    validate_word,
)
from lgdim.schemes import SchemeFamily
from lgdim.sequences import SymbolSequence
from lgdim.variational import FrequencyVector, balanced_word


@pytest.fixture
def fam32(bm32):
    return SchemeFamily((bm32,))


def identity(h):
    t = np.arange(1, h + 1)
    return Permutation(t, t.copy(), h)


def test_extents_examples(fam32, one):
    base = AddressWord.from_pairs([(1, 1), (2, 1), (1, 2)])
    ext = rectangle_extents(fam32, one, Rectangle(base, 2, 3))
    assert ext.d1 == pytest.approx(1 / 9) and ext.d2 == pytest.approx(1 / 8)
    ext = rectangle_extents(fam32, one, Rectangle(base, 0, 0))
    assert (ext.d1, ext.d2) == (1.0, 1.0)
    deep = AddressWord.from_pairs([(2, 1)] * 1000)
    ext = rectangle_extents(fam32, one, Rectangle(deep, 1000, 1000))
    assert ext.log_d1 == pytest.approx(-1000 * math.log(3), rel=1e-12)
    assert ext.d1 == 0.0 and math.isfinite(ext.log_d1)


def test_approximate_square_examples(fam32, full_square, one):
    base = AddressWord.from_pairs([(1, 1)] * 8)
    assert approximate_square(fam32, one, base, 2).n2 == 3
    assert approximate_square(fam32, one, base, 0).n2 == 0
    conformal = SchemeFamily((full_square,))
    for n1 in range(6):
        assert approximate_square(conformal, one, base, n1).n2 == n1
    with pytest.raises(CouplingError, match="too short"):
        approximate_square(fam32, one, base.prefix(3), 2)


def test_word_validation(fam32, one):
    validate_word(fam32, one, AddressWord.from_pairs([(1, 2), (2, 1)]))
    with pytest.raises(CouplingError):
        validate_word(fam32, one, AddressWord.from_pairs([(2, 2)]))


def test_chi_examples():
    chi = chi_permutation(SymbolSequence.periodic([1, 2]), SymbolSequence.periodic([1, 1, 2, 2]), 8)
    assert chi.forward[:8].tolist() == [1, 3, 2, 4, 5, 7, 6, 8]
    seq = SymbolSequence.bernoulli((0.4, 0.6), 5)
    chi = chi_permutation(seq, seq, 50)
    assert chi.forward[:50].tolist() == list(range(1, 51))
    chi = chi_permutation(SymbolSequence.periodic([1, 2]), SymbolSequence.periodic([2, 1]), 6)
    assert chi.forward[:6].tolist() == [2, 1, 4, 3, 6, 5]
    with pytest.raises(CouplingError):
        chi_permutation(SymbolSequence.periodic([1, 2]), SymbolSequence.explicit([1, 1, 1], m=2), 4)


def test_tau_examples(pair_family):
    omega = SymbolSequence.periodic([1, 2])
    omegaQ = SymbolSequence.periodic([1, 1, 2, 2])
    rng = np.random.default_rng(0)
    word = random_word(pair_family, omegaQ, 8, rng)
    assert tau_apply(identity(8), word) == word
    chi = chi_permutation(omega, omegaQ, 8)
    image = tau_apply(chi, word, 8)
    assert image.entries == [word.entries[k - 1] for k in (1, 3, 2, 4, 5, 7, 6, 8)]
    # every output position carries a cell of omega's scheme there
    validate_word(pair_family, omega, image)
    assert tau_inverse(chi, image, 8) == word


def test_image_bounds_examples():
    assert image_bounds(identity(8), 3, 5) == (3, 5, 3, 5)
    chi = chi_permutation(SymbolSequence.periodic([1, 2]), SymbolSequence.periodic([1, 1, 2, 2]), 8)
    assert image_bounds(chi, 2, 4) == (1, 4, 3, 4)
    r1, r2, s1, s2 = image_bounds(chi, 0, 3)
    assert r1 == s1 == 0


def test_image_bounds_uses_preimages():
    # chi = (2,3,1): not an involution, so the preimage and image differ
    chi = Permutation(np.array([2, 3, 1]), np.array([3, 1, 2]), 3)
    # positions carried into 1..1 are chi^{-1}(1) = {3}
    assert image_bounds(chi, 1, 3) == (0, 3, 3, 3)


def test_symbolic_distance_examples(fam32, one):
    w = AddressWord.from_pairs([(1, 1), (2, 1), (1, 2), (1, 1), (2, 1), (1, 1)])
    assert symbolic_distance(fam32, one, w, w) == pytest.approx(3**-6 + 2**-6)
    v = AddressWord.from_pairs([(2, 1)] + w.entries[1:])
    assert symbolic_distance(fam32, one, w, v) == 2.0
    u = AddressWord.from_pairs(w.entries[:3] + [(1, 2), (2, 1), (2, 1)])
    assert symbolic_distance(fam32, one, w, u) == pytest.approx(0.068287, abs=1e-6)


def test_inclusion_report_identity(pair_family):
    seq = SymbolSequence.periodic([1, 2])
    base = random_word(pair_family, seq, 400, np.random.default_rng(1))
    rep = inclusion_exponent_report(pair_family, seq, seq, base, 100)
    assert rep.e_outer == rep.e_inner == 1.0
    assert rep.h_outer == rep.h_inner == 1.0
    assert rep.inclusion_ok


def test_inclusion_delta_zero_converges(pair_family):
    reps = exponent_ladder(
        pair_family, SymbolSequence.periodic([1, 2]), SymbolSequence.periodic([1, 1, 1, 2, 2, 2]), [10, 100, 1000]
    )
    dev = [r.deviation for r in reps]
    assert dev[0] > dev[1] > dev[2]
    assert all(r.delta == 0 for r in reps)


def test_k_hat_stable_across_ladders(pair_family):
    omega = SymbolSequence.periodic([1, 2])
    omegaQ = SymbolSequence.periodic(balanced_word(FrequencyVector.parse("3/5,2/5")))
    fits = [
        fit_k_from_reports(exponent_ladder(pair_family, omega, omegaQ, [d * 2**k for k in range(6)], seed))
        for d, seed in ((100, 0), (150, 1), (125, 2))
    ]
    ks = [f.k_hat for f in fits]
    assert max(ks) <= 1.2 * min(ks)
    for f in fits:
        xs, ys = zip(*f.points)
        assert all(y <= f.k_hat * x * 1.5 for x, y in zip(xs, ys))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(20, 300))
def test_bracketing_properties(seed, n1):
    rng = np.random.default_rng(seed)
    from lgdim.schemes import bedford_mcmullen

    fam = SchemeFamily((
        bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)}),
        bedford_mcmullen(4, 3, {(0, 1), (1, 0), (1, 3), (2, 2)}),
    ))
    omega = SymbolSequence.bernoulli((0.5, 0.5), int(rng.integers(1 << 32)))
    omegaQ = SymbolSequence.periodic(rng.permutation([1, 1, 2, 2, 1, 2]).tolist())
    base = random_word(fam, omegaQ, 6 * n1, rng)
    rep = inclusion_exponent_report(fam, omega, omegaQ, base, n1)
    assert rep.inclusion_ok
    assert rep.r1 <= rep.s1 and rep.r2 <= rep.s2
    assert rep.e_outer <= 1 + 1e-12 and rep.e_inner >= 1 - 1e-12
    assert rep.h_outer <= 1 + 1e-12 and rep.h_inner >= 1 - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tau_round_trip(seed):
    rng = np.random.default_rng(seed)
    from lgdim.schemes import bedford_mcmullen

    fam = SchemeFamily((bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)}), bedford_mcmullen(2, 2, {(0, 0), (1, 1)})))
    omega = SymbolSequence.bernoulli((0.3, 0.7), seed)
    omegaQ = SymbolSequence.periodic([1, 2, 2])
    word = random_word(fam, omegaQ, 200, rng)
    chi = chi_permutation(omega, omegaQ, 200)
    image = tau_apply(chi, word)
    validate_word(fam, omega, image)
    back = tau_inverse(chi, image)
    n = len(back)
    assert n > 0 and back == word.prefix(n)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_axioms(seed):
    rng = np.random.default_rng(seed)
    from lgdim.schemes import bedford_mcmullen

    fam = SchemeFamily((bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)}),))
    seq = SymbolSequence.periodic([1])

    def near(w):
        # copy w and perturb a random tail so that words share prefixes
        cut = int(rng.integers(0, len(w)))
        tail = random_word(fam, seq, len(w), rng)
        return AddressWord(
            np.concatenate([w.rows[:cut], tail.rows[cut:]]), np.concatenate([w.cols[:cut], tail.cols[cut:]])
        )

    x = random_word(fam, seq, 12, rng)
    y, z = near(x), near(x)
    d = lambda u, v: symbolic_distance(fam, seq, u, v)  # noqa: E731
    assert d(x, y) == d(y, x)
    assert d(x, x) == pytest.approx(3**-12 + 2**-12)
    assert d(x, z) <= 2 * (d(x, y) + d(y, z))


def test_fit_k():
    f = fit_k([0.1, 0.2, 0.3], [0.2, 0.4, 0.6])
    assert f.k_hat == pytest.approx(2.0) and f.r_squared == pytest.approx(1.0)
    with pytest.raises(CouplingError):
        fit_k([0.1], [0.2])
