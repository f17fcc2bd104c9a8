"""Symbolic coding of sequence-driven limit sets and the frequency coupling.

A point of the symbolic space for a driving sequence ``omega`` is an
address word ``(i_1, j_1), (i_2, j_2), ...`` where ``(i_l, j_l)`` is a
(row, cell) address in scheme ``omega_l``.  Addresses are 1-based.

Rectangles ``R_{n1,n2}`` fix full addresses up to depth ``n1`` and rows up
to depth ``n2``.  The coupling between ``omega`` and a second sequence
``omegaQ`` matches the ``n``-th appearance of every symbol in both, giving
a permutation ``chi`` of positions and a bijection ``tau`` of address
words.  Every depth-indexed product is kept as a sum of logs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .schemes import SchemeFamily
from .sequences import SequenceError, SymbolSequence, appearance_positions, epsilon_envelope, symbols
from .variational import FrequencyVector


class CouplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AddressWord:
    """Finite address word; ``rows[l-1], cols[l-1]`` is the 1-based ``(i_l, j_l)``."""

    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.int64)
        c = np.asarray(self.cols, dtype=np.int64)
        if r.shape != c.shape or r.ndim != 1:
            raise CouplingError("rows and cols must be 1-d arrays of equal length")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]]) -> "AddressWord":
        if not pairs:
            return cls(np.zeros(0, np.int64), np.zeros(0, np.int64))
        r, c = zip(*pairs)
        return cls(np.array(r), np.array(c))

    def __len__(self) -> int:
        return int(self.rows.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AddressWord):
            return NotImplemented
        return np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)

    def prefix(self, n: int) -> "AddressWord":
        return AddressWord(self.rows[:n], self.cols[:n])

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))


@dataclass(frozen=True)
class Rectangle:
    base: AddressWord
    n1: int
    n2: int

    def __post_init__(self):
        if not 0 <= self.n1 <= self.n2 <= len(self.base):
            raise CouplingError(
                f"need 0 <= n1 <= n2 <= len(base); got n1={self.n1}, n2={self.n2}, len={len(self.base)}"
            )


@dataclass(frozen=True)
class Extents:
    d1: float
    d2: float
    log_d1: float
    log_d2: float


class _Tables:
    """Flat lookup tables across all schemes of a family."""

    def __init__(self, family: SchemeFamily):
        self.cell_base = []
        self.row_base = []
        self.row_offsets = []
        la, lb, sizes, nrows = [], [], [], []
        cb = rb = 0
        for s in family.schemes:
            self.cell_base.append(cb)
            self.row_base.append(rb)
            la.append(np.log(s.cell_a))
            lb.append(np.log(s.row_b))
            sizes.append(np.array(s.row_sizes))
            nrows.append(len(s.rows))
            cb += s.alphabet_size
            rb += len(s.rows)
        self.cell_base = np.array(self.cell_base, dtype=np.int64)
        self.row_base = np.array(self.row_base, dtype=np.int64)
        self.log_a = np.concatenate(la)
        self.log_b = np.concatenate(lb)
        self.row_size = np.concatenate(sizes).astype(np.int64)
        self.row_first_cell = np.concatenate(
            [np.concatenate([[0], np.cumsum(z)[:-1]]) for z in sizes]
        ).astype(np.int64)
        self.n_rows = np.array(nrows, dtype=np.int64)

    def lookup(self, syms: np.ndarray, word: AddressWord) -> tuple[np.ndarray, np.ndarray]:
        """Per-position ``log a`` and ``log b`` for ``word`` read along ``syms``."""
        k = syms - 1
        i = word.rows - 1
        j = word.cols - 1
        grow = self.row_base[k] + i
        cell = self.cell_base[k] + self.row_first_cell[grow] + j
        return self.log_a[cell], self.log_b[grow]

    def check(self, syms: np.ndarray, word: AddressWord) -> None:
        k = syms - 1
        i = word.rows - 1
        if np.any(i < 0) or np.any(i >= self.n_rows[k]):
            bad = int(np.flatnonzero((i < 0) | (i >= self.n_rows[k]))[0]) + 1
            raise CouplingError(f"row address out of range at position {bad}")
        grow = self.row_base[k] + i
        j = word.cols - 1
        if np.any(j < 0) or np.any(j >= self.row_size[grow]):
            bad = int(np.flatnonzero((j < 0) | (j >= self.row_size[grow]))[0]) + 1
            raise CouplingError(f"cell address out of range at position {bad}")


@lru_cache(maxsize=64)
def _tables(family: SchemeFamily) -> _Tables:
    return _Tables(family)


def position_logs(
    family: SchemeFamily, seq: SymbolSequence, word: AddressWord, validate: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """``log a_{i_l j_l}`` and ``log b_{i_l}`` for every position of ``word``."""
    syms = symbols(seq, len(word))
    t = _tables(family)
    if validate:
        t.check(syms, word)
    return t.lookup(syms, word)


def validate_word(family: SchemeFamily, seq: SymbolSequence, word: AddressWord) -> None:
    _tables(family).check(symbols(seq, len(word)), word)


def random_word(
    family: SchemeFamily, seq: SymbolSequence, length: int, rng: np.random.Generator
) -> AddressWord:
    """Address word with each position uniform over the cells of its scheme."""
    syms = symbols(seq, length)
    rows = np.empty(length, np.int64)
    cols = np.empty(length, np.int64)
    for k in np.unique(syms):
        s = family[int(k)]
        idx = np.flatnonzero(syms == k)
        flat = rng.integers(0, s.alphabet_size, idx.size)
        r = s.cell_row[flat]
        rows[idx] = r + 1
        cols[idx] = flat - s.row_offsets[r] + 1
    return AddressWord(rows, cols)


# ---------------------------------------------------------------------------
# rectangles


def rectangle_extents(family: SchemeFamily, seq: SymbolSequence, R: Rectangle) -> Extents:
    """Width ``prod_{k<=n1} a`` and height ``prod_{k<=n2} b`` of ``R``."""
    la, lb = position_logs(family, seq, R.base.prefix(R.n2))
    ld1 = float(la[: R.n1].sum())
    ld2 = float(lb.sum())
    return Extents(float(np.exp(ld1)), float(np.exp(ld2)), ld1, ld2)


def approximate_square(
    family: SchemeFamily, seq: SymbolSequence, base: AddressWord, n1: int
) -> Rectangle:
    """Rectangle at width depth ``n1`` whose height is closest to (not below) its width.

    ``n2`` is the deepest ``n >= n1`` with ``prod_{k<=n} b >= prod_{k<=n1} a``.
    """
    if n1 < 0 or n1 > len(base):
        raise CouplingError(f"depth n1={n1} outside 0..{len(base)}")
    la, lb = position_logs(family, seq, base)
    width = la[:n1].sum()
    heights = np.concatenate([[0.0], np.cumsum(lb)])
    ok = heights >= width - 1e-12 * max(1.0, abs(width))
    if ok[-1]:
        raise CouplingError(
            f"base of length {len(base)} too short to determine the approximate square at n1={n1}"
        )
    # heights decrease with depth, so ok is a run of True followed by False
    n2 = int(np.argmin(ok)) - 1
    return Rectangle(base, n1, max(n2, n1))


# ---------------------------------------------------------------------------
# coupling permutation and bijection


@dataclass(frozen=True, eq=False)
class Permutation:
    """Partial tables of a permutation of the positive integers.

    ``forward[l-1]`` is ``chi(l)`` (0 when not realized); ``inverse[l-1]`` is
    ``chi^{-1}(l)``.  Both are complete on ``1..horizon``.
    """

    forward: np.ndarray
    inverse: np.ndarray
    horizon: int

    def __call__(self, l: int) -> int:
        return int(self.forward[l - 1])

    def inv(self, l: int) -> int:
        return int(self.inverse[l - 1])

    def inverted(self) -> "Permutation":
        return Permutation(self.inverse, self.forward, self.horizon)

    def covered(self, table: np.ndarray | None = None) -> int:
        """Largest ``h`` such that the table is defined on ``1..h``."""
        t = self.forward if table is None else table
        missing = np.flatnonzero(t == 0)
        return int(missing[0]) if missing.size else int(t.size)


def chi_permutation(omega: SymbolSequence, omegaQ: SymbolSequence, horizon: int) -> Permutation:
    """Match the ``n``-th appearance of each symbol in ``omega`` and ``omegaQ``.

    ``chi(l1) = l2`` when ``l1`` and ``l2`` hold the ``n``-th appearance of
    the same symbol in ``omega`` and ``omegaQ`` respectively.  Both tables
    are realized on ``1..horizon``.
    """
    if omega.m != omegaQ.m:
        raise CouplingError(f"symbol sets differ: m={omega.m} vs m={omegaQ.m}")
    m = omega.m
    try:
        cw = np.bincount(symbols(omega, horizon), minlength=m + 1)
        cq = np.bincount(symbols(omegaQ, horizon), minlength=m + 1)
    except SequenceError as exc:
        raise CouplingError(f"horizon {horizon} not available: {exc}") from None
    pairs = []
    for k in range(1, m + 1):
        need = int(max(cw[k], cq[k]))
        if need == 0:
            continue
        try:
            pw = appearance_positions(omega, k, need)
            pq = appearance_positions(omegaQ, k, need)
        except SequenceError as exc:
            raise CouplingError(f"cannot match symbol {k}: {exc}") from None
        pairs.append((pw, pq))
    size = max(max(int(pw[-1]), int(pq[-1])) for pw, pq in pairs)
    forward = np.zeros(size, np.int64)
    inverse = np.zeros(size, np.int64)
    for pw, pq in pairs:
        forward[pw - 1] = pq
        inverse[pq - 1] = pw
    return Permutation(forward, inverse, horizon)


def tau_apply(chi: Permutation, word: AddressWord, length: int | None = None) -> AddressWord:
    """Move an address word along the coupling: output ``l`` takes input ``chi(l)``.

    ``word`` is read along the sequence that ``chi`` maps into; the output is
    read along the sequence ``chi`` maps from.  The result is the longest
    prefix determined by ``word`` unless ``length`` is requested, in which
    case a shorter determined prefix raises :class:`CouplingError`.
    """
    f = chi.forward
    ok = (f > 0) & (f <= len(word))
    h = int(np.argmin(ok)) if not ok.all() else int(f.size)
    if length is not None:
        if length > h:
            raise CouplingError(f"coupling determines only {h} positions, {length} requested")
        h = length
    src = f[:h] - 1
    return AddressWord(word.rows[src], word.cols[src])


def tau_inverse(chi: Permutation, word: AddressWord, length: int | None = None) -> AddressWord:
    return tau_apply(chi.inverted(), word, length)


def image_bounds(chi: Permutation, n1: int, n2: int) -> tuple[int, int, int, int]:
    """Depths ``(r1, r2, s1, s2)`` bracketing the image of ``R_{n1,n2}``.

    With ``D1`` and ``D2`` the positions whose coupled positions lie in
    ``1..n1`` and ``n1+1..n2``: ``r1 = min(N - D1) - 1``,
    ``r2 = min(N - (D1 u D2)) - 1``, ``s1 = max D1``, ``s2 = max(D1 u D2)``.
    """
    if not 0 <= n1 <= n2:
        raise CouplingError("need 0 <= n1 <= n2")
    if chi.covered(chi.inverse) < n2:
        raise CouplingError(f"permutation covers only {chi.covered(chi.inverse)} < n2={n2}")
    D1 = chi.inverse[:n1]
    D12 = chi.inverse[:n2]

    def first_gap(D: np.ndarray) -> int:
        present = np.zeros(D.size + 2, bool)
        present[D[D <= D.size + 1]] = True
        return int(np.argmin(present[1:])) + 1

    r1 = first_gap(D1) - 1
    r2 = first_gap(D12) - 1
    s1 = int(D1.max()) if n1 else 0
    s2 = int(D12.max()) if n2 else 0
    return r1, r2, s1, s2


def symbolic_distance(
    family: SchemeFamily, seq: SymbolSequence, w1: AddressWord, w2: AddressWord
) -> float:
    """Width plus height of the smallest rectangle containing both words."""
    L = min(len(w1), len(w2))
    same_i = w1.rows[:L] == w2.rows[:L]
    same_ij = same_i & (w1.cols[:L] == w2.cols[:L])
    n2 = int(np.argmin(same_i)) if not same_i.all() else L
    n1 = int(np.argmin(same_ij)) if not same_ij.all() else L
    n1 = min(n1, n2)
    ext = rectangle_extents(family, seq, Rectangle(w1.prefix(L), n1, n2))
    return ext.d1 + ext.d2


# ---------------------------------------------------------------------------
# finite-horizon check of the image bracketing


@dataclass
class InclusionReport:
    n1: int
    n2: int
    r1: int
    r2: int
    s1: int
    s2: int
    e_outer: float
    e_inner: float
    h_outer: float
    h_inner: float
    delta: float
    eps: float
    outer_square_n2: int
    inner_square_n2: int
    inclusion_ok: bool

    @property
    def deviation(self) -> float:
        return max(abs(self.e_outer - 1), abs(self.e_inner - 1))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["deviation"] = self.deviation
        return out


def sequence_frequencies(seq: SymbolSequence) -> FrequencyVector:
    return seq.frequencies()


def inclusion_exponent_report(
    family: SchemeFamily,
    omega: SymbolSequence,
    omegaQ: SymbolSequence,
    base: AddressWord,
    n1: int,
    chi: Permutation | None = None,
) -> InclusionReport:
    """Exponents of the rectangles bracketing ``tau(R)`` relative to ``R``.

    ``R`` is the approximate square of ``base`` (read along ``omegaQ``) at
    width depth ``n1``.  ``e_outer = log d1(R_{r1,r2}) / log d1(R)`` and
    ``e_inner = log d1(R_{s1,s2}) / log d1(R)`` with the bracketing rectangles
    taken around ``tau(base)`` along ``omega``; ``h_*`` are the height
    analogues.  ``e_outer <= 1 <= e_inner`` holds by construction.
    """
    R = approximate_square(family, omegaQ, base, n1)
    if chi is None:
        chi = chi_permutation(omega, omegaQ, len(base))
    r1, r2, s1, s2 = image_bounds(chi, R.n1, R.n2)
    image = tau_apply(chi, base)
    if len(image) < s2:
        raise CouplingError(f"insufficient depth: tau(base) has {len(image)} < s2={s2} positions")

    la_q, lb_q = position_logs(family, omegaQ, base.prefix(R.n2))
    la_w, lb_w = position_logs(family, omega, image.prefix(s2))
    width = la_q[: R.n1].sum()
    height = lb_q.sum()
    e_outer = float(la_w[:r1].sum() / width) if n1 else 1.0
    e_inner = float(la_w[:s1].sum() / width) if n1 else 1.0
    h_outer = float(lb_w[:r2].sum() / height) if R.n2 else 1.0
    h_inner = float(lb_w[:s2].sum() / height) if R.n2 else 1.0

    # Index containment behind R_{s1,s2}(tau w) c tau(R) c R_{r1,r2}(tau w).
    D1 = set(chi.inverse[: R.n1].tolist())
    D12 = set(chi.inverse[: R.n2].tolist())
    inclusion_ok = (
        set(range(1, r1 + 1)) <= D1 <= set(range(1, s1 + 1))
        and set(range(1, r2 + 1)) <= D12 <= set(range(1, s2 + 1))
    )
    outer_sq = approximate_square(family, omega, image, r1).n2
    inner_sq = approximate_square(family, omega, image, s1).n2

    P = omega.frequencies()
    Q = omegaQ.frequencies()
    delta = P.delta(Q)
    ordinal = max(1, int(n1 * min(x for x in Q.entries if x > 0)))
    eps = max(epsilon_envelope(omega, P, ordinal), epsilon_envelope(omegaQ, Q, ordinal))
    return InclusionReport(
        n1=R.n1, n2=R.n2, r1=r1, r2=r2, s1=s1, s2=s2,
        e_outer=e_outer, e_inner=e_inner, h_outer=h_outer, h_inner=h_inner,
        delta=delta, eps=eps,
        outer_square_n2=outer_sq, inner_square_n2=inner_sq,
        inclusion_ok=inclusion_ok,
    )


def required_length(family: SchemeFamily, n1: int, stretch: float = 1.0) -> int:
    """Base length that certainly determines the approximate square at ``n1``."""
    la = min(float(np.log(s.cell_a).min()) for s in family.schemes)
    lb = max(float(np.log(s.row_b).max()) for s in family.schemes)
    return int(np.ceil(n1 * la / lb * stretch)) + 2


def exponent_ladder(
    family: SchemeFamily,
    omega: SymbolSequence,
    omegaQ: SymbolSequence,
    depths: Sequence[int],
    seed: int = 0,
) -> list[InclusionReport]:
    """Inclusion reports at each depth for a seeded uniform random base word."""
    rng = np.random.default_rng(seed)
    out = []
    for n1 in depths:
        stretch = 1.5
        while True:
            base = random_word(family, omegaQ, required_length(family, n1, stretch) + 16, rng)
            try:
                out.append(inclusion_exponent_report(family, omega, omegaQ, base, n1))
                break
            except CouplingError as exc:
                if "insufficient depth" not in str(exc) or stretch > 64:
                    raise
                stretch *= 2
    return out


@dataclass
class KFit:
    k_hat: float
    r_squared: float
    residuals: list[float] = field(default_factory=list)
    points: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_k(x: Sequence[float], y: Sequence[float]) -> KFit:
    """Least squares ``y ~ K x`` through the origin.

    ``r_squared`` is ``1 - SS_res / SS_tot`` with ``SS_tot`` about the mean
    of ``y``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2:
        raise CouplingError("need at least two points to fit K")
    k = float(x @ y / (x @ x))
    res = y - k * x
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(res @ res) / ss_tot if ss_tot > 0 else 1.0
    return KFit(k, r2, res.tolist(), list(zip(x.tolist(), y.tolist())))


def fit_k_from_reports(reports: Sequence[InclusionReport]) -> KFit:
    return fit_k([r.delta + r.eps for r in reports], [r.deviation for r in reports])
