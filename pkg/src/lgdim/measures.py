"""Bernoulli measures on period blocks, local dimensions and transport checks.

A :class:`PeriodMeasure` puts i.i.d. weights on consecutive blocks of
``L = len(period_word)`` addresses, each block being one cell of the
composed period scheme.  Rectangles must have block-aligned depths so the
measure is a plain product; the local-dimension ratios are unaffected
because aligned and unaligned depths differ by at most one period.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .coupling import (
    AddressWord,
    Rectangle,
    approximate_square,
    chi_permutation,
    fit_k,
    image_bounds,
    position_logs,
    required_length,
    tau_apply,
)
from .schemes import LGScheme, SchemeFamily, compose_word
from .sequences import SymbolSequence
from .variational import (
    CellWeights,
    DomainError,
    FrequencyVector,
    OptimizerOptions,
    balanced_word,
    dim_of_rational_frequency,
)


@dataclass(frozen=True, eq=False)
class PeriodMeasure:
    family: SchemeFamily
    period_word: tuple[int, ...]
    composed: LGScheme
    weights: CellWeights

    def __post_init__(self):
        if self.weights.weights.shape != (self.composed.alphabet_size,):
            raise DomainError("weights do not match the composed scheme")

    @property
    def period(self) -> int:
        return len(self.period_word)

    @property
    def sequence(self) -> SymbolSequence:
        return SymbolSequence.periodic(self.period_word, len(self.family))

    @cached_property
    def log_p(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights.weights)

    @cached_property
    def log_q(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights.row_marginals)

    @cached_property
    def decode(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per composed cell: 1-based block rows, block cols (``(|A|, L)``) and composed row."""
        n = self.composed.alphabet_size
        rows = np.empty((n, self.period), np.int64)
        cols = np.empty((n, self.period), np.int64)
        per_symbol = [
            [(i, j) for i, r in enumerate(self.family[k].rows) for j in range(len(r.cells))]
            for k in self.period_word
        ]
        blocks = list(itertools.product(*per_symbol))
        r = np.array([[i for i, _ in b] for b in blocks])
        c = np.array([[j for _, j in b] for b in blocks])
        idx = block_cells(self.family, self.period_word, r, c)
        rows[idx] = r + 1
        cols[idx] = c + 1
        return rows, cols, self.composed.cell_row

    @classmethod
    def from_weights(
        cls, family: SchemeFamily, word: Sequence[int], weights, cap: int = 20000
    ) -> "PeriodMeasure":
        composed = compose_word(family, list(word), cap=cap)
        if not isinstance(weights, CellWeights):
            weights = CellWeights(composed, weights)
        return cls(family, tuple(word), composed, weights)


def block_cells(
    family: SchemeFamily, word: Sequence[int], rows: np.ndarray, cols: np.ndarray
) -> np.ndarray:
    """Vectorized flat composed-cell index for blocks of 0-based addresses.

    ``rows`` and ``cols`` have shape ``(B, len(word))``.
    """
    rows = np.asarray(rows, np.int64)
    cols = np.asarray(cols, np.int64)
    before = np.zeros(rows.shape[0], np.int64)
    width = np.ones(rows.shape[0], np.int64)
    cell = np.zeros(rows.shape[0], np.int64)
    for l, sym in enumerate(word):
        s = family[sym]
        sizes = np.array(s.row_sizes, np.int64)
        cum = np.concatenate([[0], np.cumsum(sizes)])
        i, j = rows[:, l], cols[:, l]
        before = before * s.alphabet_size + width * cum[i]
        cell = cell * sizes[i] + j
        width = width * sizes[i]
    return before + cell


def block_rows(family: SchemeFamily, word: Sequence[int], rows: np.ndarray) -> np.ndarray:
    """Composed-row index for blocks of 0-based row addresses."""
    out = np.zeros(rows.shape[0], np.int64)
    for l, sym in enumerate(word):
        out = out * len(family[sym].rows) + rows[:, l]
    return out


def period_measure(
    family: SchemeFamily,
    Q: FrequencyVector,
    opts: OptimizerOptions | None = None,
    word: Sequence[int] | None = None,
) -> tuple[PeriodMeasure, float]:
    """Measure with the maximizing weights for frequencies ``Q``, and its dimension."""
    opts = opts or OptimizerOptions()
    word = list(word) if word is not None else balanced_word(Q)
    rep = dim_of_rational_frequency(family, Q, opts, word=word)
    return PeriodMeasure(family, tuple(word), rep.argmax.scheme, rep.argmax), rep.value


def rectangle_measure(mu: PeriodMeasure, R: Rectangle) -> float:
    """``log mu(R)`` for a rectangle with block-aligned depths."""
    L = mu.period
    if R.n1 % L or R.n2 % L:
        raise DomainError(f"depths n1={R.n1}, n2={R.n2} are not multiples of the period {L}")
    b1, b2 = R.n1 // L, R.n2 // L
    rows = (R.base.rows[: R.n2] - 1).reshape(b2, L)
    cols = (R.base.cols[: R.n2] - 1).reshape(b2, L)
    total = 0.0
    if b1:
        total += float(mu.log_p[block_cells(mu.family, mu.period_word, rows[:b1], cols[:b1])].sum())
    if b2 > b1:
        total += float(mu.log_q[block_rows(mu.family, mu.period_word, rows[b1:])].sum())
    return total


def sample_word(mu: PeriodMeasure, blocks: int, rng: np.random.Generator) -> AddressWord:
    """Address word of ``blocks`` i.i.d. blocks drawn from ``mu``."""
    drawn = rng.choice(mu.composed.alphabet_size, size=blocks, p=mu.weights.weights)
    rows, cols, _ = mu.decode
    return AddressWord(rows[drawn].ravel(), cols[drawn].ravel())


def aligned_square(mu: PeriodMeasure, base: AddressWord, n1: int) -> Rectangle:
    """Approximate square at ``n1`` with ``n2`` rounded down to a block boundary."""
    R = approximate_square(mu.family, mu.sequence, base, n1)
    n2 = max(R.n1, R.n2 - R.n2 % mu.period)
    return Rectangle(base, R.n1, n2)


@dataclass
class LocalDimensionTrace:
    seed: int
    depths: list[int]
    ratios: list[float]

    @property
    def last(self) -> float:
        return self.ratios[-1]


def local_dimension_trace(
    mu: PeriodMeasure, seed: int, depths: Sequence[int]
) -> LocalDimensionTrace:
    """``log mu(R_k) / log d1(R_k)`` along approximate squares of a mu-typical word."""
    L = mu.period
    if any(d % L for d in depths) or list(depths) != sorted(depths):
        raise DomainError("depths must be increasing multiples of the period")
    rng = np.random.default_rng(seed)
    need = required_length(mu.family, max(depths)) + L
    base = sample_word(mu, -(-need // L), rng)
    la, _ = position_logs(mu.family, mu.sequence, base)
    ratios = []
    for n1 in depths:
        R = aligned_square(mu, base, n1)
        width = float(la[:n1].sum())
        ratios.append(rectangle_measure(mu, R) / width if n1 else float("nan"))
    return LocalDimensionTrace(seed, list(depths), ratios)


@dataclass
class SandwichReport:
    dimension: float
    delta: float
    k_hat: float
    slack: float
    depth: int
    lower: float
    upper: float
    per_seed: list[dict] = field(default_factory=list)
    ratio_min: float = float("nan")
    ratio_max: float = float("nan")
    ok: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def sandwich_check(
    family: SchemeFamily,
    omega: SymbolSequence,
    Q: FrequencyVector,
    depth: int,
    seeds: Sequence[int],
    k_hat: float = 0.0,
    slack: float = 0.05,
    opts: OptimizerOptions | None = None,
    word: Sequence[int] | None = None,
    max_delta: float = 0.2,
) -> SandwichReport:
    """Transport mu_Q-typical rectangles to ``omega`` and bracket their ratios.

    Each seed draws a word from mu_Q, takes its aligned approximate square
    ``R`` at width depth ``depth`` and moves it along the coupling.  Since
    ``nu_Q(tau R) = mu_Q(R)``, the ratios ``log mu_Q(R) / log d1`` are taken
    against the outer and inner bracketing rectangles of ``tau R``; they must
    fall in ``[L(Q)(1 - K delta) - slack, L(Q)(1 + K delta) + slack]``.
    """
    P = omega.frequencies()
    delta = P.delta(Q)
    if delta > max_delta:
        raise DomainError(f"frequency mismatch {delta:.3g} exceeds {max_delta}")
    mu, dim = period_measure(family, Q, opts, word)
    L = mu.period
    n1 = depth - depth % L
    lower = dim * (1 - k_hat * delta) - slack
    upper = dim * (1 + k_hat * delta) + slack
    report = SandwichReport(dim, delta, k_hat, slack, n1, lower, upper)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        need = int(required_length(family, n1) * 1.5 / max(1 - 2 * delta, 0.25)) + 2 * L
        base = sample_word(mu, -(-need // L), rng)
        R = aligned_square(mu, base, n1)
        log_mu = rectangle_measure(mu, R)
        chi = chi_permutation(omega, mu.sequence, len(base))
        r1, r2, s1, s2 = image_bounds(chi, R.n1, R.n2)
        image = tau_apply(chi, base)
        la, _ = position_logs(family, omega, image.prefix(s2))
        outer = log_mu / float(la[:r1].sum())
        inner = log_mu / float(la[:s1].sum())
        report.per_seed.append(
            {"seed": int(seed), "n2": R.n2, "r1": r1, "s1": s1, "ratio_outer": outer, "ratio_inner": inner}
        )
    ratios = [r for s in report.per_seed for r in (s["ratio_outer"], s["ratio_inner"])]
    report.ratio_min, report.ratio_max = min(ratios), max(ratios)
    report.ok = bool(lower <= report.ratio_min and report.ratio_max <= upper)
    return report


@dataclass
class SweepResult:
    reports: list[SandwichReport]
    slope: float
    r_squared: float


def sandwich_sweep(
    family: SchemeFamily,
    omegas: Sequence[SymbolSequence],
    Q: FrequencyVector,
    depth: int,
    seeds: Sequence[int],
    opts: OptimizerOptions | None = None,
) -> SweepResult:
    """Sandwich reports for several driving sequences and the fitted growth of
    the relative bracket width ``(max - min) / L(Q)`` with ``delta``."""
    reps = [sandwich_check(family, w, Q, depth, seeds, opts=opts, slack=np.inf) for w in omegas]
    fit = fit_k(
        [r.delta for r in reps], [(r.ratio_max - r.ratio_min) / r.dimension for r in reps]
    )
    return SweepResult(reps, fit.k_hat, fit.r_squared)
