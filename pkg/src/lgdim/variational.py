"""The Lalley-Gatzouras dimension formula and its maximization.

For a probability vector ``p`` on the cells of a scheme with row marginals
``q`` the formula reads::

    D(p) = sum p log p / sum p log a
           + sum q log q * (1 / sum q log b - 1 / sum p log a)

and the Hausdorff dimension of the limit set is ``max_p D(p)``.  Rearranged,
``D = H(p | q) / |sum p log a| + H(q) / |sum q log b|``, a conditional
entropy over horizontal contraction plus a row entropy over vertical
contraction.

Frequencies of schemes in a driving sequence are handled by
:func:`dim_of_rational_frequency` (periodic sequences, exact) and
:func:`dim_of_frequency_limit` (continuity extension through rational
approximations).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .schemes import (
    DEFAULT_ALPHABET_CAP,
    AlphabetCapError,
    LGScheme,
    SchemeFamily,
    compose_word,
)

SIMPLEX_TOL = 1e-10
_FLOOR = 1e-300


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class CellWeights:
    """Probability weights ``p_ij`` over the flat cell order of ``scheme``."""

    scheme: LGScheme
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.scheme.alphabet_size,):
            raise DomainError(
                f"weights shape {w.shape} does not match alphabet size {self.scheme.alphabet_size}"
            )
        if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError("weights are not a probability vector")

    @property
    def row_marginals(self) -> np.ndarray:
        return np.bincount(self.scheme.cell_row, self.weights, minlength=len(self.scheme.rows))

    @classmethod
    def uniform(cls, scheme: LGScheme) -> "CellWeights":
        n = scheme.alphabet_size
        return cls(scheme, np.full(n, 1.0 / n))


@dataclass
class OptimizerOptions:
    restarts: int = 8
    max_iters: int = 10000
    seed: int = 0
    tol_obj: float = 1e-12
    tol_grad: float = 1e-8
    alphabet_cap: int = DEFAULT_ALPHABET_CAP
    threads: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DimensionReport:
    value: float
    argmax: CellWeights
    restarts_used: int
    iterations: int
    gradient_norm: float
    converged: bool

    def to_dict(self, include_weights: bool = False) -> dict:
        out = {
            "dimension": self.value,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "row_marginals": self.argmax.row_marginals.tolist(),
        }
        if include_weights:
            out["weights"] = self.argmax.weights.tolist()
        return out


@dataclass(frozen=True)
class FrequencyVector:
    """Probability vector over the schemes of a family, optionally exact."""

    entries: tuple[float, ...]
    rational: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        e = tuple(float(x) for x in self.entries)
        object.__setattr__(self, "entries", e)
        if any(x < 0 for x in e) or abs(sum(e) - 1.0) > 1e-12:
            raise DomainError(f"frequency vector {e} is not a probability vector")
        if self.rational is not None:
            if sum(self.rational) != 1 or tuple(float(f) for f in self.rational) != e:
                raise DomainError("rational form does not match entries")

    @classmethod
    def from_fractions(cls, fracs: Sequence[Fraction | int | str]) -> "FrequencyVector":
        fr = tuple(Fraction(f) for f in fracs)
        return cls(tuple(float(f) for f in fr), fr)

    @classmethod
    def parse(cls, text: str) -> "FrequencyVector":
        """Parse ``"1/2,1/2"`` (exact) or ``"0.618034,0.381966"`` (float) forms."""
        parts = [s.strip() for s in text.split(",") if s.strip()]
        if all("." not in s and "e" not in s.lower() for s in parts):
            return cls.from_fractions(parts)
        vals = [float(s) for s in parts]
        return cls(tuple(vals))

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def denominator(self) -> int | None:
        if self.rational is None:
            return None
        return math.lcm(*(f.denominator for f in self.rational))

    def counts(self) -> tuple[int, ...]:
        """Numerators over the common denominator (rational form only)."""
        den = self.denominator
        if den is None:
            raise DomainError("frequency vector has no rational form")
        return tuple(int(f * den) for f in self.rational)

    def delta(self, other: "FrequencyVector") -> float:
        return max(abs(x - y) for x, y in zip(self.entries, other.entries, strict=True))

    def to_dict(self) -> dict:
        out: dict = {"entries": list(self.entries)}
        if self.rational is not None:
            out["rational"] = [str(f) for f in self.rational]
        return out


# ---------------------------------------------------------------------------
# objective and gradient


def _xlogx(x: np.ndarray) -> np.ndarray:
    return x * np.log(np.where(x > 0, x, 1.0))


def _as_weights(scheme: LGScheme, p) -> np.ndarray:
    if isinstance(p, CellWeights):
        if p.weights.shape != (scheme.alphabet_size,):
            raise DomainError("weights belong to a different scheme")
        return p.weights
    w = np.asarray(p, dtype=float)
    if w.shape != (scheme.alphabet_size,):
        raise DomainError(f"weights shape {w.shape} does not match alphabet size {scheme.alphabet_size}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise DomainError("weights are not a probability vector")
    return w


def _objective(scheme: LGScheme, p: np.ndarray) -> float:
    q = np.bincount(scheme.cell_row, p, minlength=len(scheme.rows))
    s = _xlogx(p).sum()
    A = p @ np.log(scheme.cell_a)
    t = _xlogx(q).sum()
    B = q @ np.log(scheme.row_b)
    return float(s / A + t * (1.0 / B - 1.0 / A))


def _objective_batch(scheme: LGScheme, P: np.ndarray) -> np.ndarray:
    """Objective for each row of ``P`` (shape ``(N, |A|)``)."""
    membership = np.zeros((scheme.alphabet_size, len(scheme.rows)))
    membership[np.arange(scheme.alphabet_size), scheme.cell_row] = 1.0
    Q = P @ membership
    s = _xlogx(P).sum(axis=1)
    A = P @ np.log(scheme.cell_a)
    t = _xlogx(Q).sum(axis=1)
    B = Q @ np.log(scheme.row_b)
    return s / A + t * (1.0 / B - 1.0 / A)


def _gradient(scheme: LGScheme, p: np.ndarray) -> np.ndarray:
    row = scheme.cell_row
    la = np.log(scheme.cell_a)
    lb = np.log(scheme.row_b)
    q = np.bincount(row, p, minlength=len(scheme.rows))
    s = float(p @ np.log(p))
    A = float(p @ la)
    t = float(q @ np.log(q))
    B = float(q @ lb)
    dlogp = np.log(p) + 1.0
    dlogq = (np.log(q) + 1.0)[row]
    return (
        dlogp / A
        - s * la / A**2
        + dlogq / B
        - t * lb[row] / B**2
        - dlogq / A
        + t * la / A**2
    )


def lg_objective(scheme: LGScheme, p) -> float:
    """Evaluate the dimension formula at weights ``p`` (``0 log 0 = 0``)."""
    return _objective(scheme, _as_weights(scheme, p))


def lg_gradient(scheme: LGScheme, p) -> np.ndarray:
    """Partial derivatives of the formula with respect to each ``p_ij``.

    The formula is differentiated as a function of all ``p_ij`` (with
    ``q_i = sum_j p_ij``), not of a simplex chart.  Requires ``p > 0``.
    """
    w = _as_weights(scheme, p)
    if np.any(w <= 0):
        raise DomainError("gradient undefined on the simplex boundary (some p_ij = 0)")
    if w.size == 1:
        # the one-point simplex has no interior
        raise DomainError("gradient undefined for a one-cell scheme")
    return _gradient(scheme, w)


def tangent_norm(g: np.ndarray) -> float:
    """Euclidean norm of ``g`` projected onto the simplex tangent space."""
    return float(np.linalg.norm(g - g.mean()))


# ---------------------------------------------------------------------------
# maximization


@dataclass
class _Run:
    p: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    converged: bool


def _ascend(scheme: LGScheme, p0: np.ndarray, opts: OptimizerOptions) -> _Run:
    p = np.maximum(p0, _FLOOR)
    p /= p.sum()
    val = _objective(scheme, p)
    eta = 1.0
    g = _gradient(scheme, p)
    gnorm = tangent_norm(g)
    it = 0
    converged = False
    while it < opts.max_iters:
        it += 1
        # Gains below float resolution cannot be seen; such steps are accepted
        # so the gradient keeps shrinking near the optimum.
        noise = 8 * np.finfo(float).eps * max(1.0, abs(val))
        accepted = False
        for _ in range(60):
            z = eta * (g - g.max())
            cand = p * np.exp(z)
            cand = np.maximum(cand / cand.sum(), _FLOOR)
            cand /= cand.sum()
            cval = _objective(scheme, cand)
            if cval >= val - noise:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        gain = cval - val
        p, val = cand, cval
        g = _gradient(scheme, p)
        gnorm = tangent_norm(g)
        if gain < opts.tol_obj and gnorm < opts.tol_grad:
            converged = True
            break
        if gain > noise:
            eta = min(eta * 1.5, 1e6)
    return _Run(p, val, it, gnorm, converged)


def _start_points(scheme: LGScheme, opts: OptimizerOptions) -> list[np.ndarray]:
    n = scheme.alphabet_size
    rng = np.random.default_rng(opts.seed)
    starts = [np.full(n, 1.0 / n)]
    for _ in range(max(opts.restarts, 1) - 1):
        starts.append(rng.dirichlet(np.ones(n)))
    return starts


def maximize_dimension(scheme: LGScheme, opts: OptimizerOptions | None = None) -> DimensionReport:
    """Maximize the formula over the simplex by exponentiated-gradient ascent.

    Each restart runs the multiplicative update ``p <- p exp(eta grad)``
    (renormalized) with backtracking on ``eta``; the first restart starts at
    the uniform vector, the others at symmetric Dirichlet(1) draws seeded by
    ``opts.seed``.  The best restart is returned; non-convergence is reported
    through the flags, never raised.
    """
    opts = opts or OptimizerOptions()
    n = scheme.alphabet_size
    if n == 1:
        w = CellWeights(scheme, np.ones(1))
        return DimensionReport(0.0, w, 1, 0, 0.0, True)
    starts = _start_points(scheme, opts)
    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as pool:
            runs = list(pool.map(lambda s: _ascend(scheme, s, opts), starts))
    else:
        runs = [_ascend(scheme, s, opts) for s in starts]
    best = max(runs, key=lambda r: r.value)  # first max wins on ties
    weights = CellWeights(scheme, best.p)
    return DimensionReport(
        value=lg_objective(scheme, weights),
        argmax=weights,
        restarts_used=len(runs),
        iterations=sum(r.iterations for r in runs),
        gradient_norm=best.grad_norm,
        converged=best.converged,
    )


# ---------------------------------------------------------------------------
# independent oracles


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]])
    # Stars and bars: choose parts-1 bar positions among total+parts-1 slots.
    bars = np.array(list(itertools.combinations(range(total + parts - 1), parts - 1)))
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), total + parts - 1)])
    return np.diff(edges, axis=1) - 1


def grid_search_oracle(scheme: LGScheme, resolution: int = 200, refinements: int = 3) -> float:
    """Brute-force lower bound on the maximum over the lattice simplex.

    Evaluates every point with coordinates in ``{k / resolution}``, then
    ``refinements`` times halves the step and searches the offsets
    ``{-2..2}`` (per free coordinate) around the incumbent.
    """
    n = scheme.alphabet_size
    if n > 4:
        raise DomainError(f"grid oracle limited to alphabets of size <= 4 (got {n})")
    if n == 1:
        return 0.0
    pts = _compositions(resolution, n) / resolution
    vals = _objective_batch(scheme, pts)
    k = int(np.argmax(vals))
    best_p, best_v = pts[k], float(vals[k])
    step = 1.0 / resolution
    offsets = np.array(list(itertools.product(range(-2, 3), repeat=n - 1)), dtype=float)
    offsets = np.hstack([offsets, -offsets.sum(axis=1, keepdims=True)])
    for _ in range(refinements):
        step /= 2
        cand = best_p + step * offsets
        cand = cand[np.all(cand >= 0, axis=1)]
        cand /= cand.sum(axis=1, keepdims=True)
        cv = _objective_batch(scheme, cand)
        k = int(np.argmax(cv))
        if cv[k] > best_v:
            best_p, best_v = cand[k], float(cv[k])
    return best_v


def mcmullen_oracle(n: int, m: int, row_counts: Sequence[int]) -> float:
    """Closed form ``log_m(sum_j t_j^(log_n m))`` for Bedford-McMullen carpets."""
    if not (n >= m >= 2):
        raise DomainError(f"need n >= m >= 2 (got n={n}, m={m})")
    if not row_counts or len(row_counts) > m or any(not 1 <= t <= n for t in row_counts):
        raise DomainError(f"invalid row counts {list(row_counts)} for a {n}x{m} grid")
    theta = math.log(m) / math.log(n)
    return math.log(math.fsum(t**theta for t in row_counts)) / math.log(m)


# ---------------------------------------------------------------------------
# dimension as a function of scheme frequencies


def balanced_word(Q: FrequencyVector) -> list[int]:
    """Canonical period word for rational ``Q``: symbols interleaved evenly.

    Position ``t`` (1-based) takes the symbol with the largest deficit
    ``t Q_k - count_k``, smallest symbol on ties.
    """
    counts = Q.counts()
    den = sum(counts)
    used = [0] * len(counts)
    word = []
    for t in range(1, den + 1):
        deficits = [Fraction(t * c, den) - u for c, u in zip(counts, used)]
        k = max(range(len(counts)), key=lambda i: (deficits[i], -i))
        used[k] += 1
        word.append(k + 1)
    return word


def word_composition(word: Sequence[int], m: int) -> tuple[int, ...]:
    return tuple(sum(1 for w in word if w == k) for k in range(1, m + 1))


def dim_of_rational_frequency(
    family: SchemeFamily,
    Q: FrequencyVector,
    opts: OptimizerOptions | None = None,
    word: Sequence[int] | None = None,
) -> DimensionReport:
    """Dimension of the limit set for a periodic sequence with frequencies ``Q``.

    The period word (``word`` if given, else :func:`balanced_word`) is composed
    into one scheme whose limit set is the limit set of the periodic sequence,
    so the maximized formula on it is the answer with no rescaling.
    """
    opts = opts or OptimizerOptions()
    if Q.rational is None:
        raise DomainError("rational frequency vector required")
    if Q.m != len(family):
        raise DomainError(f"Q has {Q.m} entries but family has {len(family)} schemes")
    if any(f == 0 for f in Q.rational):
        raise DomainError("all frequencies must be positive")
    if word is None:
        word = balanced_word(Q)
    else:
        den = len(word)
        expected = tuple(f * den for f in Q.rational)
        if word_composition(word, Q.m) != expected:
            raise DomainError(f"word composition does not match Q={Q.rational}")
    composed = compose_word(family, list(word), cap=opts.alphabet_cap)
    return maximize_dimension(composed, opts)


def rational_approximation(P: FrequencyVector, d: int) -> FrequencyVector:
    """Round ``P * d`` to integers summing to ``d`` (largest remainder)."""
    raw = [x * d for x in P.entries]
    nums = [math.floor(x) for x in raw]
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - nums[k]), k))
    for k in order[: d - sum(nums)]:
        nums[k] += 1
    return FrequencyVector.from_fractions([Fraction(x, d) for x in nums])


@dataclass
class TraceEntry:
    denominator: int
    q: tuple[str, ...]
    delta: float
    value: float


@dataclass
class LimitResult:
    report: DimensionReport
    trace: list[TraceEntry] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "dimension": self.report.value,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "trace": [asdict(t) for t in self.trace],
        }


def dim_of_frequency_limit(
    family: SchemeFamily,
    P: FrequencyVector,
    tol: float = 1e-3,
    opts: OptimizerOptions | None = None,
    denominators: Sequence[int] | None = None,
    max_denominator: int = 64,
) -> LimitResult:
    """Continuity extension of the rational-frequency dimension to ``P``.

    Walks increasing denominators ``d`` (``denominators`` if given, else
    ``1, 2, ...``), skipping approximations with a zero entry or repeating an
    earlier one, and stops when successive values differ by less than
    ``tol`` or the alphabet cap is hit.  The result is reported, never
    extrapolated.
    """
    opts = opts or OptimizerOptions()
    if any(x <= 0 for x in P.entries):
        raise DomainError("P must have positive entries")
    if P.rational is not None and P.denominator <= max_denominator:
        rep = dim_of_rational_frequency(family, P, opts)
        entry = TraceEntry(P.denominator, tuple(map(str, P.rational)), 0.0, rep.value)
        return LimitResult(rep, [entry], True, "exact rational P")

    dens = denominators if denominators is not None else range(1, max_denominator + 1)
    result = LimitResult(report=None)  # type: ignore[arg-type]
    seen: set[tuple[Fraction, ...]] = set()
    result.stop_reason = "denominators exhausted"
    for d in dens:
        Qd = rational_approximation(P, d)
        if any(f == 0 for f in Qd.rational) or Qd.rational in seen:
            continue
        seen.add(Qd.rational)
        try:
            rep = dim_of_rational_frequency(family, Qd, opts)
        except AlphabetCapError as exc:
            result.stop_reason = f"alphabet cap: {exc}"
            break
        prev = result.trace[-1].value if result.trace else None
        result.trace.append(TraceEntry(d, tuple(map(str, Qd.rational)), P.delta(Qd), rep.value))
        result.report = rep
        if prev is not None and abs(rep.value - prev) < tol and denominators is None:
            result.converged = True
            result.stop_reason = "successive values within tol"
            break
    if result.report is None:
        raise DomainError("no usable rational approximation")
    if denominators is not None and len(result.trace) >= 2:
        result.converged = abs(result.trace[-1].value - result.trace[-2].value) < tol
    return result
