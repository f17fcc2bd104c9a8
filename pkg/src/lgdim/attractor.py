"""Finite-depth point clouds of sequence-driven limit sets.

Points are images of the base point (0, 0) under
``f_{w_1} o f_{w_2} o ... o f_{w_n}`` with ``f_{w_l}`` a map of scheme
``omega_l``.  At depth ``n`` every point is within ``max contraction ** n``
of the limit set; any other base point converges to the same set.

Box counting is a sanity bound only.  Box dimension is at least the
Hausdorff dimension and, for carpets whose rows hold different numbers of
cells, strictly larger, so it must never be used as an equality oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .schemes import SchemeFamily
from .sequences import SymbolSequence, symbols

EXHAUSTIVE_CAP = 10**6


class AttractorError(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray  # shape (N, 2)
    depth: int
    mode: str  # "exhaustive" | "sampled"
    count: int | None = None
    seed: int | None = None

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        try:
            with path.open("w") as fh:
                fh.write("x,y\n")
                np.savetxt(fh, self.points, fmt="%.17g", delimiter=",")
        except OSError as exc:
            raise AttractorError(f"cannot write {path}: {exc}") from exc


def _scheme_arrays(family: SchemeFamily, k: int):
    s = family[k]
    return s.cell_a, s.cell_c, s.row_b[s.cell_row], s.row_d[s.cell_row]


def generate_points(
    family: SchemeFamily,
    seq: SymbolSequence,
    depth: int,
    mode: str = "exhaustive",
    count: int = 100_000,
    seed: int = 0,
    level_weights: Sequence[Sequence[float]] | None = None,
) -> PointCloud:
    """Depth-``depth`` images of (0, 0).

    ``exhaustive`` enumerates every address word (refused above
    ``EXHAUSTIVE_CAP`` words); ``sampled`` draws ``count`` words with
    independent per-level choices, uniform unless ``level_weights[l]`` gives
    weights over the cells of level ``l``'s scheme.
    """
    if depth < 1:
        raise AttractorError("depth must be >= 1")
    syms = symbols(seq, depth)
    if mode == "exhaustive":
        total = math.prod(family[int(k)].alphabet_size for k in syms)
        if total > EXHAUSTIVE_CAP:
            raise AttractorError(f"exhaustive enumeration of {total} words exceeds {EXHAUSTIVE_CAP}")
        # Running composite map x -> A x + C, y -> B y + D, built left to right.
        A = np.ones(1)
        C = np.zeros(1)
        B = np.ones(1)
        D = np.zeros(1)
        for k in syms:
            a, c, b, d = _scheme_arrays(family, int(k))
            C = (C[:, None] + A[:, None] * c[None, :]).ravel()
            D = (D[:, None] + B[:, None] * d[None, :]).ravel()
            A = (A[:, None] * a[None, :]).ravel()
            B = (B[:, None] * b[None, :]).ravel()
        return PointCloud(np.column_stack([C, D]), depth, "exhaustive")
    if mode != "sampled":
        raise AttractorError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    A = np.ones(count)
    C = np.zeros(count)
    B = np.ones(count)
    D = np.zeros(count)
    for l, k in enumerate(syms):
        a, c, b, d = _scheme_arrays(family, int(k))
        w = None
        if level_weights is not None:
            w = np.asarray(level_weights[l], float)
            if w.shape != a.shape or np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
                raise AttractorError(f"invalid weights at level {l + 1}")
        pick = rng.choice(a.size, size=count, p=w)
        C = C + A * c[pick]
        D = D + B * d[pick]
        A = A * a[pick]
        B = B * b[pick]
    return PointCloud(np.column_stack([C, D]), depth, "sampled", count, seed)


def box_counts(points: np.ndarray, k: int) -> int:
    """Number of occupied dyadic boxes of side ``2**-k``."""
    n = 1 << k
    ij = np.clip(np.floor(points * n).astype(np.int64), 0, n - 1)
    return int(np.unique(ij[:, 0] * n + ij[:, 1]).size)


@dataclass
class BoxCountEstimate:
    estimate: float
    scales: list[int] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    k_max_used: int = 0


def box_count_estimate(cloud: PointCloud, k_min: int = 1, k_max: int = 10) -> BoxCountEstimate:
    """Least-squares slope of ``log N(2^-k)`` against ``k log 2``.

    ``k_max`` is lowered until the cloud has at least ten points per occupied
    box at the finest scale.
    """
    pts = cloud.points
    if len(pts) == 0:
        raise AttractorError("empty point cloud")
    if k_min >= k_max:
        raise AttractorError("need k_min < k_max")
    while k_max >= k_min and len(pts) < 10 * box_counts(pts, k_max):
        k_max -= 1
    ks = list(range(k_min, k_max + 1))
    if len(ks) < 3:
        raise AttractorError(f"too few usable scales ({len(ks)}); add points or lower k_min")
    counts = [box_counts(pts, k) for k in ks]
    x = np.array(ks, float) * math.log(2)
    y = np.log(np.array(counts, float))
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    return BoxCountEstimate(float(slope), ks, counts, res.tolist(), k_max)


def render_pgm(cloud: PointCloud, resolution: int, path: str | Path) -> Path:
    """Write a binary PGM (P5) of log-scaled hit counts, origin at bottom left."""
    if not 64 <= resolution <= 8192:
        raise AttractorError("resolution must lie in [64, 8192]")
    n = resolution
    ij = np.clip(np.floor(cloud.points * n).astype(np.int64), 0, n - 1)
    hits = np.zeros((n, n), np.int64)
    np.add.at(hits, (n - 1 - ij[:, 1], ij[:, 0]), 1)
    peak = hits.max()
    gray = np.zeros((n, n), np.uint8)
    if peak > 0:
        gray = np.round(255 * np.log1p(hits) / math.log1p(peak)).astype(np.uint8)
    path = Path(path)
    try:
        with path.open("wb") as fh:
            fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
            fh.write(gray.tobytes())
    except OSError as exc:
        raise AttractorError(f"cannot write {path}: {exc}") from exc
    return path
