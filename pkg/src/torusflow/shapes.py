"""Canonical sets, random tube perturbations, and the seesaw sequence
whose boundaries densify the torus while converging to a lamella in L1.

All constructors are pure: identical arguments (and seed, where one
exists) give bit-identical sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import grid as _g

__all__ = [
    "ShapeSpec",
    "rasterize",
    "perturb",
    "volume_match",
    "counterexample_set",
    "counterexample_ball_cells",
    "lamella_slopes",
]

_KINDS = ("disc", "union_discs", "lamella", "complement")


def _torus_delta(a: np.ndarray | float, b: float) -> np.ndarray:
    d = np.abs(np.asarray(a, dtype=np.float64) - b)
    return np.minimum(d, 1.0 - d)


def _valid_slope(p: int, q: int) -> bool:
    if p < 0 or (p, q) == (0, 0):
        return False
    if p == 0:
        return q == 1
    return math.gcd(p, abs(q)) == 1


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic description of a set on a grid.

    kind selects which fields matter: discs use centers/radii (torus
    coordinates in [0,1), radii above two cells and below 1/2, pairwise
    gaps above two cells), lamellae use slope/offset/width (slope is a
    primitive integer normal (p, q) with p >= 0, width is the stripe's
    measure), and a complement wraps another spec on the same grid.
    """

    kind: str
    grid: _g.PeriodicGrid
    centers: tuple[tuple[float, float], ...] = ()
    radii: tuple[float, ...] = ()
    slope: tuple[int, int] = (0, 1)
    offset: float = 0.0
    width: float = 0.0
    inner: Optional["ShapeSpec"] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        cell = max(1.0 / self.grid.nx, 1.0 / self.grid.ny)
        if self.kind in ("disc", "union_discs"):
            if len(self.centers) != len(self.radii) or not self.centers:
                raise ValueError("need matching nonempty centers and radii")
            if self.kind == "disc" and len(self.centers) != 1:
                raise ValueError("a disc has exactly one center")
            for (cx, cy), r in zip(self.centers, self.radii):
                if not (0.0 <= cx < 1.0 and 0.0 <= cy < 1.0):
                    raise ValueError("centers must lie in [0,1)^2")
                if not (2.0 * cell < r < 0.5):
                    raise ValueError("radii must lie in (2 cells, 1/2)")
            for i in range(len(self.centers)):
                for j in range(i + 1, len(self.centers)):
                    dx = float(_torus_delta(self.centers[i][0],
                                            self.centers[j][0]))
                    dy = float(_torus_delta(self.centers[i][1],
                                            self.centers[j][1]))
                    gap = math.hypot(dx, dy) - self.radii[i] - self.radii[j]
                    if gap <= 2.0 * cell:
                        raise ValueError("discs must be disjoint with gaps "
                                         "above two cells")
        elif self.kind == "lamella":
            p, q = self.slope
            if not _valid_slope(p, q):
                raise ValueError(f"slope {self.slope} is not a primitive "
                                 "(p, q) with p >= 0")
            if not (2.0 * cell < self.width < 1.0 - 2.0 * cell):
                raise ValueError("width must lie in (2 cells, 1 - 2 cells)")
            if not math.isfinite(self.offset):
                raise ValueError("offset must be finite")
        else:
            if self.inner is None or self.inner.grid != self.grid:
                raise ValueError("complement needs an inner spec on the "
                                 "same grid")

    @classmethod
    def disc(cls, grid: _g.PeriodicGrid, center: tuple[float, float],
             radius: float) -> "ShapeSpec":
        return cls("disc", grid, centers=(tuple(center),), radii=(radius,))

    @classmethod
    def union_discs(cls, grid: _g.PeriodicGrid,
                    centers: Sequence[tuple[float, float]],
                    radii: Sequence[float]) -> "ShapeSpec":
        return cls("union_discs", grid,
                   centers=tuple(tuple(c) for c in centers),
                   radii=tuple(float(r) for r in radii))

    @classmethod
    def lamella(cls, grid: _g.PeriodicGrid, slope: tuple[int, int],
                offset: float, width: float) -> "ShapeSpec":
        return cls("lamella", grid, slope=(int(slope[0]), int(slope[1])),
                   offset=float(offset), width=float(width))

    @classmethod
    def complement(cls, inner: "ShapeSpec") -> "ShapeSpec":
        return cls("complement", inner.grid, inner=inner)


def rasterize(spec: ShapeSpec) -> _g.TorusSet:
    """Cell occupied iff its center lies in the analytic set.

    Stripe membership is half open (offset side included), so an
    axis-aligned lamella whose width is a whole number of cells fills
    exactly that many rows or columns at any offset.
    """
    g = spec.grid
    if spec.kind == "complement":
        return _g.TorusSet(g, ~rasterize(spec.inner).occupancy)
    xs = g.centers_x()
    ys = g.centers_y()
    if spec.kind in ("disc", "union_discs"):
        occ = np.zeros((g.ny, g.nx), dtype=bool)
        for (cx, cy), r in zip(spec.centers, spec.radii):
            dx = _torus_delta(xs, cx)
            dy = _torus_delta(ys, cy)
            occ |= (dx[None, :] ** 2 + dy[:, None] ** 2) <= r * r
        return _g.TorusSet(g, occ)
    p, q = spec.slope
    t = (p * xs[None, :] + q * ys[:, None] - spec.offset) % 1.0
    return _g.TorusSet(g, t < spec.width)


def perturb(s: _g.TorusSet, delta: float, seed: int,
            flips: Optional[int] = None) -> _g.TorusSet:
    """Random volume-preserving perturbation inside the delta-tube.

    Flips an equal number of occupied and empty cells, all chosen from
    cells whose distance to the interface is at most delta, without
    replacement and deterministically in the seed. `flips` is the
    per-side count; by default it is drawn uniformly from the feasible
    range. The result stays proper.
    """
    _g._require_proper(s, "perturb")
    g = s.grid
    cell = min(1.0 / g.nx, 1.0 / g.ny)
    if not (delta >= cell):
        raise ValueError("delta must be at least one cell")
    occ = s.occupancy
    tube = _g.boundary_distance(s).values <= delta * (1.0 + 1e-12)
    idx_in = np.flatnonzero((tube & occ).ravel())
    idx_out = np.flatnonzero((tube & ~occ).ravel())
    # keep the result proper: never drain the set or flood the background
    cap = min(idx_in.size, idx_out.size, s.count - 1,
              g.nx * g.ny - s.count - 1)
    rng = np.random.default_rng(seed)
    if flips is None:
        flips = int(rng.integers(0, cap + 1)) if cap > 0 else 0
    if flips < 0:
        raise ValueError("flips must be nonnegative")
    if flips > cap:
        raise ValueError(f"cannot flip {flips} cells per side inside the "
                         f"delta-tube (feasible maximum {cap})")
    if flips == 0:
        return _g.TorusSet(g, occ.copy())
    out = occ.copy().ravel()
    out[rng.choice(idx_in, size=flips, replace=False)] = False
    out[rng.choice(idx_out, size=flips, replace=False)] = True
    return _g.TorusSet(g, out.reshape(g.ny, g.nx))


def volume_match(s: _g.TorusSet, target_cells: int) -> _g.TorusSet:
    """Adjust the cell count to target_cells exactly by flipping cells
    nearest the interface first (removing innermost occupied or adding
    nearest empty), ties broken by (row, col). The boundary moves by at
    most a cell or two, so Hausdorff closeness is preserved."""
    cur = int(s.occupancy.sum())
    total = s.grid.nx * s.grid.ny
    if not (0 < target_cells < total):
        raise ValueError("target_cells must leave the set proper")
    if cur == target_cells:
        return s
    sd = _g.signed_distance(s).values
    occ = s.occupancy.copy()
    if cur > target_cells:
        rows, cols = np.nonzero(occ)
        order = np.lexsort((cols, rows, -sd[rows, cols]))
        k = cur - target_cells
        occ[rows[order[:k]], cols[order[:k]]] = False
    else:
        rows, cols = np.nonzero(~occ)
        order = np.lexsort((cols, rows, sd[rows, cols]))
        k = target_cells - cur
        occ[rows[order[:k]], cols[order[:k]]] = True
    return _g.TorusSet(s.grid, occ)


def _round_robin_order(ball_id: np.ndarray, sq: np.ndarray,
                       rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Indices ordered one-cell-per-ball per round, outermost first
    within each ball, ties by (row, col)."""
    by_ball = np.lexsort((cols, rows, -sq, ball_id))
    ids = ball_id[by_ball]
    # rank within each ball = position since the ball's first entry
    starts = np.flatnonzero(np.concatenate(([True], ids[1:] != ids[:-1])))
    rank = np.arange(ids.size) - np.repeat(starts, np.diff(
        np.concatenate((starts, [ids.size]))))
    return by_ball[np.lexsort((ids, rank))]


def _dyadic_ball_mask(g: _g.PeriodicGrid, n: int,
                      radius_rule: float) -> tuple[np.ndarray, np.ndarray]:
    """Squared distance from each cell center to the nearest dyadic cube
    center, and the mask of cells inside the balls of radius
    radius_rule * 2^-n around those centers. Balls never cross cube
    faces, so the nearest center is always the cell's own cube."""
    two_n = 2 ** n
    ux = (g.centers_x() * two_n - 0.5) % 1.0
    uy = (g.centers_y() * two_n - 0.5) % 1.0
    dx = np.minimum(ux, 1.0 - ux) / two_n
    dy = np.minimum(uy, 1.0 - uy) / two_n
    sq = dx[None, :] ** 2 + dy[:, None] ** 2
    rho = radius_rule / two_n
    return sq, sq <= rho * rho


def counterexample_ball_cells(grid: _g.PeriodicGrid, n: int,
                              radius_rule: float) -> int:
    """Total rasterized cell count of the 4^n modification balls used by
    counterexample_set, the budget its L1 distance to the lamella must
    stay within."""
    if not (0.0 < radius_rule < 0.5):
        raise ValueError("radius_rule must lie in (0, 1/2), so balls stay "
                         "inside their cubes")
    if min(grid.nx, grid.ny) < 2 ** (n + 3):
        raise ValueError(f"grid must resolve the cubes: need at least "
                         f"{2 ** (n + 3)} cells per side")
    return int(_dyadic_ball_mask(grid, n, radius_rule)[1].sum())


def counterexample_set(grid: _g.PeriodicGrid, n: int, s: int,
                       radius_rule: float) -> _g.TorusSet:
    """Lamella of width 2^-s with a ball of radius radius_rule * 2^-n in
    every dyadic cube of side 2^-n: balls outside the stripe are added,
    balls inside are removed. The volume is then matched to the plain
    lamella exactly by a cell-at-a-time trim, round-robin across the
    added islands outermost first (or, on a deficit, by restoring removed
    hole cells the same way), so every cube keeps interface nearby while
    the L1 distance to the lamella stays within the total ball volume.
    """
    if not (1 <= s <= n):
        raise ValueError("need 1 <= s <= n")
    if not (0.0 < radius_rule < 0.5):
        raise ValueError("radius_rule must lie in (0, 1/2), so balls stay "
                         "inside their cubes")
    if min(grid.nx, grid.ny) < 2 ** (n + 3):
        raise ValueError(f"grid must resolve the cubes: need at least "
                         f"{2 ** (n + 3)} cells per side")
    g = grid
    xs = g.centers_x()
    ys = g.centers_y()
    lam = (ys < 2.0 ** (-s))[:, None] & np.ones(g.nx, dtype=bool)[None, :]
    two_n = 2 ** n
    sq, ball = _dyadic_ball_mask(g, n, radius_rule)

    islands = ball & ~lam
    holes = ball & lam
    occ = (lam | islands) & ~holes
    diff = int(islands.sum()) - int(holes.sum())
    if diff != 0:
        pool = islands if diff > 0 else holes
        rows, cols = np.nonzero(pool)
        ball_id = ((ys[rows] * two_n).astype(np.int64) * two_n
                   + (xs[cols] * two_n).astype(np.int64))
        order = _round_robin_order(ball_id, sq[rows, cols], rows, cols)
        take = order[:abs(diff)]
        occ[rows[take], cols[take]] = diff < 0
    return _g.TorusSet(g, occ)


def lamella_slopes(max_perimeter: float) -> list[tuple[int, int]]:
    """Primitive normals (p, q), p, q >= 0, of lamellae with boundary
    length 2*|(p,q)| at most max_perimeter, sorted by norm then
    lexicographically."""
    if not (max_perimeter > 0.0):
        raise ValueError("max_perimeter must be positive")
    lim = int(max_perimeter / 2.0) + 1
    out = []
    for p in range(lim + 1):
        for q in range(lim + 1):
            if (p, q) != (0, 0) and math.gcd(p, q) == 1 \
                    and 4.0 * (p * p + q * q) <= max_perimeter ** 2:
                out.append((p, q))
    out.sort(key=lambda pq: (pq[0] ** 2 + pq[1] ** 2, pq))
    return out
