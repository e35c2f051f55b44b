"""Morphology of converged sets: unions of discs, complements of discs,
or families of parallel bands.

The decision tree is topological first, metric second. Components that
never wind around the torus are tested for roundness with the
isoperimetric ratio; winding components (on both sides of the boundary)
select the band branch, whose slope is fitted from shift-mismatch
counts. The multiplicity l is the observed component count and is
checked against the closed-form predictions from the final perimeter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import grid as _g
from . import shapes as _shapes

__all__ = ["ISO_THRESHOLD", "LimitClass", "wraps", "classify"]

# 4 pi A / P^2 floor for calling a component a disc; the weighted
# perimeter stencil keeps rasterized discs within ~2 percent of round.
ISO_THRESHOLD = 0.9

_SUMMARY_COLUMNS = ("variant", "l", "slope_p", "slope_q", "l_formula",
                    "min_iso", "slope_residual", "warning")


@dataclass(frozen=True)
class LimitClass:
    """Classification verdict with its confidence metrics.

    variant is one of "discs", "complement_discs", "lamellae",
    "unclassified". l counts the classified components (discs, holes, or
    bands). l_formula is the closed-form multiplicity implied by the
    final perimeter (NaN when unclassified); a gap beyond 0.2 between
    the two signals non-convergence and is recorded in warning rather
    than inventing a new class. iso_ratios/component_areas follow the
    component order of the classified family; per-component areas are
    reported but never asserted equal (bands may carry different
    masses).
    """

    variant: str
    l: int
    slope: Optional[tuple[int, int]]
    l_formula: float
    iso_ratios: tuple[float, ...]
    component_areas: tuple[float, ...]
    slope_residual: float
    warning: str = ""

    def __bool__(self) -> bool:
        return self.variant != "unclassified"

    def summary_line(self) -> str:
        sp, sq = (self.slope if self.slope is not None else ("", ""))
        min_iso = min(self.iso_ratios) if self.iso_ratios else ""
        vals = (self.variant, self.l, sp, sq,
                "" if math.isnan(self.l_formula) else f"{self.l_formula:.6g}",
                f"{min_iso:.6g}" if min_iso != "" else "",
                "" if math.isnan(self.slope_residual)
                else f"{self.slope_residual:.6g}",
                self.warning)
        return ",".join(str(v) for v in vals)

    @staticmethod
    def summary_header() -> str:
        return ",".join(_SUMMARY_COLUMNS)


def _tiled_component_count(occ: np.ndarray, ky: int, kx: int,
                           connectivity: int) -> int:
    return _g._periodic_labels(np.tile(occ, (ky, kx)), connectivity)[1]


def wraps(component: _g.TorusSet, connectivity: int = 8) -> tuple[bool, bool]:
    """(horizontal, vertical) winding flags of one connected component.

    The component winds horizontally iff its lift to the k-fold
    horizontal cover stays more connected than k disjoint copies; covers
    k = 2 and 3 together detect any winding number not divisible by 6,
    and slopes that steep are far outside every classifiable perimeter
    budget. Expects a connected component; on a disconnected input the
    flags describe the union.
    """
    occ = component.occupancy
    horizontal = (_tiled_component_count(occ, 1, 2, connectivity) < 2
                  or _tiled_component_count(occ, 1, 3, connectivity) < 3)
    vertical = (_tiled_component_count(occ, 2, 1, connectivity) < 2
                or _tiled_component_count(occ, 3, 1, connectivity) < 3)
    return horizontal, vertical


def _iso_ratio(component: _g.TorusSet) -> float:
    p = _g.perimeter(component)
    return 4.0 * math.pi * _g.volume(component) / (p * p)


def _shift_mismatch(occ: np.ndarray, dy: int, dx: int) -> int:
    return int((occ != np.roll(occ, (dy, dx), axis=(0, 1))).sum())


def _fit_slope(s: _g.TorusSet, l: int, p_inf: float,
               tol_len: float) -> tuple[Optional[tuple[int, int]], float]:
    """Match the set's shift-mismatch signature against every slope the
    perimeter budget allows.

    Translating l bands of slope (p,q) by one cell in direction (rx,ry)
    flips about 2l|p rx ny + q ry nx| cells, so the mismatch counts at
    shifts (1,0), (0,1), (1,1) determine |p|, |q| and the relative sign.
    Returns the best first-quadrant representative and the relative l1
    residual of its signature (mirrored candidates (p,-q) are fitted but
    reported by their mirror; the enumeration only names p,q >= 0).
    """
    g = s.grid
    occ = s.occupancy
    obs = np.array([_shift_mismatch(occ, 0, 1),
                    _shift_mismatch(occ, 1, 0),
                    _shift_mismatch(occ, 1, 1)], dtype=np.float64)
    cands = []
    for p, q in _shapes.lamella_slopes(p_inf + tol_len):
        if 2.0 * l * math.hypot(p, q) > p_inf + tol_len:
            continue
        cands.append((p, q))
        if p > 0 and q > 0:
            cands.append((p, -q))
    best: Optional[tuple[int, int]] = None
    best_res = math.inf
    for p, q in cands:
        pred = np.array([2.0 * l * abs(p) * g.ny,
                         2.0 * l * abs(q) * g.nx,
                         2.0 * l * abs(p * g.ny + q * g.nx)])
        res = float(np.abs(obs - pred).sum() / max(pred.sum(), 1.0))
        if res < best_res:
            best_res = res
            best = (p, abs(q))
    return best, best_res


def _multiplicity_warning(l: int, l_formula: float) -> str:
    if abs(l_formula - l) > 0.2:
        return (f"multiplicity formula gives {l_formula:.3f} for {l} "
                "components; likely not converged")
    return ""


def classify(s: _g.TorusSet, p_inf: float, m: float,
             iso_threshold: float = ISO_THRESHOLD,
             slope_tol: Optional[float] = None) -> LimitClass:
    """Decide which limiting family a converged set belongs to.

    p_inf is the final perimeter of the run, m its conserved volume.
    Occupied components use 8-adjacency and complement components
    4-adjacency (the digital Jordan pairing). slope_tol defaults to two
    cells of relative signature error, the stencil's discretization
    scale.
    """
    _g._require_proper(s, "classify")
    if not (0.0 < m < 1.0):
        raise ValueError("volume fraction must lie in (0, 1)")
    if p_inf <= 0.0:
        raise ValueError("final perimeter must be positive")
    g = s.grid
    if slope_tol is None:
        slope_tol = 2.0 * max(1.0 / g.nx, 1.0 / g.ny)
    tol_len = 2.0 * max(1.0 / g.nx, 1.0 / g.ny)

    comps = _g.connected_components(s, 8)
    flags = [wraps(c, 8) for c in comps]
    winding = [h or v for h, v in flags]
    nan = float("nan")

    if not any(winding):
        iso = tuple(_iso_ratio(c) for c in comps)
        areas = tuple(_g.volume(c) for c in comps)
        l = len(comps)
        l_formula = p_inf * p_inf / (4.0 * math.pi * m)
        if min(iso) < iso_threshold:
            return LimitClass("unclassified", l, None, nan, iso, areas, nan,
                              f"component isoperimetric ratio {min(iso):.3f}"
                              f" below {iso_threshold}")
        return LimitClass("discs", l, None, l_formula, iso, areas, nan,
                          _multiplicity_warning(l, l_formula))

    if not all(winding):
        iso = tuple(_iso_ratio(c) for c in comps)
        areas = tuple(_g.volume(c) for c in comps)
        return LimitClass("unclassified", len(comps), None, nan, iso, areas,
                          nan, "mixed winding and bounded components")

    comp_set = _g.TorusSet(g, ~s.occupancy)
    cocomps = _g.connected_components(comp_set, 4)
    coflags = [wraps(c, 4) for c in cocomps]
    cowinding = [h or v for h, v in coflags]

    if not any(cowinding):
        # every hole is bounded: the set is the complement of discs
        iso = tuple(_iso_ratio(c) for c in cocomps)
        areas = tuple(_g.volume(c) for c in cocomps)
        l = len(cocomps)
        l_formula = p_inf * p_inf / (4.0 * math.pi * (1.0 - m))
        if min(iso) < iso_threshold:
            return LimitClass("unclassified", l, None, nan, iso, areas, nan,
                              f"hole isoperimetric ratio {min(iso):.3f}"
                              f" below {iso_threshold}")
        return LimitClass("complement_discs", l, None, l_formula, iso, areas,
                          nan, _multiplicity_warning(l, l_formula))

    if not all(cowinding):
        iso = tuple(_iso_ratio(c) for c in cocomps)
        areas = tuple(_g.volume(c) for c in cocomps)
        return LimitClass("unclassified", len(comps), None, nan, iso, areas,
                          nan, "winding set with mixed complement components")

    # both sides wind: parallel bands
    l = len(comps)
    iso = tuple(_iso_ratio(c) for c in comps)
    areas = tuple(_g.volume(c) for c in comps)
    slope, residual = _fit_slope(s, l, p_inf, tol_len)
    if slope is None or residual > slope_tol:
        return LimitClass("unclassified", l, slope, nan, iso, areas, residual,
                          f"band slope fit residual {residual:.4f} exceeds "
                          f"{slope_tol:.4f}")
    ell = math.hypot(*slope)
    l_formula = p_inf / (2.0 * ell)
    warning = _multiplicity_warning(l, l_formula)
    if 2.0 * l * ell > p_inf + tol_len:
        warning = (warning + "; " if warning else "") + \
            "band length exceeds the perimeter budget"
    return LimitClass("lamellae", l, slope, l_formula, iso, areas, residual,
                      warning)
