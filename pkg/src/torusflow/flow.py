"""Flow driver: iterate volume-preserving steps and record diagnostics.

One run is strictly sequential (each set depends on the previous one);
independent runs share no mutable state. A run stops early once three
consecutive steps change zero cells, which is the stationarity criterion
everywhere in this package: a 3-step window guards against period-2
oscillations of tie-broken threshold cells.

Stored traces satisfy, and `FlowTrace.check_invariants` verifies:
perimeter nonincreasing, volume constant, dissipations nonnegative, and
the telescoping estimate sum_{n>k} D_n / h <= P_k - P_last for every k
(up to the potential-quantization slack of half an integer quantum per
changed cell).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import grid as _g
from ._io import write_csv, write_pbm
from .stepper import StepConfig, step

__all__ = [
    "FlowTrace",
    "SequenceLemmaReport",
    "run",
    "fit_rate",
    "check_sequence_lemma",
    "stationarity",
    "barycenter_increments",
    "write_trace_csv",
    "read_trace_csv",
    "write_metadata",
]

_LOG_FLOOR = 1e-14


@dataclass(frozen=True)
class FlowTrace:
    """Per-step diagnostics of one run plus its metadata.

    Arrays are indexed by step number minus one (row 0 describes the set
    after the first step); the starting set contributes only the scalars
    `initial_perimeter` and `initial_volume`. Barycenter coordinates are
    circular means and read NaN when undefined (stripes that wrap the
    torus have no preferred center). `alpha` and `hausdorff` are filled
    only when the run tracked a reference set.
    """

    h: float
    grid: tuple[int, int]
    seed: Optional[int]
    initial_perimeter: float
    initial_volume: float
    perimeter: np.ndarray
    volume: np.ndarray
    dissipation: np.ndarray
    barycenter_x: np.ndarray
    barycenter_y: np.ndarray
    lambda_star: np.ndarray
    cells_changed: np.ndarray
    alpha: Optional[np.ndarray] = None
    hausdorff: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.perimeter.size)

    def check_invariants(self) -> None:
        """Raise AssertionError if the trace violates a run invariant."""
        n = len(self)
        assert n > 0, "empty trace"
        p = np.concatenate(([self.initial_perimeter], self.perimeter))
        assert np.all(np.diff(p) <= 0.0), "perimeter increased"
        assert np.all(self.volume == self.initial_volume), "volume drifted"
        assert np.all(self.dissipation >= 0.0), "negative dissipation"
        nx, ny = self.grid
        # Half an integer quantum per changed cell covers the rounding of
        # the quantized potential; see the stepper's weight scale.
        per_cell = 0.5 / (_g.WEIGHT_SCALE * nx * ny)
        tail_d = np.cumsum(self.dissipation[::-1])[::-1] / self.h
        tail_slack = np.cumsum(self.cells_changed[::-1])[::-1] * per_cell
        gap = p[:-1] - p[-1]
        assert np.all(tail_d <= gap + tail_slack + 1e-9), "telescoping broke"


@dataclass(frozen=True)
class SequenceLemmaReport:
    """Outcome of the summable-sequence decay check.

    `hypothesis_ok` is False when the tail-domination hypothesis itself
    fails, which is a distinct outcome from a bound violation; in either
    failure `first_violation` holds the smallest offending index. The
    report is truthy iff both the hypothesis and the bound hold.
    """

    hypothesis_ok: bool
    bound_ok: bool
    first_violation: Optional[int]

    def __bool__(self) -> bool:
        return self.hypothesis_ok and self.bound_ok


def _barycenter_or_nan(s: _g.TorusSet) -> tuple[float, float]:
    # Proper sets only here, so the sole failure mode is a degenerate
    # circular mean, reported per coordinate as NaN.
    return _g._barycenter_coords(s)


def run(
    e0: _g.TorusSet,
    cfg: StepConfig,
    n_steps: int,
    reference: Optional[_g.TorusSet] = None,
    *,
    seed: Optional[int] = None,
    out_dir: Optional[str | Path] = None,
    snapshot_every: int = 0,
) -> tuple[FlowTrace, _g.TorusSet]:
    """Apply `step` up to `n_steps` times, recording one trace row each.

    Stops early once three consecutive steps change zero cells. When
    `reference` is given, each row also records the translation-minimal
    symmetric-difference area and the interface Hausdorff distance to it.
    `seed` is carried as provenance of e0 only; the run itself is
    deterministic. With `out_dir` set, the trace, a key=value metadata
    file, and PBM snapshots (initial, final, and every `snapshot_every`
    steps when positive) are written there.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if snapshot_every < 0:
        raise ValueError("snapshot_every must be nonnegative")
    if reference is not None and reference.grid != e0.grid:
        raise ValueError("reference lives on a different grid")
    g = e0.grid
    p0 = _g.perimeter(e0)
    v0 = _g.volume(e0)

    out_path: Optional[Path] = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        write_pbm(out_path / "step_000000.pbm", e0)

    cols: dict[str, list] = {k: [] for k in (
        "perimeter", "volume", "dissipation", "barycenter_x",
        "barycenter_y", "lambda_star", "cells_changed", "alpha",
        "hausdorff")}
    cur = e0
    step_cfg = cfg
    zero_streak = 0
    for n in range(1, n_steps + 1):
        nxt, rep = step(cur, step_cfg)
        if cfg.lambda_bracket is None:
            # Warm-start the next multiplier search; the step widens the
            # bracket on its own whenever the flow drifts out of it.
            step_cfg = dataclasses.replace(
                cfg, lambda_bracket=(rep.lambda_star - 2.0,
                                     rep.lambda_star + 2.0))
        changed = int(np.count_nonzero(nxt.occupancy != cur.occupancy))
        bx, by = _barycenter_or_nan(nxt)
        cols["perimeter"].append(_g.perimeter(nxt))
        cols["volume"].append(_g.volume(nxt))
        cols["dissipation"].append(_g.dissipation(nxt, cur))
        cols["barycenter_x"].append(bx)
        cols["barycenter_y"].append(by)
        cols["lambda_star"].append(rep.lambda_star)
        cols["cells_changed"].append(changed)
        if reference is not None:
            cols["alpha"].append(_g.alpha_distance(nxt, reference)[0])
            cols["hausdorff"].append(_g.hausdorff_boundary(nxt, reference))
        if out_path is not None and snapshot_every > 0 \
                and n % snapshot_every == 0:
            write_pbm(out_path / f"step_{n:06d}.pbm", nxt)
        cur = nxt
        zero_streak = zero_streak + 1 if changed == 0 else 0
        if zero_streak >= 3:
            break

    trace = FlowTrace(
        h=cfg.h,
        grid=(g.nx, g.ny),
        seed=seed,
        initial_perimeter=p0,
        initial_volume=v0,
        perimeter=np.asarray(cols["perimeter"], dtype=np.float64),
        volume=np.asarray(cols["volume"], dtype=np.float64),
        dissipation=np.asarray(cols["dissipation"], dtype=np.float64),
        barycenter_x=np.asarray(cols["barycenter_x"], dtype=np.float64),
        barycenter_y=np.asarray(cols["barycenter_y"], dtype=np.float64),
        lambda_star=np.asarray(cols["lambda_star"], dtype=np.float64),
        cells_changed=np.asarray(cols["cells_changed"], dtype=np.int64),
        alpha=(np.asarray(cols["alpha"], dtype=np.float64)
               if reference is not None else None),
        hausdorff=(np.asarray(cols["hausdorff"], dtype=np.float64)
                   if reference is not None else None),
    )
    trace.check_invariants()
    if out_path is not None:
        final_n = len(trace)
        if snapshot_every == 0 or final_n % snapshot_every != 0:
            write_pbm(out_path / f"step_{final_n:06d}.pbm", cur)
        write_trace_csv(out_path / "trace.csv", trace)
        write_metadata(out_path / "metadata.txt", trace)
    return trace, cur


def fit_rate(series: Sequence[float] | np.ndarray,
             tail_fraction: float = 0.5) -> tuple[float, float]:
    """Exponential rate of a decaying series by least squares on logs.

    Fits log(a_n) ~ intercept + n * slope over the last `tail_fraction`
    of the samples, ignoring entries at or below the 1e-14 floor (the
    bound being checked is asymptotic, so the pre-asymptotic head is
    excluded by construction). Returns (b, r2) with b = exp(slope).
    A perfect constant tail has no variance to explain; it reports
    (1.0, 1.0). Raises ValueError when fewer than 4 points remain.
    """
    a = np.asarray(series, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError("series must be one dimensional")
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError("tail_fraction must lie in (0, 1]")
    start = a.size - int(math.ceil(tail_fraction * a.size))
    idx = np.arange(a.size)[start:]
    vals = a[start:]
    keep = vals > _LOG_FLOOR
    idx, vals = idx[keep], vals[keep]
    if idx.size < 4:
        raise ValueError("fewer than 4 usable points above the floor")
    x = idx.astype(np.float64)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2


def check_sequence_lemma(a: Sequence[float] | np.ndarray, c: float,
                         l: int) -> SequenceLemmaReport:
    """Check geometric decay of a summable nonnegative sequence.

    Hypothesis: every tail is dominated by c times the l-term window at
    its head, sum_{n>=k} a_n <= c * sum_{j=k}^{k+l-1} a_j (windows are
    truncated at the end of the input, where the hypothesis is automatic).
    Under it, the decaying bound a_k <= (1 - 1/(c+1))^{k/l} * sum(a) is
    checked for every k. A hypothesis failure is reported as its own
    outcome, not as a bound violation.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("sequence must be one dimensional")
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0):
        raise ValueError("sequence must be finite and nonnegative")
    if not (c > 1.0):
        raise ValueError("c must exceed 1")
    if l < 1:
        raise ValueError("l must be a positive count")
    if arr.size == 0:
        return SequenceLemmaReport(True, True, None)
    tails = np.cumsum(arr[::-1])[::-1]
    total = float(tails[0])
    for k in range(arr.size):
        window = float(arr[k:k + l].sum())
        if tails[k] > c * window:
            return SequenceLemmaReport(False, False, k)
    decay = 1.0 - 1.0 / (c + 1.0)
    for k in range(arr.size):
        if arr[k] > decay ** (k / l) * total:
            return SequenceLemmaReport(True, False, k)
    return SequenceLemmaReport(True, True, None)


def stationarity(trace: FlowTrace) -> bool:
    """True iff the last three recorded steps changed zero cells."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    tail = trace.cells_changed[-3:]
    return tail.size == 3 and bool(np.all(tail == 0))


def barycenter_increments(trace: FlowTrace) -> np.ndarray:
    """Periodic barycenter displacement per step, length len(trace).

    Entry n is the torus distance between the barycenters after steps n
    and n+1 (entry 0 is NaN: the starting barycenter is not stored, and
    wrapping sets have none). NaN coordinates propagate.
    """
    bx, by = trace.barycenter_x, trace.barycenter_y
    out = np.full(len(trace), np.nan)
    if len(trace) < 2:
        return out
    dx = np.abs(np.diff(bx))
    dy = np.abs(np.diff(by))
    dx = np.minimum(dx, 1.0 - dx)
    dy = np.minimum(dy, 1.0 - dy)
    out[1:] = np.hypot(dx, dy)
    return out


_TRACE_COLUMNS = ("step", "perimeter", "volume", "dissipation",
                  "barycenter_x", "barycenter_y", "lambda_star",
                  "cells_changed", "alpha", "hausdorff")


def write_trace_csv(path: str | Path, trace: FlowTrace) -> None:
    """One row per step; alpha/hausdorff columns are blank when the run
    tracked no reference set."""
    n = len(trace)
    alpha = trace.alpha if trace.alpha is not None else [""] * n
    haus = trace.hausdorff if trace.hausdorff is not None else [""] * n
    rows = []
    for i in range(n):
        rows.append((i + 1, float(trace.perimeter[i]),
                     float(trace.volume[i]), float(trace.dissipation[i]),
                     float(trace.barycenter_x[i]),
                     float(trace.barycenter_y[i]),
                     float(trace.lambda_star[i]),
                     int(trace.cells_changed[i]),
                     alpha[i] if isinstance(alpha[i], str)
                     else float(alpha[i]),
                     haus[i] if isinstance(haus[i], str)
                     else float(haus[i])))
    write_csv(path, _TRACE_COLUMNS, rows)


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV as float arrays keyed by header name.

    Blank optional columns come back empty; `step` and `cells_changed`
    parse as floats too (exact for the magnitudes a trace can hold).
    """
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise ValueError("trace CSV has no header row")
    header = body[0].split(",")
    raw: dict[str, list[float]] = {name: [] for name in header}
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError("trace CSV row width does not match header")
        for name, cell in zip(header, parts):
            if cell != "":
                raw[name].append(float(cell))
    return {name: np.asarray(v, dtype=np.float64) for name, v in raw.items()}


def write_metadata(path: str | Path, trace: FlowTrace) -> None:
    """Run metadata as key=value lines readable by the config parser."""
    nx, ny = trace.grid
    lines = [
        f"h={trace.h:.17g}",
        f"nx={nx}",
        f"ny={ny}",
        f"steps={len(trace)}",
        f"initial_perimeter={trace.initial_perimeter:.17g}",
        f"initial_volume={trace.initial_volume:.17g}",
        f"stationary={stationarity(trace)}",
    ]
    if trace.seed is not None:
        lines.insert(3, f"seed={trace.seed}")
    Path(path).write_text("\n".join(lines) + "\n")
