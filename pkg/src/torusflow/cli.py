"""Command-line front end.

Subcommands:
  run             evolve a set under the discrete flow; writes trace.csv,
                  metadata.txt, and PBM snapshots to the output directory
  classify        read a PBM snapshot and report its limit morphology
  alexandrov      random-deformation stability sweep with per-sample checks
  counterexample  build the dyadic-ball set, take one step, report how far
                  the flow lands from the lamella it resembles
  rate            fit an exponential rate to one column of a trace CSV

run, alexandrov, and counterexample read a flat key=value configuration
file (--config FILE) merged with KEY=VALUE arguments; later settings win
and unknown keys are rejected by name. classify and rate take a file
path plus the same KEY=VALUE overrides for their few knobs. Runs are
deterministic: the same configuration and seed produce byte-identical
output files.

Exit codes: 0 success, 2 bad configuration or unreadable input,
3 numerical failure, 4 unclassified snapshot, 5 failed stability
assertions (the offending seeds are listed).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import classify as _classify
from . import curves as _curves
from . import flow as _flow
from . import grid as _g
from . import shapes as _shapes
from ._io import load_config, read_pbm, write_pbm
from .stepper import StepConfig, step

__all__ = ["main"]


class _CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


RUN_DEFAULTS = {
    "grid": "256",          # N or NXxNY
    "h": "0.005",
    "steps": "500",
    "seed": "0",
    "shape": "disc",        # disc | union_discs | lamella | complement_discs
    "center": "0.5,0.5",    # disc
    "radius": "0.25",       # disc
    "centers": "",          # union/complement: x,y;x,y;...
    "radii": "",            # union/complement: r;r;...
    "slope": "0,1",         # lamella
    "offset": "0.0",        # lamella
    "width": "0.3",         # lamella
    "perturb_delta": "0.0",  # 0 disables the initial perturbation
    "perturb_flips": "",    # empty draws the count from the feasible range
    "reference": "none",    # none | initial (track alpha/Hausdorff to it)
    "out": "",              # output directory, required
    "snapshot_every": "0",
}

ALEX_DEFAULTS = {
    "shape": "disc",        # disc | lamella
    "center": "0.5,0.5",
    "radius": "0.25",
    "slope": "0,1",
    "offset": "0.0",
    "width": "0.3",
    "delta": "0.05",        # C1 band of the sweep
    "samples": "200",
    "nodes": "256",
    "seed": "0",
    "out": "",              # output directory, required
}

COUNTEREXAMPLE_DEFAULTS = {
    "n": "5",               # dyadic depth: 4^n balls in cubes of side 2^-n
    "s": "2",               # lamella width 2^-s
    "rule": "0.1",          # ball radius = rule * 2^-n
    "grid": "512",
    "h": "0.005",
    "out": "",              # output directory, required
}

CLASSIFY_DEFAULTS = {
    "p_inf": "",            # empty measures the snapshot's own perimeter
    "m": "",                # empty measures the snapshot's own volume
    "iso_threshold": str(_classify.ISO_THRESHOLD),
    "slope_tol": "",        # empty uses two cell widths
}

RATE_DEFAULTS = {
    "column": "dissipation",
    "tail": "0.5",
}


def _merge_config(defaults: dict[str, str], config_path: Optional[str],
                  overrides: Sequence[str]) -> dict[str, str]:
    cfg = dict(defaults)
    items: list[tuple[str, str]] = []
    if config_path is not None:
        try:
            items.extend(load_config(config_path).items())
        except OSError as exc:
            raise _CliError(f"cannot read config: {exc}", 2)
        except ValueError as exc:
            raise _CliError(str(exc), 2)
    for raw in overrides:
        if "=" not in raw:
            raise _CliError(f"override {raw!r}: expected KEY=VALUE", 2)
        key, _, value = raw.partition("=")
        items.append((key.strip(), value.strip()))
    for key, value in items:
        if key not in defaults:
            raise _CliError(
                f"unknown configuration key {key!r} (known: "
                f"{', '.join(sorted(defaults))})", 2)
        cfg[key] = value
    return cfg


def _want_float(cfg: dict[str, str], key: str) -> float:
    try:
        return float(cfg[key])
    except ValueError:
        raise _CliError(f"{key}={cfg[key]!r}: not a number", 2)


def _want_int(cfg: dict[str, str], key: str) -> int:
    try:
        return int(cfg[key])
    except ValueError:
        raise _CliError(f"{key}={cfg[key]!r}: not an integer", 2)


def _want_grid(cfg: dict[str, str]) -> _g.PeriodicGrid:
    text = cfg["grid"]
    try:
        if "x" in text:
            xs, ys = text.split("x")
            nx, ny = int(xs), int(ys)
        else:
            nx = ny = int(text)
        return _g.PeriodicGrid(nx, ny)
    except ValueError as exc:
        raise _CliError(f"grid={text!r}: {exc}", 2)


def _want_pair(cfg: dict[str, str], key: str) -> tuple[float, float]:
    parts = cfg[key].split(",")
    if len(parts) != 2:
        raise _CliError(f"{key}={cfg[key]!r}: expected X,Y", 2)
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise _CliError(f"{key}={cfg[key]!r}: not numeric", 2)


def _want_slope(cfg: dict[str, str]) -> tuple[int, int]:
    parts = cfg["slope"].split(",")
    if len(parts) != 2:
        raise _CliError(f"slope={cfg['slope']!r}: expected P,Q", 2)
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise _CliError(f"slope={cfg['slope']!r}: not integers", 2)


def _want_disc_list(cfg: dict[str, str]) -> tuple[list, list]:
    if not cfg["centers"] or not cfg["radii"]:
        raise _CliError("union/complement shapes need centers=x,y;x,y and "
                        "radii=r;r", 2)
    try:
        centers = []
        for item in cfg["centers"].split(";"):
            x, y = item.split(",")
            centers.append((float(x), float(y)))
        radii = [float(r) for r in cfg["radii"].split(";")]
    except ValueError:
        raise _CliError("centers/radii: expected centers=x,y;x,y and "
                        "radii=r;r", 2)
    if len(centers) != len(radii):
        raise _CliError(f"{len(centers)} centers but {len(radii)} radii", 2)
    return centers, radii


def _shape_from(cfg: dict[str, str], g: _g.PeriodicGrid) -> _shapes.ShapeSpec:
    kind = cfg["shape"]
    try:
        if kind == "disc":
            return _shapes.ShapeSpec.disc(g, _want_pair(cfg, "center"),
                                          _want_float(cfg, "radius"))
        if kind == "union_discs":
            centers, radii = _want_disc_list(cfg)
            return _shapes.ShapeSpec.union_discs(g, centers, radii)
        if kind == "complement_discs":
            centers, radii = _want_disc_list(cfg)
            return _shapes.ShapeSpec.complement(
                _shapes.ShapeSpec.union_discs(g, centers, radii))
        if kind == "lamella":
            return _shapes.ShapeSpec.lamella(g, _want_slope(cfg),
                                             _want_float(cfg, "offset"),
                                             _want_float(cfg, "width"))
    except ValueError as exc:
        raise _CliError(f"shape: {exc}", 2)
    raise _CliError(f"shape={kind!r}: expected disc, union_discs, "
                    f"complement_discs, or lamella", 2)


def _want_out(cfg: dict[str, str]) -> Path:
    if not cfg["out"]:
        raise _CliError("out= is required (output directory)", 2)
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _merge_config(RUN_DEFAULTS, args.config, args.overrides)
    g = _want_grid(cfg)
    spec = _shape_from(cfg, g)
    h = _want_float(cfg, "h")
    steps = _want_int(cfg, "steps")
    seed = _want_int(cfg, "seed")
    delta = _want_float(cfg, "perturb_delta")
    out = _want_out(cfg)
    if cfg["reference"] not in ("none", "initial"):
        raise _CliError(f"reference={cfg['reference']!r}: expected none "
                        f"or initial", 2)
    try:
        e0 = _shapes.rasterize(spec)
        reference = e0 if cfg["reference"] == "initial" else None
        if delta > 0.0:
            flips = (_want_int(cfg, "perturb_flips")
                     if cfg["perturb_flips"] else None)
            e0 = _shapes.perturb(e0, delta, seed, flips)
    except ValueError as exc:
        raise _CliError(f"initial set: {exc}", 2)
    try:
        trace, final = _flow.run(
            e0, StepConfig(h=h), steps, reference, seed=seed, out_dir=out,
            snapshot_every=_want_int(cfg, "snapshot_every"))
    except (ValueError, ArithmeticError, AssertionError) as exc:
        raise _CliError(f"run failed: {exc}", 3)
    print(f"run: {len(trace)} steps on {g.nx}x{g.ny}, perimeter "
          f"{trace.initial_perimeter:.6f} -> {trace.perimeter[-1]:.6f}, "
          f"volume {trace.volume[-1]:.6f}, "
          f"stationary={_flow.stationarity(trace)}")
    print(f"wrote {out / 'trace.csv'}, {out / 'metadata.txt'}, "
          f"step_*.pbm snapshots")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _merge_config(CLASSIFY_DEFAULTS, args.config, args.overrides)
    try:
        s = read_pbm(args.snapshot)
    except (OSError, ValueError) as exc:
        raise _CliError(f"cannot read snapshot: {exc}", 2)
    p_inf = (_want_float(cfg, "p_inf") if cfg["p_inf"]
             else _g.perimeter(s))
    m = _want_float(cfg, "m") if cfg["m"] else _g.volume(s)
    tol = _want_float(cfg, "slope_tol") if cfg["slope_tol"] else None
    try:
        res = _classify.classify(s, p_inf, m,
                                 iso_threshold=_want_float(
                                     cfg, "iso_threshold"),
                                 slope_tol=tol)
    except ValueError as exc:
        raise _CliError(f"classify failed: {exc}", 3)
    print(_classify.LimitClass.summary_header())
    print(res.summary_line())
    return 0 if res else 4


def _alex_base(cfg: dict[str, str]) -> _curves.StableCurveSet:
    kind = cfg["shape"]
    try:
        if kind == "disc":
            return _curves.StableCurveSet.disc(_want_pair(cfg, "center"),
                                               _want_float(cfg, "radius"))
        if kind == "lamella":
            return _curves.StableCurveSet.lamella(
                _want_slope(cfg), _want_float(cfg, "offset"),
                _want_float(cfg, "width"))
    except ValueError as exc:
        raise _CliError(f"shape: {exc}", 2)
    raise _CliError(f"shape={kind!r}: the sweep covers disc or lamella", 2)


def _translation_probe(base: _curves.StableCurveSet, delta: float,
                       m: int) -> np.ndarray:
    """A pure translation of the base set, the textbook inadmissible
    direction: it must be rejected, not measured."""
    a = 0.5 * delta
    pos = np.arange(m) / m
    if base.kind == "disc":
        return a * np.cos(2.0 * math.pi * pos)
    # Opposite constants shift both interfaces the same way in space
    # (outward normals of the two components point opposite ways).
    return np.stack([np.full(m, a), np.full(m, -a)])


def cmd_alexandrov(args: argparse.Namespace) -> int:
    cfg = _merge_config(ALEX_DEFAULTS, args.config, args.overrides)
    base = _alex_base(cfg)
    delta = _want_float(cfg, "delta")
    samples = _want_int(cfg, "samples")
    nodes = _want_int(cfg, "nodes")
    seed = _want_int(cfg, "seed")
    out = _want_out(cfg)
    try:
        rows = _curves.alexandrov_harness(base, samples, seed, delta,
                                          nodes,
                                          csv_path=out / "alexandrov.csv")
        m0 = _curves.coercivity_constant(base)
        target = _curves.linearized_alexandrov(base)
        failing: list[int] = []
        worst = 0.0
        for row in rows:
            ok = bool(row["mean_ok"] and row["translation_ok"]
                      and row["c1_ok"])
            ok = ok and row["ratio"] <= 4.0 * target
            # Rebuild the sample from its seed to check coercivity; the
            # check is scale invariant, so the tiny norm shave from the
            # regeneration does not matter.
            d = _curves.random_deformation(base, int(row["seed"]),
                                           row["c1_norm"], nodes)
            sv = _curves.second_variation(base, d.f)
            h1 = _curves.h1_norm(base, d.f)
            ok = ok and sv >= (m0 / 8.0) * h1 * h1
            worst = max(worst, row["ratio"])
            if not ok:
                failing.append(int(row["seed"]))
        probe = _translation_probe(base, delta, nodes)
        probe_rejected = not _curves.admissibility(
            _curves.NormalDeformation(base, probe), delta)
        if not probe_rejected:
            failing.append(-1)  # sentinel: the probe itself failed
    except ValueError as exc:
        raise _CliError(f"sweep failed: {exc}", 3)
    print(f"alexandrov: {len(rows)} samples, max ratio {worst:.6f} "
          f"(linearized {target:.6f}, bound {4.0 * target:.6f}), "
          f"coercivity m0={m0:.6f}")
    print(f"inadmissible translation probes rejected: "
          f"{1 if probe_rejected else 0} of 1")
    print(f"wrote {out / 'alexandrov.csv'}")
    if failing:
        print(f"failing seeds: {', '.join(str(s) for s in failing)}",
              file=sys.stderr)
        return 5
    return 0


def cmd_counterexample(args: argparse.Namespace) -> int:
    cfg = _merge_config(COUNTEREXAMPLE_DEFAULTS, args.config,
                        args.overrides)
    g = _want_grid(cfg)
    n = _want_int(cfg, "n")
    s = _want_int(cfg, "s")
    rule = _want_float(cfg, "rule")
    h = _want_float(cfg, "h")
    out = _want_out(cfg)
    try:
        e0 = _shapes.counterexample_set(g, n, s, rule)
        lam = _shapes.rasterize(
            _shapes.ShapeSpec.lamella(g, (0, 1), 0.0, 2.0 ** (-s)))
        balls = _shapes.counterexample_ball_cells(g, n, rule)
    except ValueError as exc:
        raise _CliError(f"construction: {exc}", 2)
    cell = 1.0 / (g.nx * g.ny)
    p_lam = _g.perimeter(lam)
    d0 = int(np.count_nonzero(e0.occupancy != lam.occupancy))
    write_pbm(out / "before.pbm", e0)
    try:
        e1, _rep = step(e0, StepConfig(h=h))
    except (ValueError, ArithmeticError) as exc:
        raise _CliError(f"step failed: {exc}", 3)
    d1 = int(np.count_nonzero(e1.occupancy != lam.occupancy))
    write_pbm(out / "after.pbm", e1)
    print(f"counterexample: n={n} s={s} rule={rule} grid={g.nx}x{g.ny} "
          f"h={h}")
    print(f"ball volume total: {balls} cells ({balls * cell:.6g})")
    print(f"before: |E - lamella| = {d0} cells ({d0 * cell:.6g}), "
          f"P(E) - P(lamella) = {_g.perimeter(e0) - p_lam:.6f}")
    print(f"after:  |F - lamella| = {d1} cells ({d1 * cell:.6g}), "
          f"P(F) - P(lamella) = {_g.perimeter(e1) - p_lam:.6f}")
    print(f"wrote {out / 'before.pbm'}, {out / 'after.pbm'}")
    return 0


def cmd_rate(args: argparse.Namespace) -> int:
    cfg = _merge_config(RATE_DEFAULTS, args.config, args.overrides)
    try:
        table = _flow.read_trace_csv(args.trace)
    except (OSError, ValueError) as exc:
        raise _CliError(f"cannot read trace: {exc}", 2)
    col = cfg["column"]
    if col not in table:
        raise _CliError(f"column={col!r}: trace has "
                        f"{', '.join(sorted(table))}", 2)
    try:
        b, r2 = _flow.fit_rate(table[col], _want_float(cfg, "tail"))
    except ValueError as exc:
        raise _CliError(f"fit failed: {exc}", 3)
    print(f"rate: column={col} b={b:.6f} r2={r2:.6f} "
          f"({len(table[col])} rows, tail={cfg['tail']})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusflow",
        description="Discrete volume-preserving curvature flow on the "
                    "flat torus: runs, morphology classification, and "
                    "stability checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="FILE", default=None,
                       help="flat key=value configuration file")
        p.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="configuration overrides, later wins")

    p = sub.add_parser("run", help="evolve a set under the discrete flow")
    add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("classify", help="report a snapshot's morphology")
    p.add_argument("snapshot", help="PBM snapshot to classify")
    add_config_args(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("alexandrov",
                       help="random-deformation stability sweep")
    add_config_args(p)
    p.set_defaults(func=cmd_alexandrov)

    p = sub.add_parser("counterexample",
                       help="dyadic-ball set: one step and the distance "
                            "to the matching lamella")
    add_config_args(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("rate", help="fit an exponential rate to a trace "
                                    "column")
    p.add_argument("trace", help="trace CSV written by run")
    add_config_args(p)
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"torusflow {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
