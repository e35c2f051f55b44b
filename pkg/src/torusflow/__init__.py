"""Volume-preserving discrete curvature flow on the flat 2-torus.

Each step perimeter-minimizes at fixed volume against the signed
distance of the previous set, exactly in integer arithmetic, so volume
is conserved and perimeter never increases. The package also carries
the spectral calculus for smooth normal deformations of the stable
limit shapes (discs and lamellae), the morphology classifier for long
time limits, and the dyadic-ball construction showing that one step can
land far from the lamella it resembles.

Submodules: grid (sets, perimeter, distances), stepper (one flow step),
flow (runs and traces), shapes (rasterization and the counterexample),
curves (deformation calculus), classify (limit morphology), cli.
"""

from . import classify, curves, flow, grid, shapes, stepper
from .classify import LimitClass, classify as classify_limit, wraps
from .curves import (
    NormalDeformation,
    StableCurveSet,
    alexandrov_harness,
    alexandrov_ratio,
    coercivity_constant,
    dissipation_analytic,
    first_variation,
    linearized_alexandrov,
    random_deformation,
    rasterize_deformation,
    second_variation,
)
from .flow import FlowTrace, fit_rate, run, stationarity
from .grid import PeriodicGrid, ScalarField, TorusSet
from .shapes import (
    ShapeSpec,
    counterexample_ball_cells,
    counterexample_set,
    lamella_slopes,
    perturb,
    rasterize,
    volume_match,
)
from .stepper import StepConfig, StepReport, euler_lagrange_residual, \
    prescribed_cut, step

__version__ = "0.1.0"

__all__ = [
    "grid", "stepper", "flow", "shapes", "curves", "classify",
    "PeriodicGrid", "TorusSet", "ScalarField",
    "StepConfig", "StepReport", "step", "prescribed_cut",
    "euler_lagrange_residual",
    "FlowTrace", "run", "fit_rate", "stationarity",
    "ShapeSpec", "rasterize", "perturb", "volume_match",
    "counterexample_set", "counterexample_ball_cells", "lamella_slopes",
    "StableCurveSet", "NormalDeformation", "first_variation",
    "second_variation", "alexandrov_ratio", "alexandrov_harness",
    "coercivity_constant", "linearized_alexandrov",
    "dissipation_analytic", "random_deformation",
    "rasterize_deformation",
    "LimitClass", "classify_limit", "wraps",
    "__version__",
]
