"""Spectral calculus for normal deformations of discs and stripes in T^2.

A base shape has constant curvature along each boundary component (1/r
for a disc, 0 for a stripe), so a normal deformation x + f(s) nu(s) is
fully described by samples of f at uniform arclength nodes, one row per
boundary component. All derivatives and integrals are spectral: exact
for band-limited data, spectrally convergent for analytic data.

Frame convention: per component the tangent tau is chosen so that the
outward normal nu is tau rotated clockwise; with it the deformed curve
has velocity (1+kappa*f) tau + f' nu and signed curvature

    ((1 + kappa f)^2 kappa + 2 kappa f'^2 - (1 + kappa f) f'') / J^3,

positive for discs, reducing to -f'' on flat components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import grid as _g
from ._io import write_csv

__all__ = [
    "DEFAULT_DELTA",
    "StableCurveSet",
    "NormalDeformation",
    "AdmissibilityReport",
    "jacobian",
    "normal_of_deformation",
    "perimeter_of",
    "area_of",
    "curvature_of",
    "first_variation",
    "second_variation",
    "admissibility",
    "alexandrov_ratio",
    "coercivity_constant",
    "linearized_alexandrov",
    "dissipation_analytic",
    "random_deformation",
    "rasterize_deformation",
    "alexandrov_harness",
]

DEFAULT_DELTA = 0.05
_MIN_NODES = 64


@dataclass(frozen=True)
class StableCurveSet:
    """Disc or lamella described analytically (no grid attached).

    Lamella boundary components are ordered: component 0 lies on the
    offset line with outward normal -(p,q)/|(p,q)|, component 1 on the
    far side with outward normal +(p,q)/|(p,q)|. Per the module frame
    convention, arclength runs along (-q,p)/|(p,q)| on component 1 and
    opposite on component 0; samples are always indexed by arclength in
    the component's own tangent direction.
    """

    kind: str
    center: tuple[float, float] = (0.0, 0.0)
    r: float = 0.0
    slope: tuple[int, int] = (0, 1)
    offset: float = 0.0
    width: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == "disc":
            if not (0.0 < self.r < 0.5):
                raise ValueError("disc radius must lie in (0, 1/2)")
        elif self.kind == "lamella":
            p, q = self.slope
            if p < 0 or (p, q) == (0, 0) or math.gcd(p, abs(q)) != 1:
                raise ValueError(f"slope {self.slope} is not primitive")
            if not (0.0 < self.width < 1.0):
                raise ValueError("width must lie in (0, 1)")
        else:
            raise ValueError(f"unknown curve set kind {self.kind!r}")

    @classmethod
    def disc(cls, center: tuple[float, float], r: float) -> "StableCurveSet":
        return cls("disc", center=(float(center[0]), float(center[1])),
                   r=float(r))

    @classmethod
    def lamella(cls, slope: tuple[int, int], offset: float,
                width: float) -> "StableCurveSet":
        return cls("lamella", slope=(int(slope[0]), int(slope[1])),
                   offset=float(offset), width=float(width))

    @property
    def n_components(self) -> int:
        return 1 if self.kind == "disc" else 2

    @property
    def curvature(self) -> float:
        return 1.0 / self.r if self.kind == "disc" else 0.0

    @property
    def component_length(self) -> float:
        if self.kind == "disc":
            return 2.0 * math.pi * self.r
        p, q = self.slope
        return math.hypot(p, q)

    @property
    def boundary_length(self) -> float:
        return self.n_components * self.component_length

    @property
    def area(self) -> float:
        return math.pi * self.r ** 2 if self.kind == "disc" else self.width

    @property
    def max_deformation(self) -> float:
        """Sup bound on |f| keeping x + f nu an embedding: half the
        tubular-neighborhood radius of the boundary inside the torus.
        For the disc that is min(r, 1 - 2r)/2 (inward collision at the
        center, outward through the complement); for the lamella the
        physical separation of the two lines is width/|(p,q)| on the
        inside and (1 - width)/|(p,q)| across the complement."""
        if self.kind == "disc":
            return 0.5 * min(self.r, 1.0 - 2.0 * self.r)
        return 0.5 * min(self.width, 1.0 - self.width) / self.component_length


@dataclass(frozen=True)
class NormalDeformation:
    """Samples of the normal displacement, one row per component, at M
    uniform arclength nodes with M a power of two, at least 64."""

    base: StableCurveSet
    f: np.ndarray

    def __post_init__(self) -> None:
        f = np.array(self.f, dtype=np.float64)
        if f.ndim == 1:
            f = f[None, :]
        if f.shape[0] != self.base.n_components:
            raise ValueError(f"need one sample row per boundary component "
                             f"({self.base.n_components})")
        m = f.shape[1]
        if m < _MIN_NODES or m & (m - 1):
            raise ValueError("node count must be a power of two, >= 64")
        if not np.all(np.isfinite(f)):
            raise ValueError("samples must be finite")
        bound = self.base.max_deformation
        if np.abs(f).max() >= bound:
            raise ValueError(f"|f| must stay below {bound:.6g} for the "
                             "deformation to embed")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @property
    def m(self) -> int:
        return int(self.f.shape[1])


def _as_samples(base: StableCurveSet, phi: np.ndarray | Sequence,
                m: int) -> np.ndarray:
    arr = np.asarray(phi, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape != (base.n_components, m):
        raise ValueError(f"samples must have shape "
                         f"({base.n_components}, {m})")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    return arr


def _deriv(vals: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    """Spectral arclength derivative, rows independent. The Nyquist mode
    of odd orders is dropped, as usual for real data."""
    m = vals.shape[1]
    spec = np.fft.rfft(vals, axis=1)
    k = np.arange(m // 2 + 1)
    factor = (1j * 2.0 * np.pi / length * k) ** order
    if order % 2:
        factor[-1] = 0.0
    return np.fft.irfft(spec * factor[None, :], n=m, axis=1)


def _integrate(vals: np.ndarray, length: float) -> float:
    """Sum over components of the trapezoid rule, which is spectrally
    accurate on periodic data."""
    return float(vals.mean(axis=1).sum() * length)


def jacobian(d: NormalDeformation) -> np.ndarray:
    """|Phi'| at the nodes; bounded below by 1 - |kappa f| > 1/2."""
    k = d.base.curvature
    fp = _deriv(d.f, d.base.component_length)
    return np.sqrt((1.0 + k * d.f) ** 2 + fp ** 2)


def _frames(base: StableCurveSet, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(tau, nu) at nodes, shape (ncomp, m, 2)."""
    if base.kind == "disc":
        theta = 2.0 * np.pi * np.arange(m) / m
        tau = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)[None]
        nu = np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None]
        return tau, nu
    p, q = base.slope
    ell = base.component_length
    nhat = np.array([p / ell, q / ell])
    that = np.array([-q / ell, p / ell])
    nu = np.stack([-nhat, nhat])[:, None, :] * np.ones((1, m, 1))
    tau = np.stack([-that, that])[:, None, :] * np.ones((1, m, 1))
    # tau is the counterclockwise rotation of each outward nu
    return tau, nu


def normal_of_deformation(d: NormalDeformation) -> np.ndarray:
    """Outward unit normal of the deformed boundary at the image of each
    node, shape (ncomp, m, 2)."""
    k = d.base.curvature
    fp = _deriv(d.f, d.base.component_length)
    j = jacobian(d)
    tau, nu = _frames(d.base, d.m)
    vec = ((1.0 + k * d.f)[..., None] * nu - fp[..., None] * tau)
    return vec / j[..., None]


def perimeter_of(d: NormalDeformation) -> float:
    return _integrate(jacobian(d), d.base.component_length)


def area_of(d: NormalDeformation) -> float:
    """base area + integral of f + kappa f^2 / 2 along the boundary."""
    k = d.base.curvature
    return d.base.area + _integrate(d.f + 0.5 * k * d.f ** 2,
                                    d.base.component_length)


def curvature_of(d: NormalDeformation) -> np.ndarray:
    """Signed curvature of the deformed boundary w.r.t. its outward
    normal, at the image of each node."""
    k = d.base.curvature
    length = d.base.component_length
    fp = _deriv(d.f, length)
    fpp = _deriv(d.f, length, order=2)
    one = 1.0 + k * d.f
    j = np.sqrt(one ** 2 + fp ** 2)
    return (k * one ** 2 + 2.0 * k * fp ** 2 - one * fpp) / j ** 3


def first_variation(d: NormalDeformation, phi: np.ndarray) -> float:
    """d/de of perimeter_of(f + e phi) at e = 0."""
    ph = _as_samples(d.base, phi, d.m)
    k = d.base.curvature
    length = d.base.component_length
    fp = _deriv(d.f, length)
    php = _deriv(ph, length)
    j = jacobian(d)
    return _integrate(((1.0 + k * d.f) * k * ph + fp * php) / j, length)


def second_variation(e: StableCurveSet, phi: np.ndarray,
                     m: Optional[int] = None) -> float:
    """Quadratic form int phi'^2 - kappa^2 phi^2 over the undeformed
    boundary. Zero on disc translation modes cos/sin(theta)."""
    if m is None:
        m = np.asarray(phi).shape[-1]
    ph = _as_samples(e, phi, m)
    php = _deriv(ph, e.component_length)
    return _integrate(php ** 2 - e.curvature ** 2 * ph ** 2,
                      e.component_length)


def _l2_norm(base: StableCurveSet, vals: np.ndarray) -> float:
    return math.sqrt(_integrate(vals ** 2, base.component_length))


def h1_norm(base: StableCurveSet, vals: np.ndarray) -> float:
    vp = _deriv(vals, base.component_length)
    return math.sqrt(_integrate(vals ** 2 + vp ** 2, base.component_length))


def c1_norm(base: StableCurveSet, vals: np.ndarray) -> float:
    vp = _deriv(vals, base.component_length)
    return float(max(np.abs(vals).max(), np.abs(vp).max()))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Three smallness conditions with their measured left-hand sides:
    |int f| and |int f nu| against delta * ||f||_L2, and ||f||_C1
    against delta. Truthy iff all three hold."""

    mean_ok: bool
    translation_ok: bool
    c1_ok: bool
    mean_abs: float
    translation_abs: float
    c1: float

    def __bool__(self) -> bool:
        return self.mean_ok and self.translation_ok and self.c1_ok


def admissibility(d: NormalDeformation,
                  delta: float = DEFAULT_DELTA) -> AdmissibilityReport:
    base = d.base
    length = base.component_length
    mean_abs = abs(_integrate(d.f, length))
    _, nu = _frames(base, d.m)
    tx = _integrate(d.f * nu[..., 0], length)
    ty = _integrate(d.f * nu[..., 1], length)
    translation_abs = math.hypot(tx, ty)
    c1 = c1_norm(base, d.f)
    l2 = _l2_norm(base, d.f)
    return AdmissibilityReport(
        mean_ok=mean_abs <= delta * l2,
        translation_ok=translation_abs <= delta * l2,
        c1_ok=c1 <= delta,
        mean_abs=mean_abs,
        translation_abs=translation_abs,
        c1=c1,
    )


def alexandrov_ratio(d: NormalDeformation,
                     delta: float = DEFAULT_DELTA) -> float:
    """||f||_H1 / ||H - Hbar||_L2 with Hbar the deformed-boundary
    (Jacobian-weighted) mean curvature. Zero for f = 0; a vanishing
    denominator with f != 0 is rejected, as it would contradict the
    quantitative stability bound."""
    if not np.any(d.f):
        return 0.0
    rep = admissibility(d, delta)
    if not rep:
        raise ValueError(f"deformation not admissible at delta={delta}: "
                         f"{rep}")
    length = d.base.component_length
    j = jacobian(d)
    h = curvature_of(d)
    hbar = _integrate(h * j, length) / _integrate(j, length)
    dev = _l2_norm(d.base, h - hbar)
    if dev < 1e-14:
        raise ValueError("curvature deviation below 1e-14 for a nonzero "
                         "deformation")
    return h1_norm(d.base, d.f) / dev


def coercivity_constant(e: StableCurveSet, max_mode: int = 64) -> float:
    """Infimum of the second variation over the unit H1 sphere of the
    admissible directions (zero average, translations projected out),
    by Fourier diagonalization.

    Disc: modes k >= 2 give (k^2-1)/(r^2+k^2), smallest at k = 2.
    Lamella: cross-component constants are volume or translation modes,
    so the minimizer is the k = 1 oscillation on a single component,
    mu/(1+mu) with mu = (2 pi / ell)^2.
    """
    length = e.component_length
    if e.kind == "disc":
        r = e.r
        quotients = [(k * k - 1.0) / (r * r + k * k)
                     for k in range(2, max_mode + 1)]
    else:
        quotients = []
        for k in range(1, max_mode + 1):
            mu = (2.0 * math.pi * k / length) ** 2
            quotients.append(mu / (1.0 + mu))
    return min(quotients)


def linearized_alexandrov(e: StableCurveSet) -> float:
    """Alexandrov ratio ||f||_H1 / ||H - Hbar||_L2 of the lowest
    admissible Fourier mode, the worst case at linear order in f.

    Disc (k = 2): the curvature deviation of f = a cos(2 theta) is
    a (k^2 - 1)/r^2 cos(2 theta), giving r sqrt(r^2 + 4) / 3.
    Lamella (k = 1, one component): deviation is -f'', giving
    sqrt(1 + mu) / mu with mu = (2 pi / ell)^2.
    """
    if e.kind == "disc":
        r = e.r
        return r * math.sqrt(r * r + 4.0) / 3.0
    mu = (2.0 * math.pi / e.component_length) ** 2
    return math.sqrt(1.0 + mu) / mu


def dissipation_analytic(d1: NormalDeformation, d2: NormalDeformation,
                         delta: float = DEFAULT_DELTA) -> float:
    """Movement cost between two normal deformations of one base, in
    normal coordinates anchored at the first: the integrand at gap
    g = f2 - f1 is (1 + kappa f1) g^2/2 + kappa sign(g) |g|^3/3, the
    layer-cake integral of |t - f1| (1 + kappa t)."""
    if d1.base != d2.base:
        raise ValueError("deformations live on different bases")
    if d1.m != d2.m:
        raise ValueError("deformations use different node counts")
    base = d1.base
    for d in (d1, d2):
        c1 = c1_norm(base, d.f)
        if c1 > delta:
            raise ValueError(f"||f||_C1 = {c1:.4g} exceeds delta = {delta}")
    k = base.curvature
    gap = d2.f - d1.f
    integrand = (1.0 + k * d1.f) * gap ** 2 / 2.0 \
        + k * np.sign(gap) * np.abs(gap) ** 3 / 3.0
    return _integrate(integrand, base.component_length)


def random_deformation(base: StableCurveSet, seed: int, c1: float,
                       m: int = 256,
                       max_mode: Optional[int] = None) -> NormalDeformation:
    """Band-limited random deformation with ||f||_C1 = c1 exactly and
    the mean and translation conditions exactly zero (coefficients decay
    like 1/k^2; modes above m/8 are never populated, so quadratic
    quantities stay alias-free at the node count)."""
    if max_mode is None:
        max_mode = m // 8
    if not (1 <= max_mode <= m // 8):
        raise ValueError("max_mode must lie in [1, m/8]")
    rng = np.random.default_rng(seed)
    ncomp = base.n_components
    spec = np.zeros((ncomp, m // 2 + 1), dtype=np.complex128)
    ks = np.arange(1, max_mode + 1)
    vals = rng.normal(size=(ncomp, max_mode, 2))
    spec[:, 1:max_mode + 1] = (vals[..., 0] + 1j * vals[..., 1]) / ks ** 2
    if base.kind == "disc":
        spec[:, 1] = 0.0  # drop the translation modes cos/sin(theta)
    f = np.fft.irfft(spec, n=m, axis=1)
    norm = c1_norm(base, f)
    if norm == 0.0:
        raise ValueError("degenerate draw")
    # shaving a part in 1e13 keeps the realized norm at or below c1
    return NormalDeformation(base, f * (c1 / norm) * (1.0 - 1e-13))


def _interp_series(samples: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of one component's samples at
    fractional positions pos in [0, 1). Modes whose coefficient is
    negligible relative to the largest are skipped, so band-limited
    data costs only its populated modes."""
    m = samples.size
    spec = np.fft.rfft(samples) / m
    mags = np.abs(spec)
    live = np.nonzero(mags > mags.max() * 1e-16)[0] if mags.max() else []
    kmax = int(live[-1]) if len(live) else 0
    out = np.full(pos.shape, float(spec[0].real))
    if kmax == 0:
        return out
    w = np.exp(2j * np.pi * pos)
    z = np.ones_like(w)
    for k in range(1, kmax + 1):
        z = z * w
        scale = 2.0 if k < m // 2 else 1.0
        out += scale * (spec[k] * z).real
    return out


def rasterize_deformation(d: NormalDeformation,
                          grid: _g.PeriodicGrid) -> _g.TorusSet:
    """Cell occupied iff its center lies in the deformed set, using the
    exact normal-coordinate membership test (rays never cross within the
    embedding bound)."""
    base = d.base
    xs = grid.centers_x()
    ys = grid.centers_y()
    if base.kind == "disc":
        cx, cy = base.center
        dx = (xs - cx + 0.5) % 1.0 - 0.5
        dy = (ys - cy + 0.5) % 1.0 - 0.5
        rho = np.hypot(dx[None, :], dy[:, None])
        theta = np.arctan2(dy[:, None], dx[None, :])
        pos = (theta / (2.0 * np.pi)) % 1.0
        occ = rho <= base.r + _interp_series(d.f[0], pos)
        return _g.TorusSet(grid, occ)
    p, q = base.slope
    ell = base.component_length
    u = (p * xs[None, :] + q * ys[:, None] - base.offset) % 1.0
    margin = 0.5 * (1.0 - base.width)
    u = np.where(u < base.width + margin, u, u - 1.0)
    dist = u / ell  # signed physical offset from the component-0 line
    svals = ((-q) * xs[None, :] + p * ys[:, None]) / ell % ell
    pos = svals / ell
    # component 0 is parametrized in the opposite tangent direction
    lo = -_interp_series(d.f[0], (1.0 - pos) % 1.0)
    hi = base.width / ell + _interp_series(d.f[1], pos)
    return _g.TorusSet(grid, (dist >= lo) & (dist <= hi))


def alexandrov_harness(base: StableCurveSet, n_samples: int, seed: int,
                       delta: float = DEFAULT_DELTA, m: int = 256,
                       csv_path: Optional[str | Path] = None) -> list[dict]:
    """Random admissible sweep: per sample, the C1/H1 norms, curvature
    deviation, and stability ratio. Optionally written as CSV."""
    label = (f"disc(r={base.r:g})" if base.kind == "disc" else
             f"lamella({base.slope[0]},{base.slope[1]},w={base.width:g})")
    rows: list[dict] = []
    rng = np.random.default_rng(seed)
    for i in range(n_samples):
        sub = int(rng.integers(0, 2 ** 63 - 1))
        c1 = delta * float(rng.uniform(0.1, 1.0))
        d = random_deformation(base, sub, c1, m=m)
        rep = admissibility(d, delta)
        h = curvature_of(d)
        j = jacobian(d)
        hbar = (_integrate(h * j, base.component_length)
                / _integrate(j, base.component_length))
        dev = _l2_norm(base, h - hbar)
        rows.append({
            "shape": label,
            "seed": sub,
            "c1_norm": rep.c1,
            "h1_norm": h1_norm(base, d.f),
            "curvature_dev": dev,
            "ratio": alexandrov_ratio(d, delta),
            "mean_ok": rep.mean_ok,
            "translation_ok": rep.translation_ok,
            "c1_ok": rep.c1_ok,
        })
    if csv_path is not None:
        cols = list(rows[0].keys()) if rows else [
            "shape", "seed", "c1_norm", "h1_norm", "curvature_dev",
            "ratio", "mean_ok", "translation_ok", "c1_ok"]
        write_csv(csv_path, cols, [[r[c] for c in cols] for r in rows])
    return rows
