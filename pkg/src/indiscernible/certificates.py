"""Distinguishing measure families and the inversions that prove they distinguish.

Each certificate family comes with a map from moment vectors back to the
unique shape that produced them:

* ``interval-pair``: densities ``1 - x`` and ``x`` on intervals of ``(0, 1)``;
* ``cube-sequential``: ``d + 1`` product densities on cubes of ``(0, 1)^d``,
  inverted numerically;
* ``cuboid-cubic``: ``1, x_1..x_d, x_1^3..x_{d-1}^3``, inverted in closed form
  whenever no ``a_j + b_j`` vanishes;
* ``cuboid-quadratic`` / ``orbit-quadratic``: ``1, x_1..x_d, x_1^2..x_{d-1}^2``,
  inverted in closed form for boxes and for dilated-translated copies of a
  centrally symmetric body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .measures import (
    FULL,
    UNIT_CUBE,
    Domain,
    MeasureFamily,
    PolyDensity,
    body_volume,
    logit,
    measure_vector,
    moment_map,
    moment_map_jacobian,
    second_moment_ratio,
)
from .solver import levenberg

KINDS = ("interval-pair", "cube-sequential", "cuboid-cubic", "cuboid-quadratic", "orbit-quadratic")


class ReconstructionError(ValueError):
    """Moments that no shape of the family can produce, or a failed inversion."""


class InvalidVolume(ReconstructionError):
    pass


class InfeasibleMoments(ReconstructionError):
    pass


class ReconstructionFailed(ReconstructionError):
    def __init__(self, msg, best_residual=float("inf")):
        super().__init__(msg)
        self.best_residual = best_residual


@dataclass(frozen=True)
class CertificateKind:
    kind: str
    d: int
    body: str = "cube"
    domain: Domain | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind: unknown certificate {self.kind!r}")
        if int(self.d) < 1:
            raise ValueError("d: must be positive")
        if self.kind == "interval-pair" and self.d != 1:
            raise ValueError("d: interval-pair is defined for d = 1 only")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "body", geo.SymmetricBody(self.body, 1).kind)

    @property
    def shape_family(self) -> str:
        return {
            "interval-pair": "cuboid",
            "cube-sequential": "cube",
            "cuboid-cubic": "cuboid",
            "cuboid-quadratic": "cuboid",
            "orbit-quadratic": "orbit",
        }[self.kind]

    @property
    def size(self) -> int:
        return {"interval-pair": 2, "cube-sequential": self.d + 1}.get(self.kind, 2 * self.d)


@dataclass
class ReconstructionResult:
    shape: object  # Cuboid | Cube | AxisTransform | None when ambiguous
    residual: float
    status: str  # "exact" | "numeric" | "ambiguous"


@dataclass
class DiscernibilityReport:
    kind: str
    d: int
    seed: int
    pairs_tested: int
    min_gap: float
    min_gap_over_separation: float
    worst_pair: tuple
    body: str | None = None
    separations: np.ndarray = field(repr=False, default=None)
    gaps: np.ndarray = field(repr=False, default=None)


@dataclass
class RankReport:
    singular_values: np.ndarray
    full_rank: bool
    analytic_mismatch: float


# -- families -----------------------------------------------------------------------


def _x(d, i, p=1):
    return PolyDensity.coordinate(d, i, p)


def family_densities(kind: CertificateKind) -> MeasureFamily:
    """The distinguishing densities of ``kind``, in their canonical order."""
    d = kind.d
    one = PolyDensity.constant(d)
    if kind.kind == "interval-pair":
        return MeasureFamily((one - _x(1, 0), _x(1, 0)), kind.domain or UNIT_CUBE)
    if kind.kind == "cube-sequential":
        dens = []
        tail = one
        for i in reversed(range(d)):
            dens.append((one - _x(d, i)) * tail)
            tail = _x(d, i) * tail
        dens.append(tail)
        return MeasureFamily(tuple(reversed(dens)), kind.domain or UNIT_CUBE)
    power = 3 if kind.kind == "cuboid-cubic" else 2
    dens = [one] + [_x(d, i) for i in range(d)] + [_x(d, i, power) for i in range(d - 1)]
    default = UNIT_CUBE if kind.kind == "cuboid-cubic" else FULL
    return MeasureFamily(tuple(dens), kind.domain or default)


# -- closed-form inversions ---------------------------------------------------------------


def _check_length(m, n):
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.size != n:
        raise ValueError(f"moments: expected {n} values, got {m.size}")
    if not m[0] > 0:
        raise InvalidVolume(f"total mass {m[0]!r} must be positive")
    return m


def _residual(fam, shape, m) -> float:
    return float(np.max(np.abs(measure_vector(fam, shape) - m)))


def reconstruct_cuboid_quadratic(m, d: int) -> ReconstructionResult:
    """Invert the moments of ``1, x_j, x_j^2 (j < d)`` over a box.

    Centers are the normalized first moments; widths ``j < d`` follow from the
    variances ``w_j^2 / 12``; the last width comes from the volume.
    """
    m = _check_length(m, 2 * d)
    vol = m[0]
    mid = m[1 : d + 1] / vol
    var = m[d + 1 :] / vol - mid[: d - 1] ** 2
    if np.any(var <= 0):
        j = int(np.argmax(var <= 0))
        raise InfeasibleMoments(f"variance along axis {j + 1} is {var[j]!r}; no box has these moments")
    widths = np.empty(d)
    widths[: d - 1] = np.sqrt(12.0 * var)
    widths[d - 1] = vol / np.prod(widths[: d - 1])
    box = geo.Cuboid(mid - widths / 2, mid + widths / 2)
    fam = family_densities(CertificateKind("cuboid-quadratic", d))
    return ReconstructionResult(box, _residual(fam, box, m), "exact")


def reconstruct_orbit_quadratic(m, d: int, body: str) -> ReconstructionResult:
    """Recover ``L`` from the quadratic-family moments of ``L(K)``.

    Same steps as for boxes with the body's normalized second moment in
    place of ``1/12`` and the body volume in the determinant equation.
    """
    m = _check_length(m, 2 * d)
    kind = geo.SymmetricBody(body, d).kind
    kappa = second_moment_ratio(kind, d)
    mass = m[0]
    shift = m[1 : d + 1] / mass
    var = m[d + 1 :] / mass - shift[: d - 1] ** 2
    if np.any(var <= 0):
        j = int(np.argmax(var <= 0))
        raise InfeasibleMoments(f"variance along axis {j + 1} is {var[j]!r}")
    scale = np.empty(d)
    scale[: d - 1] = np.sqrt(var / kappa)
    scale[d - 1] = mass / (body_volume(kind, d) * np.prod(scale[: d - 1]))
    t = geo.AxisTransform(scale, shift)
    fam = family_densities(CertificateKind("orbit-quadratic", d, kind))
    res = _residual(fam, geo.OrbitShape(geo.SymmetricBody(kind, d), t), m)
    return ReconstructionResult(t, res, "exact")


def reconstruct_cuboid_cubic(m, d: int, domain: Domain = UNIT_CUBE, rtol: float = 1e-9) -> ReconstructionResult:
    """Invert the moments of ``1, x_j, x_j^3 (j < d)`` over a box.

    With ``s_j = a_j + b_j`` from the first moments, the cubic moments give
    ``q_j = a_j^2 + b_j^2 = 4 m_{d+j} / (m_0 s_j)`` and hence the width
    ``sqrt(2 q_j - s_j^2)``.  When some ``s_j`` vanishes the cubic moment
    carries no information about that width and the result is ``ambiguous``.

    For a ``pulled-back`` domain the inversion runs on the image box in the
    unit cube and is mapped back with the logit.
    """
    m = _check_length(m, 2 * d)
    vol = m[0]
    s = 2.0 * m[1 : d + 1] / vol
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.any(np.abs(s[: d - 1]) < rtol * scale):
        return ReconstructionResult(None, float("inf"), "ambiguous")
    q = 4.0 * m[d + 1 :] / (vol * s[: d - 1])
    disc = 2.0 * q - s[: d - 1] ** 2
    if np.any(disc <= 0):
        j = int(np.argmax(disc <= 0))
        raise InfeasibleMoments(f"negative discriminant {disc[j]!r} on axis {j + 1}")
    widths = np.empty(d)
    widths[: d - 1] = np.sqrt(disc)
    widths[d - 1] = vol / np.prod(widths[: d - 1])
    mid = s / 2
    lo, hi = mid - widths / 2, mid + widths / 2
    if domain.kind == "pulled-back":
        if np.any(lo <= 0) or np.any(hi >= 1):
            raise InfeasibleMoments("image box leaves the open unit cube")
        lo, hi = logit(lo, domain.steepness), logit(hi, domain.steepness)
    box = geo.Cuboid(lo, hi)
    fam = family_densities(CertificateKind("cuboid-cubic", d, domain=domain))
    if domain.kind == "unit-cube" and (np.any(lo < 0) or np.any(hi > 1)):
        fam = MeasureFamily(fam.densities, FULL)
    return ReconstructionResult(box, _residual(fam, box, m), "exact")


# -- numeric cube inversion -------------------------------------------------------------


@dataclass(frozen=True)
class ReconstructConfig:
    seed: int = 0
    n_starts: int = 32
    tol: float = 1e-10
    max_iterations: int = 200


def reconstruct_cube_numeric(m, d: int, config: ReconstructConfig = ReconstructConfig()) -> ReconstructionResult:
    """Recover a cube in ``(0, 1)^d`` from its ``cube-sequential`` moments.

    Damped Gauss-Newton in (anchor, log edge) coordinates from seeded random
    cubes inside the unit cube; the first start that lands on a cube inside
    the unit cube with residual below ``config.tol`` is returned.
    """
    m = _check_length(m, d + 1)
    kind = CertificateKind("cube-sequential", d)
    fam = MeasureFamily(family_densities(kind).densities, FULL)
    weight = 1.0 / float(np.max(np.abs(m)))

    def fun(th):
        return (moment_map(fam, "cube", th) - m) * weight

    def jac(th):
        return moment_map_jacobian(fam, "cube", th) * weight

    rng = np.random.default_rng(config.seed)
    best = (None, float("inf"))
    for _ in range(config.n_starts):
        edge = rng.uniform(0.05, 0.95)
        anchor = rng.uniform(0.0, 1.0 - edge, size=d)
        x0 = np.append(anchor, math.log(edge))
        sol = levenberg(fun, jac, x0, tol=1e-16, max_iter=config.max_iterations)
        cube = geo.Cube(sol.x[:d], math.exp(sol.x[d]))
        res = float(np.max(np.abs(moment_map(fam, "cube", sol.x) - m)))
        inside = np.all(cube.anchor >= 0) and np.all(cube.anchor + cube.edge <= 1)
        if inside and res < config.tol:
            return ReconstructionResult(cube, res, "numeric")
        if res < best[1]:
            best = (cube, res)
    raise ReconstructionFailed(
        f"no start converged below {config.tol:g} (best residual {best[1]:.3g})", best[1]
    )


def reconstruct(kind: CertificateKind, m, config: ReconstructConfig = ReconstructConfig()) -> ReconstructionResult:
    """Dispatch to the inversion that belongs to ``kind``."""
    if kind.kind == "cuboid-quadratic":
        return reconstruct_cuboid_quadratic(m, kind.d)
    if kind.kind == "orbit-quadratic":
        return reconstruct_orbit_quadratic(m, kind.d, kind.body)
    if kind.kind == "cuboid-cubic":
        return reconstruct_cuboid_cubic(m, kind.d, kind.domain or UNIT_CUBE)
    if kind.kind == "interval-pair":
        return reconstruct_interval_pair(m)
    return reconstruct_cube_numeric(m, kind.d, config)


def reconstruct_interval_pair(m) -> ReconstructionResult:
    """Interval ``[a, b]`` from its ``1 - x`` and ``x`` masses.

    The sum of both masses is the length; the ``x`` mass fixes the midpoint.
    """
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.size != 2:
        raise ValueError(f"moments: expected 2 values, got {m.size}")
    length = m[0] + m[1]
    if not length > 0:
        raise InvalidVolume(f"length {length!r} must be positive")
    mid = m[1] / length
    box = geo.Cuboid([mid - length / 2], [mid + length / 2])
    fam = MeasureFamily(family_densities(CertificateKind("interval-pair", 1)).densities, FULL)
    return ReconstructionResult(box, _residual(fam, box, m), "exact")


# -- moment lemma -------------------------------------------------------------------


class LemmaPreconditionError(ValueError):
    pass


class NoIncreasingSolution(ValueError):
    pass


def _centered_coeffs(alpha: PolyDensity, r: float) -> np.ndarray:
    """Power-basis coefficients of ``y -> alpha(r + y)``."""
    if alpha.dimension != 1:
        raise LemmaPreconditionError("alpha must be a one-dimensional density")
    exps, coeffs = alpha.arrays
    deg = int(exps.max()) if len(coeffs) else 0
    poly = np.polynomial.Polynomial(np.zeros(deg + 1))
    shift = np.polynomial.Polynomial([r, 1.0])
    for (k,), c in zip(exps, coeffs):
        poly = poly + c * shift**k
    return np.pad(poly.coef, (0, max(0, deg + 1 - poly.coef.size)))


def solve_lemma_moment(alpha: PolyDensity, support, m1: float, m2: float, tol: float = 1e-12):
    """The unique increasing ``u(x) = a x + b`` with ``int u alpha = m1`` and
    ``int u^2 alpha = m2``, where ``alpha`` lives on the interval ``support``.

    ``alpha`` must be nonnegative on the support, even about its center and
    of positive total mass.  Returns ``(a, b)``.
    """
    lo, hi = (float(v) for v in support)
    if not lo < hi:
        raise LemmaPreconditionError("support must be a nondegenerate interval")
    r = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    coef = _centered_coeffs(alpha, r)
    poly = np.polynomial.Polynomial(coef)
    # size of the rounding noise in alpha's values on the support, which is
    # what recentring leaves behind in coefficients that should vanish
    exps, coeffs = alpha.arrays
    reach = max(abs(lo), abs(hi), 1.0)
    size = float(np.sum(np.abs(coeffs) * reach ** exps[:, 0])) if len(coeffs) else 0.0
    odd = coef[1::2]
    if odd.size and np.max(np.abs(odd)) > tol * max(size, 1.0):
        raise LemmaPreconditionError("alpha is not even about the center of its support")
    # a vanishing leading coefficient would send the companion matrix to inf
    crit_poly = poly.deriv().trim(np.finfo(float).eps * max(size, 1.0))
    crit = [x.real for x in crit_poly.roots() if abs(x.imag) < 1e-12 and -h <= x.real <= h]
    lowest = min(float(poly(x)) for x in [-h, h, *crit])
    if lowest < -tol * max(size, 1.0):
        raise LemmaPreconditionError(f"alpha is negative on its support (minimum {lowest:.3g})")
    integral = poly.integ()
    mass = float(integral(h) - integral(-h))
    second = (poly * np.polynomial.Polynomial([0, 0, 1])).integ()
    spread = float(second(h) - second(-h))
    if not mass > 0:
        raise LemmaPreconditionError("alpha must have positive total mass")
    b_c = m1 / mass
    rest = m2 - b_c * b_c * mass
    if not rest > 0:
        raise NoIncreasingSolution(f"second moment {m2!r} leaves no room for a positive slope")
    a = math.sqrt(rest / spread)
    return a, b_c - a * r


# -- audits ---------------------------------------------------------------------------


def _sample_shapes(kind: CertificateKind, rng: np.random.Generator, n: int) -> np.ndarray:
    """Search coordinates of ``n`` random shapes in the family's domain."""
    d = kind.d
    fam = kind.shape_family
    dom = (kind.domain or family_densities(kind).domain).kind
    if fam == "cube":
        edge = rng.uniform(0.0, 1.0, size=(n, 1))
        anchor = rng.uniform(0.0, 1.0, size=(n, d)) * (1.0 - edge)
        return np.concatenate([anchor, np.log(edge)], axis=1)
    if fam == "orbit":
        return np.concatenate(
            [rng.uniform(-2.0, 2.0, size=(n, d)), rng.uniform(-1.0, 1.0, size=(n, d))], axis=1
        )
    span = (0.0, 1.0) if dom == "unit-cube" else (-10.0, 10.0)
    ends = np.sort(rng.uniform(*span, size=(n, d, 2)), axis=-1)
    lo, hi = ends[..., 0], ends[..., 1]
    return np.concatenate([(lo + hi) / 2, np.log(hi - lo)], axis=1)


def verify_injectivity_sampling(kind: CertificateKind, n_pairs: int, seed: int, min_separation: float = 1e-3) -> DiscernibilityReport:
    """Moment gaps over random pairs of distinct shapes.

    All shapes are drawn from one generator seeded by ``seed`` in pair order,
    so the report does not depend on how the evaluation is scheduled.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    fam = MeasureFamily(family_densities(kind).densities, FULL)
    if kind.domain is not None and kind.domain.kind == "pulled-back":
        fam = family_densities(kind)
    rng = np.random.default_rng(seed)
    a = _sample_shapes(kind, rng, n_pairs)
    b = _sample_shapes(kind, rng, n_pairs)
    sep = np.linalg.norm(a - b, axis=1)
    while np.any(sep < min_separation):
        redo = sep < min_separation
        b[redo] = _sample_shapes(kind, rng, int(redo.sum()))
        sep = np.linalg.norm(a - b, axis=1)
    body = kind.body if kind.shape_family == "orbit" else None
    gaps = np.max(np.abs(moment_map(fam, kind.shape_family, a, body) - moment_map(fam, kind.shape_family, b, body)), axis=1)
    worst = int(np.argmin(gaps))
    to_shape = lambda c: geo.to_shape(geo.ShapeParams(kind.shape_family, c, body))  # noqa: E731
    return DiscernibilityReport(
        kind=kind.kind,
        d=kind.d,
        seed=seed,
        body=body,
        pairs_tested=n_pairs,
        min_gap=float(gaps[worst]),
        min_gap_over_separation=float(np.min(gaps / sep)),
        worst_pair=(to_shape(a[worst]), to_shape(b[worst])),
        separations=sep,
        gaps=gaps,
    )


def jacobian_rank(kind, shape, family: str | None = None, threshold: float = 1e-8) -> RankReport:
    """Singular values of the row-normalized moment-map Jacobian at ``shape``.

    ``kind`` is a ``CertificateKind`` or an arbitrary ``MeasureFamily`` (then
    ``family`` names the shape family).  The Jacobian is taken by central
    differences in search coordinates and compared with the analytic one.
    Fewer measures than coordinates can never give full rank; the missing
    singular values are reported as zeros.
    """
    if isinstance(kind, CertificateKind):
        fam = family_densities(kind)
        family = kind.shape_family
        body = kind.body if family == "orbit" else None
    else:
        fam = kind
        body = None
        if family is None:
            raise ValueError("family: required when passing a bare measure family")
    params = geo.to_params(shape, family)
    if family == "orbit" and body is None:
        body = params.body
    x = params.coords
    if fam.domain.kind == "unit-cube":
        box = geo.to_cuboid(shape) if family != "orbit" else geo.to_shape(params).bounding_box()
        if np.any(box.lo <= 0) or np.any(box.hi >= 1):
            raise ValueError("shape: must lie in the open unit cube")
        fam = MeasureFamily(fam.densities, FULL)
    p = x.size
    J = np.empty((fam.size, p))
    for j in range(p):
        h = 1e-6 * max(1.0, abs(x[j]))
        e = np.zeros(p)
        e[j] = h
        J[:, j] = (moment_map(fam, family, x + e, body) - moment_map(fam, family, x - e, body)) / (2 * h)
    analytic = moment_map_jacobian(fam, family, x, body)
    mismatch = float(np.max(np.abs(J - analytic)) / max(1.0, float(np.max(np.abs(analytic)))))
    norms = np.linalg.norm(J, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    sv = np.linalg.svd(J / norms, compute_uv=False)
    sv = np.concatenate([sv, np.zeros(p - sv.size)])
    return RankReport(sv, bool(sv[-1] > threshold), mismatch)


# -- JSON ------------------------------------------------------------------------------


def report_to_json(r: DiscernibilityReport) -> dict:
    out = {
        "kind": r.kind,
        "d": r.d,
        "pairs": r.pairs_tested,
        "min_gap": r.min_gap,
        "min_ratio": r.min_gap_over_separation,
        "worst_pair": [geo.shape_to_json(s) for s in r.worst_pair],
        "seed": r.seed,
    }
    if r.body is not None:
        out["body"] = r.body
    return out


def reconstruction_to_json(r: ReconstructionResult, kind: CertificateKind) -> dict:
    if r.shape is None:
        shape = None
    elif isinstance(r.shape, geo.AxisTransform):
        shape = geo.shape_to_json(geo.OrbitShape(geo.SymmetricBody(kind.body, kind.d), r.shape))
    else:
        shape = geo.shape_to_json(r.shape)
    return {
        "kind": kind.kind,
        "d": kind.d,
        "status": r.status,
        "shape": shape,
        "residual": r.residual if math.isfinite(r.residual) else None,
    }
