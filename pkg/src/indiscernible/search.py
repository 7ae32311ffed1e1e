"""Numerical witnesses of measure indiscernibility.

For ``n`` shapes with search coordinates ``theta_1, ..., theta_n`` the test
map is

    F(theta)_(i, j) = mu_i(theta_{j+1}) - mu_i(theta_1)

and its zeros off the diagonal are exactly the indiscernible tuples.  Zeros
are located by seeded multistart Levenberg iterations; runs that collapse
onto the diagonal are discarded.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .measures import (
    MeasureFamily,
    _box_from_coords,
    family_from_json,
    family_to_json,
    logistic,
    moment_map,
    moment_map_jacobian,
)
from .oracle import body_integral, box_integral
from .solver import levenberg

log = logging.getLogger(__name__)


class UnsupportedCountWarning(UserWarning):
    """More measures than the existence theorems cover for this shape family."""


@dataclass(frozen=True)
class SearchProblem:
    family: str
    measures: MeasureFamily
    n_shapes: int = 2
    body: str | None = None
    require_disjoint: bool = False
    equal_size: bool = False

    def __post_init__(self):
        if self.family not in geo.FAMILIES:
            raise ValueError(f"family: unknown value {self.family!r}")
        if self.family == "orbit":
            if self.body is None:
                raise ValueError("body: required for the orbit family")
            object.__setattr__(self, "body", geo.SymmetricBody(self.body, 1).kind)
        if int(self.n_shapes) < 2:
            raise ValueError("n_shapes: must be at least 2")
        object.__setattr__(self, "n_shapes", int(self.n_shapes))

    @property
    def d(self) -> int:
        return self.measures.dimension

    @property
    def k(self) -> int:
        return self.measures.size

    @property
    def shape_params(self) -> int:
        return geo.param_count(self.family, self.d)

    @property
    def critical_count(self) -> int:
        """Largest measure count for which a witness is guaranteed to exist."""
        if self.equal_size and self.require_disjoint:
            return self.d - 1
        return self.shape_params - 1

    @property
    def existence_guaranteed(self) -> bool:
        return self.k <= self.critical_count


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    max_restarts: int = 200
    tol_residual: float = 1e-10
    min_separation: float = 1e-2
    start_mid: tuple[float, float] = (-2.0, 2.0)
    start_logw: tuple[float, float] = (-1.0, 1.0)
    max_iterations: int = 500
    overlap_weight: float = 1.0
    # a candidate must sit at a genuine zero: one more undamped Gauss-Newton
    # correction has to be this small relative to the pairwise separation
    newton_rtol: float = 1e-4

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.min_separation > 0):
            raise ValueError("tolerances must be positive")
        if self.max_restarts < 1 or self.max_iterations < 1:
            raise ValueError("max_restarts and max_iterations must be positive")

    def with_overrides(self, **kw) -> "SearchConfig":
        vals = {k: v for k, v in kw.items() if v is not None}
        return SearchConfig(**{**self.__dict__, **vals})


@dataclass
class SearchResult:
    shapes: list
    residual_inf: float
    min_pairwise_separation: float
    min_disjoint_margin: float | None
    restarts_used: int
    status: str  # "found" | "not-found"
    params: np.ndarray = field(repr=False, default=None)

    @property
    def found(self) -> bool:
        return self.status == "found"


def _restart_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), index]))


def _split(p: SearchProblem, theta: np.ndarray) -> np.ndarray:
    return np.asarray(theta, dtype=float).reshape(p.n_shapes, p.shape_params)


def _moments(p: SearchProblem, coords: np.ndarray) -> np.ndarray:
    return moment_map(p.measures, p.family, coords, p.body)


def residual_map(p: SearchProblem, params) -> np.ndarray:
    """Differences ``mu_i(C_{j+1}) - mu_i(C_1)``, flattened shape by shape.

    ``params`` is a sequence of ``ShapeParams`` or a flat coordinate vector.
    """
    if not isinstance(params, np.ndarray):
        params = np.concatenate([s.coords for s in params])
    M = _moments(p, _split(p, params))
    return (M[1:] - M[0]).reshape(-1)


def _residual_jacobian(p: SearchProblem, theta: np.ndarray) -> np.ndarray:
    coords = _split(p, theta)
    J = moment_map_jacobian(p.measures, p.family, coords, p.body)  # (n, k, q)
    n, k, q = J.shape
    out = np.zeros((k * (n - 1), n * q))
    for j in range(1, n):
        rows = slice(k * (j - 1), k * j)
        out[rows, j * q : (j + 1) * q] = J[j]
        out[rows, 0:q] = -J[0]
    return out


def _pairwise_separation(coords: np.ndarray) -> float:
    n = coords.shape[0]
    return min(float(np.linalg.norm(coords[a] - coords[b])) for a, b in itertools.combinations(range(n), 2))


def _boxes(p: SearchProblem, coords: np.ndarray):
    if p.family == "orbit" and p.body != "cube":
        t_lo = coords[:, : p.d] - np.exp(coords[:, p.d :])
        t_hi = coords[:, : p.d] + np.exp(coords[:, p.d :])
        return t_lo, t_hi
    return _box_from_coords(p.family, coords)


def _min_margin(p: SearchProblem, coords: np.ndarray) -> float | None:
    if p.family == "orbit" and p.body != "cube":
        return None
    lo, hi = _boxes(p, coords)
    n = coords.shape[0]
    return min(
        float(geo.box_margin(lo[a], hi[a], lo[b], hi[b])) for a, b in itertools.combinations(range(n), 2)
    )


def _result(p: SearchProblem, coords: np.ndarray, residual_inf: float, restarts: int, status: str) -> SearchResult:
    shapes = [geo.to_shape(geo.ShapeParams(p.family, c, p.body)) for c in coords]
    return SearchResult(
        shapes=shapes,
        residual_inf=float(residual_inf),
        min_pairwise_separation=_pairwise_separation(coords),
        min_disjoint_margin=_min_margin(p, coords),
        restarts_used=restarts,
        status=status,
        params=coords.copy(),
    )


def _random_coords(p: SearchProblem, c: SearchConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    d = p.d
    mids = rng.uniform(*c.start_mid, size=(n, d))
    if p.family == "cube":
        logs = rng.uniform(*c.start_logw, size=(n, 1))
    else:
        logs = rng.uniform(*c.start_logw, size=(n, d))
    return np.concatenate([mids, logs], axis=1)


def _newton_ratio(r: np.ndarray, J: np.ndarray, sep: float) -> float:
    """Length of the minimum-norm Gauss-Newton correction over the separation.

    Near a regular zero the correction is of the order of the remaining error;
    a tuple that merely hugs the diagonal (or has shrunk until its moments
    barely register) needs a correction comparable to its own separation.
    """
    step = np.linalg.lstsq(J, r, rcond=None)[0]
    return float(np.linalg.norm(step)) / sep


def _warn_if_unsupported(p: SearchProblem):
    if not p.existence_guaranteed:
        warnings.warn(
            f"{p.k} measures exceed the guaranteed count {p.critical_count} for this family; "
            "a witness may not exist",
            UnsupportedCountWarning,
            stacklevel=3,
        )


def find_indiscernible_tuple(p: SearchProblem, c: SearchConfig = SearchConfig()) -> SearchResult:
    """Search for ``n`` distinct shapes with identical moment vectors.

    Restart ``r`` draws its start from a generator seeded by ``(seed, r)``;
    the first restart that converges off the diagonal wins, so the result
    depends only on ``(p, c)``.  Exhausting the restarts yields
    ``status="not-found"`` with the best attempt attached.
    """
    if p.require_disjoint and p.equal_size and p.family == "cube":
        return find_disjoint_equal_cubes(p, c)
    _warn_if_unsupported(p)
    fun = lambda th: residual_map(p, th)  # noqa: E731
    jac = lambda th: _residual_jacobian(p, th)  # noqa: E731
    collapse = 0.1 * c.min_separation

    def abort(th, r):
        return _pairwise_separation(_split(p, th)) < collapse

    best = None
    for r in range(c.max_restarts):
        rng = _restart_rng(c.seed, r)
        x0 = _random_coords(p, c, rng, p.n_shapes).reshape(-1)
        sol = levenberg(fun, jac, x0, tol=c.tol_residual / 100, max_iter=c.max_iterations, abort=abort)
        coords = _split(p, sol.x)
        res = sol.residual_inf
        sep = _pairwise_separation(coords)
        ok = res < c.tol_residual and sep >= c.min_separation
        ok = ok and _newton_ratio(sol.residual, jac(sol.x), sep) < c.newton_rtol
        if ok and p.require_disjoint:
            margin = _min_margin(p, coords)
            ok = margin is not None and margin > 0
        if ok:
            log.debug("restart %d converged: residual %.3g separation %.3g", r, res, sep)
            return _result(p, coords, res, r + 1, "found")
        # keep the off-diagonal attempt with the smallest residual
        if sep >= c.min_separation and (best is None or res < best[1]):
            best = (coords, res)
    if best is None:
        coords = _split(p, x0)
        best = (coords, float(np.max(np.abs(fun(x0)))))
    return _result(p, best[0], best[1], c.max_restarts, "not-found")


def find_disjoint_equal_cubes(p: SearchProblem, c: SearchConfig = SearchConfig()) -> SearchResult:
    """Search for ``n`` pairwise disjoint cubes of one common size with equal moments.

    Unknowns are the ``n`` anchors and one shared log edge.  A hinge penalty
    on pairwise overlap joins the moment residual during the solve; a
    candidate is accepted only if the boxes are exactly disjoint and the
    penalty-free residual meets the tolerance.
    """
    if p.family != "cube":
        raise ValueError("family: disjoint equal-size search is defined for cubes")
    if p.d < 2:
        raise ValueError("measures: disjoint equal cubes need d >= 2")
    _warn_if_unsupported(p)
    n, d = p.n_shapes, p.d
    pairs = list(itertools.combinations(range(n), 2))
    gap_target = c.min_separation

    def expand(th):
        anchors = th[:-1].reshape(n, d)
        return np.concatenate([anchors, np.full((n, 1), th[-1])], axis=1)

    def moment_part(th):
        M = _moments(p, expand(th))
        return (M[1:] - M[0]).reshape(-1)

    def penalty(th):
        coords = expand(th)
        edge = np.exp(th[-1])
        out = np.empty(len(pairs))
        for idx, (a, b) in enumerate(pairs):
            gaps = np.abs(coords[a, :d] - coords[b, :d]) - edge
            out[idx] = c.overlap_weight * max(0.0, gap_target * edge - gaps.max())
        return out

    def fun(th):
        return np.concatenate([moment_part(th), penalty(th)])

    def jac(th):
        coords = expand(th)
        J = moment_map_jacobian(p.measures, "cube", coords)  # (n, k, d+1)
        k = p.k
        Jm = np.zeros((k * (n - 1), n * d + 1))
        for j in range(1, n):
            rows = slice(k * (j - 1), k * j)
            Jm[rows, j * d : (j + 1) * d] = J[j, :, :d]
            Jm[rows, 0:d] -= J[0, :, :d]
            Jm[rows, -1] = J[j, :, d] - J[0, :, d]
        Jp = np.zeros((len(pairs), n * d + 1))
        edge = np.exp(th[-1])
        for idx, (a, b) in enumerate(pairs):
            diff = coords[a, :d] - coords[b, :d]
            gaps = np.abs(diff) - edge
            ax = int(np.argmax(gaps))
            if gap_target * edge - gaps[ax] <= 0:
                continue
            sgn = np.sign(diff[ax]) or 1.0
            Jp[idx, a * d + ax] = -c.overlap_weight * sgn
            Jp[idx, b * d + ax] = c.overlap_weight * sgn
            Jp[idx, -1] = c.overlap_weight * (gap_target * edge + edge)
        return np.vstack([Jm, Jp])

    best = None
    for r in range(c.max_restarts):
        rng = _restart_rng(c.seed, r)
        anchors = rng.uniform(*c.start_mid, size=(n, d))
        x0 = np.append(anchors.reshape(-1), rng.uniform(*c.start_logw))
        sol = levenberg(fun, jac, x0, tol=c.tol_residual / 100, max_iter=c.max_iterations)
        coords = expand(sol.x)
        res = float(np.max(np.abs(moment_part(sol.x))))
        margin = _min_margin(p, coords)
        sep = _pairwise_separation(coords)
        if (
            res < c.tol_residual
            and margin > 0
            and sep >= c.min_separation
            and _newton_ratio(moment_part(sol.x), jac(sol.x)[: len(moment_part(sol.x))], sep) < c.newton_rtol
        ):
            return _result(p, coords, res, r + 1, "found")
        if margin > 0 and (best is None or res < best[1]):
            best = (coords, res)
    if best is None:
        best = (expand(x0), float(np.max(np.abs(moment_part(x0)))))
    return _result(p, best[0], best[1], c.max_restarts, "not-found")


@dataclass(frozen=True)
class WitnessCheck:
    verified: bool
    oracle_residual: float


def _oracle_moments(p: SearchProblem, shape) -> np.ndarray:
    fam = p.measures

    def f(x):
        return np.stack([g(x) for g in fam.densities], axis=-1)

    if isinstance(shape, geo.OrbitShape) and shape.body.kind != "cube":
        t = shape.transform
        return np.asarray(body_integral(f, shape.body.kind, t.scale, t.shift))
    box = geo.to_cuboid(shape)
    lo, hi = box.lo, box.hi
    if fam.domain.kind == "pulled-back":
        lo, hi = logistic(lo, fam.domain.steepness), logistic(hi, fam.domain.steepness)
    return np.asarray(box_integral(f, lo, hi, rtol=1e-14, atol=1e-16)[0])


def verify_witness(r: SearchResult, p: SearchProblem, c: SearchConfig = SearchConfig()) -> WitnessCheck:
    """Re-check a witness with quadrature moments instead of the closed forms."""
    if not r.shapes:
        return WitnessCheck(False, float("inf"))
    M = np.array([_oracle_moments(p, s) for s in r.shapes])
    oracle_res = float(np.max(np.abs(M[1:] - M[0]))) if len(M) > 1 else 0.0
    params = np.array([geo.to_params(s, p.family).coords for s in r.shapes])
    ok = r.status == "found" and len(r.shapes) == p.n_shapes
    ok = ok and oracle_res < 10 * c.tol_residual
    ok = ok and _pairwise_separation(params) >= c.min_separation
    if p.require_disjoint:
        margin = _min_margin(p, params)
        ok = ok and margin is not None and margin > 0
    if p.equal_size:
        sizes = params[:, -1] if p.family == "cube" else params[:, p.d :].sum(axis=1)
        ok = ok and bool(np.allclose(sizes, sizes[0], rtol=0, atol=1e-12))
    return WitnessCheck(bool(ok), oracle_res)


# -- JSON -------------------------------------------------------------------------


def problem_from_json(obj: dict) -> SearchProblem:
    if not isinstance(obj, dict):
        raise ValueError("problem: expected a JSON object")
    try:
        fam = family_from_json(obj["measures"])
    except KeyError:
        raise ValueError("problem: missing field 'measures'") from None
    cons = obj.get("constraints", {})
    return SearchProblem(
        family=obj.get("family", "cuboid"),
        measures=fam,
        n_shapes=obj.get("n_shapes", 2),
        body=obj.get("body"),
        require_disjoint=bool(cons.get("require_disjoint", False)),
        equal_size=bool(cons.get("equal_size", False)),
    )


def problem_to_json(p: SearchProblem) -> dict:
    out = {
        "family": p.family,
        "measures": family_to_json(p.measures),
        "n_shapes": p.n_shapes,
        "constraints": {"require_disjoint": p.require_disjoint, "equal_size": p.equal_size},
    }
    if p.body:
        out["body"] = p.body
    return out


_CONFIG_FIELDS = {f for f in SearchConfig.__dataclass_fields__}


def config_from_json(obj: dict | None) -> SearchConfig:
    obj = dict(obj or {})
    unknown = set(obj) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"config: unknown field {sorted(unknown)[0]!r}")
    for key in ("start_mid", "start_logw"):
        if key in obj:
            obj[key] = tuple(obj[key])
    return SearchConfig(**obj)


def config_to_json(c: SearchConfig) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in c.__dict__.items()}


def result_to_json(r: SearchResult, check: WitnessCheck | None = None) -> dict:
    out = {
        "status": r.status,
        "shapes": [geo.shape_to_json(s) for s in r.shapes],
        "residual_inf": r.residual_inf,
        "min_pairwise_separation": r.min_pairwise_separation,
        "min_disjoint_margin": r.min_disjoint_margin,
        "restarts_used": r.restarts_used,
    }
    if check is not None:
        out["verified"] = check.verified
        out["oracle_residual"] = check.oracle_residual
    return out
