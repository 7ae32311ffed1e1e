"""Closed-form polynomial moments over boxes and symmetric-body orbits.

A measure is given by a polynomial density (a sum of signed monomial terms).
Its value on an axis-aligned box factors into one-dimensional integrals, and
its value on an orbit ``L(K)`` reduces, after the change of variables
``y = A x + b``, to a finite sum of monomial moments of the body ``K``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.special import comb, gammaln

from .geometry import (
    Cuboid,
    OrbitShape,
    ShapeError,
    ShapeParams,
    SymmetricBody,
    to_cuboid,
    to_shape,
)

MAX_EXPONENT = 8
# relative width below which hi^(k+1) - lo^(k+1) is evaluated in factored form
THIN_BOX_RTOL = 1e-6


class DomainError(ValueError):
    """A shape lies outside the domain on which a measure family is defined."""


@dataclass(frozen=True)
class MonomialTerm:
    coeff: float
    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(k) for k in self.exponents)
        if not exps:
            raise ValueError("monomial needs at least one exponent")
        if any(k < 0 for k in exps):
            raise ValueError(f"negative exponent in {exps}")
        if any(k > MAX_EXPONENT for k in exps):
            raise ValueError(f"exponent above cap {MAX_EXPONENT} in {exps}")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coeff", float(self.coeff))


@dataclass(frozen=True)
class PolyDensity:
    """Signed polynomial density on ``R^dimension``.

    Terms with equal exponents are merged and zero coefficients dropped, so
    two densities compare equal iff they are the same polynomial.
    """

    dimension: int
    terms: tuple[MonomialTerm, ...] = ()

    def __post_init__(self):
        d = int(self.dimension)
        if d < 1:
            raise ValueError("density dimension must be positive")
        merged: dict[tuple[int, ...], float] = {}
        for t in self.terms:
            if not isinstance(t, MonomialTerm):
                t = MonomialTerm(*t)
            if len(t.exponents) != d:
                raise ValueError(f"term exponents {t.exponents} do not match dimension {d}")
            merged[t.exponents] = merged.get(t.exponents, 0.0) + t.coeff
        terms = tuple(MonomialTerm(c, e) for e, c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "dimension", d)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def constant(cls, d: int, value: float = 1.0) -> "PolyDensity":
        return cls(d, (MonomialTerm(value, (0,) * d),))

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff: float = 1.0) -> "PolyDensity":
        return cls(len(exponents), (MonomialTerm(coeff, tuple(exponents)),))

    @classmethod
    def coordinate(cls, d: int, axis: int, power: int = 1) -> "PolyDensity":
        """The density ``x_axis ** power`` (axis is 0-based)."""
        exps = [0] * d
        exps[axis] = power
        return cls.monomial(exps)

    @property
    def degree(self) -> int:
        return max((sum(t.exponents) for t in self.terms), default=0)

    def __add__(self, other: "PolyDensity") -> "PolyDensity":
        if self.dimension != other.dimension:
            raise ValueError("dimension mismatch")
        return PolyDensity(self.dimension, self.terms + other.terms)

    def __neg__(self) -> "PolyDensity":
        return PolyDensity(self.dimension, tuple(MonomialTerm(-t.coeff, t.exponents) for t in self.terms))

    def __sub__(self, other: "PolyDensity") -> "PolyDensity":
        return self + (-other)

    def __mul__(self, other) -> "PolyDensity":
        if isinstance(other, (int, float)):
            return PolyDensity(
                self.dimension, tuple(MonomialTerm(other * t.coeff, t.exponents) for t in self.terms)
            )
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        terms = tuple(
            MonomialTerm(a.coeff * b.coeff, tuple(x + y for x, y in zip(a.exponents, b.exponents)))
            for a in self.terms
            for b in other.terms
        )
        return PolyDensity(self.dimension, terms)

    __rmul__ = __mul__

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for t in self.terms:
            out = out + t.coeff * np.prod(x ** np.array(t.exponents), axis=-1)
        return out

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(exponents (T, d) int array, coefficients (T,) array)."""
        if not self.terms:
            return np.zeros((0, self.dimension), dtype=int), np.zeros(0)
        return (
            np.array([t.exponents for t in self.terms], dtype=int),
            np.array([t.coeff for t in self.terms]),
        )

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            mono = "*".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(t.exponents) if k
            )
            parts.append(f"{t.coeff:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


@dataclass(frozen=True)
class Domain:
    """Where a family lives: ``full`` space, the open ``unit-cube``, or
    ``pulled-back`` to ``R^d`` from the unit cube by the coordinatewise
    logistic map with the given steepness."""

    kind: str = "full"
    steepness: float = 1.0

    def __post_init__(self):
        if self.kind not in ("full", "unit-cube", "pulled-back"):
            raise ValueError(f"unknown domain {self.kind!r}")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")


FULL = Domain("full")
UNIT_CUBE = Domain("unit-cube")


@dataclass(frozen=True)
class MeasureFamily:
    densities: tuple[PolyDensity, ...]
    domain: Domain = FULL

    def __post_init__(self):
        dens = tuple(self.densities)
        if not dens:
            raise ValueError("a measure family needs at least one density")
        dims = {f.dimension for f in dens}
        if len(dims) != 1:
            raise ValueError(f"densities disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "densities", dens)

    @property
    def dimension(self) -> int:
        return self.densities[0].dimension

    @property
    def size(self) -> int:
        return len(self.densities)

    def __len__(self):
        return len(self.densities)

    def prefix(self, k: int) -> "MeasureFamily":
        return MeasureFamily(self.densities[:k], self.domain)

    @cached_property
    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All terms of all densities: exponents (T, d), coeffs (T,), owner index (T,)."""
        exps, coeffs, owner = [], [], []
        for i, f in enumerate(self.densities):
            e, c = f.arrays
            exps.append(e)
            coeffs.append(c)
            owner.append(np.full(len(c), i))
        return np.concatenate(exps), np.concatenate(coeffs), np.concatenate(owner)


# -- boxes --------------------------------------------------------------------


def power_diff(lo, hi, k):
    """``(hi**(k+1) - lo**(k+1)) / (k+1)`` elementwise.

    When both endpoints share a sign the difference of powers cancels badly
    for intervals that are short relative to their distance from 0, so it
    is evaluated as ``(hi - lo) * sum hi^a lo^b`` whose terms all agree in
    sign.  Intervals straddling 0 use the direct formula, which is then
    well conditioned.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    k = np.asarray(k)
    direct = (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)
    thin = (lo * hi > 0) | (np.abs(hi - lo) < THIN_BOX_RTOL * np.maximum(np.abs(hi), np.abs(lo)))
    if not np.any(thin):
        return direct
    # (hi - lo) * sum_{a+b=k} hi^a lo^b / (k+1)
    kb = np.broadcast_to(k, direct.shape)
    acc = np.zeros(direct.shape)
    kmax = int(np.max(kb)) if kb.size else 0
    for a in range(kmax + 1):
        b = kb - a
        acc = acc + np.where(b >= 0, hi**a * lo ** np.maximum(b, 0), 0.0)
    factored = (hi - lo) * acc / (k + 1)
    return np.where(thin, factored, direct)


def monomial_box_moment(exponents: Sequence[int], c: Cuboid) -> float:
    """Exact integral of ``prod x_i ** k_i`` over the box ``c``."""
    k = np.asarray(exponents, dtype=int)
    if k.size != c.dim:
        raise ShapeError(f"exponents length {k.size} != box dimension {c.dim}")
    return float(np.prod(power_diff(c.lo, c.hi, k)))


def poly_box_moment(f: PolyDensity, c: Cuboid) -> float:
    if f.dimension != c.dim:
        raise ShapeError(f"density dimension {f.dimension} != box dimension {c.dim}")
    exps, coeffs = f.arrays
    if not len(coeffs):
        return 0.0
    return float(np.sum(coeffs * np.prod(power_diff(c.lo, c.hi, exps), axis=-1)))


def box_moments(fam: MeasureFamily, lo, hi) -> np.ndarray:
    """Moments of every density of ``fam`` over boxes ``[lo, hi]`` of shape (..., d).

    The family's domain is not applied; see :func:`moment_map` for that.
    """
    exps, coeffs, owner = fam.stacked
    lo = np.asarray(lo, dtype=float)[..., None, :]
    hi = np.asarray(hi, dtype=float)[..., None, :]
    per_term = coeffs * np.prod(power_diff(lo, hi, exps), axis=-1)  # (..., T)
    out = np.zeros(per_term.shape[:-1] + (fam.size,))
    for i in range(fam.size):
        out[..., i] = per_term[..., owner == i].sum(axis=-1)
    return out


def box_moment_gradients(fam: MeasureFamily, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`box_moments` with respect to ``lo`` and ``hi``.

    Returns two arrays of shape (..., k, d).
    """
    exps, coeffs, owner = fam.stacked
    lo = np.asarray(lo, dtype=float)[..., None, :]
    hi = np.asarray(hi, dtype=float)[..., None, :]
    factors = power_diff(lo, hi, exps)  # (..., T, d)
    d = factors.shape[-1]
    others = np.empty_like(factors)
    for i in range(d):
        others[..., i] = np.prod(np.delete(factors, i, axis=-1), axis=-1)
    dlo_t = -coeffs[:, None] * others * lo**exps
    dhi_t = coeffs[:, None] * others * hi**exps
    shape = dlo_t.shape[:-2] + (fam.size, d)
    dlo, dhi = np.zeros(shape), np.zeros(shape)
    for i in range(fam.size):
        sel = owner == i
        dlo[..., i, :] = dlo_t[..., sel, :].sum(axis=-2)
        dhi[..., i, :] = dhi_t[..., sel, :].sum(axis=-2)
    return dlo, dhi


# -- symmetric bodies ---------------------------------------------------------


def body_volume(kind: str, d: int) -> float:
    return body_monomial_moment(kind, (0,) * d)


def body_monomial_moment(kind: str, exponents: Sequence[int]) -> float:
    """Integral of ``prod x_i ** k_i`` over the unit ball, ``[-1, 1]^d`` or the
    cross-polytope ``sum |x_i| <= 1``."""
    k = [int(e) for e in exponents]
    kind = SymmetricBody(kind, len(k)).kind
    if any(e % 2 for e in k):
        return 0.0
    d, total = len(k), sum(k)
    if kind == "ball":
        logv = sum(gammaln((e + 1) / 2) for e in k) - gammaln((total + d) / 2 + 1)
        return float(math.exp(logv))
    if kind == "cube":
        return float(np.prod([2.0 / (e + 1) for e in k]))
    # Dirichlet integral over the simplex, times 2^d orthants
    logv = d * math.log(2) + sum(math.lgamma(e + 1) for e in k) - math.lgamma(total + d + 1)
    return float(math.exp(logv))


def monomial_ball_moment(exponents: Sequence[int]) -> float:
    return body_monomial_moment("ball", exponents)


def second_moment_ratio(kind: str, d: int) -> float:
    """``int_K x_1^2 / int_K 1``; the box analogue of the constant 1/12."""
    e = [0] * d
    e[0] = 2
    return body_monomial_moment(kind, e) / body_volume(kind, d)


@lru_cache(maxsize=256)
def _orbit_expansion(fam: MeasureFamily, kind: str):
    """Binomial expansion of every term under ``x -> C x + b``.

    Returns arrays (weights (E,), owner (E,), scale exponents (E, d), shift
    exponents (E, d)) such that the orbit moment of density i is
    ``det(C) * sum_{owner == i} w * prod C**j * prod b**r``.
    """
    w, own, jexp, rexp = [], [], [], []
    for i, f in enumerate(fam.densities):
        for t in f.terms:
            for j in itertools.product(*(range(k + 1) for k in t.exponents)):
                mk = body_monomial_moment(kind, j)
                if mk == 0.0:
                    continue
                binom = np.prod([comb(k, ji, exact=True) for k, ji in zip(t.exponents, j)])
                w.append(t.coeff * float(binom) * mk)
                own.append(i)
                jexp.append(j)
                rexp.append([k - ji for k, ji in zip(t.exponents, j)])
    d = fam.dimension
    return (
        np.array(w),
        np.array(own, dtype=int),
        np.array(jexp, dtype=int).reshape(-1, d),
        np.array(rexp, dtype=int).reshape(-1, d),
    )


def orbit_moments(fam: MeasureFamily, kind: str, scale, shift) -> np.ndarray:
    """Moments of ``fam`` over ``diag(scale) K + shift``; batched over leading axes."""
    w, own, jexp, rexp = _orbit_expansion(fam, kind)
    scale = np.asarray(scale, dtype=float)
    shift = np.asarray(shift, dtype=float)
    det = np.prod(scale, axis=-1)
    if len(w) == 0:
        return np.zeros(det.shape + (fam.size,))
    terms = w * np.prod(scale[..., None, :] ** jexp * shift[..., None, :] ** rexp, axis=-1)
    out = np.zeros(det.shape + (fam.size,))
    for i in range(fam.size):
        out[..., i] = terms[..., own == i].sum(axis=-1)
    return det[..., None] * out


def orbit_moment(f: PolyDensity, s: OrbitShape) -> float:
    """Exact integral of ``f`` over the orbit shape ``s = L(K)``."""
    if f.dimension != s.dim:
        raise ShapeError(f"density dimension {f.dimension} != shape dimension {s.dim}")
    fam = MeasureFamily((f,))
    t = s.transform
    return float(orbit_moments(fam, s.body.kind, t.scale, t.shift)[0])


# -- pullback -------------------------------------------------------------------


def logistic(x, steepness: float = 1.0):
    return 0.5 * (1.0 + np.tanh(0.5 * steepness * np.asarray(x, dtype=float)))


def logit(y, steepness: float = 1.0):
    y = np.asarray(y, dtype=float)
    return (np.log(y) - np.log1p(-y)) / steepness


def pulledback_box_measure(f: PolyDensity, c: Cuboid, steepness: float = 1.0) -> float:
    """Measure of ``c`` under the pullback of ``f dx`` on the unit cube.

    The coordinatewise logistic map sends boxes to boxes, so this is the
    unit-cube moment of the image box.
    """
    lo = logistic(c.lo, steepness)
    hi = logistic(c.hi, steepness)
    if f.dimension != c.dim:
        raise ShapeError(f"density dimension {f.dimension} != box dimension {c.dim}")
    exps, coeffs = f.arrays
    if not len(coeffs):
        return 0.0
    return float(np.sum(coeffs * np.prod(power_diff(lo, hi, exps), axis=-1)))


# -- family level ---------------------------------------------------------------


def _check_unit_cube(lo, hi):
    if np.any(lo < 0) or np.any(hi > 1):
        raise DomainError(f"box [{list(lo)}, {list(hi)}] leaves the unit cube")


def measure_vector(fam: MeasureFamily, shape) -> np.ndarray:
    """The moment vector ``(mu_1(A), ..., mu_k(A))`` of a shape under ``fam``."""
    if isinstance(shape, ShapeParams):
        shape = to_shape(shape)
    if shape.dim != fam.dimension:
        raise ShapeError(f"shape dimension {shape.dim} != family dimension {fam.dimension}")
    dom = fam.domain
    if isinstance(shape, OrbitShape) and shape.body.kind != "cube":
        if dom.kind == "pulled-back":
            raise DomainError("pulled-back families are defined on boxes only")
        if dom.kind == "unit-cube":
            bb = shape.bounding_box()
            _check_unit_cube(bb.lo, bb.hi)
        t = shape.transform
        return orbit_moments(fam, shape.body.kind, t.scale, t.shift)
    box = to_cuboid(shape)
    lo, hi = box.lo, box.hi
    if dom.kind == "unit-cube":
        _check_unit_cube(lo, hi)
    elif dom.kind == "pulled-back":
        lo, hi = logistic(lo, dom.steepness), logistic(hi, dom.steepness)
    return box_moments(fam, lo, hi)


def _box_from_coords(family: str, coords: np.ndarray):
    d = coords.shape[-1] // 2 if family != "cube" else coords.shape[-1] - 1
    if family == "cube":
        lo = coords[..., :d]
        edge = np.exp(coords[..., d:])
        return lo, lo + edge
    half = np.exp(coords[..., d:]) / (2 if family == "cuboid" else 1)
    mid = coords[..., :d]
    return mid - half, mid + half


def moment_map(fam: MeasureFamily, family: str, coords, body: str | None = None) -> np.ndarray:
    """Moment vectors of shapes given directly by search coordinates.

    ``coords`` has shape (..., p).  The unit-cube domain is not enforced here
    (densities are polynomials on all of ``R^d``), the pulled-back domain is.
    """
    coords = np.asarray(coords, dtype=float)
    if family == "orbit" and body != "cube":
        d = coords.shape[-1] // 2
        if fam.domain.kind == "pulled-back":
            raise DomainError("pulled-back families are defined on boxes only")
        return orbit_moments(fam, body, np.exp(coords[..., d:]), coords[..., :d])
    lo, hi = _box_from_coords(family, coords)
    if fam.domain.kind == "pulled-back":
        s = fam.domain.steepness
        lo, hi = logistic(lo, s), logistic(hi, s)
    return box_moments(fam, lo, hi)


def moment_map_jacobian(fam: MeasureFamily, family: str, coords, body: str | None = None) -> np.ndarray:
    """Jacobian (..., k, p) of :func:`moment_map` in search coordinates.

    Analytic for box-valued families; central differences for other orbits.
    """
    coords = np.asarray(coords, dtype=float)
    p = coords.shape[-1]
    if family == "orbit" and body != "cube":
        h = 1e-6 * np.maximum(1.0, np.abs(coords))
        cols = []
        for j in range(p):
            e = np.zeros(p)
            e[j] = 1.0
            step = h[..., j : j + 1] * e
            fp = moment_map(fam, family, coords + step, body)
            fm = moment_map(fam, family, coords - step, body)
            cols.append((fp - fm) / (2 * h[..., j : j + 1]))
        return np.stack(cols, axis=-1)
    lo, hi = _box_from_coords(family, coords)
    if fam.domain.kind == "pulled-back":
        s = fam.domain.steepness
        slo, shi = logistic(lo, s), logistic(hi, s)
        dlo, dhi = box_moment_gradients(fam, slo, shi)
        dlo = dlo * (s * slo * (1 - slo))[..., None, :]
        dhi = dhi * (s * shi * (1 - shi))[..., None, :]
    else:
        dlo, dhi = box_moment_gradients(fam, lo, hi)
    if family == "cube":
        d = p - 1
        edge = np.exp(coords[..., d])
        d_anchor = dlo + dhi
        d_log = (dhi.sum(axis=-1) * edge[..., None])[..., None]
        return np.concatenate([d_anchor, d_log], axis=-1)
    d = p // 2
    half = np.exp(coords[..., d:]) / (2 if family == "cuboid" else 1)
    d_mid = dlo + dhi
    d_log = (dhi - dlo) * half[..., None, :]
    return np.concatenate([d_mid, d_log], axis=-1)


def axis_marginal(f: PolyDensity, c: Cuboid, axis: int) -> PolyDensity:
    """Integrate out every coordinate except ``axis`` (0-based) over the box.

    The result is a one-dimensional density meant to be used on
    ``[c.lo[axis], c.hi[axis]]``.
    """
    if f.dimension != c.dim:
        raise ShapeError(f"density dimension {f.dimension} != box dimension {c.dim}")
    if not 0 <= axis < c.dim:
        raise ShapeError(f"axis {axis} out of range for dimension {c.dim}")
    exps, coeffs = f.arrays
    terms = []
    for e, cf in zip(exps, coeffs):
        rest = [j for j in range(c.dim) if j != axis]
        factor = float(np.prod(power_diff(c.lo[rest], c.hi[rest], e[rest]))) if rest else 1.0
        terms.append(MonomialTerm(cf * factor, (int(e[axis]),)))
    return PolyDensity(1, tuple(terms))


# -- JSON -------------------------------------------------------------------------


def density_to_json(f: PolyDensity) -> dict:
    return {"dim": f.dimension, "terms": [{"coeff": t.coeff, "exps": list(t.exponents)} for t in f.terms]}


def density_from_json(obj) -> PolyDensity:
    try:
        d = int(obj["dim"])
        terms = tuple(MonomialTerm(t["coeff"], tuple(t["exps"])) for t in obj["terms"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"density: malformed field {exc}") from None
    return PolyDensity(d, terms)


def domain_to_json(dom: Domain):
    if dom.kind == "pulled-back":
        return {"pulled-back": {"steepness": dom.steepness}}
    return "full" if dom.kind == "full" else "unit-cube"


def domain_from_json(obj) -> Domain:
    if obj in ("full", "full-space", None):
        return FULL
    if obj == "unit-cube":
        return UNIT_CUBE
    if isinstance(obj, dict) and "pulled-back" in obj:
        return Domain("pulled-back", float(obj["pulled-back"].get("steepness", 1.0)))
    raise ValueError(f"domain: unrecognized value {obj!r}")


def family_to_json(fam: MeasureFamily) -> dict:
    return {"densities": [density_to_json(f) for f in fam.densities], "domain": domain_to_json(fam.domain)}


def family_from_json(obj) -> MeasureFamily:
    if not isinstance(obj, dict) or "densities" not in obj:
        raise ValueError("family: missing field 'densities'")
    return MeasureFamily(
        tuple(density_from_json(f) for f in obj["densities"]), domain_from_json(obj.get("domain", "full"))
    )



def monomial_exponents(d: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent vectors of total degree ``<= degree`` in graded order."""
    out = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) <= degree]
    return sorted(out, key=lambda e: (sum(e), tuple(-x for x in e)))


def random_family(d: int, k: int, degree: int, rng: np.random.Generator, domain: Domain = FULL) -> MeasureFamily:
    """``k`` densities with standard normal coefficients on every monomial of
    total degree ``<= degree``."""
    exps = monomial_exponents(d, degree)
    dens = []
    for _ in range(k):
        coeffs = rng.standard_normal(len(exps))
        dens.append(PolyDensity(d, tuple(MonomialTerm(c, e) for c, e in zip(coeffs, exps))))
    return MeasureFamily(tuple(dens), domain)
