"""Shape families and their unconstrained search coordinates.

Three families are supported: axis-aligned cubes, axis-aligned cuboids and
orbits of a centrally symmetric body under the group of positive diagonal
dilatations plus translations.  Every family has a flat coordinate vector
(``ShapeParams``) in which every real vector is a valid, nondegenerate shape:
edge lengths, widths and scales are stored through their logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

BODY_KINDS = ("ball", "cube", "cross")
_BODY_ALIASES = {
    "ball": "ball",
    "unit-ball": "ball",
    "cube": "cube",
    "unit-cube": "cube",
    "cross": "cross",
    "cross-polytope": "cross",
    "unit-cross-polytope": "cross",
}


class ShapeError(ValueError):
    """Raised for malformed shapes or mismatched dimensions."""


def _vec(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    if arr.size == 0:
        raise ShapeError(f"{name}: empty vector")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name}: non-finite entry")
    return arr


@dataclass(frozen=True, eq=False)
class Cuboid:
    """Axis-aligned box ``[lo, hi]`` with ``lo[i] < hi[i]`` on every axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _vec(self.lo, "lo")
        hi = _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise ShapeError(f"lo/hi dimension mismatch: {lo.size} vs {hi.size}")
        if not np.all(lo < hi):
            raise ShapeError("cuboid requires lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def __eq__(self, other):
        if not isinstance(other, Cuboid):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Cuboid(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class Cube:
    """Axis-aligned cube given by its lowest vertex and edge length."""

    anchor: np.ndarray
    edge: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", _vec(self.anchor, "anchor"))
        edge = float(self.edge)
        if not (math.isfinite(edge) and edge > 0):
            raise ShapeError(f"edge must be positive, got {edge}")
        object.__setattr__(self, "edge", edge)

    @property
    def dim(self) -> int:
        return self.anchor.size

    def __eq__(self, other):
        if not isinstance(other, Cube):
            return NotImplemented
        return np.array_equal(self.anchor, other.anchor) and self.edge == other.edge

    def __hash__(self):
        return hash((self.anchor.tobytes(), self.edge))

    def __repr__(self):
        return f"Cube(anchor={self.anchor.tolist()}, edge={self.edge!r})"


@dataclass(frozen=True, eq=False)
class AxisTransform:
    """The map ``x -> scale * x + shift`` with a positive diagonal ``scale``."""

    scale: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        scale = _vec(self.scale, "scale")
        shift = _vec(self.shift, "shift")
        if scale.shape != shift.shape:
            raise ShapeError(f"scale/shift dimension mismatch: {scale.size} vs {shift.size}")
        if not np.all(scale > 0):
            raise ShapeError("scale entries must be positive")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "shift", shift)

    @property
    def dim(self) -> int:
        return self.scale.size

    @property
    def det(self) -> float:
        return float(np.prod(self.scale))

    @classmethod
    def identity(cls, d: int) -> "AxisTransform":
        return cls(np.ones(d), np.zeros(d))

    def __call__(self, x):
        return self.scale * np.asarray(x, dtype=float) + self.shift

    def __eq__(self, other):
        if not isinstance(other, AxisTransform):
            return NotImplemented
        return np.array_equal(self.scale, other.scale) and np.array_equal(self.shift, other.shift)

    def __hash__(self):
        return hash((self.scale.tobytes(), self.shift.tobytes()))

    def __repr__(self):
        return f"AxisTransform(scale={self.scale.tolist()}, shift={self.shift.tolist()})"


@dataclass(frozen=True)
class SymmetricBody:
    """Unit ball, cube ``[-1, 1]^d`` or cross-polytope, centered at the origin."""

    kind: str
    dimension: int

    def __post_init__(self):
        kind = _BODY_ALIASES.get(self.kind)
        if kind is None:
            raise ShapeError(f"unsupported body kind {self.kind!r}")
        if int(self.dimension) < 1:
            raise ShapeError("body dimension must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dimension", int(self.dimension))

    def contains(self, x) -> np.ndarray:
        """Indicator of the closed body at points ``x`` of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return np.sum(x * x, axis=-1) <= 1.0
        if self.kind == "cube":
            return np.max(np.abs(x), axis=-1) <= 1.0
        return np.sum(np.abs(x), axis=-1) <= 1.0


@dataclass(frozen=True)
class OrbitShape:
    body: SymmetricBody
    transform: AxisTransform

    def __post_init__(self):
        if self.body.dimension != self.transform.dim:
            raise ShapeError(
                f"body dimension {self.body.dimension} != transform dimension {self.transform.dim}"
            )

    @property
    def dim(self) -> int:
        return self.body.dimension

    def bounding_box(self) -> Cuboid:
        t = self.transform
        return Cuboid(t.shift - t.scale, t.shift + t.scale)


FAMILIES = ("cube", "cuboid", "orbit")


@dataclass(frozen=True, eq=False)
class ShapeParams:
    """Flat search coordinates of one shape.

    ``cube``: ``d`` anchor coordinates followed by the log edge.
    ``cuboid``: ``d`` midpoints followed by ``d`` log widths.
    ``orbit``: ``d`` shifts followed by ``d`` log scales; ``body`` names the
    symmetric body.
    """

    family: str
    coords: np.ndarray
    body: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ShapeError(f"unknown family {self.family!r}")
        coords = _vec(self.coords, "coords")
        if self.family == "cube":
            if coords.size < 2:
                raise ShapeError("cube coords need d + 1 >= 2 entries")
        elif coords.size % 2:
            raise ShapeError(f"{self.family} coords need 2d entries, got {coords.size}")
        if self.family == "orbit":
            if self.body is None:
                raise ShapeError("orbit params need a body kind")
            object.__setattr__(self, "body", SymmetricBody(self.body, 1).kind)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return param_dim_to_d(self.family, self.coords.size)

    def __eq__(self, other):
        if not isinstance(other, ShapeParams):
            return NotImplemented
        return (
            self.family == other.family
            and self.body == other.body
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self):
        return hash((self.family, self.body, self.coords.tobytes()))

    def __repr__(self):
        extra = f", body={self.body!r}" if self.body else ""
        return f"ShapeParams({self.family!r}, {self.coords.tolist()}{extra})"


Shape = Union[Cube, Cuboid, OrbitShape, ShapeParams]


def param_count(family: str, d: int) -> int:
    """Number of search coordinates of one shape of ``family`` in dimension ``d``."""
    if family == "cube":
        return d + 1
    if family in ("cuboid", "orbit"):
        return 2 * d
    raise ShapeError(f"unknown family {family!r}")


def param_dim_to_d(family: str, n: int) -> int:
    return n - 1 if family == "cube" else n // 2


def to_cuboid(shape) -> Cuboid:
    """Convert a cube, cuboid, box-valued orbit or cube/cuboid params to a ``Cuboid``."""
    if isinstance(shape, Cuboid):
        return shape
    if isinstance(shape, Cube):
        return Cuboid(shape.anchor, shape.anchor + shape.edge)
    if isinstance(shape, OrbitShape):
        if shape.body.kind != "cube":
            raise ShapeError(f"orbit of {shape.body.kind} is not a box")
        return shape.bounding_box()
    if isinstance(shape, ShapeParams):
        c = shape.coords
        if shape.family == "cube":
            edge = math.exp(c[-1])
            return Cuboid(c[:-1], c[:-1] + edge)
        if shape.family == "cuboid" or (shape.family == "orbit" and shape.body == "cube"):
            d = c.size // 2
            half = np.exp(c[d:]) / 2 if shape.family == "cuboid" else np.exp(c[d:])
            return Cuboid(c[:d] - half, c[:d] + half)
        raise ShapeError(f"orbit of {shape.body} is not a box")
    raise ShapeError(f"cannot convert {type(shape).__name__} to a cuboid")


def to_params(shape, family: str | None = None) -> ShapeParams:
    """Inverse of :func:`to_cuboid` / :func:`to_shape` for the natural family of ``shape``."""
    if isinstance(shape, ShapeParams):
        return shape
    if isinstance(shape, Cube):
        return ShapeParams("cube", np.append(shape.anchor, math.log(shape.edge)))
    if isinstance(shape, Cuboid):
        if family == "cube":
            w = shape.widths
            if not np.allclose(w, w[0], rtol=1e-12, atol=0):
                raise ShapeError("cuboid is not a cube")
            return ShapeParams("cube", np.append(shape.lo, math.log(w[0])))
        return ShapeParams("cuboid", np.concatenate([shape.center, np.log(shape.widths)]))
    if isinstance(shape, OrbitShape):
        t = shape.transform
        return ShapeParams("orbit", np.concatenate([t.shift, np.log(t.scale)]), body=shape.body.kind)
    if isinstance(shape, AxisTransform):
        raise ShapeError("a bare transform needs a body; wrap it in OrbitShape")
    raise ShapeError(f"cannot parametrize {type(shape).__name__}")


def to_shape(params: ShapeParams):
    """Materialize search coordinates as a ``Cube``, ``Cuboid`` or ``OrbitShape``."""
    c = params.coords
    if params.family == "cube":
        return Cube(c[:-1], math.exp(c[-1]))
    d = c.size // 2
    if params.family == "cuboid":
        return to_cuboid(params)
    return OrbitShape(SymmetricBody(params.body, d), AxisTransform(np.exp(c[d:]), c[:d]))


def apply_transform(t: AxisTransform, body: SymmetricBody) -> OrbitShape:
    return OrbitShape(body, t)


def compose(t1: AxisTransform, t2: AxisTransform) -> AxisTransform:
    """Return the transform ``x -> t1(t2(x))``."""
    if t1.dim != t2.dim:
        raise ShapeError(f"dimension mismatch: {t1.dim} vs {t2.dim}")
    return AxisTransform(t1.scale * t2.scale, t1.scale * t2.shift + t1.shift)


def invert(t: AxisTransform) -> AxisTransform:
    inv = 1.0 / t.scale
    return AxisTransform(inv, -t.shift * inv)


def separation(s1: ShapeParams, s2: ShapeParams) -> float:
    """Euclidean distance between two coordinate vectors of the same family."""
    if s1.family != s2.family or s1.body != s2.body:
        raise ShapeError(f"family mismatch: {s1.family} vs {s2.family}")
    if s1.coords.size != s2.coords.size:
        raise ShapeError(f"dimension mismatch: {s1.coords.size} vs {s2.coords.size}")
    return float(np.linalg.norm(s1.coords - s2.coords))


class Disjointness(NamedTuple):
    disjoint: bool
    margin: float


def box_margin(lo1, hi1, lo2, hi2) -> np.ndarray:
    """Largest per-axis gap between boxes; vectorized over leading axes."""
    gaps = np.maximum(np.asarray(lo2) - hi1, np.asarray(lo1) - hi2)
    return np.max(gaps, axis=-1)


def boxes_disjoint(c1: Cuboid, c2: Cuboid) -> Disjointness:
    """Margin is positive iff the closed boxes are disjoint, negative iff interiors overlap."""
    if c1.dim != c2.dim:
        raise ShapeError(f"dimension mismatch: {c1.dim} vs {c2.dim}")
    margin = float(box_margin(c1.lo, c1.hi, c2.lo, c2.hi))
    return Disjointness(margin > 0, margin)


# -- JSON -------------------------------------------------------------------


def shape_to_json(shape) -> dict:
    if isinstance(shape, ShapeParams):
        shape = to_shape(shape)
    if isinstance(shape, Cube):
        return {"cube": {"anchor": shape.anchor.tolist(), "edge": shape.edge}}
    if isinstance(shape, Cuboid):
        return {"cuboid": {"lo": shape.lo.tolist(), "hi": shape.hi.tolist()}}
    if isinstance(shape, OrbitShape):
        t = shape.transform
        return {"orbit": {"body": shape.body.kind, "scale": t.scale.tolist(), "shift": t.shift.tolist()}}
    raise ShapeError(f"cannot serialize {type(shape).__name__}")


def shape_from_json(obj: dict):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ShapeError("shape JSON must be an object with exactly one of cube/cuboid/orbit")
    (key, body), = obj.items()
    try:
        if key == "cube":
            return Cube(body["anchor"], body["edge"])
        if key == "cuboid":
            return Cuboid(body["lo"], body["hi"])
        if key == "orbit":
            scale = body["scale"]
            return OrbitShape(SymmetricBody(body["body"], len(scale)), AxisTransform(scale, body["shift"]))
    except KeyError as exc:
        raise ShapeError(f"{key}: missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ShapeError(f"{key}: {exc}") from None
    raise ShapeError(f"unknown shape kind {key!r}")
