"""Independent numerical integrators used to cross-check the closed forms.

Nothing here knows about monomial structure: densities are only evaluated
pointwise.  Boxes use adaptive tensor-product Gauss-Kronrod quadrature,
symmetric bodies are first mapped onto boxes by smooth charts, and a plain
Monte-Carlo estimator is provided for the bodies themselves.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


def _tensor_rule(lo, hi):
    d = lo.size
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    grids = np.meshgrid(*([_XK] * d), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1) * half + mid
    wk = np.ones(1)
    wg = np.ones(1)
    for _ in range(d):
        wk = np.multiply.outer(wk, _WK).reshape(-1)
        wg = np.multiply.outer(wg, _WG).reshape(-1)
    jac = float(np.prod(half))
    return pts, wk * jac, wg * jac


def box_integral(func, lo, hi, rtol: float = 1e-13, atol: float = 1e-15, max_boxes: int = 20000):
    """Globally adaptive tensor Gauss-Kronrod integral of ``func`` over ``[lo, hi]``.

    ``func`` maps points (N, d) to values (N,) or (N, m).  The box with the
    largest Kronrod/Gauss discrepancy is bisected along its longest axis until
    the summed discrepancy drops below ``max(atol, rtol * |integral|)``.
    Returns ``(value, error_estimate)``.
    """

    def rule(a, b):
        pts, wk, wg = _tensor_rule(a, b)
        vals = np.asarray(func(pts), dtype=float)
        k_est = np.tensordot(wk, vals, axes=(0, 0))
        g_est = np.tensordot(wg, vals, axes=(0, 0))
        return k_est, float(np.max(np.abs(k_est - g_est)))

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    est, err = rule(lo, hi)
    heap = [(-err, 0, lo, hi, est)]
    total, total_err = est, err
    counter = 1
    while heap and counter < max_boxes:
        if total_err <= max(atol, rtol * float(np.max(np.abs(total)))):
            break
        neg_err, _, a, b, e = heapq.heappop(heap)
        axis = int(np.argmax(b - a))
        cut = 0.5 * (a[axis] + b[axis])
        b1 = b.copy()
        b1[axis] = cut
        a2 = a.copy()
        a2[axis] = cut
        total = total - e
        total_err += neg_err
        for sa, sb in ((a, b1), (a2, b)):
            se, serr = rule(sa, sb)
            total = total + se
            total_err += serr
            heapq.heappush(heap, (-serr, counter, sa, sb, se))
            counter += 1
    return total, total_err


def density_box_integral(f, lo, hi, **kw) -> float:
    return float(box_integral(f, lo, hi, **kw)[0])


def _ball_chart(t):
    """Smooth chart of the unit ball from ``[-pi/2, pi/2]^(d-1) x [-1, 1]``.

    ``x_i = R_i sin t_i`` with ``R_i = prod_{j<i} cos t_j`` and ``x_d = R_d u``;
    the Jacobian ``R_2 ... R_d * R_d`` is a trigonometric polynomial, so the
    pulled-back integrand of a polynomial is analytic on the box.
    """
    d = t.shape[-1]
    x = np.empty_like(t)
    R = np.ones(t.shape[:-1])
    jac = np.ones(t.shape[:-1])
    for i in range(d - 1):
        x[..., i] = R * np.sin(t[..., i])
        R = R * np.cos(t[..., i])
        jac = jac * R
    x[..., d - 1] = R * t[..., d - 1]
    return x, jac * R


def _simplex_chart(v):
    """Collapsed coordinates from ``[0, 1]^d`` onto ``{x >= 0, sum x <= 1}``."""
    x = np.empty_like(v)
    rest = np.ones(v.shape[:-1])
    jac = np.ones(v.shape[:-1])
    for i in range(v.shape[-1]):
        x[..., i] = rest * v[..., i]
        jac = jac * rest
        rest = rest * (1.0 - v[..., i])
    return x, jac


def body_integral(f, kind: str, scale, shift, rtol: float = 1e-10, atol: float = 1e-16):
    """Integral of ``f`` over ``diag(scale) K + shift``.

    The body is parametrized by a smooth chart over a box (the ball), by its
    ``2^d`` orthant simplices in collapsed coordinates (the cross-polytope),
    or directly (the cube), and the pulled-back integrand is handed to
    :func:`box_integral`.  ``f`` may be vector-valued.  The tolerance bounds
    the Gauss/Kronrod discrepancy; the returned Kronrod value is typically
    several orders more accurate.
    """
    scale = np.asarray(scale, dtype=float)
    shift = np.asarray(shift, dtype=float)
    d = scale.size
    det = float(np.prod(scale))

    def at(x):
        return np.asarray(f(x * scale + shift), dtype=float)

    def weighted(vals, w):
        return vals * (w if vals.ndim == 1 else w[:, None])

    if kind == "cube":
        val, _ = box_integral(at, -np.ones(d), np.ones(d), rtol=rtol, atol=atol)
    elif kind == "ball":
        def g(t):
            x, w = _ball_chart(t)
            return weighted(at(x), w)

        lo = np.append(np.full(d - 1, -np.pi / 2), -1.0)
        hi = np.append(np.full(d - 1, np.pi / 2), 1.0)
        val, _ = box_integral(g, lo, hi, rtol=rtol, atol=atol)
    elif kind == "cross":
        val = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=d):
            sg = np.array(signs)

            def g(v, sg=sg):
                x, w = _simplex_chart(v)
                return weighted(at(x * sg), w)

            part, _ = box_integral(g, np.zeros(d), np.ones(d), rtol=rtol, atol=atol)
            val = val + part
    else:
        raise ValueError(f"unsupported body kind {kind!r}")
    return det * val


def monte_carlo_body_moment(exponents, kind: str, n: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000):
    """Monte-Carlo estimate and standard error of ``int_K prod x_i^k_i``.

    Points are uniform on ``[-1, 1]^d``; the estimate is ``2^d`` times the
    sample mean of ``x^k * 1_K(x)``.
    """
    from .geometry import SymmetricBody

    k = np.asarray(exponents, dtype=int)
    d = k.size
    body = SymmetricBody(kind, d)
    rng = np.random.default_rng(seed)
    s1 = 0.0
    s2 = 0.0
    left = n
    while left > 0:
        m = min(chunk, left)
        x = rng.uniform(-1.0, 1.0, size=(m, d))
        v = np.prod(x**k, axis=-1) * body.contains(x)
        s1 += float(v.sum())
        s2 += float((v * v).sum())
        left -= m
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    vol = 2.0**d
    return vol * mean, vol * math.sqrt(var / n)
