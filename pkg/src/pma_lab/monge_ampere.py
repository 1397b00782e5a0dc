"""Monotone wide-stencil operators for degenerate Monge-Ampere flows.

The flow is u_t = b(x,t) (det D^2 u)^p with 0 < lam <= b <= Lam.  The
determinant of a convex function is discretized as a minimum over
orthogonal stencil frames:

    det_h u(x) = min_F  prod_{e in F}  max(0, Delta^2_e u(x) / (|e|^2 h^2)),

where a frame F is a set of n pairwise-orthogonal integer vectors of
Chebyshev norm <= width and Delta^2_e u = u(x+he) + u(x-he) - 2u(x).
For a convex quadratic each frame product is the product of second
derivatives in an orthogonal basis, which by Hadamard's inequality is
>= det D^2 u with equality when the frame diagonalizes the Hessian; so
the minimum is exact whenever some frame is eigenaligned, and an upper
bound otherwise.  Clamping at zero keeps every product monotone in the
neighbor values, which is what the discrete comparison principle needs.

Variants:

* ``plain``    -- b (det_h u)^p
* ``gcf``      -- (det_h u)^p / (1 + |grad u|^2)^((n+2)p - 1)/2, the
  Gauss curvature flow normalization (b must be constant 1)
* ``reduced``  -- for profiles u(r, x_n) of an axisymmetric function in
  dimension n_full:  b ( max(0, u_r/r)^(n_full-2) * det2_h u )^p, with
  u_r/r replaced by its limit u_rr on the axis r = 0.

Alongside the value the evaluator can return a slope field: an upper
bound, in curvature units (multiply by 1/h^2), for |dF/du(x)|, used to
pick time steps that keep the explicit update monotone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .grid import (BAND, INTERIOR, CoefficientField, GridFunction,
                   _shifted, gradient_field)

VARIANTS = ("plain", "gcf", "reduced")


# ---------------------------------------------------------------------------
# stencil frames
# ---------------------------------------------------------------------------

def _frames_2d(width: int) -> list[tuple[tuple[int, int], ...]]:
    """Orthogonal integer frames in the plane, one per unordered line pair.

    A frame is determined by a primitive direction (a, b) with a >= 1 and
    -a < b <= a (the line within 45 degrees of the first axis); its partner
    is the perpendicular (-b, a).
    """
    frames = []
    for a in range(1, width + 1):
        for b in range(-a + 1, a + 1):
            if max(abs(a), abs(b)) > width:
                continue
            if math.gcd(a, abs(b)) != 1:
                continue
            frames.append(((a, b), (-b, a)))
    return frames


def orthogonal_frames(n: int, width: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All orthogonal integer frames with Chebyshev norm <= width.

    In the plane these are the rotated pairs from :func:`_frames_2d`.  In
    higher dimension: the axis frame, plus every non-axis planar frame
    embedded in each coordinate plane (the remaining directions stay on
    the axes).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if width < 1 or width > 3:
        raise ValueError("stencil width must be 1, 2 or 3")
    if n == 2:
        return tuple(_frames_2d(width))
    frames = [tuple(tuple(int(i == k) for i in range(n)) for k in range(n))]
    planar = [f for f in _frames_2d(width) if f[0] != (1, 0)]
    for i in range(n):
        for j in range(i + 1, n):
            for u2, v2 in planar:
                vecs = []
                for k in range(n):
                    if k == i:
                        e = [0] * n
                        e[i], e[j] = u2
                        vecs.append(tuple(e))
                    elif k == j:
                        e = [0] * n
                        e[i], e[j] = v2
                        vecs.append(tuple(e))
                    else:
                        vecs.append(tuple(int(m == k) for m in range(n)))
                frames.append(tuple(vecs))
    return tuple(frames)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorConfig:
    """Exponent, stencil width, variant and coefficient of the flow."""

    p: float
    width: int = 2
    variant: str = "plain"
    b: CoefficientField = field(default_factory=lambda: CoefficientField.constant(1.0))
    n_full: int | None = None     # embedding dimension for the reduced variant

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError(f"exponent p must be positive, got {self.p}")
        if self.width not in (1, 2, 3):
            raise ValueError(f"stencil width must be 1, 2 or 3, got {self.width}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "reduced":
            if self.n_full is None or self.n_full < 3:
                raise ValueError("reduced variant needs n_full >= 3")
        if self.variant == "gcf" and not (self.b.lam == self.b.Lam == 1.0):
            raise ValueError("gcf variant assumes coefficient b == 1")


@dataclass
class OperatorField:
    """Operator values (and optional diagnostics) on the lattice.

    ``values`` and ``slope`` are lattice-shaped with NaN away from the
    interior; ``slope`` is in curvature units (divide by h^2 for 1/time).
    """

    values: np.ndarray
    slope: np.ndarray | None = None
    argmin_frame: np.ndarray | None = None


# ---------------------------------------------------------------------------
# core evaluation
# ---------------------------------------------------------------------------

def _clamped_second_differences(V: np.ndarray, frame, h: float):
    """Clamped second differences per unit |e|^2 h^2 for each frame vector."""
    Ds, inv_e2 = [], []
    for e in frame:
        e2 = sum(c * c for c in e)
        num = _shifted(V, e) + _shifted(V, tuple(-c for c in e)) - 2.0 * V
        Ds.append(np.maximum(num / (e2 * h * h), 0.0))
        inv_e2.append(1.0 / e2)
    return Ds, inv_e2


def _frame_product_and_slope(Ds, inv_e2, want_slope: bool, floor: float = 0.0):
    """Product of clamped second differences and its value sensitivity.

    With ``floor > 0`` the sensitivity pieces (but never the product itself)
    are computed from differences floored at ``floor``: a second difference
    below the scheme's own truncation scale is indistinguishable from
    degenerate, and for p < 1 the raw sensitivity diverges exactly there.
    """
    prod = Ds[0].copy()
    for D in Ds[1:]:
        prod = prod * D
    if not want_slope:
        return prod, None, None
    Fs = [np.maximum(D, floor) for D in Ds] if floor > 0.0 else Ds
    if floor > 0.0:
        prod_f = Fs[0].copy()
        for D in Fs[1:]:
            prod_f = prod_f * D
    else:
        prod_f = prod
    # sum over i of (2/|e_i|^2) * prod_{j != i} D_j, via leave-one-out products
    n = len(Fs)
    slope = np.zeros_like(prod)
    for i in range(n):
        loo = None
        for j in range(n):
            if j == i:
                continue
            loo = Fs[j].copy() if loo is None else loo * Fs[j]
        if loo is None:
            loo = np.ones_like(prod)
        slope += 2.0 * inv_e2[i] * loo
    return prod, prod_f, slope


def _power_slope(p: float, prod: np.ndarray, prod_f: np.ndarray,
                 sum_loo: np.ndarray) -> np.ndarray:
    """|d(prod^p)/du(x)| factor: p * prod_f^(p-1) * sum_loo.

    ``prod_f`` equals ``prod`` for p >= 1; for p < 1 the caller passes the
    curvature-floored product, bounding the otherwise divergent p - 1 power
    at the resolvable scale.  Where ``prod == 0`` the node does not move and
    the sensitivity is taken as zero (the degenerate-product convention).
    """
    if p == 1.0:
        return sum_loo
    out = np.zeros_like(prod)
    pos = prod > 0
    out[pos] = p * np.power(prod_f[pos], p - 1.0) * sum_loo[pos]
    return out


def ma_field(u: GridFunction, cfg: OperatorConfig,
             with_slope: bool = False,
             with_frames: bool = False) -> OperatorField:
    """Evaluate the configured operator at every interior node."""
    if cfg.variant == "reduced":
        return reduced_ma_field(u, cfg, with_slope=with_slope)
    dom = u.domain
    h = dom.h_grid
    frames = orthogonal_frames(dom.n, cfg.width)
    if max(max(abs(c) for c in e) for f in frames for e in f) > dom.stencil_radius:
        raise ValueError("operator width exceeds the domain stencil radius")
    V = u.values
    best = None
    best_slope = None
    arg = None
    floor = h * h if cfg.p < 1.0 else 0.0
    for k, frame in enumerate(frames):
        Ds, inv_e2 = _clamped_second_differences(V, frame, h)
        prod, prod_f, sum_loo = _frame_product_and_slope(
            Ds, inv_e2, with_slope, floor)
        if best is None:
            best = prod
            arg = np.zeros(V.shape, dtype=np.uint8) if with_frames else None
            best_slope = (_power_slope(cfg.p, prod, prod_f, sum_loo)
                          if with_slope else None)
        else:
            if with_frames:
                arg = np.where(prod < best, np.uint8(k), arg)
            if with_slope:
                # monotone steps need the slope bound over every frame, not
                # just the active one: a frame can take over mid-step
                best_slope = np.maximum(
                    best_slope, _power_slope(cfg.p, prod, prod_f, sum_loo))
            best = np.minimum(best, prod)
    inner = dom.interior_mask()
    pts = dom.positions(inner)
    bvals = cfg.b(pts, u.t)
    cfg.b.check_bounds(bvals, f"at t={u.t}")
    values = np.full(dom.shape, np.nan)
    values[inner] = bvals * np.power(best[inner], cfg.p)
    slope = None
    if with_slope:
        slope = np.full(dom.shape, np.nan)
        slope[inner] = bvals * best_slope[inner]
    if cfg.variant == "gcf":
        grad = gradient_field(u)
        g2 = np.einsum("...i,...i->...", grad, grad)
        expo = ((dom.n + 2) * cfg.p - 1.0) / 2.0
        factor = np.power(1.0 + g2[inner], -expo)
        values[inner] *= factor
        if with_slope:
            slope[inner] *= factor
    if with_frames and arg is not None:
        arg = np.where(inner, arg, np.uint8(255))
    return OperatorField(values=values, slope=slope,
                         argmin_frame=arg if with_frames else None)


def ma_value(u: GridFunction, point, cfg: OperatorConfig) -> float:
    """Operator value at the interior node nearest to ``point``."""
    dom = u.domain
    idx = dom.index_of(point)
    if dom.classes[idx] != INTERIOR:
        raise ValueError(f"node {dom.node_position(idx)} is not interior")
    if cfg.variant == "reduced":
        return float(reduced_ma_field(u, cfg).values[idx])
    h = dom.h_grid
    V = u.values
    best = math.inf
    for frame in orthogonal_frames(dom.n, cfg.width):
        prod = 1.0
        for e in frame:
            e2 = sum(c * c for c in e)
            ip = tuple(i + c for i, c in zip(idx, e))
            im = tuple(i - c for i, c in zip(idx, e))
            D = (V[ip] + V[im] - 2.0 * V[idx]) / (e2 * h * h)
            prod *= max(D, 0.0)
        best = min(best, prod)
    x = dom.node_position(idx)[None, :]
    val = float(cfg.b(x, u.t)[0]) * best ** cfg.p
    if cfg.variant == "gcf":
        g2 = 0.0
        for ax in range(dom.n):
            ip = tuple(i + (1 if k == ax else 0) for k, i in enumerate(idx))
            im = tuple(i - (1 if k == ax else 0) for k, i in enumerate(idx))
            g2 += ((V[ip] - V[im]) / (2 * h)) ** 2
        val *= (1.0 + g2) ** (-((dom.n + 2) * cfg.p - 1.0) / 2.0)
    return val


def gcf_value(u: GridFunction, point, cfg: OperatorConfig | None = None,
              p: float = 1.0, width: int = 2) -> float:
    """Gauss-curvature-flow normalized value at a node."""
    if cfg is None:
        cfg = OperatorConfig(p=p, width=width, variant="gcf")
    elif cfg.variant != "gcf":
        raise ValueError("gcf_value needs a gcf-variant config")
    return ma_value(u, point, cfg)


# ---------------------------------------------------------------------------
# reduced (axisymmetric) operator
# ---------------------------------------------------------------------------

def _radial_ratio(V: np.ndarray, r: np.ndarray, h: float) -> np.ndarray:
    """u_r / r by central differences, with the u_rr limit on the axis.

    ``r`` is the (broadcastable) first-axis coordinate; data must be even
    in r so the axis column has mirror neighbors.
    """
    up = _shifted(V, (1, 0))
    um = _shifted(V, (-1, 0))
    on_axis = np.abs(r) < 0.5 * h
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (up - um) / (2.0 * h * r)
    d2 = (up + um - 2.0 * V) / (h * h)
    return np.where(on_axis, d2, ratio)


def reduced_ma_field(u: GridFunction, cfg: OperatorConfig,
                     with_slope: bool = False) -> OperatorField:
    """Axisymmetric operator on a 2-D (r, x_n) lattice.

    The grid function lives on a 2-D domain whose first coordinate is the
    radius (the lattice must be symmetric about r = 0 with even data, so
    the axis column can difference across itself); `cfg.n_full` is the
    dimension of the ambient space.
    """
    dom = u.domain
    if dom.n != 2:
        raise ValueError("the reduced operator works on a 2-D (r, x_n) lattice")
    nf = cfg.n_full
    h = dom.h_grid
    V = u.values
    r = dom.grids()[0]
    ratio = np.maximum(_radial_ratio(V, r, h), 0.0)
    radial = np.power(ratio, nf - 2)
    floor = h * h if cfg.p < 1.0 else 0.0
    best = None
    best_f = None
    best_sum = None
    for frame in orthogonal_frames(2, cfg.width):
        Ds, inv_e2 = _clamped_second_differences(V, frame, h)
        prod, prod_f, sum_loo = _frame_product_and_slope(
            Ds, inv_e2, with_slope, floor)
        if best is None:
            best, best_f, best_sum = prod, prod_f, sum_loo
        else:
            if with_slope:
                best_sum = np.maximum(best_sum, sum_loo)
                best_f = np.minimum(best_f, prod_f)
            best = np.minimum(best, prod)
    inner = dom.interior_mask()
    pts = dom.positions(inner)
    bvals = cfg.b(pts, u.t)
    cfg.b.check_bounds(bvals, f"at t={u.t}")
    bracket = radial * best
    values = np.full(dom.shape, np.nan)
    values[inner] = bvals * np.power(bracket[inner], cfg.p)
    slope = None
    if with_slope:
        # d/du(x) hits the planar determinant everywhere and, on the axis
        # only, the radial factor through its u_rr limit; for p < 1 every
        # sensitivity piece uses the curvature-floored quantities
        ratio_f = np.maximum(ratio, floor) if floor > 0.0 else ratio
        radial_f = np.power(ratio_f, nf - 2)
        sum_term = radial_f * best_sum
        on_axis = np.broadcast_to(np.abs(r) < 0.5 * h, dom.shape)
        if nf == 3:
            rpow = np.ones_like(ratio)       # ratio^0, including the clamp edge
        else:
            rpow = np.zeros_like(ratio)
            pos_r = ratio_f > 0
            rpow[pos_r] = np.power(ratio_f[pos_r], nf - 3)
        axis_term = np.where(on_axis, 2.0 * (nf - 2) * rpow * best_f, 0.0)
        total = sum_term + axis_term
        s = np.zeros_like(V)
        pos = bracket > 0
        if cfg.p == 1.0:
            s = total
        else:
            bracket_f = radial_f * best_f
            s[pos] = cfg.p * np.power(bracket_f[pos], cfg.p - 1.0) * total[pos]
        slope = np.full(dom.shape, np.nan)
        slope[inner] = bvals * s[inner]
    return OperatorField(values=values, slope=slope)


def reduced_ma_value(u: GridFunction, point, cfg: OperatorConfig) -> float:
    """Reduced operator value at the interior node nearest to ``point``."""
    dom = u.domain
    idx = dom.index_of(point)
    if dom.classes[idx] != INTERIOR:
        raise ValueError(f"node {dom.node_position(idx)} is not interior")
    return float(reduced_ma_field(u, cfg).values[idx])
