"""Convex geometry of sampled functions: sections, ellipsoids, conjugates.

A *section* of a convex sample ``u`` at base node ``x0``, height ``h`` and
slope ``p`` is the lattice sub-level set

    S = { y active : u(y) <= u(x0) + p.(y - x0) + h }.

``centered_section`` tilts the slope until the section's center of mass
coincides with the base node, by a damped fixed point: a slope increment
``dp`` shifts the sub-level set roughly by ``dp * rbar^2 / (2 h)`` (the
section has curvature scale ``2 h / rbar^2``), so the update

    p <- p - kappa * (2 h / rbar^2) * (x* - x0)

with a safety factor ``kappa`` contracts toward the centered slope.

``john_ellipsoid`` computes the maximum-volume ellipsoid with a *given*
center inscribed in the convex hull of a node set.  With hull facets
``a_i . x <= b_i`` and center ``c`` (slack ``d_i = b_i - a_i . c > 0``), an
ellipsoid ``E = { c + M^{1/2} z : |z| <= 1 }`` fits iff
``a_i' M a_i <= d_i^2``; maximising ``log det M`` under these constraints is,
after scaling ``z_i = a_i / d_i``, exactly the centered minimum-volume-
enclosing-ellipsoid problem for the points ``z_i``.  Its Lagrangian dual is a
determinant maximisation over facet weights, solved here by the classical
multiplicative-weight iteration; a final exact rescale restores feasibility,
so the returned ellipsoid is always inscribed, and optimal up to the
iteration tolerance.

``balancedness`` normalises a node set by the inscribed ellipsoid centered at
a base point: the witnessing map ``A = M^{-1/2}`` sends the set between the
unit ball and the ball of radius ``d = max |A (y - x0)|``.

``legendre`` evaluates the convex conjugate ``u*(xi) = max_x (xi.x - u(x))``
over the sampled nodes onto a dual lattice, and ``flat_set`` extracts the
contact set of a supporting affine function together with its extremal
points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .grid import Domain, GridFunction, build_domain, fmt17, gradient_field

__all__ = [
    "BalancednessCertificate",
    "Ellipsoid",
    "FlatSet",
    "LegendreTransform",
    "Section",
    "balancedness",
    "centered_section",
    "flat_set",
    "john_ellipsoid",
    "legendre",
    "save_ellipsoid",
    "save_section",
    "section_at",
    "unit_ball_volume",
]


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """Sub-level set of a convex sample below a tilted plane."""

    domain: Domain
    base_point: np.ndarray
    height: float
    slope: np.ndarray
    indices: np.ndarray           # (k, n) lattice indices of member nodes
    t: float
    touches_boundary: bool        # any member lies in the boundary band

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def positions(self) -> np.ndarray:
        ax = self.domain.axes()
        out = np.empty((len(self.indices), self.domain.n))
        for d in range(self.domain.n):
            out[:, d] = ax[d][self.indices[:, d]]
        return out

    @property
    def center_of_mass(self) -> np.ndarray:
        return self.positions.mean(axis=0)


def _base_node(u: GridFunction, base_point) -> tuple[tuple[int, ...], np.ndarray]:
    dom = u.domain
    x0 = np.asarray(base_point, dtype=float).reshape(dom.n)
    try:
        idx = dom.index_of(x0)
    except ValueError:
        raise ValueError(f"base point {tuple(x0)} is not an active lattice node")
    snapped = dom.node_position(idx)
    if (dom.classes[idx] == 0
            or np.max(np.abs(snapped - x0)) > 0.5 * dom.h_grid):
        raise ValueError(f"base point {tuple(x0)} is not an active lattice node")
    return idx, snapped


def section_at(u: GridFunction, base_point, height: float,
               slope=None, tol_rel: float = 1e-9) -> Section:
    """Member nodes of the sub-level set at a given height and slope.

    Membership uses ``<=`` with a relative tolerance so nodes landing exactly
    on the cutting plane are kept.  Raises if the section is empty (height
    below what the grid can resolve) and flags, without raising, sections
    that reach the boundary band.
    """
    if height <= 0:
        raise ValueError("section height must be positive")
    dom = u.domain
    idx0, x0 = _base_node(u, base_point)
    p = (np.zeros(dom.n) if slope is None
         else np.asarray(slope, dtype=float).reshape(dom.n))
    u0 = float(u.values[idx0])
    plane = u0 + height
    for d, g in enumerate(dom.grids()):
        plane = plane + p[d] * (g - x0[d])
    tol = tol_rel * max(1.0, abs(u0) + abs(height))
    with np.errstate(invalid="ignore"):
        member = dom.active_mask() & (u.values <= plane + tol)
    indices = np.argwhere(member)
    if len(indices) == 0:
        raise ValueError(
            f"empty section: height {height:g} is below the grid resolution "
            f"at base point {tuple(x0)}")
    touches = bool(np.any(member & dom.band_mask()))
    return Section(domain=dom, base_point=x0, height=float(height), slope=p,
                   indices=indices, t=u.t, touches_boundary=touches)


def _node_gradient(u: GridFunction, idx: tuple[int, ...]) -> np.ndarray:
    """Central-difference gradient at one node, one-sided near missing data."""
    dom = u.domain
    g = np.zeros(dom.n)
    for ax in range(dom.n):
        lo = list(idx)
        hi = list(idx)
        lo[ax] -= 1
        hi[ax] += 1
        has_lo = lo[ax] >= 0 and dom.classes[tuple(lo)] != 0
        has_hi = hi[ax] < dom.shape[ax] and dom.classes[tuple(hi)] != 0
        if has_lo and has_hi:
            g[ax] = (u.values[tuple(hi)] - u.values[tuple(lo)]) / (2 * dom.h_grid)
        elif has_hi:
            g[ax] = (u.values[tuple(hi)] - u.values[idx]) / dom.h_grid
        elif has_lo:
            g[ax] = (u.values[idx] - u.values[tuple(lo)]) / dom.h_grid
    return g


def centered_section(u: GridFunction, base_point, height: float,
                     kappa: float = 0.5, max_iter: int = 200) -> Section:
    """Section whose center of mass lies within ``2 h_grid`` of the base node.

    The slope starts at the discrete gradient and is adjusted by the damped
    fixed point described in the module docstring.  Sections reaching the
    boundary band are not centered (the sub-level set is then truncated by
    the domain and its center of mass is meaningless).
    """
    dom = u.domain
    idx0, x0 = _base_node(u, base_point)
    p = _node_gradient(u, idx0)
    goal = 2.0 * dom.h_grid
    best = np.inf
    sec = None
    for _ in range(max_iter):
        sec = section_at(u, x0, height, p)
        if sec.touches_boundary:
            raise ValueError(
                "section touches the boundary band; centering not attempted")
        res = sec.center_of_mass - x0
        r = float(np.linalg.norm(res))
        best = min(best, r)
        if r <= goal:
            return sec
        rbar2 = float(np.mean(np.sum((sec.positions - x0) ** 2, axis=1)))
        stiffness = 2.0 * height / max(rbar2, 1e-30)
        p = p - kappa * stiffness * res
    raise ValueError(
        f"centering failed: best center-of-mass residual {best:.3g} exceeds "
        f"{goal:.3g} after {max_iter} iterations")


# ---------------------------------------------------------------------------
# inscribed ellipsoids
# ---------------------------------------------------------------------------

def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class Ellipsoid:
    """``{ x : (x - center)' M^{-1} (x - center) <= 1 }`` with SPD ``M``."""

    center: np.ndarray
    shape_matrix: np.ndarray
    volume: float

    @staticmethod
    def from_shape(center, shape_matrix) -> "Ellipsoid":
        c = np.asarray(center, dtype=float).reshape(-1)
        m = np.asarray(shape_matrix, dtype=float).reshape(len(c), len(c))
        m = 0.5 * (m + m.T)
        ev = np.linalg.eigvalsh(m)
        if ev[0] <= 0:
            raise ValueError("shape matrix must be symmetric positive definite")
        vol = unit_ball_volume(len(c)) * float(np.sqrt(np.prod(ev)))
        return Ellipsoid(center=c, shape_matrix=m, volume=vol)

    def validate(self) -> None:
        vol = unit_ball_volume(len(self.center)) * float(
            np.sqrt(np.linalg.det(self.shape_matrix)))
        if not np.isclose(vol, self.volume, rtol=1e-10, atol=0.0):
            raise ValueError("stored volume does not match the shape matrix")

    def inverse_sqrt(self) -> np.ndarray:
        """The linear map sending the ellipsoid (about its center) to B_1."""
        w, v = np.linalg.eigh(self.shape_matrix)
        return (v / np.sqrt(w)) @ v.T

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        q = np.einsum("ij,jk,ik->i", d, np.linalg.inv(self.shape_matrix), d)
        return q <= 1.0 + tol


def _point_array(set_like) -> np.ndarray:
    if isinstance(set_like, Section):
        return set_like.positions
    pts = np.asarray(set_like, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def _hull_facets(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Facet inequalities ``a_i . x <= b_i`` of the convex hull."""
    n = pts.shape[1]
    if n == 1:
        x = pts[:, 0]
        return np.array([[1.0], [-1.0]]), np.array([x.max(), -x.min()])
    hull = ConvexHull(pts)
    return hull.equations[:, :-1], -hull.equations[:, -1]


def _max_volume_shape(normals: np.ndarray, slack: np.ndarray, n: int,
                      tol: float = 1e-9, max_iter: int = 100000) -> np.ndarray:
    """Maximise ``log det M`` subject to ``a_i' M a_i <= d_i^2``.

    Multiplicative-weight iteration on the dual determinant-maximisation
    problem: with ``z_i = a_i / d_i``, the optimal ``M`` is ``(n X)^{-1}``
    where ``X = sum w_i z_i z_i'`` and the weights solve
    ``max log det X`` over the simplex.  Each step moves weight onto the
    most-violated point (``g_j = z_j' X^{-1} z_j`` maximal) with the exact
    line-search step, which increases ``log det X`` monotonically.  The
    closing rescale makes every constraint hold exactly.
    """
    z = normals / slack[:, None]
    w = np.full(len(z), 1.0 / len(z))
    xinv = None
    for _ in range(max_iter):
        x = (z * w[:, None]).T @ z
        xinv = np.linalg.inv(x)
        g = np.einsum("ij,jk,ik->i", z, xinv, z)
        j = int(np.argmax(g))
        gj = float(g[j])
        if gj <= n * (1.0 + tol) or gj <= 1.0:
            break
        alpha = (gj - n) / (n * (gj - 1.0))
        w *= 1.0 - alpha
        w[j] += alpha
    m = xinv / n
    scale = float(np.max(np.einsum("ij,jk,ik->i", z, m, z)))
    return m / scale


def john_ellipsoid(node_set, center) -> Ellipsoid:
    """Maximum-volume ellipsoid with the given center inside the node hull.

    Accepts a Section or an ``(N, n)`` array of points.  Raises
    ``ValueError("flat set, no interior ellipsoid")`` when the points span a
    lower-dimensional affine subspace, and ``"base point not interior"`` when
    the center is outside (or on the boundary of) the hull.
    """
    pts = _point_array(node_set)
    k, n = pts.shape
    c = np.asarray(center, dtype=float).reshape(n)
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False) if k > 1 else np.zeros(n)
    if k <= n or sv[-1] <= 1e-9 * max(sv[0], 1.0):
        raise ValueError("flat set, no interior ellipsoid")
    try:
        normals, offsets = _hull_facets(pts)
    except QhullError:
        raise ValueError("flat set, no interior ellipsoid")
    slack = offsets - normals @ c
    if np.min(slack) <= 1e-12 * max(1.0, float(np.max(np.abs(offsets)))):
        raise ValueError("base point not interior")
    m = _max_volume_shape(normals, slack, n)
    return Ellipsoid.from_shape(c, m)


@dataclass(frozen=True)
class BalancednessCertificate:
    """Witness that ``A (S - x0)`` lies between B_1 and B_d."""

    points: np.ndarray
    base_point: np.ndarray
    d: float
    map: np.ndarray               # A = M^{-1/2} of the inscribed ellipsoid
    ellipsoid: Ellipsoid

    def __str__(self):
        return (f"balancedness d = {self.d:.6g} about "
                f"{tuple(np.round(self.base_point, 12))}")


def balancedness(node_set, base_point) -> BalancednessCertificate:
    """Normalise a node set by its inscribed ellipsoid centered at a point.

    ``d`` is the circumradius of the normalised set; the inscribed ellipsoid
    maps to the unit ball, so the node hull contains B_1 up to grid
    resolution and sits inside B_d.
    """
    pts = _point_array(node_set)
    x0 = np.asarray(base_point, dtype=float).reshape(pts.shape[1])
    ell = john_ellipsoid(pts, x0)
    a = ell.inverse_sqrt()
    radii = np.linalg.norm((pts - x0) @ a.T, axis=1)
    d = max(1.0, float(radii.max()))
    return BalancednessCertificate(points=pts, base_point=x0, d=d, map=a,
                                   ellipsoid=ell)


# ---------------------------------------------------------------------------
# Legendre conjugate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LegendreTransform:
    """Conjugate samples on a dual lattice plus the maximising primal nodes."""

    dual: GridFunction
    argmax: np.ndarray            # (N_active_dual, n) primal positions

    @property
    def domain(self) -> Domain:
        return self.dual.domain


def _gradient_box(u: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    g = gradient_field(u)
    inner = u.domain.interior_mask()
    lo = np.array([np.nanmin(g[..., d][inner]) for d in range(u.domain.n)])
    hi = np.array([np.nanmax(g[..., d][inner]) for d in range(u.domain.n)])
    return lo, hi


def legendre(u: GridFunction, dual_domain: Domain | None = None,
             dual_h: float | None = None, chunk: int = 512,
             stencil_radius: int = 2) -> LegendreTransform:
    """Convex conjugate ``u*(xi) = max over nodes x of (xi . x - u(x))``.

    The maximum runs over all active primal nodes, so boundary-band data
    participates (the conjugate of the sampled function on the closed
    domain).  When no dual lattice is supplied, a box covering the sampled
    gradient range is built; a supplied lattice that fails to cover that
    range only triggers a warning, since the conjugate is still well defined
    (it just reflects the primal boundary).
    """
    dom = u.domain
    pts = dom.positions(dom.active_mask())
    vals = u.values[dom.active_mask()]
    glo, ghi = _gradient_box(u)
    if dual_domain is None:
        width = ghi - glo
        floor = max(1e-3, dom.h_grid)
        glo = np.where(width < floor, glo - 0.5 * floor, glo)
        ghi = np.where(width < floor, ghi + 0.5 * floor, ghi)
        if dual_h is None:
            dual_h = float(np.max(ghi - glo) / 32.0)
        dual_domain = build_domain(
            {"kind": "box", "lower": glo, "upper": ghi},
            dual_h, stencil_radius=stencil_radius)
    else:
        dlo, dhi = dual_domain.positions().min(axis=0), \
            dual_domain.positions().max(axis=0)
        if np.any(dlo > glo + 1e-12) or np.any(dhi < ghi - 1e-12):
            warnings.warn(
                "dual grid range is smaller than the sampled gradient range; "
                "conjugate values near the dual boundary feel the truncation",
                stacklevel=2)
    mask = dual_domain.active_mask()
    xi = dual_domain.positions(mask)
    star = np.empty(len(xi))
    arg = np.empty(len(xi), dtype=int)
    step = max(1, min(len(xi), chunk))
    for s in range(0, len(xi), step):
        block = xi[s:s + step] @ pts.T - vals[None, :]
        arg[s:s + step] = np.argmax(block, axis=1)
        star[s:s + step] = block[np.arange(len(block)), arg[s:s + step]]
    dual_vals = np.full(dual_domain.shape, np.nan)
    dual_vals[mask] = star
    return LegendreTransform(dual=GridFunction(dual_domain, dual_vals, t=u.t),
                             argmax=pts[arg])


# ---------------------------------------------------------------------------
# flat sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatSet:
    """Contact set of a supporting affine function, with extremal points."""

    domain: Domain
    indices: np.ndarray           # (k, n) lattice indices, possibly empty
    slope: np.ndarray
    offset: float
    tol: float
    extremal_points: np.ndarray   # (m, n) hull vertices of the contact set
    contains_segment: bool
    t: float

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def positions(self) -> np.ndarray:
        ax = self.domain.axes()
        out = np.empty((len(self.indices), self.domain.n))
        for d in range(self.domain.n):
            out[:, d] = ax[d][self.indices[:, d]]
        return out


def _prune_collinear(pts: np.ndarray, angle_tol: float = 1e-6) -> np.ndarray:
    """Drop hull vertices whose turn angle is numerically zero (2-D rings)."""
    k = len(pts)
    if k < 3:
        return pts
    keep = []
    for i in range(k):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % k]
        v1 = b - a
        v2 = c - b
        cross = v1[0] * v2[1] - v1[1] * v2[0]
        if abs(cross) > angle_tol * max(np.linalg.norm(v1) * np.linalg.norm(v2),
                                        1e-30):
            keep.append(i)
    return pts[keep] if keep else pts[:1]


def _extreme_points(pts: np.ndarray) -> np.ndarray:
    """Vertices of the convex hull of a finite point set, any rank."""
    if len(pts) <= 2:
        return np.unique(pts, axis=0)
    center = pts.mean(axis=0)
    centered = pts - center
    u_, s, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(s > 1e-9 * max(s[0], 1.0)))
    if rank == 0:
        return pts[:1]
    proj = centered @ vt[:rank].T
    if rank == 1:
        ids = [int(np.argmin(proj[:, 0])), int(np.argmax(proj[:, 0]))]
        return pts[ids]
    try:
        hull = ConvexHull(proj)
    except QhullError:
        ids = [int(np.argmin(proj[:, 0])), int(np.argmax(proj[:, 0]))]
        return pts[ids]
    verts = hull.vertices
    if rank == 2:
        ring = _prune_collinear(proj[verts])
        # map pruned ring back to original rows by nearest projection match
        keep = []
        for q in ring:
            keep.append(int(verts[np.argmin(
                np.linalg.norm(proj[verts] - q, axis=1))]))
        return pts[keep]
    return pts[verts]


def flat_set(u: GridFunction, slope=None, offset: float = 0.0,
             tol: float | None = None) -> FlatSet:
    """Contact set ``D = { u <= l + tol }`` of a supporting affine ``l``.

    The affine function ``l(x) = slope . x + offset`` must support the sample
    (``u >= l - tol`` at every active node), otherwise
    ``ValueError("not a tangent plane")``.  ``contains_segment`` is set when
    the extremal points span at least ``3 h_grid``; an empty contact set
    (a strictly supporting plane) is allowed and carries no extremal points.
    """
    dom = u.domain
    p = (np.zeros(dom.n) if slope is None
         else np.asarray(slope, dtype=float).reshape(dom.n))
    mask = dom.active_mask()
    pos = dom.positions(mask)
    diff = u.values[mask] - (pos @ p + offset)
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(u.values[mask]))))
    worst = float(diff.min())
    if worst < -tol:
        at = pos[int(np.argmin(diff))]
        raise ValueError(
            f"not a tangent plane: u - l = {worst:.3g} < -tol at node {tuple(at)}")
    member = np.zeros(dom.shape, dtype=bool)
    member[mask] = diff <= tol
    indices = np.argwhere(member)
    if len(indices):
        ext = _extreme_points(dom.positions(member))
        diam = 0.0
        if len(ext) > 1:
            gaps = ext[:, None, :] - ext[None, :, :]
            diam = float(np.sqrt((gaps ** 2).sum(axis=2).max()))
        segment = diam >= 3.0 * dom.h_grid
    else:
        ext = np.empty((0, dom.n))
        segment = False
    return FlatSet(domain=dom, indices=indices, slope=p, offset=float(offset),
                   tol=float(tol), extremal_points=ext,
                   contains_segment=segment, t=u.t)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_section(path, sec: Section) -> None:
    """Write a section as CSV: scalar header, base/slope rows, index rows."""
    lines = ["n,h_grid,t,height,touches_boundary",
             ",".join([str(sec.domain.n), fmt17(sec.domain.h_grid),
                       fmt17(sec.t), fmt17(sec.height),
                       str(int(sec.touches_boundary))]),
             "base," + ",".join(fmt17(v) for v in sec.base_point),
             "slope," + ",".join(fmt17(v) for v in sec.slope),
             ",".join(f"i_{d + 1}" for d in range(sec.domain.n))]
    for row in sec.indices:
        lines.append(",".join(str(int(i)) for i in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def save_ellipsoid(path, ell: Ellipsoid) -> None:
    """Write an ellipsoid as CSV: center, shape matrix rows, volume."""
    lines = ["center," + ",".join(fmt17(v) for v in ell.center)]
    for row in np.atleast_2d(ell.shape_matrix):
        lines.append("shape_row," + ",".join(fmt17(v) for v in row))
    lines.append("volume," + fmt17(ell.volume))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
