"""Lattice domains and grid functions.

Everything downstream works on a uniform lattice of spacing ``h_grid``
covering the bounding box of a convex region, extended by the stencil
radius so that every stencil read from an interior node stays on the
lattice.  Nodes are classified as

* ``INTERIOR`` -- lattice nodes strictly inside the region (the open set);
  the unknowns live here,
* ``BAND``     -- nodes outside the region but within Chebyshev distance
  ``stencil_radius`` (in lattice steps) of an interior node; Dirichlet
  data lives here,
* ``EXTERIOR`` -- everything else; exterior nodes carry no values (NaN).

A :class:`GridFunction` stores one float per non-exterior node at a fixed
time.  File round-trips use ``%.17g`` formatting so float64 values survive
save/load bit-exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, Iterable

import numpy as np

EXTERIOR, BAND, INTERIOR = 0, 1, 2

_CLASS_NAMES = {EXTERIOR: "exterior", BAND: "band", INTERIOR: "interior"}
_CLASS_CODES = {v: k for k, v in _CLASS_NAMES.items()}


def fmt17(x: float) -> str:
    """Shortest decimal form that round-trips a float64 exactly."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# region descriptions
# ---------------------------------------------------------------------------

def _as_vec(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.size != n:
        raise ValueError(f"expected a length-{n} vector, got {v!r}")
    return a


def _region_dim(desc: dict) -> int:
    kind = desc.get("kind")
    if kind == "ball":
        return np.asarray(desc["center"], dtype=float).size
    if kind == "box":
        return np.asarray(desc["lower"], dtype=float).size
    if kind == "ellipsoid":
        return np.asarray(desc["center"], dtype=float).size
    if kind == "halfspaces":
        return np.asarray(desc["normals"], dtype=float).shape[1]
    if kind == "union":
        return _region_dim(desc["parts"][0])
    raise ValueError(f"unknown region kind {kind!r}")


def _region_bbox(desc: dict, n: int) -> tuple[np.ndarray, np.ndarray]:
    kind = desc["kind"]
    if kind == "ball":
        c = _as_vec(desc["center"], n)
        r = float(desc["radius"])
        return c - r, c + r
    if kind == "box":
        return _as_vec(desc["lower"], n), _as_vec(desc["upper"], n)
    if kind == "ellipsoid":
        c = _as_vec(desc["center"], n)
        M = np.asarray(desc["shape"], dtype=float)
        half = np.sqrt(np.maximum(np.diag(M), 0.0))
        return c - half, c + half
    if kind == "halfspaces":
        if "bbox" not in desc:
            raise ValueError("halfspace region needs an explicit 'bbox': (lower, upper)")
        lo, hi = desc["bbox"]
        return _as_vec(lo, n), _as_vec(hi, n)
    if kind == "union":
        los, his = zip(*(_region_bbox(p, n) for p in desc["parts"]))
        return np.min(los, axis=0), np.max(his, axis=0)
    raise ValueError(f"unknown region kind {kind!r}")


def region_membership(desc: dict, points: np.ndarray) -> np.ndarray:
    """Strict-inside test, vectorized over ``points`` of shape (N, n)."""
    kind = desc["kind"]
    pts = np.asarray(points, dtype=float)
    n = pts.shape[-1]
    if kind == "ball":
        c = _as_vec(desc["center"], n)
        r = float(desc["radius"])
        return np.einsum("...i,...i->...", pts - c, pts - c) < r * r
    if kind == "box":
        lo = _as_vec(desc["lower"], n)
        hi = _as_vec(desc["upper"], n)
        return np.all((pts > lo) & (pts < hi), axis=-1)
    if kind == "ellipsoid":
        c = _as_vec(desc["center"], n)
        Minv = np.linalg.inv(np.asarray(desc["shape"], dtype=float))
        d = pts - c
        return np.einsum("...i,ij,...j->...", d, Minv, d) < 1.0
    if kind == "halfspaces":
        A = np.asarray(desc["normals"], dtype=float)
        b = np.asarray(desc["offsets"], dtype=float).reshape(-1)
        return np.all(pts @ A.T < b, axis=-1)
    if kind == "union":
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for part in desc["parts"]:
            out |= region_membership(part, pts)
        return out
    raise ValueError(f"unknown region kind {kind!r}")


def boundary_distance(desc: dict, points: np.ndarray) -> np.ndarray:
    """Distance from inside points to the region boundary.

    Exact for balls, boxes and halfspace intersections; for ellipsoids a
    lower bound based on the shortest semi-axis is returned, which is all
    the flat-set probes need.  Union regions are not supported (they are
    rejected as nonconvex before any probe runs).
    """
    kind = desc["kind"]
    pts = np.asarray(points, dtype=float)
    n = pts.shape[-1]
    if kind == "ball":
        c = _as_vec(desc["center"], n)
        return float(desc["radius"]) - np.linalg.norm(pts - c, axis=-1)
    if kind == "box":
        lo = _as_vec(desc["lower"], n)
        hi = _as_vec(desc["upper"], n)
        return np.minimum((pts - lo).min(axis=-1), (hi - pts).min(axis=-1))
    if kind == "halfspaces":
        A = np.asarray(desc["normals"], dtype=float)
        b = np.asarray(desc["offsets"], dtype=float).reshape(-1)
        margins = (b - pts @ A.T) / np.linalg.norm(A, axis=1)
        return margins.min(axis=-1)
    if kind == "ellipsoid":
        c = _as_vec(desc["center"], n)
        M = np.asarray(desc["shape"], dtype=float)
        Minv = np.linalg.inv(M)
        d = pts - c
        q = np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", d, Minv, d), 0.0))
        rmin = math.sqrt(min(np.linalg.eigvalsh(M)))
        return (1.0 - q) * rmin
    raise ValueError(f"no boundary distance for region kind {kind!r}")


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """A classified uniform lattice over a convex region."""

    n: int
    h_grid: float
    origin: np.ndarray            # physical position of lattice index (0,..,0)
    shape: tuple[int, ...]
    classes: np.ndarray           # uint8 lattice array of EXTERIOR/BAND/INTERIOR
    description: dict
    stencil_radius: int
    # restored domains carry their axis coordinates verbatim so that node
    # positions survive a save/load cycle bit for bit
    axes_arrays: tuple | None = None

    def axes(self) -> list[np.ndarray]:
        if self.axes_arrays is not None:
            return [np.asarray(a) for a in self.axes_arrays]
        return [self.origin[i] + self.h_grid * np.arange(self.shape[i])
                for i in range(self.n)]

    def interior_mask(self) -> np.ndarray:
        return self.classes == INTERIOR

    def band_mask(self) -> np.ndarray:
        return self.classes == BAND

    def active_mask(self) -> np.ndarray:
        return self.classes != EXTERIOR

    def positions(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Physical coordinates of masked nodes, shape (N, n)."""
        if mask is None:
            mask = self.active_mask()
        idx = np.argwhere(mask)
        ax = self.axes()
        out = np.empty((len(idx), self.n))
        for d in range(self.n):
            out[:, d] = ax[d][idx[:, d]]
        return out

    def grids(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays (one per axis, lattice-shaped)."""
        return list(np.meshgrid(*self.axes(), indexing="ij", sparse=True))

    def index_of(self, point) -> tuple[int, ...]:
        """Lattice index of the node nearest to a physical point."""
        p = _as_vec(point, self.n)
        idx = np.rint((p - self.origin) / self.h_grid).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            raise ValueError(f"point {p} is outside the lattice")
        return tuple(int(i) for i in idx)

    def node_position(self, index) -> np.ndarray:
        ax = self.axes()
        return np.array([ax[d][int(i)] for d, i in enumerate(index)])

    def interior_count(self) -> int:
        return int(np.count_nonzero(self.classes == INTERIOR))


def _chebyshev_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation by the Chebyshev ball, done separably per axis."""
    out = mask.copy()
    for axis in range(mask.ndim):
        acc = out.copy()
        for step in range(1, radius + 1):
            shifted = np.zeros_like(out)
            src = [slice(None)] * mask.ndim
            dst = [slice(None)] * mask.ndim
            src[axis] = slice(step, None)
            dst[axis] = slice(None, -step)
            shifted[tuple(dst)] = out[tuple(src)]
            acc |= shifted
            shifted = np.zeros_like(out)
            src[axis] = slice(None, -step)
            dst[axis] = slice(step, None)
            shifted[tuple(dst)] = out[tuple(src)]
            acc |= shifted
        out = acc
    return out


def _check_segment_convexity(domain: Domain, n_pairs: int = 200) -> None:
    """Sampled check that the member set is convex.

    For random pairs of interior nodes, every lattice node within h of the
    connecting segment must be interior or band.  (Band is allowed: near the
    boundary the h-neighbourhood of a chord legitimately pokes just outside
    the region.)  Disconnected or genuinely nonconvex unions leave exterior
    nodes near such segments and are rejected.
    """
    interior_idx = np.argwhere(domain.interior_mask())
    if len(interior_idx) < 2:
        return
    h = domain.h_grid
    rng = np.random.default_rng(2470)
    shape = np.array(domain.shape)
    for _ in range(n_pairs):
        i, j = rng.integers(0, len(interior_idx), size=2)
        a = domain.origin + h * interior_idx[i]
        b = domain.origin + h * interior_idx[j]
        seg = b - a
        length = np.linalg.norm(seg)
        if length < h:
            continue
        m = int(length / (0.5 * h)) + 2
        ts = np.linspace(0.0, 1.0, m)
        samples = a + ts[:, None] * seg
        base = np.floor((samples - domain.origin) / h).astype(int)
        for off in product((0, 1), repeat=domain.n):
            corners = base + np.array(off)
            ok = np.all((corners >= 0) & (corners < shape), axis=1)
            corners = corners[ok]
            if corners.size == 0:
                continue
            pts = domain.origin + h * corners
            # distance from each candidate node to the segment [a, b]
            w = pts - a
            t = np.clip(w @ seg / (length * length), 0.0, 1.0)
            d = np.linalg.norm(w - t[:, None] * seg, axis=1)
            near = d <= h
            if not near.any():
                continue
            cls = domain.classes[tuple(corners[near].T)]
            bad = cls == EXTERIOR
            if bad.any():
                where = pts[near][bad][0]
                raise ValueError(
                    "nonconvex domain: lattice node at "
                    f"{tuple(round(v, 12) for v in where)} lies within h of a "
                    "segment between interior nodes but is exterior")


def build_domain(description: dict, h_grid: float, stencil_radius: int = 2,
                 check_convexity: bool = True) -> Domain:
    """Build a classified lattice for a convex region description.

    Raises ``ValueError("degenerate domain: ...")`` when the region is too
    small to contain a usable interior at this resolution, and
    ``ValueError("nonconvex domain: ...")`` when the sampled convexity check
    fails (e.g. for disconnected unions).
    """
    if h_grid <= 0:
        raise ValueError("h_grid must be positive")
    if stencil_radius < 1:
        raise ValueError("stencil_radius must be at least 1")
    n = _region_dim(description)
    lo, hi = _region_bbox(description, n)
    if np.any(hi <= lo):
        raise ValueError("degenerate domain: empty bounding box")
    pad = stencil_radius * h_grid
    origin = lo - pad
    counts = np.floor((hi - lo) / h_grid + 1e-9).astype(int) + 1 + 2 * stencil_radius
    shape = tuple(int(c) for c in counts)
    dom = Domain(n=n, h_grid=float(h_grid), origin=origin, shape=shape,
                 classes=np.zeros(shape, dtype=np.uint8),
                 description=description, stencil_radius=int(stencil_radius))
    pts = dom.positions(np.ones(shape, dtype=bool)).reshape(shape + (n,))
    member = region_membership(description, pts)
    if not member.any():
        raise ValueError("degenerate domain: no lattice node lies strictly inside")
    ext = np.argwhere(member)
    span = ext.max(axis=0) - ext.min(axis=0)
    if np.any(span < 1):
        raise ValueError(
            "degenerate domain: interior is a single lattice layer along axis "
            f"{int(np.argmin(span))}; refine h_grid or enlarge the region")
    near = _chebyshev_dilate(member, stencil_radius)
    classes = np.where(member, INTERIOR, np.where(near, BAND, EXTERIOR))
    dom = replace(dom, classes=classes.astype(np.uint8))
    if check_convexity:
        _check_segment_convexity(dom)
    return dom


# ---------------------------------------------------------------------------
# GridFunction
# ---------------------------------------------------------------------------

@dataclass
class GridFunction:
    """Node values on a Domain at a fixed time; NaN on exterior nodes."""

    domain: Domain
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValueError("values shape does not match the lattice")

    def validate(self) -> None:
        active = self.domain.active_mask()
        bad = ~np.isfinite(self.values[active])
        if bad.any():
            where = self.domain.positions(active)[bad][0]
            raise ValueError(f"non-finite value at node {tuple(where)}")

    def copy(self, values: np.ndarray | None = None,
             t: float | None = None) -> "GridFunction":
        return GridFunction(self.domain,
                            self.values.copy() if values is None else values,
                            self.t if t is None else t)

    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior_mask()]

    def value_at(self, point) -> float:
        return float(self.interpolate(np.asarray(point, dtype=float)[None, :])[0])

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation at physical points, shape (N, n).

        Returns NaN where any surrounding cell corner is exterior or the
        point leaves the lattice.
        """
        dom = self.domain
        pts = np.asarray(points, dtype=float)
        rel = (pts - dom.origin) / dom.h_grid
        base = np.floor(rel).astype(int)
        frac = rel - base
        # points sitting exactly on the last node of an axis still need a cell
        top = np.array(dom.shape) - 1
        at_top = base >= top
        base = np.where(at_top, top - 1, base)
        frac = np.where(at_top, 1.0, frac)
        out = np.zeros(len(pts))
        valid = np.all((base >= 0) & (base + 1 <= top), axis=1)
        out[~valid] = np.nan
        if valid.any():
            b = base[valid]
            f = frac[valid]
            acc = np.zeros(len(b))
            for off in product((0, 1), repeat=dom.n):
                w = np.ones(len(b))
                for ax, o in enumerate(off):
                    w = w * (f[:, ax] if o else 1.0 - f[:, ax])
                acc += w * self.values[tuple((b + np.array(off)).T)]
            out[valid] = acc
        return out

    def max_abs(self) -> float:
        return float(np.nanmax(np.abs(self.values)))


def sample(domain: Domain, f: Callable, t: float = 0.0) -> GridFunction:
    """Evaluate ``f(points, t)`` at all non-exterior nodes."""
    vals = np.full(domain.shape, np.nan)
    mask = domain.active_mask()
    pts = domain.positions(mask)
    vals[mask] = np.asarray(f(pts, t), dtype=float).reshape(-1)
    gf = GridFunction(domain, vals, t)
    gf.validate()
    return gf


def gradient_field(u: GridFunction) -> np.ndarray:
    """Central-difference gradient at interior nodes, shape lattice + (n,).

    NaN away from the interior.
    """
    dom = u.domain
    out = np.full(dom.shape + (dom.n,), np.nan)
    inner = dom.interior_mask()
    for ax in range(dom.n):
        plus = np.roll(u.values, -1, axis=ax)
        minus = np.roll(u.values, 1, axis=ax)
        g = (plus - minus) / (2.0 * dom.h_grid)
        out[..., ax][inner] = g[inner]
    return out


# ---------------------------------------------------------------------------
# directions and discrete convexity
# ---------------------------------------------------------------------------

def primitive_directions(n: int, width: int) -> list[tuple[int, ...]]:
    """Primitive integer vectors with Chebyshev norm <= width, up to sign."""
    dirs = []
    for v in product(range(-width, width + 1), repeat=n):
        if all(c == 0 for c in v):
            continue
        first = next(c for c in v if c != 0)
        if first < 0:
            continue  # keep one representative per +/- pair
        if math.gcd(*[abs(c) for c in v]) != 1:
            continue
        dirs.append(v)
    return dirs


def _shifted(values: np.ndarray, offset: Iterable[int]) -> np.ndarray:
    """values[idx + offset] with NaN padding outside the lattice."""
    out = np.full_like(values, np.nan)
    src = []
    dst = []
    for o in offset:
        if o > 0:
            src.append(slice(o, None))
            dst.append(slice(None, -o))
        elif o < 0:
            src.append(slice(None, o))
            dst.append(slice(-o, None))
        else:
            src.append(slice(None))
            dst.append(slice(None))
    out[tuple(dst)] = values[tuple(src)]
    return out


def second_difference(u: GridFunction, direction) -> np.ndarray:
    """Second difference per unit |e|^2 h^2 (curvature units) at interior nodes."""
    e = tuple(int(c) for c in direction)
    dom = u.domain
    if max(abs(c) for c in e) > dom.stencil_radius:
        raise ValueError(f"direction {e} exceeds the stencil radius "
                         f"{dom.stencil_radius}")
    e2 = sum(c * c for c in e)
    num = _shifted(u.values, e) + _shifted(u.values, tuple(-c for c in e)) \
        - 2.0 * u.values
    out = np.full(dom.shape, np.nan)
    inner = dom.interior_mask()
    out[inner] = num[inner] / (e2 * dom.h_grid ** 2)
    return out


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    min_curvature: float          # most negative second difference, curvature units
    worst_node: tuple[float, ...]
    worst_direction: tuple[int, ...]
    tolerance: float

    def __str__(self):
        verdict = "convex" if self.passed else "NOT convex"
        return (f"{verdict}: min directional curvature {self.min_curvature:.3e} "
                f"at {self.worst_node} along {self.worst_direction} "
                f"(tol {self.tolerance:.1e})")


def discrete_convexity_check(u: GridFunction,
                             directions: list | None = None,
                             tol: float | None = None) -> ConvexityReport:
    """Check all stencil second differences for negativity.

    The tolerance scales with the size of u so that exact convex data with
    roundoff noise passes.
    """
    dom = u.domain
    if directions is None:
        directions = primitive_directions(dom.n, dom.stencil_radius)
    if tol is None:
        scale = max(1.0, u.max_abs())
        tol = 1e-10 * scale
    worst = np.inf
    worst_node = None
    worst_dir = None
    for e in directions:
        d2 = second_difference(u, e)
        inner = dom.interior_mask()
        vals = d2[inner]
        if vals.size == 0:
            continue
        k = int(np.argmin(vals))
        if vals[k] < worst:
            worst = float(vals[k])
            worst_node = tuple(dom.positions(inner)[k])
            worst_dir = tuple(e)
    return ConvexityReport(passed=bool(worst >= -tol), min_curvature=worst,
                           worst_node=worst_node, worst_direction=worst_dir,
                           tolerance=tol)


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

@dataclass
class CoefficientField:
    """Spatio-temporal coefficient b(x, t) with pinch bounds 0 < lam <= Lam."""

    evaluator: Callable
    lam: float
    Lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= self.Lam):
            raise ValueError(
                f"coefficient bounds must satisfy 0 < lam <= Lam, "
                f"got lam={self.lam}, Lam={self.Lam}")

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        vals = np.asarray(self.evaluator(points, t), dtype=float)
        if vals.shape != points.shape[:-1]:
            vals = np.broadcast_to(vals, points.shape[:-1]).copy()
        return vals

    def check_bounds(self, vals: np.ndarray, where: str = "") -> None:
        slack = 1e-12 * max(1.0, self.Lam)
        if np.any(vals < self.lam - slack) or np.any(vals > self.Lam + slack):
            raise ValueError(f"coefficient leaves [lam, Lam] {where}".rstrip())

    @staticmethod
    def constant(c: float) -> "CoefficientField":
        return CoefficientField(evaluator=lambda pts, t: np.full(pts.shape[:-1], float(c)),
                                lam=float(c), Lam=float(c))


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def save_csv(u: GridFunction, path) -> None:
    """Write a node table: header with n, h_grid, t, then one row per
    non-exterior node with columns x_1..x_n, class, value."""
    dom = u.domain
    mask = dom.active_mask()
    pts = dom.positions(mask)
    cls = dom.classes[mask]
    vals = u.values[mask]
    with open(path, "w") as fh:
        fh.write("n,h_grid,t\n")
        fh.write(f"{dom.n},{fmt17(dom.h_grid)},{fmt17(u.t)}\n")
        cols = [f"x_{i+1}" for i in range(dom.n)]
        fh.write(",".join(cols + ["class", "value"]) + "\n")
        for p, c, v in zip(pts, cls, vals):
            coords = ",".join(fmt17(x) for x in p)
            fh.write(f"{coords},{_CLASS_NAMES[int(c)]},{fmt17(v)}\n")


def load_csv(path) -> GridFunction:
    """Rebuild a GridFunction (and its restored Domain) from save_csv output."""
    with open(path) as fh:
        head = fh.readline().strip().split(",")
        if head != ["n", "h_grid", "t"]:
            raise ValueError(f"unrecognized header {head} in {path}")
        n_s, h_s, t_s = fh.readline().strip().split(",")
        n, h, t = int(n_s), float(h_s), float(t_s)
        cols = fh.readline().strip().split(",")
        if cols != [f"x_{i+1}" for i in range(n)] + ["class", "value"]:
            raise ValueError(f"unrecognized column row {cols} in {path}")
        pts, cls, vals = [], [], []
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            pts.append([float(x) for x in parts[:n]])
            cls.append(_CLASS_CODES[parts[n]])
            vals.append(float(parts[n + 1]))
    pts = np.asarray(pts)
    lo = pts.min(axis=0)
    idx = np.rint((pts - lo) / h).astype(int)
    shape = tuple(int(m) for m in idx.max(axis=0) + 1)
    classes = np.zeros(shape, dtype=np.uint8)
    values = np.full(shape, np.nan)
    classes[tuple(idx.T)] = np.asarray(cls, dtype=np.uint8)
    values[tuple(idx.T)] = vals
    # keep the stored coordinates verbatim per axis, so positions (and with
    # them boundary data, hence restarted runs) are bit-identical; lattice
    # rows with no stored node get arithmetic fill (they are never queried)
    axes = []
    for d in range(n):
        ax = np.full(shape[d], np.nan)
        ax[idx[:, d]] = pts[:, d]
        hole = np.isnan(ax)
        ax[hole] = lo[d] + h * np.flatnonzero(hole)
        axes.append(ax)
    # the stencil radius is recoverable as the widest Chebyshev gap between a
    # band node and the interior set
    interior = classes == INTERIOR
    radius = 1
    while radius < 16:
        if np.all(~(classes == BAND) | _chebyshev_dilate(interior, radius)):
            break
        radius += 1
    dom = Domain(n=n, h_grid=h, origin=lo, shape=shape, classes=classes,
                 description={"kind": "restored", "source": str(path)},
                 stencil_radius=radius, axes_arrays=tuple(axes))
    return GridFunction(dom, values, t)
