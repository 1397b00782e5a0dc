"""Sections, inscribed ellipsoids, balancedness, conjugates, flat sets."""

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from pma_lab import build_domain, discrete_convexity_check, sample
from pma_lab.geometry import (
    BalancednessCertificate,
    Ellipsoid,
    balancedness,
    centered_section,
    flat_set,
    john_ellipsoid,
    legendre,
    save_ellipsoid,
    save_section,
    section_at,
    unit_ball_volume,
)


def box_domain(half, h, n=2):
    return build_domain({"kind": "box", "lower": [-half] * n,
                         "upper": [half] * n}, h)


def paraboloid(x, t):
    return 0.5 * np.sum(x ** 2, axis=1)


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------

def test_section_of_paraboloid_is_lattice_ball():
    dom = box_domain(1.5, 0.25)
    u = sample(dom, paraboloid)
    sec = section_at(u, [0.0, 0.0], 0.5)
    # {y : half |y|^2 <= half} = closed unit ball; count its 0.25-lattice nodes
    assert len(sec) == 49
    pos = sec.positions
    assert np.all(np.sum(pos ** 2, axis=1) <= 1.0 + 1e-8)
    assert np.allclose(sec.center_of_mass, 0.0)
    assert not sec.touches_boundary


def test_section_membership_and_mean_invariants():
    dom = box_domain(1.5, 0.1)
    u = sample(dom, lambda x, t: 0.5 * (2 * x[:, 0] ** 2 + x[:, 1] ** 2))
    slope = np.array([0.3, -0.2])
    sec = section_at(u, [0.0, 0.0], 0.2, slope=slope)
    pos = sec.positions
    vals = u.values[tuple(sec.indices.T)]
    assert np.all(vals <= u.value_at([0, 0]) + pos @ slope + 0.2 + 1e-8)
    assert np.allclose(sec.center_of_mass, pos.mean(axis=0))


def test_section_one_dimensional_cone():
    dom = build_domain({"kind": "box", "lower": [-1.0], "upper": [1.0]}, 0.1)
    u = sample(dom, lambda x, t: np.abs(x[:, 0]))
    sec = section_at(u, [0.0], 0.3)
    assert len(sec) == 7
    assert np.all(np.abs(sec.positions[:, 0]) <= 0.3 + 1e-9)


def test_section_nesting_in_height():
    dom = box_domain(1.5, 0.1)
    u = sample(dom, lambda x, t: 0.5 * np.sum(x ** 2, axis=1) + 0.2 * x[:, 0])
    slope = np.array([0.1, 0.05])
    small = section_at(u, [0.0, 0.0], 0.02, slope=slope)
    big = section_at(u, [0.0, 0.0], 0.08, slope=slope)
    small_set = {tuple(i) for i in small.indices}
    big_set = {tuple(i) for i in big.indices}
    assert small_set <= big_set


def test_section_boundary_flag_and_bad_base():
    dom = box_domain(1.0, 0.25)
    u = sample(dom, paraboloid)
    wide = section_at(u, [0.0, 0.0], 5.0)
    assert wide.touches_boundary
    with pytest.raises(ValueError, match="not an active lattice node"):
        section_at(u, [7.0, 0.0], 0.1)
    with pytest.raises(ValueError, match="height must be positive"):
        section_at(u, [0.0, 0.0], -0.1)


def test_centered_section_tilted_paraboloid():
    # u = half|x|^2 + x1: the sub-level set of u - p.y is a disk centered at
    # p - e1, so the centered slope is exactly e1 and the mean returns to 0
    dom = box_domain(1.5, 0.25)
    u = sample(dom, lambda x, t: 0.5 * np.sum(x ** 2, axis=1) + x[:, 0])
    sec = centered_section(u, [0.0, 0.0], 0.3)
    assert np.linalg.norm(sec.center_of_mass) <= 2 * dom.h_grid
    assert np.allclose(sec.slope, [1.0, 0.0], atol=0.05)


def test_centered_section_symmetric_flat_cone():
    dom = box_domain(1.5, 0.1)
    u = sample(dom, lambda x, t: np.maximum(0.0, np.linalg.norm(x, axis=1) - 0.5))
    sec = centered_section(u, [0.0, 0.0], 0.2)
    assert np.linalg.norm(sec.slope) <= 0.1
    assert np.linalg.norm(sec.center_of_mass) <= 2 * dom.h_grid


def test_centered_section_asymmetric_needs_iterations():
    # one branch 160x stiffer than the other: the gradient start (slope 0)
    # leaves the center of mass far off, so the tilt must be found iteratively
    dom = box_domain(2.0, 0.05)
    u = sample(dom, lambda x, t: np.where(x[:, 0] < 0, 0.05 * x[:, 0] ** 2,
                                          8.0 * x[:, 0] ** 2)
               + 0.5 * x[:, 1] ** 2)
    start = section_at(u, [0.0, 0.0], 0.2)
    assert np.linalg.norm(start.center_of_mass) > 2 * dom.h_grid
    sec = centered_section(u, [0.0, 0.0], 0.2)
    assert np.linalg.norm(sec.center_of_mass) <= 2 * dom.h_grid
    assert sec.slope[0] > 0.1  # tilts toward the stiff branch
    with pytest.raises(ValueError, match="centering failed"):
        centered_section(u, [0.0, 0.0], 0.2, max_iter=1)


def test_centered_section_boundary_refusal():
    dom = box_domain(1.0, 0.25)
    u = sample(dom, paraboloid)
    with pytest.raises(ValueError, match="touches the boundary band"):
        centered_section(u, [0.0, 0.0], 5.0)


# ---------------------------------------------------------------------------
# inscribed ellipsoids
# ---------------------------------------------------------------------------

def test_john_square_gives_unit_disk():
    g = np.linspace(-1, 1, 9)
    pts = np.array([[a, b] for a in g for b in g])
    ell = john_ellipsoid(pts, [0.0, 0.0])
    assert np.allclose(ell.shape_matrix, np.eye(2), atol=1e-7)
    assert abs(ell.volume - np.pi) <= 1e-6
    ell.validate()


def test_john_lattice_ball_stays_near_unit_ball():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.0}, 0.1)
    pts = dom.positions(dom.interior_mask())
    ell = john_ellipsoid(pts, [0.0, 0.0])
    ev = np.linalg.eigvalsh(ell.shape_matrix)
    # hull of interior lattice nodes is the ball shaved by at most ~2h
    assert ev[0] >= (1 - 2 * dom.h_grid) ** 2
    assert ev[1] <= 1.0 + 1e-9


def test_john_triangle_matches_analytic_and_brute_force():
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    center = np.array([1.0, 1.0])  # centroid
    ell = john_ellipsoid(tri, center)
    # constraints q11 <= 1, q22 <= 1, q11 + q22 + 2 q12 <= 1 maximize det at
    # M = [[1, -1/2], [-1/2, 1]]
    assert np.allclose(ell.shape_matrix, [[1, -0.5], [-0.5, 1]], atol=1e-6)
    # brute-force grid search over 2x2 SPD matrices under the same facets
    hull = ConvexHull(tri)
    a = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    z = a / (b - a @ center)[:, None]
    best = 0.0
    for q11 in np.linspace(0.5, 1.0, 21):
        for q22 in np.linspace(0.5, 1.0, 21):
            for q12 in np.linspace(-0.8, 0.0, 33):
                m = np.array([[q11, q12], [q12, q22]])
                if np.linalg.eigvalsh(m)[0] <= 0:
                    continue
                if np.max(np.einsum("ij,jk,ik->i", z, m, z)) > 1.0:
                    continue
                best = max(best, np.pi * np.sqrt(np.linalg.det(m)))
    assert ell.volume >= best - 0.05 * best
    assert abs(ell.volume - np.pi * np.sqrt(0.75)) <= 1e-6


def test_john_perturbation_oracle():
    # no feasible candidate from 1000 random SPD perturbations beats the
    # returned ellipsoid by more than 1% in volume
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    center = np.array([1.0, 1.0])
    ell = john_ellipsoid(tri, center)
    hull = ConvexHull(tri)
    a = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    z = a / (b - a @ center)[:, None]
    rng = np.random.default_rng(2470)
    best = 0.0
    for _ in range(1000):
        w = 0.15 * rng.normal(size=(2, 2))
        m = ell.shape_matrix + 0.5 * (w + w.T)
        if np.linalg.eigvalsh(m)[0] <= 0:
            continue
        m = m / np.max(np.einsum("ij,jk,ik->i", z, m, z))
        best = max(best, np.pi * np.sqrt(np.linalg.det(m)))
    assert best <= 1.01 * ell.volume


def test_john_affine_equivariance():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(40, 2))
    lin = np.array([[2.0, 0.7], [-0.3, 1.1]])
    c = pts.mean(axis=0)
    base = john_ellipsoid(pts, c)
    mapped = john_ellipsoid(pts @ lin.T, lin @ c)
    assert np.allclose(mapped.shape_matrix, lin @ base.shape_matrix @ lin.T,
                       atol=1e-9 * base.volume + 1e-9)
    assert np.isclose(mapped.volume, abs(np.linalg.det(lin)) * base.volume,
                      rtol=1e-9)


def test_john_degenerate_and_exterior_center():
    line = np.array([[t, 2 * t] for t in np.linspace(0, 1, 17)])
    with pytest.raises(ValueError, match="flat set, no interior ellipsoid"):
        john_ellipsoid(line, [0.5, 1.0])
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    with pytest.raises(ValueError, match="base point not interior"):
        john_ellipsoid(tri, [3.0, 3.0])
    with pytest.raises(ValueError, match="base point not interior"):
        john_ellipsoid(tri, [0.0, 0.0])  # a vertex is not interior


def test_ellipsoid_volume_invariant():
    ell = Ellipsoid.from_shape([0.0, 0.0], [[4.0, 0.0], [0.0, 1.0]])
    assert np.isclose(ell.volume, 2 * np.pi, rtol=1e-12)
    with pytest.raises(ValueError, match="positive definite"):
        Ellipsoid.from_shape([0.0], [[-1.0]])
    bad = Ellipsoid(center=ell.center, shape_matrix=ell.shape_matrix,
                    volume=ell.volume * 1.001)
    with pytest.raises(ValueError, match="volume"):
        bad.validate()
    assert np.isclose(unit_ball_volume(3), 4 * np.pi / 3, rtol=1e-14)


# ---------------------------------------------------------------------------
# balancedness
# ---------------------------------------------------------------------------

def test_balancedness_of_interval():
    pts = np.arange(-1.0, 3.0 + 1e-12, 0.5)
    cert = balancedness(pts, [0.0])
    # the largest centered interval inside [-1, 3] is [-1, 1]; mapping it to
    # B_1 leaves the far endpoint at distance 3
    assert np.isclose(cert.d, 3.0, rtol=1e-9)
    assert np.isclose(cert.map[0, 0], 1.0, rtol=1e-9)


def test_balancedness_of_lattice_ball_is_near_one():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.0}, 0.1)
    pts = dom.positions(dom.interior_mask())
    cert = balancedness(pts, [0.0, 0.0])
    assert 1.0 <= cert.d <= 1.0 + 2 * dom.h_grid


def test_balancedness_certificate_sandwich():
    rng = np.random.default_rng(31)
    pts = rng.normal(size=(60, 2)) @ np.array([[1.5, 0.4], [0.0, 0.7]])
    x0 = pts.mean(axis=0)
    cert = balancedness(pts, x0)
    norm = np.linalg.norm((pts - x0) @ cert.map.T, axis=1)
    assert norm.max() <= cert.d + 1e-9           # inside B_d
    assert cert.d >= 1.0
    # the inscribed ellipsoid maps onto B_1, so the hull reaches unit radius
    assert norm.max() >= 1.0 - 1e-9


def test_balancedness_base_point_not_interior():
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    with pytest.raises(ValueError, match="base point not interior"):
        balancedness(tri, [1.5, 0.0])  # midpoint of an edge


def test_balancedness_john_style_bound():
    # about the barycenter, d stays below n*n for convex node sets
    rng = np.random.default_rng(99)
    for _ in range(10):
        raw = rng.normal(size=(50, 2))
        lin = rng.normal(size=(2, 2)) + 1.5 * np.eye(2)
        pts = raw @ lin.T
        hull_pts = pts[ConvexHull(pts).vertices]
        cert = balancedness(pts, hull_pts.mean(axis=0))
        assert cert.d <= 4.0


def test_section_height_bound_via_balancedness():
    # nonnegative convex u with u(x0) = 0: over a centered section of height
    # h the function stays below d*h up to grid resolution
    dom = box_domain(2.0, 0.05)

    def asym(x, t):
        x1, x2 = x[:, 0], x[:, 1]
        return np.where(x1 < 0, 0.5 * x1 ** 2, 2.0 * x1 ** 2) + 0.5 * x2 ** 2

    u = sample(dom, asym)
    sec = centered_section(u, [0.0, 0.0], 0.3)
    cert = balancedness(sec, [0.0, 0.0])
    max_u = float(np.max(u.values[tuple(sec.indices.T)]))
    assert max_u <= cert.d * 0.3 + 2 * dom.h_grid


def test_centered_section_balancedness_regression():
    # frozen empirical constant: centered sections of smooth convex samples
    # in the plane stay well inside d <= 1.5 about their center of mass
    dom = box_domain(2.0, 0.05)
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(6):
        a = rng.normal(size=(2, 2))
        m = a @ a.T + 0.3 * np.eye(2)
        b = rng.uniform(-0.3, 0.3, 2)
        u = sample(dom, lambda x, t: 0.5 * np.einsum("ni,ij,nj->n", x, m, x)
                   + x @ b)
        sec = centered_section(u, [0.0, 0.0], 0.25)
        cert = balancedness(sec, sec.center_of_mass)
        worst = max(worst, cert.d)
    assert worst <= 1.5


# ---------------------------------------------------------------------------
# Legendre conjugate
# ---------------------------------------------------------------------------

def test_legendre_paraboloid_self_dual():
    dom = box_domain(1.3, 0.1)
    u = sample(dom, paraboloid)
    lt = legendre(u)
    dd = lt.dual.domain
    mask = dd.interior_mask()
    xi = dd.positions(mask)
    err = np.max(np.abs(lt.dual.values[mask] - 0.5 * np.sum(xi ** 2, axis=1)))
    assert err <= dom.h_grid ** 2  # nearest-node quantization only
    # maximizers sit at the gradient: x = xi up to one lattice step (argmax
    # rows follow the active dual nodes; select the interior ones)
    sel = dd.classes[dd.active_mask()] == 2
    assert np.max(np.abs(lt.argmax[sel] - xi)) <= dom.h_grid / 2 + 1e-12


def test_legendre_cone_is_flat_on_unit_interval():
    dom = build_domain({"kind": "box", "lower": [-1.0], "upper": [1.0]}, 0.05)
    u = sample(dom, lambda x, t: np.abs(x[:, 0]))
    lt = legendre(u)
    dd = lt.dual.domain
    mask = dd.active_mask()
    xi = dd.positions(mask)[:, 0]
    core = np.abs(xi) <= 1.0
    assert np.max(np.abs(lt.dual.values[mask][core])) <= 1e-12


def test_legendre_double_transform_recovers_convex_sample():
    dom = build_domain({"kind": "box", "lower": [-1.0], "upper": [1.0]}, 0.02)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        a = rng.uniform(0.3, 2.0)
        b = rng.uniform(-0.5, 0.5)
        k1, k2 = rng.uniform(-0.6, 0.6, 2)
        u = sample(dom, lambda x, t: 0.5 * a * x[:, 0] ** 2 + b * x[:, 0]
                   + 0.4 * np.abs(x[:, 0] - k1) + 0.3 * np.abs(x[:, 0] - k2))
        back = legendre(legendre(u).dual)
        pts = dom.positions(dom.interior_mask())
        vals = back.dual.interpolate(pts)
        ok = np.isfinite(vals)
        assert ok.sum() > 0.8 * len(pts)
        worst = max(worst, float(np.max(np.abs(
            vals[ok] - u.values[dom.interior_mask()][ok]))))
    assert worst <= 0.1  # a few dual lattice steps at default resolution


def test_legendre_order_reversing_and_convex():
    dom = build_domain({"kind": "box", "lower": [-1.0], "upper": [1.0]}, 0.05)
    lo = sample(dom, lambda x, t: 0.5 * x[:, 0] ** 2)
    hi = sample(dom, lambda x, t: 0.5 * x[:, 0] ** 2 + 0.3)
    dual_dom = legendre(lo).dual.domain
    a = legendre(lo, dual_domain=dual_dom)
    b = legendre(hi, dual_domain=dual_dom)
    mask = dual_dom.active_mask()
    assert np.min(a.dual.values[mask] - b.dual.values[mask]) >= 0.3 - 1e-12
    assert discrete_convexity_check(a.dual).passed


def test_legendre_warns_when_dual_grid_truncates():
    dom = build_domain({"kind": "box", "lower": [-1.0], "upper": [1.0]}, 0.05)
    u = sample(dom, lambda x, t: x[:, 0] ** 2)  # gradients span ~[-2, 2]
    tight = build_domain({"kind": "box", "lower": [-0.5], "upper": [0.5]}, 0.05)
    with pytest.warns(UserWarning, match="smaller than the sampled gradient"):
        legendre(u, dual_domain=tight)


# ---------------------------------------------------------------------------
# flat sets
# ---------------------------------------------------------------------------

def test_flat_set_of_truncated_cone():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.3}, 0.1)
    u = sample(dom, lambda x, t: np.maximum(0.0,
                                            np.linalg.norm(x, axis=1) - 0.5))
    fs = flat_set(u)
    pos = fs.positions
    assert np.all(np.linalg.norm(pos, axis=1) <= 0.5 + 1e-9)
    radii = np.linalg.norm(fs.extremal_points, axis=1)
    assert np.all(radii >= 0.5 - dom.h_grid)
    assert fs.contains_segment


def test_flat_set_of_paraboloid_is_single_node():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.3}, 0.1)
    u = sample(dom, paraboloid)
    fs = flat_set(u)
    assert len(fs) == 1
    assert not fs.contains_segment
    assert np.allclose(fs.positions[0], 0.0, atol=1e-12)


def test_flat_set_of_crease_is_a_slab():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.3}, 0.1)
    u = sample(dom, lambda x, t: np.abs(x[:, 1]))
    fs = flat_set(u)
    assert np.all(np.abs(fs.positions[:, 1]) <= 1e-9)
    assert fs.contains_segment
    # extremal points are the two ends of the diameter segment
    assert len(fs.extremal_points) == 2
    assert np.max(np.abs(fs.extremal_points[:, 0])) >= 1.3 - dom.h_grid


def test_flat_set_rejects_cutting_plane():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.3}, 0.1)
    u = sample(dom, paraboloid)
    with pytest.raises(ValueError, match="not a tangent plane"):
        flat_set(u, offset=0.1)
    with pytest.raises(ValueError, match="not a tangent plane"):
        flat_set(sample(dom, lambda x, t: np.abs(x[:, 1])), slope=[1.0, 0.0])


def test_flat_set_strictly_below_plane_is_empty():
    dom = build_domain({"kind": "ball", "center": [0, 0], "radius": 1.3}, 0.1)
    u = sample(dom, paraboloid)
    fs = flat_set(u, offset=-0.5)
    assert len(fs) == 0
    assert not fs.contains_segment


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_section_and_ellipsoid_roundtrip_text(tmp_path):
    dom = box_domain(1.5, 0.25)
    u = sample(dom, paraboloid)
    sec = section_at(u, [0.0, 0.0], 0.5)
    p1 = tmp_path / "section.csv"
    save_section(p1, sec)
    lines = p1.read_text().strip().splitlines()
    assert lines[0] == "n,h_grid,t,height,touches_boundary"
    assert lines[1].split(",")[0] == "2"
    assert len(lines) == 5 + len(sec)

    ell = john_ellipsoid(np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]]),
                         [1.0, 1.0])
    p2 = tmp_path / "ellipsoid.csv"
    save_ellipsoid(p2, ell)
    rows = [r.split(",") for r in p2.read_text().strip().splitlines()]
    assert rows[0][0] == "center"
    got = np.array([[float(v) for v in rows[1][1:]],
                    [float(v) for v in rows[2][1:]]])
    assert np.allclose(got, ell.shape_matrix, rtol=0, atol=0)
    assert float(rows[3][1]) == pytest.approx(ell.volume, rel=1e-15)
