import math

import numpy as np
import pytest

from pma_lab.evolution import (EvolutionState, ScalingMap, comparison_check,
                               evolve, evolve_pair, rescale, stable_dt)
from pma_lab.exact import quadratic_solution, cone_data
from pma_lab.grid import build_domain, load_csv, sample, save_csv
from pma_lab.monge_ampere import OperatorConfig


def ball(r=1.0, h=0.1, n=2):
    return build_domain({"kind": "ball", "center": [0.0] * n, "radius": r},
                        h_grid=h, stencil_radius=2)


def make_state(dom, solution, cfg, t0=0.0, frozen=False):
    u = sample(dom, solution, t=t0)
    boundary = None if frozen else (lambda pts, t: solution(pts, t))
    return EvolutionState(u=u, cfg=cfg, boundary=boundary)


def test_exact_on_quadratic_in_time():
    # u = |x|^2/2 + t solves the flow for b = 1 and every p; the scheme is
    # exact on it (frame differences reproduce the Hessian exactly and the
    # rate is constant), so errors stay at roundoff
    dom = ball(r=1.0, h=0.1)
    sol = quadratic_solution(np.eye(2), p=1.7)
    state = make_state(dom, sol, OperatorConfig(p=1.7))
    res = evolve(state, t_end=0.1)
    want = sample(dom, sol, t=0.1)
    err = np.nanmax(np.abs(res.snapshots[-1].values - want.values))
    assert err <= 1e-3
    assert err <= 1e-10  # in fact exact up to accumulated roundoff


def test_stable_dt_value():
    # identity Hessian, p = 1: slope bound 4 (axis frame), dt = 0.4 h^2/4
    dom = ball(r=1.0, h=0.1)
    sol = quadratic_solution(np.eye(2), p=1.0)
    state = make_state(dom, sol, OperatorConfig(p=1.0))
    assert stable_dt(state) == pytest.approx(0.1 * 0.1 ** 2, rel=1e-12)


def test_snapshots_land_exactly():
    dom = ball(r=0.8, h=0.1)
    sol = quadratic_solution(np.eye(2), p=1.0)
    state = make_state(dom, sol, OperatorConfig(p=1.0))
    times = [0.0123, 0.02, 0.031]
    res = evolve(state, t_end=0.031, snapshot_times=times)
    assert [s.t for s in res.snapshots] == times
    assert res.t_final == 0.031


def test_restart_is_bit_exact(tmp_path):
    dom = ball(r=0.8, h=0.1)
    sol = quadratic_solution(np.array([[1.4, 0.3], [0.3, 0.9]]), p=1.2)
    cfg = OperatorConfig(p=1.2)

    one = make_state(dom, sol, cfg)
    full = evolve(one, t_end=0.02, snapshot_times=[0.011, 0.02])

    two = make_state(dom, sol, cfg)
    evolve(two, t_end=0.011)
    path = tmp_path / "mid.csv"
    save_csv(two.u, path)
    mid = load_csv(path)
    resumed = EvolutionState(u=mid, cfg=cfg,
                             boundary=lambda pts, t: sol(pts, t))
    res2 = evolve(resumed, t_end=0.02)

    a = full.snapshots[-1]
    b = res2.snapshots[-1]
    assert a.t == b.t
    # same lattice content node-for-node, bit for bit
    mask = dom.active_mask()
    pts = dom.positions(mask)
    idx = np.rint((pts - b.domain.origin) / b.domain.h_grid).astype(int)
    assert np.array_equal(a.values[mask], b.values[tuple(idx.T)])


def test_interior_values_nondecrease():
    dom = ball(r=0.8, h=0.1)
    state = make_state(dom, cone_data(1.0), OperatorConfig(p=1.0), frozen=True)
    res = evolve(state, t_end=0.01, snapshot_times=[0.002, 0.01])
    v0 = sample(dom, cone_data(1.0)).values
    inner = dom.interior_mask()
    assert np.all(res.snapshots[0].values[inner] >= v0[inner] - 1e-15)
    assert np.all(res.snapshots[1].values[inner]
                  >= res.snapshots[0].values[inner] - 1e-15)


def test_evolve_validates_window():
    dom = ball(r=0.8, h=0.2)
    state = make_state(dom, quadratic_solution(np.eye(2), p=1.0),
                       OperatorConfig(p=1.0))
    with pytest.raises(ValueError, match="not ahead"):
        evolve(state, t_end=-1.0)
    with pytest.raises(ValueError, match="snapshot times"):
        evolve(state, t_end=0.1, snapshot_times=[0.2])


def test_stiff_state_detected():
    dom = ball(r=0.8, h=0.1)
    state = make_state(dom, cone_data(1e12), OperatorConfig(p=1.0),
                       frozen=True)
    with pytest.raises(ValueError, match="stiff state"):
        evolve(state, t_end=0.01)


def test_pair_stays_ordered():
    dom = ball(r=1.0, h=0.1)
    low = quadratic_solution(np.eye(2), p=1.0)
    up = quadratic_solution(np.array([[1.3, 0.2], [0.2, 1.1]]), p=1.0,
                            const=0.25)
    cfg = OperatorConfig(p=1.0)
    sa = make_state(dom, low, cfg)
    sb = make_state(dom, up, cfg)
    assert comparison_check(sa.u, sb.u).ordered
    ua, ub = evolve_pair(sa, sb, t_end=0.05)
    rep = comparison_check(ua, ub, tol=1e-10)
    assert rep.ordered, str(rep)


def test_pair_requires_matching_lattice():
    cfg = OperatorConfig(p=1.0)
    sa = make_state(ball(r=1.0, h=0.1), quadratic_solution(np.eye(2), p=1.0), cfg)
    sb = make_state(ball(r=1.0, h=0.2), quadratic_solution(np.eye(2), p=1.0), cfg)
    with pytest.raises(ValueError, match="matching lattices"):
        evolve_pair(sa, sb, t_end=0.01)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def test_scaling_factor_example():
    # A = 2 Id, h = 4, n = 2, p = 1: m = (det A)^2 / h = 16/4 = 4
    sm = ScalingMap(A=2.0 * np.eye(2), h=4.0, p=1.0)
    assert sm.m(2) == pytest.approx(4.0, rel=1e-14)


def test_rescale_affine_exact_and_quadratic_close():
    dom = ball(r=1.3, h=0.05)
    target = ball(r=0.3, h=0.05)
    sm = ScalingMap(A=2.0 * np.eye(2), h=4.0, p=1.0)
    aff = sample(dom, lambda pts, t: 0.2 * pts[:, 0] - pts[:, 1] + 0.3, t=0.0)
    got = rescale(aff, sm, target)
    want = sample(target, lambda pts, t: (0.4 * pts[:, 0] - 2 * pts[:, 1] + 0.3) / 4.0)
    mask = target.active_mask()
    assert np.allclose(got.values[mask], want.values[mask], atol=1e-13)

    quad = sample(dom, lambda pts, t: 0.5 * (pts ** 2).sum(axis=1), t=0.08)
    got_q = rescale(quad, sm, target)
    assert got_q.t == pytest.approx(0.02, rel=1e-14)  # t/m with m = 4
    want_q = sample(target, lambda pts, t: 0.5 * (pts ** 2).sum(axis=1))
    err = np.abs(got_q.values[mask] - want_q.values[mask]).max()
    assert err <= 4.0 * dom.h_grid ** 2  # multilinear interpolation error


def test_rescale_preserves_ordering():
    dom = ball(r=1.3, h=0.05)
    target = ball(r=0.3, h=0.05)
    sm = ScalingMap(A=2.0 * np.eye(2), h=1.5, p=2.0)
    rng = np.random.default_rng(9)
    base = sample(dom, lambda pts, t: 0.5 * (pts ** 2).sum(axis=1))
    upper = base.copy()
    upper.values = upper.values + rng.uniform(0.0, 0.1, size=base.values.shape)
    ra = rescale(base, sm, target)
    rb = rescale(upper, sm, target)
    assert comparison_check(ra, rb, tol=1e-12).ordered


def test_rescale_rejects_escaping_map():
    dom = ball(r=1.0, h=0.1)
    target = ball(r=0.9, h=0.1)
    sm = ScalingMap(A=2.0 * np.eye(2), h=1.0, p=1.0)
    u = sample(dom, lambda pts, t: (pts ** 2).sum(axis=1))
    with pytest.raises(ValueError, match="leaves the source domain"):
        rescale(u, sm, target)

def test_initial_sample_survives_evolve():
    # the state advances a private copy: callers keep the pre-flow sample
    # for separation and dichotomy probes against the initial data
    dom = ball(r=1.0, h=0.1)
    sol = quadratic_solution(np.eye(2), p=1.0)
    u0 = sample(dom, sol, t=0.0)
    before = u0.values.copy()
    state = EvolutionState(u=u0, cfg=OperatorConfig(p=1.0),
                           boundary=lambda pts, t: sol(pts, t))
    res = evolve(state, t_end=0.05)
    assert u0.t == 0.0
    assert np.array_equal(u0.values, before, equal_nan=True)
    assert res.state.u is not u0
    assert res.state.u.t == 0.05


def test_initial_samples_survive_evolve_pair():
    dom = ball(r=1.0, h=0.1)
    lo = sample(dom, quadratic_solution(np.eye(2), p=1.0), t=0.0)
    hi = lo.copy(values=lo.values + 0.1)
    before = lo.values.copy()
    evolve_pair(EvolutionState(u=lo, cfg=OperatorConfig(p=1.0), boundary=None),
                EvolutionState(u=hi, cfg=OperatorConfig(p=1.0), boundary=None),
                t_end=0.02)
    assert lo.t == 0.0 and hi.t == 0.0
    assert np.array_equal(lo.values, before, equal_nan=True)


def test_degenerate_fringe_step_stays_bounded_for_p_below_one():
    # flat-disk data, p < 1: at the erosion fringe one clamped curvature is
    # tiny but positive and the raw sensitivity det^(p-1) diverges; the
    # floored slope bound must keep dt workable instead of underflowing
    from pma_lab.exact import flat_disk_data

    h = 0.05
    dom = build_domain({"kind": "box", "lower": [-1.0, -1.0],
                        "upper": [1.0, 1.0]}, h_grid=h, stencil_radius=2)
    u0 = sample(dom, flat_disk_data(radius=0.4, slope=1.0).fn, t=0.0)
    state = EvolutionState(u=u0, cfg=OperatorConfig(p=0.4), boundary=None)
    res = evolve(state, t_end=0.01)
    # bounded step count certifies the dt floor held well above underflow
    assert res.state.steps < 50_000
    ctr = dom.index_of([0.0, 0.0])
    assert res.snapshots[-1].values[ctr] > 0.0

