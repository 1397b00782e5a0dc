"""Explicit monotone time stepping for the degenerate Monge-Ampere flow.

Forward Euler on the wide-stencil operator:

    u^{k+1}(x) = u^k(x) + dt F[u^k](x)      at interior nodes,
    u^{k+1}    = boundary data at t^{k+1}   on the band.

F is nondecreasing in every neighbor value, so the update map is monotone
as soon as dt |dF/du(x)| <= 1 at every node.  The operator evaluation
returns exactly that slope bound (in curvature units), and the automatic
step is

    dt = kappa h^2 / max_x slope(x),        kappa = 0.4,

capped by ``dt_max`` and truncated to land exactly on requested snapshot
times (the landing assigns t = t_snap, so a restarted run reproduces the
original step sequence bit for bit).  Monotone steps propagate ordering:
two ordered states stepped with a SHARED dt stay ordered, which is what
:func:`evolve_pair` provides.  Since F >= 0, interior values never
decrease along the flow; that invariant is checked at every snapshot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Domain, GridFunction
from .monge_ampere import OperatorConfig, ma_field

KAPPA_CFL = 0.4
DT_FLOOR = 1e-14


@dataclass
class EvolutionState:
    """A grid function advancing in time under a fixed operator config.

    ``boundary`` is a callable (points, t) -> values refreshing the band at
    every accepted step, or None to freeze the band at its current values.
    """

    u: GridFunction
    cfg: OperatorConfig
    boundary: Callable | None = None
    dt_max: float = math.inf
    kappa: float = KAPPA_CFL
    steps: int = 0

    @property
    def t(self) -> float:
        return self.u.t


@dataclass
class EvolutionResult:
    snapshots: list[GridFunction]
    state: EvolutionState
    n_steps: int
    t_final: float


def stable_dt(state: EvolutionState, fld=None) -> float:
    """kappa h^2 / max slope, the largest monotonicity-preserving step."""
    if fld is None or fld.slope is None:
        fld = ma_field(state.u, state.cfg, with_slope=True)
    dom = state.u.domain
    sig = float(np.nanmax(fld.slope)) if np.any(np.isfinite(fld.slope)) else 0.0
    if sig <= 0.0:
        return state.dt_max
    dt = state.kappa * dom.h_grid ** 2 / sig
    if not math.isfinite(dt) or dt < DT_FLOOR:
        raise ValueError(f"stiff state: stable step {dt:.3e} underflows "
                         f"(slope bound {sig:.3e})")
    return min(dt, state.dt_max)


def _apply_step(state: EvolutionState, fld, dt: float, t_new: float,
                band_pts: np.ndarray | None, band_mask) -> None:
    dom = state.u.domain
    inner = dom.interior_mask()
    vals = state.u.values
    if not np.all(np.isfinite(fld.values[inner])):
        bad = ~np.isfinite(fld.values[inner])
        where = dom.positions(inner)[bad][0]
        raise ValueError(f"non-finite operator value at node {tuple(where)}")
    vals[inner] += dt * fld.values[inner]
    if state.boundary is not None:
        bvals = np.asarray(state.boundary(band_pts, t_new), dtype=float)
        if not np.all(np.isfinite(bvals)):
            raise ValueError("non-finite boundary data at t = %r" % t_new)
        vals[band_mask] = bvals
    state.u.t = t_new
    state.steps += 1


def _prepare_band(state: EvolutionState):
    dom = state.u.domain
    band = dom.band_mask()
    pts = dom.positions(band) if state.boundary is not None else None
    return pts, band


def _check_nondecreasing(prev: np.ndarray, cur: np.ndarray, t: float) -> None:
    scale = max(1.0, float(np.max(np.abs(cur))))
    drop = float(np.min(cur - prev))
    if drop < -1e-12 * scale:
        raise RuntimeError(
            f"interior values decreased by {-drop:.3e} by t = {t}; "
            "the flow must be nondecreasing in time")


def evolve(state: EvolutionState, t_end: float,
           snapshot_times=()) -> EvolutionResult:
    """Advance to t_end, recording copies at the requested times.

    Snapshot times must lie in (t, t_end]; t_end itself is always recorded
    as the final snapshot.  The state re-binds to a private working copy, so
    the grid function passed in survives as the clean pre-flow sample.
    """
    t0 = state.t
    if t_end <= t0:
        raise ValueError(f"t_end = {t_end} is not ahead of t = {t0}")
    stops = sorted(set(float(s) for s in snapshot_times) | {float(t_end)})
    if stops[0] <= t0 or stops[-1] > t_end + 1e-12:
        raise ValueError("snapshot times must lie in (t, t_end]")
    state.u = state.u.copy()
    band_pts, band_mask = _prepare_band(state)
    snaps: list[GridFunction] = []
    prev_inner = state.u.interior_values().copy()
    inner_mask = state.u.domain.interior_mask()
    for stop in stops:
        while state.t < stop:
            fld = ma_field(state.u, state.cfg, with_slope=True)
            dt = stable_dt(state, fld)
            rem = stop - state.t
            if dt >= rem * (1.0 - 1e-12):
                _apply_step(state, fld, rem, stop, band_pts, band_mask)
            else:
                _apply_step(state, fld, dt, state.t + dt, band_pts, band_mask)
        cur = state.u.values[inner_mask]
        _check_nondecreasing(prev_inner, cur, state.t)
        prev_inner = cur.copy()
        snaps.append(state.u.copy())
    return EvolutionResult(snapshots=snaps, state=state, n_steps=state.steps,
                           t_final=state.t)


def evolve_pair(state_a: EvolutionState, state_b: EvolutionState,
                t_end: float) -> tuple[GridFunction, GridFunction]:
    """Advance two states to t_end with a shared step size.

    The shared dt is the smaller of the two stable steps, so both updates
    stay monotone and discrete comparison applies to the pair.
    """
    if state_a.u.domain.shape != state_b.u.domain.shape or \
            abs(state_a.u.t - state_b.u.t) > 1e-15:
        raise ValueError("paired evolution needs matching lattices and times")
    state_a.u = state_a.u.copy()
    state_b.u = state_b.u.copy()
    band_a = _prepare_band(state_a)
    band_b = _prepare_band(state_b)
    while state_a.t < t_end:
        fld_a = ma_field(state_a.u, state_a.cfg, with_slope=True)
        fld_b = ma_field(state_b.u, state_b.cfg, with_slope=True)
        dt = min(stable_dt(state_a, fld_a), stable_dt(state_b, fld_b))
        rem = t_end - state_a.t
        if dt >= rem * (1.0 - 1e-12):
            dt, t_new = rem, t_end
        else:
            t_new = state_a.t + dt
        _apply_step(state_a, fld_a, dt, t_new, *band_a)
        _apply_step(state_b, fld_b, dt, t_new, *band_b)
    return state_a.u, state_b.u


# ---------------------------------------------------------------------------
# ordering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    ordered: bool
    max_violation: float          # max over nodes of (lower - upper)
    where: tuple[float, ...] | None
    tol: float

    def __str__(self):
        if self.ordered:
            return f"ordered (max violation {self.max_violation:.3e} <= {self.tol:.1e})"
        return (f"NOT ordered: lower exceeds upper by {self.max_violation:.3e} "
                f"at {self.where}")


def comparison_check(lower: GridFunction, upper: GridFunction,
                     tol: float = 1e-10) -> ComparisonReport:
    """Check lower <= upper + tol on all non-exterior nodes."""
    if lower.domain.shape != upper.domain.shape:
        raise ValueError("comparison needs a common lattice")
    mask = lower.domain.active_mask()
    diff = lower.values[mask] - upper.values[mask]
    k = int(np.argmax(diff))
    worst = float(diff[k])
    where = tuple(lower.domain.positions(mask)[k]) if worst > tol else None
    return ComparisonReport(ordered=bool(worst <= tol), max_violation=worst,
                            where=where, tol=tol)


# ---------------------------------------------------------------------------
# the scaling symmetry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingMap:
    """v(x, t) = u(A x, m t) / h with m = (det A)^(2p) / h^(np-1).

    If u solves u_t = (det D^2 u)^p then so does v: each second derivative
    gains A twice and the value loses h once, so det D^2 v picks up
    (det A)^2 / h^n per power and v_t picks up m / h; the stated m balances
    the two sides.
    """

    A: np.ndarray
    h: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, float)))
        if self.h <= 0:
            raise ValueError("scaling needs h > 0")
        if abs(np.linalg.det(self.A)) < 1e-300:
            raise ValueError("scaling needs an invertible A")

    def m(self, n: int) -> float:
        return abs(np.linalg.det(self.A)) ** (2.0 * self.p) \
            / self.h ** (n * self.p - 1.0)


def rescale(u: GridFunction, mapping: ScalingMap,
            target: Domain) -> GridFunction:
    """Pull a snapshot back through the scaling map onto a target lattice.

    Values are multilinearly interpolated at A x; the timestamp becomes
    u.t / m.  Raises if any target node needs data outside the source.
    """
    n = u.domain.n
    if mapping.A.shape != (n, n):
        raise ValueError(f"A must be {n}x{n}")
    mask = target.active_mask()
    pts = target.positions(mask)
    src = pts @ mapping.A.T
    vals = u.interpolate(src) / mapping.h
    bad = ~np.isfinite(vals)
    if bad.any():
        raise ValueError(
            f"rescaling map leaves the source domain at node {tuple(pts[bad][0])}")
    out = np.full(target.shape, np.nan)
    out[mask] = vals
    return GridFunction(target, out, t=u.t / mapping.m(n))
