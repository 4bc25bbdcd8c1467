"""Stationary problem, Newton solver, and the two-sided uniqueness sweep.

For mass m <= 8*pi the only radial stationary profile is the linear one
W = m*xi (constant density m/pi).  The sweep squeezes a candidate W
between the concave and convex barrier families at log-spaced parameters,
mirroring the open-closed continuation argument with explicit separation
margins at every sampled parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import radial
from .radial import Grid, MassProfile, derivative, second_derivative_interior
from .barriers import (SuperBarrier, SubBarrier, default_derivative_bound,
                       find_dominating_super, find_dominated_sub,
                       separation_margin)


@dataclass(frozen=True)
class NewtonResult:
    profile: MassProfile
    converged: bool
    iterations: int
    residual_norms: tuple
    distances: tuple  # sup |W_k - m*xi| per accepted iterate
    distance_to_linear: float


@dataclass(frozen=True)
class SweepReport:
    super_parameters: np.ndarray
    super_margins: np.ndarray
    sub_parameters: np.ndarray
    sub_margins: np.ndarray
    conclusion: str  # "sandwiched" or "violated"
    violated_at: tuple | None  # (side, parameter, node)
    final_gap: float  # measured sup |W - m*xi|
    family_gap_bound: float  # barrier-family truncation bound at the extremes


@dataclass(frozen=True)
class LongtimeReport:
    times: np.ndarray
    density_sup_distance: np.ndarray
    potential_sup: np.ndarray
    decay_rate: float


def stationary_residual(W: MassProfile, m: float | None = None) -> np.ndarray:
    """Q applied nodewise at interior nodes via the solver's stencils."""
    m = W.total_mass if m is None else float(m)
    return _residual_arrays(W.values, W.grid.nodes, m)


def _jacobian_banded(w, xi, m):
    """Banded Jacobian of the interior residual map (interior unknowns only)."""
    n = xi.size - 1
    hm = xi[1:-1] - xi[:-2]
    hp = xi[2:] - xi[1:-1]
    # first-derivative coefficients
    cA1 = -hp / (hm * (hm + hp))
    cB1 = (hp - hm) / (hm * hp)
    cC1 = hm / (hp * (hm + hp))
    # second-derivative coefficients
    denom = hm * hp * (hm + hp)
    cA2 = 2.0 * hp / denom
    cB2 = -2.0 * (hm + hp) / denom
    cC2 = 2.0 * hm / denom
    d1 = cA1 * w[:-2] + cB1 * w[1:-1] + cC1 * w[2:]
    xi_in = xi[1:-1]
    drift = (m * xi_in - w[1:-1]) / np.pi
    diag = -4.0 * xi_in * cB2 + drift * cB1 - d1 / np.pi
    lower = -4.0 * xi_in * cA2 + drift * cA1
    upper = -4.0 * xi_in * cC2 + drift * cC1
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return ab


def solve_stationary_newton(m: float, init: MassProfile,
                            tol_rel: float = 1e-10,
                            max_iter: int = 100) -> NewtonResult:
    """Damped Newton on the discretized stationary problem.

    Endpoints stay pinned at 0 and m; iterates are clipped to [0, m] and
    the step is halved until the residual norm decreases.  When the line
    search stalls (steep transients far from the root), a short burst of
    monotone relaxation steps of the parabolic flow moves the iterate
    along the stable dynamics before Newton resumes.  Non-convergence is
    reported in the result, not raised.
    """
    from . import solver

    xi = init.grid.nodes
    grid = init.grid
    w = np.clip(init.values.copy(), 0.0, m)
    w[0] = 0.0
    w[-1] = m
    tol = tol_rel * m
    norms = []
    dists = []
    res = _residual_arrays(w, xi, m)
    norms.append(float(np.abs(res).max()))
    dists.append(float(np.abs(w - m * xi).max()))
    it = 0
    relax_bursts = 0
    slow = 0
    converged = norms[-1] < tol
    while not converged and it < max_iter:
        ab = _jacobian_banded(w, xi, m)
        try:
            delta = solve_banded((1, 1), ab, -res, check_finite=False)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        improved = False
        if np.all(np.isfinite(delta)):
            for _ in range(40):
                trial = w.copy()
                trial[1:-1] = w[1:-1] + lam * delta
                np.clip(trial, 0.0, m, out=trial)
                trial_res = _residual_arrays(trial, xi, m)
                norm = float(np.abs(trial_res).max())
                if np.isfinite(norm) and norm < norms[-1]:
                    slow = slow + 1 if norm > 0.9 * norms[-1] else 0
                    w, res = trial, trial_res
                    norms.append(norm)
                    dists.append(float(np.abs(w - m * xi).max()))
                    improved = True
                    break
                lam *= 0.5
        it += 1
        if not improved or slow >= 3:
            slow = 0
            # relaxation fallback: follow the monotone parabolic flow for
            # a doubling pseudo-time, then resume Newton
            if relax_bursts >= 12:
                break
            t_relax = 0.05 * 2.0 ** relax_bursts
            relax_bursts += 1
            prof = MassProfile(grid, np.maximum.accumulate(w), m)
            relax_cfg = solver.SchemeConfig(grid=grid, t_end=t_relax,
                                            snapshot_every=t_relax)
            relax = solver.simulate(relax_cfg, prof, m)
            w = relax.snapshots[-1][1].values.copy()
            w[0], w[-1] = 0.0, m
            res = _residual_arrays(w, xi, m)
            norms.append(float(np.abs(res).max()))
            dists.append(float(np.abs(w - m * xi).max()))
        converged = norms[-1] < tol
    # monotone repair before packaging (Newton can dip microscopically)
    w = np.maximum.accumulate(np.clip(w, 0.0, m))
    w[0], w[-1] = 0.0, m
    profile = MassProfile(init.grid, w, m)
    dist = float(np.abs(w - m * xi).max())
    return NewtonResult(profile, converged, it, tuple(norms), tuple(dists), dist)


def _residual_arrays(w, xi, m):
    d1 = derivative(w, xi)[1:-1]
    d2 = second_derivative_interior(w, xi)
    return -4.0 * xi[1:-1] * d2 - w[1:-1] * d1 / np.pi + m * xi[1:-1] * d1 / np.pi


def uniqueness_sweep(W: MassProfile, m: float | None = None,
                     n_samples: int = 50, param_max: float = 1e3) -> SweepReport:
    """Slide both barrier families from their envelope seeds out to param_max.

    The continuum argument proves the admissible parameter set is all of
    (0, infinity); numerically we sample log-spaced parameters, check the
    nodewise ordering at each, and track separation margins.  A sandwiched
    conclusion pins W to within the family gap at the sampled extremes.
    """
    m = W.total_mass if m is None else float(m)
    xi = W.grid.nodes
    C = max(default_derivative_bound(W), 2.0 * m)
    violated = None

    a0 = find_dominating_super(W, C).a
    a_values = np.geomspace(a0, param_max, n_samples)
    super_margins = np.full(n_samples, np.nan)
    for k, a in enumerate(a_values):
        bar = SuperBarrier(a, m).profile(W.grid)
        gap = bar.values - W.values
        if gap.min() < -1e-12 * m:
            violated = ("super", float(a), int(np.argmin(gap)))
            break
        super_margins[k] = separation_margin(bar, W)

    b0 = find_dominated_sub(W, C).b
    b_values = np.geomspace(b0, param_max, n_samples)
    sub_margins = np.full(n_samples, np.nan)
    if violated is None:
        for k, b in enumerate(b_values):
            bar = SubBarrier(b, m).profile(W.grid)
            gap = W.values - bar.values
            if gap.min() < -1e-12 * m:
                violated = ("sub", float(b), int(np.argmin(gap)))
                break
            sub_margins[k] = separation_margin(W, bar)

    conclusion = "sandwiched" if violated is None else "violated"
    final_gap = float(np.abs(W.values - m * xi).max())
    fam = float((SuperBarrier(param_max, m).value(xi) - m * xi).max()
                + (m * xi - SubBarrier(param_max, m).value(xi)).max())
    return SweepReport(a_values, super_margins, b_values, sub_margins,
                       conclusion, violated, final_gap, fam)


def longtime_convergence(trace, m: float | None = None) -> LongtimeReport:
    """Snapshot-wise sup distances to the flat state, with a fitted rate."""
    m = trace.total_mass if m is None else float(m)
    times, du, dv = [], [], []
    for t, prof in trace.snapshots:
        u = radial.density_from_mass(prof)
        v = radial.potential_from_slope(radial.potential_slope_from_mass(prof))
        times.append(t)
        du.append(float(np.abs(u.values - m / np.pi).max()))
        dv.append(float(np.abs(v.values).max()))
    times = np.asarray(times)
    du = np.asarray(du)
    dv = np.asarray(dv)
    rate = float("nan")
    tail = (times > 0.5 * times[-1]) & (du > 0)
    if tail.sum() >= 2:
        slope = np.polyfit(times[tail], np.log(du[tail]), 1)[0]
        rate = float(-slope)
    return LongtimeReport(times, du, dv, rate)
