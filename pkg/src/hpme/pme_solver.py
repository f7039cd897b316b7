"""Implicit finite-volume solver for the radial porous medium equation

    u_t = psi^(1-N) (psi^(N-1) (|u|^(m-1) u)')'   on [0, R],

with a Dirichlet value at R, and the experiment harnesses built on it:
truncation schedules, blow-up runs, comparison checks and uniqueness probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, SolverError
from .geometry import RadialGrid, geometric_nodes

PHI_FLOOR = 1e-12


def phi_m(u, m):
    return np.abs(u) ** (m - 1.0) * u


def dphi_m(u, m):
    return np.maximum(m * np.abs(u) ** (m - 1.0), PHI_FLOOR)


@dataclass(frozen=True)
class PMEConfig:
    """Problem and time-stepping parameters.

    ``boundary`` is either a number or a callable ``g(t)``.  With ``fixed_dt``
    every step uses ``dt0`` exactly; otherwise dt adapts to keep the relative
    change per step near ``rel_change_target``.
    """

    m: float
    N: int
    model: object
    R: float
    dr0: float = 1e-3
    ratio: float = 1.05
    h_max: float = 0.05
    dt0: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = math.inf
    growth_cap: float = 1.5
    rel_change_target: float = 1e-3
    fixed_dt: bool = False
    newton_max: int = 30
    newton_tol: float = 1e-12
    boundary: object = 0.0
    blowup_threshold: float = 1e12

    def __post_init__(self):
        if self.m <= 1 or self.N < 2 or self.R <= 0:
            raise DomainError("need m > 1, N >= 2, R > 0")
        if self.newton_tol > 1e-10:
            raise DomainError("Newton tolerance must be <= 1e-10")
        if min(self.dr0, self.h_max, self.dt0, self.growth_cap) <= 0:
            raise DomainError("grid and time-step parameters must be positive")

    def boundary_at(self, t):
        b = self.boundary
        return float(b(t)) if callable(b) else float(b)

    def make_grid(self):
        return RadialGrid.from_nodes(geometric_nodes(self.R, self.dr0, self.ratio, self.h_max),
                                     self.model, self.N)


def uniform_config(model, N, m, R, h, **kw):
    """Config on a uniform mesh of width h (R should be a multiple of h)."""
    return PMEConfig(m=m, N=N, model=model, R=R, dr0=h, ratio=1.0, h_max=h, **kw)


@dataclass
class PMEState:
    t: float
    u: np.ndarray
    newton_iterations: int = 0
    mass_residual: float = 0.0


@dataclass
class _Operator:
    """Precomputed coefficients of the flux-form discretisation."""

    grid: RadialGrid
    m: float

    def __post_init__(self):
        g = self.grid
        self.w = g.weights[:-1]  # unknown cells 0..M-1
        self.c = g.face_areas / np.diff(g.nodes)  # face i+1/2, i = 0..M-1

    def fluxes(self, u):
        p = phi_m(u, self.m)
        return self.c * np.diff(p)

    def residual(self, u, u_old, ub, dt):
        full = np.append(u, ub)
        F = self.fluxes(full)
        div = F.copy()
        div[1:] -= F[:-1]
        return self.w * (u - u_old) / dt - div

    def jacobian_bands(self, u, ub, dt):
        full = np.append(u, ub)
        d = dphi_m(full, self.m)
        c = self.c
        M = u.size
        diag = self.w / dt + c * d[:M]
        diag[1:] += c[:-1] * d[1:M]
        ab = np.zeros((3, M))
        ab[1] = diag
        ab[0, 1:] = -c[:-1] * d[1:M]  # upper: dF_i/du_{i+1}
        ab[2, :-1] = -c[:-1] * d[: M - 1]  # lower: dF_{i+1}/du_i
        return ab


def _newton(op, u_old, ub, dt, cfg):
    """Solve one implicit step; returns (u, iterations) or raises SolverError."""
    u = u_old.copy()
    scale = op.w / dt
    ref = 1.0 + np.max(np.abs(u_old))

    def norm(res):
        return np.max(np.abs(res) / scale) / ref

    res = op.residual(u, u_old, ub, dt)
    r0 = norm(res)
    for it in range(1, cfg.newton_max + 1):
        ab = op.jacobian_bands(u, ub, dt)
        try:
            du = solve_banded((1, 1), ab, -res, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"singular Newton system: {exc}") from exc
        if not np.all(np.isfinite(du)):
            raise SolverError("non-finite Newton update")
        if np.max(np.abs(du)) <= cfg.newton_tol * ref:
            return u + du, it
        lam = 1.0
        while True:
            trial = u + lam * du
            res_t = op.residual(trial, u_old, ub, dt)
            if np.all(np.isfinite(res_t)) and norm(res_t) <= (1 - 1e-4 * lam) * r0:
                break
            lam *= 0.5
            if lam < 1e-6:
                raise SolverError("line search failed")
        u, res, r0 = trial, res_t, norm(res_t)
    raise SolverError("Newton did not converge")


def step(config, state, dt, grid=None, op=None):
    """One implicit Euler step of size ``dt``; node M carries the Dirichlet value at t + dt."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    if op is None:
        op = _Operator(grid if grid is not None else config.make_grid(), config.m)
    t_new = state.t + dt
    ub = config.boundary_at(t_new)
    u_old = state.u[:-1]
    u, its = _newton(op, u_old, ub, dt, config)
    full = np.append(u, ub)
    # discrete conservation: sum w (u - u_old) = dt * flux through the face M-1/2
    dmass = float(np.sum(op.w * (u - u_old)))
    flux = float(op.fluxes(full)[-1]) * dt
    # relative to the mass moved during the step
    denom = max(float(np.sum(op.w * np.abs(u - u_old))) + abs(flux), 1e-300)
    return PMEState(t=t_new, u=full, newton_iterations=its, mass_residual=abs(dmass - flux) / denom)


@dataclass
class Trajectory:
    grid: RadialGrid
    snapshots: list
    times: np.ndarray
    sup: np.ndarray
    inner_sup: np.ndarray
    steps: int
    max_mass_residual: float
    blew_up: bool = False
    final: PMEState = None

    def snapshot_at(self, t):
        for s in self.snapshots:
            if abs(s.t - t) <= 1e-12 * max(1.0, abs(t)):
                return s
        raise KeyError(t)


def solve_dirichlet_ball(config, u0, t_end, snapshot_times=(), grid=None, inner_radius=None):
    """March from ``u0`` to ``t_end`` (or until the blow-up threshold is exceeded).

    ``u0`` is an array on the config grid or a callable of r.  Snapshots land
    exactly on the requested times.  ``inner_sup`` records max |u| on
    r <= inner_radius (default R/2) after every accepted step.
    """
    if t_end <= 0:
        raise DomainError("t_end must be positive")
    grid = config.make_grid() if grid is None else grid
    r = grid.nodes
    u = np.asarray(u0(r) if callable(u0) else u0, dtype=float).copy()
    if u.shape != r.shape:
        raise DomainError("initial datum does not match the grid")
    u[-1] = config.boundary_at(0.0)
    op = _Operator(grid, config.m)
    inner = r <= (0.5 * r[-1] if inner_radius is None else inner_radius)
    targets = sorted({float(x) for x in snapshot_times if 0 < x <= t_end} | {float(t_end)})
    state = PMEState(0.0, u)
    snaps = [PMEState(0.0, u.copy())] if 0.0 in snapshot_times else []
    times, sups, isups = [0.0], [float(np.max(np.abs(u)))], [float(np.max(np.abs(u[inner])))]
    dt = config.dt0
    steps, worst, blew = 0, 0.0, False
    k = 0
    while k < len(targets):
        target = targets[k]
        h = min(dt, target - state.t, config.dt_max)
        last = h >= target - state.t - 1e-14 * max(1.0, target)
        if last:
            h = target - state.t
        try:
            new = step(config, state, h, op=op)
        except SolverError:
            if config.fixed_dt:
                raise
            dt = h / 2
            if dt < config.dt_min:
                raise SolverError(f"time step fell below {config.dt_min:g} at t = {state.t:g}")
            continue
        if last:
            new.t = target
        steps += 1
        worst = max(worst, new.mass_residual)
        change = np.max(np.abs(new.u - state.u)) / (np.max(np.abs(state.u)) + 1e-12)
        state = new
        times.append(state.t)
        sups.append(float(np.max(np.abs(state.u))))
        isups.append(float(np.max(np.abs(state.u[inner]))))
        if not config.fixed_dt and not last:
            fac = config.rel_change_target / max(change, 1e-14)
            dt = h * min(config.growth_cap, max(0.5, fac))
        if last:
            snaps.append(PMEState(state.t, state.u.copy(), state.newton_iterations,
                                  state.mass_residual))
            k += 1
        if sups[-1] > config.blowup_threshold:
            blew = True
            break
    return Trajectory(grid, snaps, np.array(times), np.array(sups), np.array(isups), steps,
                      worst, blew, state)


# --------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class ComparisonReport:
    ordered: bool
    min_gap: float
    where: tuple  # (t, r) of the worst gap

    def __bool__(self):
        return self.ordered

    def as_dict(self):
        return {"ordered": self.ordered, "min_gap": self.min_gap, "where": list(self.where)}


def check_comparison(run_low, run_high, tol=1e-10):
    """Nodewise u_low <= u_high + tol (1 + |u|) at every shared snapshot."""
    if run_low.grid.nodes.shape != run_high.grid.nodes.shape or not np.array_equal(
            run_low.grid.nodes, run_high.grid.nodes):
        raise DomainError("runs must share the grid")
    worst, where = math.inf, (math.nan, math.nan)
    for a in run_low.snapshots:
        b = run_high.snapshot_at(a.t)
        gap = (b.u - a.u) / (1.0 + np.maximum(np.abs(a.u), np.abs(b.u)))
        i = int(np.argmin(gap))
        if gap[i] < worst:
            worst, where = float(gap[i]), (a.t, float(run_low.grid.nodes[i]))
    return ComparisonReport(worst >= -tol, worst, where)


def check_against_barrier(run, upper, lower=None, tol=1e-10):
    """-ubar <= u <= ubar at every snapshot; ``upper(r, t)`` is the barrier sampler."""
    r = run.grid.nodes
    worst, where = math.inf, (math.nan, math.nan)
    for s in run.snapshots:
        hi = upper(r, s.t)
        lo = -hi if lower is None else lower(r, s.t)
        gap = np.minimum(hi - s.u, s.u - lo) / (1.0 + np.abs(hi))
        i = int(np.argmin(gap))
        if gap[i] < worst:
            worst, where = float(gap[i]), (s.t, float(r[i]))
    return ComparisonReport(worst >= -tol, worst, where)


# --------------------------------------------------------------------------
# truncation scheme

@dataclass(frozen=True)
class TruncationReport:
    orderings_hold: bool
    n_order_gap: float
    i_order_gap: float
    j_order_gap: float
    bounds_gap: float
    inner_differences: tuple
    difference_ratios: tuple
    stabilizes: bool
    runs: int
    n_star: object = None

    @property
    def passed(self):
        return self.orderings_hold and self.stabilizes

    def as_dict(self):
        d = dict(self.__dict__)
        d["inner_differences"] = list(self.inner_differences)
        d["difference_ratios"] = list(self.difference_ratios)
        d["pass"] = self.passed
        return d


def truncated_datum(u0_vals, i, j):
    """(u0^+ min i) - (u0^- min j)."""
    return np.minimum(np.maximum(u0_vals, 0.0), i) - np.minimum(np.maximum(-u0_vals, 0.0), j)


def run_truncation_scheme(model, N, m, u0, ns, iis, js, h=0.05, dt=0.01, t_end=0.2,
                          inner_radius=2.0, tol=1e-10, floor=1e-12):
    """Solve the truncated Dirichlet problems on nested balls B_n and check their orderings.

    All balls share one uniform mesh of width ``h``, so u_{n+1} can be
    compared with u_n at the nodes of B_n.  The boundary value is
    -max(u0^- min j) over the largest ball.  Stabilisation in n holds when
    successive inner-window differences at least halve, or fall below
    ``floor``, for every increment from some n* on (two increments at least).
    """
    ns = sorted(ns)
    iis, js = sorted(iis), sorted(js)
    R_max = float(ns[-1])
    nodes = geometric_nodes(R_max, h, 1.0, h)
    vals = u0(nodes) if callable(u0) else np.asarray(u0, dtype=float)
    finals = {}
    grids = {}
    for n in ns:
        sub = nodes[nodes <= n + 1e-9]
        if abs(sub[-1] - n) > 1e-9:
            raise DomainError("ball radii must be mesh nodes")
        grids[n] = RadialGrid.from_nodes(sub, model, N)
    for n in ns:
        g = grids[n]
        M = g.size
        for i in iis:
            for j in js:
                neg = float(np.max(np.minimum(np.maximum(-vals, 0.0), j)))
                cfg = PMEConfig(m=m, N=N, model=model, R=float(n), dr0=h, ratio=1.0, h_max=h,
                                dt0=dt, fixed_dt=True, boundary=-neg)
                data = truncated_datum(vals[:M], i, j)
                run = solve_dirichlet_ball(cfg, data, t_end, grid=g)
                finals[(n, i, j)] = (run.final.u, float(np.max(np.minimum(np.maximum(vals, 0), i))),
                                     -neg, run)

    def rel_gap(hi, lo):
        return float(np.min((hi - lo) / (1.0 + np.abs(hi) + np.abs(lo))))

    n_gap = i_gap = j_gap = b_gap = math.inf
    for (n, i, j), (u, top, bottom, _run) in finals.items():
        b_gap = min(b_gap, rel_gap(np.full_like(u, top), u), rel_gap(u, np.full_like(u, bottom)))
        k = ns.index(n)
        if k + 1 < len(ns):
            nxt = finals[(ns[k + 1], i, j)][0][: u.size]
            n_gap = min(n_gap, rel_gap(nxt, u))
        if iis.index(i) + 1 < len(iis):
            n_gap_i = finals[(n, iis[iis.index(i) + 1], j)][0]
            i_gap = min(i_gap, rel_gap(n_gap_i, u))
        if js.index(j) + 1 < len(js):
            lower = finals[(n, i, js[js.index(j) + 1])][0]
            j_gap = min(j_gap, rel_gap(u, lower))
    ok = min(n_gap, i_gap, j_gap, b_gap) >= -tol

    inner = nodes[nodes <= inner_radius + 1e-9].size
    i_top, j_top = iis[-1], js[-1]
    diffs = []
    for a, b in zip(ns[:-1], ns[1:]):
        ua = finals[(a, i_top, j_top)][0][:inner]
        ub = finals[(b, i_top, j_top)][0][:inner]
        diffs.append(float(np.max(np.abs(ub - ua))))
    ratios = [d2 / d1 if d1 > 0 else 0.0 for d1, d2 in zip(diffs[:-1], diffs[1:])]
    good = [d2 <= 0.5 * d1 or d2 <= floor for d1, d2 in zip(diffs[:-1], diffs[1:])]
    # from some n* on every increment at least halves the inner-window difference
    n_star = None
    for k in range(len(good) - 1):
        if all(good[k:]):
            n_star = ns[k + 1]
            break
    return TruncationReport(bool(ok), n_gap, i_gap, j_gap, b_gap, tuple(diffs), tuple(ratios),
                            n_star is not None, len(finals), n_star)


# --------------------------------------------------------------------------
# blow-up experiment

@dataclass(frozen=True)
class BlowupReport:
    T: float
    T_fit: float
    fit_residual: float
    times: np.ndarray
    sup: np.ndarray
    inner_sup: np.ndarray
    weighted_norm: np.ndarray
    tracking_error: float
    tracking_times: tuple
    last_t: float
    blew_up: bool
    max_mass_residual: float
    doubling_difference: float = math.nan
    sandwich: dict = field(default_factory=dict)

    def as_dict(self):
        return {"T": self.T, "T_fit": self.T_fit, "fit_residual": self.fit_residual,
                "tracking_error": self.tracking_error, "last_t": self.last_t,
                "blew_up": self.blew_up, "max_mass_residual": self.max_mass_residual,
                "doubling_difference": self.doubling_difference, "sandwich": self.sandwich,
                "trajectory": {"t": self.times.tolist(), "sup": self.sup.tolist(),
                               "inner_sup": self.inner_sup.tolist(),
                               "weighted_norm": self.weighted_norm.tolist()}}


def fit_blowup_time(times, M, m, t_min=0.0):
    """Least-squares fit of M^-(m-1) = c (T - t); returns (T_fit, relative rms residual)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(M, dtype=float) ** (-(m - 1.0))
    sel = t >= t_min
    t, y = t[sel], y[sel]
    if t.size < 3:
        raise DomainError("need at least 3 trajectory points to fit")
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    if slope >= 0:
        return math.inf, math.inf
    res = y - (slope * t + icpt)
    return float(-icpt / slope), float(np.sqrt(np.mean(res**2)) / np.mean(np.abs(y)))


def _separable_config(sep, model, N, R, **kw):
    m, T = sep.m, sep.T
    ub = float(sep.at(np.array([R]))[0])
    trace = lambda t: (1.0 - t / T) ** (-1.0 / (m - 1.0)) * ub
    return PMEConfig(m=m, N=N, model=model, R=R, boundary=trace, **kw)


def run_blowup_experiment(profile, m, T, alpha, R, t_end, beta=None, n_track=9, b=0.0,
                          doubling=False, **solver_kw):
    """Start from U_{T,alpha}, impose the exact separable trace at R, and watch it blow up.

    Tracking error is the max relative deviation from the separable solution on
    r <= R/2 at ``n_track`` equispaced times in (0, t_end].  ``beta`` adds the
    sandwich run started from sqrt(U_{T,alpha} U_{T,beta}).
    """
    from .elliptic import make_separable

    if not 0 < t_end < T:
        raise DomainError("need 0 < t_end < T")
    if R > profile.r[-1] * (1 + 1e-12):
        raise DomainError("profile must reach R")
    model, N = profile.model, profile.N
    sep = make_separable(profile, m, T, alpha)
    cfg = _separable_config(sep, model, N, R, **solver_kw)
    grid = cfg.make_grid()
    r = grid.nodes
    track_t = tuple(float(x) for x in np.linspace(t_end / n_track, t_end, n_track))
    run = solve_dirichlet_ball(cfg, sep.at(r), t_end, snapshot_times=track_t, grid=grid)
    inner = r <= 0.5 * R
    err = 0.0
    for s in run.snapshots:
        exact = sep.solution(r[inner], s.t)
        err = max(err, float(np.max(np.abs(s.u[inner] - exact) / np.abs(exact))))
    T_fit, fit_res = fit_blowup_time(run.times, run.inner_sup, m)
    # weighted norm on the run grid
    Hr = profile.H_at(r)
    wn = []
    for s in run.snapshots:
        wn.append(float(np.max(np.abs(s.u) / (Hr + 1 + b) ** (1.0 / (m - 1.0)))))
    dbl = math.nan
    if doubling:
        cfg2 = _separable_config(sep, model, N, 2 * R, **solver_kw)
        if 2 * R > profile.r[-1] * (1 + 1e-12):
            raise DomainError("profile must reach 2R for the doubling study")
        g2 = cfg2.make_grid()
        run2 = solve_dirichlet_ball(cfg2, sep.at(g2.nodes), t_end, grid=g2)
        u2 = np.interp(r[inner], g2.nodes, run2.final.u)
        dbl = float(np.max(np.abs(u2 - run.final.u[inner]) / np.abs(run.final.u[inner])))
    sandwich = {}
    if beta is not None:
        sandwich = _sandwich_run(profile, sep, beta, cfg, grid, t_end, track_t)
    return BlowupReport(T=float(T), T_fit=T_fit, fit_residual=fit_res, times=run.times,
                        sup=run.sup, inner_sup=run.inner_sup, weighted_norm=np.array(wn),
                        tracking_error=err, tracking_times=track_t, last_t=float(run.final.t),
                        blew_up=run.blew_up, max_mass_residual=run.max_mass_residual,
                        doubling_difference=dbl, sandwich=sandwich)


def _sandwich_run(profile, sep_a, beta, cfg_a, grid, t_end, track_t):
    """Data between the alpha and beta profiles stays between both discrete and exact solutions."""
    from .elliptic import make_separable

    m, T = sep_a.m, sep_a.T
    sep_b = make_separable(profile, m, T, beta)
    r = grid.nodes
    cfg_b = _separable_config(sep_b, cfg_a.model, cfg_a.N, cfg_a.R, **_solver_fields(cfg_a))
    ga, gb = cfg_a.boundary, cfg_b.boundary
    cfg_mid = replace(cfg_a, boundary=lambda t: math.sqrt(ga(t) * gb(t)))
    ua0, ub0 = sep_a.at(r), sep_b.at(r)
    mid0 = np.sqrt(ua0 * ub0)
    low = solve_dirichlet_ball(cfg_a, ua0, t_end, snapshot_times=track_t, grid=grid)
    high = solve_dirichlet_ball(cfg_b, ub0, t_end, snapshot_times=track_t, grid=grid)
    mid = solve_dirichlet_ball(cfg_mid, mid0, t_end, snapshot_times=track_t, grid=grid)
    c1 = check_comparison(low, mid)
    c2 = check_comparison(mid, high)
    # against the exact separable solutions, up to the discretisation error of the runs
    exact_gap = math.inf
    for s in mid.snapshots:
        lo = sep_a.solution(r, s.t)
        hi = sep_b.solution(r, s.t)
        gap = np.minimum(s.u - lo, hi - s.u) / hi
        exact_gap = min(exact_gap, float(np.min(gap)))
    return {"beta": float(beta), "discrete_low": c1.as_dict(), "discrete_high": c2.as_dict(),
            "discrete_ordered": bool(c1 and c2), "exact_min_gap": exact_gap}


def _solver_fields(cfg):
    keep = ("dr0", "ratio", "h_max", "dt0", "dt_min", "dt_max", "growth_cap",
            "rel_change_target", "fixed_dt", "newton_max", "newton_tol", "blowup_threshold")
    return {k: getattr(cfg, k) for k in keep}


# --------------------------------------------------------------------------
# Barenblatt oracle (Euclidean space)

def barenblatt(r, t, m, N, C=1.0):
    """Source-type solution t^-a (C - k r^2 t^-2b)_+^(1/(m-1))."""
    a = N / (N * (m - 1.0) + 2.0)
    b = a / N
    k = a * (m - 1.0) / (2.0 * m * N)
    base = np.maximum(C - k * np.asarray(r) ** 2 * t ** (-2 * b), 0.0)
    return t ** (-a) * base ** (1.0 / (m - 1.0))


def barenblatt_errors(hs, m=2.0, N=3, R=6.0, t0=1.0, duration=0.1, C=1.0, dt_factor=5.0,
                      dt_power=2):
    """L-infinity errors against the source solution on uniform meshes, dt = dt_factor * h^dt_power.

    The run starts from the source profile at ``t0`` and is compared at ``t0 + duration``.
    """
    from .geometry import euclidean

    model = euclidean()
    out = []
    for h in hs:
        cfg = uniform_config(model, N, m, R, h, dt0=dt_factor * h**dt_power, fixed_dt=True,
                             boundary=0.0)
        grid = cfg.make_grid()
        r = grid.nodes
        run = solve_dirichlet_ball(cfg, barenblatt(r, t0, m, N, C), duration, grid=grid)
        exact = barenblatt(r, t0 + duration, m, N, C)
        out.append(float(np.max(np.abs(run.final.u - exact))))
    return np.array(out)


def observed_orders(hs, errors):
    hs, errors = np.asarray(hs, dtype=float), np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


# --------------------------------------------------------------------------
# uniqueness probe

@dataclass(frozen=True)
class UniquenessReport:
    kind: str
    labels: tuple
    distances: tuple
    ratios: tuple
    converged: bool
    note: str = ""

    def as_dict(self):
        return {"kind": self.kind, "labels": list(self.labels), "distances": list(self.distances),
                "ratios": list(self.ratios), "converged": self.converged, "note": self.note}


def uniqueness_probe(model, N, m, u0, t_end, kind="refinement", R=10.0, h=0.1, levels=3,
                     inner_radius=None, boundary="datum", min_ratio=1.8, dt_factor=0.5,
                     blowup_threshold=1e8):
    """Compare runs that approximate the same problem and report whether they converge.

    ``refinement``: uniform meshes h, h/2, h/4, ... on [0, R] with dt = dt_factor h;
    consecutive inner-window distances must shrink by ``min_ratio``.
    ``domain``: radii R, 2R, 4R, ... at fixed h; distances must shrink by the
    same factor.  ``boundary`` is "datum" (u0(R)) or "zero".  A blow-up
    during any run counts as non-convergence.
    """
    inner_radius = 0.5 * R if inner_radius is None else inner_radius
    if kind == "refinement":
        variants = [(f"h={h / 2**k:g}", R, h / 2**k) for k in range(levels)]
    elif kind == "domain":
        variants = [(f"R={R * 2**k:g}", R * 2**k, h) for k in range(levels)]
    else:
        raise DomainError(f"unknown probe kind {kind!r}")
    finals = []
    coarse = None
    for label, Rv, hv in variants:
        ub = float(u0(np.array([Rv]))[0]) if boundary == "datum" else 0.0
        dt = dt_factor * (hv if kind == "refinement" else h)
        cfg = uniform_config(model, N, m, Rv, hv, dt0=dt, fixed_dt=True, boundary=ub,
                             blowup_threshold=blowup_threshold)
        grid = cfg.make_grid()
        try:
            run = solve_dirichlet_ball(cfg, u0(grid.nodes), t_end, grid=grid)
        except SolverError as exc:
            return UniquenessReport(kind, tuple(v[0] for v in variants), (), (), False,
                                    f"solver failure in {label}: {exc}")
        if run.blew_up:
            return UniquenessReport(kind, tuple(v[0] for v in variants), (), (), False,
                                    f"blow-up in {label} before t_end")
        if coarse is None:
            coarse = grid.nodes[grid.nodes <= inner_radius + 1e-9]
        finals.append(np.interp(coarse, grid.nodes, run.final.u))
    dist = [float(np.max(np.abs(b - a))) for a, b in zip(finals[:-1], finals[1:])]
    ratios = [d1 / d2 if d2 > 0 else math.inf for d1, d2 in zip(dist[:-1], dist[1:])]
    ok = bool(ratios) and all(q >= min_ratio for q in ratios)
    return UniquenessReport(kind, tuple(v[0] for v in variants), tuple(dist), tuple(ratios), ok)
