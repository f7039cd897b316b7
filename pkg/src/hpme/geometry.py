"""Model functions, curvature profiles, the H-function and weighted radial grids.

A model manifold is described by its model function ``psi`` with
``psi(0) = 0`` and ``psi'(0) = 1``.  Exponential tails overflow double
precision long before the interesting radii, so every model carries
log-safe evaluators (``log_psi``, ``psi'/psi``, ``psi''/psi``) and the rest of
the package works with those.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import ConstructionError, DomainError, SolverError

R_EPS = 1e-4
SPLICE_TOL = 1e-12

CATALOG = ("euclidean", "hyperbolic", "quadratic", "power", "superquadratic")

Fn = Callable[[np.ndarray], np.ndarray]


def _piecewise(r, s, inner, outer):
    """Evaluate ``inner`` on r < s and ``outer`` on r >= s without touching the other branch."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    lo = r < s
    if lo.any():
        out[lo] = inner(r[lo])
    if (~lo).any():
        out[~lo] = outer(r[~lo])
    return out


def _log_sinh_over_c(r, c):
    # log(sinh(c r)/c), stable for large c r
    x = c * r
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(x, 20.0)) / c)
    xb = np.maximum(x, 20.0)
    big = xb + np.log1p(-np.exp(-2.0 * xb)) - math.log(2.0 * c)
    return np.where(x < 20.0, small, big)


@dataclass(frozen=True)
class ModelFunction:
    """Model function psi of a rotationally symmetric manifold.

    All evaluators are vectorised over ``r``.  ``splice_points`` lists radii
    where psi is only C^1; ``ddpsi_jumps`` holds the matching jumps of
    psi''/psi there (right minus left).
    """

    kind: str
    params: dict
    psi_fn: Fn
    dpsi_fn: Fn
    ddpsi_fn: Fn
    log_psi_fn: Fn
    dlog_fn: Fn
    ddratio_fn: Fn
    splice_points: tuple = ()
    ddpsi_jumps: tuple = ()
    dlog_scalar: Callable = None

    def dlog_at(self, r):
        """psi'/psi at a single radius r > 0 (fast path for ODE right-hand sides)."""
        if self.dlog_scalar is not None:
            return self.dlog_scalar(r)
        return float(self.dlog_fn(np.array([r]))[0])

    def _r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(~np.isfinite(r)):
            raise DomainError("model functions are defined for finite r >= 0")
        return r

    def psi(self, r):
        with np.errstate(over="ignore"):
            return self.psi_fn(self._r(r))

    def dpsi(self, r):
        with np.errstate(over="ignore"):
            return self.dpsi_fn(self._r(r))

    def ddpsi(self, r):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.ddpsi_fn(self._r(r))

    def log_psi(self, r):
        """log psi(r); -inf at r = 0."""
        return self.log_psi_fn(self._r(r))

    def dlog(self, r):
        """psi'/psi; +inf at r = 0."""
        with np.errstate(divide="ignore"):
            return self.dlog_fn(self._r(r))

    def ddratio(self, r):
        """psi''/psi, continued to r = 0 by its limit."""
        return self.ddratio_fn(self._r(r))

    def splice_mask(self, r, tol=1e-9):
        r = np.asarray(r, dtype=float)
        mask = np.zeros(r.shape, dtype=bool)
        for s in self.splice_points:
            mask |= np.abs(r - s) <= tol * max(1.0, s)
        return mask

    def label(self):
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


def eval_model(model, r):
    """Return ``(psi, psi', psi'')`` at ``r``.

    At a splice point the right-hand (tail) value of psi'' is returned; use
    ``model.splice_mask`` to find such points.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError(f"negative radius {r!r}")
    vals = model.psi(r_arr), model.dpsi(r_arr), model.ddpsi(r_arr)
    if np.ndim(r) == 0:
        return tuple(float(v) for v in vals)
    return vals


# --------------------------------------------------------------------------
# catalog

def euclidean():
    return ModelFunction(
        kind="euclidean",
        params={},
        psi_fn=lambda r: r.copy(),
        dpsi_fn=lambda r: np.ones_like(r),
        ddpsi_fn=lambda r: np.zeros_like(r),
        log_psi_fn=lambda r: np.log(np.where(r > 0, r, 0.0), where=r > 0,
                                    out=np.full_like(r, -np.inf)),
        dlog_fn=lambda r: np.divide(1.0, r, where=r > 0, out=np.full_like(r, np.inf)),
        ddratio_fn=lambda r: np.zeros_like(r),
        dlog_scalar=lambda r: 1.0 / r,
    )


def hyperbolic(c=1.0):
    """psi(r) = sinh(c r)/c, constant sectional curvature -c^2."""
    if c <= 0:
        raise ConstructionError("hyperbolic curvature scale must be positive")

    def dlog(r):
        x = c * r
        return np.divide(c, np.tanh(x), where=x > 0, out=np.full_like(r, np.inf))

    return ModelFunction(
        kind="hyperbolic",
        params={"c": float(c)},
        psi_fn=lambda r: np.sinh(c * r) / c,
        dpsi_fn=lambda r: np.cosh(c * r),
        ddpsi_fn=lambda r: c * np.sinh(c * r),
        log_psi_fn=lambda r: _log_sinh_over_c(r, c),
        dlog_fn=dlog,
        ddratio_fn=lambda r: np.full_like(r, c * c),
        dlog_scalar=lambda r: c / math.tanh(c * r),
    )


def _exp_power_splice(kind, params, k, q, c, s=1.0):
    """sinh(c r)/c on [0, s), a*exp(k r^q) - b on [s, inf), C^1 at s."""
    if k <= 0 or q <= 0 or c <= 0:
        raise ConstructionError(f"{kind}: parameters must be positive")
    e_s = k * s**q
    slope = k * q * s ** (q - 1)
    a = math.cosh(c * s) / (slope * math.exp(e_s))
    b = a * math.exp(e_s) - math.sinh(c * s) / c
    if not (np.isfinite(a) and np.isfinite(b)) or a <= 0:
        raise ConstructionError(f"{kind}: matching system has no admissible root")
    ba = b / a

    def expo(r):
        return k * r**q

    def lead(r):
        return k * q * r ** (q - 1)

    def curv(r):
        return lead(r) ** 2 + k * q * (q - 1) * r ** (q - 2)

    def damp(r):
        # psi / (a e^E) = 1 - (b/a) e^{-E}
        return 1.0 - ba * np.exp(-expo(r))

    inner_psi = lambda r: np.sinh(c * r) / c
    tail_psi = lambda r: a * np.exp(expo(r)) - b

    def inner_dlog(r):
        x = c * r
        return np.divide(c, np.tanh(x), where=x > 0, out=np.full_like(r, np.inf))

    tail_curv_s = curv(np.array([s]))[0] / (1.0 - ba * math.exp(-e_s))
    jump = tail_curv_s - c * c
    if curv(np.array([s]))[0] < -1e-12:
        raise ConstructionError(f"{kind}: tail is not convex at the splice point")

    model = ModelFunction(
        kind=kind,
        params=dict(params),
        psi_fn=lambda r: _piecewise(r, s, inner_psi, tail_psi),
        dpsi_fn=lambda r: _piecewise(r, s, lambda x: np.cosh(c * x),
                                     lambda x: a * lead(x) * np.exp(expo(x))),
        ddpsi_fn=lambda r: _piecewise(r, s, lambda x: c * np.sinh(c * x),
                                      lambda x: a * curv(x) * np.exp(expo(x))),
        log_psi_fn=lambda r: _piecewise(
            r, s, lambda x: _log_sinh_over_c(x, c),
            lambda x: expo(x) + math.log(a) + np.log(damp(x))),
        dlog_fn=lambda r: _piecewise(r, s, inner_dlog, lambda x: lead(x) / damp(x)),
        ddratio_fn=lambda r: _piecewise(r, s, lambda x: np.full_like(x, c * c),
                                        lambda x: curv(x) / damp(x)),
        splice_points=(float(s),),
        ddpsi_jumps=(float(jump),),
        dlog_scalar=lambda r: (c / math.tanh(c * r) if r < s else
                               k * q * r ** (q - 1) / (1.0 - ba * math.exp(-k * r**q))),
    )
    object.__setattr__(model, "matching", {"a": a, "b": b, "c": c, "splice": s})
    return model


def splice_quadratic_psi(C0=1.0):
    """Admissible model whose tail is a*exp(C0 r^2/2) - b (quadratic curvature growth).

    The inner branch is sinh(c r)/c with c^2 = C0 (1 + C0).
    """
    if C0 <= 0:
        raise ConstructionError("C0 must be positive")
    c = math.sqrt(C0 * (1.0 + C0))
    return _exp_power_splice("quadratic", {"C0": C0}, k=C0 / 2.0, q=2.0, c=c)


def _c2_matching_scale(k, q, kind):
    # c tanh(c) = k q + q - 1 makes psi''/psi continuous at r = 1
    target = k * q + q - 1.0
    if target < 0:
        raise ConstructionError(f"{kind}: tail a*exp(k r^q) - b is not convex on [1, inf)")
    if target < 1e-12:
        return 1e-6
    return brentq(lambda c: c * math.tanh(c) - target, 1e-12, target + 2.0, xtol=1e-15)


def splice_power_psi(k=1.0, sigma=1.0):
    """Admissible model with tail a*exp(k r^(2 - sigma)) - b, 0 < sigma < 2."""
    if k <= 0 or not 0 < sigma < 2:
        raise ConstructionError("power splice needs k > 0 and 0 < sigma < 2")
    q = 2.0 - sigma
    c = _c2_matching_scale(k, q, "power")
    return _exp_power_splice("power", {"k": k, "sigma": sigma}, k=k, q=q, c=c)


def splice_superquadratic_psi(p=3.0):
    """Admissible model with tail a*exp(r^p) - b, p > 2 (stochastically incomplete)."""
    if p <= 2:
        raise ConstructionError("superquadratic splice needs p > 2")
    c = _c2_matching_scale(1.0, p, "superquadratic")
    return _exp_power_splice("superquadratic", {"p": p}, k=1.0, q=p, c=c)


def custom(psi, dpsi, ddpsi, name="custom"):
    """Wrap user callables; log-safe evaluators are derived from them."""

    def log_psi(r):
        with np.errstate(divide="ignore"):
            return np.log(psi(r))

    def dlog(r):
        p = psi(r)
        return np.divide(dpsi(r), p, where=p > 0, out=np.full_like(r, np.inf))

    def ddratio(r):
        p = psi(r)
        h = 1e-6
        limit = float((ddpsi(np.array([h])) / psi(np.array([h])))[0])
        return np.divide(ddpsi(r), p, where=p > 0, out=np.full_like(r, limit))

    return ModelFunction(kind=name, params={}, psi_fn=psi, dpsi_fn=dpsi, ddpsi_fn=ddpsi,
                         log_psi_fn=log_psi, dlog_fn=dlog, ddratio_fn=ddratio)


def model_from_name(name, **params):
    """Build a catalog model from its name and keyword parameters."""
    name = name.lower()
    if name == "euclidean":
        return euclidean()
    if name == "hyperbolic":
        return hyperbolic(params.get("c", 1.0))
    if name == "quadratic":
        return splice_quadratic_psi(params.get("C0", params.get("c0", 1.0)))
    if name == "power":
        return splice_power_psi(params.get("k", 1.0), params.get("sigma", 1.0))
    if name == "superquadratic":
        return splice_superquadratic_psi(params.get("p", 3.0))
    raise KeyError(f"unknown model {name!r}; catalog: {', '.join(CATALOG)}")


# --------------------------------------------------------------------------
# grids

_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


def geometric_nodes(R, dr0=1e-3, ratio=1.05, h_max=None):
    """Nodes 0 = r_0 < ... < r_M = R, spacing dr0 * ratio^k capped at h_max."""
    if R <= 0 or dr0 <= 0 or ratio < 1:
        raise DomainError("need R > 0, dr0 > 0, ratio >= 1")
    h_max = math.inf if h_max is None else float(h_max)
    if ratio == 1.0 and dr0 == h_max:
        n = round(R / dr0)
        if n >= 2 and abs(n * dr0 - R) <= 1e-9 * R:
            return np.linspace(0.0, R, n + 1)
    nodes = [0.0]
    h = min(dr0, h_max)
    while nodes[-1] + h < R * (1 - 1e-12):
        nodes.append(nodes[-1] + h)
        h = min(h * ratio, h_max)
    if len(nodes) > 1 and R - nodes[-1] < 0.5 * h:
        nodes[-1] = R
    else:
        nodes.append(R)
    return np.asarray(nodes)


@dataclass(frozen=True)
class RadialGrid:
    """Vertex-centred radial mesh with psi^(N-1)-weighted cell measures.

    Cell ``i`` spans ``[faces[i-1], faces[i]]`` with the outer ends pinned to
    0 and R.  Weights and face areas are stored as logarithms; the linear
    values are rescaled by ``exp(-log_scale)`` so they stay finite.
    """

    nodes: np.ndarray
    N: int
    log_weights: np.ndarray
    log_face_areas: np.ndarray
    log_scale: float = 0.0

    @property
    def faces(self):
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def size(self):
        return self.nodes.size

    @property
    def R(self):
        return float(self.nodes[-1])

    @property
    def weights(self):
        w = np.exp(self.log_weights - self.log_scale)
        if np.any(w <= 0):
            raise DomainError("cell weights underflow at this log_scale")
        return w

    @property
    def face_areas(self):
        return np.exp(self.log_face_areas - self.log_scale)

    @classmethod
    def from_nodes(cls, nodes, model, N):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3 or nodes[0] != 0.0:
            raise DomainError("grid needs at least 3 nodes starting at r = 0")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if N < 2:
            raise DomainError("dimension N must be >= 2")
        faces = 0.5 * (nodes[1:] + nodes[:-1])
        lo = np.concatenate([[0.0], faces])
        hi = np.concatenate([faces, [nodes[-1]]])
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[:, None] + half[:, None] * _GL_X[None, :]
        logw = (N - 1) * model.log_psi(pts) + np.log(half[:, None] * _GL_W[None, :])
        log_weights = logsumexp(logw, axis=1)
        log_face_areas = (N - 1) * model.log_psi(faces)
        top = float(max(log_weights.max(), log_face_areas.max()))
        log_scale = top if top > 500.0 else 0.0
        return cls(nodes=nodes, N=int(N), log_weights=log_weights,
                   log_face_areas=log_face_areas, log_scale=log_scale)


def make_grid(model, N, R, dr0=1e-3, ratio=1.05, h_max=None):
    return RadialGrid.from_nodes(geometric_nodes(R, dr0, ratio, h_max), model, N)


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise DomainError("field length does not match the grid")
        object.__setattr__(self, "values", v)


# --------------------------------------------------------------------------
# H-function

@dataclass(frozen=True)
class _DenseH:
    """Piecewise dense solution of (H, H') between splice points."""

    breaks: tuple
    pieces: tuple
    N: int

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((2, r.size))
        lo = r < R_EPS
        out[0, lo] = r[lo] ** 2 / (2 * self.N)
        out[1, lo] = r[lo] / self.N
        for (a, b), sol in zip(zip(self.breaks[:-1], self.breaks[1:]), self.pieces):
            sel = (r >= a) & (r <= b) & ~lo
            if sel.any():
                out[:, sel] = sol(r[sel])
        if np.any(r > self.breaks[-1] * (1 + 1e-12)):
            raise DomainError("radius beyond the computed H range")
        return out

    def piece_bounds(self, r):
        """Bounds of the smooth piece containing each r."""
        idx = np.clip(np.searchsorted(self.breaks, r, side="right") - 1, 0, len(self.pieces) - 1)
        b = np.asarray(self.breaks)
        return b[idx], b[idx + 1]


@dataclass(frozen=True)
class GeometryProfile:
    """Sampled geometry of M_psi in dimension N on a radial grid."""

    model: ModelFunction
    N: int
    grid: RadialGrid
    log_psi: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray
    drift: np.ndarray
    H: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    Ric: np.ndarray
    K_omega: np.ndarray
    K_orth: np.ndarray
    dense: _DenseH = field(repr=False)

    @property
    def r(self):
        return self.grid.nodes

    def H_at(self, r):
        return self.dense(r)[0]

    def dH_at(self, r):
        return self.dense(r)[1]

    def H_derivatives_at(self, r):
        """(H, H', H'', H''') at arbitrary radii via the closed ODE."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        H, g = self.dense(r)
        H2, H3 = _closed_derivatives(self.model, self.N, r, g)
        return H, g, H2, H3

    def laplacian_residual(self, delta=1e-4):
        """|H'' + (N-1)(psi'/psi) H' - 1| with H'' differentiated from the dense solution.

        The derivative is a fourth-order difference of the integrator's dense
        output, kept on one side of any splice point, so it is independent of
        the closed formula used for ``H2``.
        """
        r = self.r[1:-1]
        d = delta * np.maximum(1.0, r)
        lo, hi = self.dense.piece_bounds(r)
        d = np.minimum(d, np.maximum(np.maximum(r - lo, hi - r) / 4.0, 1e-7))
        left = (r - 2 * d) < lo
        right = (r + 2 * d) > hi
        central = ~(left | right)
        gp = np.empty_like(r)
        c = central
        if c.any():
            rc, dc = r[c], d[c]
            g = [self.dense(rc + k * dc)[1] for k in (-2, -1, 1, 2)]
            gp[c] = (g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * dc)
        for mask, sign in ((left & ~right, 1.0), (right & ~left, -1.0)):
            if mask.any():
                rs, ds = r[mask], d[mask] * sign
                g = [self.dense(rs + k * ds)[1] for k in range(5)]
                gp[mask] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12 * ds)
        both = left & right
        if both.any():
            gp[both] = self.H2[1:-1][both]
        return np.abs(gp + self.drift[1:-1] * self.H1[1:-1] - 1.0)

    def rows(self):
        return zip(self.r, self.psi, self.dpsi, self.ddpsi, self.H, self.H1, self.H2,
                   self.Ric, self.K_omega)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "psi", "dpsi", "ddpsi", "H", "dH", "ddH", "Ric", "Ksec"])
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])


def _closed_derivatives(model, N, r, g):
    """H'' and H''' from H'' = 1 - m H' with m = (N-1) psi'/psi."""
    H2 = np.empty_like(r)
    H3 = np.empty_like(r)
    zero = r == 0
    pos = ~zero
    rp = r[pos]
    m = (N - 1) * model.dlog(rp)
    dm = (N - 1) * (model.ddratio(rp) - model.dlog(rp) ** 2)
    H2[pos] = 1.0 - m * g[pos]
    H3[pos] = -(dm * g[pos] + m * H2[pos])
    H2[zero] = 1.0 / N
    H3[zero] = 0.0
    return H2, H3


def _integrate_H(model, N, R, rtol, atol):
    kappa = float(model.ddratio(np.array([R_EPS]))[0])
    beta = -(N - 1) * kappa / (3.0 * N * (N + 2))
    r0 = R_EPS
    y = np.array([r0**2 / (2 * N) + beta * r0**4 / 4, r0 / N + beta * r0**3])

    def rhs(r, y):
        m = (N - 1) * model.dlog_at(r)
        return np.array([y[1], 1.0 - m * y[1]])

    breaks = [r0] + [s for s in model.splice_points if r0 < s < R] + [R]
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        if not sol.success:
            raise SolverError(f"H integration failed on [{a}, {b}]: {sol.message}")
        pieces.append(sol.sol)
        y = sol.y[:, -1]
    return _DenseH(breaks=tuple(breaks), pieces=tuple(pieces), N=N)


def compute_H(model, N, grid, rtol=1e-13, atol=1e-15):
    """Sample H and its first three derivatives on ``grid``.

    H' solves g' = 1 - (N-1)(psi'/psi) g from a series start at r = 1e-4;
    H'' and H''' follow from differentiating that closed equation.
    """
    if N < 2:
        raise DomainError("dimension N must be >= 2")
    r = grid.nodes
    dense = _integrate_H(model, N, float(r[-1]), rtol, atol)
    H, g = dense(r)
    H[0] = g[0] = 0.0
    H2, H3 = _closed_derivatives(model, N, r, g)
    drift = np.zeros_like(r)
    drift[1:] = (N - 1) * model.dlog(r[1:])
    curv = curvature_profile(model, N, grid)
    return GeometryProfile(
        model=model, N=N, grid=grid, log_psi=model.log_psi(r), psi=model.psi(r),
        dpsi=model.dpsi(r), ddpsi=model.ddpsi(r), drift=drift, H=H, H1=g, H2=H2, H3=H3,
        Ric=curv["Ric"], K_omega=curv["K_omega"], K_orth=curv["K_orth"], dense=dense)


def curvature_profile(model, N, grid):
    """Radial Ricci, radial sectional and orthogonal sectional curvatures.

    At r = 0 all sectional curvatures take the common limit -psi'''(0).
    """
    r = grid.nodes if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    ratio = model.ddratio(r)
    K_omega = -ratio
    K_orth = np.empty_like(r)
    pos = r > 0
    rp = r[pos]
    with np.errstate(over="ignore", invalid="ignore"):
        p, dp = model.psi(rp), model.dpsi(rp)
        direct = (1.0 - dp**2) / p**2
    log_form = np.exp(-2.0 * model.log_psi(rp)) - model.dlog(rp) ** 2
    K_orth[pos] = np.where(np.isfinite(direct) & (p < 1e100), direct, log_form)
    K_orth[~pos] = -ratio[~pos]
    return {"Ric": (N - 1) * K_omega, "K_omega": K_omega, "K_orth": K_orth}


# --------------------------------------------------------------------------
# stochastic completeness

@dataclass(frozen=True)
class CompletenessReport:
    status: str  # complete | incomplete | undecided
    R_probe: float
    H_probe: float
    growth: str  # power | log | bounded | unknown
    exponent: float
    tail_bound: float
    H_limit_estimate: float
    block_ratios: tuple

    def as_dict(self):
        return {
            "status": self.status, "R_probe": self.R_probe, "H_probe": self.H_probe,
            "growth": self.growth, "exponent": self.exponent, "tail_bound": self.tail_bound,
            "H_limit_estimate": self.H_limit_estimate, "block_ratios": list(self.block_ratios),
        }


def _tail_blocks(model, N, R, nblocks):
    def rho(s):
        return 1.0 / ((N - 1) * float(model.dlog(np.array([s]))[0]))

    blocks = []
    a = R
    for _ in range(nblocks):
        val, _err = quad(rho, a, 2 * a, limit=200, epsabs=0.0, epsrel=1e-10)
        blocks.append(val)
        a *= 2
    return np.asarray(blocks)


def stochastic_completeness(profile, R_probe=None, threshold=1.0, nblocks=8):
    """Classify M_psi as stochastically complete (H unbounded) or not.

    The tail H(inf) - H(R) is estimated from dyadic blocks of
    int psi / ((N-1) psi'), the quasi-steady value of H'.  Geometric decay of
    the blocks gives a finite remainder; non-decaying blocks mean divergence.
    """
    N, model = profile.N, profile.model
    R = float(profile.r[-1] if R_probe is None else R_probe)
    if R > profile.r[-1] * (1 + 1e-12) or R <= 0:
        raise DomainError("R_probe must lie inside the profile range")
    H_R, g_R = (float(x[0]) for x in profile.dense(np.array([R])))
    m_R = (N - 1) * float(model.dlog(np.array([R]))[0])
    blocks = _tail_blocks(model, N, R, nblocks)
    ratios = blocks[1:] / blocks[:-1]
    last = ratios[-3:]

    s_R = R * g_R
    s_half = 0.5 * R * float(profile.dense(np.array([0.5 * R]))[1][0])
    exponent = math.log2(s_R / s_half) if s_half > 0 and s_R > 0 else float("nan")
    growth = "log" if abs(exponent) < 0.15 else ("power" if exponent > 0 else "bounded")

    if np.all(last <= 0.75):
        q = float(last.max())
        remainder = float(blocks.sum() + blocks[-1] * q / (1 - q))
        tail = remainder * max(1.0, g_R * m_R)
        if tail < 0.1 * H_R:
            return CompletenessReport("incomplete", R, H_R, "bounded", exponent, tail,
                                      H_R + tail, tuple(ratios))
        return CompletenessReport("undecided", R, H_R, growth, exponent, tail, H_R + tail,
                                  tuple(ratios))
    if np.all(last >= 0.9) and H_R >= threshold and (growth == "log" or exponent > 0.15):
        return CompletenessReport("complete", R, H_R, growth, exponent, math.inf, math.inf,
                                  tuple(ratios))
    return CompletenessReport("undecided", R, H_R, growth, exponent, math.nan, math.nan,
                              tuple(ratios))
