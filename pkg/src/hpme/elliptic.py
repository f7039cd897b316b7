"""Sublinear radial Cauchy problem, separable blow-up profiles and the parabolic supersolution.

The basic object is the radial solution of

    U'' + (N-1)(psi'/psi) U' = |U|^(1/m),   U(0) = U0,  U'(0) = 0,

which is increasing and grows like H^(m/(m-1)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, SolverError, VerificationError
from .geometry import R_EPS

VERIFY_RTOL = 1e-10


def kappa_m(m):
    """(m-1)^2 / (m (m+1))."""
    return (m - 1.0) ** 2 / (m * (m + 1.0))


def recurrence_sequences(m, n_max=20):
    """C_n and p_n of the iterated lower bound U >= C_n H^(p_n), n = 1..n_max."""
    k = kappa_m(m)
    n = np.arange(1, n_max + 1, dtype=float)
    C = k ** ((m - m ** (1.0 - n)) / (m - 1.0))
    p = m / (m - 1.0) - m ** (-n) / (m - 1.0)
    return C, p


def _spow(x, a):
    return np.sign(x) * np.abs(x) ** a


@dataclass(frozen=True)
class _DenseU:
    breaks: tuple
    pieces: tuple
    U0: float
    m: float
    N: int

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((2, r.size))
        lo = r < R_EPS
        c = self.U0 ** (1.0 / self.m) / self.N
        out[0, lo] = self.U0 + 0.5 * c * r[lo] ** 2
        out[1, lo] = c * r[lo]
        for (a, b), sol in zip(zip(self.breaks[:-1], self.breaks[1:]), self.pieces):
            sel = (r >= a) & (r <= b) & ~lo
            if sel.any():
                out[:, sel] = sol(r[sel])
        return out

    def piece_bounds(self, r):
        idx = np.clip(np.searchsorted(self.breaks, r, side="right") - 1, 0, len(self.pieces) - 1)
        b = np.asarray(self.breaks)
        return b[idx], b[idx + 1]


@dataclass(frozen=True)
class EllipticSolution:
    profile: object
    m: float
    U0: float
    U: np.ndarray
    U1: np.ndarray
    dense: _DenseU = field(repr=False)

    @property
    def r(self):
        return self.profile.r

    def laplacian(self, r=None, delta=1e-4):
        """Delta U at ``r`` with U'' differentiated numerically from the dense solution."""
        r = self.r[1:-1] if r is None else np.asarray(r, dtype=float)
        return _dense_laplacian(self.dense, self.profile.model, self.profile.N, r, delta)

    def to_csv(self, path):
        lo, hi = sandwich_bounds(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "U", "dU", "lower_bound", "upper_bound"])
            for row in zip(self.r, self.U, self.U1, lo, hi):
                w.writerow([repr(float(x)) for x in row])


def _dense_laplacian(dense, model, N, r, delta):
    """d/dr of the dense first component's derivative plus the drift term.

    ``dense(r)`` must return (f, f') rows.  A fourth-order stencil is used,
    one-sided where a piece boundary is closer than the stencil width.
    """
    r = np.asarray(r, dtype=float)
    d = delta * np.maximum(1.0, r)
    lo, hi = dense.piece_bounds(r)
    left = (r - 2 * d) < lo
    right = (r + 2 * d) > hi
    fp = np.empty_like(r)
    c = ~(left | right)
    if c.any():
        rc, dc = r[c], d[c]
        g = [dense(rc + k * dc)[1] for k in (-2, -1, 1, 2)]
        fp[c] = (g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * dc)
    one = left ^ right
    if one.any():
        sign = np.where(left[one], 1.0, -1.0)
        rs = r[one]
        ds = np.minimum(d[one], np.maximum(hi[one] - lo[one], 1e-6) / 5) * sign
        g = [dense(rs + k * ds)[1] for k in range(5)]
        fp[one] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12 * ds)
    both = left & right
    if both.any():
        rb = r[both]
        h = 1e-7 * np.maximum(1.0, rb)
        fp[both] = (dense(rb + h)[1] - dense(rb - h)[1]) / (2 * h)
    return fp + (N - 1) * model.dlog(r) * dense(r)[1]


def solve_sublinear(profile, m, U0=1.0, rtol=1e-12, atol=1e-14):
    """Radial solution of Delta U = |U|^(1/m) with U(0) = U0, U'(0) = 0 on the profile grid."""
    if m <= 1:
        raise DomainError("m must exceed 1")
    if U0 <= 0:
        raise DomainError("U0 must be positive")
    model, N = profile.model, profile.N
    R = float(profile.r[-1])
    inv = 1.0 / m
    c = U0**inv / N
    y = np.array([U0 + 0.5 * c * R_EPS**2, c * R_EPS])

    def rhs(r, y):
        drift = (N - 1) * model.dlog_at(r)
        u = y[0]
        return np.array([y[1], math.copysign(abs(u) ** inv, u) - drift * y[1]])

    breaks = [R_EPS] + [s for s in model.splice_points if R_EPS < s < R] + [R]
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise SolverError(f"sublinear integration failed on [{a}, {b}]: {sol.message}")
        if np.any(sol.y[0] <= 0):
            raise SolverError("U lost positivity")
        pieces.append(sol.sol)
        y = sol.y[:, -1]
    dense = _DenseU(tuple(breaks), tuple(pieces), float(U0), float(m), int(N))
    U, U1 = dense(profile.r)
    U[0], U1[0] = U0, 0.0
    return EllipticSolution(profile=profile, m=float(m), U0=float(U0), U=U, U1=U1, dense=dense)


@dataclass(frozen=True)
class SandwichConstants:
    C1_meas: float
    C2_meas: float
    K1_meas: float
    K2_meas: float
    kappa: float
    b: float
    lower_margin: float
    upper_margin: float

    def as_dict(self):
        return dict(self.__dict__)


def sandwich_bounds(sol):
    """Pointwise (lower, upper) bounds on U implied by the iterated comparison argument."""
    m, H = sol.m, sol.profile.H
    e = m / (m - 1.0)
    lower = kappa_m(m) ** e * H**e
    upper = (sol.U0 ** (1.0 / e) + H / e) ** e
    return lower, upper


def verify_sandwich(sol, b=1.0, rtol=VERIFY_RTOL):
    """Check both bounds at every node and measure the growth constants.

    The lower bound is only asserted when U0 >= 1, where the iteration that
    produces it starts.  C1, C2 are the extreme values of U / (H+1)^(m/(m-1));
    K1, K2 those of (U + b^(m/(m-1)))^(1/m) / (H+1+b)^(1/(m-1)).
    """
    m, H, U = sol.m, sol.profile.H, sol.U
    e = m / (m - 1.0)
    lower, upper = sandwich_bounds(sol)
    if sol.U0 >= 1.0:
        slack = U - lower
        bad = slack < -rtol * np.maximum(U, 1.0)
        if bad.any():
            i = int(np.argmax(bad))
            raise VerificationError("lower bound violated", {
                "node": i, "r": float(sol.r[i]), "U": float(U[i]), "bound": float(lower[i])})
        lower_margin = float(np.min(slack / np.maximum(U, 1.0)))
    else:
        lower_margin = math.nan
    lhs = U ** (1.0 / e)
    rhs = sol.U0 ** (1.0 / e) + H / e
    bad = lhs > rhs * (1 + rtol)
    if bad.any():
        i = int(np.argmax(bad))
        raise VerificationError("upper bound violated", {
            "node": i, "r": float(sol.r[i]), "U^((m-1)/m)": float(lhs[i]), "bound": float(rhs[i])})
    ratio = U / (H + 1.0) ** e
    kr = (U + b**e) ** (1.0 / m) / (H + 1.0 + b) ** (1.0 / (m - 1.0))
    return SandwichConstants(
        C1_meas=float(ratio.min()), C2_meas=float(ratio.max()),
        K1_meas=float(kr.min()), K2_meas=float(kr.max()), kappa=kappa_m(m), b=float(b),
        lower_margin=lower_margin, upper_margin=float(np.min((rhs - lhs) / rhs)))


@dataclass(frozen=True)
class SeparableProfile:
    """Profile U_{T,alpha} of the separable solution (1 - t/T)^(-1/(m-1)) U_{T,alpha}(r)."""

    T: float
    alpha: float
    m: float
    values: np.ndarray
    base: EllipticSolution

    @property
    def r(self):
        return self.base.r

    @property
    def scale(self):
        return ((self.m - 1.0) * self.T) ** (-1.0 / (self.m - 1.0))

    def at(self, r):
        return self.scale * _spow(self.base.dense(r)[0], 1.0 / self.m)

    def solution(self, r, t):
        """Separable PME solution at radii ``r`` and time ``t < T``."""
        if t >= self.T:
            raise DomainError("t must be smaller than the blow-up time")
        return (1.0 - t / self.T) ** (-1.0 / (self.m - 1.0)) * self.at(r)

    def residual(self, delta=1e-4):
        """Relative residual of Delta(U^m) - U/(T(m-1)) at interior nodes."""
        m, T = self.m, self.T
        # U_{T,a}^m = scale^m * U, so Delta(U_{T,a}^m) = scale^m * Delta U
        lap = self.scale**m * self.base.laplacian(delta=delta)
        target = self.values[1:-1] / (T * (m - 1.0))
        return np.abs(lap - target) / np.abs(target)


def make_separable(profile, m, T, alpha):
    if T <= 0 or alpha <= 0:
        raise DomainError("T and alpha must be positive")
    U0 = ((m - 1.0) * T) ** (m / (m - 1.0)) * alpha**m
    base = solve_sublinear(profile, m, U0)
    scale = ((m - 1.0) * T) ** (-1.0 / (m - 1.0))
    values = scale * _spow(base.U, 1.0 / m)
    return SeparableProfile(T=float(T), alpha=float(alpha), m=float(m), values=values, base=base)


@dataclass(frozen=True)
class Supersolution:
    """(1 - t/T)^(-1/(m-1)) (L/K1) (U + b^(m/(m-1)))^(1/m), U solved from U0 = 1."""

    base: EllipticSolution
    L: float
    b: float
    K1: float
    T: float

    @property
    def m(self):
        return self.base.m

    def _space(self, r):
        m = self.m
        U = self.base.dense(r)[0]
        return (self.L / self.K1) * (U + self.b ** (m / (m - 1.0))) ** (1.0 / m)

    def __call__(self, r, t):
        if t >= self.T:
            raise DomainError("t must be smaller than T")
        return (1.0 - t / self.T) ** (-1.0 / (self.m - 1.0)) * self._space(r)

    def residual(self, t, delta=1e-4):
        """u_t - Delta(u^m) at interior nodes, scaled by |u_t|; nonnegative for a supersolution."""
        if t >= self.T:
            raise DomainError("t must be smaller than T")
        m, T = self.m, self.T
        r = self.base.r[1:-1]
        amp = (1.0 - t / T) ** (-m / (m - 1.0))
        ut = amp * self._space(r) / ((m - 1.0) * T)
        # u^m = amp (L/K1)^m (U + b'), and Delta(U + b') = Delta U
        lap = amp * (self.L / self.K1) ** m * self.base.laplacian(r, delta=delta)
        return (ut - lap) / np.abs(ut)


def build_supersolution(profile, m, L, b, constants, base=None):
    """Supersolution dominating data of weighted norm L; its blow-up time is the existence bound."""
    from .growth_norms import existence_time

    if L <= 0:
        raise DomainError("L must be positive")
    if base is None:
        base = solve_sublinear(profile, m, 1.0)
    if abs(constants.b - b) > 1e-12 * max(1.0, b):
        constants = verify_sandwich(base, b=b)
    T = existence_time(L, m, constants.K1_meas)
    return Supersolution(base=base, L=float(L), b=float(b), K1=constants.K1_meas, T=T)
