"""Barrier functions used in uniqueness arguments, with nodewise certificates.

Every inequality is checked on grid nodes.  Quantities that overflow in
linear form (psi^(N-1), exp(K log psi)) are handled through their logarithms
or through ratios such as Delta w / w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, ConstructionError, DomainError
from .geometry import ModelFunction, compute_H, make_grid, splice_quadratic_psi

MARGIN_TOL = 1e-9
SQRT2 = math.sqrt(2.0)
CHAIN = (1.0 + SQRT2) / SQRT2


@dataclass(frozen=True)
class Certificate:
    """Outcome of a nodewise inequality check; margins are normalised so 0 is the boundary."""

    name: str
    window: tuple
    min_margin: float
    argmin_r: float
    passed: bool

    @classmethod
    def from_margins(cls, name, r, margin, window=None, threshold=MARGIN_TOL):
        r = np.asarray(r, dtype=float)
        margin = np.asarray(margin, dtype=float)
        if margin.size == 0:
            raise DomainError(f"{name}: empty certification window")
        i = int(np.nanargmin(margin))
        window = (float(r[0]), float(r[-1])) if window is None else tuple(map(float, window))
        ok = bool(np.all(np.isfinite(margin)) and margin[i] >= threshold)
        return cls(name, window, float(margin[i]), float(r[i]), ok)

    def as_dict(self):
        return {"name": self.name, "window": list(self.window), "min_margin": self.min_margin,
                "argmin_node": self.argmin_r, "pass": self.passed}


def _window(profile, r0, Rmax):
    if not 0 < r0 < Rmax:
        raise DomainError("need 0 < r0 < Rmax")
    if Rmax > profile.r[-1] * (1 + 1e-12):
        raise DomainError("profile does not reach Rmax")
    r = profile.r
    return np.nonzero((r >= r0 * (1 - 1e-12)) & (r <= Rmax * (1 + 1e-12)))[0]


# --------------------------------------------------------------------------
# hypothesis on H''' and its consequence for H''

@dataclass(frozen=True)
class HypothesisReport:
    r0: float
    Rmax: float
    K_meas: float
    K: float
    K_hat: float
    holds: bool
    certificates: tuple = ()

    def as_dict(self):
        return {"r0": self.r0, "Rmax": self.Rmax, "K_meas": self.K_meas, "K": self.K,
                "K_hat": self.K_hat, "holds": self.holds,
                "certificates": [c.as_dict() for c in self.certificates]}


def k_hat(K):
    return SQRT2 + 2.0 * K * math.log(CHAIN)


def check_H_hypothesis(profile, r0, Rmax, K=None, tol=1e-10):
    """Check H''' <= K H'/H on [r0, Rmax] and the bound -H'' <= K_hat it implies.

    With ``K`` omitted the smallest admissible value, the sup of H''' H / H'
    clamped at 0, is used.
    """
    idx = _window(profile, r0, Rmax)
    r, H, H1, H2, H3 = (a[idx] for a in (profile.r, profile.H, profile.H1, profile.H2, profile.H3))
    if np.any(H1 <= 0) or np.any(H <= 0):
        raise DomainError("H' vanishes inside the window")
    K_meas = max(0.0, float(np.max(H3 * H / H1)))
    K_use = K_meas if K is None else float(K)
    scale = np.maximum(H1 / H, np.abs(H3))
    hyp = Certificate.from_margins("H''' <= K H'/H", r, (K_use * H1 / H - H3) / scale,
                                   threshold=-tol)
    Kh = k_hat(K_use)
    second = Certificate.from_margins("-H'' <= K_hat", r, (Kh + H2) / Kh)
    # sqrt(H(r + sqrt H)) <= (1+sqrt2)/sqrt2 sqrt(H(r)), where r + sqrt H stays in range
    reach = r + np.sqrt(H) <= profile.r[-1]
    certs = [hyp, second]
    if reach.any():
        Hs = profile.H_at(r[reach] + np.sqrt(H[reach]))
        lhs, rhs = np.sqrt(Hs), CHAIN * np.sqrt(H[reach])
        certs.append(Certificate.from_margins("chain sqrt bound", r[reach], (rhs - lhs) / rhs))
    holds = hyp.passed
    return HypothesisReport(float(r0), float(Rmax), K_meas, K_use, Kh, holds, tuple(certs))


# --------------------------------------------------------------------------
# w = H' H^(-alpha) psi^(-(N-1)) and its capped, smoothed extension z

def _bracket(alpha, H, H1, H2, H3):
    return (-4 * alpha * H1 * H2 / H + alpha * H1 / H
            + alpha * (alpha + 1) * H1**3 / H**2 + 2 * H3)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x * x)


def _dsmoothstep(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 30 * x * x * (1 - x) ** 2, 0.0)


@dataclass(frozen=True)
class BarrierW:
    alpha: float
    r0: float
    Rmax: float
    r: np.ndarray
    log_w: np.ndarray
    dlog_w: np.ndarray
    lap_over_w: np.ndarray
    C_required: float
    kappa: float
    K: float
    K_hat: float
    fd_max_error: float
    certificates: tuple = field(default=())

    @property
    def passed(self):
        return all(c.passed for c in self.certificates)

    def as_dict(self):
        return {"alpha": self.alpha, "r0": self.r0, "Rmax": self.Rmax,
                "C_required": self.C_required, "kappa": self.kappa, "K": self.K,
                "K_hat": self.K_hat, "fd_max_error": self.fd_max_error, "pass": self.passed,
                "certificates": [c.as_dict() for c in self.certificates]}


def _log_w(profile, alpha, r):
    H, g = profile.dense(r)
    N = profile.N
    return np.log(g) - alpha * np.log(H) - (N - 1) * profile.model.log_psi(r)


def fd_lap_over_w(profile, alpha, r, delta):
    """Delta w / w from central differences of log w built on the dense H solution."""
    d = delta * np.maximum(1.0, r)
    L = [_log_w(profile, alpha, r + k * d) for k in (-2, -1, 0, 1, 2)]
    L1 = (L[0] - 8 * L[1] + 8 * L[3] - L[4]) / (12 * d)
    L2 = (-L[0] + 16 * L[1] - 30 * L[2] + 16 * L[3] - L[4]) / (12 * d * d)
    drift = (profile.N - 1) * profile.model.dlog(r)
    return L2 + L1**2 + drift * L1


def build_barrier_w(profile, alpha, r0, Rmax=None, K=None, width=0.1, delta=2e-3):
    """Build w, certify Delta w <= C w / H on [r0, Rmax] and the extension z.

    z equals w(r0) inside the ball and w beyond r0 + width, with
    z' = chi w' for a quintic smooth step chi.  Then Delta z = chi' w' + chi Delta w,
    which is certified against 2 kappa z / (H + 1), kappa = C + C/H(r0).
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    Rmax = float(profile.r[-1] if Rmax is None else Rmax)
    hyp = check_H_hypothesis(profile, r0, Rmax, K)
    if not hyp.holds:
        raise ConstructionError("hypothesis on H''' fails on the window")
    Kv, Kh = hyp.K, hyp.K_hat
    C = 2 * Kv + 2 * alpha * (alpha + 1) + alpha + 4 * alpha * Kh
    H_r0 = float(profile.H_at(np.array([r0]))[0])
    kappa = C + C / H_r0

    idx = _window(profile, r0, Rmax)
    r = profile.r[idx]
    H, H1, H2, H3 = (a[idx] for a in (profile.H, profile.H1, profile.H2, profile.H3))
    brk = _bracket(alpha, H, H1, H2, H3)
    lap_over_w = brk / H1
    dlog_w = (2 * H2 - 1 - alpha * H1**2 / H) / H1
    log_w = np.log(H1) - alpha * np.log(H) - (profile.N - 1) * profile.log_psi[idx]

    terms = (np.abs(4 * alpha * H1 * H2 / H) + alpha * H1 / H
             + alpha * (alpha + 1) * H1**3 / H**2 + 2 * np.abs(H3)) / H1
    inner = r[(r - 2 * delta * np.maximum(1, r) > r0) & (r + 2 * delta * np.maximum(1, r) < profile.r[-1])]
    sel = np.isin(r, inner)
    fd = fd_lap_over_w(profile, alpha, r[sel], delta)
    fd_err = np.abs(fd - lap_over_w[sel]) / terms[sel]
    fd_max = float(fd_err.max()) if fd_err.size else 0.0

    certs = [
        Certificate.from_margins("Delta w <= C w/H", r, (C / H - lap_over_w) / (C / H)),
        Certificate.from_margins("w' < 0", r, -dlog_w * H1),
        Certificate.from_margins("drift H' >= 1/2", profile.r[1:],
                                 profile.drift[1:] * profile.H1[1:] - 0.5, threshold=-1e-12),
        Certificate.from_margins("closed form vs finite differences", r[sel],
                                 1e-4 - fd_err if fd_err.size else np.array([1.0])),
    ]
    certs.append(_certify_z(profile, alpha, r0, Rmax, width, kappa))
    return BarrierW(float(alpha), float(r0), Rmax, r, log_w, dlog_w, lap_over_w, C, kappa,
                    Kv, Kh, fd_max, tuple(certs))


def _certify_z(profile, alpha, r0, Rmax, width, kappa):
    """Delta z / z <= 2 kappa / (H + 1) on [0, Rmax]."""
    N = profile.N
    rs = np.linspace(r0, r0 + width, 201)
    H, g, H2, H3 = profile.H_derivatives_at(rs)
    lw = np.log(g) - alpha * np.log(H) - (N - 1) * profile.model.log_psi(rs)
    w_rel = np.exp(lw - lw[-1])  # w / w(r0 + width)
    dw_rel = w_rel * (2 * H2 - 1 - alpha * g**2 / H) / g
    lap_rel = w_rel * _bracket(alpha, H, g, H2, H3) / g
    x = (rs - r0) / width
    chi, dchi = _smoothstep(x), _dsmoothstep(x) / width
    # z(r) = w(r0 + width) - int_r^{r0+width} chi w'
    f = chi * dw_rel
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(rs))])
    z_rel = 1.0 - (cum[-1] - cum)
    lap_z = dchi * dw_rel + chi * lap_rel
    trans = 2 * kappa / (H + 1) - lap_z / z_rel

    # beyond the transition z = w; inside the ball Delta z = 0
    idx = _window(profile, r0 + width, Rmax)
    rr = profile.r[idx]
    Hh, H1, H2h, H3h = (a[idx] for a in (profile.H, profile.H1, profile.H2, profile.H3))
    outer = 2 * kappa / (Hh + 1) - _bracket(alpha, Hh, H1, H2h, H3h) / H1
    ball = profile.r < r0
    inner = 2 * kappa / (profile.H[ball] + 1)
    r_all = np.concatenate([profile.r[ball], rs, rr])
    scale = 2 * kappa / (np.concatenate([profile.H[ball], H, Hh]) + 1)
    margin = np.concatenate([inner, trans, outer]) / scale
    return Certificate.from_margins("Delta z <= 2 kappa z/(H+1)", r_all, margin, (0.0, Rmax))


# --------------------------------------------------------------------------
# the B-function, the log condition, and the backward barrier

def compute_B(profile_or_model, r=None):
    """(psi/psi')^2 log psi for r >= 2 and 1 on [0, 2).

    Returns ``(B, flagged)`` where ``flagged`` marks radii >= 2 with log psi <= 0.
    """
    if r is None:
        model, r = profile_or_model.model, profile_or_model.r
    else:
        model = getattr(profile_or_model, "model", profile_or_model)
        r = np.asarray(r, dtype=float)
    B = np.ones_like(r, dtype=float)
    tail = r >= 2.0
    lp = model.log_psi(r[tail])
    B[tail] = lp / model.dlog(r[tail]) ** 2
    flagged = np.zeros_like(r, dtype=bool)
    flagged[tail] = lp <= 0
    return B, flagged


@dataclass(frozen=True)
class LogConditionReport:
    l: float
    Rmax: float
    max_ratio: float
    argmax_r: float
    holds: bool

    def __bool__(self):
        return self.holds

    def as_dict(self):
        return dict(self.__dict__)


def check_log_condition(model, l, Rmax, n=4001):
    """log psi(r) <= l log psi(r - 1) on a uniform grid of [3, Rmax]."""
    if l <= 1:
        raise DomainError("l must exceed 1")
    if Rmax < 3:
        raise DomainError("Rmax must be at least 3")
    r = np.linspace(3.0, Rmax, n)
    ratio = model.log_psi(r) / model.log_psi(r - 1.0)
    i = int(np.argmax(ratio))
    return LogConditionReport(float(l), float(Rmax), float(ratio[i]), float(r[i]),
                              bool(np.all(ratio <= l)))


def uniqueness_horizon(K, l, m, N):
    """Largest admissible T (exclusive) for the boundary flux to vanish."""
    return (m - 1.0) * K / (2.0 * l * ((N - 1.0) * (m - 1.0) + 2.0 * m))


@dataclass(frozen=True)
class BackwardBarrier:
    """eta(r, t) = lambda exp(-K theta(r) / (2T - t)), theta = log psi; lambda kept as a log."""

    K: float
    T: float
    C2: float
    R0: float
    Rmax: float
    log_lambda: float
    model: ModelFunction
    constraint_margin: float
    certificate: Certificate
    worst_case: Certificate
    boundary: Certificate
    horizon: float = math.nan

    @property
    def passed(self):
        return self.certificate.passed

    def log_eta(self, r, t):
        th = self.model.log_psi(np.asarray(r, dtype=float))
        return self.log_lambda - self.K * th / (2 * self.T - t)

    def __call__(self, r, t):
        return np.exp(self.log_eta(r, t))

    def as_dict(self):
        return {"K": self.K, "T": self.T, "C2": self.C2, "R0": self.R0, "Rmax": self.Rmax,
                "log_lambda": self.log_lambda, "constraint_margin": self.constraint_margin,
                "horizon": self.horizon, "pass": self.passed,
                "certificate": self.certificate.as_dict(),
                "worst_case": self.worst_case.as_dict(), "boundary": self.boundary.as_dict()}


def build_backward_barrier(profile, K, T, C2, R0, Rmax, m=None, l=None, strict=True, nt=41):
    """Certify eta_t + a Delta eta <= 0 on [R0, Rmax] x [0, T] for a = C2 * B.

    The exact radial Delta theta = psi''/psi + (N-2)(psi'/psi)^2 is used for
    the certificate; the ``worst_case`` certificate replaces it by its lower
    bound -(psi'/psi)^2, which reduces to 1 - C2 (2T - t + K).
    """
    if K <= 0 or T <= 0 or C2 <= 0:
        raise DomainError("K, T and C2 must be positive")
    if R0 < 2:
        raise DomainError("R0 must be at least 2")
    margin = 1.0 / C2 - (2 * T + K)
    if strict and margin < 0:
        raise ConstraintError(f"2T + K = {2 * T + K:g} exceeds 1/C2 = {1 / C2:g}", margin)
    model, N = profile.model, profile.N
    idx = _window(profile, R0, Rmax)
    r = profile.r[idx]
    th = model.log_psi(r)
    if np.any(th <= 0):
        raise DomainError("log psi must be positive on the annulus")
    dth = model.dlog(r)
    lap_th = model.ddratio(r) + (N - 2) * dth**2
    a = C2 * compute_B(model, r)[0]
    t = np.linspace(0.0, T, nt)[:, None]
    s = 2 * T - t
    # (eta_t + a Delta eta) / eta
    rate = -K * th / s**2 + a * (-K / s * lap_th + (K / s) ** 2 * dth**2)
    norm = -rate * s**2 / (K * th)
    worst = -(-K * th / s**2 + a * (K / s * dth**2 + (K / s) ** 2 * dth**2)) * s**2 / (K * th)
    rr = np.broadcast_to(r, norm.shape).ravel()
    cert = Certificate.from_margins("eta_t + a Delta eta <= 0", rr, norm.ravel(), (R0, Rmax))
    wc = Certificate.from_margins("worst-case Laplacian bound", rr, worst.ravel(), (R0, Rmax))
    th0 = float(model.log_psi(np.array([R0]))[0])
    log_lam = K * th0 / T
    eta_R0 = log_lam - K * th0 / (2 * T - t.ravel())
    # eta >= 1 on the inner boundary; margin is log eta, 0 exactly at t = T
    bnd = Certificate.from_margins("eta >= 1 at R0", np.full(nt, R0), eta_R0, (R0, R0),
                                   threshold=-1e-12)
    horizon = uniqueness_horizon(K, l, m, N) if (m is not None and l is not None) else math.nan
    return BackwardBarrier(float(K), float(T), float(C2), float(R0), float(Rmax), log_lam, model,
                           margin, cert, wc, bnd, horizon)


# --------------------------------------------------------------------------
# the perturbed model phi

def _phi_tail(C0, kappa):
    def log_g(r):
        return 0.5 * C0 * r**2 - kappa * np.log(np.log(r))

    def dlog_g(r):
        return C0 * r - kappa / (r * np.log(r))

    def ddratio_g(r):
        lr = np.log(r)
        return (C0 * (1 + C0 * r**2) + kappa / (r**2 * lr) * (1 + (kappa + 1) / lr)
                - 2 * kappa * C0 / lr)

    return log_g, dlog_g, ddratio_g


def phi_model(C0, kappa, R0):
    """phi = r on [0, R0), A exp(C0 r^2/2)/(log r)^kappa + B beyond, C^1 at R0."""
    if R0 <= 1:
        raise ConstructionError("R0 must exceed 1")
    log_g, dlog_g, ddratio_g = _phi_tail(C0, kappa)
    x0 = np.array([float(R0)])
    lg0, q0 = float(log_g(x0)[0]), float(dlog_g(x0)[0])
    if q0 <= 0:
        raise ConstructionError("tail is not increasing at R0")
    # A g'(R0) = 1, B = R0 - g/g'(R0)
    log_A = -(lg0 + math.log(q0))
    B = R0 - 1.0 / q0
    if B <= 0:
        raise ConstructionError("B would not be positive")

    def rel(r):  # B / (A g)
        return np.exp(math.log(B) - log_A - log_g(r))

    def split(r, inner, outer):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lo = r < R0
        if lo.any():
            out[lo] = inner(r[lo])
        if (~lo).any():
            out[~lo] = outer(r[~lo])
        return out

    def log_phi(r):
        with np.errstate(divide="ignore"):
            return split(r, np.log, lambda x: log_A + log_g(x) + np.log1p(rel(x)))

    def dlog(r):
        with np.errstate(divide="ignore"):
            return split(r, lambda x: 1.0 / x, lambda x: dlog_g(x) / (1 + rel(x)))

    def ddratio(r):
        return split(r, np.zeros_like, lambda x: ddratio_g(x) / (1 + rel(x)))

    def psi(r):
        return np.exp(log_phi(r)) if np.ndim(r) else float(np.exp(log_phi(r)))

    model = ModelFunction(
        kind="phi_perturbation", params={"C0": C0, "kappa": kappa, "R0": R0},
        psi_fn=lambda r: split(r, lambda x: x.copy(), lambda x: np.exp(log_phi(x))),
        dpsi_fn=lambda r: split(r, np.ones_like, lambda x: np.exp(log_phi(x)) * dlog(x)),
        ddpsi_fn=lambda r: split(r, np.zeros_like, lambda x: np.exp(log_phi(x)) * ddratio(x)),
        log_psi_fn=log_phi, dlog_fn=dlog, ddratio_fn=ddratio,
        splice_points=(float(R0),), ddpsi_jumps=(float(ddratio(x0)[0]),))
    object.__setattr__(model, "matching", {"log_A": log_A, "B": B, "R0": R0})
    return model


@dataclass(frozen=True)
class PhiPerturbation:
    model: ModelFunction
    R0: float
    K: float
    K_pert: float
    K_pert_required: float
    certificates: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.certificates)

    def as_dict(self):
        return {"R0": self.R0, "K": self.K, "K_pert": self.K_pert,
                "K_pert_required": self.K_pert_required, "pass": self.passed,
                "matching": dict(self.model.matching),
                "certificates": [c.as_dict() for c in self.certificates]}


def build_phi_perturbation(C0, kappa, K, r0, N=3, Rmax=100.0, K_pert=None, n=4001,
                           R0_candidates=None, profile=None):
    """Perturbed model phi and certificates for its curvature and log-derivative bounds.

    Certifies phi''/phi <= C0 (1 + C0 r^2) - K / log r on (R0, Rmax] and
    phi'/phi >= psi'/psi - K_pert H'/H on [r0, Rmax] for the quadratic model psi.
    ``K_pert`` defaults to 2 kappa; the measured smallest admissible value is
    reported as ``K_pert_required``.
    """
    if kappa <= K / C0:
        raise ConstructionError("kappa must exceed K / C0")
    K_pert = 2.0 * kappa if K_pert is None else float(K_pert)
    if R0_candidates is None:
        R0_candidates = np.arange(1.5, r0 + 1e-9, 0.25)
    chosen = None
    for R0 in R0_candidates:
        try:
            phi = phi_model(C0, kappa, float(R0))
        except ConstructionError:
            continue
        rt = np.linspace(R0, Rmax, n)[1:]
        lr = np.log(rt)
        bound = C0 * (1 + C0 * rt**2) - K / lr
        m_ter = (bound - phi.ddratio(rt)) * lr / K
        if np.all(phi.ddratio(rt) >= 0) and np.min(m_ter) >= MARGIN_TOL:
            chosen = (phi, float(R0), rt, m_ter)
            break
    if chosen is None:
        raise ConstructionError("no admissible R0 found in the search range")
    phi, R0, rt, m_ter = chosen
    if r0 < R0:
        raise ConstructionError("r0 must be at least R0")
    psi = splice_quadratic_psi(C0)
    if profile is None:
        profile = compute_H(psi, N, make_grid(psi, N, Rmax, h_max=0.05))
    rp = np.linspace(r0, Rmax, n)
    H, H1 = profile.dense(rp)
    gap = psi.dlog(rp) - phi.dlog(rp)  # must be <= K_pert H'/H
    need = float(np.max(gap * H / H1))
    m_pert = (K_pert * H1 / H - gap) / (K_pert * H1 / H)
    certs = (
        Certificate.from_margins("phi''/phi <= C0(1+C0 r^2) - K/log r", rt, m_ter),
        Certificate.from_margins("phi'/phi >= psi'/psi - K H'/H", rp, m_pert),
    )
    return PhiPerturbation(phi, R0, float(K), K_pert, need, certs)
