"""Weighted sup-norms measured against H, growth classification and existence times."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

STABLE_TOL = 0.02
# a fitted limit below this fraction of the last sup counts as decay to zero
VANISH_FRACTION = 0.25


@dataclass(frozen=True)
class RadialDatum:
    """Radial initial datum: a vectorised sampler ``f(r)`` with an optional tag."""

    sampler: object
    tag: str = ""

    def __call__(self, r):
        return np.asarray(self.sampler(np.asarray(r, dtype=float)), dtype=float)


@dataclass(frozen=True)
class GrowthClass:
    variant: str  # subcritical | critical | supercritical | undecided
    value: float = float("nan")
    probe_radii: tuple = ()
    window_sups: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {"variant": self.variant, "value": self.value,
                "probe_radii": list(self.probe_radii), "window_sups": list(self.window_sups),
                "diagnostics": dict(self.diagnostics)}


def _samples(f, profile):
    r = profile.r
    if r.size == 0:
        raise DomainError("empty grid")
    if callable(f):
        vals = np.asarray(f(r), dtype=float)
        if vals.shape != r.shape:
            vals = np.broadcast_to(vals, r.shape).astype(float)
    else:
        vals = np.asarray(f, dtype=float)
        if vals.shape != r.shape:
            raise DomainError("sampled datum does not match the profile grid")
    if not np.all(np.isfinite(vals)):
        raise DomainError("datum is not finite at every node")
    return vals


def weighted_norm(f, b, m, profile):
    """max_r |f(r)| / (H(r) + 1 + b)^(1/(m-1))."""
    if b < 0 or m <= 1:
        raise DomainError("need b >= 0 and m > 1")
    vals = _samples(f, profile)
    return float(np.max(np.abs(vals) / (profile.H + 1.0 + b) ** (1.0 / (m - 1.0))))


def norm_table(f, m, profile, bs=(0.0, 1.0, 10.0, 100.0)):
    return {float(b): weighted_norm(f, b, m, profile) for b in bs}


def _extrapolate(h, s):
    """Fit s = L + A h^beta through three points; returns (L, beta) or None."""
    (h1, h2, h3), (s1, s2, s3) = h, s
    d1, d2 = s2 - s1, s3 - s2
    if d1 == 0 or d1 * d2 <= 0:
        return None
    target = d2 / d1

    def ratio(beta):
        return (h3**beta - h2**beta) / (h2**beta - h1**beta) - target

    lo, hi = -20.0, 20.0
    grid = np.linspace(lo, hi, 401)
    grid = grid[np.abs(grid) > 1e-9]
    vals = np.array([ratio(x) for x in grid])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if idx.size == 0:
        return None
    beta = brentq(ratio, grid[idx[0]], grid[idx[0] + 1], xtol=1e-12)
    A = d1 / (h2**beta - h1**beta)
    return s3 - A * h3**beta, beta


def classify_growth(f, m, profile, probe_radii):
    """Estimate limsup |f| / H^(1/(m-1)) from sups over the windows [R/2, R].

    Window sups that agree within 2% give a critical value.  Otherwise
    s = L + A H^beta is fitted through the last three sups.  Decreasing sups
    whose fitted limit is below a quarter of the last one are subcritical,
    growth is supercritical, a positive limit approached from above is
    critical, anything else is undecided.
    """
    if m <= 1:
        raise DomainError("m must exceed 1")
    probe = np.asarray(probe_radii, dtype=float)
    if probe.size < 3 or np.any(np.diff(probe) <= 0):
        raise DomainError("need at least 3 increasing probe radii")
    if probe[-1] > profile.r[-1] * (1 + 1e-12):
        raise DomainError("probe radii exceed the profile range")
    vals = np.abs(_samples(f, profile))
    r, H = profile.r, profile.H
    sups, Hs = [], []
    for R in probe:
        sel = (r >= 0.5 * R) & (r <= R) & (H > 0)
        if not sel.any():
            raise DomainError(f"no nodes in the window [{R / 2}, {R}]")
        ratio = vals[sel] / H[sel] ** (1.0 / (m - 1.0))
        k = int(np.argmax(ratio))
        sups.append(float(ratio[k]))
        Hs.append(float(H[sel][k]))
    sups_a = np.asarray(sups)
    diag = {"window_H": Hs}
    tail = sups_a[-3:]
    common = dict(probe_radii=tuple(probe.tolist()), window_sups=tuple(sups))
    if tail.max() == 0:
        return GrowthClass("subcritical", 0.0, diagnostics=diag, **common)
    if (tail.max() - tail.min()) <= STABLE_TOL * tail.max():
        return GrowthClass("critical", float(tail[-1]), diagnostics=diag, **common)
    fit = _extrapolate(Hs[-3:], tail)
    steps = np.diff(tail)
    if fit is not None:
        L, beta = fit
        diag.update(limit=L, exponent=beta)
        if np.all(steps < 0) and beta < 0 and L <= VANISH_FRACTION * tail[-1]:
            return GrowthClass("subcritical", 0.0, diagnostics=diag, **common)
        if np.all(steps > 0) and beta > 0:
            return GrowthClass("supercritical", math.inf, diagnostics=diag, **common)
        if beta < 0 and L > 0:
            return GrowthClass("critical", float(L), diagnostics=diag, **common)
    elif np.all(steps > 0):
        return GrowthClass("supercritical", math.inf, diagnostics=diag, **common)
    return GrowthClass("undecided", math.nan, diagnostics=diag, **common)


def existence_time(L, m, K1):
    """T = K1^(m-1) / ((m-1) L^(m-1))."""
    if K1 <= 0 or m <= 1:
        raise DomainError("need K1 > 0 and m > 1")
    if L == 0:
        return math.inf
    if not math.isfinite(L):
        return 0.0
    return K1 ** (m - 1.0) / ((m - 1.0) * L ** (m - 1.0))


def max_existence_time(f, m, profile, K1, probe_radii=None, b=None):
    """Lower bound on the existence time of the solution with datum ``f``.

    With ``b`` given, the amplitude is the finite-b weighted norm; otherwise
    it is the critical value from ``classify_growth``.
    """
    if K1 <= 0:
        raise DomainError("K1 must be positive")
    if b is not None:
        return existence_time(weighted_norm(f, b, m, profile), m, K1)
    if probe_radii is None:
        R = profile.r[-1]
        probe_radii = (R / 4, R / 2, R)
    cls = classify_growth(f, m, profile, probe_radii)
    if cls.variant == "subcritical":
        return math.inf
    if cls.variant == "supercritical":
        warnings.warn("supercritical growth: no positive existence time", RuntimeWarning)
        return 0.0
    if cls.variant == "undecided":
        raise DomainError("growth class undecided; supply b for a finite-b estimate")
    return existence_time(cls.value, m, K1)
