import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import profile_for
from hpme.elliptic import (build_supersolution, kappa_m, make_separable, recurrence_sequences,
                           sandwich_bounds, solve_sublinear, verify_sandwich)
from hpme.errors import DomainError, VerificationError

SANDWICH_GEOMETRIES = [
    ("euclidean", 3, 11.2, {}),
    ("hyperbolic", 2, 22.0, {"c": 1.0}),
    ("quadratic", 3, 60.0, {"C0": 0.05}),
]


def test_kappa_values():
    assert kappa_m(2.0) == pytest.approx(1 / 6)
    assert kappa_m(3.0) == pytest.approx(4 / 12)
    assert kappa_m(1.5) == pytest.approx(0.25 / 3.75)


@pytest.mark.parametrize("m", [1.5, 2.0, 3.0, 7.0])
def test_recurrence_identities(m):
    C, p = recurrence_sequences(m, 20)
    k = kappa_m(m)
    np.testing.assert_allclose(C[1:], k * C[:-1] ** (1 / m), rtol=1e-12)
    np.testing.assert_allclose(p[1:], p[:-1] / m + 1, rtol=1e-12)
    C, p = recurrence_sequences(m, 80)
    assert C[-1] == pytest.approx(k ** (m / (m - 1)), rel=1e-10)
    assert p[-1] == pytest.approx(m / (m - 1), rel=1e-10)


def test_sublinear_against_independent_solver():
    # Radau in the variable r with the Euclidean drift (N-1)/r, started from the series
    prof = profile_for("euclidean", N=3, R=8.0)
    m, U0 = 2.0, 1.5
    sol = solve_sublinear(prof, m, U0)
    c = U0 ** (1 / m) / 3
    r0 = 1e-3

    def rhs(r, y):
        return [y[1], y[0] ** (1 / m) - 2 / r * y[1]]

    ref = solve_ivp(rhs, (r0, 8.0), [U0 + 0.5 * c * r0**2, c * r0], method="Radau",
                    rtol=1e-11, atol=1e-13, t_eval=[2.0, 5.0, 8.0])
    idx = [np.argmin(abs(sol.r - x)) for x in (2.0, 5.0, 8.0)]
    np.testing.assert_allclose(sol.U[idx], ref.y[0], rtol=1e-8)


@pytest.mark.parametrize("name,N,R,params", SANDWICH_GEOMETRIES)
def test_sublinear_residual(name, N, R, params):
    prof = profile_for(name, N=N, R=R, **params)
    sol = solve_sublinear(prof, 2.0, 1.0)
    lap = sol.laplacian()
    target = sol.U[1:-1] ** 0.5
    assert np.max(np.abs(lap - target) / target) <= 1e-6


def test_sublinear_is_increasing():
    sol = solve_sublinear(profile_for("hyperbolic", N=2, R=22.0, c=1.0), 3.0, 0.3)
    assert np.all(np.diff(sol.U) > 0)


@pytest.mark.parametrize("m", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("name,N,R,params", SANDWICH_GEOMETRIES)
def test_sandwich(m, name, N, R, params):
    prof = profile_for(name, N=N, R=R, **params)
    assert prof.H[-1] >= 20.0
    sol = solve_sublinear(prof, m, 1.0)
    consts = verify_sandwich(sol)
    assert consts.lower_margin >= 0 and consts.upper_margin >= 0
    assert 0 < consts.C1_meas <= consts.C2_meas
    lo, hi = sandwich_bounds(sol)
    assert np.all(lo <= sol.U) and np.all(sol.U <= hi * (1 + 1e-10))


@given(st.floats(1.0, 20.0), st.floats(1.2, 4.0))
@settings(max_examples=15, deadline=None)
def test_sandwich_property(U0, m):
    prof = profile_for("hyperbolic", N=2, R=12.0, c=1.0)
    verify_sandwich(solve_sublinear(prof, m, U0))


def test_lower_bound_skipped_below_one():
    prof = profile_for("hyperbolic", N=2, R=12.0, c=1.0)
    consts = verify_sandwich(solve_sublinear(prof, 2.0, 0.01))
    assert math.isnan(consts.lower_margin)


def test_sandwich_violation_reported():
    prof = profile_for("hyperbolic", N=2, R=12.0, c=1.0)
    sol = solve_sublinear(prof, 2.0, 1.0)
    bad = type(sol)(profile=sol.profile, m=sol.m, U0=sol.U0, U=sol.U * 3, U1=sol.U1,
                    dense=sol.dense)
    with pytest.raises(VerificationError) as exc:
        verify_sandwich(bad)
    assert "node" in exc.value.report


def test_sublinear_rejects_bad_input():
    prof = profile_for("euclidean", N=3, R=5.0)
    with pytest.raises(DomainError):
        solve_sublinear(prof, 1.0)
    with pytest.raises(DomainError):
        solve_sublinear(prof, 2.0, U0=0.0)


def test_elliptic_csv(tmp_path):
    sol = solve_sublinear(profile_for("euclidean", N=3, R=5.0), 2.0)
    sol.to_csv(tmp_path / "e.csv")
    head = (tmp_path / "e.csv").read_text().splitlines()[0]
    assert head == "r,U,dU,lower_bound,upper_bound"


# ---------------------------------------------------------------- separable solutions

@pytest.fixture(scope="module")
def sep():
    return make_separable(profile_for("hyperbolic", N=2, R=22.0, c=1.0), 2.0, 1.0, 1.0)


def test_separable_origin_value(sep):
    # U_{T,alpha}(0) = alpha
    assert sep.values[0] == pytest.approx(1.0, rel=1e-12)
    assert sep.base.U0 == pytest.approx(1.0)


def test_separable_residual(sep):
    assert sep.residual().max() <= 1e-6


@pytest.mark.parametrize("m,T,alpha", [(3.0, 0.5, 2.0), (1.5, 2.0, 0.5)])
def test_separable_residual_other_parameters(m, T, alpha):
    s = make_separable(profile_for("hyperbolic", N=2, R=22.0, c=1.0), m, T, alpha)
    assert s.values[0] == pytest.approx(alpha, rel=1e-12)
    assert s.residual().max() <= 1e-6


def test_separable_time_factor(sep):
    r = np.array([0.0, 3.0])
    np.testing.assert_allclose(sep.solution(r, 0.5), 2.0 * sep.at(r), rtol=1e-14)
    with pytest.raises(DomainError):
        sep.solution(r, 1.0)


def test_separable_weighted_norm_bounded(sep):
    # critical growth: U_{T,alpha} / (H + 1) stays bounded and away from zero
    ratio = sep.values / (sep.base.profile.H + 1)
    assert 0.05 < ratio.min() and ratio.max() < 2.0


# ---------------------------------------------------------------- supersolution

def test_supersolution_residual_nonnegative():
    prof = profile_for("hyperbolic", N=2, R=22.0, c=1.0)
    m, b = 2.0, 1.0
    base = solve_sublinear(prof, m, 1.0)
    consts = verify_sandwich(base, b=b)
    sup = build_supersolution(prof, m, L=0.8, b=b, constants=consts, base=base)
    assert sup.T == pytest.approx(consts.K1_meas / 0.8)
    for t in (0.0, 0.5 * sup.T, 0.9 * sup.T):
        assert sup.residual(t).min() >= 0.0


def test_supersolution_dominates_data():
    prof = profile_for("hyperbolic", N=2, R=22.0, c=1.0)
    m, b, L = 2.0, 1.0, 0.8
    base = solve_sublinear(prof, m, 1.0)
    sup = build_supersolution(prof, m, L, b, verify_sandwich(base, b=b), base=base)
    # any datum of weighted norm L lies below the supersolution at t = 0
    datum = L * (prof.H + 1 + b)
    assert np.all(sup(prof.r, 0.0) >= datum * (1 - 1e-10))


@pytest.mark.parametrize("N", [2, 3])
def test_second_derivative_at_origin(N):
    # Delta U(0) = N U''(0) = U0^(1/m) = 1
    sol = solve_sublinear(profile_for("hyperbolic", N=N, R=5.0, c=1.0), 2.0, 1.0)
    r = 1e-3
    U = sol.dense(np.array([r]))[0][0]
    assert (U - 1.0) / (0.5 * r * r) == pytest.approx(1.0 / N, rel=1e-4)


def test_bounds_at_H_equal_10():
    prof = profile_for("hyperbolic", N=3, R=25.0, c=1.0)
    sol = solve_sublinear(prof, 2.0, 1.0)
    i = int(np.argmin(np.abs(prof.H - 10.0)))
    H = prof.H[i]
    assert (H / 6) ** 2 <= sol.U[i] <= (1 + H / 2) ** 2


def test_U_independent_of_grid():
    # the integrator is adaptive: node placement does not change U
    from hpme.geometry import compute_H, make_grid, model_from_name

    M = model_from_name("hyperbolic", c=1.0)
    a = solve_sublinear(compute_H(M, 2, make_grid(M, 2, 10.0, dr0=0.1, ratio=1.0, h_max=0.1)), 2.0)
    b = solve_sublinear(compute_H(M, 2, make_grid(M, 2, 10.0, dr0=0.05, ratio=1.0, h_max=0.05)), 2.0)
    np.testing.assert_allclose(b.U[::2], a.U, rtol=1e-10)
