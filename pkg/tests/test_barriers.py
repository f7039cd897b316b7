import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import profile_for
from hpme.barriers import (Certificate, build_backward_barrier, build_barrier_w,
                           build_phi_perturbation, check_H_hypothesis, check_log_condition,
                           compute_B, fd_lap_over_w, k_hat, phi_model, uniqueness_horizon)
from hpme.errors import ConstraintError, ConstructionError, DomainError
from hpme.geometry import euclidean, hyperbolic, model_from_name


def test_k_hat_values():
    assert k_hat(0.0) == pytest.approx(math.sqrt(2))
    assert k_hat(1.0) == pytest.approx(math.sqrt(2) + 2 * math.log(1 + 1 / math.sqrt(2)))


def test_certificate_from_margins():
    c = Certificate.from_margins("x", [1.0, 2.0, 3.0], [0.5, -0.1, 0.2])
    assert not c.passed and c.argmin_r == 2.0 and c.min_margin == -0.1
    assert c.as_dict()["window"] == [1.0, 3.0]
    assert not Certificate.from_margins("y", [1.0, 2.0], [0.1, np.nan]).passed
    with pytest.raises(DomainError):
        Certificate.from_margins("z", [], [])


# ---------------------------------------------------------------- hypothesis on H'''

def test_hypothesis_euclidean_has_zero_K():
    rep = check_H_hypothesis(profile_for("euclidean", N=3, R=20.0), 2.0, 20.0)
    # third derivative vanishes; only round-off survives
    assert rep.K_meas <= 1e-12 and rep.holds
    assert all(c.passed for c in rep.certificates)


def test_hypothesis_fails_with_too_small_K():
    prof = profile_for("quadratic", N=2, R=65.0, C0=1.0)
    rep = check_H_hypothesis(prof, 2.0, 60.0)
    assert rep.K_meas > 0 and rep.holds
    bad = check_H_hypothesis(prof, 2.0, 60.0, K=0.5 * rep.K_meas)
    assert not bad.holds


# ---------------------------------------------------------------- w barrier

@pytest.mark.parametrize("alpha", [0.5, 3.5])
@pytest.mark.parametrize("N", [2, 3])
def test_w_laplacian_euclidean_closed_form(alpha, N):
    # w = c r^-(2 alpha + N - 2), so Delta w / w = 2 alpha (2 alpha + N - 2) / r^2
    prof = profile_for("euclidean", N=N, R=25.0)
    bw = build_barrier_w(prof, alpha, 2.0, 20.0)
    np.testing.assert_allclose(bw.lap_over_w, 2 * alpha * (2 * alpha + N - 2) / bw.r**2,
                               rtol=1e-8)
    assert bw.C_required == pytest.approx(2 * alpha * (alpha + 1) + alpha
                                          + 4 * alpha * math.sqrt(2))
    assert bw.passed


@pytest.mark.parametrize("name,N,params", [
    ("hyperbolic", 2, {"c": 1.0}),
    ("quadratic", 2, {"C0": 1.0}),
    ("quadratic", 3, {"C0": 1.0}),
])
@pytest.mark.parametrize("r0", [2.0, 5.0])
def test_w_barrier_certificates(name, N, params, r0):
    prof = profile_for(name, N=N, R=65.0, **params)
    bw = build_barrier_w(prof, 3.5, r0, 60.0)
    names = [c.name for c in bw.certificates]
    assert "Delta z <= 2 kappa z/(H+1)" in names
    assert bw.passed, [c.as_dict() for c in bw.certificates if not c.passed]
    assert bw.fd_max_error <= 1e-4


def test_fd_lap_over_w_matches_closed_form():
    prof = profile_for("hyperbolic", N=2, R=65.0, c=1.0)
    bw = build_barrier_w(prof, 1.0, 2.0, 30.0)
    sel = (bw.r > 3) & (bw.r < 29)
    fd = fd_lap_over_w(prof, 1.0, bw.r[sel], 2e-3)
    np.testing.assert_allclose(fd, bw.lap_over_w[sel], rtol=1e-5, atol=1e-8)


def test_w_is_decreasing():
    bw = build_barrier_w(profile_for("hyperbolic", N=2, R=65.0, c=1.0), 3.5, 2.0, 60.0)
    assert np.all(np.diff(bw.log_w) < 0)


def test_w_barrier_rejects_bad_input():
    prof = profile_for("euclidean", N=3, R=20.0)
    with pytest.raises(DomainError):
        build_barrier_w(prof, -1.0, 2.0)
    with pytest.raises(DomainError):
        build_barrier_w(prof, 1.0, 2.0, 30.0)


def test_w_barrier_requires_hypothesis():
    prof = profile_for("quadratic", N=2, R=65.0, C0=1.0)
    with pytest.raises(ConstructionError):
        build_barrier_w(prof, 3.5, 2.0, 60.0, K=0.0)


# ---------------------------------------------------------------- B function, log condition

def test_B_hyperbolic_closed_form():
    r = np.array([0.5, 1.9, 2.0, 5.0, 30.0])
    B, flagged = compute_B(hyperbolic(), r)
    expect = np.where(r >= 2, np.tanh(r) ** 2 * np.log(np.sinh(r)), 1.0)
    np.testing.assert_allclose(B, expect, rtol=1e-12)
    assert not flagged.any()


def test_B_flags_nonpositive_log():
    B, flagged = compute_B(euclidean(), np.array([0.5, 2.0, 3.0]))
    assert not flagged.any()
    # psi = r: log psi > 0 for r >= 2, B = r^2 log r
    assert B[2] == pytest.approx(9 * math.log(3.0))


@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_B_power_asymptotics(sigma):
    # B k (2 - sigma)^2 / r^sigma -> 1
    k = 1.0
    B, _ = compute_B(model_from_name("power", k=k, sigma=sigma), np.array([100.0]))
    assert B[0] * k * (2 - sigma) ** 2 / 100.0**sigma == pytest.approx(1.0, abs=0.01)


def test_log_condition_hyperbolic():
    # the worst ratio sits at r = 3: log sinh 3 / log sinh 2
    rep = check_log_condition(hyperbolic(), 1.8, 40.0)
    expect = math.log(math.sinh(3.0)) / math.log(math.sinh(2.0))
    assert rep.max_ratio == pytest.approx(expect, rel=1e-12)
    assert rep.argmax_r == 3.0 and rep.holds
    assert not check_log_condition(hyperbolic(), 1.6, 40.0).holds


def test_log_condition_euclidean():
    rep = check_log_condition(euclidean(), 1.6, 40.0)
    assert rep.max_ratio == pytest.approx(math.log(3) / math.log(2), rel=1e-12)
    assert rep


def test_log_condition_rejects_bad_l():
    with pytest.raises(DomainError):
        check_log_condition(euclidean(), 1.0, 10.0)


def test_uniqueness_horizon():
    assert uniqueness_horizon(0.2, 1.6, 2.0, 2) == pytest.approx(0.0125)


# ---------------------------------------------------------------- backward barrier

@pytest.fixture(scope="module")
def hyp40():
    return profile_for("hyperbolic", N=2, R=45.0, c=1.0)


def test_backward_barrier_passes_under_constraint(hyp40):
    bb = build_backward_barrier(hyp40, K=0.2, T=0.2, C2=1.0, R0=3.0, Rmax=40.0, m=2.0, l=1.6)
    assert bb.passed and bb.boundary.passed
    assert bb.constraint_margin == pytest.approx(1 - 0.6)
    # the worst case reduces to 1 - C2 (2T - t + K), smallest at t = 0
    assert bb.worst_case.min_margin == pytest.approx(0.4, rel=1e-10)
    assert bb.horizon == pytest.approx(0.0125)


def test_backward_barrier_eta_at_inner_boundary(hyp40):
    bb = build_backward_barrier(hyp40, K=0.2, T=0.2, C2=1.0, R0=3.0, Rmax=40.0)
    assert bb(np.array([3.0]), 0.2)[0] == pytest.approx(1.0)
    assert bb(np.array([3.0]), 0.0)[0] > 1.0


def test_backward_barrier_broken_parameters(hyp40):
    with pytest.raises(ConstraintError) as exc:
        build_backward_barrier(hyp40, K=1.5, T=0.1, C2=1.0, R0=3.0, Rmax=40.0)
    assert exc.value.margin < 0
    bb = build_backward_barrier(hyp40, K=1.5, T=0.1, C2=1.0, R0=3.0, Rmax=40.0, strict=False)
    assert not bb.passed and bb.certificate.min_margin < 0


@given(st.floats(0.01, 0.4), st.floats(0.01, 0.3))
@settings(max_examples=25, deadline=None)
def test_backward_barrier_constraint_suffices(K, T):
    prof = profile_for("hyperbolic", N=2, R=45.0, c=1.0)
    C2 = (1.0 - 1e-12) / (2 * T + K)
    bb = build_backward_barrier(prof, K=K, T=T, C2=C2, R0=3.0, Rmax=40.0, nt=11)
    assert bb.passed


def test_backward_barrier_rejects_small_R0(hyp40):
    with pytest.raises(DomainError):
        build_backward_barrier(hyp40, K=0.2, T=0.2, C2=1.0, R0=1.0, Rmax=40.0)


# ---------------------------------------------------------------- perturbed model phi

def test_phi_model_is_c1():
    phi = phi_model(1.0, 1.0, 2.0)
    lo, hi = 2.0 * (1 - 1e-10), 2.0 * (1 + 1e-10)
    a, b = phi.psi(np.array([lo, hi]))
    assert a == pytest.approx(b, rel=1e-8)
    a, b = phi.dpsi(np.array([lo, hi]))
    assert a == pytest.approx(1.0, rel=1e-8) and b == pytest.approx(1.0, rel=1e-8)
    assert phi.matching["B"] > 0


def test_phi_perturbation_certificates():
    pp = build_phi_perturbation(1.0, 1.0, 0.5, 5.0, N=3, Rmax=100.0)
    assert pp.passed
    assert pp.R0 == 1.75
    assert pp.K_pert_required <= pp.K_pert


def test_phi_perturbation_needs_kappa():
    with pytest.raises(ConstructionError):
        build_phi_perturbation(1.0, 0.4, 0.5, 5.0)


def test_B_hyperbolic_tail_and_origin():
    r = np.array([1.0, 40.0])
    B, _ = compute_B(hyperbolic(), r)
    assert B[0] == 1.0
    assert B[1] == pytest.approx(np.tanh(40.0) ** 2 * (40.0 - math.log(2)), rel=1e-12)


def test_hypothesis_quadratic_far_window():
    prof = profile_for("quadratic", N=3, R=100.0, C0=1.0)
    rep = check_H_hypothesis(prof, 5.0, 100.0)
    assert rep.holds and all(c.passed for c in rep.certificates)


def test_log_condition_quadratic():
    rep = check_log_condition(model_from_name("quadratic", C0=1.0), 2.25, 60.0)
    assert rep.holds and rep.max_ratio < 2.25
