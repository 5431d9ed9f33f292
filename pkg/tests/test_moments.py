import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twomoment import moments
from twomoment.kinematics import boost_matrix, lorentz_factor


@st.composite
def primitive_state(draw, vmax=0.9, hmax=0.99):
    J = draw(st.floats(1e-3, 1e3))
    h = draw(st.floats(0.0, hmax))
    costh = draw(st.floats(-1.0, 1.0))
    phi = draw(st.floats(0.0, 2.0 * np.pi))
    sinth = np.sqrt(max(1.0 - costh * costh, 0.0))
    nhat = np.array([sinth * np.cos(phi), sinth * np.sin(phi), costh])
    vmag = draw(st.floats(0.0, vmax))
    cv = draw(st.floats(-1.0, 1.0))
    pv = draw(st.floats(0.0, 2.0 * np.pi))
    sv = np.sqrt(max(1.0 - cv * cv, 0.0))
    v = vmag * np.array([sv * np.cos(pv), sv * np.sin(pv), cv])
    H4 = boost_matrix(v) @ np.concatenate([[0.0], h * J * nhat])
    return J, H4[1:], v


def test_hat_from_conserved_reference_case():
    v = np.array([0.5, 0.0, 0.0])
    Ehat, Fhat = moments.hat_from_conserved(1.0, np.array([0.5, 0.0, 0.0]), v)
    assert Ehat == pytest.approx(0.86602540378443864676, abs=1e-15)
    np.testing.assert_allclose(Fhat, np.zeros(3), atol=1e-15)


@given(
    st.floats(0.1, 10.0),
    st.floats(-0.99, 0.99),
    st.floats(-0.7, 0.7),
)
def test_hat_conserved_roundtrip(E, fx, vx):
    F = E * np.array([fx, 0.1 * (1 - abs(fx)), 0.0])
    v = np.array([vx, 0.2, -0.1])
    Ehat, Fhat = moments.hat_from_conserved(E, F, v)
    E2, F2 = moments.conserved_from_hat(Ehat, Fhat, v)
    assert E2 == pytest.approx(E, rel=1e-12)
    np.testing.assert_allclose(F2, F, atol=1e-12 * E)


def test_forward_map_reference_case():
    # isotropic comoving state J = 1, H = 0 seen from v = (1/2, 0, 0)
    v = np.array([0.5, 0.0, 0.0])
    J, H = 1.0, np.zeros(3)
    Ehat, Fhat = moments.hat_from_primitive(J, H, v)
    assert Ehat == pytest.approx(1.154700538379251529, abs=1e-15)
    assert Fhat[0] == pytest.approx(2.0 / 9.0, abs=1e-15)
    E, F = moments.conserved_from_primitive(J, H, v)
    assert E == pytest.approx(13.0 / 9.0, abs=1e-14)
    assert F[0] == pytest.approx(8.0 / 9.0, abs=1e-14)

    t0, tvec = moments.u_tilde(J, H, v)
    assert t0 == pytest.approx(1.154700538379251529, abs=1e-15)
    assert tvec[0] == pytest.approx(0.57735026918962576451, abs=1e-15)

    S = moments.eulerian_stress(J, H, v)
    assert S[0, 0] == pytest.approx(7.0 / 9.0, abs=1e-14)


@given(primitive_state())
def test_stress_trace_equals_energy(state):
    # massless particles: the lab stress tensor is traceless in 4D,
    # so sum_i S^ii = E for every closed state
    J, H, v = state
    E, _ = moments.conserved_from_primitive(J, H, v)
    S = moments.eulerian_stress(J, H, v)
    assert np.trace(S) == pytest.approx(E, rel=1e-10)


@given(primitive_state())
def test_number_density_two_routes(state):
    J, H, v = state
    W = lorentz_factor(v)
    eps = 2.7
    N, FN = moments.number_moments(J, H, v, eps)
    E, F = moments.conserved_from_primitive(J, H, v)
    assert N == pytest.approx(W * (E - np.dot(v, F)) / eps, rel=1e-10)


def test_gamma_measures():
    assert moments.gamma_conserved(1.0, np.array([2.0, 0.0, 0.0])) == -1.0
    assert moments.gamma_conserved(1.0, np.array([0.6, 0.0, 0.0])) == pytest.approx(
        0.4
    )
    # at rest the primitive measure is J - |H|
    g = moments.gamma_primitive(1.0, np.array([0.6, 0.0, 0.0]), np.zeros(3))
    assert g == pytest.approx(0.4, abs=1e-15)
    # with motion the time component H_0 = -v.H reduces the norm:
    # |H|^2 = 0.36 - 0.09 = 0.27
    g = moments.gamma_primitive(
        1.0, np.array([0.6, 0.0, 0.0]), np.array([0.5, 0.0, 0.0])
    )
    assert g == pytest.approx(1.0 - np.sqrt(0.27), abs=1e-14)


@given(primitive_state(hmax=0.999))
def test_realizable_primitive_maps_to_realizable_conserved(state):
    J, H, v = state
    assert moments.gamma_primitive(J, H, v) >= -1e-13 * J
    E, F = moments.conserved_from_primitive(J, H, v)
    assert moments.gamma_conserved(E, F) >= -1e-12 * E
    assert E > 0


@given(primitive_state())
def test_collision_source_routes_agree(state):
    J, H, v = state
    chi, sigma, J_eq = 1.3, 0.4, 0.8 * J
    c0, cvec = moments.collision_source_hat(J, H, chi, sigma, J_eq)
    C_E, C_F = moments.collision_source_eulerian(J, H, v, chi, sigma, J_eq)
    E2, F2 = moments.conserved_from_hat(c0, cvec, v)
    assert C_E == pytest.approx(E2, rel=1e-12, abs=1e-12 * J)
    np.testing.assert_allclose(C_F, F2, atol=1e-12 * J)


def test_collision_source_vanishes_at_equilibrium():
    v = np.array([0.3, 0.1, 0.0])
    C_E, C_F = moments.collision_source_eulerian(
        2.0, np.zeros(3), v, 5.0, 1.0, 2.0
    )
    assert C_E == 0.0
    np.testing.assert_allclose(C_F, np.zeros(3), atol=1e-15)
