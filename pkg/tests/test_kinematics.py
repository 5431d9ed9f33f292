import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twomoment import kinematics as kin
from twomoment.errors import InvalidVelocityError

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


@st.composite
def three_velocity(draw, vmax=0.99):
    mag = draw(st.floats(0.0, vmax))
    costh = draw(st.floats(-1.0, 1.0))
    phi = draw(st.floats(0.0, 2.0 * np.pi))
    sinth = np.sqrt(max(1.0 - costh * costh, 0.0))
    return np.array(
        [mag * sinth * np.cos(phi), mag * sinth * np.sin(phi), mag * costh]
    )


@st.composite
def direction_angles(draw):
    return draw(st.floats(0.0, np.pi)), draw(st.floats(0.0, 2.0 * np.pi))


def test_lorentz_factor_values():
    assert kin.lorentz_factor(np.zeros(3)) == 1.0
    W = kin.lorentz_factor(np.array([0.5, 0.0, 0.0]))
    assert W == pytest.approx(1.154700538379251529, abs=1e-15)
    W = kin.lorentz_factor(np.array([0.0, 0.9, 0.0]))
    assert W == pytest.approx(2.2941573387056176591, abs=1e-14)


def test_lorentz_factor_rejects_superluminal():
    with pytest.raises(InvalidVelocityError):
        kin.lorentz_factor(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidVelocityError):
        kin.lorentz_factor(np.array([0.8, 0.8, 0.0]))


def test_boost_matrix_at_rest_is_identity():
    L = kin.boost_matrix(np.zeros(3))
    np.testing.assert_allclose(L, np.eye(4), atol=1e-15)


@given(three_velocity())
def test_boost_matrix_preserves_metric(v):
    L = kin.boost_matrix(v)
    np.testing.assert_allclose(L.T @ ETA @ L, ETA, atol=1e-11)


@given(three_velocity())
def test_boost_maps_rest_observer_to_four_velocity(v):
    L = kin.boost_matrix(v)
    np.testing.assert_allclose(L[:, 0], kin.fluid_four_velocity(v), atol=1e-12)


@given(three_velocity(vmax=0.95))
def test_inverse_boost_inverts(v):
    prod = kin.inverse_boost_matrix(v) @ kin.boost_matrix(v)
    np.testing.assert_allclose(prod, np.eye(4), atol=1e-10)


def test_comoving_unit_direction_axis_cases():
    np.testing.assert_allclose(
        kin.comoving_unit_direction(0.0, 1.23), [0.0, 1.0, 0.0, 0.0], atol=1e-15
    )
    np.testing.assert_allclose(
        kin.comoving_unit_direction(np.pi / 2, 0.0), [0.0, 0.0, 1.0, 0.0], atol=1e-15
    )


@given(direction_angles(), three_velocity())
def test_boosted_direction_is_unit_and_orthogonal(angles, v):
    theta, phi = angles
    ell = kin.boost_direction(kin.comoving_unit_direction(theta, phi), v)
    u = kin.fluid_four_velocity(v)
    assert kin.minkowski_dot(u, ell) == pytest.approx(0.0, abs=1e-10)
    assert kin.minkowski_dot(ell, ell) == pytest.approx(1.0, abs=1e-10)


@given(direction_angles(), three_velocity())
def test_eulerian_direction_unit_and_bounded(angles, v):
    theta, phi = angles
    ell = kin.boost_direction(kin.comoving_unit_direction(theta, phi), v)
    e_ratio, L = kin.eulerian_direction(ell, v)
    W = kin.lorentz_factor(v)
    s = kin.speed(v)
    assert L[0] == 0.0
    assert np.linalg.norm(L[1:]) == pytest.approx(1.0, abs=1e-10)
    assert W * (1.0 - s) - 1e-12 <= e_ratio <= W * (1.0 + s) + 1e-12


def test_energy_ratio_aligned_case():
    # boost along x at v = 0.5 of a forward-pointing direction
    v = np.array([0.5, 0.0, 0.0])
    ell = kin.boost_direction(kin.comoving_unit_direction(0.0, 0.0), v)
    e_ratio, _ = kin.eulerian_direction(ell, v)
    assert e_ratio == pytest.approx(1.7320508075688772935, abs=1e-14)
