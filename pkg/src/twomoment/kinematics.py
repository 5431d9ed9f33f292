"""Special-relativistic kinematics for a steady background fluid.

Conventions (natural units, c = 1):

* three-velocities ``v`` are arrays of shape ``(..., 3)`` holding the
  Cartesian components ``v^i``;
* four-vectors are arrays of shape ``(..., 4)`` holding contravariant
  components ``(a^0, a^1, a^2, a^3)`` unless noted otherwise;
* the metric is ``diag(-1, 1, 1, 1)``, so lowering a four-vector flips
  the sign of the time component only.
"""

import numpy as np

from .errors import InvalidVelocityError

MINKOWSKI_SIGNS = np.array([-1.0, 1.0, 1.0, 1.0])


def speed(v):
    """Magnitude of the three-velocity, shape ``(...,)``."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=-1))


def lorentz_factor(v):
    """Lorentz factor W = (1 - v.v)**-0.5 for three-velocity ``v``.

    Raises
    ------
    InvalidVelocityError
        If any speed is >= 1.
    """
    vsq = np.sum(np.square(np.asarray(v, dtype=float)), axis=-1)
    if np.any(vsq >= 1.0):
        raise InvalidVelocityError(
            "three-velocity magnitude must be < 1 (got max |v| = %.17g)"
            % float(np.sqrt(np.max(vsq)))
        )
    return 1.0 / np.sqrt(1.0 - vsq)


def fluid_four_velocity(v):
    """Four-velocity u = W (1, v), shape ``(..., 4)``."""
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    u = np.empty(v.shape[:-1] + (4,))
    u[..., 0] = W
    u[..., 1:] = W[..., None] * v
    return u


def lower(a):
    """Lower the index of a four-vector: (a^0, a^i) -> (-a^0, a_i)."""
    return np.asarray(a, dtype=float) * MINKOWSKI_SIGNS


def minkowski_dot(a, b):
    """Scalar a_mu b^mu with signature (-, +, +, +)."""
    return np.sum(lower(a) * np.asarray(b, dtype=float), axis=-1)


def boost_matrix(v):
    """Lorentz boost from the comoving frame to the lab frame.

    Returns the matrix ``L^mu_nuhat`` of shape ``(..., 4, 4)`` mapping
    contravariant comoving components to lab components.  The spatial
    block uses (W - 1)/V^2 = W^2/(W + 1), which is smooth through v = 0,
    so no small-velocity special case is needed.
    """
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    L = np.zeros(v.shape[:-1] + (4, 4))
    L[..., 0, 0] = W
    L[..., 0, 1:] = W[..., None] * v
    L[..., 1:, 0] = W[..., None] * v
    outer = v[..., :, None] * v[..., None, :]
    coef = W * W / (W + 1.0)
    L[..., 1:, 1:] = np.eye(3) + coef[..., None, None] * outer
    return L


def inverse_boost_matrix(v):
    """Lab-to-comoving boost; equals ``boost_matrix(-v)``."""
    return boost_matrix(-np.asarray(v, dtype=float))


def comoving_unit_direction(theta, phi):
    """Comoving-frame null direction with polar axis along x^1.

    Returns the four-vector (0, cos(theta), sin(theta) cos(phi),
    sin(theta) sin(phi)), which is a spatial unit vector orthogonal to
    the comoving observer.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast_shapes(theta.shape, phi.shape)
    ell = np.zeros(shape + (4,))
    st = np.sin(theta)
    ell[..., 1] = np.broadcast_to(np.cos(theta), shape)
    ell[..., 2] = np.broadcast_to(st * np.cos(phi), shape)
    ell[..., 3] = np.broadcast_to(st * np.sin(phi), shape)
    return ell


def boost_direction(ell_comoving, v):
    """Boost a comoving unit direction into the lab frame.

    ``ell_comoving`` has shape ``(..., 4)`` with zero time component.
    The result satisfies u_mu ell^mu = 0 and ell_mu ell^mu = 1.
    """
    L = boost_matrix(v)
    return np.einsum("...ij,...j->...i", L, np.asarray(ell_comoving, dtype=float))


def eulerian_direction(ell, v):
    """Energy ratio and unit direction seen by the Eulerian observer.

    Parameters
    ----------
    ell : array, shape (..., 4)
        Lab-frame components of the comoving-orthogonal unit direction.
    v : array, shape (..., 3)
        Fluid three-velocity at the same points.

    Returns
    -------
    e_ratio : array, shape (...,)
        Ratio of Eulerian to comoving particle energy, W + v_i ell^i.
    L : array, shape (..., 4)
        Eulerian unit direction (0, (W v^i + ell^i)/e_ratio).
    """
    ell = np.asarray(ell, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    e_ratio = W + np.sum(v * ell[..., 1:], axis=-1)
    L = np.zeros_like(ell)
    L[..., 1:] = (W[..., None] * v + ell[..., 1:]) / e_ratio[..., None]
    return e_ratio, L
