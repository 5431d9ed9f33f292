"""Moment-state conversions between comoving, hatted, and lab variables.

State conventions, all batched over leading axes:

* primitive (comoving) pair ``(J, H)`` with ``J`` shape ``(...,)`` and
  ``H`` shape ``(..., 3)`` holding the spatial covariant components
  H_i; the time component is always reconstructed from orthogonality,
  H_0 = -v . H;
* conserved (lab) pair ``(E, F)`` with the same shapes;
* hatted pair ``(Ehat, Fhat)``, the boost-weighted combination of the
  conserved variables in which the collision operator is diagonal.
"""

import numpy as np

from . import closure
from .kinematics import lorentz_factor


def hat_from_conserved(E, F, v):
    """Map lab moments to the hatted variables.

    Ehat = W (E - v.F),  Fhat_i = F_i - W v_i Ehat.
    """
    E = np.asarray(E, dtype=float)
    F = np.asarray(F, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    Ehat = W * (E - np.sum(v * F, axis=-1))
    Fhat = F - (W * Ehat)[..., None] * v
    return Ehat, Fhat


def conserved_from_hat(Ehat, Fhat, v):
    """Inverse of :func:`hat_from_conserved`.

    E = W Ehat + v.Fhat,  F_i = Fhat_i + W v_i Ehat.
    """
    Ehat = np.asarray(Ehat, dtype=float)
    Fhat = np.asarray(Fhat, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    E = W * Ehat + np.sum(v * Fhat, axis=-1)
    F = Fhat + (W * Ehat)[..., None] * v
    return E, F


def hat_from_primitive(J, H, v):
    """Hatted moments of a primitive state through the closure.

    Ehat = W J + v.H,  Fhat_j = W H_j + v^i K_ij(J, H).
    """
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    Ehat = W * J + np.sum(v * H, axis=-1)
    K = closure.spatial_pressure(J, H, v)
    Fhat = W[..., None] * H + np.einsum("...i,...ij->...j", v, K)
    return Ehat, Fhat


def conserved_from_primitive(J, H, v):
    """Lab moments of a primitive state (composition through the hat map)."""
    Ehat, Fhat = hat_from_primitive(J, H, v)
    return conserved_from_hat(Ehat, Fhat, v)


def u_tilde(J, H, v):
    """Number-flux style pair (W J + v.H, H_j + W J v_j).

    This combination multiplies the energy-derivative flux in the
    dissipation term and, divided by particle energy, gives the
    Eulerian number density and flux.
    """
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    t0 = W * J + np.sum(v * H, axis=-1)
    tvec = H + (W * J)[..., None] * v
    return t0, tvec


def eulerian_stress(J, H, v):
    """Lab-frame stress S^{ij}, shape (..., 3, 3).

    S^{ij} = K^{ij} + W (H^i v^j + v^i H^j) + W^2 v^i v^j J.
    """
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    K = closure.spatial_pressure(J, H, v)
    Hv = H[..., :, None] * v[..., None, :]
    vv = v[..., :, None] * v[..., None, :]
    return (
        K
        + W[..., None, None] * (Hv + np.swapaxes(Hv, -1, -2))
        + (W * W * J)[..., None, None] * vv
    )


def number_moments(J, H, v, energy):
    """Eulerian number density and number flux at particle energy ``energy``.

    N = (W J + v.H)/energy,  F_N^i = (H^i + W J v^i)/energy.
    """
    t0, tvec = u_tilde(J, H, v)
    energy = np.asarray(energy, dtype=float)
    return t0 / energy, tvec / energy[..., None]


def gamma_primitive(J, H, v):
    """Realizability measure J - |H| of a primitive state."""
    return np.asarray(J, dtype=float) - closure.heat_flux_norm(J, H, v)


def gamma_conserved(E, F):
    """Realizability measure E - |F| of a lab state."""
    E = np.asarray(E, dtype=float)
    F = np.asarray(F, dtype=float)
    return E - np.sqrt(np.sum(F * F, axis=-1))


def collision_source_hat(J, H, chi, sigma, J_eq):
    """Hatted-frame collision source (chi (J_eq - J), -kappa H_j)."""
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    chi = np.asarray(chi, dtype=float)
    kappa = chi + np.asarray(sigma, dtype=float)
    c0 = chi * (np.asarray(J_eq, dtype=float) - J)
    cvec = -kappa[..., None] * H
    return c0, cvec


def collision_source_eulerian(J, H, v, chi, sigma, J_eq):
    """Lab-frame collision source, the boost-weight matrix applied to
    the hatted source: (W c0 + v.c, W v_j c0 + c_j)."""
    c0, cvec = collision_source_hat(J, H, chi, sigma, J_eq)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    C_E = W * c0 + np.sum(v * cvec, axis=-1)
    C_F = cvec + (W * c0)[..., None] * v
    return C_E, C_F
