"""Maximum-entropy two-moment closure (Fermi-Dirac, low-occupancy limit).

Scalar closure factors are functions of the flux factor h = |H| / J,
where |H| is the Minkowski norm of the comoving heat-flux four-vector.
Two routes are provided:

* algebraic polynomial fits, used throughout the solver;
* the exact closure obtained by inverting the Langevin function, kept
  as an independent reference.

Tensor assembly (pressure, rank-3 moment, and their contraction with a
background velocity-gradient field) lives here too, since every tensor
is determined by (J, H, v) through the closure.
"""

import numpy as np

from .kinematics import fluid_four_velocity, lorentz_factor

ETA_DIAG = np.array([-1.0, 1.0, 1.0, 1.0])

# Flux factors below this are treated as isotropic: the unit vector
# H / |H| is undefined and every anisotropic tensor term carries a
# prefactor that vanishes at least linearly in h.
H_DEGENERATE = 1e-14

_H_DOMAIN_SLACK = 1e-12


def _clip_flux_factor(h):
    h = np.asarray(h, dtype=float)
    if np.any(h < -_H_DOMAIN_SLACK) or np.any(h > 1.0 + _H_DOMAIN_SLACK):
        raise ValueError(
            "flux factor outside [0, 1]: min %.17g max %.17g"
            % (float(np.min(h)), float(np.max(h)))
        )
    return np.clip(h, 0.0, 1.0)


def eddington_factor(h):
    """Algebraic Eddington factor k(h); exact at h = 0 and h = 1."""
    h = _clip_flux_factor(h)
    return 1.0 / 3.0 + (2.0 / 15.0) * (3.0 * h**2 - h**3 + 3.0 * h**4)


def eddington_factor_derivative(h):
    """dk/dh for the algebraic Eddington factor."""
    h = _clip_flux_factor(h)
    return (2.0 / 15.0) * (6.0 * h - 3.0 * h**2 + 12.0 * h**3)


def heat_flux_factor(h):
    """Algebraic third-moment factor q(h); exact at h = 0 and h = 1."""
    h = _clip_flux_factor(h)
    return (h / 75.0) * (
        45.0
        + 10.0 * h
        - 12.0 * h**2
        - 12.0 * h**3
        + 38.0 * h**4
        - 12.0 * h**5
        + 18.0 * h**6
    )


def langevin(alpha):
    """L(alpha) = coth(alpha) - 1/alpha, series-protected near zero."""
    alpha = np.asarray(alpha, dtype=float)
    small = np.abs(alpha) < 1e-2
    a = np.where(small, 1.0, alpha)  # avoid 0/0 in the generic branch
    generic = 1.0 / np.tanh(a) - 1.0 / a
    asq = alpha * alpha
    series = alpha / 3.0 - alpha * asq / 45.0 + 2.0 * alpha * asq * asq / 945.0
    return np.where(small, series, generic)


# Upper edge of the root-finding bracket for the inverse Langevin
# function; beyond L(_ALPHA_MAX) the asymptotic inverse 1/(1 - h) is
# accurate to far better than root-finder tolerance.
_ALPHA_MAX = 500.0


def closure_factors_exact(h):
    """Exact closure factors (k, q) from the inverse Langevin function.

    Branches: series for h <= 1e-6, saturated (1, 1) for h >= 1 - 1e-10,
    asymptotic inverse alpha = 1/(1 - h) above L(_ALPHA_MAX), and a
    bisection solve of L(alpha) = h on (0, _ALPHA_MAX] otherwise, with
    the residual checked against 1e-12.
    """
    h = _clip_flux_factor(h)
    scalar = h.ndim == 0
    h = np.atleast_1d(h)
    k = np.empty_like(h)
    q = np.empty_like(h)

    tiny = h <= 1e-6
    k[tiny] = 1.0 / 3.0 + 0.4 * h[tiny] ** 2
    q[tiny] = 0.6 * h[tiny]

    saturated = h >= 1.0 - 1e-10
    k[saturated] = 1.0
    q[saturated] = 1.0

    h_hi = float(langevin(_ALPHA_MAX))
    asym = (~saturated) & (h > h_hi)
    if np.any(asym):
        alpha = 1.0 / (1.0 - h[asym])
        k[asym] = 1.0 - 2.0 * h[asym] / alpha
        q[asym] = 1.0 - 3.0 * k[asym] / alpha

    core = ~(tiny | saturated | asym)
    if np.any(core):
        hc = h[core]
        lo = np.full_like(hc, 1e-6)
        hi = np.full_like(hc, _ALPHA_MAX)
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            below = langevin(mid) < hc
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        alpha = 0.5 * (lo + hi)
        resid = np.abs(langevin(alpha) - hc)
        if np.any(resid > 1e-12):
            raise RuntimeError(
                "inverse Langevin residual %.3e exceeds 1e-12" % float(np.max(resid))
            )
        k[core] = 1.0 - 2.0 * hc / alpha
        q[core] = 1.0 / np.tanh(alpha) - 3.0 * k[core] / alpha

    if scalar:
        return float(k[0]), float(q[0])
    return k, q


def _heat_flux_four_vector(H, v):
    """Assemble H_mu (lower index) from spatial H_i using u_mu H^mu = 0."""
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    H4 = np.empty(H.shape[:-1] + (4,))
    H4[..., 0] = -np.sum(v * H, axis=-1)
    H4[..., 1:] = H
    return H4


def heat_flux_norm(J, H, v):
    """Minkowski norm |H| = sqrt(H_mu H^mu) of the comoving flux.

    The time component is reconstructed from orthogonality, which makes
    H^mu spacelike whenever |v| < 1, so the radicand is clipped at zero
    purely as round-off protection.
    """
    H4 = _heat_flux_four_vector(H, v)
    norm_sq = np.sum(H4[..., 1:] ** 2, axis=-1) - H4[..., 0] ** 2
    return np.sqrt(np.clip(norm_sq, 0.0, None))


def flux_factor(J, H, v):
    """Flux factor h = |H| / max(J, |H|), clamped to [0, 1].

    The saturated form keeps h defined (and equal to 1) for iterates
    that have left the realizable cone, including J <= 0; fixed-point
    solvers step through such states without aborting.
    """
    J = np.asarray(J, dtype=float)
    norm = heat_flux_norm(J, H, v)
    scale = np.maximum(np.maximum(J, norm), np.finfo(float).tiny)
    return np.where(norm > 0.0, norm / scale, 0.0)


def _unit_directions(J, H, v):
    """Return (h, hhat_upper) with hhat^mu = H^mu / |H|, zero when degenerate."""
    J = np.asarray(J, dtype=float)
    H4 = _heat_flux_four_vector(H, v)
    norm = heat_flux_norm(J, H, v)
    scale = np.maximum(np.maximum(J, norm), np.finfo(float).tiny)
    h = np.where(norm > 0.0, norm / scale, 0.0)
    safe = norm > H_DEGENERATE * np.maximum(np.abs(J), norm)
    denom = np.where(safe, norm, 1.0)
    hhat = (H4 * ETA_DIAG) / denom[..., None]  # raise the index
    hhat = np.where(safe[..., None], hhat, 0.0)
    return h, hhat


def _projector(v):
    """Orthogonal projector h^{mu nu} = eta^{mu nu} + u^mu u^nu."""
    u = fluid_four_velocity(v)
    return np.diag(ETA_DIAG) + u[..., :, None] * u[..., None, :]


def pressure_tensor(J, H, v):
    """Comoving pressure tensor K^{mu nu}, shape (..., 4, 4).

    K = J/2 [ (1 - k) h^{mu nu} + (3k - 1) hhat^mu hhat^nu ] with the
    algebraic Eddington factor.  Degenerate flux (h below threshold)
    keeps only the isotropic part.
    """
    J = np.asarray(J, dtype=float)
    h, hhat = _unit_directions(J, H, v)
    k = eddington_factor(h)
    proj = _projector(v)
    aniso = hhat[..., :, None] * hhat[..., None, :]
    return 0.5 * J[..., None, None] * (
        (1.0 - k)[..., None, None] * proj + (3.0 * k - 1.0)[..., None, None] * aniso
    )


def heat_flux_rank3(J, H, v):
    """Comoving rank-3 moment L^{mu nu rho}, shape (..., 4, 4, 4)."""
    J = np.asarray(J, dtype=float)
    h, hhat = _unit_directions(J, H, v)
    q = heat_flux_factor(h)
    proj = _projector(v)
    sym = (
        hhat[..., :, None, None] * proj[..., None, :, :]
        + hhat[..., None, :, None] * proj[..., :, None, :]
        + hhat[..., None, None, :] * proj[..., :, :, None]
    )
    triple = (
        hhat[..., :, None, None]
        * hhat[..., None, :, None]
        * hhat[..., None, None, :]
    )
    coef_sym = 0.5 * (h - q)
    coef_tri = 0.5 * (5.0 * q - 3.0 * h)
    return J[..., None, None, None] * (
        coef_sym[..., None, None, None] * sym + coef_tri[..., None, None, None] * triple
    )


def q_tensor(J, H, v):
    """Full third angular moment Q^{mu nu rho} / energy, shape (..., 4, 4, 4).

    Symmetric in all index pairs.  This is the reference route; the
    solver contracts the same tensor without materialising it, and a
    test pins the two routes against each other.
    """
    J = np.asarray(J, dtype=float)
    u = fluid_four_velocity(v)
    H4up = _heat_flux_four_vector(H, v) * ETA_DIAG
    K = pressure_tensor(J, H, v)
    L3 = heat_flux_rank3(J, H, v)

    uu = u[..., :, None] * u[..., None, :]
    out = J[..., None, None, None] * (
        u[..., :, None, None] * uu[..., None, :, :]
    )
    out += H4up[..., :, None, None] * uu[..., None, :, :]
    out += u[..., :, None, None] * H4up[..., None, :, None] * u[..., None, None, :]
    out += uu[..., :, :, None] * H4up[..., None, None, :]
    out += K[..., :, :, None] * u[..., None, None, :]
    out += K[..., :, None, :] * u[..., None, :, None]
    out += u[..., :, None, None] * K[..., None, :, :]
    out += L3
    return out


def q_contraction(J, H, v, grad):
    """Contraction (Q/energy)^{A nu rho} grad_{nu rho}, shape (..., 4).

    ``grad`` holds the symmetrised background gradient with both indices
    down; only its symmetric part would contribute anyway since Q is
    symmetric in (nu, rho).  Expanding the contraction keeps the cost at
    rank-2 arrays per point instead of the 4^3 tensor.
    """
    J = np.asarray(J, dtype=float)
    grad = np.asarray(grad, dtype=float)
    u = fluid_four_velocity(v)
    H4up = _heat_flux_four_vector(H, v) * ETA_DIAG
    h, hhat = _unit_directions(J, H, v)
    k = eddington_factor(h)
    q = heat_flux_factor(h)
    proj = _projector(v)

    K = 0.5 * J[..., None, None] * (
        (1.0 - k)[..., None, None] * proj
        + (3.0 * k - 1.0)[..., None, None] * (hhat[..., :, None] * hhat[..., None, :])
    )

    grad_u = np.einsum("...nr,...n->...r", grad, u)  # lower index r
    a_uu = np.sum(grad_u * u, axis=-1)
    a_uH = np.sum(grad_u * H4up, axis=-1)
    K_grad = np.einsum("...nr,...nr->...", K, grad)
    K_gu = np.einsum("...an,...n->...a", K, grad_u)

    # rank-3 closure term, expanded through the projector structure
    grad_h = np.einsum("...nr,...r->...n", grad, hhat)  # lower index n
    u_gh = np.sum(grad_h * u, axis=-1)
    h_gh = np.sum(grad_h * hhat, axis=-1)
    tr_pg = np.einsum("n,...nn->...", ETA_DIAG, grad) + a_uu
    pg_h = grad_h * ETA_DIAG + u * u_gh[..., None]  # (proj . grad . hhat)^A
    L_term = 0.5 * J[..., None] * (
        (h - q)[..., None] * (hhat * tr_pg[..., None] + 2.0 * pg_h)
        + (5.0 * q - 3.0 * h)[..., None] * hhat * h_gh[..., None]
    )

    out = u * (J * a_uu + 2.0 * a_uH + K_grad)[..., None]
    out += H4up * a_uu[..., None]
    out += 2.0 * K_gu
    out += L_term
    return out


def spatial_pressure(J, H, v):
    """Spatial block K_ij of the pressure tensor, shape (..., 3, 3).

    Spatial Cartesian indices need no raising, so this equals the
    (i, j) block of ``pressure_tensor``; assembled directly to avoid
    the 4x4 intermediate in solver inner loops.
    """
    J = np.asarray(J, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    h, hhat = _unit_directions(J, H, v)
    k = eddington_factor(h)
    proj_s = np.eye(3) + (W * W)[..., None, None] * (
        v[..., :, None] * v[..., None, :]
    )
    hh = hhat[..., 1:]
    aniso = hh[..., :, None] * hh[..., None, :]
    return 0.5 * J[..., None, None] * (
        (1.0 - k)[..., None, None] * proj_s + (3.0 * k - 1.0)[..., None, None] * aniso
    )


def spatial_pressure_derivatives(J, H, v):
    """Derivatives of K_ij with respect to the primitive moments.

    Returns ``(dK_dJ, dK_dH)`` of shapes (..., 3, 3) and (..., 3, 3, 3),
    the trailing axis of the latter being the H_k component.  The time
    component of H is eliminated through orthogonality before
    differentiating, so these are total derivatives at fixed v.  Both
    limits at h -> 0 are smooth and handled explicitly.
    """
    J = np.asarray(J, dtype=float)
    v = np.asarray(v, dtype=float)
    W = lorentz_factor(v)
    h, hhat = _unit_directions(J, H, v)
    k = eddington_factor(h)
    kp = eddington_factor_derivative(h)
    proj_s = np.eye(3) + (W * W)[..., None, None] * (
        v[..., :, None] * v[..., None, :]
    )
    hh = hhat[..., 1:]
    aniso = hh[..., :, None] * hh[..., None, :]

    psi0 = 1.0 - k + kp * h
    psi1 = 3.0 * k - 1.0 - 3.0 * kp * h
    dK_dJ = 0.5 * (
        psi0[..., None, None] * proj_s + psi1[..., None, None] * aniso
    )

    degenerate = h <= H_DEGENERATE
    # (3k - 1)/h -> 0 as h -> 0 for the algebraic closure
    psi2 = np.where(degenerate, 0.0, (3.0 * k - 1.0) / np.where(degenerate, 1.0, h))
    h0_up = np.sum(v * hh, axis=-1)
    alpha = hh - h0_up[..., None] * v  # d|H|/dH_k

    term1 = (
        0.5
        * kp[..., None, None, None]
        * (3.0 * aniso - proj_s)[..., :, :, None]
        * alpha[..., None, None, :]
    )
    eye = np.eye(3)
    sym = (
        eye[:, None, :] * hh[..., None, :, None]
        + hh[..., :, None, None] * eye[None, :, :]
        - 2.0 * aniso[..., :, :, None] * alpha[..., None, None, :]
    )
    dK_dH = term1 + 0.5 * psi2[..., None, None, None] * sym
    dK_dH = np.where(degenerate[..., None, None, None], 0.0, dK_dH)
    return dK_dJ, dK_dH
