"""Nonlinear solvers recovering comoving moments from lab-frame data.

All solvers share the same skeleton: a residual on the primitive state
M = (J, H_1, H_2, H_3), an update rule, and a convergence test on the
Euclidean norm of the residual (the dependent time component H_0 is
excluded).  The equations are linear in the moment scale, so the norm
is compared against the tolerance times a per-point data scale; states
many orders of magnitude below the problem scale are solved to the same
relative accuracy instead of being accepted unsolved.  Iteration counts
report the number of residual evaluations needed to declare
convergence, so a state whose initial guess already satisfies the
tolerance reports one iteration.

The damped fixed-point update with step 1 / (W (1 + |v|)) maps
realizable data to realizable iterates; the undamped step 1 / (1 + |v|)
is kept as an option because its failure modes (divergence and
excursions outside the cone at high speeds) are part of the solver
validation study.
"""

from dataclasses import dataclass

import numpy as np

from . import closure, kernels
from .errors import NonConvergenceError
from .kinematics import lorentz_factor

# Slack used when classifying an iterate as non-realizable: round-off
# level relative to the local moment scale.
GAMMA_SLACK = 1e-13

TINY = np.finfo(float).tiny


def _data_scale(Eh, Fh):
    """Per-point moment magnitude the residual test is relative to."""
    return np.maximum(np.maximum(np.abs(Eh), np.max(np.abs(Fh), axis=-1)), TINY)


@dataclass
class SolverConfig:
    """Tolerances and iteration policy shared by the moment solvers."""

    tol_c2p: float = 1e-8
    tol_coll: float = 1e-8
    max_iters: int = 10000
    step_mode: str = "realizable"  # or "aggressive"
    c2p_method: str = "newton"  # or "picard"
    backend: str = "auto"  # "auto" uses compiled kernels when available

    def __post_init__(self):
        if self.step_mode not in ("realizable", "aggressive"):
            raise ValueError("step_mode must be 'realizable' or 'aggressive'")
        if self.c2p_method not in ("newton", "picard"):
            raise ValueError("c2p_method must be 'newton' or 'picard'")
        if self.backend not in ("auto", "numpy"):
            raise ValueError("backend must be 'auto' or 'numpy'")


@dataclass
class SolveReport:
    """Per-point convergence record of a batched solve."""

    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    nonrealizable_iterates: int


def _c2p_residual(J, H, v, W, Ehat, Fhat):
    r0 = W * J + np.sum(v * H, axis=-1) - Ehat
    K = closure.spatial_pressure(J, H, v)
    rj = W[..., None] * H + np.einsum("...i,...ij->...j", v, K) - Fhat
    return r0, rj


def _count_nonrealizable(J, H, v, scale):
    gamma = J - closure.heat_flux_norm(J, H, v)
    return int(np.count_nonzero(gamma < -GAMMA_SLACK * scale))


def _finish(report_shape, iters, resid, converged, nonreal, raise_on_failure, what):
    if raise_on_failure and not np.all(converged):
        worst = float(np.max(resid[~converged]))
        raise NonConvergenceError(
            "%s failed to converge at %d of %d points (worst residual %.3e)"
            % (what, int(np.count_nonzero(~converged)), converged.size, worst),
            residual=worst,
        )
    return SolveReport(
        iterations=iters.reshape(report_shape),
        residual=resid.reshape(report_shape),
        converged=converged.reshape(report_shape),
        nonrealizable_iterates=nonreal,
    )


def c2p_picard(Ehat, Fhat, v, config=None, raise_on_failure=True):
    """Recover (J, H) from hatted moments by damped fixed-point iteration.

    Parameters are batched over arbitrary leading axes.  Returns
    ``(J, H, report)``.  With ``step_mode='realizable'`` every iterate
    stays in the realizable cone when the input does; the 'aggressive'
    step is faster per sweep at low speeds but loses both guarantees.
    """
    config = config or SolverConfig()
    Ehat = np.asarray(Ehat, dtype=float)
    batch = Ehat.shape
    n = Ehat.size
    Eh = Ehat.reshape(n)
    Fh = np.asarray(Fhat, dtype=float).reshape(n, 3)
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,)).reshape(n, 3)

    W = lorentz_factor(vv)
    vmag = np.sqrt(np.sum(vv * vv, axis=-1))
    step = 1.0 / (1.0 + vmag)
    if config.step_mode == "realizable":
        step = step / W

    J = Eh / W
    H = Fh / W[:, None]
    sc = _data_scale(Eh, Fh)
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    active = np.ones(n, dtype=bool)
    nonreal = 0

    it = 0
    # divergent iterates (aggressive mode at high speed) legitimately
    # overflow; non-convergence is the reported outcome, not a fault
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            it += 1
            idx = np.flatnonzero(active)
            r0, rj = _c2p_residual(J[idx], H[idx], vv[idx], W[idx], Eh[idx], Fh[idx])
            rn = np.sqrt(r0 * r0 + np.sum(rj * rj, axis=-1)) / sc[idx]
            iters[idx] = it
            resid[idx] = rn
            done = rn <= config.tol_c2p
            active[idx[done]] = False
            if not np.any(active) or it >= config.max_iters:
                break
            upd = idx[~done]
            J[upd] -= step[upd] * r0[~done]
            H[upd] -= step[upd, None] * rj[~done]
            nonreal += _count_nonrealizable(
                J[upd], H[upd], vv[upd], np.maximum(np.abs(J[upd]), np.abs(Eh[upd]))
            )

    report = _finish(
        batch, iters, resid, ~active, nonreal, raise_on_failure, "moment recovery"
    )
    return J.reshape(batch), H.reshape(batch + (3,)), report


def c2p_newton(Ehat, Fhat, v, config=None, raise_on_failure=True):
    """Newton variant of :func:`c2p_picard` with the analytic Jacobian.

    Iterates with a non-positive energy density or a singular Jacobian
    fall back to the damped fixed-point step for that sweep, which keeps
    the method total without damaging the quadratic phase.
    """
    config = config or SolverConfig()
    Ehat = np.asarray(Ehat, dtype=float)
    batch = Ehat.shape
    n = Ehat.size
    Eh = Ehat.reshape(n)
    Fh = np.asarray(Fhat, dtype=float).reshape(n, 3)
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,)).reshape(n, 3)

    W = lorentz_factor(vv)
    vmag = np.sqrt(np.sum(vv * vv, axis=-1))
    fallback = 1.0 / (W * (1.0 + vmag))

    J = Eh / W
    H = Fh / W[:, None]
    sc = _data_scale(Eh, Fh)
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    active = np.ones(n, dtype=bool)
    nonreal = 0

    it = 0
    while True:
        it += 1
        idx = np.flatnonzero(active)
        r0, rj = _c2p_residual(J[idx], H[idx], vv[idx], W[idx], Eh[idx], Fh[idx])
        rn = np.sqrt(r0 * r0 + np.sum(rj * rj, axis=-1)) / sc[idx]
        iters[idx] = it
        resid[idx] = rn
        done = rn <= config.tol_c2p
        active[idx[done]] = False
        if not np.any(active) or it >= config.max_iters:
            break
        upd = idx[~done]
        m = upd.size
        Ju, Hu, vu, Wu = J[upd], H[upd], vv[upd], W[upd]
        r = np.concatenate([r0[~done, None], rj[~done]], axis=-1)

        dK_dJ, dK_dH = closure.spatial_pressure_derivatives(Ju, Hu, vu)
        jac = np.empty((m, 4, 4))
        jac[:, 0, 0] = Wu
        jac[:, 0, 1:] = vu
        jac[:, 1:, 0] = np.einsum("mi,mij->mj", vu, dK_dJ)
        jac[:, 1:, 1:] = Wu[:, None, None] * np.eye(3) + np.einsum(
            "mi,mijk->mjk", vu, dK_dH
        )

        det = np.linalg.det(jac)
        ok = np.abs(det) > 1e-200
        delta = np.zeros((m, 4))
        if np.any(ok):
            delta[ok] = np.linalg.solve(jac[ok], r[ok][..., None])[..., 0]
        # singular rows take a damped fixed-point step instead
        delta[~ok, 0] = fallback[upd][~ok] * r[~ok, 0]
        delta[~ok, 1:] = fallback[upd][~ok, None] * r[~ok, 1:]

        J_new = Ju - delta[:, 0]
        bad = J_new <= 0.0
        if np.any(bad):
            delta[bad, 0] = fallback[upd][bad] * r[bad, 0]
            delta[bad, 1:] = fallback[upd][bad, None] * r[bad, 1:]
        J[upd] = Ju - delta[:, 0]
        H[upd] = Hu - delta[:, 1:]
        nonreal += _count_nonrealizable(
            J[upd], H[upd], vv[upd], np.maximum(np.abs(J[upd]), np.abs(Eh[upd]))
        )

    report = _finish(
        batch, iters, resid, ~active, nonreal, raise_on_failure, "moment recovery"
    )
    return J.reshape(batch), H.reshape(batch + (3,)), report


def c2p_solve(Ehat, Fhat, v, config=None, raise_on_failure=True):
    """Dispatch to the configured conserved-to-primitive method."""
    config = config or SolverConfig()
    if (
        config.backend == "auto"
        and config.c2p_method == "newton"
        and kernels.AVAILABLE
    ):
        J, H, iters, resid, conv, nonreal = kernels.c2p_newton(
            Ehat, Fhat, v, config.tol_c2p, config.max_iters
        )
        report = _finish(
            iters.shape,
            iters.ravel(),
            resid.ravel(),
            conv.ravel(),
            nonreal,
            raise_on_failure,
            "moment recovery",
        )
        return J, H, report
    fn = c2p_newton if config.c2p_method == "newton" else c2p_picard
    return fn(Ehat, Fhat, v, config, raise_on_failure=raise_on_failure)


def collision_solve(
    Ehat_star, Fhat_star, dtau, chi, sigma, J_eq, v, config=None, raise_on_failure=True
):
    """Solve the implicit collision stage in hatted variables.

    Finds M = (J, H) with Uhat(M) = Uhat* + dtau * Chat(M), where Chat
    is emission/absorption on J and isotropic damping on H.  The update
    is the damped fixed point preconditioned per component by
    1 / (W + dtau * opacity / (1 + |v|)), which keeps iterates
    realizable for admissible data and is exact in one update when
    v = 0.  With zero opacities this reduces to :func:`c2p_picard`.

    Returns ``(J, H, report)``.
    """
    config = config or SolverConfig()
    if config.backend == "auto" and kernels.AVAILABLE:
        J, H, iters, resid, conv, nonreal = kernels.collision(
            Ehat_star, Fhat_star, dtau, chi, sigma, J_eq, v,
            config.tol_coll, config.max_iters,
        )
        report = _finish(
            iters.shape,
            iters.ravel(),
            resid.ravel(),
            conv.ravel(),
            nonreal,
            raise_on_failure,
            "collision stage",
        )
        return J, H, report
    Ehat_star = np.asarray(Ehat_star, dtype=float)
    batch = Ehat_star.shape
    n = Ehat_star.size
    Eh = Ehat_star.reshape(n)
    Fh = np.asarray(Fhat_star, dtype=float).reshape(n, 3)
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,)).reshape(n, 3)
    dt = np.broadcast_to(np.asarray(dtau, dtype=float), batch).reshape(n)
    ch = np.broadcast_to(np.asarray(chi, dtype=float), batch).reshape(n)
    kp = ch + np.broadcast_to(np.asarray(sigma, dtype=float), batch).reshape(n)
    Jq = np.broadcast_to(np.asarray(J_eq, dtype=float), batch).reshape(n)

    W = lorentz_factor(vv)
    vmag = np.sqrt(np.sum(vv * vv, axis=-1))
    lam = 1.0 / (1.0 + vmag)
    mu_chi = lam / (W + lam * dt * ch)
    mu_kap = lam / (W + lam * dt * kp)

    J = Eh.copy()
    H = Fh.copy()
    # emission can raise the solution far above the incoming state, so
    # the data scale includes the source term
    sc = np.maximum(_data_scale(Eh, Fh), dt * ch * np.abs(Jq))
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    active = np.ones(n, dtype=bool)
    nonreal = 0

    it = 0
    while True:
        it += 1
        idx = np.flatnonzero(active)
        r0, rj = _c2p_residual(J[idx], H[idx], vv[idx], W[idx], Eh[idx], Fh[idx])
        r0 = r0 - dt[idx] * ch[idx] * (Jq[idx] - J[idx])
        rj = rj + (dt[idx] * kp[idx])[:, None] * H[idx]
        rn = np.sqrt(r0 * r0 + np.sum(rj * rj, axis=-1)) / sc[idx]
        iters[idx] = it
        resid[idx] = rn
        done = rn <= config.tol_coll
        active[idx[done]] = False
        if not np.any(active) or it >= config.max_iters:
            break
        upd = idx[~done]
        J[upd] -= mu_chi[upd] * r0[~done]
        H[upd] -= mu_kap[upd, None] * rj[~done]
        nonreal += _count_nonrealizable(
            J[upd], H[upd], vv[upd], np.maximum(np.abs(J[upd]), np.abs(Eh[upd]))
        )

    report = _finish(
        batch, iters, resid, ~active, nonreal, raise_on_failure, "collision stage"
    )
    return J.reshape(batch), H.reshape(batch + (3,)), report


def contraction_constant(v):
    """Iteration-map bound for the damped fixed point at speed ``v``.

    Returns ``(value, margin)`` where value = v sqrt(14 W^6 +
    sqrt(14) W^5 + 1) and margin = W - value; the map is provably
    contractive where the margin is positive.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0) or np.any(v >= 1.0):
        raise ValueError("speed must lie in [0, 1)")
    W = 1.0 / np.sqrt(1.0 - v * v)
    value = v * np.sqrt(14.0 * W**6 + np.sqrt(14.0) * W**5 + 1.0)
    return value, W - value
