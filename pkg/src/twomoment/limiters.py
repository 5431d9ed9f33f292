"""Realizability-enforcing limiter and optional TVD slope limiter.

The realizability limiter rescales each element's nodal polynomial
toward its (realizable) cell average in two passes: a theta_1 blend of
the energy density alone restoring positivity on the check-point set,
then a theta_2 blend of the full moment vector restoring cone
membership gamma(U) = E - |F| >= 0.  Both passes preserve the cell
average exactly and leave already-admissible elements untouched.

The check-point set is the union of the volume quadrature nodes with
the tensor sets that replace one direction's nodes by the Gauss-Lobatto
points entering the forward-Euler step bound, so post-limiter states
satisfy the hypotheses of that bound.
"""

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import ConfigError, RealizabilityError
from .solvers import GAMMA_SLACK


@dataclass
class LimiterConfig:
    enable_tvd: bool = False
    beta_tvd: float = 1.25
    bisect_tol: float = 1e-12
    bisect_max_iters: int = 100

    def __post_init__(self):
        if not 1.0 <= self.beta_tvd <= 2.0:
            raise ConfigError("beta_tvd must lie in [1, 2]")


def _minmod3(a, b, c):
    sgn = np.sign(a)
    agree = (sgn == np.sign(b)) & (sgn == np.sign(c))
    mag = np.minimum(np.abs(a), np.minimum(np.abs(b), np.abs(c)))
    return np.where(agree, sgn * mag, 0.0)


class RealizabilityLimiter:
    def __init__(self, operator, config=None):
        self.op = operator
        self.config = config or LimiterConfig()
        self.d = operator.d
        if self.config.enable_tvd and self.d != 1:
            raise ConfigError("the TVD limiter is implemented for 1D runs only")
        k = operator.degree
        n = operator.n

        basis = operator.sops["basis"]
        eps_basis = operator.eops["basis"]
        lgl_eps, _ = quadrature.lgl_nodes(int(np.ceil((k + 5) / 2)))
        lgl_x, _ = quadrature.lgl_nodes(int(np.ceil((k + 3) / 2)))
        self.P_eps = eps_basis.eval_matrix(lgl_eps)  # (Meps, n)
        self.P_x = basis.eval_matrix(lgl_x)  # (Mx, n)

        # cell-average weights: convex in each direction
        mu = operator.mu
        self.aw_eps = mu / mu.sum(axis=1, keepdims=True)  # (Ne, n)
        self.aw_x = operator.w / 2.0

        # Legendre P1 projection for the TVD slope (1D spatial axis)
        xq = operator.sops["nodes"]
        self.slope_w = 1.5 * operator.w * xq  # <U, P1>/<P1, P1> weights
        self.ref_nodes = xq

        self.n = n

    # ------------------------------------------------------------------

    def cell_average(self, U):
        """Average per element, shape (elem dims..., C)."""
        if self.d == 1:
            return np.einsum("Eb,q,ExbqC->ExC", self.aw_eps, self.aw_x, U)
        return np.einsum(
            "Eb,q,r,ExybqrC->ExyC", self.aw_eps, self.aw_x, self.aw_x, U
        )

    def _check_values(self, U):
        """Element check-point values, shape (Ncells, P, C)."""
        eps_ax = 1 + self.d
        nel = U.shape[: 1 + self.d]
        ncells = int(np.prod(nel))
        C = U.shape[-1]
        sets = [U]
        sets.append(np.moveaxis(
            np.tensordot(self.P_eps, U, axes=(1, eps_ax)), 0, eps_ax))
        for a in range(self.d):
            ax = eps_ax + 1 + a
            sets.append(np.moveaxis(
                np.tensordot(self.P_x, U, axes=(1, ax)), 0, ax))
        flat = [s.reshape(ncells, -1, C) for s in sets]
        return np.concatenate(flat, axis=1)

    def _gamma(self, vals):
        E = vals[..., 0]
        Fmag = np.sqrt(np.sum(vals[..., 1:] ** 2, axis=-1))
        return E - Fmag

    def apply(self, U):
        """Enforce realizability; returns (limited U, info dict).

        Raises RealizabilityError when a cell average lies outside the
        cone beyond round-off slack, which indicates the step bound was
        violated upstream.
        """
        nel = U.shape[: 1 + self.d]
        ncells = int(np.prod(nel))
        C = U.shape[-1]
        Ubar = self.cell_average(U)
        flatbar = Ubar.reshape(ncells, C)
        E_K = flatbar[:, 0]
        gbar = self._gamma(flatbar)
        slack = GAMMA_SLACK * np.abs(E_K)
        bad = (E_K <= 0.0) | (gbar < -slack)
        if np.any(bad):
            idx = int(np.flatnonzero(bad)[0])
            raise RealizabilityError(
                "non-realizable cell average (cell %d: E=%.6e, gamma=%.6e)"
                % (idx, E_K[idx], gbar[idx])
            )

        work = U.copy()
        flat = work.reshape(ncells, -1, C)

        # pass 1: positivity of E via a blend of E alone
        vals = self._check_values(work).reshape(ncells, -1, C)
        m_S = vals[..., 0].min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs((0.0 - E_K) / (m_S - E_K))
        theta1 = np.where(m_S < 0.0, np.minimum(np.nan_to_num(ratio, nan=1.0), 1.0), 1.0)
        if np.any(theta1 < 1.0):
            flat[..., 0] = E_K[:, None] + theta1[:, None] * (
                flat[..., 0] - E_K[:, None]
            )

        # pass 2: full-vector blend restoring gamma >= 0 on check points
        vals = self._check_values(work).reshape(ncells, -1, C)
        gamma = self._gamma(vals)
        troubled = gamma < -slack[:, None]
        theta2 = np.ones(ncells)
        n_troubled_cells = 0
        if np.any(troubled):
            cell_idx, pt_idx = np.nonzero(troubled)
            n_troubled_cells = int(np.unique(cell_idx).size)
            Ub = flatbar[cell_idx]  # (m, C)
            Up = vals[cell_idx, pt_idx]  # (m, C)
            lo = np.zeros(cell_idx.size)
            hi = np.ones(cell_idx.size)
            for _ in range(self.config.bisect_max_iters):
                mid = 0.5 * (lo + hi)
                g = self._gamma(Ub + mid[:, None] * (Up - Ub))
                ok = g >= 0.0
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
                if np.max(hi - lo) < self.config.bisect_tol:
                    break
            np.minimum.at(theta2, cell_idx, lo)
            mask = theta2 < 1.0
            flat[mask] = (
                flatbar[mask, None, :]
                + theta2[mask, None, None] * (flat[mask] - flatbar[mask, None, :])
            )

        # stage assertion: the post-limiter field is admissible on the
        # full check-point set (slack covers round-off on the cone)
        vals = self._check_values(work).reshape(ncells, -1, C)
        gamma = self._gamma(vals)
        if np.any(gamma < -slack[:, None]):
            worst = float(np.min(gamma / np.maximum(E_K[:, None], np.finfo(float).tiny)))
            raise RealizabilityError(
                "post-limiter realizability check failed (min gamma/E = %.3e)" % worst
            )

        info = {
            "theta1_min": float(theta1.min()) if ncells else 1.0,
            "theta2_min": float(theta2.min()) if ncells else 1.0,
            "cells_theta1": int(np.count_nonzero(theta1 < 1.0)),
            "cells_theta2": n_troubled_cells,
            "min_gamma_over_E": float(
                np.min(gamma / np.maximum(E_K[:, None], np.finfo(float).tiny))
            ),
        }
        return work, info

    # ------------------------------------------------------------------

    def tvd(self, U):
        """Minmod slope limiter on the spatial axis (1D), component-wise.

        Each element's solution is compared against the linear model
        from its Legendre P1 projection; where the slope leaves the
        minmod envelope beta/2 * (neighbor average differences), the
        element is replaced by the clipped linear model.  Boundary
        elements of non-periodic axes are left untouched.
        """
        if not self.config.enable_tvd:
            return U
        op = self.op
        beta = self.config.beta_tvd
        # every (energy element, energy node) row is limited as an
        # independent 1D field; U_row(xi) ~ avg + sigma * xi
        row_avg = np.einsum("q,ExbqC->ExbC", self.aw_x, U)
        sigma = np.einsum("q,ExbqC->ExbC", self.slope_w, U)

        periodic = op.bcs[("x", "lo")].kind == "periodic"
        if periodic:
            dplus = np.roll(row_avg, -1, axis=1) - row_avg
            dminus = row_avg - np.roll(row_avg, 1, axis=1)
        else:
            dplus = np.zeros_like(row_avg)
            dminus = np.zeros_like(row_avg)
            dplus[:, :-1] = row_avg[:, 1:] - row_avg[:, :-1]
            dminus[:, 1:] = row_avg[:, 1:] - row_avg[:, :-1]

        limited = _minmod3(sigma, 0.5 * beta * dplus, 0.5 * beta * dminus)
        active = limited != sigma
        if not periodic:
            # one-sided neighbor data: leave the edge elements alone
            active[:, 0] = False
            active[:, -1] = False
        if not np.any(active):
            return U

        out = U.copy()
        lin = (
            row_avg[..., None, :]
            + limited[..., None, :] * self.ref_nodes[:, None]
        )  # (Ne, Nx, ne, nx, C)
        mask = np.broadcast_to(active[..., None, :], out.shape)
        out[mask] = lin[mask]
        return out

    def limit(self, U):
        """TVD (optional) followed by the realizability limiter."""
        U = self.tvd(U)
        return self.apply(U)
