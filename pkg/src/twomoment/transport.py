"""Semi-discrete phase-space transport operator.

Discontinuous Galerkin in (energy) x (1 or 2 space dimensions) on a
steady background fluid.  Nodal state layout, component axis last:

* 1D: ``U[e_eps, e_x, b_eps, q_x, comp]`` with comp = (E, F_1)
* 2D: ``U[e_eps, e_x, e_y, b_eps, q_x, r_y, comp]`` with
  comp = (E, F_1, F_2)

Spatial faces use a global-Lax-Friedrichs flux with unit wave speed;
spectral faces use the same form with the per-element bound on the
phase-space characteristic speed derived from the projected velocity
gradients.  All energy-weighted element matrices are exact, so summing
the discrete equations telescopes interior fluxes to round-off and the
conservation ledger closes against boundary and collision tallies.
"""

import numpy as np

from . import closure, kernels, moments, quadrature, solvers
from .errors import ConfigError, InvalidVelocityError
from .kinematics import lorentz_factor


def _mm(mat, arr, axis):
    """Contract ``arr`` along ``axis`` with ``mat[out, in]``."""
    return np.moveaxis(np.tensordot(mat, arr, axes=(1, axis)), 0, axis)


def _collapse(vec, arr, axis):
    """Contract ``arr`` along ``axis`` with a vector, removing the axis."""
    return np.tensordot(vec, arr, axes=(0, axis))


def _sym3_spectral_radius(C):
    """Closed-form spectral radius of symmetric 3x3 matrices (..., 3, 3)."""
    q = np.trace(C, axis1=-2, axis2=-1) / 3.0
    off = C[..., 0, 1] ** 2 + C[..., 0, 2] ** 2 + C[..., 1, 2] ** 2
    diag = C[..., 0, 0], C[..., 1, 1], C[..., 2, 2]
    p2 = sum((dd - q) ** 2 for dd in diag) + 2.0 * off
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    safe_p = np.where(p > 0.0, p, 1.0)
    B = (C - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam_max = q + 2.0 * p * np.cos(phi)
    lam_min = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return np.where(p2 > 0.0, np.maximum(np.abs(lam_max), np.abs(lam_min)), np.abs(q))


class BoundaryCondition:
    """Spatial boundary closure for one side of one axis.

    kinds: 'periodic', 'outflow' (copy the interior trace),
    'reflecting' (mirror the normal flux and fluid velocity), and
    'dirichlet' (prescribed comoving inflow spectrum).
    """

    KINDS = ("periodic", "outflow", "reflecting", "dirichlet")

    def __init__(self, kind, J_in=None, H_in=None):
        if kind not in self.KINDS:
            raise ConfigError("unknown boundary kind %r" % (kind,))
        if kind == "dirichlet" and J_in is None:
            raise ConfigError("dirichlet boundary needs an inflow spectrum")
        self.kind = kind
        self.J_in = J_in
        self.H_in = H_in


class FluidModel:
    """Analytic steady background: velocity field and opacities.

    ``velocity(*coords)`` maps broadcastable coordinate arrays to an
    array with a trailing axis of 3 components.  ``chi``, ``sigma`` and
    ``j_eq`` take ``(eps, *coords)``; None means identically zero.
    """

    def __init__(self, velocity, chi=None, sigma=None, j_eq=None):
        self.velocity = velocity
        self.chi = chi
        self.sigma = sigma
        self.j_eq = j_eq

    @property
    def collisional(self):
        return self.chi is not None or self.sigma is not None


class TransportOperator:
    def __init__(self, grid, degree, fluid, bcs, solver_config=None, energy_open=False):
        if degree < 1:
            raise ConfigError("polynomial degree must be >= 1")
        self.grid = grid
        self.d = grid.dim
        self.ncomp = 1 + self.d
        self.degree = degree
        self.fluid = fluid
        self.solver_config = solver_config or solvers.SolverConfig()
        self.energy_open = energy_open

        self.sops = quadrature.spatial_operators(degree)
        # nudge the operators so that the telescoping identities used by
        # the conservation ledger hold exactly in floating point
        self.G = self.sops["grad"] - self.sops["grad"].mean(axis=0, keepdims=True)
        self.fL = self.sops["face_left"] / self.sops["face_left"].sum()
        self.fR = self.sops["face_right"] / self.sops["face_right"].sum()
        self.w = self.sops["weights"]
        self.n = degree + 1

        self.eops = quadrature.energy_element_matrices(grid.energy_edges, degree)
        self.Deps = self.eops["grad"] - self.eops["grad"].mean(axis=1, keepdims=True)
        self.Minv = self.eops["mass_inv"]
        self.mu = self.eops["mu"]
        self.eps_nodes = self.eops["nodes"]  # (Ne, n)

        self.bcs = dict(bcs)
        self._check_bcs()
        self._fast = kernels.AVAILABLE and self.solver_config.backend == "auto"

        self._build_fluid()
        self._build_gradients()
        self._build_opacities()
        self._build_weights()
        self._build_ghost_states()

        self.stats = {
            "c2p_max_iterations": 0,
            "c2p_points": 0,
            "collision_max_iterations": 0,
            "nonrealizable_iterates": 0,
        }

    # ------------------------------------------------------------------
    # construction

    def _check_bcs(self):
        axes = "xy"[: self.d]
        for ax in axes:
            lo, hi = self.bcs[(ax, "lo")], self.bcs[(ax, "hi")]
            if (lo.kind == "periodic") != (hi.kind == "periodic"):
                raise ConfigError("periodic boundaries must pair up on axis " + ax)

    def _node_axis(self, a):
        # spatial node axis of axis a in the state layout
        return 2 + self.d + a

    def _elem_axis(self, a):
        return 1 + a

    def _build_fluid(self):
        g, n = self.grid, self.n
        xs = g.spatial_nodes(0, self.sops["nodes"])  # (Nx, n)
        if self.d == 1:
            v = np.asarray(self.fluid.velocity(xs), dtype=float)
            if v.shape != (g.n_x, n, 3):
                raise ConfigError("velocity field returned shape %r" % (v.shape,))
        else:
            ys = g.spatial_nodes(1, self.sops["nodes"])  # (Ny, n)
            X = xs[:, None, :, None]
            Y = ys[None, :, None, :]
            v = np.asarray(self.fluid.velocity(X, Y), dtype=float)
            if v.shape != (g.n_x, g.n_y, n, n, 3):
                raise ConfigError("velocity field returned shape %r" % (v.shape,))
        self.vol_v = v
        self.vol_W = lorentz_factor(v)
        self.vol_coords = (xs,) if self.d == 1 else (xs, ys)
        # view with singleton energy-element/-node axes, aligned with the
        # state layout (fluid quantities are independent of energy)
        if self.d == 1:
            self.vol_v_state = v[None, :, None, :, :]
        else:
            self.vol_v_state = v[None, :, :, None, :, :, :]

    def _fluid_fields(self):
        """Stack (W, W v_1, W v_2, W v_3), trailing axis 4."""
        return np.concatenate(
            [self.vol_W[..., None], self.vol_W[..., None] * self.vol_v], axis=-1
        )

    def _face_fluid(self, fields, a):
        """Single-valued fluid trace on the faces of spatial axis a.

        Interior faces average the two one-sided traces; boundary faces
        take the interior trace, mirrored for reflecting walls so the
        wall-normal velocity vanishes there.
        """
        node_ax = self.d + a  # node axis within the fluid layout
        trL = _collapse(self.fL, fields, node_ax)
        trR = _collapse(self.fR, fields, node_ax)
        lo, hi = self.bcs[("xy"[a], "lo")], self.bcs[("xy"[a], "hi")]

        def mirror(tr):
            out = tr.copy()
            out[..., 1 + a] = -out[..., 1 + a]
            return out

        if lo.kind == "periodic":
            ghost_lo = np.take(trR, -1, axis=a)
            ghost_hi = np.take(trL, 0, axis=a)
        else:
            first = np.take(trL, 0, axis=a)
            last = np.take(trR, -1, axis=a)
            ghost_lo = mirror(first) if lo.kind == "reflecting" else first
            ghost_hi = mirror(last) if hi.kind == "reflecting" else last

        inner = 0.5 * (
            np.take(trR, range(0, trR.shape[a] - 1), axis=a)
            + np.take(trL, range(1, trL.shape[a]), axis=a)
        )
        lo_face = 0.5 * (np.expand_dims(ghost_lo, a) + np.take(trL, [0], axis=a))
        hi_face = 0.5 * (np.take(trR, [-1], axis=a) + np.expand_dims(ghost_hi, a))
        return np.concatenate([lo_face, inner, hi_face], axis=a)

    def _build_gradients(self):
        """Project the fluid gradients and derive the spectral-speed data."""
        fields = self._fluid_fields()
        spatial_shape = fields.shape[:-1]
        grads = []
        for a in range(self.d):
            node_ax = self.d + a
            faces = self._face_fluid(fields, a)
            nfaces = faces.shape[a]
            fhi = np.take(faces, range(1, nfaces), axis=a)
            flo = np.take(faces, range(0, nfaces - 1), axis=a)
            vol = _mm(self.G, fields, node_ax)
            contrib = (
                np.expand_dims(fhi, node_ax) * self._face_shape(self.fR, node_ax, fields.ndim)
                - np.expand_dims(flo, node_ax) * self._face_shape(self.fL, node_ax, fields.ndim)
                - vol
            )
            dx = self.grid.widths(a)
            scale = self.w * 0.5  # w_p / 2, dx applied below
            shape = [1] * fields.ndim
            shape[node_ax] = self.n
            contrib = contrib / scale.reshape(shape)
            eshape = [1] * fields.ndim
            eshape[a] = dx.size
            grads.append(contrib / dx.reshape(eshape))
            # keep the face fluid for the radiation face solves
            setattr(self, "face_fluid_%d" % a, faces)

        # symmetrised four-gradient A_{nu rho} at the volume nodes
        A = np.zeros(spatial_shape + (4, 4))
        for a in range(self.d):
            dW = grads[a][..., 0]
            A[..., 0, 1 + a] += -0.5 * dW
            A[..., 1 + a, 0] += -0.5 * dW
            for j in range(3):
                dWv = grads[a][..., 1 + j]
                A[..., 1 + a, 1 + j] += 0.5 * dWv
                A[..., 1 + j, 1 + a] += 0.5 * dWv
        self.vol_grad = A
        if self.d == 1:
            self.vol_grad_state = A[None, :, None, :, :, :]
        else:
            self.vol_grad_state = A[None, :, :, None, :, :, :, :]

        B = -A[..., 0, 1:]
        Cmat = A[..., 1:, 1:]
        speed = np.sqrt(np.sum(self.vol_v**2, axis=-1))
        doppler = (1.0 + speed) / (1.0 - speed)
        bound = doppler * (2.0 * np.sqrt(np.sum(B * B, axis=-1)) + _sym3_spectral_radius(Cmat))
        node_axes = tuple(range(self.d, 2 * self.d))
        self.aeps_elem = bound.max(axis=node_axes)  # (Nx,) or (Nx, Ny)
        self.wmin_elem = (self.vol_W * (1.0 - speed)).min(axis=node_axes)

    def _face_shape(self, vec, axis, ndim):
        shape = [1] * ndim
        shape[axis] = vec.size
        return vec.reshape(shape)

    def _build_opacities(self):
        if not self.fluid.collisional:
            self.chi = self.sigma = self.j_eq = None
            return
        g, n = self.grid, self.n
        if self.d == 1:
            eps = self.eps_nodes[:, None, :, None]  # (Ne, 1, n, 1)
            coords = (self.vol_coords[0][None, :, None, :],)
            full = (g.n_energy, g.n_x, n, n)
        else:
            eps = self.eps_nodes[:, None, None, :, None, None]
            coords = (
                self.vol_coords[0][None, :, None, None, :, None],
                self.vol_coords[1][None, None, :, None, None, :],
            )
            full = (g.n_energy, g.n_x, g.n_y, n, n, n)

        def sample(fn):
            if fn is None:
                return np.zeros(full)
            return np.broadcast_to(np.asarray(fn(eps, *coords), dtype=float), full).copy()

        self.chi = sample(self.fluid.chi)
        self.sigma = sample(self.fluid.sigma)
        self.j_eq = sample(self.fluid.j_eq)

    def _build_weights(self):
        """Phase-space integration weight per node (for totals)."""
        g = self.grid
        if self.d == 1:
            iw = np.einsum(
                "Eb,x,q->Exbq", self.mu, g.widths(0) / 2.0, self.w
            )
        else:
            iw = np.einsum(
                "Eb,x,y,q,r->Exybqr",
                self.mu,
                g.widths(0) / 2.0,
                g.widths(1) / 2.0,
                self.w,
                self.w,
            )
        self.iw = iw

    def _face_velocity(self, a):
        faces = getattr(self, "face_fluid_%d" % a)
        vhat = faces[..., 1:] / faces[..., :1]
        if np.any(np.sum(vhat * vhat, axis=-1) >= 1.0):
            raise InvalidVelocityError("face-averaged fluid speed reached 1")
        return vhat

    def _build_ghost_states(self):
        """Precompute Dirichlet ghost traces (conserved variables)."""
        self.ghosts = {}
        for a in range(self.d):
            vfaces = self._face_velocity(a)
            for side, fidx in (("lo", 0), ("hi", -1)):
                bc = self.bcs[("xy"[a], side)]
                if bc.kind != "dirichlet":
                    continue
                vb = np.take(vfaces, fidx, axis=a)  # fluid at the boundary face
                # point layout matches the face-trace arrays built in __call__
                if self.d == 1:
                    eps = self.eps_nodes  # (Ne, n)
                    vb_b = np.broadcast_to(vb, eps.shape + (3,))
                else:
                    # transverse element/node axes ride along
                    tshape = vb.shape[:-1]  # (Nt, nt)
                    eps = np.broadcast_to(
                        self.eps_nodes[:, None, :, None],
                        (self.grid.n_energy, tshape[0], self.n, tshape[1]),
                    )
                    vb_b = np.broadcast_to(vb[None, :, None, :, :], eps.shape + (3,))
                J = np.asarray(bc.J_in(eps), dtype=float)
                J = np.broadcast_to(J, eps.shape)
                if bc.H_in is None:
                    H = np.zeros(eps.shape + (3,))
                else:
                    H = np.broadcast_to(np.asarray(bc.H_in(eps), dtype=float), eps.shape + (3,))
                E, F = moments.conserved_from_primitive(J, H, vb_b)
                ghost = np.concatenate([E[..., None], F[..., : self.d]], axis=-1)
                self.ghosts[(a, side)] = ghost

    # ------------------------------------------------------------------
    # state helpers

    def total(self, U):
        """Phase-space integral of the evolved components, shape (ncomp,)."""
        return np.tensordot(self.iw, U, axes=(tuple(range(self.iw.ndim)), tuple(range(self.iw.ndim))))

    def conserved_parts(self, U):
        E = U[..., 0]
        F = np.zeros(U.shape[:-1] + (3,))
        F[..., : self.d] = U[..., 1:]
        return E, F

    def primitives(self, U):
        """Comoving moments (J, H) recovered at the volume nodes."""
        return self._recover(U, self.vol_v_state)

    def _recover(self, U, v):
        """Primitive moments at the points of U (batched C2P)."""
        E, F = self.conserved_parts(U)
        Ehat, Fhat = moments.hat_from_conserved(E, F, v)
        J, H, rep = solvers.c2p_solve(Ehat, Fhat, v, self.solver_config)
        self.stats["c2p_max_iterations"] = max(
            self.stats["c2p_max_iterations"], int(np.max(rep.iterations))
        )
        self.stats["c2p_points"] += int(np.size(rep.iterations))
        self.stats["nonrealizable_iterates"] += rep.nonrealizable_iterates
        return J, H

    def _spatial_flux(self, U, J, H, v, a):
        """Physical flux rows of axis ``a``: (F_a, S_a1 .. S_ad)."""
        out = np.empty_like(U)
        out[..., 0] = U[..., 1 + a]
        stress = kernels.eulerian_stress if self._fast else moments.eulerian_stress
        S = stress(J, H, v)
        out[..., 1:] = S[..., a, : self.d]
        return out

    def _energy_flux(self, J, H, v, grad):
        """Spectral flux rows at points with gradient data ``grad``."""
        contract = kernels.q_contraction if self._fast else closure.q_contraction
        qc = contract(J, H, v, grad)
        return -qc[..., : self.ncomp]

    # ------------------------------------------------------------------
    # main evaluation

    def __call__(self, U):
        """Return (dU/dt, boundary_tally); tally is the net outward
        phase-space boundary flux of the evolved components."""
        vvol = np.broadcast_to(self.vol_v_state, U.shape[:-1] + (3,))
        Jv, Hv = self._recover(U, vvol)
        dU = np.zeros_like(U)
        tally = np.zeros(self.ncomp)

        for a in range(self.d):
            dU += self._axis_rhs(U, Jv, Hv, a, tally)

        # spectral direction: volume term
        vol_grad = np.broadcast_to(self.vol_grad_state, U.shape[:-1] + (4, 4))
        Feps = self._energy_flux(Jv, Hv, vvol, vol_grad)
        if self.d == 1:
            R = np.einsum("Eab,ExbqC->ExaqC", self.Deps, Feps)
        else:
            R = np.einsum("Eab,ExybqrC->ExyaqrC", self.Deps, Feps)
        R += self._energy_face_terms(U, tally)
        if self.d == 1:
            dU += np.einsum("Eab,ExbqC->ExaqC", self.Minv, R)
        else:
            dU += np.einsum("Eab,ExybqrC->ExyaqrC", self.Minv, R)
        return dU, tally

    def _axis_rhs(self, U, Jv, Hv, a, tally):
        node_ax = self._node_axis(a)
        elem_ax = self._elem_axis(a)
        vvol = np.broadcast_to(self.vol_v_state, U.shape[:-1] + (3,))

        # volume term (scale-free reference gradient)
        Fvol = self._spatial_flux(U, Jv, Hv, vvol, a)
        out = _mm(self.G, Fvol, node_ax)

        # face traces
        trL = _collapse(self.fL, U, node_ax)
        trR = _collapse(self.fR, U, node_ax)
        lo, hi = self.bcs[("xy"[a], "lo")], self.bcs[("xy"[a], "hi")]
        ghost_lo, ghost_hi = self._ghost_traces(trL, trR, a, lo, hi)

        nel = U.shape[elem_ax]
        Um = np.concatenate(
            [np.expand_dims(ghost_lo, elem_ax), trR], axis=elem_ax
        )  # minus side of each face
        Up = np.concatenate(
            [trL, np.expand_dims(ghost_hi, elem_ax)], axis=elem_ax
        )  # plus side

        vface = self._face_velocity(a)  # spatial layout without energy axes
        vface_b = self._broadcast_face_fluid(vface, Um.shape, a)
        Jm, Hm = self._recover(Um, vface_b)
        Jp, Hp = self._recover(Up, vface_b)
        Fm = self._spatial_flux(Um, Jm, Hm, vface_b, a)
        Fp = self._spatial_flux(Up, Jp, Hp, vface_b, a)
        flux = 0.5 * (Fm + Fp - (Up - Um))

        # boundary tally: outward flux integrals at the two axis ends
        lo_flux = np.take(flux, 0, axis=elem_ax)
        hi_flux = np.take(flux, -1, axis=elem_ax)
        tally += self._boundary_integral(hi_flux, a) - self._boundary_integral(
            lo_flux, a
        )

        fhi = np.take(flux, range(1, nel + 1), axis=elem_ax)
        flo = np.take(flux, range(0, nel), axis=elem_ax)
        out -= np.expand_dims(fhi, node_ax) * self._face_shape(self.fR, node_ax, U.ndim)
        out += np.expand_dims(flo, node_ax) * self._face_shape(self.fL, node_ax, U.ndim)

        shape = [1] * U.ndim
        shape[node_ax] = self.n
        out = out / (0.5 * self.w).reshape(shape)
        eshape = [1] * U.ndim
        eshape[elem_ax] = nel
        return out / self.grid.widths(a).reshape(eshape)

    def _ghost_traces(self, trL, trR, a, lo, hi):
        elem_ax = self._elem_axis(a)
        if lo.kind == "periodic":
            return np.take(trR, -1, axis=elem_ax), np.take(trL, 0, axis=elem_ax)
        first = np.take(trL, 0, axis=elem_ax)
        last = np.take(trR, -1, axis=elem_ax)

        def reflect(tr):
            out = tr.copy()
            out[..., 1 + a] = -out[..., 1 + a]
            return out

        if lo.kind == "outflow":
            ghost_lo = first
        elif lo.kind == "reflecting":
            ghost_lo = reflect(first)
        else:
            ghost_lo = self.ghosts[(a, "lo")]
        if hi.kind == "outflow":
            ghost_hi = last
        elif hi.kind == "reflecting":
            ghost_hi = reflect(last)
        else:
            ghost_hi = self.ghosts[(a, "hi")]
        return ghost_lo, ghost_hi

    def _broadcast_face_fluid(self, vface, face_state_shape, a):
        """Align face fluid (spatial-only layout) with face-trace arrays."""
        if self.d == 1:
            # faces: (Nf, 3) -> traces (Ne, Nf, n_eps, 3)
            return np.broadcast_to(
                vface[None, :, None, :], face_state_shape[:-1] + (3,)
            )
        if a == 0:
            # faces: (Nf, Ny, ny, 3) -> (Ne, Nf, Ny, n_eps, ny, 3)
            return np.broadcast_to(
                vface[None, :, :, None, :, :], face_state_shape[:-1] + (3,)
            )
        # faces: (Nx, Nf, nx, 3) -> (Ne, Nx, Nf, n_eps, nx, 3)
        return np.broadcast_to(
            vface[None, :, :, None, :, :], face_state_shape[:-1] + (3,)
        )

    def _boundary_integral(self, face_flux, a):
        """Integrate a boundary-face flux over the face, per component."""
        g = self.grid
        if self.d == 1:
            # face_flux: (Ne, n_eps, C)
            return np.einsum("Eb,EbC->C", self.mu, face_flux)
        if a == 0:
            # (Ne, Ny, n_eps, ny, C)
            return np.einsum(
                "Eb,y,r,EybrC->C", self.mu, g.widths(1) / 2.0, self.w, face_flux
            )
        return np.einsum(
            "Eb,x,q,ExbqC->C", self.mu, g.widths(0) / 2.0, self.w, face_flux
        )

    def _energy_face_terms(self, U, tally):
        """Surface terms of the spectral direction (weak-form accumulator)."""
        g = self.grid
        eps_ax = 1 + self.d
        trL = _collapse(self.fL, U, eps_ax)  # value at the lower edge
        trR = _collapse(self.fR, U, eps_ax)
        R = np.zeros_like(U)
        edges = g.energy_edges
        n_e = g.n_energy

        # interior faces between elements e and e+1
        if n_e > 1:
            Um = np.take(trR, range(0, n_e - 1), axis=0)
            Up = np.take(trL, range(1, n_e), axis=0)
            vf = np.broadcast_to(self.vol_v[None], Um.shape[:-1] + (3,))
            gradf = np.broadcast_to(self.vol_grad[None], Um.shape[:-1] + (4, 4))
            Jm, Hm = self._recover(Um, vf)
            Jp, Hp = self._recover(Up, vf)
            Fm = self._energy_flux(Jm, Hm, vf, gradf)
            Fp = self._energy_flux(Jp, Hp, vf, gradf)
            t0m, tvm = moments.u_tilde(Jm, Hm, vf)
            t0p, tvp = moments.u_tilde(Jp, Hp, vf)
            dU_t = np.concatenate(
                [(t0p - t0m)[..., None], (tvp - tvm)[..., : self.d]], axis=-1
            )
            a_eps = self._aeps_face(Um.shape)
            flux = 0.5 * (Fm + Fp - a_eps * dU_t)
            w_face = (edges[1:-1] ** 3).reshape((n_e - 1,) + (1,) * (U.ndim - 2))
            contrib = w_face * flux
            # element e loses through its upper edge, e+1 gains at its lower edge
            up = np.expand_dims(contrib, eps_ax) * self._face_shape(
                self.fR, eps_ax, U.ndim
            )
            lo = np.expand_dims(contrib, eps_ax) * self._face_shape(
                self.fL, eps_ax, U.ndim
            )
            idx_lo = [slice(None)] * U.ndim
            idx_lo[0] = slice(0, n_e - 1)
            idx_hi = [slice(None)] * U.ndim
            idx_hi[0] = slice(1, n_e)
            R[tuple(idx_lo)] -= up
            R[tuple(idx_hi)] += lo

        # outer edges: eps = 0 carries weight 0; the top edge is closed
        # unless configured open, in which case it leaks one-sided flux
        if self.energy_open and edges[-1] > 0.0:
            Um = np.take(trR, -1, axis=0)
            vf = np.broadcast_to(self.vol_v, Um.shape[:-1] + (3,))  # layout matches
            gradf = np.broadcast_to(self.vol_grad, Um.shape[:-1] + (4, 4))
            Jm, Hm = self._recover(Um, vf)
            Fm = self._energy_flux(Jm, Hm, vf, gradf)
            contrib = edges[-1] ** 3 * Fm  # one-sided outflow at the top edge
            idx = [slice(None)] * U.ndim
            idx[0] = slice(n_e - 1, n_e)
            R[tuple(idx)] -= np.expand_dims(contrib, eps_ax - 1)[None] * self._face_shape(
                self.fR, eps_ax, U.ndim
            )
            tally += self._energy_leak_integral(contrib)
        return R

    def _aeps_face(self, face_shape):
        """Dissipation speed at spectral faces, shaped for broadcasting."""
        if self.d == 1:
            # (Nfe, Nx, n_x, C): bound is per spatial element
            return self.aeps_elem[None, :, None, None]
        return self.aeps_elem[None, :, :, None, None, None]

    def _energy_leak_integral(self, contrib):
        g = self.grid
        if self.d == 1:
            return np.einsum("x,q,xqC->C", g.widths(0) / 2.0, self.w, contrib)
        return np.einsum(
            "x,y,q,r,xyqrC->C",
            g.widths(0) / 2.0,
            g.widths(1) / 2.0,
            self.w,
            self.w,
            contrib,
        )

    # ------------------------------------------------------------------
    # collisions

    def collision_update(self, U, dtau):
        """Implicit collision stage at the volume nodes.

        Returns ``(U_new, exchange_rate)`` where the update satisfies
        U_new = U + dtau * C exactly and ``exchange_rate`` is the
        phase-space integral of C over the evolved components.
        """
        if not self.fluid.collisional:
            return U, np.zeros(self.ncomp)
        v = np.broadcast_to(self.vol_v_state, U.shape[:-1] + (3,))
        E, F = self.conserved_parts(U)
        Ehat, Fhat = moments.hat_from_conserved(E, F, v)
        J, H, rep = solvers.collision_solve(
            Ehat, Fhat, dtau, self.chi, self.sigma, self.j_eq, v, self.solver_config
        )
        self.stats["collision_max_iterations"] = max(
            self.stats["collision_max_iterations"], int(np.max(rep.iterations))
        )
        C_E, C_F = moments.collision_source_eulerian(
            J, H, v, self.chi, self.sigma, self.j_eq
        )
        C = np.concatenate([C_E[..., None], C_F[..., : self.d]], axis=-1)
        U_new = U + dtau * C
        exchange = np.tensordot(
            self.iw, C, axes=(tuple(range(self.iw.ndim)), tuple(range(self.iw.ndim)))
        )
        return U_new, exchange

    # ------------------------------------------------------------------
    # time step

    def realizable_dt(self, safety=0.9):
        """Largest provably realizability-preserving step, times safety.

        Evaluated once at startup: the background is steady, so neither
        the spectral speed bound nor the mesh terms change in time.
        """
        k = self.degree
        m_eps = int(np.ceil((k + 5) / 2))
        m_x = int(np.ceil((k + 3) / 2))
        w_eps = quadrature.lobatto_endpoint_weight(m_eps)
        w_x = quadrature.lobatto_endpoint_weight(m_x)
        dplus1 = self.d + 1

        dt = np.inf
        for a in range(self.d):
            dt = min(dt, w_x * np.min(self.grid.widths(a)) / dplus1)

        edges = self.grid.energy_edges
        deps = np.diff(edges)
        eps_hi = edges[1:]
        active = self.aeps_elem > 0.0
        if np.any(active):
            a_max = self.aeps_elem[active]
            w_fac = self.wmin_elem[active]
            # min over pairs (energy element, spatial element)
            ratio = np.min(deps / eps_hi)
            dt_e = np.min(w_fac / a_max) * w_eps * ratio / dplus1
            dt = min(dt, dt_e)
        if not np.isfinite(dt):
            raise ConfigError("time-step bound is not finite")
        return safety * dt
