import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from twomoment import mesh, timestepping
from twomoment.errors import ConfigError, RealizabilityError
from twomoment.limiters import RealizabilityLimiter
from twomoment.timestepping import TimeIntegrator, get_scheme, step_imex, step_ssprk
from twomoment.transport import BoundaryCondition, FluidModel, TransportOperator


def make_op(chi0=None, sigma0=None, v0=0.2, n_x=6, n_e=4):
    g = mesh.Grid(
        mesh.geometric_edges(0.0, 10.0, n_e, 1.3),
        mesh.uniform_edges(0.0, 1.0, n_x),
    )
    fluid = FluidModel(
        velocity=lambda x: np.stack(
            [np.full_like(x, v0), np.zeros_like(x), np.zeros_like(x)], axis=-1
        ),
        chi=None if chi0 is None else (lambda eps, x: chi0 + 0 * eps + 0 * x),
        sigma=None if sigma0 is None else (lambda eps, x: sigma0 + 0 * eps + 0 * x),
        j_eq=None if chi0 is None else (lambda eps, x: 0.5 * np.exp(-eps / 3.0) + 0 * x),
    )
    bcs = {
        ("x", "lo"): BoundaryCondition("periodic"),
        ("x", "hi"): BoundaryCondition("periodic"),
    }
    return TransportOperator(g, 2, fluid, bcs)


def smooth_state(op, flux=0.3, amp=0.4):
    xs = op.vol_coords[0]
    eps = op.eps_nodes
    E = (1.0 + amp * np.sin(2 * np.pi * xs))[None, :, None, :] * np.exp(
        -eps / 4.0
    )[:, None, :, None]
    return np.stack([E, flux * E], axis=-1)


class _LinearOperator:
    """dU/dt = lam * U with no boundaries and no collisions."""

    ncomp = 2

    def __init__(self, lam):
        self.lam = lam
        self.fluid = FluidModel(velocity=lambda x: np.zeros(x.shape + (3,)))

    def __call__(self, U):
        return self.lam * U, np.zeros(self.ncomp)

    def realizable_dt(self, safety):
        return 0.1 * safety


# --- tableau algebra -------------------------------------------------------


@pytest.mark.parametrize("name", ["imex-pdars", "ssprk2", "ssprk3"])
def test_shu_osher_expansion_matches_butcher_weights(name):
    # expand each stage over the basis
    # [u^n, dt*T(stage 0..s-1), dt*C(stage 1..s)] and compare the final
    # stage against the tableau's assembly row
    tab = get_scheme(name)
    s = tab.stages
    nb = 1 + 2 * s
    states = [np.zeros(nb)]
    states[0][0] = 1.0
    for i in range(1, s + 1):
        u = np.zeros(nb)
        for j in range(i):
            cij = tab.conic[i - 1][j]
            if cij == 0.0:
                continue
            u += cij * states[j]
            frac = tab.substep[i - 1][j]
            if frac:
                u[1 + j] += cij * frac
        u[1 + s + (i - 1)] += tab.implicit_diag[i - 1]
        states.append(u)
    final = states[-1]
    assert final[0] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(final[1 : 1 + s], tab.explicit_w[:s], atol=1e-15)
    np.testing.assert_allclose(final[1 + s :], tab.implicit_w[1:], atol=1e-15)
    assert tab.substep_bound == 1.0


def test_tableau_validation_rejects_bad_rows():
    good = get_scheme("ssprk2")
    with pytest.raises(ConfigError):
        timestepping.ButcherPair(
            name="bad",
            explicit_a=good.explicit_a,
            explicit_w=(0.4, 0.6, 0.0),  # not the last tableau row
            implicit_a=good.implicit_a,
            implicit_w=good.implicit_w,
            conic=good.conic,
            substep=good.substep,
            implicit_diag=good.implicit_diag,
        )
    with pytest.raises(ConfigError):
        timestepping.ButcherPair(
            name="bad",
            explicit_a=good.explicit_a,
            explicit_w=good.explicit_w,
            implicit_a=good.implicit_a,
            implicit_w=good.implicit_w,
            conic=((1.0,), (0.7, 0.5)),  # weights do not sum to one
            substep=good.substep,
            implicit_diag=good.implicit_diag,
        )
    with pytest.raises(ConfigError):
        get_scheme("rk4")


# --- scheme equivalences ----------------------------------------------------


def test_pdars_equals_ssprk2_without_collisions():
    op = make_op()
    U0 = smooth_state(op)
    lim = RealizabilityLimiter(op)
    sa = TimeIntegrator(op, "imex-pdars", lim)
    sb = TimeIntegrator(op, "ssprk2", lim)
    UA, UB = U0, U0
    for _ in range(5):
        UA, _ = sa.step(UA)
        UB, _ = sb.step(UB)
    assert np.max(np.abs(UA - UB)) < 1e-14


def test_relaxation_matches_stagewise_backward_euler():
    chi0, sig0, jeq0 = 1.9, 0.6, 0.37
    g = mesh.Grid(mesh.uniform_edges(1.0, 2.0, 1), mesh.uniform_edges(0.0, 1.0, 1))
    fluid = FluidModel(
        velocity=lambda x: np.stack([0 * x, 0 * x, 0 * x], axis=-1),
        chi=lambda eps, x: chi0 + 0 * eps + 0 * x,
        sigma=lambda eps, x: sig0 + 0 * eps + 0 * x,
        j_eq=lambda eps, x: jeq0 + 0 * eps + 0 * x,
    )
    bcs = {
        ("x", "lo"): BoundaryCondition("periodic"),
        ("x", "hi"): BoundaryCondition("periodic"),
    }
    op = TransportOperator(g, 2, fluid, bcs)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0], U[..., 1] = 1.0, 0.55
    integ = TimeIntegrator(op, "imex-pdars", RealizabilityLimiter(op))
    dt, kap = integ.dt, chi0 + sig0
    # independent scalar recursion: at rest each stage is the closed-form
    # backward-Euler relaxation of (J, H)
    J, H = 1.0, 0.55
    for _ in range(30):
        J1 = (J + dt * chi0 * jeq0) / (1 + dt * chi0)
        H1 = H / (1 + dt * kap)
        J = (0.5 * J + 0.5 * J1 + 0.5 * dt * chi0 * jeq0) / (1 + 0.5 * dt * chi0)
        H = (0.5 * H + 0.5 * H1) / (1 + 0.5 * dt * kap)
    for _ in range(30):
        U, _ = integ.step(U)
    assert np.max(np.abs(U[..., 0] - J)) < 1e-12
    assert np.max(np.abs(U[..., 1] - H)) < 1e-12


def test_ssprk3_third_order_on_linear_problem():
    lam, h = -0.7, 0.02
    op = _LinearOperator(lam)
    rng = np.random.default_rng(0)
    U0 = rng.uniform(0.5, 1.5, size=(2, 3, 3, 3, 2))
    U1, _ = TimeIntegrator(op, "ssprk3").step(U0, dt=h)
    z = lam * h
    taylor3 = U0 * (1 + z + z**2 / 2 + z**3 / 6)
    assert np.max(np.abs(U1 - taylor3)) < 1e-12
    # the defect against the exponential is the h^4 Taylor tail
    defect = np.max(np.abs(U1 - U0 * math.exp(z)))
    assert defect == pytest.approx(np.max(U0) * z**4 / 24, rel=1e-2)


def test_frozen_transport_is_identity():
    class Frozen(_LinearOperator):
        def __call__(self, U):
            return np.zeros_like(U), np.zeros(self.ncomp)

    op = Frozen(0.0)
    rng = np.random.default_rng(1)
    U0 = rng.uniform(0.5, 1.5, size=(2, 3, 3, 3, 2))
    for name in ("imex-pdars", "ssprk2"):
        U1, _ = TimeIntegrator(op, name).step(U0, dt=0.7)
        assert np.array_equal(U1, U0)
    U1, _ = TimeIntegrator(op, "ssprk3").step(U0, dt=0.7)
    assert np.max(np.abs(U1 - U0)) < 4e-16 * np.max(U0)


# --- bookkeeping -------------------------------------------------------------


def test_step_ledger_closes_over_collisional_run():
    op = make_op(chi0=0.7, sigma0=0.4, v0=0.25)
    U = smooth_state(op)
    integ = TimeIntegrator(op, "imex-pdars", RealizabilityLimiter(op))
    t0 = op.total(U)
    bnd, exch = [], []
    for _ in range(40):
        U, rep = integ.step(U)
        bnd.append(rep.boundary)
        exch.append(rep.exchange)
    t1 = op.total(U)
    for k in range(op.ncomp):
        resid = (
            t1[k]
            - t0[k]
            + math.fsum(b[k] for b in bnd)
            - math.fsum(x[k] for x in exch)
        )
        assert abs(resid) < 1e-13 * max(abs(t0[0]), abs(t1[0]))


def test_explicit_run_boundary_only_ledger():
    op = make_op(v0=0.15)
    U = smooth_state(op)
    integ = TimeIntegrator(op, "ssprk3", RealizabilityLimiter(op))
    t0 = op.total(U)
    bnd = []
    for _ in range(20):
        U, rep = integ.step(U)
        assert np.all(rep.exchange == 0.0)
        bnd.append(rep.boundary)
    resid = op.total(U) - t0 + np.sum(bnd, axis=0)
    # periodic, closed spectral top: nothing leaves at all
    np.testing.assert_allclose(np.sum(bnd, axis=0), 0.0, atol=1e-13 * abs(t0[0]))
    np.testing.assert_allclose(resid, 0.0, atol=1e-13 * abs(t0[0]))


def test_stage_context_in_realizability_error():
    class Hostile(_LinearOperator):
        def __call__(self, U):
            return -2.0 * U, np.zeros(self.ncomp)  # drives E negative at dt=1

    op_real = make_op(n_x=1, n_e=1, v0=0.0)
    lim = RealizabilityLimiter(op_real)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0] = 1.0
    host = Hostile(0.0)
    host.ncomp = 2
    with pytest.raises(RealizabilityError, match="stage 1"):
        TimeIntegrator(host, "ssprk2", lim).step(U, dt=1.0)


def test_safety_factor_validation_and_dt_cache():
    op = make_op(v0=0.0)
    with pytest.raises(ConfigError):
        TimeIntegrator(op, safety=0.0)
    with pytest.raises(ConfigError):
        TimeIntegrator(op, safety=1.5)
    integ = TimeIntegrator(op, safety=1.0)
    assert integ.dt == op.realizable_dt(1.0)
    assert integ.dt is integ.dt  # cached, not recomputed


def test_wrapper_entry_points():
    op = make_op()
    U = smooth_state(op)
    lim = RealizabilityLimiter(op)
    dt = 0.5 * op.realizable_dt()
    U_imex, _ = step_imex(U, dt, op, limiter=lim)
    U_rk, _ = step_ssprk(U, dt, op, order=2, limiter=lim)
    assert np.max(np.abs(U_imex - U_rk)) < 1e-14  # no opacities configured
    with pytest.raises(ConfigError):
        step_ssprk(U, dt, op, order=4)


# --- realizability of forward-Euler averages ---------------------------------


@settings(max_examples=10)
@given(
    amp=st.floats(0.0, 0.55),
    flux=st.floats(-0.8, 0.8),
    v0=st.floats(-0.3, 0.3),
)
def test_forward_euler_cell_averages_stay_realizable(amp, flux, v0):
    op = make_op(v0=v0, n_x=4, n_e=3)
    U = smooth_state(op, flux=flux, amp=amp)
    lim = RealizabilityLimiter(op)
    avg0 = lim.cell_average(U)
    assume(np.all(avg0[..., 0] - np.abs(avg0[..., 1]) > 0))
    dU, _ = op(U)
    U1 = U + op.realizable_dt() * dU
    avg = lim.cell_average(U1)
    gam = avg[..., 0] - np.abs(avg[..., 1])
    assert np.all(avg[..., 0] > 0)
    assert np.all(gam > -1e-13 * avg[..., 0].max())
