import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from twomoment import mesh
from twomoment.errors import ConfigError, RealizabilityError
from twomoment.limiters import LimiterConfig, RealizabilityLimiter
from twomoment.transport import BoundaryCondition, FluidModel, TransportOperator


def make_op(n_x=1, v0=0.0, degree=2):
    g = mesh.Grid(
        mesh.uniform_edges(1.0, 2.0, 1), mesh.uniform_edges(0.0, 1.0, n_x)
    )
    fluid = FluidModel(
        velocity=lambda x: np.stack(
            [np.full_like(x, v0), np.zeros_like(x), np.zeros_like(x)], axis=-1
        )
    )
    bcs = {
        ("x", "lo"): BoundaryCondition("periodic"),
        ("x", "hi"): BoundaryCondition("periodic"),
    }
    return TransportOperator(g, degree, fluid, bcs)


def lg_nodes_of(op):
    return op.sops["nodes"]


# --- positivity blend ------------------------------------------------------


def test_theta1_frozen_example():
    # linear energy profile with average 1 dipping to -1/2 at the left
    # face: theta1 = |(0 - 1)/(-1/2 - 1)| = 2/3
    op = make_op()
    lim = RealizabilityLimiter(op)
    xi = lg_nodes_of(op)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0] = (1.0 + 1.5 * xi)[None, None, None, :]
    work, info = lim.apply(U)
    assert info["theta1_min"] == pytest.approx(2.0 / 3.0, abs=1e-14)
    # averages survive the blend
    np.testing.assert_allclose(
        lim.cell_average(work), lim.cell_average(U), atol=1e-15
    )
    # left-face energy is now exactly floored at zero
    vals = lim._check_values(work)
    assert vals[..., 0].min() >= -1e-15


def test_realizable_field_untouched():
    op = make_op()
    lim = RealizabilityLimiter(op)
    xi = lg_nodes_of(op)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0] = (2.0 + 0.5 * xi)[None, None, None, :]
    U[..., 1] = 0.3 * U[..., 0]
    work, info = lim.apply(U)
    assert info["theta1_min"] == 1.0
    assert info["theta2_min"] == 1.0
    assert np.array_equal(work, U)


def test_theta2_restores_cone_and_preserves_average():
    op = make_op()
    lim = RealizabilityLimiter(op)
    xi = lg_nodes_of(op)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0] = 1.0
    # flux exceeds the energy density near the faces
    U[..., 1] = (1.4 * xi)[None, None, None, :]
    avg0 = lim.cell_average(U)
    work, info = lim.apply(U)
    assert info["theta2_min"] < 1.0
    vals = lim._check_values(work)
    gam = lim._gamma(vals)
    assert gam.min() >= -1e-13 * avg0[..., 0].max()
    np.testing.assert_allclose(lim.cell_average(work), avg0, atol=1e-14)
    # applying again is a no-op
    work2, info2 = lim.apply(work)
    assert info2["theta1_min"] == 1.0
    assert info2["theta2_min"] == 1.0
    assert np.array_equal(work2, work)


def test_nonrealizable_average_is_a_hard_error():
    op = make_op()
    lim = RealizabilityLimiter(op)
    U = np.zeros((1, 1, 3, 3, 2))
    U[..., 0] = 1.0
    U[..., 1] = 1.5  # |F| > E uniformly: average itself is off-cone
    with pytest.raises(RealizabilityError):
        lim.apply(U)
    U[..., 0] = -1.0
    U[..., 1] = 0.0
    with pytest.raises(RealizabilityError):
        lim.apply(U)


@settings(max_examples=30)
@given(
    e_amp=st.floats(0.0, 3.0),
    f_avg=st.floats(-0.9, 0.9),
    f_amp=st.floats(0.0, 3.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_limited_field_admissible_and_average_preserved(
    e_amp, f_avg, f_amp, seed
):
    op = make_op(n_x=3)
    lim = RealizabilityLimiter(op)
    rng = np.random.default_rng(seed)
    U = np.zeros((1, 3, 3, 3, 2))
    U[..., 0] = 1.0 + e_amp * rng.uniform(-1, 1, size=(1, 3, 3, 3))
    U[..., 1] = f_avg + f_amp * rng.uniform(-1, 1, size=(1, 3, 3, 3))
    avg = lim.cell_average(U)
    gam_avg = avg[..., 0] - np.abs(avg[..., 1])
    assume(np.all(avg[..., 0] > 1e-6))
    assume(np.all(gam_avg > 1e-6))
    work, info = lim.apply(U)
    np.testing.assert_allclose(
        lim.cell_average(work), avg, atol=1e-14 * np.abs(avg).max()
    )
    gam = lim._gamma(lim._check_values(work))
    scale = avg[..., 0].max()
    assert gam.min() >= -1e-13 * scale
    work2, _ = lim.apply(work)
    assert np.array_equal(work2, work)


# --- TVD slope limiter -------------------------------------------------------


def test_tvd_flattens_isolated_spike():
    op = make_op(n_x=5)
    lim = RealizabilityLimiter(op, LimiterConfig(enable_tvd=True))
    xi = lg_nodes_of(op)
    U = np.zeros((2, 5, 3, 3, 2))
    U[..., 0] = 1.0
    U[:, 2, :, :, 0] = 1.0 + 0.8 * xi  # slope with flat neighbors
    out = lim.tvd(U)
    np.testing.assert_allclose(out[:, 2, :, :, 0], 1.0, atol=1e-14)
    # neighbors keep their values
    np.testing.assert_allclose(out[:, 1], U[:, 1], atol=0)


def test_tvd_keeps_globally_linear_field():
    g = mesh.Grid(mesh.uniform_edges(1.0, 2.0, 1), mesh.uniform_edges(0.0, 1.0, 6))
    fluid = FluidModel(
        velocity=lambda x: np.stack([0 * x, 0 * x, 0 * x], axis=-1)
    )
    bcs = {
        ("x", "lo"): BoundaryCondition("outflow"),
        ("x", "hi"): BoundaryCondition("outflow"),
    }
    op = TransportOperator(g, 2, fluid, bcs)
    lim = RealizabilityLimiter(op, LimiterConfig(enable_tvd=True))
    xs = op.vol_coords[0]
    U = np.zeros((1, 6, 3, 3, 2))
    U[..., 0] = (2.0 + 0.3 * xs)[None, :, None, :]
    U[..., 1] = 0.25 * U[..., 0]
    out = lim.tvd(U)
    np.testing.assert_allclose(out, U, atol=1e-14)


def test_tvd_preserves_cell_averages():
    op = make_op(n_x=5)
    lim = RealizabilityLimiter(op, LimiterConfig(enable_tvd=True))
    rng = np.random.default_rng(3)
    U = rng.uniform(0.5, 2.0, size=(2, 5, 3, 3, 2))
    out = lim.tvd(U)
    np.testing.assert_allclose(
        lim.cell_average(out), lim.cell_average(U), atol=1e-14
    )


def test_limit_composes_tvd_then_realizability():
    op = make_op(n_x=5)
    lim = RealizabilityLimiter(op, LimiterConfig(enable_tvd=True))
    xi = lg_nodes_of(op)
    U = np.zeros((2, 5, 3, 3, 2))
    U[..., 0] = 1.0
    U[:, 2, :, :, 0] = 1.0 + 0.8 * xi
    U[..., 1] = (1.2 * xi)[None, None, None, :]
    out, info = lim.limit(U)
    gam = lim._gamma(lim._check_values(out))
    assert gam.min() >= -1e-13
    np.testing.assert_allclose(
        lim.cell_average(out), lim.cell_average(U), atol=1e-14
    )


def test_limiter_config_validation():
    with pytest.raises(ConfigError):
        LimiterConfig(beta_tvd=0.5)
    with pytest.raises(ConfigError):
        LimiterConfig(beta_tvd=2.5)
    LimiterConfig(beta_tvd=1.0)
    LimiterConfig(beta_tvd=2.0)
