import numpy as np
import pytest
from scipy.integrate import quad

from twomoment import quadrature as qd
from twomoment.mesh import geometric_edges, uniform_edges


def test_lg_exactness():
    x, w = qd.lg_nodes(3)
    assert w.sum() == pytest.approx(2.0, abs=1e-14)
    # 3-point rule integrates degree 5 exactly
    assert np.sum(w * x**4) == pytest.approx(2.0 / 5.0, abs=1e-14)
    assert np.sum(w * x**5) == pytest.approx(0.0, abs=1e-14)


def test_lgl_weights_closed_form():
    _, w2 = qd.lgl_nodes(2)
    np.testing.assert_allclose(w2 / 2.0, [0.5, 0.5], atol=1e-15)
    _, w3 = qd.lgl_nodes(3)
    np.testing.assert_allclose(w3 / 2.0, [1 / 6, 2 / 3, 1 / 6], atol=1e-14)
    _, w4 = qd.lgl_nodes(4)
    np.testing.assert_allclose(
        w4 / 2.0, [1 / 12, 5 / 12, 5 / 12, 1 / 12], atol=1e-14
    )
    assert qd.lobatto_endpoint_weight(3) == pytest.approx(1.0 / 6.0)
    assert qd.lobatto_endpoint_weight(4) == pytest.approx(1.0 / 12.0)


def test_lgl_exactness_degree():
    # m-point Lobatto is exact through degree 2m - 3
    x, w = qd.lgl_nodes(4)
    assert np.sum(w * x**4) == pytest.approx(2.0 / 5.0, abs=1e-14)


def test_lagrange_basis_interpolation():
    nodes, _ = qd.lg_nodes(3)
    basis = qd.LagrangeBasis(nodes)
    pts = np.linspace(-1, 1, 7)
    V = basis.eval_matrix(pts)
    # partition of unity and exact reproduction of degree <= 2
    np.testing.assert_allclose(V.sum(axis=1), np.ones(7), atol=1e-13)
    np.testing.assert_allclose(V @ nodes**2, pts**2, atol=1e-13)
    np.testing.assert_allclose(basis.eval_matrix(nodes), np.eye(3), atol=1e-13)
    # derivative matrix rows annihilate constants
    D = basis.deriv_matrix(nodes)
    np.testing.assert_allclose(D.sum(axis=1), np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(D @ nodes**2, 2 * nodes, atol=1e-12)


def test_spatial_operators_weak_gradient():
    ops = qd.spatial_operators(2)
    # G[a, q] f(x_q) approximates the scale-free integral of f l_a'
    f = ops["nodes"] ** 2
    for a in range(3):
        exact, _ = quad(
            lambda x, a=a: x * x * ops["basis"].deriv_matrix([x])[0, a], -1, 1
        )
        assert ops["grad"][a] @ f == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("degree", [1, 2])
def test_energy_element_matrices_exact(degree):
    edges = np.array([0.0, 1.0, 2.5, 5.0])
    ops = qd.energy_element_matrices(edges, degree)
    n = degree + 1
    for e in range(3):
        lo, hi = edges[e], edges[e + 1]
        basis = ops["basis"]
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        for a in range(n):
            for b in range(n):
                la = lambda eps: basis.eval_matrix([(eps - mid) / half])[0]
                m_ref, _ = quad(lambda eps: eps**2 * la(eps)[a] * la(eps)[b], lo, hi)
                assert ops["mass"][e, a, b] == pytest.approx(m_ref, abs=1e-10)
                d_ref, _ = quad(
                    lambda eps: eps**3
                    * basis.deriv_matrix([(eps - mid) / half])[0, a]
                    / half
                    * la(eps)[b],
                    lo,
                    hi,
                )
                assert ops["grad"][e, a, b] == pytest.approx(d_ref, abs=1e-9)
        # row sums give the e^2-weighted quadrature of each basis fn
        mu_ref = [
            quad(lambda eps: eps**2 * basis.eval_matrix([(eps - mid) / half])[0, b], lo, hi)[0]
            for b in range(n)
        ]
        np.testing.assert_allclose(ops["mu"][e], mu_ref, atol=1e-10)
        # element measure: integral of e^2 over the element
        assert ops["mu"][e].sum() == pytest.approx((hi**3 - lo**3) / 3.0, rel=1e-12)


def test_geometric_edges():
    edges = geometric_edges(0.0, 300.0, 32, 1.119237083677839)
    widths = np.diff(edges)
    np.testing.assert_allclose(
        widths[1:] / widths[:-1], 1.119237083677839, rtol=1e-10
    )
    assert edges[0] == 0.0 and edges[-1] == 300.0
    # first element is very nearly unit width for this catalog ratio
    assert widths[0] == pytest.approx(1.0, abs=2e-3)

    np.testing.assert_allclose(
        geometric_edges(0.0, 2.0, 4, 1.0), uniform_edges(0.0, 2.0, 4), atol=1e-14
    )
    with pytest.raises(ValueError):
        geometric_edges(0.0, 1.0, 3, -2.0)
