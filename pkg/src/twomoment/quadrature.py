"""Gauss quadrature, nodal Lagrange bases, and element matrices.

The reference cell is [-1, 1] everywhere.  Degree-k elements use the
(k+1)-point Legendre-Gauss nodes as both interpolation and volume
quadrature points; Legendre-Gauss-Lobatto sets enter only through the
realizability machinery (enforcement points and the endpoint weight in
the time-step bound), never as interpolation nodes.
"""

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def lg_nodes(n):
    """Legendre-Gauss nodes and weights on [-1, 1]; weights sum to 2."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = roots_legendre(n)
    return x, w


def lgl_nodes(m):
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1], m >= 2.

    Interior nodes are the roots of P'_{m-1}, obtained as Jacobi(1,1)
    roots; all weights follow from w_j = 2 / (m (m-1) P_{m-1}(x_j)^2),
    which gives the endpoints weight 2 / (m (m-1)).
    """
    if m < 2:
        raise ValueError("Lobatto rule needs at least two nodes")
    if m == 2:
        x = np.array([-1.0, 1.0])
    else:
        interior, _ = roots_jacobi(m - 2, 1.0, 1.0)
        x = np.concatenate([[-1.0], interior, [1.0]])
    P = np.polynomial.legendre.Legendre.basis(m - 1)
    w = 2.0 / (m * (m - 1) * P(x) ** 2)
    return x, w


def lobatto_endpoint_weight(m):
    """Endpoint weight of the m-point Lobatto rule normalized to sum 1."""
    return 1.0 / (m * (m - 1))


class LagrangeBasis:
    """Nodal Lagrange basis on a given reference node set.

    Polynomials are carried as explicit coefficient arrays, which is
    exact and perfectly conditioned at the low degrees used here.
    """

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, dtype=float)
        self.n = self.nodes.size
        self._polys = []
        for j in range(self.n):
            others = np.delete(self.nodes, j)
            scale = np.prod(self.nodes[j] - others)
            self._polys.append(np.poly1d(np.poly(others) / scale))
        self._derivs = [p.deriv() for p in self._polys]

    def eval_matrix(self, points):
        """Matrix V with V[i, j] = l_j(points[i])."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        return np.stack([p(points) for p in self._polys], axis=-1)

    def deriv_matrix(self, points):
        """Matrix with entries l_j'(points[i])."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        return np.stack([p(points) for p in self._derivs], axis=-1)

    @property
    def face_left(self):
        return self.eval_matrix([-1.0])[0]

    @property
    def face_right(self):
        return self.eval_matrix([1.0])[0]


def spatial_operators(degree):
    """Reference operators for one spatial axis at polynomial degree k.

    Returns a dict with the LG nodes/weights, the scale-free weak
    gradient G[a, q] = w_q l_a'(x_q), and the two face vectors.  The
    physical update divides by the diagonal mass w_a dx/2.
    """
    nodes, weights = lg_nodes(degree + 1)
    basis = LagrangeBasis(nodes)
    G = weights[None, :] * basis.deriv_matrix(nodes).T  # [a, q]
    return {
        "nodes": nodes,
        "weights": weights,
        "basis": basis,
        "grad": G,
        "face_left": basis.face_left,
        "face_right": basis.face_right,
    }


def energy_element_matrices(edges, degree):
    """Per-element energy-weighted matrices for the spectral axis.

    For each element [e_lo, e_hi] with physical nodes mapped from the
    LG reference set, builds

    * ``mass``  M[a, b] = integral of e^2 l_a l_b de   (degree 2k + 2)
    * ``grad``  D[a, b] = integral of e^3 l_a' l_b de  (degree 2k + 2)

    both integrated exactly with a (k+2)-point LG rule, plus the mass
    inverse and the row sums mu_b = integral of e^2 l_b de used for
    totals.  Row sums are taken from the assembled mass matrix so that
    summing the discrete equations telescopes to round-off.
    """
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ValueError("energy edges must be nonnegative and increasing")
    n = degree + 1
    ref_nodes, _ = lg_nodes(n)
    basis = LagrangeBasis(ref_nodes)
    qx, qw = lg_nodes(degree + 2)
    V = basis.eval_matrix(qx)  # [q, b]
    Vd = basis.deriv_matrix(qx)  # [q, b], reference derivative

    ne = edges.size - 1
    mass = np.empty((ne, n, n))
    grad = np.empty((ne, n, n))
    nodes_phys = np.empty((ne, n))
    for e in range(ne):
        lo, hi = edges[e], edges[e + 1]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        eq = mid + half * qx
        wq = half * qw
        nodes_phys[e] = mid + half * ref_nodes
        mass[e] = np.einsum("q,qa,qb->ab", wq * eq**2, V, V)
        # physical derivative of l_a carries 1/half from the mapping
        grad[e] = np.einsum("q,qa,qb->ab", wq * eq**3 / half, Vd, V)
    mu = mass.sum(axis=1)  # sum over the test index a
    return {
        "basis": basis,
        "mass": mass,
        "mass_inv": np.linalg.inv(mass),
        "grad": grad,
        "mu": mu,
        "nodes": nodes_phys,
        "face_left": basis.face_left,
        "face_right": basis.face_right,
    }
