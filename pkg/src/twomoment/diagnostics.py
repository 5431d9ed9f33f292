"""Derived fields and error norms evaluated on run states.

Everything here works on the nodal state layout of a transport
operator: energy-integrated (grey) moments with an eps^2 weight, RMS
energies, point spectra, split relative L2 norms, and the boundary-flux
comparisons used by the two-dimensional benchmarks.
"""

import numpy as np

from . import moments, quadrature


def energy_weights(op, power=0):
    """Exact per-node weights for integral of f(eps) eps^power d(eps).

    Shape (n_energy_elements, nodes).  ``power`` 2 reproduces the
    operator's own ledger weights ``mu`` to round-off.
    """
    edges = op.grid.energy_edges
    n = op.n
    ref_nodes, _ = quadrature.lg_nodes(n)
    basis = quadrature.LagrangeBasis(ref_nodes)
    qx, qw = quadrature.lg_nodes(n + 2)  # exact through eps^4 l_b
    V = basis.eval_matrix(qx)
    out = np.empty((edges.size - 1, n))
    for e in range(edges.size - 1):
        half = 0.5 * (edges[e + 1] - edges[e])
        mid = 0.5 * (edges[e + 1] + edges[e])
        eq = mid + half * qx
        out[e] = np.einsum("q,qb->b", half * qw * eq**power, V)
    return out


def _energy_contract(op, weights, fields):
    """Sum the energy element/node axes of ``fields`` against ``weights``.

    ``fields`` must lead with the state layout (energy element axis 0,
    energy node axis 1 + d); trailing component axes ride along.
    """
    axes = ((0, 1), (0, 1 + op.d))
    return np.tensordot(weights, fields, axes=axes)


def grey_scalar(op, field, power=2):
    """Energy integral of a nodal scalar field with an eps^power weight."""
    w = op.mu if power == 2 else energy_weights(op, power)
    return _energy_contract(op, w, np.asarray(field, dtype=float))


def grey_moments(op, U):
    """Grey diagnostics per spatial node.

    Returns a dict with the eps^2-weighted comoving and lab energy
    densities J and E, the comoving number density D = integral of
    J eps d(eps), the lab number density N, and the grey flux vectors
    H (comoving) and F (lab) with a trailing component axis.
    """
    J, H = op.primitives(U)
    E, F = op.conserved_parts(U)
    t0, _ = moments.u_tilde(J, H, op.vol_v_state)
    w1 = energy_weights(op, 1)
    return {
        "J": grey_scalar(op, J),
        "E": grey_scalar(op, E),
        "D": _energy_contract(op, w1, J),
        "N": _energy_contract(op, w1, t0),
        "H": _energy_contract(op, op.mu, H),
        "F": _energy_contract(op, op.mu, F),
    }


def eps_rms(op, U):
    """RMS particle energy of the comoving spectrum, per spatial node."""
    J, _ = op.primitives(U)
    fourth = _energy_contract(op, energy_weights(op, 4), J)
    second = grey_scalar(op, J)
    return np.sqrt(fourth / second)


def rel_l2(values, reference, weights):
    """Weighted relative L2 distance between two nodal fields."""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    weights = np.asarray(weights, dtype=float)
    num = np.sum(weights * (values - reference) ** 2)
    den = np.sum(weights * reference**2)
    return float(np.sqrt(num / den))


def spatial_weights(op):
    """Physical quadrature weights per spatial node, shape like vol_coords."""
    out = op.w * (op.grid.widths(0)[:, None] / 2.0)
    if op.d == 1:
        return out
    wy = op.w * (op.grid.widths(1)[:, None] / 2.0)
    return out[:, None, :, None] * wy[None, :, None, :]


def split_rel_l2(op, field, reference, split):
    """Relative L2 norms on either side of ``x = split`` (1D fields)."""
    w = spatial_weights(op)
    centers = op.grid.centers(0)
    reference = np.asarray(reference)
    results = []
    for mask in (centers < split, centers > split):
        results.append(rel_l2(field[mask], reference[mask], w[mask]))
    return tuple(results)


def spectrum_at(op, U, x, y=None):
    """Comoving spectrum interpolated at a spatial location.

    Returns (eps, J) flattened over the energy grid; the spatial
    interpolation evaluates the element's nodal polynomial.
    """
    J, _ = op.primitives(U)
    basis = op.sops["basis"]

    def interp(field, elem_axis, node_axis, coord, edges):
        idx = int(np.clip(np.searchsorted(edges, coord, side="right") - 1, 0, edges.size - 2))
        width = edges[idx + 1] - edges[idx]
        xi = np.clip(2.0 * (coord - 0.5 * (edges[idx] + edges[idx + 1])) / width, -1.0, 1.0)
        row = basis.eval_matrix(np.array([xi]))[0]
        field = np.take(field, idx, axis=elem_axis)
        # the element axis sits before the node axis in the state layout
        return np.tensordot(field, row, axes=([node_axis - 1], [0]))

    out = interp(J, 1, 2 + op.d, x, op.grid.x_edges)
    if op.d == 2:
        if y is None:
            raise ValueError("2D spectra need both coordinates")
        # out axes: (Ne, Ny, n_eps, n_y)
        out = interp(out, 1, 3, y, op.grid.y_edges)
    return op.eps_nodes.reshape(-1), out.reshape(-1)


def luminosity(op, U, center):
    """Isotropic-equivalent luminosity 2 pi r |F| of the grey lab flux."""
    _, F = op.conserved_parts(U)
    grey_F = _energy_contract(op, op.mu, F[..., : op.d])
    mag = np.sqrt(np.sum(grey_F**2, axis=-1))
    X = op.vol_coords[0][:, None, :, None]
    Y = op.vol_coords[1][None, :, None, :]
    r = np.hypot(X - center[0], Y - center[1])
    return 2.0 * np.pi * r * mag


def boundary_flux_profile(op, U, side):
    """Grey comoving flux H^1 traced onto an x-boundary face (2D).

    Returns the transverse nodal profile, shape (Ny, nodes).
    """
    _, H = op.primitives(U)
    grey_H1 = _energy_contract(op, op.mu, H[..., 0])
    basis = op.sops["basis"]
    if side == "lo":
        row, idx = basis.eval_matrix(np.array([-1.0]))[0], 0
    else:
        row, idx = basis.eval_matrix(np.array([1.0]))[0], -1
    # grey_H1 axes: (Nx, Ny, n_x, n_y)
    face = np.take(grey_H1, idx, axis=0)
    return np.tensordot(face, row, axes=([1], [0]))


def flux_mismatch(op, U):
    """Relative in/out grey flux difference across the x extent (2D)."""
    inflow = boundary_flux_profile(op, U, "lo")
    outflow = boundary_flux_profile(op, U, "hi")
    return np.abs(outflow - inflow) / inflow
