"""Fused pointwise kernels for the solver hot paths.

The vectorised routines in :mod:`closure`, :mod:`moments` and
:mod:`solvers` are the reference implementations; they allocate a
temporary per algebraic step, which dominates the runtime of large
batched evaluations.  This module repeats the same arithmetic as
single-pass compiled loops.  Dispatch falls back to the reference route
when numba is unavailable, and the test suite pins both routes against
each other on random batches.

Everything here is deterministic: no fastmath, no threading, so a rerun
of the same configuration reproduces snapshots bit for bit.
"""

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


TINY = np.finfo(float).tiny
H_DEGENERATE = 1e-14
GAMMA_SLACK = 1e-13


@njit(cache=True)
def _kq(h):
    """Algebraic closure factors (k, q, dk/dh) at flux factor h."""
    if h < 0.0:
        h = 0.0
    elif h > 1.0:
        h = 1.0
    h2 = h * h
    k = 1.0 / 3.0 + (2.0 / 15.0) * (3.0 * h2 - h2 * h + 3.0 * h2 * h2)
    q = (h / 75.0) * (
        45.0
        + 10.0 * h
        - 12.0 * h2
        - 12.0 * h2 * h
        + 38.0 * h2 * h2
        - 12.0 * h2 * h2 * h
        + 18.0 * h2 * h2 * h2
    )
    kp = (2.0 / 15.0) * (6.0 * h - 3.0 * h2 + 12.0 * h2 * h)
    return k, q, kp


@njit(cache=True)
def _point_geometry(J, H, v):
    """Shared per-point closure data.

    Returns (W, vmag, norm, h, safe) where ``norm`` is the Minkowski
    norm of the comoving flux with the time component reconstructed
    from orthogonality, ``h`` the saturated flux factor and ``safe``
    whether the unit direction H/|H| is well defined.
    """
    vsq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    W = 1.0 / np.sqrt(1.0 - vsq)
    vmag = np.sqrt(vsq)
    Ht = -(v[0] * H[0] + v[1] * H[1] + v[2] * H[2])
    nsq = H[0] * H[0] + H[1] * H[1] + H[2] * H[2] - Ht * Ht
    norm = np.sqrt(nsq) if nsq > 0.0 else 0.0
    scale = J if J > norm else norm
    if scale < TINY:
        scale = TINY
    h = norm / scale if norm > 0.0 else 0.0
    aJ = abs(J)
    ref = aJ if aJ > norm else norm
    safe = norm > H_DEGENERATE * ref
    return W, vmag, norm, h, safe


@njit(cache=True)
def _residual(J, H, v, W, Eh, Fh, r):
    """C2P residual into r[0:4]; returns its Euclidean norm."""
    W2 = W * W
    Wd, vmag, norm, h, safe = _point_geometry(J, H, v)
    k, q, kp = _kq(h)
    c_iso = 0.5 * J * (1.0 - k)
    c_ani = 0.5 * J * (3.0 * k - 1.0)
    inv = 1.0 / norm if safe else 0.0
    r[0] = W * J + v[0] * H[0] + v[1] * H[1] + v[2] * H[2] - Eh
    for j in range(3):
        acc = W * H[j] - Fh[j]
        hj = H[j] * inv
        for i in range(3):
            Kij = c_iso * (W2 * v[i] * v[j]) + c_ani * (H[i] * inv) * hj
            if i == j:
                Kij += c_iso
            acc += v[i] * Kij
        r[j + 1] = acc
    return np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3])


@njit(cache=True)
def _solve4(A, b, x):
    """Gaussian elimination with partial pivoting; returns |det|."""
    for row in range(4):
        x[row] = b[row]
    det = 1.0
    for col in range(4):
        piv = col
        big = abs(A[col, col])
        for row in range(col + 1, 4):
            mag = abs(A[row, col])
            if mag > big:
                big = mag
                piv = row
        if piv != col:
            for cc in range(4):
                tmp = A[col, cc]
                A[col, cc] = A[piv, cc]
                A[piv, cc] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        p = A[col, col]
        det *= p
        if p == 0.0:
            return 0.0
        for row in range(col + 1, 4):
            f = A[row, col] / p
            if f != 0.0:
                for cc in range(col, 4):
                    A[row, cc] -= f * A[col, cc]
                x[row] -= f * x[col]
    for col in range(3, -1, -1):
        acc = x[col]
        for cc in range(col + 1, 4):
            acc -= A[col, cc] * x[cc]
        x[col] = acc / A[col, col]
    return abs(det)


@njit(cache=True)
def _jacobian(J, H, v, W, A):
    """Analytic C2P Jacobian d(Ehat, Fhat)/d(J, H) into A[0:4, 0:4]."""
    W2 = W * W
    Wd, vmag, norm, h, safe = _point_geometry(J, H, v)
    k, q, kp = _kq(h)
    psi0 = 1.0 - k + kp * h
    psi1 = 3.0 * k - 1.0 - 3.0 * kp * h
    degenerate = h <= H_DEGENERATE
    psi2 = 0.0 if degenerate else (3.0 * k - 1.0) / h
    inv = 1.0 / norm if safe else 0.0

    hh0 = H[0] * inv
    hh1 = H[1] * inv
    hh2 = H[2] * inv
    h0up = v[0] * hh0 + v[1] * hh1 + v[2] * hh2

    A[0, 0] = W
    A[0, 1] = v[0]
    A[0, 2] = v[1]
    A[0, 3] = v[2]
    for j in range(3):
        hj = H[j] * inv
        accJ = 0.0
        for i in range(3):
            hi = H[i] * inv
            proj = W2 * v[i] * v[j]
            if i == j:
                proj += 1.0
            accJ += v[i] * 0.5 * (psi0 * proj + psi1 * hi * hj)
        A[j + 1, 0] = accJ
        for kk in range(3):
            hk = H[kk] * inv
            alpha = hk - h0up * v[kk]
            accH = 0.0
            if not degenerate:
                for i in range(3):
                    hi = H[i] * inv
                    proj = W2 * v[i] * v[j]
                    if i == j:
                        proj += 1.0
                    aniso = hi * hj
                    term = 0.5 * kp * (3.0 * aniso - proj) * alpha
                    sym = -2.0 * aniso * alpha
                    if i == kk:
                        sym += hj
                    if j == kk:
                        sym += hi
                    accH += v[i] * (term + 0.5 * psi2 * sym)
            A[j + 1, kk + 1] = accH
            if j == kk:
                A[j + 1, kk + 1] += W


@njit(cache=True)
def c2p_newton_kernel(Eh, Fh, vv, tol, max_iters):
    """Pointwise damped-Newton recovery over a flat batch.

    Mirrors the reference iteration: Newton step from the analytic
    Jacobian, falling back to the realizable damped fixed-point step
    when the Jacobian is singular or the energy density would leave
    the cone.  Returns (J, H, iters, resid, converged, nonreal).
    """
    n = Eh.size
    J = np.empty(n)
    H = np.empty((n, 3))
    iters = np.zeros(n, dtype=np.int64)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=np.bool_)
    nonreal = 0

    r = np.empty(4)
    A = np.empty((4, 4))
    delta = np.empty(4)
    Hp = np.empty(3)
    vp = np.empty(3)
    Fp = np.empty(3)

    for p in range(n):
        for c in range(3):
            vp[c] = vv[p, c]
            Fp[c] = Fh[p, c]
        vsq = vp[0] * vp[0] + vp[1] * vp[1] + vp[2] * vp[2]
        W = 1.0 / np.sqrt(1.0 - vsq)
        vmag = np.sqrt(vsq)
        fallback = 1.0 / (W * (1.0 + vmag))
        Ep = Eh[p]
        Jp = Ep / W
        sp = abs(Ep)
        for c in range(3):
            Hp[c] = Fp[c] / W
            if abs(Fp[c]) > sp:
                sp = abs(Fp[c])
        if sp < TINY:
            sp = TINY

        it = 0
        rn = 0.0
        ok_flag = False
        while True:
            it += 1
            rn = _residual(Jp, Hp, vp, W, Ep, Fp, r) / sp
            if rn <= tol:
                ok_flag = True
                break
            if it >= max_iters:
                break
            _jacobian(Jp, Hp, vp, W, A)
            det = _solve4(A, r, delta)
            use_fallback = det <= 1e-200
            if not use_fallback and Jp - delta[0] <= 0.0:
                use_fallback = True
            if use_fallback:
                delta[0] = fallback * r[0]
                delta[1] = fallback * r[1]
                delta[2] = fallback * r[2]
                delta[3] = fallback * r[3]
            Jp -= delta[0]
            for c in range(3):
                Hp[c] -= delta[c + 1]
            Wd, vm2, norm, h, safe = _point_geometry(Jp, Hp, vp)
            scale = abs(Jp) if abs(Jp) > abs(Ep) else abs(Ep)
            if Jp - norm < -GAMMA_SLACK * scale:
                nonreal += 1
        J[p] = Jp
        for c in range(3):
            H[p, c] = Hp[c]
        iters[p] = it
        resid[p] = rn
        conv[p] = ok_flag
    return J, H, iters, resid, conv, nonreal


@njit(cache=True)
def collision_kernel(Eh, Fh, vv, dt, ch, kp_arr, Jq, tol, max_iters):
    """Pointwise preconditioned fixed point for the implicit collision
    stage; mirrors the reference update exactly."""
    n = Eh.size
    J = np.empty(n)
    H = np.empty((n, 3))
    iters = np.zeros(n, dtype=np.int64)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=np.bool_)
    nonreal = 0

    r = np.empty(4)
    Hp = np.empty(3)
    vp = np.empty(3)
    Fp = np.empty(3)

    for p in range(n):
        for c in range(3):
            vp[c] = vv[p, c]
            Fp[c] = Fh[p, c]
        vsq = vp[0] * vp[0] + vp[1] * vp[1] + vp[2] * vp[2]
        W = 1.0 / np.sqrt(1.0 - vsq)
        vmag = np.sqrt(vsq)
        lam = 1.0 / (1.0 + vmag)
        mu_chi = lam / (W + lam * dt[p] * ch[p])
        mu_kap = lam / (W + lam * dt[p] * kp_arr[p])
        Ep = Eh[p]
        Jp = Ep
        sp = abs(Ep)
        for c in range(3):
            Hp[c] = Fp[c]
            if abs(Fp[c]) > sp:
                sp = abs(Fp[c])
        emis = dt[p] * ch[p] * abs(Jq[p])
        if emis > sp:
            sp = emis
        if sp < TINY:
            sp = TINY

        it = 0
        rn = 0.0
        ok_flag = False
        while True:
            it += 1
            rn = _residual(Jp, Hp, vp, W, Ep, Fp, r)
            r[0] = r[0] - dt[p] * ch[p] * (Jq[p] - Jp)
            for c in range(3):
                r[c + 1] = r[c + 1] + dt[p] * kp_arr[p] * Hp[c]
            rn = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]) / sp
            if rn <= tol:
                ok_flag = True
                break
            if it >= max_iters:
                break
            Jp -= mu_chi * r[0]
            for c in range(3):
                Hp[c] -= mu_kap * r[c + 1]
            Wd, vm2, norm, h, safe = _point_geometry(Jp, Hp, vp)
            scale = abs(Jp) if abs(Jp) > abs(Ep) else abs(Ep)
            if Jp - norm < -GAMMA_SLACK * scale:
                nonreal += 1
        J[p] = Jp
        for c in range(3):
            H[p, c] = Hp[c]
        iters[p] = it
        resid[p] = rn
        conv[p] = ok_flag
    return J, H, iters, resid, conv, nonreal


@njit(cache=True)
def stress_kernel(J, H, vv):
    """Eulerian stress S_ij = K_ij + W(H_i v_j + v_i H_j) + W^2 v_i v_j J."""
    n = J.size
    S = np.empty((n, 3, 3))
    for p in range(n):
        v0 = vv[p, 0]
        v1 = vv[p, 1]
        v2 = vv[p, 2]
        vsq = v0 * v0 + v1 * v1 + v2 * v2
        W = 1.0 / np.sqrt(1.0 - vsq)
        W2 = W * W
        Jp = J[p]
        Wd, vmag, norm, h, safe = _point_geometry(Jp, H[p], vv[p])
        k, q, kp = _kq(h)
        c_iso = 0.5 * Jp * (1.0 - k)
        c_ani = 0.5 * Jp * (3.0 * k - 1.0)
        inv = 1.0 / norm if safe else 0.0
        for i in range(3):
            vi = vv[p, i]
            hi = H[p, i] * inv
            for j in range(3):
                vj = vv[p, j]
                hj = H[p, j] * inv
                val = c_iso * W2 * vi * vj + c_ani * hi * hj
                if i == j:
                    val += c_iso
                val += W * (H[p, i] * vj + vi * H[p, j]) + W2 * vi * vj * Jp
                S[p, i, j] = val
    return S


@njit(cache=True)
def q_contraction_kernel(J, H, vv, grad):
    """Contraction of the closed third moment with the background
    four-gradient; mirrors the expanded reference contraction."""
    n = J.size
    out = np.empty((n, 4))
    u = np.empty(4)
    H4up = np.empty(4)
    hh = np.empty(4)
    gu = np.empty(4)
    gh = np.empty(4)
    Kgu = np.empty(4)
    eta = np.empty(4)
    eta[0] = -1.0
    eta[1] = 1.0
    eta[2] = 1.0
    eta[3] = 1.0
    for p in range(n):
        v0 = vv[p, 0]
        v1 = vv[p, 1]
        v2 = vv[p, 2]
        vsq = v0 * v0 + v1 * v1 + v2 * v2
        W = 1.0 / np.sqrt(1.0 - vsq)
        u[0] = W
        u[1] = W * v0
        u[2] = W * v1
        u[3] = W * v2
        Ht = -(v0 * H[p, 0] + v1 * H[p, 1] + v2 * H[p, 2])
        H4up[0] = -Ht
        H4up[1] = H[p, 0]
        H4up[2] = H[p, 1]
        H4up[3] = H[p, 2]
        Jp = J[p]
        Wd, vmag, norm, h, safe = _point_geometry(Jp, H[p], vv[p])
        k, q, kp = _kq(h)
        inv = 1.0 / norm if safe else 0.0
        hh[0] = -Ht * inv
        hh[1] = H[p, 0] * inv
        hh[2] = H[p, 1] * inv
        hh[3] = H[p, 2] * inv

        for rr in range(4):
            acc_u = 0.0
            acc_h = 0.0
            for nn in range(4):
                acc_u += grad[p, nn, rr] * u[nn]
                acc_h += grad[p, rr, nn] * hh[nn]
            gu[rr] = acc_u
            gh[rr] = acc_h

        a_uu = gu[0] * u[0] + gu[1] * u[1] + gu[2] * u[2] + gu[3] * u[3]
        a_uH = gu[0] * H4up[0] + gu[1] * H4up[1] + gu[2] * H4up[2] + gu[3] * H4up[3]
        u_gh = gh[0] * u[0] + gh[1] * u[1] + gh[2] * u[2] + gh[3] * u[3]
        h_gh = gh[0] * hh[0] + gh[1] * hh[1] + gh[2] * hh[2] + gh[3] * hh[3]

        c_iso = 0.5 * Jp * (1.0 - k)
        c_ani = 0.5 * Jp * (3.0 * k - 1.0)
        K_grad = 0.0
        tr_pg = a_uu
        for a in range(4):
            tr_pg += eta[a] * grad[p, a, a]
            accK = 0.0
            for b in range(4):
                proj = eta[a] * (1.0 if a == b else 0.0) + u[a] * u[b]
                Kab = c_iso * proj + c_ani * hh[a] * hh[b]
                K_grad += Kab * grad[p, a, b]
                accK += Kab * gu[b]
            Kgu[a] = accK

        ch = 0.5 * Jp * (h - q)
        ct = 0.5 * Jp * (5.0 * q - 3.0 * h)
        coef_u = Jp * a_uu + 2.0 * a_uH + K_grad
        for a in range(4):
            pg_h = eta[a] * gh[a] + u[a] * u_gh
            L = ch * (hh[a] * tr_pg + 2.0 * pg_h) + ct * hh[a] * h_gh
            out[p, a] = u[a] * coef_u + H4up[a] * a_uu + 2.0 * Kgu[a] + L
    return out


# ---------------------------------------------------------------------------
# array-shaped wrappers


def _flat(arr, ncomp=None):
    a = np.ascontiguousarray(np.asarray(arr, dtype=float))
    if ncomp is None:
        return a.reshape(a.size)
    return a.reshape(-1, ncomp)


def c2p_newton(Ehat, Fhat, v, tol, max_iters):
    batch = np.asarray(Ehat).shape
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,))
    J, H, iters, resid, conv, nonreal = c2p_newton_kernel(
        _flat(Ehat), _flat(Fhat, 3), _flat(vv, 3), tol, max_iters
    )
    return (
        J.reshape(batch),
        H.reshape(batch + (3,)),
        iters.reshape(batch),
        resid.reshape(batch),
        conv.reshape(batch),
        nonreal,
    )


def collision(Ehat, Fhat, dtau, chi, sigma, J_eq, v, tol, max_iters):
    batch = np.asarray(Ehat).shape
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,))
    dt = np.broadcast_to(np.asarray(dtau, dtype=float), batch)
    ch = np.broadcast_to(np.asarray(chi, dtype=float), batch)
    kp = ch + np.broadcast_to(np.asarray(sigma, dtype=float), batch)
    Jq = np.broadcast_to(np.asarray(J_eq, dtype=float), batch)
    J, H, iters, resid, conv, nonreal = collision_kernel(
        _flat(Ehat),
        _flat(Fhat, 3),
        _flat(vv, 3),
        _flat(dt),
        _flat(ch),
        _flat(kp),
        _flat(Jq),
        tol,
        max_iters,
    )
    return (
        J.reshape(batch),
        H.reshape(batch + (3,)),
        iters.reshape(batch),
        resid.reshape(batch),
        conv.reshape(batch),
        nonreal,
    )


def eulerian_stress(J, H, v):
    batch = np.asarray(J).shape
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,))
    S = stress_kernel(_flat(J), _flat(H, 3), _flat(vv, 3))
    return S.reshape(batch + (3, 3))


def q_contraction(J, H, v, grad):
    batch = np.asarray(J).shape
    vv = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,))
    gg = np.ascontiguousarray(
        np.broadcast_to(np.asarray(grad, dtype=float), batch + (4, 4))
    ).reshape(-1, 4, 4)
    out = q_contraction_kernel(_flat(J), _flat(H, 3), _flat(vv, 3), gg)
    return out.reshape(batch + (4,))
