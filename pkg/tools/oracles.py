"""Independent reference values for the test suite.

Everything here is computed with mpmath/sympy at high precision, through
routes that share no code with the package (direct formula evaluation,
symbolic rationals, high-precision root finds). The printed values are
frozen as literals in tests/; rerun this script to regenerate them.
"""

import json

import mpmath as mp
import sympy as sp

mp.mp.dps = 40

out = {}

# --- Lorentz factors ---------------------------------------------------
out["W_v05"] = mp.nstr(1 / mp.sqrt(1 - mp.mpf("0.25")), 20)
out["W_v09"] = mp.nstr(1 / mp.sqrt(1 - mp.mpf("0.81")), 20)

# --- algebraic closure values (exact rationals) ------------------------
h = sp.Rational(1, 2)
k_alg = sp.Rational(1, 3) + sp.Rational(2, 15) * (3 * h**2 - h**3 + 3 * h**4)
out["k_alg_h05"] = (str(k_alg), float(k_alg))
q_alg = (h / 75) * (45 + 10 * h - 12 * h**2 - 12 * h**3 + 38 * h**4 - 12 * h**5 + 18 * h**6)
out["q_alg_h05"] = (str(q_alg), float(q_alg))
h = sp.Integer(1)
out["k_alg_h1"] = str(sp.Rational(1, 3) + sp.Rational(2, 15) * (3 * h**2 - h**3 + 3 * h**4))
out["q_alg_h1"] = str((h / 75) * (45 + 10 * h - 12 * h**2 - 12 * h**3 + 38 * h**4 - 12 * h**5 + 18 * h**6))


# --- exact (Langevin-inverted) closure ---------------------------------
def langevin(a):
    return mp.coth(a) - 1 / a


def alpha_of(hval):
    return mp.findroot(lambda a: langevin(a) - hval, mp.mpf(3) * hval / (1 - hval**2))


a05 = alpha_of(mp.mpf("0.5"))
k05 = 1 - 2 * mp.mpf("0.5") / a05
q05 = mp.coth(a05) - 3 * k05 / a05
out["alpha1_h05"] = mp.nstr(a05, 20)
out["k_exact_h05"] = mp.nstr(k05, 20)
out["q_exact_h05"] = mp.nstr(q05, 20)

# max deviation of the algebraic fits from the exact pair on the 101-point grid
maxdk, maxdq = mp.mpf(0), mp.mpf(0)
for i in range(101):
    hv = mp.mpf(i) / 100
    if hv == 0:
        ke, qe = mp.mpf(1) / 3, mp.mpf(0)
    elif hv == 1:
        ke, qe = mp.mpf(1), mp.mpf(1)
    else:
        a = alpha_of(hv)
        ke = 1 - 2 * hv / a
        qe = mp.coth(a) - 3 * ke / a
    ka = mp.mpf(1) / 3 + mp.mpf(2) / 15 * (3 * hv**2 - hv**3 + 3 * hv**4)
    qa = (hv / 75) * (45 + 10 * hv - 12 * hv**2 - 12 * hv**3 + 38 * hv**4 - 12 * hv**5 + 18 * hv**6)
    maxdk = max(maxdk, abs(ka - ke))
    maxdq = max(maxdq, abs(qa - qe))
out["closure_grid_max_abs_dk"] = mp.nstr(maxdk, 6)
out["closure_grid_max_abs_dq"] = mp.nstr(maxdq, 6)

# --- moment conversions at v=(1/2,0,0) ----------------------------------
v = sp.Rational(1, 2)
W = 1 / sp.sqrt(1 - v**2)
# hat moments from conserved (E,F1)=(1,1/2)
E, F1 = sp.Integer(1), sp.Rational(1, 2)
Ehat = W * (E - v * F1)
F1hat = F1 - W**2 * v * (E - v * F1)
out["hat_from_conserved_v05"] = [mp.nstr(mp.mpf(str(sp.N(Ehat, 30))), 20), str(sp.simplify(F1hat))]

# conserved from primitive (J,H)=(1,0): isotropic pressure K_ij = (1/3)(d_ij + W^2 v_i v_j)
J = sp.Integer(1)
K11 = sp.Rational(1, 3) * (1 + W**2 * v**2)
Ehat2 = W * J
F1hat2 = v * K11
E2 = W * Ehat2 + v * F1hat2
F12 = F1hat2 + W * v * Ehat2
out["c2p_forward_v05_J1_H0"] = {
    "Ehat": mp.nstr(mp.mpf(str(sp.N(Ehat2, 30))), 20),
    "F1hat": str(sp.nsimplify(F1hat2)),
    "E": str(sp.simplify(E2)),
    "F1": str(sp.simplify(F12)),
    "E_float": float(sp.N(E2, 30)),
    "F1_float": float(sp.N(F12, 30)),
}
out["u_tilde_v05_J1_H0"] = [mp.nstr(mp.mpf(str(sp.N(W, 30))), 20), mp.nstr(mp.mpf(str(sp.N(W * v, 30))), 20)]
out["S11_v05_J1_H0"] = str(sp.simplify(K11 + W**2 * v**2 * J))  # S^11 = K^11 + W^2 v^2 J, trace S^ii = E
out["E_over_eps_max_v05"] = mp.nstr(mp.sqrt(mp.mpf(3)), 20)

# --- collision solve closed forms ---------------------------------------
# rest frame: J=(J*+dt*chi*JEq)/(1+dt*chi), H=H*/(1+dt*kappa)
Js, dt, chi, sig, JEq, Hs = mp.mpf("0.7"), mp.mpf("2.5"), mp.mpf("1.3"), mp.mpf("0.4"), mp.mpf("2.0"), mp.mpf("0.3")
out["collision_rest_J"] = mp.nstr((Js + dt * chi * JEq) / (1 + dt * chi), 20)
out["collision_rest_H"] = mp.nstr(Hs / (1 + dt * (chi + sig)), 20)

# --- contraction constant ------------------------------------------------
def Ltilde(vv):
    Wv = 1 / mp.sqrt(1 - vv**2)
    return vv * mp.sqrt(14 * Wv**6 + mp.sqrt(14) * Wv**5 + 1)


def Wof(vv):
    return 1 / mp.sqrt(1 - vv**2)


lo, hi = mp.mpf("0.1"), mp.mpf("0.4")
for _ in range(200):
    mid = (lo + hi) / 2
    if Ltilde(mid) < Wof(mid):
        lo = mid
    else:
        hi = mid
out["contraction_root"] = mp.nstr((lo + hi) / 2, 12)
out["contraction_v022_margin"] = mp.nstr(Wof(mp.mpf("0.22")) - Ltilde(mp.mpf("0.22")), 8)

# --- characteristic-speed bound, 1D ramp profile -------------------------
# v(x) with dv/dx = v/L: B=(W^3 v^2/(2L),0,0), C11=W^3 v/L, A=0
# bound = (1+v)/(1-v) * (2|B| + C11) = (1+v)/(1-v) * W^3 |v|(1+|v|)/L
vv, L = mp.mpf("0.3"), mp.mpf("2.0")
Wv = Wof(vv)
out["aeps_ramp_v03_L2"] = mp.nstr(((1 + vv) / (1 - vv)) * Wv**3 * vv * (1 + vv) / L, 20)

# brute-force sharpness: max over directions of |q| for this profile
# q = (E/eps)^2 (A - 2 L_i B_i + L_i L_j C_ij) with E/eps = W + v.l, L_i from l
def max_q_ramp(vv, L, n=4001):
    Wv = Wof(vv)
    B1 = Wv**3 * vv**2 / (2 * L)
    C11 = Wv**3 * vv / L
    best = mp.mpf(0)
    for i in range(n):
        th = mp.pi * i / (n - 1)
        lhat = (mp.cos(th), mp.sin(th), 0)  # azimuthal symmetry about x
        # boost comoving direction: l^0 = W v lx_hat..., use full transform
        lx = (1 + (Wv - 1)) * lhat[0]  # boost along x: spatial part
        l0 = Wv * vv * lhat[0]
        ly = lhat[1]
        Eeps = Wv + vv * lx  # W + v_mu l^mu with v_mu=(0,v,0,0)
        L1 = (vv * Wv + lx) / Eeps  # wait: L^i = (W v^i + l^i)/ (E/eps)
        L2 = ly / Eeps
        qv = Eeps**2 * (-2 * L1 * B1 + L1 * L1 * C11)
        best = max(best, abs(qv))
    return best


mq = max_q_ramp(vv, L)
out["maxq_ramp_v03_L2"] = mp.nstr(mq, 20)
out["aeps_slack_v03"] = mp.nstr((((1 + vv) / (1 - vv)) * Wv**3 * vv * (1 + vv) / L - mq) / mq, 8)
for vsmall in ["0.003", "0.04", "0.3", "0.334"]:
    vs = mp.mpf(vsmall)
    Ws = Wof(vs)
    bound = ((1 + vs) / (1 - vs)) * Ws**3 * vs * (1 + vs) / L
    mqs = max_q_ramp(vs, L, 2001)
    out[f"aeps_slack_v{vsmall}"] = mp.nstr((bound - mqs) / mqs, 8)

# --- quadrature ----------------------------------------------------------
# normalized LGL weights (sum to 1) for M=2,3,4
out["lgl_weights"] = {
    "M2": ["1/2", "1/2"],
    "M3": ["1/6", "2/3", "1/6"],
    "M4": ["1/12", "5/12", "5/12", "1/12"],
}
# check M4 against the closed form w_j = 2/(M(M-1) P_{M-1}(x_j)^2) on [-1,1]
x = sp.symbols("x")
P3 = sp.legendre(3, x)
interior = sorted(sp.solve(sp.diff(P3, x), x))
w_end = sp.Rational(2, 4 * 3)
w_int = [sp.Rational(2, 4 * 3) / (sp.legendre(3, r) ** 2) for r in interior]
out["lgl_M4_check"] = [str(w_end / 2), [str(sp.nsimplify(w / 2)) for w in w_int]]  # /2 normalizes sum to 1

# --- grey diagnostics ----------------------------------------------------
# flat spectrum on [0, e_m]: eps_RMS = e_m sqrt(3/5)
out["eps_rms_flat"] = mp.nstr(mp.sqrt(mp.mpf(3) / 5), 20)

# --- limiter -------------------------------------------------------------
out["theta1_example"] = str(sp.Rational(2, 3))

# --- realizable time step ------------------------------------------------
# d=1, k=2: M_x=3 LGL endpoint weight 1/6 (normalized); bound = (1/6) dx / 2
out["dt_spatial_d1_k2_dx1"] = str(sp.Rational(1, 12))

print(json.dumps(out, indent=2))
