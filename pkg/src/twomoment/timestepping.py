"""Strong-stability-preserving time integrators in Shu-Osher form.

Each step advances the phase-space DG system

    dU/dt = T(U) + C(U)

by treating the transport operator T explicitly and the collision
operator C implicitly, stage by stage.  Every stage is a convex
combination of forward-Euler substeps followed by an implicit
backward-Euler collision solve, so realizability of cell averages is
inherited from the single-step properties of those two building
blocks.  The schemes shipped here are globally stiffly accurate: the
final stage *is* the updated solution, no assembly pass.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonConvergenceError, RealizabilityError

__all__ = [
    "ButcherPair",
    "SCHEMES",
    "get_scheme",
    "StepReport",
    "TimeIntegrator",
    "step_imex",
    "step_ssprk",
]


@dataclass(frozen=True)
class ButcherPair:
    """Paired explicit/implicit Runge-Kutta tableaus plus their
    Shu-Osher factorization.

    The Butcher arrays carry ``stages + 1`` rows: row 0 is the trivial
    copy stage and the last row doubles as the assembly weights
    (globally stiffly accurate), so the assembled update equals the
    final stage bit for bit.  ``conic[i]`` and ``substep[i]`` hold the
    convex-combination weights c_ij and forward-Euler fractions for
    working stage i+1; ``implicit_diag[i]`` is the backward-Euler
    fraction of that stage's collision solve.
    """

    name: str
    explicit_a: tuple
    explicit_w: tuple
    implicit_a: tuple
    implicit_w: tuple
    conic: tuple
    substep: tuple
    implicit_diag: tuple

    def __post_init__(self):
        s = len(self.conic)
        if len(self.substep) != s or len(self.implicit_diag) != s:
            raise ConfigError("%s: inconsistent stage counts" % self.name)
        if len(self.explicit_a) != s + 1 or len(self.implicit_a) != s + 1:
            raise ConfigError("%s: Butcher arrays need %d rows" % (self.name, s + 1))
        for tab, w, label in (
            (self.explicit_a, self.explicit_w, "explicit"),
            (self.implicit_a, self.implicit_w, "implicit"),
        ):
            if any(abs(a - b) > 0.0 for a, b in zip(tab[-1], w)):
                raise ConfigError(
                    "%s: %s tableau is not stiffly accurate" % (self.name, label)
                )
        for i, (crow, srow) in enumerate(zip(self.conic, self.substep)):
            if len(crow) != i + 1 or len(srow) != i + 1:
                raise ConfigError("%s: ragged Shu-Osher rows" % self.name)
            if min(crow) < 0.0 or min(srow) < 0.0:
                raise ConfigError("%s: negative Shu-Osher coefficient" % self.name)
            if abs(sum(crow) - 1.0) > 1e-14:
                raise ConfigError(
                    "%s: stage %d weights sum to %r, not 1"
                    % (self.name, i + 1, sum(crow))
                )
        if min(self.implicit_diag) < 0.0:
            raise ConfigError("%s: negative implicit diagonal" % self.name)

    @property
    def stages(self):
        return len(self.conic)

    @property
    def substep_bound(self):
        """Largest multiple of the forward-Euler step the scheme
        tolerates; 1 for every scheme shipped here."""
        frac = max((c for row in self.substep for c in row), default=0.0)
        return 1.0 / frac if frac > 0.0 else np.inf

    @property
    def implicit(self):
        return any(a != 0.0 for a in self.implicit_diag)


# The flagship pairing: explicit side is the optimal two-stage
# second-order SSP scheme, implicit side closes each stage with a
# backward-Euler collision solve (diagonal 1, 1/2).  First order in
# the stiff coupling but recovers the explicit scheme exactly when
# collisions vanish, and captures the diffusion limit.
_PDARS = ButcherPair(
    name="imex-pdars",
    explicit_a=((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.5, 0.5, 0.0)),
    explicit_w=(0.5, 0.5, 0.0),
    implicit_a=((0.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.5, 0.5)),
    implicit_w=(0.0, 0.5, 0.5),
    conic=((1.0,), (0.5, 0.5)),
    substep=((1.0,), (0.0, 1.0)),
    implicit_diag=(1.0, 0.5),
)

_SSPRK2 = ButcherPair(
    name="ssprk2",
    explicit_a=_PDARS.explicit_a,
    explicit_w=_PDARS.explicit_w,
    implicit_a=((0.0, 0.0, 0.0),) * 3,
    implicit_w=(0.0, 0.0, 0.0),
    conic=_PDARS.conic,
    substep=_PDARS.substep,
    implicit_diag=(0.0, 0.0),
)

_SSPRK3 = ButcherPair(
    name="ssprk3",
    explicit_a=(
        (0.0, 0.0, 0.0, 0.0),
        (1.0, 0.0, 0.0, 0.0),
        (0.25, 0.25, 0.0, 0.0),
        (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 0.0),
    ),
    explicit_w=(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 0.0),
    implicit_a=((0.0, 0.0, 0.0, 0.0),) * 4,
    implicit_w=(0.0, 0.0, 0.0, 0.0),
    conic=((1.0,), (0.75, 0.25), (1.0 / 3.0, 0.0, 2.0 / 3.0)),
    substep=((1.0,), (0.0, 1.0), (0.0, 0.0, 1.0)),
    implicit_diag=(0.0, 0.0, 0.0),
)

SCHEMES = {
    "imex-pdars": _PDARS,
    "pdars": _PDARS,
    "ssprk2": _SSPRK2,
    "ssprk3": _SSPRK3,
}


def get_scheme(name):
    try:
        return SCHEMES[name.lower()]
    except KeyError:
        raise ConfigError(
            "unknown scheme %r (choose from %s)" % (name, ", ".join(sorted(SCHEMES)))
        ) from None


@dataclass
class StepReport:
    """Bookkeeping for one full step.

    ``boundary`` is the net conserved-quantity content carried out
    through the domain boundary during the step and ``exchange`` the
    net amount the material hands to the radiation field through
    collisions, both already multiplied by the step size and weighted
    by the stage combinations, so that

        total(U_new) - total(U_old) + boundary - exchange ~ 0

    up to round-off.  Runners should accumulate these per-step arrays
    and sum them with compensated summation at report time.
    """

    dt: float
    boundary: np.ndarray
    exchange: np.ndarray
    theta1_min: float = 1.0
    theta2_min: float = 1.0
    cells_limited: int = 0
    min_gamma_over_E: float = np.inf
    transport_evals: int = 0


class TimeIntegrator:
    """Stage loop coupling transport, limiting, and implicit collisions.

    The background fluid is steady, so the realizability-preserving
    step size is a constant of the run; it is computed once on first
    access and cached.
    """

    def __init__(self, operator, scheme="imex-pdars", limiter=None, safety=0.9):
        self.operator = operator
        self.tableau = get_scheme(scheme) if isinstance(scheme, str) else scheme
        self.limiter = limiter
        if not 0.0 < safety <= 1.0:
            raise ConfigError("safety factor must lie in (0, 1]")
        self.safety = safety
        self._dt = None

    @property
    def dt(self):
        if self._dt is None:
            self._dt = self.tableau.substep_bound * self.operator.realizable_dt(
                self.safety
            )
        return self._dt

    def _limit(self, U, stage, report, where):
        if self.limiter is None:
            return U
        try:
            U, info = self.limiter.limit(U)
        except RealizabilityError as exc:
            raise RealizabilityError(
                "stage %d (%s): %s" % (stage, where, exc)
            ) from None
        report.theta1_min = min(report.theta1_min, info["theta1_min"])
        report.theta2_min = min(report.theta2_min, info["theta2_min"])
        report.cells_limited += info["cells_theta1"] + info["cells_theta2"]
        report.min_gamma_over_E = min(
            report.min_gamma_over_E, info["min_gamma_over_E"]
        )
        return U

    def step(self, U, dt=None):
        """Advance one step; returns ``(U_new, StepReport)``."""
        op = self.operator
        tab = self.tableau
        dt = self.dt if dt is None else float(dt)
        nstage = tab.stages

        states = [U]
        rates = [None] * nstage
        tallies = [None] * nstage
        # per-stage boundary/exchange content, indexed like states
        bnd = [np.zeros(op.ncomp)]
        exch = [np.zeros(op.ncomp)]
        report = StepReport(dt=dt, boundary=None, exchange=None)

        for i in range(1, nstage + 1):
            conic = tab.conic[i - 1]
            substep = tab.substep[i - 1]
            U_ex = np.zeros_like(U)
            B = np.zeros(op.ncomp)
            X = np.zeros(op.ncomp)
            for j in range(i):
                cij = conic[j]
                if cij == 0.0:
                    continue
                frac = substep[j]
                if frac != 0.0:
                    if rates[j] is None:
                        rates[j], tallies[j] = op(states[j])
                        report.transport_evals += 1
                    U_ex += cij * (states[j] + (frac * dt) * rates[j])
                    B += cij * frac * dt * tallies[j]
                else:
                    U_ex += cij * states[j]
                B += cij * bnd[j]
                X += cij * exch[j]

            U_ex = self._limit(U_ex, i, report, "after transport")

            dtau = tab.implicit_diag[i - 1] * dt
            if dtau != 0.0 and op.fluid.collisional:
                try:
                    U_ex, rate = op.collision_update(U_ex, dtau)
                except NonConvergenceError as exc:
                    raise NonConvergenceError(
                        "stage %d: %s" % (i, exc),
                        residual=exc.residual,
                        context=dict(exc.context, stage=i),
                    ) from None
                X = X + dtau * rate
                U_ex = self._limit(U_ex, i, report, "after collisions")

            states.append(U_ex)
            bnd.append(B)
            exch.append(X)

        # globally stiffly accurate: the last stage is the answer
        report.boundary = bnd[-1]
        report.exchange = exch[-1]
        return states[-1], report


def step_imex(U, dt, operator, scheme="imex-pdars", limiter=None):
    """One IMEX step; convenience wrapper around :class:`TimeIntegrator`."""
    integ = TimeIntegrator(operator, scheme=scheme, limiter=limiter)
    return integ.step(U, dt)


def step_ssprk(U, dt, operator, order=2, limiter=None):
    """One explicit SSP-RK step of the requested order."""
    if order not in (2, 3):
        raise ConfigError("SSP-RK order must be 2 or 3")
    return step_imex(U, dt, operator, scheme="ssprk%d" % order, limiter=limiter)
