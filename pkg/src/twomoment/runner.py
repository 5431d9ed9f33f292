"""Run driver: step loop, conservation ledger, and text-file outputs.

A run advances the configured problem to ``t_end`` at the integrator's
fixed realizability-preserving step, accumulating the boundary and
collision-exchange tallies that close the conservation ledger:

    total(t) - total(0) + boundary(t) - exchange(t) = 0

to round-off for every evolved component.  Outputs are plain text: a
config echo that parses back to the same run, tab-separated snapshot
tables (one row per phase-space quadrature node), the ledger time
series, and a JSON report of the problem's error norms and the
realizability / solver statistics.
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from . import diagnostics, problems

TINY = np.finfo(float).tiny


class _CompensatedSum:
    """Neumaier running sum per component; deterministic and O(1)/step."""

    def __init__(self, n):
        self.s = np.zeros(n)
        self.c = np.zeros(n)

    def add(self, x):
        x = np.asarray(x, dtype=float)
        t = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.c = self.c + np.where(big, (self.s - t) + x, (x - t) + self.s)
        self.s = t

    @property
    def value(self):
        return self.s + self.c


@dataclass
class ConservationLedger:
    """Time series of totals, accumulated tallies, and closure residuals."""

    components: tuple
    times: list = field(default_factory=list)
    totals: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    exchange: list = field(default_factory=list)
    residual: list = field(default_factory=list)

    def add_row(self, t, total, bnd, exch, total0):
        scale = np.maximum.reduce(
            [np.abs(total0), np.abs(total), np.abs(bnd), np.abs(exch)]
        )
        res = (total - total0 + bnd - exch) / np.maximum(scale, TINY)
        self.times.append(float(t))
        self.totals.append(total.copy())
        self.boundary.append(bnd.copy())
        self.exchange.append(exch.copy())
        self.residual.append(res)
        return res


@dataclass
class Snapshot:
    time: float
    U: np.ndarray
    J: np.ndarray
    H: np.ndarray


@dataclass
class RunResult:
    config: object
    setup: object
    U: np.ndarray
    time: float
    steps: int
    snapshots: list
    ledger: ConservationLedger
    report: dict
    out_dir: str = None


def _comp_names(d):
    return ("E", "F1") if d == 1 else ("E", "F1", "F2")


def _phase_columns(op, U, J, H):
    """(names, columns) flattened over all phase-space nodes."""
    shape = op.iw.shape
    if op.d == 1:
        eps = op.eps_nodes[:, None, :, None]
        x = op.vol_coords[0][None, :, None, :]
        coords = [("eps", eps), ("x", x)]
        grey_expand = lambda g: g[None, :, None, :]
    else:
        eps = op.eps_nodes[:, None, None, :, None, None]
        x = op.vol_coords[0][None, :, None, None, :, None]
        y = op.vol_coords[1][None, None, :, None, None, :]
        coords = [("eps", eps), ("x", x), ("y", y)]
        grey_expand = lambda g: g[None, :, :, None, :, :]

    grey = diagnostics.grey_moments(op, U)
    rms = diagnostics.eps_rms(op, U)

    names, cols = [], []
    for name, arr in coords:
        names.append(name)
        cols.append(np.broadcast_to(arr, shape).ravel())
    for c, name in enumerate(_comp_names(op.d)):
        names.append(name)
        cols.append(U[..., c].ravel())
    names.append("J")
    cols.append(J.ravel())
    for c in range(3):
        names.append("H%d" % (c + 1))
        cols.append(H[..., c].ravel())
    for key in ("J", "E", "D", "N"):
        names.append("grey_" + key)
        cols.append(np.broadcast_to(grey_expand(grey[key]), shape).ravel())
    names.append("eps_rms")
    cols.append(np.broadcast_to(grey_expand(rms), shape).ravel())
    return names, cols


def write_snapshot(path, op, cfg, snap):
    names, cols = _phase_columns(op, snap.U, snap.J, snap.H)
    counts = [op.grid.n_energy, op.grid.n_x] + ([op.grid.n_y] if op.d == 2 else [])
    header = "\n".join(
        [
            "problem = %s" % cfg.problem,
            "time = %.17g" % snap.time,
            "dim = %d" % op.d,
            "degree = %d" % op.degree,
            "elements = %s" % " ".join(str(c) for c in counts),
            "nodes_per_axis = %d" % op.n,
            "columns = %s" % " ".join(names),
        ]
    )
    np.savetxt(
        path,
        np.column_stack(cols),
        fmt="%.17g",
        delimiter="\t",
        header=header,
    )


def write_ledger(path, ledger):
    comp = ledger.components
    names = ["time"]
    for group in ("total", "boundary", "exchange", "residual"):
        names += ["%s_%s" % (c, group) for c in comp]
    rows = np.column_stack(
        [
            np.asarray(ledger.times),
            np.asarray(ledger.totals),
            np.asarray(ledger.boundary),
            np.asarray(ledger.exchange),
            np.asarray(ledger.residual),
        ]
    )
    np.savetxt(
        path, rows, fmt="%.17g", delimiter="\t", header="columns = " + " ".join(names)
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def run(cfg, out_dir=None):
    """Advance ``cfg`` to t_end; returns a :class:`RunResult`.

    When ``out_dir`` is given the config echo, snapshots, ledger, and
    report are written there; on failure the partial artifacts are
    flushed with the error recorded in the report before re-raising.
    """
    cfg.validate()
    setup = problems.build_setup(cfg)
    op, integ = setup.operator, setup.integrator
    U = setup.U0.copy()
    comp = _comp_names(op.d)

    total0 = op.total(U)
    acc_b = _CompensatedSum(op.ncomp)
    acc_x = _CompensatedSum(op.ncomp)
    ledger = ConservationLedger(components=comp)
    ledger.add_row(0.0, total0, acc_b.value, acc_x.value, total0)

    if cfg.snapshots >= 2:
        marks = list(np.linspace(0.0, cfg.t_end, cfg.snapshots))
    elif cfg.snapshots == 1:
        marks = [cfg.t_end]
    else:
        marks = []
    snapshots = []

    def snap(t):
        J, H = op.primitives(U)
        snapshots.append(Snapshot(time=t, U=U.copy(), J=J, H=H))

    if marks and marks[0] == 0.0:
        snap(0.0)
        marks.pop(0)

    realz = {
        "theta1_min": np.inf,
        "theta2_min": np.inf,
        "min_gamma_over_E": np.inf,
        "cells_limited": 0,
        "transport_evals": 0,
    }

    t = 0.0
    n = 0
    wall = time.time()
    error = None
    try:
        while t < cfg.t_end - 1e-12 * cfg.t_end:
            dt = min(integ.dt, cfg.t_end - t)
            U, sr = integ.step(U, dt)
            t += dt
            n += 1
            acc_b.add(sr.boundary)
            acc_x.add(sr.exchange)
            realz["theta1_min"] = min(realz["theta1_min"], sr.theta1_min)
            realz["theta2_min"] = min(realz["theta2_min"], sr.theta2_min)
            realz["min_gamma_over_E"] = min(
                realz["min_gamma_over_E"], sr.min_gamma_over_E
            )
            realz["cells_limited"] += sr.cells_limited
            realz["transport_evals"] += sr.transport_evals
            if n % cfg.ledger_every == 0 or t >= cfg.t_end - 1e-12 * cfg.t_end:
                ledger.add_row(t, op.total(U), acc_b.value, acc_x.value, total0)
            while marks and t >= marks[0] - 1e-9 * cfg.t_end:
                snap(t)
                marks.pop(0)
    except Exception as exc:  # flushed below, then re-raised
        error = exc

    wall = time.time() - wall
    report = {
        "problem": cfg.problem,
        "time_reached": t,
        "t_end": cfg.t_end,
        "steps": n,
        "dt": integ.dt,
        "wall_time_s": wall,
        "realizability": realz,
        "solver_stats": dict(op.stats),
    }
    if ledger.residual:
        report["conservation"] = {
            "residual": dict(zip(comp, ledger.residual[-1])),
            "max_abs_residual": float(np.max(np.abs(ledger.residual[-1]))),
        }
    if error is None:
        report["norms"] = setup.report(op, U, t)
    else:
        report["error"] = {
            "type": type(error).__name__,
            "message": str(error),
            "time": t,
            "step": n,
        }

    result = RunResult(
        config=cfg,
        setup=setup,
        U=U,
        time=t,
        steps=n,
        snapshots=snapshots,
        ledger=ledger,
        report=report,
        out_dir=out_dir,
    )
    if out_dir is not None:
        write_outputs(result)
    if error is not None:
        raise error
    return result


def write_outputs(result):
    out_dir = result.out_dir
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    op = result.setup.operator
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config_mod.dump(cfg))
    write_ledger(os.path.join(out_dir, "ledger.tsv"), result.ledger)
    for i, snap in enumerate(result.snapshots):
        write_snapshot(
            os.path.join(out_dir, "snapshot_%04d.tsv" % i), op, cfg, snap
        )
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(result.report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def convergence_suite(element_counts=(16, 32, 64, 128), legs=((1, "ssprk2"), (2, "ssprk3"))):
    """Streaming sine-wave error decay over a mesh family.

    Returns {label: {"elements", "errors", "slope"}} with the slope a
    least-squares fit of log(error) against log(elements).
    """
    out = {}
    for degree, scheme in legs:
        errors = []
        for count in element_counts:
            cfg = config_mod.default_config("sine")
            cfg.nx = count
            cfg.degree = degree
            cfg.scheme = scheme
            cfg.snapshots = 0
            cfg.validate()
            res = run(cfg)
            errors.append(res.report["norms"]["rel_l2_J"])
        slope = -np.polyfit(np.log(element_counts), np.log(errors), 1)[0]
        out["k%d_%s" % (degree, scheme)] = {
            "elements": list(element_counts),
            "errors": errors,
            "slope": float(slope),
        }
    return out


def write_convergence(path, table):
    lines = ["# columns = leg elements error"]
    for label, leg in sorted(table.items()):
        for count, err in zip(leg["elements"], leg["errors"]):
            lines.append("%s\t%d\t%.17g" % (label, count, err))
        lines.append("# slope %s = %.6f" % (label, leg["slope"]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
