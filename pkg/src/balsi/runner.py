"""Run orchestration: the event loop, result records and file output."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scn
from .comparator import run_comparator
from .errors import BalsiError
from .hybrid import (HORIZON, TRIGGER, HybridTrajectory, Segment, integrate_flow,
                     integrate_segment)
from .identifier import IdentifierAux, nullspace_dim, update
from .kernels import BACKEND
from .plants import measure


@dataclass
class EventRecord:
    """One event: the estimate before and after the update and diagnostics."""

    index: int
    tau: float
    kind: str
    theta_before: np.ndarray
    theta_after: np.ndarray
    switched: bool
    nullspace_dim: int = -1
    consistency: float = float("nan")
    trigger_residual: float = float("nan")
    trigger_eta: float = float("nan")
    Y: np.ndarray = None
    Q: np.ndarray = None


@dataclass
class RunResult:
    scenario: scn.Scenario
    plant: object
    law: object
    traj: object
    events: list = field(default_factory=list)
    reinit_times: list = field(default_factory=lambda: [0.0])
    checks: list = field(default_factory=list)

    @property
    def kind(self):
        return self.scenario.controller.kind

    @property
    def noise(self):
        return scn.build_noise(self.scenario)

    @property
    def t_end(self):
        return self.traj.t_end

    @property
    def switch_times(self):
        return [e.tau for e in self.events if e.switched]

    @property
    def theta_final(self):
        if self.kind == "extended_matching":
            return self.traj.theta(self.traj.t_end)
        if self.events:
            return self.events[-1].theta_after.copy()
        return self.traj.segments[0].theta.copy()

    def switch_threshold(self):
        return 10.0 * self.scenario.controller.qp_tol

    def sample(self, ts):
        """Arrays (x, u, theta, V) at the times ``ts`` (right-continuous in theta)."""
        ts = np.asarray(ts, dtype=float)
        n, l = self.plant.n, self.plant.l
        X = np.empty((ts.size, n))
        U = np.empty((ts.size, self.plant.m))
        TH = np.empty((ts.size, l))
        V = np.empty(ts.size)
        noise = self.noise
        noisy = noise.active
        if self.kind == "extended_matching":
            Y = self.traj.sol(ts) if ts.size else np.empty((n + l, 0))
            X[:] = Y[:n].T
            TH[:] = Y[n:].T
            for k, t in enumerate(ts):
                U[k, 0] = self.traj.u(t)
                V[k] = self.law.V(TH[k], X[k])
            return X, U, TH, V
        segs = self.traj.segments
        starts = np.array([s.t0 for s in segs])
        idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(segs) - 1)
        for j in np.unique(idx):
            seg = segs[j]
            sel = np.nonzero(idx == j)[0]
            X[sel] = seg.sol(ts[sel])[:n].T
            TH[sel] = seg.theta
        for k, t in enumerate(ts):
            xm = measure(X[k], t, noise) if noisy else X[k]
            U[k] = 0.0 if self.kind == "open_loop" else self.law.k(TH[k], xm)
            V[k] = self.law.V(TH[k], X[k])
        return X, U, TH, V

    def identifier_at(self, t):
        """(Y, Q, t_origin) interpolated from the dense record at time ``t``."""
        segs = self.traj.segments
        seg = next((sg for sg in segs if sg.t0 < t <= sg.t1), segs[0])
        layout = IdentifierAux(self.plant.structure).layout
        s = seg.sol(t)[self.plant.n:]
        if s.size != layout.size:
            raise BalsiError("this run did not integrate the identifier")
        origin = max(r for r in self.reinit_times if r < t or r == 0.0)
        Y, Q = layout.Y_Q(s)
        return Y, Q, origin


def _trigger_diagnostics(seg, law, theta, level, noise, event_tol):
    def h(t):
        x = seg.x(t)
        if noise.active:
            x = measure(x, t, noise)
        return law.V(theta, x) - level
    r = seg.t1
    return h(r), abs(h(r) - h(max(seg.t0, r - event_tol)))


def _hybrid_loop(sc, plant, law, theta0, identify):
    n = plant.n
    icfg = scn.build_integrator(sc)
    trig = scn.build_trigger(sc)
    noise = scn.build_noise(sc)
    ucfg = scn.build_update(sc)
    t_final = sc.output.t_final
    period = sc.controller.reinit_period
    aux = IdentifierAux(plant.structure, 0.0) if identify else None
    s = np.zeros(aux.size) if identify else None
    traj = HybridTrajectory(n)
    result = RunResult(sc, plant, law, traj)
    t, x, theta = 0.0, np.array(sc.plant.x0, dtype=float), np.array(theta0, dtype=float)
    threshold = 10.0 * ucfg.qp_tol
    index = 0
    while t_final - t > icfg.event_tol:
        index += 1
        try:
            seg = integrate_segment(plant, law, theta, x, t, trig, icfg, aux=aux, aux0=s,
                                    noise=noise, t_stop=t_final)
        except BalsiError as exc:
            raise type(exc)(f"event {index}: {exc}") from None
        traj.segments.append(seg)
        xm0 = measure(x, t, noise) if noise.active else x
        level = law.V(theta, xm0) + trig.a(xm0)
        t, x = seg.t1, seg.y1[:n].copy()
        if seg.kind == HORIZON:
            break
        rec = EventRecord(index, t, seg.kind, theta.copy(), theta.copy(), False)
        if seg.kind == TRIGGER:
            rec.trigger_residual, rec.trigger_eta = _trigger_diagnostics(
                seg, law, theta, level, noise, icfg.event_tol)
        if identify:
            s = seg.y1[n:].copy()
            Y, Q = aux.layout.Y_Q(s)
            try:
                new = update(theta, Y, Q, plant.box, ucfg)
            except BalsiError as exc:
                raise type(exc)(f"event {index} (t={t:.9g}): {exc}") from None
            rec.theta_after = new
            rec.switched = bool(np.linalg.norm(new - theta) > threshold)
            rec.nullspace_dim = nullspace_dim(Q, ucfg.rank_tol)
            rec.consistency = float(np.linalg.norm(Y - Q @ plant.theta_true)
                                    / (1.0 + np.linalg.norm(Q, 2)))
            rec.Y, rec.Q = Y, Q
            theta = new
            if period > 0 and t - aux.t_origin >= period - icfg.event_tol:
                aux = IdentifierAux(plant.structure, t)
                s = np.zeros(aux.size)
                result.reinit_times.append(t)
        result.events.append(rec)
    if not traj.segments:
        # empty horizon: a single point at t = 0
        y0 = x if not identify else np.concatenate([x, s])
        sol, _, _, _ = integrate_flow(lambda t, y: np.zeros_like(y), 0.0, y0, 0.0, icfg)
        traj.segments.append(Segment(0.0, 0.0, theta.copy(), sol, y0, y0, HORIZON, n, 0))
    return result


def _open_loop(sc, plant, law):
    icfg = scn.build_integrator(sc)
    m = plant.m

    def rhs(t, y):
        return plant.xdot(y, np.zeros(m))

    x0 = np.array(sc.plant.x0, dtype=float)
    sol, t_end, y_end, nfev = integrate_flow(rhs, 0.0, x0, sc.output.t_final, icfg)
    seg = Segment(0.0, t_end, sc.theta_hat0, sol, x0, y_end, HORIZON, plant.n, nfev)
    return RunResult(sc, plant, law, HybridTrajectory(plant.n, [seg]))


def run_scenario(sc):
    """Execute a validated scenario and return its :class:`RunResult` (no checks)."""
    plant = scn.build_plant(sc)
    law = scn.build_law(sc)
    kind = sc.controller.kind
    if kind in ("balsi_exact", "balsi_regularized"):
        return _hybrid_loop(sc, plant, law, sc.theta_hat0, identify=True)
    if kind == "nominal_known_theta":
        return _hybrid_loop(sc, plant, law, plant.theta_true, identify=False)
    if kind == "open_loop":
        return _open_loop(sc, plant, law)
    c = sc.controller
    run = run_comparator(plant, law, sc.theta_hat0, sc.plant.x0, sc.output.t_final,
                         c.gamma, c.eps, scn.build_noise(sc), scn.build_integrator(sc))
    return RunResult(sc, plant, law, run)


def run_balsi(sc, checks=True):
    """Run a scenario and, for hybrid runs, evaluate the guarantee checks."""
    from .verify import verify_guarantees
    result = run_scenario(sc)
    if checks and result.kind != "extended_matching":
        result.checks = verify_guarantees(result)
    return result


# ---------------------------------------------------------------- output

def _g17(v):
    return "%.17g" % v


def output_times(t_end, dt, event_times, merge_tol=1e-9):
    """Grid k*dt on [0, t_end] merged with event times; returns (times, flags)."""
    count = int(np.floor(t_end / dt + 1e-9))
    grid = [k * dt for k in range(count + 1)]
    flags = [0] * len(grid)
    extra = []
    for tau in event_times:
        k = int(round(tau / dt))
        if 0 <= k < len(grid) and abs(grid[k] - tau) <= merge_tol:
            flags[k] = 1
        else:
            extra.append(tau)
    rows = sorted(list(zip(grid, flags)) + [(t, 1) for t in extra])
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows], dtype=int)


def emit_csv(result, path, output_dt=None):
    """Write the trajectory CSV (17 significant digits, deterministic)."""
    dt = result.scenario.output.dt if output_dt is None else output_dt
    if not dt > 0:
        raise scn.ValidationError("output_dt must be > 0")
    ev = [e.tau for e in result.events]
    ts, flags = output_times(result.t_end, dt, ev)
    X, U, TH, V = result.sample(ts)
    n, l, m = X.shape[1], TH.shape[1], U.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + (["u"] if m == 1 else [f"u{i + 1}" for i in range(m)])
              + [f"theta_hat_{i + 1}" for i in range(l)] + ["V", "event_flag"])
    tag = result.kind == "extended_matching"
    if tag:
        header.append("controller")
    lines = [",".join(header)]
    for k, t in enumerate(ts):
        vals = [t, *X[k], *U[k], *TH[k], V[k]]
        row = ",".join(_g17(v) for v in vals) + f",{flags[k]}"
        if tag:
            row += ",extended_matching"
        lines.append(row)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_events(result, path):
    l = result.plant.l
    header = (["index", "tau", "kind"] + [f"theta_before_{i + 1}" for i in range(l)]
              + [f"theta_after_{i + 1}" for i in range(l)]
              + ["switched", "nullspace_dim", "consistency_residual", "trigger_residual",
                 "trigger_eta"])
    lines = [",".join(header)]
    for e in result.events:
        vals = ([str(e.index), _g17(e.tau), e.kind] + [_g17(v) for v in e.theta_before]
                + [_g17(v) for v in e.theta_after]
                + [str(int(e.switched)), str(e.nullspace_dim), _g17(e.consistency),
                   _g17(e.trigger_residual), _g17(e.trigger_eta)])
        lines.append(",".join(vals))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def report_dict(result):
    th = result.plant.theta_true
    final = result.theta_final
    return {
        "scenario": result.scenario.name,
        "controller": result.kind,
        "backend": BACKEND,
        "t_end": result.t_end,
        "events": len(result.events),
        "switches": len(result.switch_times),
        "switch_times": result.switch_times,
        "theta_final": [float(v) for v in final],
        "theta_error": float(np.linalg.norm(final - th)),
        "theta_error_initial": float(np.linalg.norm(result.scenario.theta_hat0 - th)),
        "checks": [c.as_dict() for c in result.checks],
        "passed": all(c.passed for c in result.checks),
    }


def write_run(result, out_dir):
    """Write scenario.toml, trajectory.csv, events.csv and report.json into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scenario.toml"), "w", encoding="utf-8") as fh:
        fh.write(scn.dumps(result.scenario))
    emit_csv(result, os.path.join(out_dir, "trajectory.csv"))
    emit_events(result, os.path.join(out_dir, "events.csv"))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir
