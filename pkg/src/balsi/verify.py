"""Post-hoc checks of the closed-loop guarantees on a completed run.

Every check is evaluated from the dense record and the ground-truth parameter;
failures are reported, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scenario as scn
from .hybrid import HORIZON, integrate_segment

DECAY_TOL = 1e-6
SETTLED_TOL = 1e-6
# c(t) stays bounded but oscillates when V decays at exactly 2 sigma
ENVELOPE_SLACK = 0.1


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "threshold": float(self.threshold), "detail": self.detail}

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: value={self.value:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


def segment_times(seg, per_step=3):
    """Solver nodes of a segment plus ``per_step`` interior points per step."""
    nodes = np.asarray(seg.sol.ts, dtype=float)
    nodes = nodes[(nodes >= seg.t0) & (nodes <= seg.t1)]
    if nodes.size < 2:
        return np.array([seg.t0, seg.t1])
    frac = np.arange(1, per_step + 1) / (per_step + 1)
    inner = (nodes[:-1, None] + np.diff(nodes)[:, None] * frac[None, :]).ravel()
    return np.unique(np.concatenate([nodes, inner, [seg.t0, seg.t1]]))


def _times_after(result, tau):
    ts = [segment_times(s) for s in result.traj.segments if s.t1 >= tau]
    ts = np.unique(np.concatenate(ts)) if ts else np.array([tau])
    return ts[ts >= tau]


def _identified(result):
    return [e for e in result.events if e.Q is not None]


def check_switch_count(result):
    count = len(result.switch_times)
    l = result.plant.l
    return CheckResult("switch_count", count <= l, count, l, f"events={len(result.events)}")


def check_event_timing(result):
    T = result.scenario.trigger.T
    tol = result.scenario.integrator.event_tol
    taus = np.concatenate([[0.0], [e.tau for e in result.events]])
    gaps = np.diff(taus)
    max_gap = float(gaps.max()) if gaps.size else 0.0
    l = result.plant.l
    margins = [taus[i] - (i - l) * T + i * tol for i in range(l, taus.size)]
    zeno = float(min(margins)) if margins else float("inf")
    ok = max_gap <= T + tol and zeno >= 0.0
    return CheckResult("event_timing", ok, max_gap, T + tol, f"zeno_margin={zeno:.6g}")


def check_segment_decay(result):
    law = result.law
    sigma = law.sigma
    worst, count = 0.0, 0
    switched_at = {e.tau: e.switched for e in result.events}
    for seg in result.traj.segments:
        if seg.kind == HORIZON or switched_at.get(seg.t1, True):
            continue
        v0 = law.V(seg.theta, seg.y0[: seg.n])
        if v0 <= 0.0:
            continue
        ts = segment_times(seg)
        X = seg.sol(ts)[: seg.n]
        ratio = max(law.V(seg.theta, X[:, k]) * np.exp(2 * sigma * (t - seg.t0)) / v0
                    for k, t in enumerate(ts))
        worst = max(worst, ratio)
        count += 1
    return CheckResult("segment_decay", worst <= 1.0 + DECAY_TOL, worst, 1.0 + DECAY_TOL,
                       f"segments={count}")


def check_settled_residual(result):
    if result.kind == "open_loop":
        return CheckResult("settled_residual", True, float("nan"), SETTLED_TOL,
                           "not applicable without an estimate in the loop")
    switches = result.switch_times
    tau = switches[-1] if switches else 0.0
    theta_s = result.theta_final
    dtheta = result.plant.theta_true - theta_s
    ts = _times_after(result, tau)
    X, U, _, _ = result.sample(ts)
    g = result.plant.g
    worst = max(float(np.linalg.norm(g(X[k], U[k]) @ dtheta)) for k in range(ts.size))
    return CheckResult("settled_residual", worst <= SETTLED_TOL, worst, SETTLED_TOL,
                       f"settling_time={tau:.6g}")


def envelope_ratio(result):
    """c(t) = |x(t)| exp(sigma (t - tau)) / |x(tau)| after the last switch.

    Returns (max over the second half / max over the first half, max c).
    """
    switches = result.switch_times
    tau = switches[-1] if switches else 0.0
    ts = _times_after(result, tau)
    X, _, _, _ = result.sample(ts)
    norms = np.linalg.norm(X, axis=1)
    x_tau = np.linalg.norm(result.traj.x(tau)) if hasattr(result.traj, "x") else norms[0]
    if x_tau == 0.0:
        return 0.0, 0.0
    c = norms * np.exp(result.law.sigma * (ts - tau)) / x_tau
    mid = 0.5 * (tau + ts[-1])
    first, second = c[ts <= mid], c[ts > mid]
    if second.size == 0:
        return 0.0, float(c.max())
    return float(second.max() / first.max()), float(c.max())


def check_envelope(result):
    ratio, cmax = envelope_ratio(result)
    ok = np.isfinite(cmax) and ratio <= 1.0 + ENVELOPE_SLACK
    return CheckResult("envelope", bool(ok), ratio, 1.0 + ENVELOPE_SLACK, f"c={cmax:.6g}")


def check_nullspace(result):
    events = _identified(result)
    exact = result.kind == "balsi_exact"
    l = result.plant.l
    prev = l
    origins = set(result.reinit_times[1:])
    ok = True
    detail = []
    for e in events:
        d = e.nullspace_dim
        if d > prev or (exact and e.switched and not d < prev):
            ok = False
            detail.append(f"t={e.tau:.6g}: {prev}->{d}")
        prev = l if e.tau in origins else d
    seq = [l] + [e.nullspace_dim for e in events]
    note = "strict on switches" if exact else "monotone only"
    return CheckResult("nullspace_monotone", ok, float(seq[-1]), float(l),
                       f"{note}; sequence={seq}" + ("; " + ", ".join(detail) if detail else ""))


def _data_slack(result, e):
    """|Q^+ (Y - Q theta)|: how far integration error in (Y, Q) can move the solution."""
    lam = np.linalg.eigvalsh(e.Q)
    keep = lam[lam > result.scenario.controller.rank_tol * max(1.0, lam[-1])]
    if keep.size == 0:
        return 0.0
    return float(np.linalg.norm(e.Y - e.Q @ result.plant.theta_true) / keep[0])


def check_contraction(result):
    theta = result.plant.theta_true
    tol = result.scenario.controller.qp_tol
    worst = -np.inf
    for e in _identified(result):
        step = np.linalg.norm(e.theta_after - e.theta_before)
        excess = step - np.linalg.norm(theta - e.theta_before) - _data_slack(result, e)
        worst = max(worst, excess)
    worst = 0.0 if worst == -np.inf else float(worst)
    return CheckResult("contraction", worst <= tol, worst, tol,
                       "max of |step| - |theta - theta_before| - |Q^+ (Y - Q theta)|")


def check_estimate_bound(result):
    theta = result.plant.theta_true
    l = result.plant.l
    e0 = np.linalg.norm(result.scenario.theta_hat0 - theta)
    errs = [np.linalg.norm(e.theta_after - theta) for e in result.events] + [e0]
    bound = 2.0 ** l * e0 + result.scenario.controller.qp_tol
    worst = float(max(errs))
    return CheckResult("estimate_bound", worst <= bound, worst, bound)


CHECKS = (check_switch_count, check_event_timing, check_segment_decay, check_settled_residual,
          check_envelope, check_nullspace, check_contraction, check_estimate_bound)


def verify_guarantees(result):
    """Evaluate every guarantee check on a hybrid run; one CheckResult each."""
    return [check(result) for check in CHECKS]


def replay_settled(result):
    """Re-run the nominal loop with the settled estimate from the last switch.

    Returns (times, max-norm deviation from the adaptive trajectory).
    """
    sc = result.scenario
    switches = result.switch_times
    tau = switches[-1] if switches else 0.0
    theta_s = result.theta_final
    plant, law = result.plant, result.law
    icfg, trig, noise = scn.build_integrator(sc), scn.build_trigger(sc), scn.build_noise(sc)
    t, x = tau, result.traj.x(tau) if tau > 0 else np.array(sc.plant.x0, float)
    t_final = result.t_end
    segs = []
    while t_final - t > icfg.event_tol:
        seg = integrate_segment(plant, law, theta_s, x, t, trig, icfg, noise=noise,
                                t_stop=t_final)
        segs.append(seg)
        t, x = seg.t1, seg.y1[: plant.n]
    ts = _times_after(result, tau)
    worst = 0.0
    for seg in segs:
        sel = ts[(ts >= seg.t0) & (ts <= seg.t1)]
        if sel.size == 0:
            continue
        ref = seg.sol(sel)[: plant.n]
        adapt = np.array([result.traj.x(t) for t in sel]).T
        worst = max(worst, float(np.max(np.abs(ref - adapt))))
    return ts, worst
