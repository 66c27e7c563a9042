"""Trajectories under piecewise-constant controls, flow maps between times,
and variational transport of field values and fields along a schedule.

Transport convention: the transported vector w at the reference time satisfies
<lambda(ref), w> = <lambda(t), Y(q(t))> for every adjoint solution, realized by
integrating the linearized equation v' = J_{X(u)}(q) v from t to the reference
time (in either direction).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUp, StepTooSmall
from .geometry import (
    Box,
    NumericField,
    PolyField,
    SmoothField,
    SystemPair,
    TangentVector,
    as_point,
    lie_bracket,
)

__all__ = [
    "ArcSchedule",
    "Trajectory",
    "integrate_flow",
    "flow_map",
    "transport_field_vector",
    "transported_field",
    "as_control",
    "is_bang",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
    "DEFAULT_BOX",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10
DEFAULT_BOX = Box.cube(50.0)


def as_control(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(2)
    if np.any(np.abs(u) > 1.0 + 1e-12):
        raise ValueError(f"control {u.tolist()} outside the unit box")
    return np.clip(u, -1.0, 1.0)


def is_bang(u) -> bool:
    u = np.asarray(u, dtype=float)
    return bool(np.all(np.abs(np.abs(u) - 1.0) <= 1e-12))


class ArcSchedule:
    """Ordered (control value, duration) arcs with positive durations and
    non-removable control discontinuities."""

    def __init__(self, arcs):
        parsed = []
        for u, d in arcs:
            d = float(d)
            if not d > 0.0:
                raise ValueError(f"arc duration must be positive, got {d}")
            parsed.append((as_control(u), d))
        if not parsed:
            raise ValueError("schedule needs at least one arc")
        for (ua, _), (ub, _) in zip(parsed, parsed[1:]):
            if np.allclose(ua, ub, atol=1e-12):
                raise ValueError(f"consecutive arcs share the control {ua.tolist()}")
        self.arcs = tuple(parsed)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def durations(self) -> np.ndarray:
        return np.array([d for _, d in self.arcs])

    @property
    def controls(self) -> np.ndarray:
        return np.array([u for u, _ in self.arcs])

    @property
    def arc_starts(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.durations)[:-1]])

    @property
    def switching_times(self) -> np.ndarray:
        return np.cumsum(self.durations)[:-1]

    @property
    def total_duration(self) -> float:
        return float(np.sum(self.durations))

    def arc_index(self, t: float) -> int:
        edges = np.cumsum(self.durations)
        i = int(np.searchsorted(edges, t, side="right"))
        return min(i, self.n_arcs - 1)

    def control_at(self, t: float) -> np.ndarray:
        return self.arcs[self.arc_index(t)][0]

    def to_json(self) -> dict:
        return {
            "arcs": [
                {"u": [float(u[0]), float(u[1])], "duration": float(d)} for u, d in self.arcs
            ]
        }

    @classmethod
    def from_json(cls, obj) -> "ArcSchedule":
        return cls([(a["u"], a["duration"]) for a in obj["arcs"]])

    def __repr__(self):
        parts = ", ".join(f"({u[0]:+.0f},{u[1]:+.0f})x{d:.4g}" for u, d in self.arcs)
        return f"ArcSchedule[{parts}]"


def _box_event(box: Box):
    def g(t, y):
        q = y[:3]
        return float(np.min(np.concatenate([q - box.lo, box.hi - q])))

    g.terminal = True
    g.direction = -1.0
    return g


def _solve_segment(rhs, t0, t1, y0, rtol, atol, events=None):
    sol = solve_ivp(
        rhs, (t0, t1), y0, method="DOP853", dense_output=True,
        rtol=rtol, atol=atol, events=events,
    )
    if not sol.success:
        raise RuntimeError(f"integrator failed on [{t0}, {t1}]: {sol.message}")
    return sol


class Trajectory:
    """Dense solution of the controlled flow over a full schedule."""

    def __init__(self, schedule: ArcSchedule, q0, segments, boundaries):
        self.schedule = schedule
        self.q0 = as_point(q0)
        self._segments = segments
        self._boundaries = np.asarray(boundaries)

    @property
    def start_time(self) -> float:
        return float(self._boundaries[0])

    @property
    def end_time(self) -> float:
        return float(self._boundaries[-1])

    def state(self, t: float) -> np.ndarray:
        t = float(np.clip(t, self._boundaries[0], self._boundaries[-1]))
        i = int(np.searchsorted(self._boundaries[1:-1], t, side="right"))
        return np.asarray(self._segments[i].sol(t))

    def states(self, ts) -> np.ndarray:
        return np.array([self.state(t) for t in np.asarray(ts, dtype=float)])

    @property
    def end_point(self) -> np.ndarray:
        return self.state(self.end_time)

    def sample_times(self, per_arc: int = 50) -> np.ndarray:
        ts = [np.linspace(a, b, per_arc, endpoint=False)
              for a, b in zip(self._boundaries[:-1], self._boundaries[1:])]
        return np.concatenate(ts + [[self._boundaries[-1]]])

    def to_csv(self, path, per_arc: int = 50) -> None:
        ts = self.sample_times(per_arc)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "u1", "u2"])
            for t in ts:
                q = self.state(t)
                u = self.schedule.control_at(t)
                w.writerow([f"{v:.12g}" for v in (t, q[0], q[1], q[2], u[0], u[1])])


def integrate_flow(
    system: SystemPair,
    schedule: ArcSchedule,
    q0,
    box: Box = DEFAULT_BOX,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Integrate q' = u1 X1(q) + u2 X2(q) arc by arc with exact restarts."""
    q = as_point(q0)
    if box is not None and not box.contains(q):
        raise BlowUp(f"initial point {q.tolist()} outside the working box")
    segments = []
    boundaries = [0.0]
    t0 = 0.0
    events = [_box_event(box)] if box is not None else None
    for u, d in schedule.arcs:
        f = system.control_rhs(u)
        sol = _solve_segment(lambda t, y: f(y), t0, t0 + d, q, rtol, atol, events)
        if sol.status == 1:
            raise BlowUp(
                f"trajectory left the working box at t={sol.t_events[0][0]:.6g}"
            )
        segments.append(sol)
        t0 += d
        boundaries.append(t0)
        q = sol.y[:, -1]
    return Trajectory(schedule, q0, segments, boundaries)


def _crossed_boundaries(schedule: ArcSchedule, t_from: float, t_to: float):
    """Subintervals of [t_from -> t_to] split at interior switching times."""
    if t_from == t_to:
        return []
    switches = schedule.switching_times
    lo, hi = min(t_from, t_to), max(t_from, t_to)
    inner = [s for s in switches if lo < s < hi]
    pts = [t_from] + (inner if t_to > t_from else inner[::-1]) + [t_to]
    return list(zip(pts[:-1], pts[1:]))


def flow_map(
    system: SystemPair,
    schedule: ArcSchedule,
    s: float,
    t: float,
    q,
    box: Box = DEFAULT_BOX,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Value at time s of the schedule's flow through the point q at time t;
    s < t integrates the reversed dynamics."""
    y = as_point(q)
    events = [_box_event(box)] if box is not None else None
    for a, b in _crossed_boundaries(schedule, t, s):
        u = schedule.control_at(min(a, b) + 0.5 * abs(b - a))
        f = system.control_rhs(u)
        sol = _solve_segment(lambda tt, yy: f(yy), a, b, y, rtol, atol, events)
        if sol.status == 1:
            raise BlowUp(f"flow map left the working box near t={sol.t_events[0][0]:.6g}")
        y = sol.y[:, -1]
    return y


def _transport_rhs(system: SystemPair, u):
    f = system.control_rhs(u)
    Jf = system.control_jacobian(u)

    def rhs(t, y):
        q, v = y[:3], y[3:]
        return np.concatenate([f(q), Jf(q) @ v])

    return rhs


def transport_field_vector(
    system: SystemPair,
    schedule: ArcSchedule,
    q0,
    tau_bar: float,
    t: float,
    Y: SmoothField,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> TangentVector:
    """Transport the value Y(q(t)) along the schedule's trajectory from q0 to
    the reference time tau_bar, preserving adjoint pairings."""
    traj = integrate_flow(system, schedule, q0, box=None, rtol=rtol, atol=atol)
    qt = traj.state(t)
    y = np.concatenate([qt, Y.eval(qt)])
    for a, b in _crossed_boundaries(schedule, t, tau_bar):
        u = schedule.control_at(min(a, b) + 0.5 * abs(b - a))
        sol = _solve_segment(_transport_rhs(system, u), a, b, y, rtol, atol)
        y = sol.y[:, -1]
    return TangentVector(y[3:], y[:3])


def _variational_rhs(system: SystemPair, u):
    f = system.control_rhs(u)
    Jf = system.control_jacobian(u)

    def rhs(t, y):
        q, V = y[:3], y[3:].reshape(3, 3)
        return np.concatenate([f(q), (Jf(q) @ V).ravel()])

    return rhs


def transported_field(
    system: SystemPair,
    schedule: ArcSchedule,
    tau_bar: float,
    t: float,
    Y: SmoothField,
    jac_step: float = 1e-4,
    mode: str = "exact",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> SmoothField:
    """Push-forward of Y from time t to time tau_bar as a field near the
    reference point.

    mode="exact": each query point p is flowed from tau_bar back to t and the
    value of Y there is transported forward again; jacobians come from central
    differences with Richardson extrapolation at step jac_step.
    mode="leading": per-arc first-order expansion Y + dt*[X(u), Y], composed
    across the crossed arcs (polynomial systems only; cross-check path).
    """
    if mode == "leading":
        if not (isinstance(Y, PolyField) and system.is_polynomial):
            raise TypeError("leading-order mode needs polynomial fields")
        field = Y
        for a, b in _crossed_boundaries(schedule, t, tau_bar):
            u = schedule.control_at(min(a, b) + 0.5 * abs(b - a))
            gen = system.control_field(u)
            # transporting from a to b contributes (a - b) * [X(u), .] at
            # leading order: pull-backs (a > b) gain the bracket, pushes lose it
            field = field + lie_bracket(gen, field).scale(a - b)
        return field
    if mode != "exact":
        raise ValueError(f"unknown transport mode {mode!r}")
    if jac_step < 100.0 * atol:
        raise StepTooSmall(
            f"jacobian step {jac_step:g} is below the integrator noise floor"
        )

    segments = _crossed_boundaries(schedule, tau_bar, t)
    cache: dict = {}

    def ev(p):
        p = np.asarray(p, dtype=float).reshape(3)
        key = p.tobytes()
        hit = cache.get(key)
        if hit is not None:
            return hit.copy()
        y = np.concatenate([p, np.eye(3).ravel()])
        for a, b in segments:
            u = schedule.control_at(min(a, b) + 0.5 * abs(b - a))
            sol = _solve_segment(_variational_rhs(system, u), a, b, y, rtol, atol)
            y = sol.y[:, -1]
        qt, M = y[:3], y[3:].reshape(3, 3)
        # M = Phi(t, tau_bar), so the forward transport is its inverse
        w = np.linalg.solve(M, Y.eval(qt))
        cache[key] = w
        return w.copy()

    def jac(p):
        p = np.asarray(p, dtype=float).reshape(3)

        def central(h):
            J = np.empty((3, 3))
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                J[:, k] = (ev(p + e) - ev(p - e)) / (2.0 * h)
            return J

        Jh = central(jac_step)
        Jh2 = central(0.5 * jac_step)
        return (4.0 * Jh2 - Jh) / 3.0

    yn = getattr(Y, "name", None) or "Y"
    return NumericField(ev, jac=jac, name=f"push[{t:.4g}->{tau_bar:.4g}]({yn})")
