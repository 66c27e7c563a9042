"""Extremal integration for the maximum principle: coupled state/covector
dynamics with bang feedback from switching-function signs, event-located
switches, singular-arc feedback, arc classification, pattern detection and
regime analysis.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    AmbiguousFeedback,
    BlowUp,
    ChatteringSuspected,
    NonzeroViolation,
    SingularDenominator,
    ZeroCovector,
)
from .flows import DEFAULT_ATOL, DEFAULT_BOX, DEFAULT_RTOL, ArcSchedule
from .geometry import Box, SmoothField, SystemPair, as_point, lie_bracket

__all__ = [
    "ExtremalState",
    "IntegrationOptions",
    "ExtremalRun",
    "SwitchingTraces",
    "ArcInfo",
    "ArcDecomposition",
    "PatternMatch",
    "RegimeKind",
    "RegimeReport",
    "SingularControlResult",
    "integrate_extremal",
    "switching_derivative_check",
    "normalize_initial",
    "detect_pattern",
    "singular_control",
    "classify_regime",
    "build_pattern_schedule",
    "maximality_check",
    "NEGATIVE_CYCLE",
    "POSITIVE_CYCLE",
]

# bang-control cycle observed when phi12 < 0; the mirror cycle when phi12 > 0
NEGATIVE_CYCLE = ((1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0))
POSITIVE_CYCLE = tuple(reversed(NEGATIVE_CYCLE))


def _successor_map(cycle):
    return {cycle[i]: cycle[(i + 1) % len(cycle)] for i in range(len(cycle))}


_NEG_SUCC = _successor_map(NEGATIVE_CYCLE)
_POS_SUCC = _successor_map(POSITIVE_CYCLE)


def build_pattern_schedule(phi12_sign: float, durations, first=(1.0, -1.0)) -> ArcSchedule:
    """Bang schedule following the cyclic switching order for the given
    sign of the bracket switching function."""
    succ = _NEG_SUCC if phi12_sign < 0 else _POS_SUCC
    u = (float(first[0]), float(first[1]))
    if u not in succ:
        raise ValueError(f"first control {u} is not a bang vertex")
    arcs = []
    for d in durations:
        arcs.append((u, float(d)))
        u = succ[u]
    return ArcSchedule(arcs)


@dataclass(frozen=True)
class ExtremalState:
    """Point and covector; the covector must be nonzero."""

    q: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_point(self.q))
        lam = np.asarray(self.lam, dtype=float).reshape(3)
        if not np.all(np.isfinite(lam)) or np.linalg.norm(lam) == 0.0:
            raise ValueError("covector must be finite and nonzero")
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class IntegrationOptions:
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    eps_zero: float = 1e-9
    max_switches: int = 64
    box: Box = DEFAULT_BOX
    slope_tol: float = 1e-7
    den_tol: float = 1e-9
    trace_samples: int = 1201
    start_guard: float = 1e-9


class PatternMatch(str, Enum):
    NEGATIVE = "MatchesNegativePattern"
    POSITIVE = "MatchesPositivePattern"
    SINGLE_INPUT = "SingleInputLike"
    OTHER = "Other"


class RegimeKind(str, Enum):
    SINGLE_INPUT = "SingleInputReduction"
    BOTH_VANISH = "BothVanishCase"
    PHI12_NONVANISHING = "Phi12Nonvanishing"


@dataclass(frozen=True)
class RegimeReport:
    regime: RegimeKind
    arc_bound: int
    note: str = ""


@dataclass(frozen=True)
class SwitchingTraces:
    times: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi12: np.ndarray
    zero_crossings: dict


@dataclass(frozen=True)
class ArcInfo:
    kind: str  # "bang" | "u1_singular" | "u2_singular"
    u: tuple  # bang: (u1, u2); singular: the free slot is None
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class ArcDecomposition:
    arcs: tuple

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def switching_times(self) -> np.ndarray:
        return np.array([a.t_start for a in self.arcs[1:]])

    @property
    def is_bang_bang(self) -> bool:
        return all(a.kind == "bang" for a in self.arcs)

    def control_sequence(self):
        return [a.u for a in self.arcs]

    def switch_counts(self):
        """(#sign changes of u1, #sign changes of u2) across bang arcs."""
        n1 = n2 = 0
        for a, b in zip(self.arcs, self.arcs[1:]):
            if a.kind != "bang" or b.kind != "bang":
                continue
            if a.u[0] != b.u[0]:
                n1 += 1
            if a.u[1] != b.u[1]:
                n2 += 1
        return n1, n2

    def to_json(self) -> dict:
        return {
            "arcs": [
                {
                    "kind": a.kind,
                    "u": [None if v is None else float(v) for v in a.u],
                    "t_start": a.t_start,
                    "t_end": a.t_end,
                }
                for a in self.arcs
            ],
            "switching_times": [float(t) for t in self.switching_times],
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class SingularControlResult:
    value: float
    clamped: bool
    raw: float
    denominator: float


def _phi_values(system: SystemPair, q, lam) -> np.ndarray:
    return np.array(
        [
            float(lam @ system.X1.eval(q)),
            float(lam @ system.X2.eval(q)),
            float(lam @ system.X12.eval(q)),
        ]
    )


def normalize_initial(lam0, q0, system: SystemPair) -> np.ndarray:
    """Scale the covector so max(|phi1|, |phi2|, |phi12|) = 1 at the start."""
    lam0 = np.asarray(lam0, dtype=float).reshape(3)
    q0 = as_point(q0)
    m = float(np.max(np.abs(_phi_values(system, q0, lam0))))
    if m <= 1e-14 * max(1.0, float(np.linalg.norm(lam0))):
        raise ZeroCovector("covector annihilates X1, X2 and X12 at the start point")
    return lam0 / m


def singular_control(
    state: ExtremalState,
    system: SystemPair,
    which: str,
    fixed: float,
    den_tol: float = 1e-9,
) -> SingularControlResult:
    """Feedback value keeping a switching function at zero.

    For which="u1" (phi1 held at zero, u2 = fixed in {-1, +1}) the value is
    -fixed * <lam, [X2, X12](q)> / <lam, [X1, X12](q)>; "u2" swaps the roles.
    """
    if which not in ("u1", "u2"):
        raise ValueError("which must be 'u1' or 'u2'")
    if abs(abs(fixed) - 1.0) > 1e-12:
        raise ValueError("fixed control must be +1 or -1")
    q, lam = state.q, state.lam
    num_field = system.X212 if which == "u1" else system.X112
    den_field = system.X112 if which == "u1" else system.X212
    N = float(lam @ num_field.eval(q))
    D = float(lam @ den_field.eval(q))
    if abs(D) < den_tol:
        raise SingularDenominator(
            f"denominator pairing {D:.3e} below tolerance {den_tol:g}"
        )
    raw = -float(fixed) * N / D
    clamped = abs(raw) > 1.0
    return SingularControlResult(
        value=float(np.clip(raw, -1.0, 1.0)), clamped=clamped, raw=raw, denominator=D
    )


def _bang_rhs(system: SystemPair, u):
    f = system.control_rhs(u)
    Jf = system.control_jacobian(u)

    def rhs(t, y):
        q, lam = y[:3], y[3:]
        return np.concatenate([f(q), -Jf(q).T @ lam])

    return rhs


def _singular_raw(system, q, lam, which, fixed, den_tol):
    num_field = system.X212 if which == "u1" else system.X112
    den_field = system.X112 if which == "u1" else system.X212
    N = float(lam @ num_field.eval(q))
    D = float(lam @ den_field.eval(q))
    # keep the rhs finite; the denominator event stops integration near den_tol
    Dsafe = D if abs(D) > 0.1 * den_tol else np.copysign(0.1 * den_tol, D if D != 0 else 1.0)
    return -float(fixed) * N / Dsafe, D


def _singular_rhs(system: SystemPair, which, fixed, den_tol):
    def rhs(t, y):
        q, lam = y[:3], y[3:]
        raw, _ = _singular_raw(system, q, lam, which, fixed, den_tol)
        v = float(np.clip(raw, -1.0, 1.0))
        u = (v, fixed) if which == "u1" else (fixed, v)
        f = u[0] * system.X1.eval(q) + u[1] * system.X2.eval(q)
        J = u[0] * system.X1.jacobian(q) + u[1] * system.X2.jacobian(q)
        return np.concatenate([f, -J.T @ lam])

    return rhs


def _box_event6(box: Box):
    def g(t, y):
        q = y[:3]
        return float(np.min(np.concatenate([q - box.lo, box.hi - q])))

    g.terminal = True
    g.direction = -1.0
    return g


@dataclass
class _Segment:
    t0: float
    t1: float
    sol: object
    kind: str
    u: tuple  # bang: control; singular: (which, fixed)


class ExtremalRun:
    """Dense extremal solution with traces and arc decomposition."""

    def __init__(self, system, options, T, segments, traces, arcs):
        self.system = system
        self.options = options
        self.T = T
        self._segments = segments
        self.traces = traces
        self.arcs = arcs

    def __iter__(self):
        # unpacks as (trajectory-like, traces, arcs)
        return iter((self, self.traces, self.arcs))

    def _segment_at(self, t: float) -> _Segment:
        t = float(np.clip(t, 0.0, self.T))
        for seg in self._segments:
            if t <= seg.t1 or seg is self._segments[-1]:
                return seg
        return self._segments[-1]

    def state(self, t: float) -> np.ndarray:
        seg = self._segment_at(t)
        t = float(np.clip(t, seg.t0, seg.t1))
        return np.asarray(seg.sol.sol(t))

    def q(self, t: float) -> np.ndarray:
        return self.state(t)[:3]

    def lam(self, t: float) -> np.ndarray:
        return self.state(t)[3:]

    def phi_at(self, t: float) -> np.ndarray:
        y = self.state(t)
        return _phi_values(self.system, y[:3], y[3:])

    def control(self, t: float) -> np.ndarray:
        seg = self._segment_at(t)
        if seg.kind == "bang":
            return np.asarray(seg.u, dtype=float)
        which, fixed = seg.u
        y = self.state(t)
        raw, _ = _singular_raw(self.system, y[:3], y[3:], which, fixed, self.options.den_tol)
        v = float(np.clip(raw, -1.0, 1.0))
        return np.array([v, fixed]) if which == "u1" else np.array([fixed, v])

    def hamiltonian(self, t: float) -> float:
        phi = self.phi_at(t)
        u = self.control(t)
        return float(u[0] * phi[0] + u[1] * phi[1])

    @property
    def end_state(self) -> np.ndarray:
        return self.state(self.T)

    def to_csv(self, path, n_samples: int = 1201) -> None:
        ts = np.linspace(0.0, self.T, n_samples)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "lam1", "lam2", "lam3", "u1", "u2",
                        "phi1", "phi2", "phi12"])
            for t in ts:
                y = self.state(t)
                u = self.control(t)
                phi = _phi_values(self.system, y[:3], y[3:])
                w.writerow([f"{v:.12g}" for v in (t, *y, *u, *phi)])


def _decide_bang(phi, eps_zero, slope_tol):
    """Initial feedback decision from (phi1, phi2, phi12) at the start.

    Returns ("bang", (u1, u2)) or ("u1_singular"/"u2_singular", fixed value).
    """
    p1, p2, p12 = phi
    c1, c2 = abs(p1) > eps_zero, abs(p2) > eps_zero
    if not c1 and not c2:
        raise AmbiguousFeedback(
            f"both switching functions vanish at the start: phi=({p1:.2e}, {p2:.2e})"
        )
    if c1 and c2:
        return "bang", (float(np.sign(p1)), float(np.sign(p2)))
    if not c1:
        u2 = float(np.sign(p2))
        slope = -u2 * p12
        if abs(slope) > slope_tol:
            return "bang", (float(np.sign(slope)), u2)
        return "u1_singular", u2
    u1 = float(np.sign(p1))
    slope = u1 * p12
    if abs(slope) > slope_tol:
        return "bang", (u1, float(np.sign(slope)))
    return "u2_singular", u1


def integrate_extremal(system: SystemPair, x0, T: float, options: IntegrationOptions = None):
    """Integrate the extremal system with bang feedback and event-located
    switches; returns an ExtremalRun (iterable as trajectory, traces, arcs)."""
    opts = options or IntegrationOptions()
    if isinstance(x0, ExtremalState):
        q0, lam0 = x0.q, x0.lam
    else:
        q0, lam0 = as_point(x0[0]), np.asarray(x0[1], dtype=float).reshape(3)
    if T <= 0:
        raise ValueError("horizon must be positive")
    lam_scale = max(1.0, float(np.linalg.norm(lam0)))

    y = np.concatenate([q0, lam0])
    phi0 = _phi_values(system, q0, lam0)
    kind, info = _decide_bang(phi0, opts.eps_zero, opts.slope_tol)

    t0 = 0.0
    segments: list[_Segment] = []
    crossings = {"phi1": [], "phi2": [], "phi12": []}
    n_switch = 0

    def record(seg_sol, a, b, seg_kind, seg_u):
        segments.append(_Segment(a, b, seg_sol, seg_kind, seg_u))

    while t0 < T - 1e-14:
        if np.linalg.norm(y[3:]) < 1e-30 * lam_scale:
            raise NonzeroViolation(f"covector norm underflow at t={t0:.6g}")
        if kind == "bang":
            u = info
            rhs = _bang_rhs(system, u)
            # short eventless stretch so an event that just fired cannot
            # retrigger at the restart point
            guard_end = min(t0 + opts.start_guard, T)
            if guard_end > t0:
                sol = solve_ivp(rhs, (t0, guard_end), y, method="DOP853",
                                dense_output=True, rtol=opts.rtol, atol=opts.atol)
                if not sol.success:
                    raise RuntimeError(sol.message)
                record(sol, t0, guard_end, "bang", u)
                t0, y = guard_end, sol.y[:, -1]
                if t0 >= T - 1e-14:
                    break

            X1, X2 = system.X1, system.X2

            def ev1(t, yy, X1=X1):
                return float(yy[3:] @ X1.eval(yy[:3]))

            def ev2(t, yy, X2=X2):
                return float(yy[3:] @ X2.eval(yy[:3]))

            ev1.terminal = True
            ev1.direction = -u[0]
            ev2.terminal = True
            ev2.direction = -u[1]
            events = [ev1, ev2, _box_event6(opts.box)]
            sol = solve_ivp(rhs, (t0, T), y, method="DOP853", dense_output=True,
                            rtol=opts.rtol, atol=opts.atol, events=events)
            if not sol.success:
                raise RuntimeError(sol.message)
            if sol.t_events[2].size:
                raise BlowUp(f"extremal left the working box at t={sol.t_events[2][0]:.6g}")

            hit1 = sol.t_events[0][0] if sol.t_events[0].size else np.inf
            hit2 = sol.t_events[1][0] if sol.t_events[1].size else np.inf
            t_star = min(hit1, hit2)
            if not np.isfinite(t_star):
                record(sol, t0, T, "bang", u)
                break
            if abs(hit1 - hit2) < 1e-9 and np.isfinite(hit1) and np.isfinite(hit2):
                raise AmbiguousFeedback(
                    f"simultaneous switches of both controls near t={t_star:.6g}"
                )
            record(sol, t0, t_star, "bang", u)
            y = sol.sol(t_star)
            t0 = t_star
            phi = _phi_values(system, y[:3], y[3:])
            idx = 0 if hit1 <= hit2 else 1
            slope = -u[1] * phi[2] if idx == 0 else u[0] * phi[2]
            if abs(slope) <= opts.slope_tol:
                kind = "u1_singular" if idx == 0 else "u2_singular"
                info = u[1] if idx == 0 else u[0]
                n_switch += 1
            else:
                new_ui = float(np.sign(slope))
                if new_ui != u[idx]:
                    crossings["phi1" if idx == 0 else "phi2"].append(t_star)
                    n_switch += 1
                    info = (new_ui, u[1]) if idx == 0 else (u[0], new_ui)
                # else a graze: continue with the same control
            if n_switch > opts.max_switches:
                raise ChatteringSuspected(
                    f"more than {opts.max_switches} switching events before t={t0:.6g}"
                )
        else:
            which = "u1" if kind == "u1_singular" else "u2"
            fixed = info
            rhs = _singular_rhs(system, which, fixed, opts.den_tol)
            other_field = system.X2 if which == "u1" else system.X1
            den_field = system.X112 if which == "u1" else system.X212

            def ev_other(t, yy, F=other_field):
                return float(yy[3:] @ F.eval(yy[:3]))

            def ev_den(t, yy, F=den_field):
                return abs(float(yy[3:] @ F.eval(yy[:3]))) - opts.den_tol

            def ev_sat(t, yy):
                raw, _ = _singular_raw(system, yy[:3], yy[3:], which, fixed, opts.den_tol)
                return 1.0 - abs(raw)

            for e in (ev_other, ev_den, ev_sat):
                e.terminal = True
                e.direction = 0.0 if e is ev_other else -1.0
            guard_end = min(t0 + opts.start_guard, T)
            sol = solve_ivp(rhs, (t0, guard_end), y, method="DOP853",
                            dense_output=True, rtol=opts.rtol, atol=opts.atol)
            if not sol.success:
                raise RuntimeError(sol.message)
            record(sol, t0, guard_end, kind, (which, fixed))
            t0, y = guard_end, sol.y[:, -1]
            if t0 >= T - 1e-14:
                break
            events = [ev_other, ev_den, ev_sat, _box_event6(opts.box)]
            sol = solve_ivp(rhs, (t0, T), y, method="DOP853", dense_output=True,
                            rtol=opts.rtol, atol=opts.atol, events=events)
            if not sol.success:
                raise RuntimeError(sol.message)
            if sol.t_events[3].size:
                raise BlowUp(f"extremal left the working box at t={sol.t_events[3][0]:.6g}")
            if sol.t_events[1].size:
                raise SingularDenominator(
                    f"singular denominator fell below tolerance at t={sol.t_events[1][0]:.6g}"
                )
            if sol.t_events[0].size:
                raise AmbiguousFeedback(
                    "the complementary switching function vanished on a singular arc "
                    f"at t={sol.t_events[0][0]:.6g}"
                )
            if sol.t_events[2].size:
                t_star = sol.t_events[2][0]
                record(sol, t0, t_star, kind, (which, fixed))
                y = sol.sol(t_star)
                t0 = t_star
                raw, _ = _singular_raw(system, y[:3], y[3:], which, fixed, opts.den_tol)
                ui = float(np.sign(raw))
                phi = _phi_values(system, y[:3], y[3:])
                if which == "u1":
                    kind, info = "bang", (ui, fixed)
                else:
                    kind, info = "bang", (fixed, ui)
                n_switch += 1
                if n_switch > opts.max_switches:
                    raise ChatteringSuspected(
                        f"more than {opts.max_switches} switching events before t={t0:.6g}"
                    )
            else:
                record(sol, t0, T, kind, (which, fixed))
                break

    run = ExtremalRun(system, opts, T, segments, None, None)
    traces = _build_traces(run, crossings)
    arcs = _build_arcs(segments)
    run.traces = traces
    run.arcs = arcs
    return run


def _build_arcs(segments) -> ArcDecomposition:
    merged = []
    for seg in segments:
        if merged:
            last = merged[-1]
            same = last.kind == seg.kind and (
                (seg.kind == "bang" and tuple(last.u) == tuple(seg.u))
                or (seg.kind != "bang" and last.u == seg.u)
            )
            if same:
                merged[-1] = _Segment(last.t0, seg.t1, None, last.kind, last.u)
                continue
        merged.append(_Segment(seg.t0, seg.t1, None, seg.kind, seg.u))
    arcs = []
    for seg in merged:
        if seg.kind == "bang":
            u = (float(seg.u[0]), float(seg.u[1]))
        elif seg.kind == "u1_singular":
            u = (None, float(seg.u[1]))
        else:
            u = (float(seg.u[1]), None)
        arcs.append(ArcInfo(seg.kind, u, float(seg.t0), float(seg.t1)))
    return ArcDecomposition(tuple(arcs))


def _build_traces(run: ExtremalRun, crossings) -> SwitchingTraces:
    ts = np.linspace(0.0, run.T, run.options.trace_samples)
    phis = np.array([run.phi_at(t) for t in ts])
    out = {k: sorted(float(t) for t in v) for k, v in crossings.items()}
    # phi12 has no events; refine its sign changes on the dense solution
    p12 = phis[:, 2]
    for i in range(len(ts) - 1):
        a, b = p12[i], p12[i + 1]
        if a == 0.0:
            out["phi12"].append(float(ts[i]))
        elif a * b < 0.0:
            root = brentq(lambda t: float(run.phi_at(t)[2]), ts[i], ts[i + 1],
                          xtol=1e-12)
            out["phi12"].append(float(root))
    out["phi12"] = sorted(out["phi12"])
    return SwitchingTraces(
        times=ts, phi1=phis[:, 0], phi2=phis[:, 1], phi12=phis[:, 2], zero_crossings=out
    )


def switching_derivative_check(run: ExtremalRun, Y: SmoothField, n_samples: int = 200,
                               fd_step: float = 1e-6) -> float:
    """Max residual of d/dt <lam, Y(q)> = <lam, [X(u), Y](q)> along the run,
    with the time derivative taken by central differences away from switches."""
    boundaries = [seg.t0 for seg in run._segments] + [run.T]
    resid = 0.0
    ts = np.linspace(0.0, run.T, n_samples)
    bracket_cache = {}
    for t in ts:
        if t - 2 * fd_step < 0 or t + 2 * fd_step > run.T:
            continue
        if any(abs(t - b) < 10 * fd_step for b in boundaries):
            continue
        ym = run.state(t - fd_step)
        yp = run.state(t + fd_step)
        dpair = (yp[3:] @ Y.eval(yp[:3]) - ym[3:] @ Y.eval(ym[:3])) / (2 * fd_step)
        u = run.control(t)
        key = (round(float(u[0]), 12), round(float(u[1]), 12))
        if key not in bracket_cache:
            bracket_cache[key] = lie_bracket(run.system.control_field(u), Y)
        y0 = run.state(t)
        pair = float(y0[3:] @ bracket_cache[key].eval(y0[:3]))
        resid = max(resid, abs(float(dpair) - pair))
    return resid


def maximality_check(run: ExtremalRun, n_samples: int = 200) -> float:
    """Max over sampled times of max_v H(lam, v) - H(lam, u(t)) over the four
    bang vertices; nonpositive up to tolerance for a valid extremal."""
    worst = -np.inf
    for t in np.linspace(0.0, run.T, n_samples):
        phi = run.phi_at(t)
        best = abs(phi[0]) + abs(phi[1])
        worst = max(worst, best - run.hamiltonian(t))
    return float(worst)


def detect_pattern(arcs) -> PatternMatch:
    """Classify a bang-bang control sequence against the two cyclic orders."""
    if isinstance(arcs, ArcDecomposition):
        if not arcs.is_bang_bang:
            raise ValueError("pattern detection needs a bang-bang decomposition")
        seq = [tuple(a.u) for a in arcs.arcs]
    else:
        seq = [tuple(float(v) for v in u) for u in arcs]
    if len(seq) <= 1:
        return PatternMatch.SINGLE_INPUT
    u1_switch = u2_switch = False
    for a, b in zip(seq, seq[1:]):
        d1, d2 = a[0] != b[0], a[1] != b[1]
        if d1 and d2:
            return PatternMatch.OTHER
        if not d1 and not d2:
            return PatternMatch.OTHER
        u1_switch |= d1
        u2_switch |= d2
    if not (u1_switch and u2_switch):
        return PatternMatch.SINGLE_INPUT
    if all(_NEG_SUCC.get(a) == b for a, b in zip(seq, seq[1:])):
        return PatternMatch.NEGATIVE
    if all(_POS_SUCC.get(a) == b for a, b in zip(seq, seq[1:])):
        return PatternMatch.POSITIVE
    return PatternMatch.OTHER


def _has_zero(values: np.ndarray, crossing_list, band: float = 1e-8) -> bool:
    return bool(len(crossing_list) > 0 or np.min(np.abs(values)) <= band)


def classify_regime(traces: SwitchingTraces) -> RegimeReport:
    """Regime trichotomy from the zero sets of the switching functions."""
    z1 = _has_zero(traces.phi1, traces.zero_crossings.get("phi1", ()))
    z2 = _has_zero(traces.phi2, traces.zero_crossings.get("phi2", ()))
    z12 = _has_zero(traces.phi12, traces.zero_crossings.get("phi12", ()))
    if z12 and (z1 or z2):
        if z1 and z2:
            note = "all three switching functions vanish; outside the analyzed cases"
        else:
            other = "phi2" if z1 else "phi1"
            note = f"{other} is zero-free, as the case analysis asserts"
        return RegimeReport(RegimeKind.BOTH_VANISH, 3, note)
    if not z1 or not z2:
        free = "phi1" if not z1 else "phi2"
        return RegimeReport(
            RegimeKind.SINGLE_INPUT, 3,
            f"{free} is zero-free; at most 3 bang arcs or bang-singular-bang",
        )
    return RegimeReport(
        RegimeKind.PHI12_NONVANISHING, 5,
        "bang-bang with cyclic switching order; 6-arc windows are rejected "
        "by the second-order test",
    )
