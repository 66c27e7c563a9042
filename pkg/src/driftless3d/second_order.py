"""Second-order rejection test for bang-bang candidates: transported h-fields,
the quadratic form on the constraint space, the small-duration limit matrix of
the 6-arc cyclic candidate, and the end-to-end rejection pipeline.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import LiftConstructionFailed, RankDeficient
from .extremal import build_pattern_schedule
from .flows import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    ArcSchedule,
    integrate_flow,
    transport_field_vector,
    transported_field,
)
from .geometry import SmoothField, SystemPair, as_point

__all__ = [
    "HFieldSet",
    "SecondOrderReport",
    "Verdict",
    "LiftUniqueness",
    "LIMIT_MATRIX",
    "build_h_fields",
    "check_lift_uniqueness",
    "assemble_Q",
    "limit_matrix_comparison",
    "LimitMatrixReport",
    "six_arc_rejection",
    "shoot_lift",
]

# small-duration limit of the reduced quadratic form of the rejected 6-arc
# candidate, in the coordinates that solve the constraints for the last three
# multipliers; determinant 16, one positive and two negative eigenvalues
LIMIT_MATRIX = np.array([[-4.0, 0.0, 2.0], [0.0, 0.0, 2.0], [2.0, 2.0, 0.0]])


class Verdict(str, Enum):
    REJECTED = "RejectedNotOptimal"
    INCONCLUSIVE = "Inconclusive"


class LiftUniqueness(str, Enum):
    UNIQUE = "Unique"
    NON_UNIQUE = "NonUnique"


@dataclass(frozen=True)
class HFieldSet:
    """Transported generator fields of every arc, anchored at one reference
    time on the candidate trajectory."""

    tau_bar: float
    q_bar: np.ndarray
    lam_bar: np.ndarray
    fields: tuple
    values: np.ndarray  # (n_arcs, 3) values at q_bar
    schedule: ArcSchedule
    system: SystemPair

    @property
    def n_arcs(self) -> int:
        return len(self.fields)


@dataclass(frozen=True)
class SecondOrderReport:
    sigma: np.ndarray
    H_basis: np.ndarray  # columns form an orthonormal basis of the constraint space
    dimH: int
    Q_restricted: np.ndarray
    eigenvalues: np.ndarray
    verdict: Verdict
    lift_uniqueness: LiftUniqueness
    lift_singular_values: np.ndarray
    constraint_singular_values: np.ndarray
    eps_eig: float

    @property
    def signature(self):
        """(#positive, #negative) eigenvalues outside the tolerance band."""
        n_pos = int(np.sum(self.eigenvalues > self.eps_eig))
        n_neg = int(np.sum(self.eigenvalues < -self.eps_eig))
        return n_pos, n_neg

    @property
    def max_eigenvalue(self) -> float:
        return float(np.max(self.eigenvalues)) if self.eigenvalues.size else 0.0

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "H_basis": self.H_basis.tolist(),
            "dimH": self.dimH,
            "Q_restricted": self.Q_restricted.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "verdict": self.verdict.value,
            "lift_uniqueness": self.lift_uniqueness.value,
            "lift_singular_values": self.lift_singular_values.tolist(),
            "constraint_singular_values": self.constraint_singular_values.tolist(),
            "eps_eig": self.eps_eig,
            "signature": list(self.signature),
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def default_reference_time(schedule: ArcSchedule) -> float:
    """Middle switching time of the candidate."""
    switches = schedule.switching_times
    if switches.size == 0:
        raise ValueError("schedule has no switching times")
    return float(switches[len(switches) // 2])


def build_h_fields(
    system: SystemPair,
    schedule: ArcSchedule,
    q0,
    lam_bar,
    tau_bar: float | None = None,
    jac_step: float = 1e-4,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> HFieldSet:
    """Transported generator field of each arc, from the arc's start time to
    the reference time.

    A field is invariant under its own flow, so for arcs starting before the
    reference time the transport start is advanced across the arc itself;
    the arc starting exactly at the reference time contributes its generator
    unchanged. This keeps those fields exact.
    """
    q0 = as_point(q0)
    if tau_bar is None:
        tau_bar = default_reference_time(schedule)
    tau_bar = float(tau_bar)
    if not 0.0 <= tau_bar <= schedule.total_duration:
        raise ValueError("reference time outside the schedule span")
    traj = integrate_flow(system, schedule, q0, box=None, rtol=rtol, atol=atol)
    q_bar = traj.state(tau_bar)
    starts = schedule.arc_starts
    ends = np.cumsum(schedule.durations)
    fields = []
    for i, (u, _) in enumerate(schedule.arcs):
        gen = system.control_field(u)
        if starts[i] < tau_bar:
            eff = float(min(ends[i], tau_bar))
        else:
            eff = float(starts[i])
        if eff == tau_bar:
            h: SmoothField = gen
        else:
            h = transported_field(
                system, schedule, tau_bar, eff, gen,
                jac_step=jac_step, rtol=rtol, atol=atol,
            )
        fields.append(h)
    values = np.array([h.eval(q_bar) for h in fields])
    return HFieldSet(
        tau_bar=tau_bar,
        q_bar=q_bar,
        lam_bar=np.asarray(lam_bar, dtype=float).reshape(3),
        fields=tuple(fields),
        values=values,
        schedule=schedule,
        system=system,
    )


def check_lift_uniqueness(hset: HFieldSet, rank_tol: float = 1e-7):
    """Numerical rank of the span of consecutive h-value differences; the lift
    is unique iff that rank is 2 (one-dimensional annihilator)."""
    diffs = hset.values[1:] - hset.values[:-1]
    if diffs.shape[0] == 0:
        return LiftUniqueness.NON_UNIQUE, np.zeros(0)
    sv = np.linalg.svd(diffs, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    verdict = LiftUniqueness.UNIQUE if rank == 2 else LiftUniqueness.NON_UNIQUE
    return verdict, sv


def _sigma_table(hset: HFieldSet) -> np.ndarray:
    n = hset.n_arcs
    q_bar = hset.q_bar
    vals = hset.values
    jacs = [h.jacobian(q_bar) for h in hset.fields]
    sigma = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            bracket = jacs[j] @ vals[i] - jacs[i] @ vals[j]
            sigma[i, j] = float(hset.lam_bar @ bracket)
            sigma[j, i] = -sigma[i, j]
    return sigma


def assemble_Q(
    hset: HFieldSet,
    rank_tol: float = 1e-7,
    eps_eig_rel: float = 1e-6,
) -> SecondOrderReport:
    """Quadratic form of the candidate on the constraint space.

    The constraint space is the kernel of alpha -> (sum alpha_i,
    sum alpha_i h_i(q_bar)); the form is restricted to an orthonormal kernel
    basis and the verdict is RejectedNotOptimal iff an eigenvalue exceeds the
    relative tolerance band.
    """
    n = hset.n_arcs
    sigma = _sigma_table(hset)
    S = np.triu(sigma, 1) / 2.0
    S = S + S.T

    A = np.vstack([np.ones((1, n)), hset.values.T])
    _, s_vals, Vt = np.linalg.svd(A)
    rank_A = int(np.sum(s_vals > rank_tol * s_vals[0])) if s_vals[0] > 0 else 0
    B = Vt[rank_A:].T
    dimH = B.shape[1]

    lift_verdict, lift_sv = check_lift_uniqueness(hset, rank_tol)
    rank_W = int(np.sum(lift_sv > rank_tol * lift_sv[0])) if lift_sv.size and lift_sv[0] > 0 else 0
    expected = n - 1 - rank_W
    if dimH != expected:
        raise RankDeficient(
            f"constraint space has dimension {dimH}, expected {expected} "
            f"(= {n} arcs - 1 - rank {rank_W})"
        )

    Qr = B.T @ S @ B
    Qr = (Qr + Qr.T) / 2.0
    if dimH > 0:
        eigenvalues = np.linalg.eigvalsh(Qr)
        scale = float(np.max(np.abs(eigenvalues)))
    else:
        eigenvalues = np.zeros(0)
        scale = 0.0
    eps_eig = eps_eig_rel * scale
    if scale > 0 and float(np.max(eigenvalues)) > eps_eig:
        verdict = Verdict.REJECTED
    else:
        verdict = Verdict.INCONCLUSIVE
    return SecondOrderReport(
        sigma=sigma,
        H_basis=B,
        dimH=dimH,
        Q_restricted=Qr,
        eigenvalues=eigenvalues,
        verdict=verdict,
        lift_uniqueness=lift_verdict,
        lift_singular_values=lift_sv,
        constraint_singular_values=s_vals,
        eps_eig=float(eps_eig),
    )


def shoot_lift(
    system: SystemPair,
    schedule: ArcSchedule,
    q0,
    tau_bar: float,
    residual_tol: float = 1e-8,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
):
    """Covector at the reference time making every switching time a zero of
    the switching function of the control that switches there.

    The reference time must itself be a switching time; the covector is pinned
    by (phi_switching, phi_bracket) = (0, -1) there, leaving one free scalar s
    (the value of the complementary switching function). Each residual is
    affine in s, so two probe values determine the least-squares optimum.
    Returns (lam_bar, max_residual, s).
    """
    q0 = as_point(q0)
    traj = integrate_flow(system, schedule, q0, box=None, rtol=rtol, atol=atol)
    q_bar = traj.state(tau_bar)
    switches = schedule.switching_times
    k_bar = int(np.argmin(np.abs(switches - tau_bar)))
    if abs(switches[k_bar] - tau_bar) > 1e-12:
        raise ValueError("lift shooting expects the reference time to be a switching time")

    controls = schedule.controls
    # index of the control component that switches at each switching time
    switch_idx = []
    for k in range(len(switches)):
        d = controls[k + 1] - controls[k]
        switch_idx.append(0 if abs(d[0]) > abs(d[1]) else 1)

    frame = system.frame_matrix(q_bar)
    i_bar = switch_idx[k_bar]
    pin = np.zeros(3)
    pin[2] = -1.0
    free = np.zeros(3)
    free[1 - i_bar] = 1.0
    lam_a = np.linalg.solve(frame.T, pin)
    lam_b = np.linalg.solve(frame.T, free)

    # residual functionals: transported switching-field values at the reference
    # time, paired with the covector there
    w = []
    for k, tk in enumerate(switches):
        if k == k_bar:
            continue
        field = system.X1 if switch_idx[k] == 0 else system.X2
        w.append(
            transport_field_vector(
                system, schedule, q0, tau_bar, float(tk), field, rtol=rtol, atol=atol
            ).vector
        )
    if w:
        W = np.array(w)
        r0 = W @ lam_a
        beta = W @ lam_b
        denom = float(beta @ beta)
        s = -float(r0 @ beta) / denom if denom > 0 else 0.0
        max_resid = float(np.max(np.abs(r0 + s * beta)))
    else:
        s = 0.0
        max_resid = 0.0
    if max_resid > residual_tol:
        raise LiftConstructionFailed(
            f"lift shooting residual {max_resid:.3e} exceeds {residual_tol:g}"
        )
    return lam_a + s * lam_b, max_resid, s


@dataclass(frozen=True)
class LimitMatrixReport:
    t1: float
    Q_matrix: np.ndarray
    deviation: float
    det: float
    constraint_residual: float

    def to_json(self) -> dict:
        return {
            "t1": self.t1,
            "Q_matrix": self.Q_matrix.tolist(),
            "deviation": self.deviation,
            "det": self.det,
            "constraint_residual": self.constraint_residual,
            "limit": LIMIT_MATRIX.tolist(),
        }


def limit_matrix_comparison(
    system: SystemPair,
    t1: float,
    q0=(0.0, 0.0, 0.0),
    jac_step: float = 1e-4,
) -> LimitMatrixReport:
    """Reduced quadratic form of the equal-duration 6-arc cyclic candidate in
    the coordinates of the last three multipliers, compared to its
    small-duration limit.

    The constraints are solved exactly as in the limit computation: the
    multiplier-sum row plus the two generator-sum components of the frame
    decomposition determine the first three multipliers from the last three;
    the bracket component is reported as a residual.
    """
    if t1 <= 0:
        raise ValueError("arc duration must be positive")
    schedule = build_pattern_schedule(-1.0, [t1] * 6)
    tau_bar = default_reference_time(schedule)
    lam_bar, _, _ = shoot_lift(system, schedule, q0, tau_bar)
    hset = build_h_fields(system, schedule, q0, lam_bar, tau_bar, jac_step=jac_step)

    sigma = _sigma_table(hset)
    S = np.triu(sigma, 1) / 2.0
    S = S + S.T

    basis = np.column_stack(
        [
            hset.system.Xplus.eval(hset.q_bar),
            hset.system.Xminus.eval(hset.q_bar),
            hset.system.X12.eval(hset.q_bar),
        ]
    )
    coeffs = np.linalg.solve(basis, hset.values.T)  # rows: (plus, minus, bracket)
    M3 = np.vstack([np.ones(3), coeffs[0, :3], coeffs[1, :3]])
    R3 = -np.vstack([np.ones(3), coeffs[0, 3:], coeffs[1, 3:]])
    Sol = np.linalg.solve(M3, R3)
    P = np.vstack([Sol, np.eye(3)])
    c_resid = float(np.max(np.abs(coeffs[2] @ P)))

    Qp = P.T @ S @ P
    Qp = (Qp + Qp.T) / 2.0
    deviation = float(np.max(np.abs(Qp - LIMIT_MATRIX)))
    return LimitMatrixReport(
        t1=float(t1),
        Q_matrix=Qp,
        deviation=deviation,
        det=float(np.linalg.det(Qp)),
        constraint_residual=c_resid,
    )


def six_arc_rejection(
    system: SystemPair,
    q0,
    t1: float,
    t1_max: float = 0.5,
    jac_step: float = 1e-4,
) -> SecondOrderReport:
    """End-to-end rejection test of the equal-duration 6-arc cyclic candidate:
    build the schedule, shoot the covector lift, assemble the restricted form
    and report the verdict."""
    if t1 <= 0:
        raise ValueError("arc duration must be positive")
    if t1 > t1_max:
        raise ValueError(f"arc duration {t1} above the configured maximum {t1_max}")
    schedule = build_pattern_schedule(-1.0, [t1] * 6)
    tau_bar = default_reference_time(schedule)
    lam_bar, _, _ = shoot_lift(system, schedule, q0, tau_bar)
    hset = build_h_fields(system, schedule, q0, lam_bar, tau_bar, jac_step=jac_step)
    return assemble_Q(hset)
