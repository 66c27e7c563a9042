"""Second-order rejection pipeline: transported fields, sigma table,
restricted quadratic form, and the small-duration limit."""

import numpy as np
import pytest

from driftless3d import (
    ArcSchedule,
    ExtremalState,
    LIMIT_MATRIX,
    LiftConstructionFailed,
    Verdict,
    build_h_fields,
    build_pattern_schedule,
    integrate_extremal,
    limit_matrix_comparison,
    normalize_initial,
    shoot_lift,
    six_arc_rejection,
)
from driftless3d.second_order import LiftUniqueness, assemble_Q, default_reference_time
from driftless3d.oracle import get_fixture

T1S = (0.2, 0.1, 0.05)


def heisenberg_candidate(t1):
    sys = get_fixture("heisenberg")
    sched = build_pattern_schedule(-1.0, [t1] * 6)
    tau_bar = default_reference_time(sched)
    return sys, sched, tau_bar


def test_shoot_lift_closed_form_on_nilpotent_fixture():
    t1 = 0.1
    sys, sched, tau_bar = heisenberg_candidate(t1)
    lam_bar, resid, s = shoot_lift(sys, sched, np.zeros(3), tau_bar)
    assert resid <= 1e-10
    # the free switching value at the reference time equals the arc duration
    assert s == pytest.approx(t1, abs=1e-10)
    # pairings at the reference point: switching phi zero, bracket phi -1
    q_bar_traj = sched.switching_times
    assert tau_bar == pytest.approx(3 * t1)
    from driftless3d import integrate_flow

    q_bar = integrate_flow(sys, sched, np.zeros(3), box=None).state(tau_bar)
    phi = sys.frame_matrix(q_bar).T @ lam_bar
    assert phi[2] == pytest.approx(-1.0, abs=1e-10)
    assert sorted(np.abs(phi[:2])) == pytest.approx([0.0, t1], abs=1e-10)


def test_transported_generators_match_hand_formulas():
    # for the nilpotent fixture the pulled-back generators are exactly
    # X- - 2 t X12, -X+ - 2 t X12, -X-, X+, X- - 2 t X12, -X+ - 2 t X12
    t1 = 0.1
    sys, sched, tau_bar = heisenberg_candidate(t1)
    lam_bar, _, _ = shoot_lift(sys, sched, np.zeros(3), tau_bar)
    hset = build_h_fields(sys, sched, np.zeros(3), lam_bar, tau_bar)
    q = hset.q_bar
    Xp, Xm, X12 = sys.Xplus.eval(q), sys.Xminus.eval(q), sys.X12.eval(q)
    expected = [
        Xm - 2 * t1 * X12,
        -Xp - 2 * t1 * X12,
        -Xm,
        Xp,
        Xm - 2 * t1 * X12,
        -Xp - 2 * t1 * X12,
    ]
    assert hset.n_arcs == 6
    for k, exp in enumerate(expected):
        np.testing.assert_allclose(hset.values[k], exp, atol=1e-8)


def test_sigma_table_exact_pattern():
    t1 = 0.1
    sys, sched, tau_bar = heisenberg_candidate(t1)
    rep = six_arc_rejection(sys, np.zeros(3), t1)
    expected = np.zeros((6, 6))
    for i, j in ((0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)):
        expected[i, j] = 2.0
    for i, j in ((0, 3), (1, 4), (2, 5)):
        expected[i, j] = -2.0
    upper = np.triu(rep.sigma, 1)
    np.testing.assert_allclose(upper, expected, atol=1e-8)


def test_restricted_form_and_verdict_at_every_scale():
    sys = get_fixture("heisenberg")
    target_eigs = np.array([-2.0 / np.sqrt(3.0), -1.0, 2.0 / np.sqrt(3.0)])
    for t1 in T1S:
        rep = six_arc_rejection(sys, np.zeros(3), t1)
        assert rep.verdict is Verdict.REJECTED
        assert rep.dimH == 3
        assert rep.signature == (1, 2)
        np.testing.assert_allclose(np.sort(rep.eigenvalues), target_eigs, atol=1e-8)
        assert rep.lift_uniqueness is LiftUniqueness.UNIQUE


def test_lift_uniqueness_rank_gap():
    rep = six_arc_rejection(get_fixture("heisenberg"), np.zeros(3), 0.05)
    sv = np.sort(rep.lift_singular_values)[::-1]
    assert sv.size >= 3
    # two directions are pinned, everything below is numerically zero
    assert sv[1] / max(sv[2], 1e-300) >= 1e3


def test_limit_matrix_reproduced_exactly_on_nilpotent_fixture():
    for t1 in T1S:
        rep = limit_matrix_comparison(get_fixture("heisenberg"), t1)
        assert rep.deviation <= 1e-9
        assert rep.det == pytest.approx(16.0, rel=1e-9)
        assert rep.constraint_residual <= 1e-9
    np.testing.assert_allclose(
        LIMIT_MATRIX, [[-4.0, 0.0, 2.0], [0.0, 0.0, 2.0], [2.0, 2.0, 0.0]]
    )


def test_equal_duration_candidate_has_no_lift_off_nilpotent():
    # away from the nilpotent case the cyclic quasi-period is not constant,
    # so the equal-duration candidate admits no covector lift
    with pytest.raises(LiftConstructionFailed):
        six_arc_rejection(get_fixture("generic"), np.zeros(3), 0.05)


def test_rejection_of_genuine_six_arc_window_on_generic_fixture():
    sys = get_fixture("generic")
    q0 = np.zeros(3)
    frame = np.column_stack([sys.X1.eval(q0), sys.X2.eval(q0), sys.X12.eval(q0)])
    lam0 = normalize_initial(
        np.linalg.solve(frame.T, np.array([0.0, 0.05, -1.0])), q0, sys
    )
    _, _, arcs = integrate_extremal(sys, ExtremalState(q0, lam0), 0.6)
    sched = ArcSchedule([(tuple(a.u), a.duration) for a in arcs.arcs[:6]])
    tau_bar = default_reference_time(sched)
    lam_bar, resid, _ = shoot_lift(sys, sched, q0, tau_bar)
    assert resid <= 1e-8
    rep = assemble_Q(build_h_fields(sys, sched, q0, lam_bar, tau_bar))
    assert rep.verdict is Verdict.REJECTED
    assert rep.dimH == 3
    assert rep.signature == (1, 2)
    # eigenvalues sit within the first-order corridor of the nilpotent limit
    limit = np.array([-2.0 / np.sqrt(3.0), -1.0, 2.0 / np.sqrt(3.0)])
    assert np.max(np.abs(np.sort(rep.eigenvalues) - limit)) <= 0.05


def test_rejection_rejects_bad_durations():
    sys = get_fixture("heisenberg")
    with pytest.raises(ValueError):
        six_arc_rejection(sys, np.zeros(3), -0.1)
    with pytest.raises(ValueError):
        six_arc_rejection(sys, np.zeros(3), 0.7)
