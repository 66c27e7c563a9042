"""Flow maps, schedules, and covector-compatible field transport."""

import numpy as np
import pytest

from driftless3d import (
    ArcSchedule,
    BlowUp,
    Box,
    ExtremalState,
    StepTooSmall,
    integrate_extremal,
    integrate_flow,
    flow_map,
    normalize_initial,
    transport_field_vector,
    transported_field,
)
from driftless3d.oracle import get_fixture


def test_arc_schedule_validation():
    with pytest.raises(ValueError):
        ArcSchedule([])
    with pytest.raises(ValueError):
        ArcSchedule([((1.0, 1.0), 0.0)])
    with pytest.raises(ValueError):
        ArcSchedule([((1.0, 1.0), 0.1), ((1.0, 1.0), 0.2)])
    sched = ArcSchedule([((1.0, 1.0), 0.1), ((1.0, -1.0), 0.2)])
    assert sched.n_arcs == 2
    np.testing.assert_allclose(sched.switching_times, [0.1])
    np.testing.assert_allclose(sched.total_duration, 0.3)
    again = ArcSchedule.from_json(sched.to_json())
    np.testing.assert_allclose(again.controls, sched.controls)
    np.testing.assert_allclose(again.durations, sched.durations)


def test_two_arc_endpoint_matches_hand_integration():
    # arcs (1,1) for a then (1,-1) for b give (a+b, a-b, -a*b) from the origin
    sys = get_fixture("heisenberg")
    a, b = 0.3, 0.2
    sched = ArcSchedule([((1.0, 1.0), a), ((1.0, -1.0), b)])
    traj = integrate_flow(sys, sched, np.zeros(3))
    np.testing.assert_allclose(traj.end_point, [a + b, a - b, -a * b], atol=1e-10)


def test_integrate_flow_raises_on_box_exit():
    sys = get_fixture("heisenberg")
    sched = ArcSchedule([((1.0, 1.0), 2.0)])
    with pytest.raises(BlowUp):
        integrate_flow(sys, sched, np.zeros(3), box=Box.cube(1.0))


def test_flow_map_composes_and_inverts():
    sys = get_fixture("generic")
    sched = ArcSchedule([((1.0, 1.0), 0.15), ((-1.0, 1.0), 0.2), ((-1.0, -1.0), 0.1)])
    q0 = np.array([0.05, -0.1, 0.0])
    traj = integrate_flow(sys, sched, q0)
    T = sched.total_duration
    # flow_map(sys, sched, s, t, q) carries the time-t point q to time s
    end = flow_map(sys, sched, T, 0.0, q0)
    np.testing.assert_allclose(end, traj.end_point, atol=1e-9)
    mid = flow_map(sys, sched, 0.21, 0.0, q0)
    np.testing.assert_allclose(flow_map(sys, sched, T, 0.21, mid), end, atol=1e-9)
    np.testing.assert_allclose(flow_map(sys, sched, 0.0, T, end), q0, atol=1e-9)


def _pattern_run(system, phi, T):
    q0 = np.zeros(3)
    frame = np.column_stack(
        [system.X1.eval(q0), system.X2.eval(q0), system.X12.eval(q0)]
    )
    lam0 = normalize_initial(np.linalg.solve(frame.T, np.asarray(phi, float)), q0, system)
    return integrate_extremal(system, ExtremalState(q0, lam0), T)


def test_transport_preserves_adjoint_pairing():
    # the defining property: <lam(tau_bar), w> = <lam(t), Y(q(t))>
    sys = get_fixture("heisenberg")
    run, traces, arcs = _pattern_run(sys, (0.02, 0.05, -1.0), 0.3)
    sched = ArcSchedule([(tuple(a.u), a.duration) for a in arcs.arcs])
    tau_bar = float(arcs.switching_times[1])
    for Y in (sys.X1, sys.X2, sys.X12):
        for t in (0.0, 0.12, 0.28):
            w = transport_field_vector(sys, sched, np.zeros(3), tau_bar, t, Y)
            lhs = float(run.lam(tau_bar) @ w.vector)
            rhs = float(run.lam(t) @ Y.eval(run.q(t)))
            assert abs(lhs - rhs) <= 1e-8


def test_single_arc_transport_gains_bracket_backward():
    # pulling Y back from the arc end to time zero adds t*[X(u), Y] exactly
    # for this nilpotent example
    sys = get_fixture("heisenberg")
    t = 0.4
    sched = ArcSchedule([((1.0, 1.0), t)])
    w = transport_field_vector(sys, sched, np.zeros(3), 0.0, t, sys.X2)
    expected = sys.X2.eval(np.zeros(3)) + t * sys.X12.eval(np.zeros(3))
    np.testing.assert_allclose(w.vector, expected, atol=1e-9)
    # pushing forward loses the bracket instead
    v = transport_field_vector(sys, sched, np.zeros(3), t, 0.0, sys.X2)
    qt = np.array([t, t, 0.0])
    expected_fwd = sys.X2.eval(qt) - t * sys.X12.eval(qt)
    np.testing.assert_allclose(v.vector, expected_fwd, atol=1e-9)


def test_transported_field_exact_and_leading_agree_on_nilpotent():
    sys = get_fixture("heisenberg")
    t = 0.25
    sched = ArcSchedule([((1.0, 1.0), t)])
    exact = transported_field(sys, sched, 0.0, t, sys.X2, mode="exact")
    leading = transported_field(sys, sched, 0.0, t, sys.X2, mode="leading")
    rng = np.random.default_rng(4)
    for _ in range(5):
        p = rng.uniform(-0.3, 0.3, size=3)
        target = sys.X2.eval(p) + t * sys.X12.eval(p)
        np.testing.assert_allclose(leading.eval(p), target, atol=1e-12)
        np.testing.assert_allclose(exact.eval(p), target, atol=1e-7)


def test_transport_remainder_is_second_order():
    # on the non-nilpotent fixture the first-order formula has an O(t^2) gap
    from driftless3d import lie_bracket

    sys = get_fixture("generic")
    q0 = np.zeros(3)
    bracket = lie_bracket(sys.control_field((1.0, 1.0)), sys.X2)
    devs = []
    for t in (0.2, 0.1, 0.05):
        sched = ArcSchedule([((1.0, 1.0), t)])
        w = transport_field_vector(sys, sched, q0, 0.0, t, sys.X2)
        first_order = sys.X2.eval(q0) + t * bracket.eval(q0)
        devs.append(np.linalg.norm(w.vector - first_order))
    ratios = [d / t**2 for d, t in zip(devs, (0.2, 0.1, 0.05))]
    assert devs[0] > devs[1] > devs[2] > 0
    assert max(ratios) / min(ratios) < 4.0


def test_transported_field_rejects_tiny_jacobian_step():
    sys = get_fixture("generic")
    sched = ArcSchedule([((1.0, 1.0), 0.1)])
    with pytest.raises(StepTooSmall):
        transported_field(sys, sched, 0.0, 0.1, sys.X2, jac_step=1e-9)


def test_trajectory_csv_export(tmp_path):
    sys = get_fixture("heisenberg")
    sched = ArcSchedule([((1.0, 1.0), 0.1), ((1.0, -1.0), 0.1)])
    traj = integrate_flow(sys, sched, np.zeros(3))
    path = tmp_path / "traj.csv"
    traj.to_csv(path, per_arc=10)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("t,")
    assert len(lines) > 10
