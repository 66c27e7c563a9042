"""Extremal integration, arc decomposition, pattern and regime analysis."""

import numpy as np
import pytest

from driftless3d import (
    ArcSchedule,
    BlowUp,
    Box,
    ChatteringSuspected,
    ExtremalState,
    IntegrationOptions,
    PatternMatch,
    RegimeKind,
    SingularDenominator,
    SwitchingTraces,
    ZeroCovector,
    build_pattern_schedule,
    classify_regime,
    detect_pattern,
    integrate_extremal,
    maximality_check,
    normalize_initial,
    singular_control,
    switching_derivative_check,
)
from driftless3d.oracle import get_fixture


def lam_from_phi(system, phi, q0=None):
    q0 = np.zeros(3) if q0 is None else np.asarray(q0, float)
    frame = np.column_stack(
        [system.X1.eval(q0), system.X2.eval(q0), system.X12.eval(q0)]
    )
    return np.linalg.solve(frame.T, np.asarray(phi, float))


def test_build_pattern_schedule_cycles():
    sched = build_pattern_schedule(-1.0, [0.1] * 6)
    assert sched.n_arcs == 6
    seq = [tuple(u) for u in sched.controls]
    assert seq[0] == (1.0, -1.0)
    for a, b in zip(seq, seq[1:]):
        # exactly one control flips per switch
        assert sum(x != y for x, y in zip(a, b)) == 1
    assert detect_pattern(seq) is PatternMatch.NEGATIVE
    mirrored = build_pattern_schedule(+1.0, [0.1] * 6)
    assert detect_pattern([tuple(u) for u in mirrored.controls]) is PatternMatch.POSITIVE


def test_normalize_initial_sup_norm_convention():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(np.array([0.3, -0.1, 0.7]), np.zeros(3), sys)
    frame = np.column_stack([sys.X1.eval(np.zeros(3)), sys.X2.eval(np.zeros(3)), sys.X12.eval(np.zeros(3))])
    phi = frame.T @ lam0
    assert np.max(np.abs(phi)) == pytest.approx(1.0)
    with pytest.raises(ZeroCovector):
        normalize_initial(np.zeros(3), np.zeros(3), sys)


def test_negative_pattern_run_on_heisenberg():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(lam_from_phi(sys, (0.02, 0.05, -1.0)), np.zeros(3), sys)
    run, traces, arcs = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.4)
    assert arcs.is_bang_bang
    assert detect_pattern(arcs) is PatternMatch.NEGATIVE
    durations = [a.duration for a in arcs.arcs]
    interior = durations[1:-1]
    # interior arcs share one duration on this fixture (the switching scale)
    assert np.ptp(interior) <= 1e-9
    assert interior[0] == pytest.approx(0.07, abs=1e-9)
    # the Hamiltonian |phi1| + |phi2| is a first integral
    hams = [run.hamiltonian(t) for t in np.linspace(0.0, 0.4, 40)]
    assert np.ptp(hams) <= 1e-9
    assert maximality_check(run) >= -1e-9


def test_positive_pattern_for_opposite_bracket_sign():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(lam_from_phi(sys, (0.02, 0.05, 1.0)), np.zeros(3), sys)
    _, _, arcs = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.4)
    assert detect_pattern(arcs) is PatternMatch.POSITIVE


def test_switching_derivative_identity_along_run():
    sys = get_fixture("generic")
    lam0 = normalize_initial(lam_from_phi(sys, (0.03, -0.06, -1.0)), np.zeros(3), sys)
    run, _, _ = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.25)
    for Y in (sys.X1, sys.X2, sys.X12):
        residual = switching_derivative_check(run, Y, n_samples=120)
        assert residual <= 1e-6


def test_phi_traces_match_frame_pairings():
    sys = get_fixture("generic")
    lam0 = normalize_initial(lam_from_phi(sys, (0.05, 0.02, -1.0)), np.zeros(3), sys)
    run, traces, _ = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.2)
    for t in (0.0, 0.07, 0.19):
        q, lam = run.q(t), run.lam(t)
        phi = run.phi_at(t)
        assert phi[0] == pytest.approx(float(lam @ sys.X1.eval(q)), abs=1e-12)
        assert phi[1] == pytest.approx(float(lam @ sys.X2.eval(q)), abs=1e-12)
        assert phi[2] == pytest.approx(float(lam @ sys.X12.eval(q)), abs=1e-12)


def test_detect_pattern_edge_cases():
    assert detect_pattern([(1.0, 1.0), (-1.0, -1.0)]) is PatternMatch.OTHER
    assert detect_pattern([(1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]) is PatternMatch.SINGLE_INPUT
    assert detect_pattern([(1.0, 1.0)]) is PatternMatch.SINGLE_INPUT
    # one full negative-order cycle, starting elsewhere in the cycle
    assert (
        detect_pattern([(-1.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)])
        is PatternMatch.NEGATIVE
    )


def _traces(ts, phi1, phi2, phi12, crossings=None):
    return SwitchingTraces(
        times=np.asarray(ts, float),
        phi1=np.asarray(phi1, float),
        phi2=np.asarray(phi2, float),
        phi12=np.asarray(phi12, float),
        zero_crossings=crossings or {},
    )


def test_classify_regime_trichotomy():
    ts = np.linspace(0.0, 1.0, 5)
    osc = np.array([0.5, -0.5, 0.5, -0.5, 0.5])
    pos = np.full(5, 0.8)

    rep = classify_regime(_traces(ts, osc, osc, pos, {"phi1": [0.1], "phi2": [0.2]}))
    assert rep.regime is RegimeKind.PHI12_NONVANISHING
    assert rep.arc_bound == 5

    rep = classify_regime(_traces(ts, osc, pos, pos, {"phi1": [0.1]}))
    assert rep.regime is RegimeKind.SINGLE_INPUT
    assert rep.arc_bound == 3

    # a vanishing bracket pairing takes precedence over the single-input view
    rep = classify_regime(
        _traces(ts, osc, pos, osc, {"phi1": [0.1], "phi12": [0.3]})
    )
    assert rep.regime is RegimeKind.BOTH_VANISH
    assert rep.arc_bound == 3


def test_classify_regime_on_abelian_run():
    sys = get_fixture("abelian")
    lam0 = normalize_initial(np.array([0.6, 0.8, 0.3]), np.zeros(3), sys)
    _, traces, arcs = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.7)
    assert arcs.n_arcs == 1
    assert classify_regime(traces).regime is RegimeKind.SINGLE_INPUT


def test_singular_control_feedback_and_degenerate_denominator():
    gen = get_fixture("generic")
    q = np.array([0.1, -0.2, 0.0])
    lam = lam_from_phi(gen, (0.9, 0.0, 0.4), q)
    res = singular_control(ExtremalState(q, lam), gen, which="u2", fixed=1.0)
    assert abs(res.value) <= 1.0
    assert res.denominator != 0.0

    heis = get_fixture("heisenberg")
    lam_h = lam_from_phi(heis, (0.9, 0.0, 0.4))
    with pytest.raises(SingularDenominator):
        singular_control(ExtremalState(np.zeros(3), lam_h), heis, which="u2", fixed=1.0)


def test_chattering_cap_raises():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(lam_from_phi(sys, (0.004, 0.004, -1.0)), np.zeros(3), sys)
    with pytest.raises(ChatteringSuspected):
        integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 1.0)


def test_blowup_on_small_box():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(lam_from_phi(sys, (0.6, 0.8, -0.2)), np.zeros(3), sys)
    options = IntegrationOptions(box=Box.cube(0.05))
    with pytest.raises(BlowUp):
        integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 1.0, options)


def test_arc_decomposition_reports():
    sys = get_fixture("heisenberg")
    lam0 = normalize_initial(lam_from_phi(sys, (0.02, 0.05, -1.0)), np.zeros(3), sys)
    _, _, arcs = integrate_extremal(sys, ExtremalState(np.zeros(3), lam0), 0.4)
    counts = arcs.switch_counts()
    assert min(counts) >= 2
    obj = arcs.to_json()
    assert len(obj["arcs"]) == arcs.n_arcs
    total = sum(a["t_end"] - a["t_start"] for a in obj["arcs"])
    assert total == pytest.approx(0.4, abs=1e-9)
