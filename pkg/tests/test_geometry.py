"""Field algebra, bracket calculus, and moving-frame checks."""

import numpy as np
import pytest

from driftless3d import (
    Box,
    EmptyRegion,
    NumericField,
    PolyField,
    SystemPair,
    TangentVector,
    ad,
    frame_condition_triples,
    lie_bracket,
    moving_basis_check,
)
from driftless3d.oracle import get_fixture


def heisenberg():
    return get_fixture("heisenberg")


def test_polyfield_eval_and_arithmetic():
    f = PolyField([{(0, 0, 0): 1.0, (0, 1, 0): -0.5}, {}, {(2, 0, 0): 2.0}])
    p = np.array([1.5, 2.0, -3.0])
    np.testing.assert_allclose(f.eval(p), [1.0 - 0.5 * 2.0, 0.0, 2.0 * 1.5**2])
    g = f + f
    np.testing.assert_allclose(g.eval(p), 2.0 * f.eval(p))
    np.testing.assert_allclose((f - f).eval(p), np.zeros(3))
    np.testing.assert_allclose(f.scale(-3.0).eval(p), -3.0 * f.eval(p))


def test_polyfield_json_roundtrip():
    f = PolyField([{(1, 0, 2): 0.25}, {(0, 0, 0): -1.0}, {}])
    g = PolyField.from_json(f.to_json())
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = rng.uniform(-2, 2, size=3)
        np.testing.assert_allclose(g.eval(p), f.eval(p), atol=0, rtol=0)


def test_heisenberg_bracket_is_vertical_unit_field():
    sys = heisenberg()
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = rng.uniform(-1, 1, size=3)
        np.testing.assert_allclose(sys.X12.eval(p), [0.0, 0.0, 1.0], atol=1e-14)
    # second-layer brackets vanish for this nilpotent example
    for field in (sys.Xp12, sys.Xm12, sys.X112, sys.X212):
        np.testing.assert_allclose(field.eval(rng.uniform(-1, 1, 3)), np.zeros(3), atol=1e-14)


def test_bracket_antisymmetry_and_plus_minus_identity():
    sys = get_fixture("generic")
    reverse = lie_bracket(sys.X2, sys.X1)
    plus_minus = lie_bracket(sys.Xplus, sys.Xminus)
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = rng.uniform(-1, 1, size=3)
        np.testing.assert_allclose(reverse.eval(p), -sys.X12.eval(p), atol=1e-12)
        # [X1+X2, X1-X2] = -2 [X1,X2]
        np.testing.assert_allclose(plus_minus.eval(p), -2.0 * sys.X12.eval(p), atol=1e-12)


def test_bracket_matches_finite_differences():
    sys = get_fixture("generic")
    num1 = NumericField(sys.X1.eval)
    num2 = NumericField(sys.X2.eval)
    numeric = lie_bracket(num1, num2)
    rng = np.random.default_rng(2)
    for _ in range(8):
        p = rng.uniform(-0.9, 0.9, size=3)
        exact = sys.X12.eval(p)
        approx = numeric.eval(p)
        assert np.linalg.norm(approx - exact) <= 1e-6 * max(1.0, np.linalg.norm(exact))


def test_ad_iterates_brackets():
    sys = get_fixture("generic")
    ad1 = ad(sys.X1)
    once = ad1(sys.X2)
    twice = ad1(ad1(sys.X2))
    direct = lie_bracket(sys.X1, lie_bracket(sys.X1, sys.X2))
    p = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(once.eval(p), sys.X12.eval(p), atol=1e-12)
    np.testing.assert_allclose(twice.eval(p), direct.eval(p), atol=1e-12)


def test_box_membership_and_grid():
    box = Box.cube(1.0)
    assert box.contains(np.zeros(3))
    assert not box.contains(np.array([1.5, 0.0, 0.0]))
    pts = box.grid(3)
    assert pts.shape == (27, 3)
    assert abs(pts).max() <= 1.0 + 1e-15
    with pytest.raises(EmptyRegion):
        Box(lo=(0.0, 0.0, 0.0), hi=(0.0, 1.0, 1.0)).validate()


def test_tangent_vector_carries_base_point():
    v = TangentVector(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(v.vector, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(v.base, [0.0, 1.0, 2.0])


def test_system_pair_control_rhs_combines_generators():
    sys = heisenberg()
    u = (1.0, -1.0)
    f = sys.control_rhs(u)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.uniform(-1, 1, size=3)
        np.testing.assert_allclose(f(p), sys.X1.eval(p) - sys.X2.eval(p), atol=1e-14)


def test_frame_condition_triples_labels():
    sys = heisenberg()
    labels = [label for label, _ in frame_condition_triples(sys)]
    assert labels == [
        "X1,X2,X12",
        "X1,X12,Xp12",
        "X1,X12,Xm12",
        "X2,X12,Xp12",
        "X2,X12,Xm12",
    ]


def test_moving_basis_check_heisenberg():
    sys = heisenberg()
    region = Box.cube(1.0)
    triples = dict(frame_condition_triples(sys))
    first = moving_basis_check(triples["X1,X2,X12"], region, samples=5)
    assert first.passed
    assert first.min_abs_det == pytest.approx(1.0)
    higher = moving_basis_check(triples["X1,X12,Xp12"], region, samples=5)
    assert not higher.passed
    assert higher.min_abs_det <= 1e-12


def test_moving_basis_check_generic_all_pass():
    sys = get_fixture("generic")
    region = Box.cube(1.0)
    for label, fields in frame_condition_triples(sys):
        report = moving_basis_check(fields, region, samples=7)
        assert report.passed, label
        assert report.min_abs_det > 1e-8


def test_frame_report_json_fields():
    sys = heisenberg()
    fields = (sys.X1, sys.X2, sys.X12)
    report = moving_basis_check(fields, Box.cube(1.0), samples=3)
    obj = report.to_json()
    assert set(obj) == {"min_abs_det", "passed", "threshold", "samples_per_axis", "argmin"}
    assert obj["passed"] is True


def test_custom_system_pair_from_descriptor():
    X1 = PolyField([{(0, 0, 0): 1.0}, {}, {(0, 1, 0): -0.5}])
    X2 = PolyField([{}, {(0, 0, 0): 1.0}, {(1, 0, 0): 0.5}])
    sys = SystemPair(X1, X2, name="custom")
    assert sys.is_polynomial
    np.testing.assert_allclose(sys.X12.eval(np.zeros(3)), [0.0, 0.0, 1.0], atol=1e-14)
    M = sys.frame_matrix(np.array([0.2, 0.4, 0.0]))
    assert abs(np.linalg.det(M)) == pytest.approx(1.0)
