"""Vector fields on a single global 3D chart: evaluation, jacobians, Lie
brackets, derived bracket fields, and frame (moving-basis) checks.

Fields are preferably polynomial, stored as sparse monomial tables so that
brackets and jacobians are exact. Numeric (callable-backed) fields with
finite-difference jacobians are supported as a fallback and cross-check.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion

__all__ = [
    "TangentVector",
    "Box",
    "SmoothField",
    "PolyField",
    "NumericField",
    "SystemPair",
    "lie_bracket",
    "ad",
    "moving_basis_check",
    "FrameReport",
    "as_point",
]

FD_STEP = 1e-5


def as_point(q) -> np.ndarray:
    """Coerce to a finite 3-vector chart point."""
    q = np.asarray(q, dtype=float).reshape(3)
    if not np.all(np.isfinite(q)):
        raise ValueError("chart point has non-finite coordinates")
    return q


@dataclass(frozen=True)
class TangentVector:
    """A 3-vector attached to a base chart point."""

    vector: np.ndarray
    base: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float).reshape(3))
        object.__setattr__(self, "base", as_point(self.base))
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("tangent vector has non-finite components")


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box, the sampling region for frame checks."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float).reshape(3))

    @classmethod
    def cube(cls, halfwidth: float, center=(0.0, 0.0, 0.0)) -> "Box":
        c = np.asarray(center, dtype=float)
        return cls(c - halfwidth, c + halfwidth)

    def validate(self):
        if np.any(self.hi <= self.lo):
            raise EmptyRegion(f"degenerate box: lo={self.lo.tolist()}, hi={self.hi.tolist()}")

    def contains(self, q, margin: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lo - margin) and np.all(q <= self.hi + margin))

    def grid(self, per_axis: int) -> np.ndarray:
        """All grid points, endpoints included (the check runs on the closure)."""
        axes = [np.linspace(self.lo[k], self.hi[k], per_axis) for k in range(3)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _coerce_box(region) -> Box:
    if isinstance(region, Box):
        return region
    lo, hi = region
    return Box(lo, hi)


class SmoothField:
    """A vector field on the chart: evaluation plus first derivatives."""

    descriptor: object = "field"

    def eval(self, q) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, q) -> np.ndarray:
        """d(eval)/dq as a 3x3 matrix; default central differences."""
        q = as_point(q)
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = FD_STEP
            J[:, k] = (self.eval(q + e) - self.eval(q - e)) / (2.0 * FD_STEP)
        return J

    def __call__(self, q) -> np.ndarray:
        return self.eval(q)


def _poly_eval(table: dict, x: float, y: float, z: float) -> float:
    acc = 0.0
    for (i, j, k), c in table.items():
        acc += c * x**i * y**j * z**k
    return acc


def _poly_diff(table: dict, axis: int) -> dict:
    out = {}
    for key, c in table.items():
        e = key[axis]
        if e == 0:
            continue
        new = list(key)
        new[axis] = e - 1
        new = tuple(new)
        out[new] = out.get(new, 0.0) + c * e
    return {k: v for k, v in out.items() if v != 0.0}


def _poly_add(p: dict, q: dict, sign: float = 1.0) -> dict:
    out = dict(p)
    for key, c in q.items():
        out[key] = out.get(key, 0.0) + sign * c
    return {k: v for k, v in out.items() if v != 0.0}


def _poly_mul(p: dict, q: dict) -> dict:
    out = {}
    for (i1, j1, k1), c1 in p.items():
        for (i2, j2, k2), c2 in q.items():
            key = (i1 + i2, j1 + j2, k1 + k2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return {k: v for k, v in out.items() if v != 0.0}


def _poly_scale(p: dict, s: float) -> dict:
    if s == 0.0:
        return {}
    return {k: s * c for k, c in p.items()}


class PolyField(SmoothField):
    """Polynomial field: one sparse monomial table per component.

    Keys are exponent triples (i, j, k) for x^i y^j z^k. Jacobians are exact
    derivative polynomials, so brackets of PolyFields are exact.
    """

    def __init__(self, components, name: str | None = None):
        comps = []
        for table in components:
            clean = {}
            for key, c in table.items():
                key = tuple(int(e) for e in key)
                if len(key) != 3 or any(e < 0 for e in key):
                    raise ValueError(f"bad monomial exponent triple {key}")
                c = float(c)
                if c != 0.0:
                    clean[key] = clean.get(key, 0.0) + c
            comps.append(clean)
        if len(comps) != 3:
            raise ValueError("a field needs exactly 3 components")
        self.components = tuple(comps)
        self._partials = tuple(
            tuple(_poly_diff(comp, axis) for axis in range(3)) for comp in self.components
        )
        self.name = name

    @property
    def descriptor(self):
        return self.to_json()

    @classmethod
    def constant(cls, vec, name=None) -> "PolyField":
        return cls([{(0, 0, 0): float(v)} for v in vec], name=name)

    @classmethod
    def zero(cls) -> "PolyField":
        return cls([{}, {}, {}], name="0")

    def eval(self, q) -> np.ndarray:
        x, y, z = float(q[0]), float(q[1]), float(q[2])
        return np.array([_poly_eval(c, x, y, z) for c in self.components])

    def jacobian(self, q) -> np.ndarray:
        x, y, z = float(q[0]), float(q[1]), float(q[2])
        J = np.empty((3, 3))
        for a in range(3):
            for b in range(3):
                J[a, b] = _poly_eval(self._partials[a][b], x, y, z)
        return J

    def __add__(self, other: "PolyField") -> "PolyField":
        return PolyField([_poly_add(p, q) for p, q in zip(self.components, other.components)])

    def __sub__(self, other: "PolyField") -> "PolyField":
        return PolyField([_poly_add(p, q, -1.0) for p, q in zip(self.components, other.components)])

    def __neg__(self) -> "PolyField":
        return self.scale(-1.0)

    def scale(self, s: float) -> "PolyField":
        return PolyField([_poly_scale(p, float(s)) for p in self.components])

    def max_degree(self) -> int:
        degs = [sum(k) for comp in self.components for k in comp]
        return max(degs, default=0)

    def pack(self):
        """Flat arrays (exponents, coefficients, component index) for kernels."""
        exps, coefs, comp = [], [], []
        for a, table in enumerate(self.components):
            for key in sorted(table):
                exps.append(key)
                coefs.append(table[key])
                comp.append(a)
        if not coefs:
            return (np.zeros((1, 3), dtype=np.int64), np.zeros(1), np.zeros(1, dtype=np.int64))
        return (
            np.array(exps, dtype=np.int64),
            np.array(coefs, dtype=float),
            np.array(comp, dtype=np.int64),
        )

    def to_json(self) -> dict:
        return {
            "components": [
                {",".join(str(e) for e in key): c for key, c in sorted(comp.items())}
                for comp in self.components
            ]
        }

    @classmethod
    def from_json(cls, obj, name=None) -> "PolyField":
        if isinstance(obj, str):
            obj = json.loads(obj)
        comps_raw = obj["components"] if isinstance(obj, dict) else obj
        comps = []
        for table in comps_raw:
            parsed = {}
            for key, c in table.items():
                parts = key.split(",")
                if len(parts) != 3:
                    raise ValueError(f"bad exponent key {key!r}, expected 'i,j,k'")
                parsed[tuple(int(p) for p in parts)] = float(c)
            comps.append(parsed)
        return cls(comps, name=name)

    def __repr__(self):
        tag = self.name or "poly"
        return f"PolyField({tag}, deg={self.max_degree()})"


class NumericField(SmoothField):
    """Field backed by callables; jacobian falls back to central differences."""

    def __init__(self, f, jac=None, name: str = "numeric"):
        self._f = f
        self._jac = jac
        self.name = name

    @property
    def descriptor(self):
        return self.name

    def eval(self, q) -> np.ndarray:
        return np.asarray(self._f(np.asarray(q, dtype=float)), dtype=float).reshape(3)

    def jacobian(self, q) -> np.ndarray:
        if self._jac is not None:
            return np.asarray(self._jac(np.asarray(q, dtype=float)), dtype=float).reshape(3, 3)
        return super().jacobian(q)

    def __repr__(self):
        return f"NumericField({self.name})"


def lie_bracket(X: SmoothField, Y: SmoothField) -> SmoothField:
    """[X, Y]: q -> DY(q) X(q) - DX(q) Y(q); exact for polynomial inputs."""
    if isinstance(X, PolyField) and isinstance(Y, PolyField):
        comps = []
        for a in range(3):
            acc = {}
            for b in range(3):
                acc = _poly_add(acc, _poly_mul(X.components[b], Y._partials[a][b]))
                acc = _poly_add(acc, _poly_mul(Y.components[b], X._partials[a][b]), -1.0)
            comps.append(acc)
        return PolyField(comps)

    def ev(q):
        return Y.jacobian(q) @ X.eval(q) - X.jacobian(q) @ Y.eval(q)

    xn = getattr(X, "name", None) or "X"
    yn = getattr(Y, "name", None) or "Y"
    return NumericField(ev, name=f"[{xn},{yn}]")


def ad(X: SmoothField):
    """ad(X): Y -> [X, Y], for readable iterated brackets."""

    def apply(Y: SmoothField) -> SmoothField:
        return lie_bracket(X, Y)

    return apply


@dataclass(frozen=True)
class FrameReport:
    """Result of a moving-basis determinant scan over a box."""

    min_abs_det: float
    passed: bool
    threshold: float
    samples_per_axis: int
    argmin: tuple

    def to_json(self) -> dict:
        return {
            "min_abs_det": self.min_abs_det,
            "passed": self.passed,
            "threshold": self.threshold,
            "samples_per_axis": self.samples_per_axis,
            "argmin": list(self.argmin),
        }


def moving_basis_check(fields, region, samples: int = 9, threshold: float = 1e-8) -> FrameReport:
    """Scan |det| of three field values over a grid on the closed box.

    Passes iff the minimum determinant magnitude exceeds the threshold.
    """
    if len(fields) != 3:
        raise ValueError("moving_basis_check needs exactly three fields")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    box = _coerce_box(region)
    box.validate()
    pts = box.grid(samples)
    min_abs = np.inf
    argmin = pts[0]
    for q in pts:
        M = np.column_stack([f.eval(q) for f in fields])
        d = abs(float(np.linalg.det(M)))
        if d < min_abs:
            min_abs = d
            argmin = q
    return FrameReport(
        min_abs_det=float(min_abs),
        passed=bool(min_abs > threshold),
        threshold=float(threshold),
        samples_per_axis=int(samples),
        argmin=tuple(float(v) for v in argmin),
    )


def frame_condition_triples(system) -> list:
    """The five moving-basis triples whose pointwise independence drives the
    short-concatenation results: (X1,X2,X12) and the four higher-bracket
    frames combining a generator with X12 and one of Xp12/Xm12.
    """
    return [
        ("X1,X2,X12", (system.X1, system.X2, system.X12)),
        ("X1,X12,Xp12", (system.X1, system.X12, system.Xp12)),
        ("X1,X12,Xm12", (system.X1, system.X12, system.Xm12)),
        ("X2,X12,Xp12", (system.X2, system.X12, system.Xp12)),
        ("X2,X12,Xm12", (system.X2, system.X12, system.Xm12)),
    ]


class SystemPair:
    """The two generator fields plus all derived bracket fields.

    Derived members: X12 = [X1,X2], Xplus = X1+X2, Xminus = X1-X2,
    Xp12 = [Xplus,X12], Xm12 = [Xminus,X12]. Computed once on construction;
    instances are immutable by convention.
    """

    def __init__(self, X1: SmoothField, X2: SmoothField, name: str = "system"):
        self.X1 = X1
        self.X2 = X2
        self.name = name
        self.X12 = lie_bracket(X1, X2)
        if isinstance(X1, PolyField) and isinstance(X2, PolyField):
            self.Xplus = X1 + X2
            self.Xminus = X1 - X2
        else:
            self.Xplus = NumericField(lambda q: X1.eval(q) + X2.eval(q), name="X1+X2")
            self.Xminus = NumericField(lambda q: X1.eval(q) - X2.eval(q), name="X1-X2")
        self.Xp12 = lie_bracket(self.Xplus, self.X12)
        self.Xm12 = lie_bracket(self.Xminus, self.X12)
        # singular-control numerator/denominator brackets
        self.X112 = lie_bracket(self.X1, self.X12)
        self.X212 = lie_bracket(self.X2, self.X12)

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self.X1, PolyField) and isinstance(self.X2, PolyField)

    def control_field(self, u) -> SmoothField:
        """u1*X1 + u2*X2 for a constant control value."""
        u1, u2 = float(u[0]), float(u[1])
        if self.is_polynomial:
            return self.X1.scale(u1) + self.X2.scale(u2)
        return NumericField(
            lambda q: u1 * self.X1.eval(q) + u2 * self.X2.eval(q),
            jac=lambda q: u1 * self.X1.jacobian(q) + u2 * self.X2.jacobian(q),
            name=f"{u1}*X1+{u2}*X2",
        )

    def control_rhs(self, u):
        """Callable q -> u1*X1(q) + u2*X2(q) for integrators."""
        u1, u2 = float(u[0]), float(u[1])
        X1, X2 = self.X1, self.X2
        return lambda q: u1 * X1.eval(q) + u2 * X2.eval(q)

    def control_jacobian(self, u):
        """Callable q -> jacobian of the controlled field."""
        u1, u2 = float(u[0]), float(u[1])
        X1, X2 = self.X1, self.X2
        return lambda q: u1 * X1.jacobian(q) + u2 * X2.jacobian(q)

    def frame_matrix(self, q) -> np.ndarray:
        """Columns (X1, X2, X12) evaluated at q."""
        return np.column_stack([self.X1.eval(q), self.X2.eval(q), self.X12.eval(q)])

    def __repr__(self):
        return f"SystemPair({self.name})"
