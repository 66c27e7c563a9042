"""Fixed-step RK4 endpoint kernels over packed polynomial fields.

Two interchangeable backends: numba-compiled scalar/batch kernels and a pure
numpy implementation (vectorized over the batch axis). The numpy path is
selected when numba is unavailable or the environment variable
DRIFTLESS3D_NO_NUMBA is set to 1/true/yes; tests and benchmarks can also flip
backends at runtime with set_backend().
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


def _env_disabled() -> bool:
    return os.environ.get("DRIFTLESS3D_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


_BACKEND = "numba" if (HAS_NUMBA and not _env_disabled()) else "numpy"


def get_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _BACKEND = name


class PackedSystem:
    """Flat-array form of a polynomial SystemPair for the kernels."""

    def __init__(self, system):
        if not system.is_polynomial:
            raise TypeError("kernels need polynomial fields; got a numeric system")
        self.e1, self.c1, self.k1 = system.X1.pack()
        self.e2, self.c2, self.k2 = system.X2.pack()
        self.name = system.name


# ---------------------------------------------------------------------------
# numba backend: scalar endpoint kernel plus a batch loop over it


@njit(cache=True)
def _field_pair_nb(e1, c1, k1, e2, c2, k2, u1, u2, x, y, z, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    # monomial degrees are tiny, so repeated multiplication beats pow
    for m in range(c1.shape[0]):
        v = u1 * c1[m]
        for _ in range(e1[m, 0]):
            v *= x
        for _ in range(e1[m, 1]):
            v *= y
        for _ in range(e1[m, 2]):
            v *= z
        out[k1[m]] += v
    for m in range(c2.shape[0]):
        v = u2 * c2[m]
        for _ in range(e2[m, 0]):
            v *= x
        for _ in range(e2[m, 1]):
            v *= y
        for _ in range(e2[m, 2]):
            v *= z
        out[k2[m]] += v


@njit(cache=True)
def _endpoint_nb(e1, c1, k1, e2, c2, k2, q0, controls, durations, steps):
    q = q0.copy()
    f1 = np.zeros(3)
    f2 = np.zeros(3)
    f3 = np.zeros(3)
    f4 = np.zeros(3)
    for a in range(durations.shape[0]):
        u1 = controls[a, 0]
        u2 = controls[a, 1]
        T = durations[a]
        if T <= 0.0:
            continue
        h = T / steps
        for _ in range(steps):
            _field_pair_nb(e1, c1, k1, e2, c2, k2, u1, u2, q[0], q[1], q[2], f1)
            _field_pair_nb(
                e1, c1, k1, e2, c2, k2, u1, u2,
                q[0] + 0.5 * h * f1[0], q[1] + 0.5 * h * f1[1], q[2] + 0.5 * h * f1[2], f2,
            )
            _field_pair_nb(
                e1, c1, k1, e2, c2, k2, u1, u2,
                q[0] + 0.5 * h * f2[0], q[1] + 0.5 * h * f2[1], q[2] + 0.5 * h * f2[2], f3,
            )
            _field_pair_nb(
                e1, c1, k1, e2, c2, k2, u1, u2,
                q[0] + h * f3[0], q[1] + h * f3[1], q[2] + h * f3[2], f4,
            )
            for d in range(3):
                q[d] += h * (f1[d] + 2.0 * f2[d] + 2.0 * f3[d] + f4[d]) / 6.0
    return q


@njit(cache=True)
def _endpoints_batch_nb(e1, c1, k1, e2, c2, k2, q0, controls, durations_batch, steps, out):
    for b in range(durations_batch.shape[0]):
        out[b] = _endpoint_nb(e1, c1, k1, e2, c2, k2, q0, controls, durations_batch[b], steps)


# ---------------------------------------------------------------------------
# numpy backend: batch-vectorized; the scalar endpoint is a batch of one


def _field_pair_np(e1, c1, k1, e2, c2, k2, u1, u2, q):
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    out = np.zeros_like(q)
    for m in range(c1.shape[0]):
        v = np.full(q.shape[0], u1 * c1[m])
        for _ in range(e1[m, 0]):
            v = v * x
        for _ in range(e1[m, 1]):
            v = v * y
        for _ in range(e1[m, 2]):
            v = v * z
        out[:, k1[m]] += v
    for m in range(c2.shape[0]):
        v = np.full(q.shape[0], u2 * c2[m])
        for _ in range(e2[m, 0]):
            v = v * x
        for _ in range(e2[m, 1]):
            v = v * y
        for _ in range(e2[m, 2]):
            v = v * z
        out[:, k2[m]] += v
    return out


def _endpoints_batch_np(e1, c1, k1, e2, c2, k2, q0, controls, durations_batch, steps):
    B, n = durations_batch.shape
    q = np.broadcast_to(q0, (B, 3)).copy()
    for a in range(n):
        u1 = controls[a, 0]
        u2 = controls[a, 1]
        h = np.where(durations_batch[:, a] > 0.0, durations_batch[:, a], 0.0)[:, None] / steps
        for _ in range(steps):
            f1 = _field_pair_np(e1, c1, k1, e2, c2, k2, u1, u2, q)
            f2 = _field_pair_np(e1, c1, k1, e2, c2, k2, u1, u2, q + 0.5 * h * f1)
            f3 = _field_pair_np(e1, c1, k1, e2, c2, k2, u1, u2, q + 0.5 * h * f2)
            f4 = _field_pair_np(e1, c1, k1, e2, c2, k2, u1, u2, q + h * f3)
            q = q + h * (f1 + 2.0 * f2 + 2.0 * f3 + f4) / 6.0
    return q


# ---------------------------------------------------------------------------
# dispatching API


def endpoint(packed: PackedSystem, q0, controls, durations, steps: int = 32) -> np.ndarray:
    """Endpoint of the piecewise-constant control schedule from q0."""
    q0 = np.asarray(q0, dtype=float).reshape(3)
    controls = np.ascontiguousarray(controls, dtype=float).reshape(-1, 2)
    durations = np.ascontiguousarray(durations, dtype=float).reshape(-1)
    if _BACKEND == "numba":
        return _endpoint_nb(
            packed.e1, packed.c1, packed.k1, packed.e2, packed.c2, packed.k2,
            q0, controls, durations, steps,
        )
    return _endpoints_batch_np(
        packed.e1, packed.c1, packed.k1, packed.e2, packed.c2, packed.k2,
        q0, controls, durations[None, :], steps,
    )[0]


def endpoints_batch(packed: PackedSystem, q0, controls, durations_batch, steps: int = 32) -> np.ndarray:
    """Endpoints for a batch of duration vectors sharing one control sequence."""
    q0 = np.asarray(q0, dtype=float).reshape(3)
    controls = np.ascontiguousarray(controls, dtype=float).reshape(-1, 2)
    durations_batch = np.ascontiguousarray(durations_batch, dtype=float)
    if durations_batch.ndim != 2 or durations_batch.shape[1] != controls.shape[0]:
        raise ValueError("durations_batch must be (B, n_arcs)")
    if _BACKEND == "numba":
        out = np.empty((durations_batch.shape[0], 3))
        _endpoints_batch_nb(
            packed.e1, packed.c1, packed.k1, packed.e2, packed.c2, packed.k2,
            q0, controls, durations_batch, steps, out,
        )
        return out
    return _endpoints_batch_np(
        packed.e1, packed.c1, packed.k1, packed.e2, packed.c2, packed.k2,
        q0, controls, durations_batch, steps,
    )
