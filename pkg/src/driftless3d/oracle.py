"""Brute-force time-optimal search over short arc schedules.

The search enumerates control sequences (the four bang vertices, optionally
arcs where one control is pinned at +-1 while the other takes a free constant
interior value), then minimizes total duration under an endpoint penalty with
multi-start Nelder-Mead refinement.  Against this oracle the short-
concatenation bound (no budget of six arcs beats five) and its sharpness
(targets where five arcs strictly beat four) can be checked at desk scale.

Also bundles the example systems ("heisenberg", "generic", "abelian") with
their load-time frame validation, and a lift-reconstruction helper that checks
oracle winners against the first-order maximality condition.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._kernels import PackedSystem, endpoint, endpoints_batch
from .errors import Driftless3DError, FixtureInvalid, Unreachable
from .flows import ArcSchedule, integrate_flow
from .geometry import (
    Box,
    PolyField,
    SystemPair,
    as_point,
    moving_basis_check,
)

EPS_HIT = 1e-6

# enumeration order is part of the deterministic contract
BANG_VERTICES = ((-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0))

_PENALTY_STAGES = (1e4, 1e6, 1e8)
_N_SEEDS = 64
_N_STARTS = 8


# ---------------------------------------------------------------------------
# bundled systems


def _heisenberg_pair() -> SystemPair:
    X1 = PolyField([{(0, 0, 0): 1.0}, {}, {(0, 1, 0): -0.5}], name="X1")
    X2 = PolyField([{}, {(0, 0, 0): 1.0}, {(1, 0, 0): 0.5}], name="X2")
    return SystemPair(X1, X2, name="heisenberg")


def _generic_pair() -> SystemPair:
    # cross-coupled quadratic perturbation; the shifts keep every bracket
    # frame nondegenerate on the closed unit box
    X1 = PolyField(
        [
            {(0, 0, 0): 1.0},
            {(0, 2, 0): 0.1, (0, 1, 0): 0.5, (0, 0, 0): 0.625},
            {(0, 1, 0): -0.5},
        ],
        name="X1",
    )
    X2 = PolyField(
        [
            {(2, 0, 0): 0.1, (1, 0, 0): 0.5, (0, 0, 0): 0.625},
            {(0, 0, 0): 1.0},
            {(1, 0, 0): 0.5},
        ],
        name="X2",
    )
    return SystemPair(X1, X2, name="generic")


def _abelian_pair() -> SystemPair:
    X1 = PolyField.constant([1.0, 0.0, 0.0], name="X1")
    X2 = PolyField.constant([0.0, 1.0, 0.0], name="X2")
    return SystemPair(X1, X2, name="abelian")


_FIXTURE_BUILDERS = {
    "heisenberg": _heisenberg_pair,
    "generic": _generic_pair,
    "abelian": _abelian_pair,
}

# which frame triples each bundled system must satisfy on the unit box
_REQUIRED_TRIPLES = {
    "heisenberg": ("X1,X2,X12",),
    "generic": (
        "X1,X2,X12",
        "X1,X12,Xp12",
        "X1,X12,Xm12",
        "X2,X12,Xp12",
        "X2,X12,Xm12",
    ),
    "abelian": (),
}

_FIXTURE_CACHE: dict | None = None


def fixtures() -> dict:
    """Named bundled systems, frame-validated on first load.

    Returns {"heisenberg", "generic", "abelian"} -> SystemPair.  "heisenberg"
    satisfies the basic three-field frame but none of the higher-bracket
    frames; "generic" passes all five; "abelian" commutes and passes none.
    Raises FixtureInvalid if a required frame condition fails its scan.
    """
    global _FIXTURE_CACHE
    if _FIXTURE_CACHE is None:
        from .geometry import frame_condition_triples

        box = Box.cube(1.0)
        built = {}
        for name, builder in _FIXTURE_BUILDERS.items():
            system = builder()
            triples = dict(frame_condition_triples(system))
            for label in _REQUIRED_TRIPLES[name]:
                report = moving_basis_check(triples[label], box, samples=9)
                if not report.passed:
                    raise FixtureInvalid(
                        f"fixture {name!r} fails frame condition ({label}): "
                        f"min |det| {report.min_abs_det:.3e} at "
                        f"{report.argmin} <= {report.threshold:g}"
                    )
            built[name] = system
        _FIXTURE_CACHE = built
    return dict(_FIXTURE_CACHE)


def get_fixture(name: str) -> SystemPair:
    table = fixtures()
    if name not in table:
        raise ValueError(
            f"unknown fixture {name!r}; available: {sorted(table)}"
        )
    return table[name]


# ---------------------------------------------------------------------------
# search-space description


@dataclass(frozen=True)
class CandidateFamily:
    """Search space for the oracle: arc-count budget, per-arc duration cap,
    whether one-control-pinned arcs with a free interior constant are
    allowed, and the fixed-step count used by the fast integrator."""

    max_arcs: int
    t_max: float = 0.5
    include_singular: bool = False
    steps: int = 32

    def __post_init__(self):
        if int(self.max_arcs) != self.max_arcs or self.max_arcs < 1:
            raise ValueError(f"max_arcs must be a positive integer, got {self.max_arcs}")
        if not self.t_max > 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.steps < 4:
            raise ValueError(f"steps must be >= 4, got {self.steps}")

    def to_json(self) -> dict:
        return {
            "max_arcs": int(self.max_arcs),
            "t_max": float(self.t_max),
            "include_singular": bool(self.include_singular),
            "steps": int(self.steps),
        }


def _alphabet(include_singular: bool):
    symbols = [("B", u1, u2) for u1, u2 in BANG_VERTICES]
    if include_singular:
        # ("S", free_axis, pinned_value): the other control sits at the pin
        symbols += [
            ("S", 0, -1.0),
            ("S", 0, 1.0),
            ("S", 1, -1.0),
            ("S", 1, 1.0),
        ]
    return symbols


# ---------------------------------------------------------------------------
# symmetry pruning

_ROT = (
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
    np.array([[0.0, -1.0], [1.0, 0.0]]),
)
_SWAP = (
    np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
)


def _dihedral_symmetries():
    """Closure of the quarter-turn and the axis swap: the eight linear maps
    commuting with the Heisenberg dynamics when controls are relabelled."""
    elems = {}
    frontier = [(np.eye(3), np.eye(2))]
    while frontier:
        P, C = frontier.pop()
        key = tuple(int(round(v)) for v in P.ravel())
        if key in elems:
            continue
        elems[key] = (P, C)
        for Pg, Cg in (_ROT, _SWAP):
            frontier.append((Pg @ P, Cg @ C))
    return [pc for key, pc in sorted(elems.items())]


_SYSTEM_SYMMETRIES = {"heisenberg": _dihedral_symmetries()}


def _stabilizer(system: SystemPair, q0, target):
    """Symmetries fixing both the start point and the target; safe to use
    for pruning equivalent control sequences."""
    out = []
    for P, C in _SYSTEM_SYMMETRIES.get(system.name, []):
        if np.allclose(P, np.eye(3)):
            continue
        if np.max(np.abs(P @ q0 - q0)) <= 1e-12 and np.max(np.abs(P @ target - target)) <= 1e-12:
            out.append((P, C))
    return out


def _map_symbol(symbol, C):
    if symbol[0] == "B":
        v = C @ np.array([symbol[1], symbol[2]])
        return ("B", float(round(v[0])), float(round(v[1])))
    _, axis, pin = symbol
    # a signed permutation sends the free axis to a new axis (the free value
    # just flips sign, which the symmetric search range absorbs) and the
    # pinned unit vector to a signed unit vector on the other axis
    new_axis = int(np.argmax(np.abs(C[:, axis])))
    pinned = C[:, 1 - axis] * pin
    return ("S", new_axis, float(round(pinned[1 - new_axis])))


def _canonical(seq, stab):
    best = seq
    for _, C in stab:
        mapped = tuple(_map_symbol(s, C) for s in seq)
        if mapped < best:
            best = mapped
    return best


def _sequences_of_length(n: int, include_singular: bool, stab):
    symbols = _alphabet(include_singular)
    for seq in itertools.product(symbols, repeat=n):
        if any(seq[i] == seq[i + 1] for i in range(n - 1)):
            continue
        if stab and _canonical(seq, stab) != seq:
            continue
        yield seq


# ---------------------------------------------------------------------------
# per-sequence duration optimization


class _SeqProblem:
    """Duration (and free-control) optimization for one control sequence.

    Variables: sqrt-durations s (theta_i = s_i^2 keeps durations nonneg)
    followed by raw free control values for the pinned-arc slots.
    """

    def __init__(self, packed, q0, target, seq, family):
        self.packed = packed
        self.q0 = q0
        self.target = target
        self.seq = seq
        self.n = len(seq)
        self.free_slots = [i for i, s in enumerate(seq) if s[0] == "S"]
        self.k = len(self.free_slots)
        self.t_max = family.t_max
        self.steps = family.steps
        self._base = np.empty((self.n, 2))
        for i, s in enumerate(seq):
            if s[0] == "B":
                self._base[i] = (s[1], s[2])
            else:
                self._base[i, 1 - s[1]] = s[2]
                self._base[i, s[1]] = 0.0

    @property
    def dim(self) -> int:
        return self.n + self.k

    def controls(self, frees) -> np.ndarray:
        arr = self._base.copy()
        for j, slot in enumerate(self.free_slots):
            axis = self.seq[slot][1]
            arr[slot, axis] = min(1.0, max(-1.0, float(frees[j])))
        return arr

    def split(self, x):
        s = np.asarray(x, dtype=float)
        theta = s[: self.n] * s[: self.n]
        frees = s[self.n :]
        return theta, frees

    def evaluate(self, x, steps: int | None = None):
        """(total time, endpoint residual norm, bound excess) at x."""
        theta, frees = self.split(x)
        controls = self._base if self.k == 0 else self.controls(frees)
        ep = endpoint(self.packed, self.q0, controls, theta, steps or self.steps)
        d = ep - self.target
        excess = 0.0
        over = theta - self.t_max
        mask = over > 0.0
        if mask.any():
            excess += float(over[mask] @ over[mask])
        for c in frees:
            o = abs(float(c)) - 1.0
            if o > 0.0:
                excess += o * o
        return float(theta.sum()), float(math.sqrt(d @ d)), excess

    def objective(self, w: float, steps: int | None = None):
        def f(x):
            T, r, excess = self.evaluate(x, steps)
            return T + w * (r * r + excess)

        return f

    def pack(self, theta, frees) -> np.ndarray:
        return np.concatenate([np.sqrt(np.maximum(theta, 0.0)), np.asarray(frees, dtype=float)])


def _guess_total_time(q0, target) -> float:
    d = np.asarray(target, dtype=float) - np.asarray(q0, dtype=float)
    return max(abs(d[0]), abs(d[1]), 2.0 * math.sqrt(2.0 * abs(d[2])), 0.02)


def _seed_block(rng, prob: _SeqProblem, T0: float):
    n = prob.n
    totals = np.empty(_N_SEEDS)
    structured = min(4, _N_SEEDS)
    totals[:structured] = T0 * np.array([0.7, 1.0, 1.5, 2.2])[:structured]
    totals[structured:] = T0 * np.exp(
        rng.uniform(math.log(0.4), math.log(3.2), _N_SEEDS - structured)
    )
    fracs = np.empty((_N_SEEDS, n))
    fracs[:structured] = 1.0 / n
    fracs[structured:] = rng.dirichlet(np.ones(n), _N_SEEDS - structured)
    durs = np.minimum(fracs * totals[:, None], prob.t_max)
    frees = rng.uniform(-1.0, 1.0, (_N_SEEDS, prob.k))
    return durs, frees


def _screen_seeds(prob: _SeqProblem, durs, frees, w: float, steps: int):
    """Penalty value of every seed; batched fast path for bang-only rows."""
    if prob.k == 0:
        eps = endpoints_batch(prob.packed, prob.q0, prob._base, durs, steps)
        d = eps - prob.target[None, :]
        return durs.sum(axis=1) + w * np.einsum("ij,ij->i", d, d)
    vals = np.empty(_N_SEEDS)
    for i in range(_N_SEEDS):
        T, r, excess = prob.evaluate(prob.pack(durs[i], frees[i]), steps)
        vals[i] = T + w * (r * r + excess)
    return vals


_NM_OPTS = dict(disp=False)


def _nm(f, x0, maxiter, xatol, fatol):
    return minimize(
        f,
        x0,
        method="Nelder-Mead",
        options=dict(
            _NM_OPTS, maxiter=maxiter, maxfev=2 * maxiter, xatol=xatol, fatol=fatol
        ),
    )


def _refine(prob: _SeqProblem, starts, stage_steps, eps_hit: float):
    """Multi-start simplex descent with the penalty tightened twice.

    Early stages run on a coarser fixed-step grid; the last stage uses the
    family's full step count so the reported optimum matches verification.
    A residual-only restoration pass rescues near-feasible endpoints.
    """
    dim = prob.dim
    w1, w2, w3 = _PENALTY_STAGES
    s1, s2, s3 = stage_steps
    stage1 = []
    for x0 in starts:
        res = _nm(prob.objective(w1, s1), x0, 60 * dim, 1e-5, 1e-9)
        stage1.append((float(res.fun), len(stage1), res.x))
    stage1.sort(key=lambda t: (t[0], t[1]))
    stage2 = []
    for fun, idx, x in stage1[:2]:
        res = _nm(prob.objective(w2, s2), x, 120 * dim, 1e-7, 1e-11)
        stage2.append((float(res.fun), idx, res.x))
    stage2.sort(key=lambda t: (t[0], t[1]))

    finals = []
    for fun, idx, x in stage2[:2]:
        res = _nm(prob.objective(w3, s3), x, 250 * dim, 1e-9, 1e-13)
        x3 = res.x
        T, r, _ = prob.evaluate(x3, s3)
        if r > eps_hit:
            restore = _nm(lambda v: prob.evaluate(v, s3)[1] ** 2, x3, 150 * dim, 1e-10, 1e-18)
            res = _nm(prob.objective(w3, s3), restore.x, 120 * dim, 1e-9, 1e-13)
            x3 = res.x
            T, r, _ = prob.evaluate(x3, s3)
        finals.append((r > eps_hit, T if r <= eps_hit else r, idx, x3))
    finals.sort(key=lambda t: (t[0], t[1], t[2]))
    return finals[0][3]


def _prune_arcs(controls, theta, drop_below: float):
    """Drop negligible arcs and merge adjacent arcs with equal controls."""
    out_c, out_t = [], []
    for i in range(len(theta)):
        if theta[i] <= drop_below:
            continue
        if out_c and np.max(np.abs(out_c[-1] - controls[i])) <= 1e-12:
            out_t[-1] += theta[i]
            continue
        out_c.append(np.array(controls[i], dtype=float))
        out_t.append(float(theta[i]))
    if not out_c:
        return None, None
    return np.array(out_c), np.array(out_t)


def _lex_key(controls, theta):
    return (
        len(theta),
        tuple(float(v) for v in np.asarray(controls).ravel()),
        tuple(round(float(t), 12) for t in theta),
    )


@dataclass
class _Candidate:
    T: float
    controls: np.ndarray
    theta: np.ndarray
    residual: float

    @property
    def key(self):
        return _lex_key(self.controls, self.theta)

    def schedule(self) -> ArcSchedule:
        return ArcSchedule(list(zip(map(tuple, self.controls), self.theta)))


def _better(a: _Candidate, b: _Candidate | None) -> bool:
    if b is None:
        return True
    if a.T < b.T - 1e-12:
        return True
    return a.T <= b.T + 1e-12 and a.key < b.key


# ---------------------------------------------------------------------------
# oracle proper


@dataclass
class OracleResult:
    """Outcome of the schedule search for one target: per-budget minimal
    times (inf where the budget cannot reach), the best schedule overall and
    per budget, and the verified endpoint miss of the best schedule."""

    target: np.ndarray
    best_time: dict
    best_schedule: ArcSchedule
    endpoint_error: float
    budget_schedules: dict = field(default_factory=dict)
    eps_hit: float = EPS_HIT
    screened: int = 0
    refined: int = 0

    def __post_init__(self):
        budgets = sorted(self.best_time)
        for lo, hi in zip(budgets, budgets[1:]):
            if self.best_time[hi] > self.best_time[lo] + 1e-12:
                raise ValueError("best_time must be non-increasing in the budget")
        if not self.endpoint_error <= self.eps_hit:
            raise ValueError(
                f"endpoint error {self.endpoint_error:g} exceeds eps_hit {self.eps_hit:g}"
            )

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "target": [float(v) for v in self.target],
            "best_time": {
                str(n): (None if math.isinf(t) else float(t))
                for n, t in sorted(self.best_time.items())
            },
            "best_schedule": self.best_schedule.to_json(),
            "budget_schedules": {
                str(n): (None if s is None else s.to_json())
                for n, s in sorted(self.budget_schedules.items())
            },
            "endpoint_error": float(self.endpoint_error),
            "eps_hit": float(self.eps_hit),
            "screened": int(self.screened),
            "refined": int(self.refined),
        }


def _seed_entropy(seed):
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(v) for v in seed)


def min_time_to_target(
    system: SystemPair,
    q0,
    target,
    family: CandidateFamily,
    seed=0,
    eps_hit: float = EPS_HIT,
) -> OracleResult:
    """Minimal transfer time from q0 to the target for every arc-count
    budget up to family.max_arcs.

    Every admissible control sequence (consecutive symbols distinct, pruned
    to one representative per orbit of the symmetries fixing q0 and the
    target) is screened on a 64-point duration grid plus a short simplex
    pass; plausibly optimal sequences then get the full treatment of
    8 multi-starts with the endpoint penalty tightened twice.  Winners are
    re-verified with the adaptive integrator before being reported.

    Raises Unreachable when no schedule in the family hits the target to
    within eps_hit.
    """
    q0 = as_point(q0)
    target = as_point(target)
    if np.max(np.abs(target - q0)) <= eps_hit:
        raise ValueError("target coincides with the start point; no schedule needed")
    packed = PackedSystem(system)
    stab = _stabilizer(system, q0, target)
    T0 = _guess_total_time(q0, target)
    steps_screen = max(8, family.steps // 4)
    steps_mid = max(16, family.steps // 2)
    stage_steps = (steps_mid, steps_mid, family.steps)

    bests: dict[int, _Candidate] = {}
    incumbent: float = math.inf
    screened_count = 0
    refined_count = 0

    for n in range(1, family.max_arcs + 1):
        screened = []
        for si, seq in enumerate(_sequences_of_length(n, family.include_singular, stab)):
            prob = _SeqProblem(packed, q0, target, seq, family)
            rng = np.random.default_rng(_seed_entropy(seed) + (n, si))
            durs, frees = _seed_block(rng, prob, T0)
            vals = _screen_seeds(prob, durs, frees, _PENALTY_STAGES[0], steps_screen)
            order = np.argsort(vals, kind="stable")
            starts = [prob.pack(durs[j], frees[j]) for j in order[:_N_STARTS]]
            res = _nm(
                prob.objective(_PENALTY_STAGES[0], steps_screen),
                starts[0],
                30 * prob.dim,
                1e-4,
                1e-8,
            )
            T, r, _ = prob.evaluate(res.x, steps_screen)
            # penalized value: capable sequences score near their true time,
            # incapable ones score near w*r^2 and sort behind every winner
            score = T + _PENALTY_STAGES[0] * r * r
            screened.append((score, si, res.x, prob, starts))
            screened_count += 1

        screened.sort(key=lambda row: (row[0], row[1]))
        refined_here = 0
        for score, si, x_screen, prob, starts in screened:
            if refined_here >= 24:
                break
            if refined_here >= 6 and score > incumbent * 1.03 + 2e-3:
                break
            starts = [x_screen] + starts[: _N_STARTS - 1]
            x_best = _refine(prob, starts, stage_steps, eps_hit)
            refined_here += 1
            refined_count += 1
            theta, frees = prob.split(x_best)
            controls = prob.controls(frees) if prob.k else prob._base
            cand = _finalize_candidate(prob, controls, theta, eps_hit)
            if cand is None:
                continue
            m = len(cand.theta)
            if _better(cand, bests.get(m)):
                bests[m] = cand
            incumbent = min(incumbent, cand.T)

    _reduction_sweep(packed, q0, target, family, bests, eps_hit, stage_steps)
    return _aggregate(system, q0, target, family, bests, eps_hit, screened_count, refined_count)


def _rows_to_sequence(controls):
    """Recover search symbols from explicit per-arc control rows; None when a
    row has both components interior (not representable in the family)."""
    seq, frees = [], []
    for row in controls:
        bang0 = abs(abs(row[0]) - 1.0) <= 1e-12
        bang1 = abs(abs(row[1]) - 1.0) <= 1e-12
        if bang0 and bang1:
            seq.append(("B", float(np.sign(row[0])), float(np.sign(row[1]))))
        elif bang1:
            seq.append(("S", 0, float(np.sign(row[1]))))
            frees.append(float(row[0]))
        elif bang0:
            seq.append(("S", 1, float(np.sign(row[0]))))
            frees.append(float(row[1]))
        else:
            return None, None
    return tuple(seq), frees


def _reduction_sweep(packed, q0, target, family, bests, eps_hit, stage_steps):
    """Try dropping single arcs from each per-length winner and re-optimize.

    Lets a good schedule discovered at a longer budget propagate down to the
    shorter budgets it implicitly contains, which the independent per-length
    searches can miss when a narrow basin is only found once.
    """
    for _ in range(4):
        improved = False
        for m in sorted(bests, reverse=True):
            cand = bests.get(m)
            if cand is None or m <= 1:
                continue
            for i in range(m):
                rows = np.delete(cand.controls, i, axis=0)
                durs = np.delete(cand.theta, i)
                rows, durs = _prune_arcs(rows, durs, 0.0)
                if rows is None:
                    continue
                seq, frees = _rows_to_sequence(rows)
                if seq is None:
                    continue
                prob = _SeqProblem(packed, q0, target, seq, family)
                warm1 = prob.pack(durs, frees)
                spread = np.minimum(durs + cand.theta[i] / len(durs), family.t_max)
                warm2 = prob.pack(spread, frees)
                x = _refine(prob, [warm1, warm2], stage_steps, eps_hit)
                theta, fr = prob.split(x)
                ctrl = prob.controls(fr) if prob.k else prob._base
                cand2 = _finalize_candidate(prob, ctrl, theta, eps_hit)
                if cand2 is None:
                    continue
                mm = len(cand2.theta)
                if _better(cand2, bests.get(mm)):
                    bests[mm] = cand2
                    improved = True
        if not improved:
            break


def _finalize_candidate(prob: _SeqProblem, controls, theta, eps_hit) -> _Candidate | None:
    for drop in (1e-9, 0.0):
        c, t = _prune_arcs(controls, theta, drop)
        if c is None:
            return None
        ep = endpoint(prob.packed, prob.q0, c, t, prob.steps)
        r = float(np.linalg.norm(ep - prob.target))
        if r <= eps_hit and np.all(t <= prob.t_max + 1e-9):
            return _Candidate(T=float(t.sum()), controls=c, theta=t, residual=r)
    return None


def _aggregate(system, q0, target, family, bests, eps_hit, screened, refined) -> OracleResult:
    # re-verify each per-length winner with the adaptive integrator; the
    # fixed-step kernel and the reference path must agree before we report
    verified: dict[int, _Candidate] = {}
    for m, cand in sorted(bests.items()):
        sched = cand.schedule()
        traj = integrate_flow(system, sched, q0)
        err = float(np.linalg.norm(traj.end_point - target))
        if err <= eps_hit:
            verified[m] = _Candidate(cand.T, cand.controls, cand.theta, err)
    if not verified:
        raise Unreachable(
            f"no schedule with <= {family.max_arcs} arcs (per-arc cap "
            f"{family.t_max:g}) reaches {tuple(target)} within {eps_hit:g}"
        )

    best_time = {}
    budget_schedules = {}
    running: _Candidate | None = None
    for n in range(1, family.max_arcs + 1):
        cand = verified.get(n)
        if cand is not None and _better(cand, running):
            running = cand
        if running is None:
            best_time[n] = math.inf
            budget_schedules[n] = None
        else:
            best_time[n] = running.T
            budget_schedules[n] = running.schedule()
    winner = running
    return OracleResult(
        target=target,
        best_time=best_time,
        best_schedule=winner.schedule(),
        endpoint_error=winner.residual,
        budget_schedules=budget_schedules,
        eps_hit=eps_hit,
        screened=screened,
        refined=refined,
    )


# ---------------------------------------------------------------------------
# bound verification and sharpness


@dataclass
class BoundRow:
    target: np.ndarray
    best_time: dict
    ok: bool
    margin_rel: float

    def to_json(self) -> dict:
        return {
            "target": [float(v) for v in self.target],
            "best_time": {
                str(n): (None if math.isinf(t) else float(t))
                for n, t in sorted(self.best_time.items())
            },
            "ok": bool(self.ok),
            "margin_rel": (None if math.isinf(self.margin_rel) else float(self.margin_rel)),
        }


@dataclass
class BoundSummary:
    """Per-target comparison of the six-arc and five-arc minimal times:
    a row is ok when allowing a sixth arc gains at most tol_rel."""

    rows: list
    violations: list
    tol_rel: float

    @property
    def all_ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "tol_rel": float(self.tol_rel),
            "rows": [row.to_json() for row in self.rows],
            "violations": list(self.violations),
            "all_ok": self.all_ok,
        }

    def to_csv(self) -> str:
        budgets = sorted(self.rows[0].best_time) if self.rows else []
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["target_x", "target_y", "target_z"]
            + [f"best_time_{n}" for n in budgets]
            + ["margin_rel", "ok"]
        )
        for row in self.rows:
            writer.writerow(
                [f"{v:.12g}" for v in row.target]
                + [
                    "" if math.isinf(row.best_time[n]) else f"{row.best_time[n]:.12g}"
                    for n in budgets
                ]
                + [
                    "" if math.isinf(row.margin_rel) else f"{row.margin_rel:.6g}",
                    int(row.ok),
                ]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def bound_verification(
    system: SystemPair,
    q0,
    targets,
    family: CandidateFamily,
    tol_rel: float = 1e-3,
    seed=0,
    eps_hit: float = EPS_HIT,
) -> BoundSummary:
    """For each target, check that the six-arc budget does not beat the
    five-arc budget by more than the relative tolerance.  Violations are
    collected, never raised: they would indicate a search artifact (or a
    counterexample) and deserve inspection, not a crash."""
    if family.max_arcs < 6:
        raise ValueError("bound verification needs a six-arc budget")
    rows = []
    violations = []
    for ti, target in enumerate(targets):
        result = min_time_to_target(
            system, q0, target, family, seed=_seed_entropy(seed) + (101, ti), eps_hit=eps_hit
        )
        b5 = result.best_time[5]
        b6 = result.best_time[6]
        if math.isinf(b5):
            ok = math.isinf(b6)
            margin = math.inf
        else:
            ok = b6 >= b5 * (1.0 - tol_rel)
            margin = (b5 - b6) / b5
        rows.append(BoundRow(target=as_point(target), best_time=result.best_time, ok=ok, margin_rel=margin))
        if not ok:
            violations.append(ti)
    return BoundSummary(rows=rows, violations=violations, tol_rel=tol_rel)


@dataclass
class SharpnessRow:
    target: np.ndarray
    best_time: dict
    margin_rel: float
    sharp: bool

    def to_json(self) -> dict:
        return {
            "target": [float(v) for v in self.target],
            "best_time": {
                str(n): (None if math.isinf(t) else float(t))
                for n, t in sorted(self.best_time.items())
            },
            "margin_rel": (None if math.isinf(self.margin_rel) else float(self.margin_rel)),
            "sharp": bool(self.sharp),
        }


@dataclass
class SharpnessSummary:
    rows: list
    tol_rel: float

    @property
    def winners(self):
        return [row for row in self.rows if row.sharp]

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "tol_rel": float(self.tol_rel),
            "rows": [row.to_json() for row in self.rows],
            "n_sharp": len(self.winners),
        }


def default_sharpness_candidates(system: SystemPair, q0, count: int = 6, steps: int = 64):
    """Endpoints of genuine extremals truncated part-way through their fifth
    bang arc: natural candidates for targets whose optimum needs five arcs.

    Each candidate comes from integrating the extremal system from a covector
    with switching values (phi1, phi2, phi12) = (p1, p2, -1) at the start
    point and stopping after ``tfac`` multiples of the switching scale ``m``.
    Larger ``m`` strengthens the bracket corrections that separate the
    five-arc optimum from the best four-arc competitor, so the widest-gap
    settings lead the list."""
    from .extremal import ExtremalState, integrate_extremal, normalize_initial

    q0 = as_point(q0)
    combos = [
        (0.32, -1.0 / 3.0, 2.0 / 3.0, 3.9),
        (0.28, -1.0 / 3.0, 2.0 / 3.0, 3.9),
        (0.24, -1.0 / 3.0, 2.0 / 3.0, 3.9),
        (0.20, -1.0 / 3.0, 2.0 / 3.0, 3.9),
        (0.16, -0.55, 0.45, 3.9),
        (0.06, -1.0 / 3.0, 2.0 / 3.0, 4.0),
    ]
    frame = np.column_stack(
        [system.X1.eval(q0), system.X2.eval(q0), system.X12.eval(q0)]
    )
    targets = []
    for m, p1, p2, tfac in combos[: int(count)]:
        phi = np.array([p1 * m, p2 * m, -1.0])
        try:
            lam0 = normalize_initial(np.linalg.solve(frame.T, phi), q0, system)
            run, _, _ = integrate_extremal(system, ExtremalState(q0, lam0), tfac * m)
        except (np.linalg.LinAlgError, Driftless3DError):
            # degenerate frame (for example commuting fields): no candidates
            continue
        targets.append(run.q(tfac * m))
    return targets


def sharpness_search(
    system: SystemPair,
    q0,
    targets=None,
    family: CandidateFamily | None = None,
    tol_rel: float = 1e-3,
    seed=0,
    eps_hit: float = EPS_HIT,
) -> SharpnessSummary:
    """Look for targets where the five-arc budget strictly beats the
    four-arc budget by the relative margin: witnesses that the five-arc bound
    cannot be shortened."""
    if family is None:
        family = CandidateFamily(max_arcs=6)
    if family.max_arcs < 5:
        raise ValueError("sharpness search needs at least a five-arc budget")
    if targets is None:
        targets = default_sharpness_candidates(system, q0)
    rows = []
    for ti, target in enumerate(targets):
        result = min_time_to_target(
            system, q0, target, family, seed=_seed_entropy(seed) + (202, ti), eps_hit=eps_hit
        )
        b4 = result.best_time[4]
        b5 = result.best_time[5]
        if math.isinf(b4):
            margin = math.inf
            sharp = not math.isinf(b5)
        else:
            margin = (b4 - b5) / b5
            sharp = margin > tol_rel
        rows.append(
            SharpnessRow(target=as_point(target), best_time=result.best_time, margin_rel=margin, sharp=sharp)
        )
    return SharpnessSummary(rows=rows, tol_rel=tol_rel)


# ---------------------------------------------------------------------------
# consistency with the first-order conditions


@dataclass
class LiftCheck:
    """Least-squares reconstruction of an initial covector matching the
    switch structure of a bang-bang schedule, plus the pointwise maximality
    verdict of the lifted trajectory."""

    residual: float
    lam0: np.ndarray
    maximal: bool
    n_constraints: int


def extremal_lift_check(
    system: SystemPair,
    schedule: ArcSchedule,
    q0,
    samples_per_arc: int = 9,
    sign_tol_rel: float = 1e-6,
    rtol: float = 1e-10,
    atol: float = 1e-10,
) -> LiftCheck:
    """Reconstruct a covector lift for a bang-bang schedule and check the
    pointwise maximality of its controls.

    Along the fixed trajectory each switching condition is linear in the
    initial covector, so the best lift is the smallest singular direction of
    the stacked constraint matrix; the reported residual is that smallest
    singular value (rows normalized).
    """
    from scipy.integrate import solve_ivp

    q0 = as_point(q0)
    controls = [np.asarray(u, dtype=float) for u in schedule.controls]
    durations = list(schedule.durations)

    def rhs(u):
        f = system.control_rhs(u)
        jf = system.control_jacobian(u)

        def fun(t, y):
            q, M = y[:3], y[3:].reshape(3, 3)
            return np.concatenate([f(q), (jf(q) @ M).ravel()])

        return fun

    # checkpoints: (q, dq/dq0) at every arc boundary
    y = np.concatenate([q0, np.eye(3).ravel()])
    checkpoints = [(q0.copy(), np.eye(3))]
    t_cursor = 0.0
    mid_samples = []
    for u, d in zip(controls, durations):
        ts = np.linspace(t_cursor, t_cursor + d, samples_per_arc + 2)[1:-1]
        sol = solve_ivp(
            rhs(u),
            (t_cursor, t_cursor + d),
            y,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            t_eval=np.concatenate([ts, [t_cursor + d]]),
            dense_output=False,
        )
        for col in sol.y[:, :-1].T:
            mid_samples.append((col[:3], col[3:].reshape(3, 3), u))
        y = sol.y[:, -1]
        checkpoints.append((y[:3].copy(), y[3:].reshape(3, 3).copy()))
        t_cursor += d

    rows = []
    for k in range(len(controls) - 1):
        qk, Mk = checkpoints[k + 1]
        du = controls[k + 1] - controls[k]
        for i in range(2):
            if abs(du[i]) > 1e-9:
                Xi = (system.X1, system.X2)[i].eval(qk)
                row = np.linalg.solve(Mk, Xi)
                rows.append(row / np.linalg.norm(row))

    if rows:
        C = np.array(rows)
        _, svals, Vt = np.linalg.svd(C, full_matrices=True)
        lam0 = Vt[-1]
        residual = float(svals[-1]) if C.shape[0] >= 3 else 0.0
    else:
        lam0 = None
        residual = 0.0

    # evaluate phi along arc interiors for both orientations of lam0
    def phis(lam):
        out = []
        for q, M, u in mid_samples:
            lam_t = np.linalg.solve(M.T, lam)
            out.append(
                (
                    float(lam_t @ system.X1.eval(q)),
                    float(lam_t @ system.X2.eval(q)),
                    u,
                )
            )
        return out

    if lam0 is None:
        # no switches: any covector positively aligned with the single
        # control works; build one from the frame at the start point
        u = controls[0]
        F = system.frame_matrix(q0)
        lam0 = np.linalg.solve(F.T, np.array([u[0], u[1], 0.0]))
        lam0 = lam0 / np.linalg.norm(lam0)

    best = None
    for lam in (lam0, -lam0):
        table = phis(lam)
        scale = max(max(abs(p1), abs(p2)) for p1, p2, _ in table)
        tol = sign_tol_rel * max(scale, 1e-30)
        agree = sum(
            (u[0] * p1 > -tol) + (u[1] * p2 > -tol) for p1, p2, u in table
        )
        maximal = all(
            (u[0] * p1 > -tol) and (u[1] * p2 > -tol) for p1, p2, u in table
        ) and scale > 0.0
        if best is None or agree > best[0]:
            best = (agree, lam, maximal)

    _, lam0, maximal = best
    return LiftCheck(
        residual=residual,
        lam0=lam0,
        maximal=bool(maximal),
        n_constraints=len(rows),
    )
