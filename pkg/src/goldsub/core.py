"""Problem model and first-order primitives.

A problem is ``min f(x)  s.t.  g_i(x) <= 0, i = 1..m`` with f and every g_i
Lipschitz on a neighborhood of the feasible region.  The constraints are
reduced to the single function ``g(x) = max_i g_i(x)``, and descent steps are
driven by the anchored max-form subproblem

    h_x(z) = max { f(z) - f(x), g(z) },

which is 0 at a feasible anchor x and whose Goldstein stationary points yield
Fritz-John certificates for the original problem.

Oracles come in two flavours.  An almost-everywhere gradient oracle returns
the gradient wherever the function is differentiable and some fixed
deterministic subgradient on the measure-zero kink set.  A directional
subgradient oracle F(x, v) additionally satisfies <F(x, v), v> equal to the
one-sided directional derivative of f at x along v.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OracleError, UsageError

Vector = np.ndarray


class OracleMode(enum.Enum):
    """Which first-order information a subgradient query uses."""

    AE_GRADIENT = "almost-everywhere-gradient"
    DIRECTIONAL = "directional-subgradient"


@dataclass(frozen=True)
class Branch:
    """Which side of the max produced a value or subgradient.

    ``kind`` is "objective" or "constraint"; ``index`` is the 1-based
    constraint index for constraint branches and None for the objective.
    """

    kind: str
    index: int | None = None

    @property
    def is_objective(self) -> bool:
        return self.kind == "objective"

    @staticmethod
    def constraint(index: int) -> "Branch":
        if index < 1:
            raise UsageError("constraint branch indices are 1-based")
        return Branch("constraint", index)


OBJECTIVE = Branch("objective")


@dataclass(frozen=True)
class Oracle:
    """Value plus subgradient access for one function.

    value     : x -> float
    grad      : x -> vector; gradient a.e., a fixed deterministic subgradient
                at kinks
    dir_grad  : (x, v) -> vector F with <F, v> equal to the one-sided
                directional derivative at x along v; None when the problem is
                only used with the randomized inner search
    """

    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    dir_grad: Callable[[Vector, Vector], Vector] | None = None


@dataclass(frozen=True)
class ProblemSpec:
    """Instance data plus the metadata the budgets and certificates need.

    lipschitz_m bounds both f and every g_i on the neighborhood_delta
    fattening of the feasible region.  nonconvexity_f / nonconvexity_g are
    upper bounds on the nonconvexity modulus of f and of the reduced
    constraint (0 for convex functions, None when unknown); the deterministic
    inner search's call budget is only checkable when they are known.
    p_star / known_optimum are None when unknown.
    """

    dim: int
    objective: Oracle
    constraints: tuple[Oracle, ...]
    lipschitz_m: float
    neighborhood_delta: float
    nonconvexity_f: float | None = None
    nonconvexity_g: float | None = None
    p_star: float | None = None
    known_optimum: Vector | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError("dim must be >= 1")
        if len(self.constraints) < 1:
            raise UsageError(
                "at least one constraint is required; model an unconstrained "
                "problem with the constant constraint g(x) = -1"
            )
        if not (self.lipschitz_m > 0 and np.isfinite(self.lipschitz_m)):
            raise UsageError("lipschitz_m must be positive and finite")
        if not (self.neighborhood_delta > 0 and np.isfinite(self.neighborhood_delta)):
            raise UsageError("neighborhood_delta must be positive and finite")


@dataclass(frozen=True)
class WeightedSubgradient:
    """One term of a convex combination ``zeta = sum_i w_i * vector_i``.

    ``point`` is where the oracle was queried, ``vector`` what it returned,
    ``branch`` which side of the max produced it.  ``direction`` records the
    query direction for directional-mode entries (None in gradient mode) so a
    verifier can re-run the same oracle call.
    """

    point: Vector
    vector: Vector
    branch: Branch
    weight: float
    direction: Vector | None = None


def _as_vector(x, dim: int | None = None) -> Vector:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise UsageError("expected a 1-D point, got shape %r" % (v.shape,))
    if dim is not None and v.size != dim:
        raise UsageError("expected dimension %d, got %d" % (dim, v.size))
    if not np.all(np.isfinite(v)):
        raise UsageError("non-finite entries in input point")
    return v


def _finite_value(val, what: str) -> float:
    val = float(val)
    if not np.isfinite(val):
        raise OracleError("non-finite value from %s" % what)
    return val


def _finite_vector(vec, dim: int, what: str) -> Vector:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (dim,):
        raise OracleError("%s returned shape %r, expected (%d,)" % (what, vec.shape, dim))
    if not np.all(np.isfinite(vec)):
        raise OracleError("non-finite entries from %s" % what)
    return vec


class ReducedConstraint:
    """View of ``g(x) = max_i g_i(x)`` over the original constraint list.

    Value ties between constraints are broken toward the lowest index.  In
    directional mode the attaining constraint with the largest directional
    derivative wins (lowest index among derivative ties); this is what makes
    <G(x, v), v> equal the directional derivative of the max.
    """

    def __init__(self, problem: ProblemSpec):
        self._problem = problem
        self._oracles = problem.constraints

    def value(self, z: Vector) -> tuple[float, int]:
        """Return (g(z), attaining 1-based index)."""
        best, best_i = -np.inf, 0
        for i, oracle in enumerate(self._oracles, start=1):
            vi = _finite_value(oracle.value(z), "constraint %d value" % i)
            if vi > best:
                best, best_i = vi, i
        return best, best_i

    def grad(self, z: Vector) -> tuple[float, Vector, int]:
        """Return (g(z), a.e. gradient of the attaining constraint, index)."""
        val, idx = self.value(z)
        vec = _finite_vector(
            self._oracles[idx - 1].grad(z), self._problem.dim, "constraint %d grad" % idx
        )
        return val, vec, idx

    def dir_grad(self, z: Vector, v: Vector) -> tuple[float, Vector, float, int]:
        """Return (g(z), directional subgradient, directional derivative, index)."""
        values = [
            _finite_value(o.value(z), "constraint %d value" % i)
            for i, o in enumerate(self._oracles, start=1)
        ]
        top = max(values)
        best = None
        for i, (vi, oracle) in enumerate(zip(values, self._oracles), start=1):
            if vi != top:
                continue
            if oracle.dir_grad is None:
                raise UsageError("constraint %d has no directional oracle" % i)
            vec = _finite_vector(oracle.dir_grad(z, v), self._problem.dim,
                                 "constraint %d dir_grad" % i)
            dd = float(vec @ v)
            if best is None or dd > best[1]:
                best = (vec, dd, i)
        assert best is not None
        return top, best[0], best[1], best[2]


def reduce_constraints(problem: ProblemSpec) -> ReducedConstraint:
    """Collapse the constraint list into the single max-form constraint."""
    return ReducedConstraint(problem)


class Subproblem:
    """Anchored subproblem h_x with joint-evaluation call accounting.

    One *subgradient call* evaluates f and g at a point together with the
    subgradient of the winning branch; one *value call* evaluates only the
    values.  These are the units the oracle-call budgets are stated in:
    ``subgrad_calls`` counts subgradient-oracle evaluations of h, matching
    the per-invocation budget formulas, while ``value_calls`` counts the
    value-only evaluations spent on descent tests.

    h(anchor) is recomputed from the anchor values rather than assumed 0,
    and anchors with g(anchor) > 0 are rejected where the caller requires
    feasibility (the inner searches do; the plain estimate in verify does
    not).
    """

    def __init__(self, problem: ProblemSpec, anchor: Vector,
                 anchor_values: tuple[float, float] | None = None):
        self.problem = problem
        self.anchor = _as_vector(anchor, problem.dim)
        self._g = ReducedConstraint(problem)
        self.subgrad_calls = 0
        self.value_calls = 0
        if anchor_values is None:
            f0 = _finite_value(problem.objective.value(self.anchor), "objective value")
            g0, _ = self._g.value(self.anchor)
            self.value_calls += 1
        else:
            f0, g0 = float(anchor_values[0]), float(anchor_values[1])
        self.f_anchor = f0
        self.g_anchor = g0
        # literal recomputation: equals 0 only because g(anchor) <= 0
        self.h_anchor = max(0.0, g0)

    # -- value-only event ---------------------------------------------------

    def value_full(self, z: Vector) -> tuple[float, float, float]:
        """Return (h(z), f(z), g(z)); one value call."""
        fz = _finite_value(self.problem.objective.value(z), "objective value")
        gz, _ = self._g.value(z)
        self.value_calls += 1
        return max(fz - self.f_anchor, gz), fz, gz

    def value(self, z: Vector) -> float:
        return self.value_full(z)[0]

    # -- subgradient events --------------------------------------------------

    def grad(self, z: Vector) -> tuple[Vector, Branch]:
        """A.e.-gradient of h at z; ties go to the objective branch."""
        fz = _finite_value(self.problem.objective.value(z), "objective value")
        if fz - self.f_anchor >= self._g.value(z)[0]:
            vec = _finite_vector(self.problem.objective.grad(z), self.problem.dim,
                                 "objective grad")
            branch = OBJECTIVE
        else:
            _, vec, idx = self._g.grad(z)
            branch = Branch.constraint(idx)
        self.subgrad_calls += 1
        return vec, branch

    def dir_grad(self, z: Vector, v: Vector) -> tuple[Vector, Branch, float, float]:
        """Directional subgradient of h at z along v.

        Returns (vector, branch, h(z), directional derivative).  Ties between
        the branches are split by comparing directional derivatives, the
        objective winning equalities.
        """
        if self.problem.objective.dir_grad is None:
            raise UsageError("objective has no directional oracle")
        fz = _finite_value(self.problem.objective.value(z), "objective value")
        fdiff = fz - self.f_anchor
        gz, g_vec, g_dd, idx = self._g.dir_grad(z, v)
        self.subgrad_calls += 1
        if fdiff > gz:
            vec = _finite_vector(self.problem.objective.dir_grad(z, v),
                                 self.problem.dim, "objective dir_grad")
            return vec, OBJECTIVE, fdiff, float(vec @ v)
        if fdiff < gz:
            return g_vec, Branch.constraint(idx), gz, g_dd
        vec = _finite_vector(self.problem.objective.dir_grad(z, v),
                             self.problem.dim, "objective dir_grad")
        f_dd = float(vec @ v)
        if f_dd >= g_dd:
            return vec, OBJECTIVE, fdiff, f_dd
        return g_vec, Branch.constraint(idx), gz, g_dd


def eval_h(anchor: Vector, z: Vector, problem: ProblemSpec) -> float:
    """Evaluate the anchored subproblem h_anchor(z) = max{f(z) - f(anchor), g(z)}."""
    sub = Subproblem(problem, anchor)
    return sub.value(_as_vector(z, problem.dim))


def h_subgradient(anchor: Vector, z: Vector, problem: ProblemSpec,
                  mode: OracleMode = OracleMode.AE_GRADIENT,
                  direction: Vector | None = None) -> tuple[Vector, Branch]:
    """Subgradient of h_anchor at z with the branch that produced it.

    In directional mode ``direction`` is required and the returned vector F
    satisfies <F, direction> equal to the directional derivative of h.
    """
    sub = Subproblem(problem, anchor)
    z = _as_vector(z, problem.dim)
    if mode is OracleMode.AE_GRADIENT:
        return sub.grad(z)
    if direction is None:
        raise UsageError("directional mode requires a direction")
    vec, branch, _, _ = sub.dir_grad(z, _as_vector(direction, problem.dim))
    return vec, branch


def segment_projection_coefficient(a: Vector, b: Vector) -> float:
    """t* in [0, 1] minimizing ||(1 - t) a + t b|| (projection of 0 on [a, b])."""
    d = a - b
    denom = float(d @ d)
    if denom == 0.0:
        return 0.0
    return min(1.0, max(0.0, float(a @ d) / denom))


def min_norm_on_segment(a: Vector, b: Vector) -> Vector:
    """Minimal-norm point of the segment [a, b]."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.size != b.size:
        raise UsageError("endpoints must share a dimension")
    t = segment_projection_coefficient(a, b)
    return (1.0 - t) * a + t * b


def sample_ball(center: Vector, radius: float, rng: np.random.Generator) -> Vector:
    """Uniform sample from the closed Euclidean ball B(center, radius).

    Draw order is fixed so runs replay bit-for-bit: n standard normals for
    the direction, then one uniform whose (1/n)-th power scales the radius.
    """
    n = center.size
    u = rng.standard_normal(n)
    norm = float(np.linalg.norm(u))
    while norm == 0.0:  # probability zero, but keep the draw order clean
        u = rng.standard_normal(n)
        norm = float(np.linalg.norm(u))
    r = radius * rng.random() ** (1.0 / n)
    return center + (r / norm) * u
