"""Randomized minimal-norm search over the Goldstein subdifferential.

Given an anchor x, a radius delta, and a tolerance eps, the search maintains
a convex combination zeta of subgradients of the anchored subproblem h_x
taken at points of B(x, delta).  Each round either certifies descent
(h drops by more than delta * ||zeta|| / 4 along -zeta) or shrinks ||zeta||
by projecting 0 onto the segment between zeta and a fresh subgradient sampled
on the would-be descent ray.  It stops when ||zeta|| <= eps (Stationary) or
when the descent test fails, i.e. succeeds as a step (Descent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (ProblemSpec, Subproblem, Vector, WeightedSubgradient,
                   _as_vector, sample_ball, segment_projection_coefficient)
from .errors import BudgetExceededError, UsageError

DESCENT = "descent"
STATIONARY = "stationary"

# descent fraction certified by the randomized search: h drops by more than
# delta * ||zeta|| / 4 > delta * eps / 4 on every returned step
C_RAND = 0.25


@dataclass
class InnerResult:
    """Outcome of one inner-search invocation.

    zeta is always the convex combination of ``combination`` entries
    (weights nonnegative, summing to 1; points within delta of the anchor).
    ``oracle_calls`` counts subgradient-oracle evaluations of h -- the unit
    the per-invocation budgets are stated in; ``value_calls`` counts the
    value-only evaluations spent on descent tests.

    For Descent outcomes, ``descent_point = anchor - delta * zeta/||zeta||``
    is the accepted step, ``descent_amount = h(anchor) - h(descent_point)``,
    and ``descent_f``/``descent_g`` are the objective/constraint values at
    the step (so the caller can reuse the evaluation already paid for).
    """

    outcome: str
    zeta: Vector
    combination: list[WeightedSubgradient]
    oracle_calls: int
    value_calls: int
    iterations: int
    descent_amount: float | None = None
    descent_point: Vector | None = None
    descent_f: float | None = None
    descent_g: float | None = None
    probe_ties: int = 0
    trajectory: list[dict] = field(default_factory=list)

    @property
    def zeta_norm(self) -> float:
        return float(np.linalg.norm(self.zeta))


class _Combination:
    """Convex combination bookkeeping.

    A segment update with coefficient t rescales every existing weight by
    (1 - t) and appends the new term with weight t, so the weights stay on
    the simplex by construction.  The common (1 - t) products are kept in a
    single ``scale`` factor instead of touching every entry per round; the
    effective weight of entry i is ``raw[i] * scale``.  Zero-weight terms are
    dropped at export.
    """

    def __init__(self, point, vector, branch, direction=None):
        self.points = [point]
        self.vectors = [vector]
        self.branches = [branch]
        self.directions = [direction]
        self.raw = [1.0]
        self.scale = 1.0

    def segment_update(self, t: float, point, vector, branch, direction=None):
        if t == 1.0:
            # every previous weight becomes exactly 0
            self.points, self.vectors = [point], [vector]
            self.branches, self.directions = [branch], [direction]
            self.raw, self.scale = [1.0], 1.0
            return
        self.scale *= 1.0 - t
        if self.scale < 1e-250:  # fold before the shared factor underflows
            self.raw = [r * self.scale for r in self.raw]
            self.scale = 1.0
        self.points.append(point)
        self.vectors.append(vector)
        self.branches.append(branch)
        self.directions.append(direction)
        self.raw.append(t / self.scale)

    def weights(self) -> list[float]:
        return [r * self.scale for r in self.raw]

    def export(self) -> list[WeightedSubgradient]:
        out = []
        for p, v, b, d, w in zip(self.points, self.vectors, self.branches,
                                 self.directions, self.weights()):
            if w != 0.0:
                out.append(WeightedSubgradient(point=p, vector=v, branch=b,
                                               weight=w, direction=d))
        return out

    def recombine(self) -> Vector:
        acc = np.zeros_like(self.vectors[0])
        for w, v in zip(self.weights(), self.vectors):
            if w != 0.0:
                acc = acc + w * v
        return acc


def rand_call_budget(m_lipschitz: float, eps: float, tau: float) -> int:
    """Per-invocation subgradient-call budget met with probability >= 1 - tau."""
    if not 0.0 < tau < 1.0:
        raise UsageError("tau must lie in (0, 1)")
    return math.ceil(64.0 * m_lipschitz ** 2 / eps ** 2) * math.ceil(2.0 * math.log(1.0 / tau))


def rand_search(anchor: Vector, problem: ProblemSpec, delta: float, eps: float,
                rng: np.random.Generator, call_cap: int,
                anchor_values: tuple[float, float] | None = None,
                collect_trajectory: bool = False) -> InnerResult:
    """Run the randomized search at a feasible anchor.

    Parameters
    ----------
    anchor : feasible point (g(anchor) <= 0); UsageError otherwise.
    delta, eps : Goldstein radius and stationarity tolerance, both positive.
    rng : numpy Generator; all sampling flows through it, so equal seeds give
        bit-identical results.  Per round the draw order is: direction
        normals + radius uniform for the gradient-space ball, then one
        uniform for the segment point.
    call_cap : hard cap on subgradient calls; BudgetExceededError beyond it.
    anchor_values : (f(anchor), g(anchor)) if the caller already paid for
        them; otherwise one value call is spent here.
    collect_trajectory : record per-round diagnostics (norms, residuals) for
        invariant tests.
    """
    if not (delta > 0 and eps > 0):
        raise UsageError("delta and eps must be positive")
    anchor = _as_vector(anchor, problem.dim)
    sub = Subproblem(problem, anchor, anchor_values)
    if sub.g_anchor > 0.0:
        raise UsageError("infeasible anchor: g(anchor) = %g > 0" % sub.g_anchor)
    m = problem.lipschitz_m

    y0 = sample_ball(anchor, delta, rng)
    zeta, branch = sub.grad(y0)
    combo = _Combination(y0, zeta, branch)
    iterations = 0
    trajectory: list[dict] = []

    def snapshot():
        resid = float(np.linalg.norm(combo.recombine() - zeta))
        weights = combo.weights()
        trajectory.append({
            "zeta_norm": float(np.linalg.norm(zeta)),
            "recombine_residual": resid,
            "weight_sum": float(sum(weights)),
            "min_weight": float(min(weights)),
        })

    if collect_trajectory:
        snapshot()

    while True:
        norm = float(np.linalg.norm(zeta))
        if norm <= eps:
            return InnerResult(STATIONARY, zeta, combo.export(),
                               sub.subgrad_calls, sub.value_calls, iterations,
                               trajectory=trajectory)
        direction = zeta / norm
        trial = anchor - delta * direction
        h_trial, f_trial, g_trial = sub.value_full(trial)
        descent = sub.h_anchor - h_trial
        if descent > delta * norm / 4.0:
            return InnerResult(DESCENT, zeta, combo.export(),
                               sub.subgrad_calls, sub.value_calls, iterations,
                               descent_amount=descent, descent_point=trial,
                               descent_f=f_trial, descent_g=g_trial,
                               trajectory=trajectory)
        if sub.subgrad_calls >= call_cap:
            raise BudgetExceededError(
                "inner call cap %d exhausted at ||zeta|| = %.3g" % (call_cap, norm),
                partial={"zeta": zeta, "combination": combo.export(),
                         "oracle_calls": sub.subgrad_calls,
                         "value_calls": sub.value_calls,
                         "iterations": iterations})

        # perturb the descent direction inside a gradient-space ball whose
        # radius keeps the sampled ray aligned with zeta; half the admissible
        # upper bound
        u = norm ** 2 / (128.0 * m ** 2)
        r = 0.5 * norm * math.sqrt(max(0.0, 1.0 - (1.0 - u) ** 2))
        y = sample_ball(zeta, r, rng)
        y_norm = float(np.linalg.norm(y))
        s = anchor - (delta * rng.random() / y_norm) * y
        vec, branch = sub.grad(s)
        t = segment_projection_coefficient(zeta, vec)
        zeta = (1.0 - t) * zeta + t * vec
        combo.segment_update(t, s, vec, branch)
        iterations += 1
        if collect_trajectory:
            snapshot()
