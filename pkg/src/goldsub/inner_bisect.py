"""Deterministic minimal-norm search driven by ray bisection.

Same outer contract as the randomized search, but the fresh subgradient of
each round is found deterministically: when the step to
``anchor - delta * zeta/||zeta||`` fails the descent test, the restriction of
h to that ray (shifted by -eps * r / 2) must lose height between the far end
and the anchor, so somewhere along it the directional derivative is below
eps / 2.  A slope-guided bisection finds such a point; the directional
subgradient there shrinks ||zeta|| via the usual segment projection.

Requires directional oracles (<F(x, v), v> equal to the one-sided directional
derivative) and, for the call budget to be checkable, finite nonconvexity
moduli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ProblemSpec, Subproblem, Vector, _as_vector,
                   segment_projection_coefficient)
from .errors import BudgetExceededError, ModulusError, UsageError
from .inner_rand import DESCENT, STATIONARY, InnerResult, _Combination

# descent fraction certified by the deterministic search: h drops by at
# least delta * eps / 3 on every returned step
C_BISECT = 1.0 / 3.0


@dataclass(frozen=True)
class RayRestriction:
    """The segment r in [0, delta] |-> anchor + (r - delta) * direction.

    r = 0 is the far end (the rejected trial step), r = delta the anchor.
    ``direction`` must be a unit vector.
    """

    anchor: Vector
    direction: Vector
    delta: float
    eps: float

    def __post_init__(self):
        if not (self.delta > 0 and self.eps > 0):
            raise UsageError("delta and eps must be positive")
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-12:
            raise UsageError("ray direction must be unit norm (got %.17g)" % norm)

    def point_at(self, r: float) -> Vector:
        if not 0.0 <= r <= self.delta:
            raise UsageError("ray parameter %g outside [0, %g]" % (r, self.delta))
        return self.anchor + (r - self.delta) * self.direction


def default_max_steps(delta: float) -> int:
    """Step cap: generous headroom plus the bisection depth float can resolve."""
    return 64 + int(math.ceil(math.log2(delta / np.spacing(delta))))


def bisect_negative_slope(ray: RayRestriction, sub: Subproblem,
                          l_far: float, l_anchor: float,
                          max_steps: int | None = None):
    """Find r with directional h-slope below eps/2 at ray.point_at(r).

    ``l_far`` and ``l_anchor`` are the endpoint values of
    l(r) = h(point_at(r)) - eps * r / 2, which the caller has already paid
    for; l_far > l_anchor is required (the average slope of l is negative).

    Maintains a bracket [a, b] whose average l-slope never rises above the
    initial one: probe the midpoint; if the shifted slope there is negative,
    return; otherwise recurse into whichever half has the smaller (more
    negative) average l-slope, ties toward the left.  Probe-test equality is
    a failure (bisection continues) and is tallied in the returned tie count.

    Returns (r, vector, branch, h_at_r, probes, ties).  Raises ModulusError
    when the step cap or float resolution is exhausted, which signals
    understated nonconvexity metadata or a broken directional oracle.
    """
    if not l_far > l_anchor:
        raise UsageError(
            "restriction endpoints do not lose height: l(0) = %.17g <= l(delta) = %.17g"
            % (l_far, l_anchor))
    if max_steps is None:
        max_steps = default_max_steps(ray.delta)
    a, b = 0.0, ray.delta
    la, lb = l_far, l_anchor
    half_eps = ray.eps / 2.0
    probes = 0
    ties = 0
    for _ in range(max_steps):
        m = 0.5 * (a + b)
        if not a < m < b:  # float resolution exhausted
            break
        z = ray.point_at(m)
        vec, branch, h_m, dd = sub.dir_grad(z, ray.direction)
        probes += 1
        slope = dd - half_eps
        if slope < 0.0:
            return m, vec, branch, h_m, probes, ties
        if slope == 0.0:
            ties += 1
        lm = h_m - half_eps * m
        if (lm - la) / (m - a) <= (lb - lm) / (b - m):
            b, lb = m, lm
        else:
            a, la = m, lm
    raise ModulusError(
        "no negative-slope point after %d probes on [%.3g, %.3g]; nonconvexity "
        "metadata understated or directional oracle broken" % (probes, a, b))


def bisect_call_budget(m_lipschitz: float, eps: float,
                       nonconvexity_total: float) -> int:
    """Per-invocation subgradient-call budget for the deterministic search."""
    return math.ceil(16.0 * m_lipschitz ** 2 / eps ** 2) * (
        1 + math.floor(12.0 * nonconvexity_total / eps))


def bisect_search(anchor: Vector, problem: ProblemSpec, delta: float, eps: float,
                  call_cap: int, v0: Vector | None = None,
                  anchor_values: tuple[float, float] | None = None,
                  max_steps: int | None = None,
                  collect_trajectory: bool = False) -> InnerResult:
    """Run the deterministic search at a feasible anchor.

    ``v0`` seeds the first directional query (callers that iterate pass the
    previous step direction; the default is the first basis vector).  The
    routine is seed-free: equal inputs give bit-identical results.
    """
    if not (delta > 0 and eps > 0):
        raise UsageError("delta and eps must be positive")
    anchor = _as_vector(anchor, problem.dim)
    sub = Subproblem(problem, anchor, anchor_values)
    if sub.g_anchor > 0.0:
        raise UsageError("infeasible anchor: g(anchor) = %g > 0" % sub.g_anchor)
    if v0 is None:
        v0 = np.zeros(problem.dim)
        v0[0] = 1.0
    else:
        v0 = _as_vector(v0, problem.dim)
        norm0 = float(np.linalg.norm(v0))
        if norm0 == 0.0:
            raise UsageError("v0 must be nonzero")
        v0 = v0 / norm0

    zeta, branch, _, _ = sub.dir_grad(anchor, v0)
    combo = _Combination(anchor, zeta, branch, direction=v0)
    iterations = 0
    ties_total = 0
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

    third = delta * eps / 3.0
    while True:
        norm = float(np.linalg.norm(zeta))
        if norm <= eps:
            return InnerResult(STATIONARY, zeta, combo.export(),
                               sub.subgrad_calls, sub.value_calls, iterations,
                               probe_ties=ties_total, trajectory=trajectory)
        direction = zeta / norm
        trial = anchor - delta * direction
        h_trial, f_trial, g_trial = sub.value_full(trial)
        descent = sub.h_anchor - h_trial
        if descent >= third:
            return InnerResult(DESCENT, zeta, combo.export(),
                               sub.subgrad_calls, sub.value_calls, iterations,
                               descent_amount=descent, descent_point=trial,
                               descent_f=f_trial, descent_g=g_trial,
                               probe_ties=ties_total, trajectory=trajectory)
        if sub.subgrad_calls >= call_cap:
            raise BudgetExceededError(
                "inner call cap %d exhausted at ||zeta|| = %.3g" % (call_cap, norm),
                partial={"zeta": zeta, "combination": combo.export(),
                         "oracle_calls": sub.subgrad_calls,
                         "value_calls": sub.value_calls,
                         "iterations": iterations})

        ray = RayRestriction(anchor=anchor, direction=direction,
                             delta=delta, eps=eps)
        l_far = h_trial  # l(0) = h(trial) - eps*0/2
        l_anchor = sub.h_anchor - eps * delta / 2.0
        r, vec, branch, _, _, ties = bisect_negative_slope(
            ray, sub, l_far, l_anchor, max_steps=max_steps)
        ties_total += ties
        t = segment_projection_coefficient(zeta, vec)
        zeta = (1.0 - t) * zeta + t * vec
        combo.segment_update(t, ray.point_at(r), vec, branch, direction=direction)
        iterations += 1
        if collect_trajectory:
            snapshot()
