"""Brute-force checks that do not trust the solver.

Three layers: an exact-ish minimal-norm-point routine over a finite hull, a
sampled Goldstein subdifferential estimate built on it, and certificate /
constraint-qualification checkers that re-run every oracle themselves.  The
sampled hull is always a subset of the true Goldstein subdifferential, so
the estimate is a valid upper bound on dist(0, set): a small value proves
approximate stationarity, a large one only fails to prove it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (ProblemSpec, Subproblem, Vector, _as_vector,
                   reduce_constraints, sample_ball)
from .errors import UsageError
from .solver import GoldsteinCertificate

HULL_TOL = 1e-8
WEIGHT_SUM_TOL = 1e-12
VECTOR_MATCH_REL = 1e-9  # times the problem Lipschitz bound
SLACK_TOL = 1e-9
ESTIMATE_FACTOR = 1.1

HOLDS = "holds-empirically"
VIOLATED = "violated"

# frozen check names, in evaluation order; the first failure is the report's
# headline reason, and recompute mismatches are the "corrupt" class
CHECK_ORDER = (
    "weights-nonnegative",
    "weights-sum",
    "points-in-ball",
    "vector-recompute",
    "zeta-recompute",
    "zeta-norm-bound",
    "multiplier-split",
    "anchor-feasible",
    "complementary-slackness",
    "stationarity-estimate",
)
CORRUPT_CHECKS = frozenset({"vector-recompute", "zeta-recompute"})


@dataclass
class HullEstimate:
    """Minimal-norm point of conv(points) with a recoverable combination."""

    points: np.ndarray
    min_norm_point: Vector
    min_norm: float
    sample_count: int
    support_indices: list[int]
    support_weights: list[float]


def min_norm_over_hull(points, tol: float = HULL_TOL) -> HullEstimate:
    """Minimal-norm point of the convex hull of a finite point list.

    Wolfe-style vertex selection: keep a simplex of input points, project
    onto its affine hull, drop vertices that lose weight, and add the vertex
    minimizing <x, p> until the duality gap ||x||^2 - min_p <x, p> is at
    most tol.  The iterate norm is non-increasing; a failure to decrease is
    a numerical stall and stops with the current (still valid) point.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.size == 0:
        raise UsageError("empty point list")
    if not np.all(np.isfinite(pts)):
        raise UsageError("non-finite points")
    k, n = pts.shape

    start = int(np.argmin(np.einsum("ij,ij->i", pts, pts)))
    support = [start]
    weights = np.array([1.0])
    x = pts[start].copy()

    max_major = 64 * (n + 2) + 2 * k
    for _ in range(max_major):
        norm_sq = float(x @ x)
        if norm_sq == 0.0:
            break
        dots = pts @ x
        best = int(np.argmin(dots))
        if float(dots[best]) > norm_sq - tol:
            break
        if best in support:
            break  # stall: the best vertex is already represented
        support.append(best)
        weights = np.append(weights, 0.0)

        for _minor in range(2 * (n + 2)):
            sub = pts[support]
            s = len(support)
            # affine minimal-norm point: bordered normal equations
            border = np.zeros((s + 1, s + 1))
            border[:s, :s] = sub @ sub.T
            border[:s, s] = 1.0
            border[s, :s] = 1.0
            rhs = np.zeros(s + 1)
            rhs[s] = 1.0
            sol = np.linalg.lstsq(border, rhs, rcond=None)[0]
            lam = sol[:s]
            if np.all(lam > 1e-14):
                weights = lam
                break
            # step toward lam until the first coordinate hits zero
            diff = weights - lam
            mask = diff > 1e-14
            theta = float(np.min(weights[mask] / diff[mask])) if np.any(mask) else 1.0
            theta = min(1.0, max(0.0, theta))
            weights = (1.0 - theta) * weights + theta * lam
            weights[weights < 1e-14] = 0.0
            keep = weights > 0.0
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
                weights[keep] = 1.0
            support = [i for i, k_ in zip(support, keep) if k_]
            weights = weights[keep]
        total = float(weights.sum())
        if total <= 0.0:
            raise UsageError("degenerate weights in hull projection")
        weights = weights / total
        new_x = weights @ pts[support]
        if float(new_x @ new_x) > norm_sq:
            break  # numerical stall; keep the previous, valid point
        x = new_x

    return HullEstimate(points=pts, min_norm_point=x,
                        min_norm=float(np.linalg.norm(x)), sample_count=k,
                        support_indices=list(support),
                        support_weights=[float(w) for w in weights])


def goldstein_estimate(anchor, problem: ProblemSpec, delta: float,
                       n_samples: int, seed: int) -> HullEstimate:
    """Sampled upper bound on dist(0, Goldstein subdifferential of h_anchor).

    Samples are drawn one at a time from a single generator, so the first
    n points of a larger run coincide with a smaller run's points and the
    estimate can only shrink as n_samples grows.
    """
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    anchor = _as_vector(anchor, problem.dim)
    rng = np.random.default_rng(seed)
    sub = Subproblem(problem, anchor)
    grads = np.empty((n_samples, problem.dim))
    for i in range(n_samples):
        z = sample_ball(anchor, delta, rng)
        grads[i], _ = sub.grad(z)
    return min_norm_over_hull(grads)


@dataclass
class GcqReport:
    """Outcome of the empirical constraint-qualification probe."""

    outcome: str
    near_active: list[int]
    bound: float
    estimate: HullEstimate | None


def check_gcq(anchor, problem: ProblemSpec, a: float, b: float, c: float,
              n_samples: int = 1000, seed: int = 0) -> GcqReport:
    """Probe the (a, b, c) constraint qualification at a feasible anchor.

    Constraints with g_i(anchor) >= -c are near-active; their subgradients
    are sampled over B(anchor, a) and the hull of the union must keep norm
    at least b.  A hull norm below b is a genuine violation witness; at or
    above b (or with no near-active constraint) the result is only
    "holds-empirically", since sampling can never prove the qualification.
    """
    if not (a > 0 and b > 0 and c > 0):
        raise UsageError("a, b, c must be positive")
    anchor = _as_vector(anchor, problem.dim)
    near_active = [
        i for i, oracle in enumerate(problem.constraints, start=1)
        if float(oracle.value(anchor)) >= -c
    ]
    if not near_active:
        return GcqReport(outcome=HOLDS, near_active=[], bound=b, estimate=None)
    rng = np.random.default_rng(seed)
    grads = np.empty((n_samples * len(near_active), problem.dim))
    row = 0
    for i in near_active:
        oracle = problem.constraints[i - 1]
        for _ in range(n_samples):
            z = sample_ball(anchor, a, rng)
            grads[row] = np.asarray(oracle.grad(z), dtype=float)
            row += 1
    estimate = min_norm_over_hull(grads)
    outcome = VIOLATED if estimate.min_norm < b else HOLDS
    return GcqReport(outcome=outcome, near_active=near_active, bound=b,
                     estimate=estimate)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class CertificateReport:
    """Per-check outcomes; ``reason`` is the first failed check's name."""

    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def reason(self) -> str | None:
        for c in self.checks:
            if not c.passed:
                return c.name
        return None

    @property
    def corrupt(self) -> bool:
        return self.reason in CORRUPT_CHECKS


def check_certificate(cert: GoldsteinCertificate, problem: ProblemSpec,
                      slackness_samples: int = 10_000,
                      estimate_samples: int = 10_000, seed: int = 0,
                      stop_at_first_failure: bool = False) -> CertificateReport:
    """Re-verify a certificate against the problem oracles from scratch.

    Nothing inside the certificate is trusted: weights, ball membership,
    every stored subgradient, the recombined zeta, the multiplier split, and
    the sampled complementary-slackness and independent stationarity bounds
    are all recomputed.  Checks run in CHECK_ORDER; with
    stop_at_first_failure the remaining (possibly expensive) checks are
    skipped once the headline reason is known.
    """
    report = CertificateReport()
    m = problem.lipschitz_m
    delta = cert.delta
    anchor = _as_vector(cert.anchor, problem.dim)
    combo = cert.combination
    weights = np.array([w.weight for w in combo], dtype=float)

    def add(name: str, passed: bool, detail: str) -> bool:
        report.checks.append(CheckResult(name, bool(passed), detail))
        return stop_at_first_failure and not passed

    min_w = float(weights.min()) if weights.size else 0.0
    if add("weights-nonnegative", weights.size > 0 and min_w >= -1e-12,
           "min weight %.3g" % min_w):
        return report

    total = float(weights.sum())
    if add("weights-sum", abs(total - 1.0) <= WEIGHT_SUM_TOL,
           "sum %.17g" % total):
        return report

    far = max((float(np.linalg.norm(_as_vector(w.point, problem.dim) - anchor))
               for w in combo), default=0.0)
    if add("points-in-ball", far <= delta + 1e-12,
           "max distance %.17g vs delta %.17g" % (far, delta)):
        return report

    sub = Subproblem(problem, anchor)
    worst = 0.0
    for w in combo:
        point = _as_vector(w.point, problem.dim)
        if w.direction is None:
            expected, _ = sub.grad(point)
        else:
            expected, _, _, _ = sub.dir_grad(
                point, _as_vector(w.direction, problem.dim))
        worst = max(worst, float(np.linalg.norm(expected - np.asarray(w.vector))))
    if add("vector-recompute", worst <= VECTOR_MATCH_REL * m,
           "worst oracle mismatch %.3g (allowed %.3g)"
           % (worst, VECTOR_MATCH_REL * m)):
        return report

    recombined = np.zeros(problem.dim)
    for w in combo:
        recombined += w.weight * np.asarray(w.vector, dtype=float)
    zeta = _as_vector(cert.zeta, problem.dim)
    resid = float(np.linalg.norm(recombined - zeta))
    if add("zeta-recompute", resid <= VECTOR_MATCH_REL * m,
           "residual %.3g (allowed %.3g)" % (resid, VECTOR_MATCH_REL * m)):
        return report

    znorm = float(np.linalg.norm(zeta))
    if add("zeta-norm-bound", znorm <= cert.eps_effective * (1.0 + 1e-12),
           "||zeta|| = %.17g vs eps = %.17g" % (znorm, cert.eps_effective)):
        return report

    gamma0 = float(sum(w.weight for w in combo if w.branch.is_objective))
    gamma = 1.0 - gamma0
    split_ok = (abs(gamma0 - cert.gamma0) <= 1e-12
                and abs(gamma - cert.gamma) <= 1e-12)
    if gamma0 > 0.0:
        lam = gamma / gamma0
        split_ok = split_ok and cert.lam is not None and (
            abs(cert.lam - lam) <= 1e-9 * max(1.0, abs(lam)))
    else:
        split_ok = split_ok and cert.lam is None
    if add("multiplier-split", split_ok,
           "gamma0 %.17g vs stored %.17g" % (gamma0, cert.gamma0)):
        return report

    reduced = reduce_constraints(problem)
    g_anchor, _ = reduced.value(anchor)
    if add("anchor-feasible", g_anchor <= 1e-12, "g(anchor) = %.17g" % g_anchor):
        return report

    slack_bound = 3.0 * m * delta + SLACK_TOL
    slack_max = 0.0
    if cert.gamma > 0.0 and slackness_samples > 0:
        rng = np.random.default_rng(seed)
        for _ in range(slackness_samples):
            z = sample_ball(anchor, delta, rng)
            gval, _ = reduced.value(z)
            slack_max = max(slack_max, abs(cert.gamma * gval))
    if add("complementary-slackness", slack_max <= slack_bound,
           "max |gamma*g| = %.17g vs bound %.17g" % (slack_max, slack_bound)):
        return report

    estimate = goldstein_estimate(anchor, problem, delta, estimate_samples,
                                  seed=seed + 1)
    limit = ESTIMATE_FACTOR * cert.eps_effective
    add("stationarity-estimate", estimate.min_norm <= limit,
        "sampled estimate %.17g vs limit %.17g" % (estimate.min_norm, limit))
    return report
