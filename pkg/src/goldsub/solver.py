"""Outer feasible-descent loop and stationarity certificates.

The driver repeats: run an inner minimal-norm search at the current iterate
x_k; on Stationary stop, on Descent step x_{k+1} = x_k - delta * zeta/||zeta||.
Every accepted step lowers f by at least C * delta * eps and keeps
g(x_{k+1}) <= -C * delta * eps, with C = 1/4 for the randomized search and
1/3 for the deterministic one, so when the optimal value p_star is known the
step count is at most ceil((f(x_0) - p_star) / (C * delta * eps)).

Termination hands back a certificate: the convex combination of ball
subgradients behind the final small zeta, split into objective mass gamma0
and constraint mass gamma.  gamma0 > 0 yields the multiplier
lambda = gamma / gamma0 and, with a constraint-qualification level sigma,
approximate KKT residuals; gamma0 = 0 still certifies Fritz-John
stationarity.
"""

from __future__ import annotations

import math
import time
import warnings as _pywarn
from dataclasses import dataclass, field

import numpy as np

from .core import (ProblemSpec, Vector, WeightedSubgradient, _as_vector,
                   reduce_constraints, sample_ball)
from .errors import (BudgetExceededError, CertificationError,
                     InfeasibleStartError, UsageError)
from .inner_bisect import C_BISECT, bisect_call_budget, bisect_search
from .inner_rand import C_RAND, STATIONARY, rand_call_budget, rand_search

RAND = "rand"
BISECT = "bisect"

# fallback inner call cap when nonconvexity moduli are unknown and the
# deterministic budget cannot be formed
_UNBOUNDED_CAP = 10_000_000


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one solve.

    ``target_eps`` is the stationarity tolerance itself in Fritz-John mode.
    In KKT mode it is the KKT accuracy target and the loop runs at the
    tighter eps_effective = sigma * eps / (eps + sigma + M).  ``tau`` is the
    total failure probability granted to the randomized inner search across
    the whole run; the deterministic search ignores it.
    """

    delta: float
    target_eps: float
    inner: str = RAND
    kkt_mode: bool = False
    gcq_sigma: float | None = None
    tau: float = 0.1
    seed: int = 0
    outer_cap: int = 1_000_000
    inner_call_cap: int | None = None
    slackness_samples: int = 1000
    collect_trajectory: bool = False

    def __post_init__(self):
        if not (self.delta > 0 and self.target_eps > 0):
            raise UsageError("delta and target_eps must be positive")
        if self.inner not in (RAND, BISECT):
            raise UsageError("inner must be %r or %r, got %r"
                             % (RAND, BISECT, self.inner))
        if self.kkt_mode:
            if self.gcq_sigma is None or not self.gcq_sigma > 0:
                raise UsageError("kkt_mode requires a positive gcq_sigma")
        if self.inner == RAND and not 0.0 < self.tau < 1.0:
            # tau = 0 would make the confidence budget infinite
            raise UsageError("tau must lie in (0, 1) for the randomized inner search")
        if self.outer_cap < 1:
            raise UsageError("outer_cap must be at least 1")
        if self.inner_call_cap is not None and self.inner_call_cap < 1:
            raise UsageError("inner_call_cap must be at least 1")
        if self.slackness_samples < 0:
            raise UsageError("slackness_samples must be nonnegative")

    def eps_effective(self, lipschitz_m: float) -> float:
        if not self.kkt_mode:
            return self.target_eps
        eps, sigma = self.target_eps, self.gcq_sigma
        return sigma * eps / (eps + sigma + lipschitz_m)

    def descent_fraction(self) -> float:
        return C_RAND if self.inner == RAND else C_BISECT


@dataclass
class GoldsteinCertificate:
    """Checkable witness that the anchor is approximately stationary.

    ``combination`` reproduces zeta as sum(w_i * vector_i); every point lies
    in the closed delta-ball around the anchor, and objective/constraint
    branch tags split the unit weight mass into gamma0 and gamma.  ``lam``
    is gamma/gamma0, or None when gamma0 = 0 (Fritz-John only).  The kkt_*
    fields are present exactly when the solve ran in KKT mode with
    gamma0 > 0.  slack_max is the sampled maximum of |gamma * g(z)| over the
    ball, which the analytic bound slack_bound = 3*M*delta (+ tolerance)
    must dominate.
    """

    anchor: Vector
    zeta: Vector
    zeta_norm: float
    combination: list[WeightedSubgradient]
    gamma0: float
    gamma: float
    lam: float | None
    eps_effective: float
    fj_eta_bound: float
    delta: float
    lipschitz_m: float
    f_anchor: float
    g_anchor: float
    per_constraint_g: list[float]
    kkt_eps: float | None = None
    kkt_eta: float | None = None
    kkt_lambda_bound: float | None = None
    gcq_sigma: float | None = None
    slack_samples: int = 0
    slack_max: float = 0.0
    slack_bound: float = 0.0
    warnings: list[str] = field(default_factory=list)


@dataclass
class SolveTrace:
    """Per-iteration descent record plus run totals.

    ``records[k]`` describes iterate x_k and the inner run performed there.
    Oracle calls count joint (value + subgradient) evaluations; value_calls
    count value-only evaluations (descent tests and the initial feasibility
    check).  wall_time_s is informational and excluded from serialized
    traces so that equal manifests produce byte-identical files.
    """

    records: list[dict]
    outer_steps: int
    oracle_calls: int
    value_calls: int
    eps_effective: float
    delta: float
    inner: str
    descent_fraction: float
    lemma_bound: int | None
    tau_prime: float | None
    call_cap: int
    wall_time_s: float


def extract_multiplier(combination: list[WeightedSubgradient]):
    """Split unit weight mass into (gamma0, gamma, lambda).

    gamma0 is the objective-branch mass, gamma = 1 - gamma0, and
    lambda = gamma/gamma0 when gamma0 > 0, else None.  Pure single-branch
    combinations short-circuit to exact 0/1 so downstream code can compare
    against literal zero.
    """
    has_obj = any(w.branch.is_objective for w in combination)
    has_con = any(not w.branch.is_objective for w in combination)
    if has_obj and not has_con:
        return 1.0, 0.0, 0.0
    if has_con and not has_obj:
        return 0.0, 1.0, None
    gamma0 = float(sum(w.weight for w in combination if w.branch.is_objective))
    gamma = 1.0 - gamma0
    return gamma0, gamma, gamma / gamma0


def certify(anchor: Vector, combination: list[WeightedSubgradient],
            problem: ProblemSpec, config: SolverConfig,
            zeta: Vector | None = None, rng: np.random.Generator | None = None,
            anchor_values: tuple[float, float] | None = None,
            eps_tilde: float | None = None) -> GoldsteinCertificate:
    """Assemble and self-check the certificate for a stationary anchor.

    Any failed internal check raises CertificationError: these conditions
    are guaranteed by the inner-loop contract, so a violation means a bug or
    broken metadata, never a user error.  ``zeta`` defaults to the
    recombined sum; passing the solver's own accumulated zeta keeps the
    recombination residual an honest measurement.
    """
    anchor = _as_vector(anchor, problem.dim)
    if not combination:
        raise CertificationError("empty subgradient combination")
    m = problem.lipschitz_m
    delta = config.delta
    eps_t = eps_tilde if eps_tilde is not None else config.eps_effective(m)

    weights = np.array([w.weight for w in combination])
    if np.any(weights < 0.0):
        raise CertificationError("negative combination weight")
    if abs(float(weights.sum()) - 1.0) > 1e-12:
        raise CertificationError("combination weights sum to %.17g, not 1"
                                 % float(weights.sum()))
    recombined = np.zeros(problem.dim)
    for w in combination:
        recombined += w.weight * w.vector
    if zeta is None:
        zeta = recombined
    zeta = _as_vector(zeta, problem.dim)
    if float(np.linalg.norm(recombined - zeta)) > 1e-9 * m:
        raise CertificationError("stored zeta does not match its combination")
    zeta_norm = float(np.linalg.norm(zeta))
    if zeta_norm > eps_t:
        raise CertificationError(
            "zeta norm %.17g exceeds tolerance %.17g: inner loop contract broken"
            % (zeta_norm, eps_t))
    for w in combination:
        dist = float(np.linalg.norm(w.point - anchor))
        if dist > delta * (1.0 + 1e-12):
            raise CertificationError(
                "combination point at distance %.17g > delta = %g" % (dist, delta))

    reduced = reduce_constraints(problem)
    if anchor_values is not None:
        f_anchor, g_anchor = anchor_values
    else:
        f_anchor = problem.objective.value(anchor)
        g_anchor, _ = reduced.value(anchor)
    if g_anchor > 0.0:
        raise CertificationError("anchor infeasible: g = %.17g" % g_anchor)

    gamma0, gamma, lam = extract_multiplier(combination)

    slack_n = config.slackness_samples
    slack_max = 0.0
    slack_bound = 3.0 * m * delta + 1e-9
    if gamma > 0.0 and slack_n > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        for _ in range(slack_n):
            z = sample_ball(anchor, delta, rng)
            gval, _ = reduced.value(z)
            slack_max = max(slack_max, abs(gamma * gval))
        if slack_max > slack_bound:
            raise CertificationError(
                "sampled |gamma*g| = %.17g exceeds 3*M*delta bound %.17g: "
                "Lipschitz metadata understated" % (slack_max, slack_bound))

    warnings: list[str] = []
    kkt_eps = kkt_eta = kkt_lambda_bound = None
    if config.kkt_mode:
        if gamma0 > 0.0:
            sigma = config.gcq_sigma
            factor = (sigma + m) / (sigma - eps_t)
            kkt_eps = eps_t * factor
            kkt_eta = 3.0 * m * delta * factor
            kkt_lambda_bound = factor - 1.0
        else:
            msg = ("objective weight mass is zero: constraint qualification "
                   "failed empirically, certifying Fritz-John stationarity "
                   "only and leaving the multiplier undefined")
            warnings.append(msg)
            _pywarn.warn(msg)

    return GoldsteinCertificate(
        anchor=anchor, zeta=zeta, zeta_norm=zeta_norm,
        combination=list(combination), gamma0=gamma0, gamma=gamma, lam=lam,
        eps_effective=eps_t, fj_eta_bound=3.0 * m * delta, delta=delta,
        lipschitz_m=m, f_anchor=float(f_anchor), g_anchor=float(g_anchor),
        per_constraint_g=[float(c.value(anchor)) for c in problem.constraints],
        kkt_eps=kkt_eps, kkt_eta=kkt_eta, kkt_lambda_bound=kkt_lambda_bound,
        gcq_sigma=config.gcq_sigma if config.kkt_mode else None,
        slack_samples=slack_n if gamma > 0.0 else 0,
        slack_max=slack_max, slack_bound=slack_bound, warnings=warnings)


def solve(problem: ProblemSpec, config: SolverConfig, x0) -> tuple[GoldsteinCertificate, SolveTrace]:
    """Run the feasible-descent loop from x0 until stationarity.

    Returns (certificate, trace).  Raises InfeasibleStartError when
    g(x0) > 0, BudgetExceededError when an inner call cap or the outer cap
    is exhausted (with partial trace attached), and ModulusError when the
    deterministic search cannot honor its metadata.
    """
    if config.delta >= problem.neighborhood_delta:
        raise UsageError(
            "delta = %g must be below the problem neighborhood radius %g"
            % (config.delta, problem.neighborhood_delta))
    x = _as_vector(x0, problem.dim).copy()
    m = problem.lipschitz_m
    eps_t = config.eps_effective(m)
    c_frac = config.descent_fraction()
    reduced = reduce_constraints(problem)

    f_x = float(problem.objective.value(x))
    g_x, _ = reduced.value(x)
    value_calls = 1  # initial feasibility check
    if g_x > 0.0:
        raise InfeasibleStartError("g(x0) = %.17g > 0: start must be feasible" % g_x)

    lemma_bound = None
    tau_prime = None
    if problem.p_star is not None:
        gap0 = f_x - problem.p_star
        lemma_bound = max(1, math.ceil(gap0 / (c_frac * config.delta * eps_t)))
    if config.inner == RAND:
        if problem.p_star is not None:
            outer_guess = max(1, math.ceil(
                4.0 * (f_x - problem.p_star) / (config.delta * eps_t)))
        else:
            outer_guess = config.outer_cap
        tau_prime = config.tau / outer_guess

    if config.inner_call_cap is not None:
        call_cap = config.inner_call_cap
    elif config.inner == RAND:
        call_cap = 4 * rand_call_budget(m, eps_t, tau_prime)
    else:
        if problem.nonconvexity_f is None or problem.nonconvexity_g is None:
            call_cap = _UNBOUNDED_CAP
        else:
            call_cap = 4 * bisect_call_budget(
                m, eps_t, problem.nonconvexity_f + problem.nonconvexity_g)

    rng = np.random.default_rng(config.seed)
    records: list[dict] = []
    oracle_calls = 0
    prev_direction: Vector | None = None
    started = time.perf_counter()

    def partial_trace() -> SolveTrace:
        return SolveTrace(records=records, outer_steps=len(records) - 1,
                          oracle_calls=oracle_calls, value_calls=value_calls,
                          eps_effective=eps_t, delta=config.delta,
                          inner=config.inner, descent_fraction=c_frac,
                          lemma_bound=lemma_bound, tau_prime=tau_prime,
                          call_cap=call_cap,
                          wall_time_s=time.perf_counter() - started)

    k = 0
    while True:
        try:
            if config.inner == RAND:
                res = rand_search(x, problem, config.delta, eps_t, rng,
                                  call_cap, anchor_values=(f_x, g_x),
                                  collect_trajectory=config.collect_trajectory)
            else:
                res = bisect_search(x, problem, config.delta, eps_t, call_cap,
                                    v0=prev_direction, anchor_values=(f_x, g_x),
                                    collect_trajectory=config.collect_trajectory)
        except BudgetExceededError as err:
            err.partial = dict(err.partial or {})
            err.partial["trace"] = partial_trace()
            raise
        oracle_calls += res.oracle_calls
        value_calls += res.value_calls
        records.append({
            "k": k, "x": [float(v) for v in x], "f": f_x, "g": g_x,
            "zeta_norm": res.zeta_norm, "inner_outcome": res.outcome,
            "inner_oracle_calls": res.oracle_calls,
            "inner_value_calls": res.value_calls,
            "inner_iterations": res.iterations,
            "inner_probe_ties": res.probe_ties,
            "descent_amount": res.descent_amount,
        })
        if res.outcome == STATIONARY:
            break
        prev_direction = res.zeta / res.zeta_norm
        x = res.descent_point.copy()
        f_x, g_x = res.descent_f, res.descent_g
        k += 1
        if lemma_bound is not None and k > lemma_bound:
            raise BudgetExceededError(
                "outer step %d exceeds the descent-lemma bound %d: Lipschitz "
                "metadata or p_star is wrong, or an oracle is broken"
                % (k, lemma_bound), partial={"trace": partial_trace()})
        if k > config.outer_cap:
            raise BudgetExceededError(
                "outer cap %d exhausted" % config.outer_cap,
                partial={"trace": partial_trace()})

    trace = partial_trace()
    cert = certify(x, res.combination, problem, config, zeta=res.zeta,
                   rng=rng, anchor_values=(f_x, g_x), eps_tilde=eps_t)
    return cert, trace
