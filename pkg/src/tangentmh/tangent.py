"""Metropolis-Hastings kernel with tangent Gaussian proposals.

The proposal at a point x is the Gaussian matching the local second-order
expansion of the log-density: precision equal to the negated Hessian, mean
equal to the full Newton step.  Drawing from it and applying the usual MH
ratio gives a kernel that is exact (100% acceptance) on Gaussian targets
and needs no tuning elsewhere; running the same construction without the
accept/reject step is plain Newton iteration, which is how burn-in starts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .linalg import MvnDistribution, NotPositiveDefinite, cholesky, mvn_logpdf, mvn_sample
from .targets import DifferentiableTarget, EvalCost, EvalResult
from .trace import ChainTrace

__all__ = [
    "HessianNotNegativeDefinite",
    "GaussianProposal",
    "ChainConfig",
    "StepRecord",
    "StepCache",
    "build_proposal",
    "newton_step",
    "tangent_step",
    "run_chain",
]


class HessianNotNegativeDefinite(Exception):
    """The log-density Hessian failed to be negative definite at a point.

    Wraps the Cholesky failure on the negated Hessian; ``pivot`` is the
    index where positivity broke, ``point`` the offending location.
    """

    def __init__(self, point: np.ndarray, pivot: int):
        self.point = np.asarray(point, dtype=float)
        self.pivot = pivot
        super().__init__(
            f"Hessian not negative definite at {self.point} (pivot {pivot})"
        )


@dataclass(frozen=True)
class GaussianProposal:
    """Tangent Gaussian fitted at ``origin``: mean is the Newton step from
    there, precision the negated Hessian."""

    origin: np.ndarray
    dist: MvnDistribution

    def log_q_at(self, point: np.ndarray) -> float:
        return mvn_logpdf(self.dist, point)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return mvn_sample(self.dist, rng)


@dataclass(frozen=True)
class ChainConfig:
    """Iteration plan for one chain.

    ``n_newton`` deterministic Newton iterations open the burn-in (default:
    half of it), the remaining burn-in steps are discarded MH transitions,
    then ``n_samples`` recorded ones.
    """

    n_burnin: int = 0
    n_samples: int = 0
    n_newton: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.n_burnin < 0 or self.n_samples < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.n_newton is not None and not 0 <= self.n_newton <= self.n_burnin:
            raise ValueError("n_newton must lie within the burn-in budget")

    @property
    def newton_iterations(self) -> int:
        if self.n_newton is None:
            return self.n_burnin // 2
        return self.n_newton


@dataclass(frozen=True)
class StepRecord:
    """One MH transition: what was proposed and how it was decided."""

    proposed: np.ndarray
    accepted: bool
    log_ratio: float
    cost: EvalCost
    hessian_failure: bool = False


@dataclass(frozen=True)
class StepCache:
    """Log-density and proposal at the chain's current point, carried
    between steps so each transition evaluates only the proposed point."""

    value: float
    proposal: GaussianProposal


def _fit_proposal(x: np.ndarray, res: EvalResult) -> GaussianProposal:
    try:
        factor = cholesky(-res.hessian)
    except NotPositiveDefinite as err:
        raise HessianNotNegativeDefinite(x, err.pivot) from err
    # Newton step: mean = x + (-H)^{-1} g, solved against the factor
    mean = x + factor.solve(res.gradient)
    return GaussianProposal(x, MvnDistribution(mean, factor))


def build_proposal(target: DifferentiableTarget, x) -> GaussianProposal:
    """Fit the tangent Gaussian at ``x``.

    Raises
    ------
    HessianNotNegativeDefinite
        If the negated Hessian at ``x`` has no Cholesky factor, i.e. the
        target is not verifiably log-concave there.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    res = target.evaluate(x, gradient=True, hessian=True)
    return _fit_proposal(x, res)


def newton_step(target: DifferentiableTarget, x) -> np.ndarray:
    """One full Newton step (the tangent proposal mean); no randomness."""
    return build_proposal(target, x).dist.mean


def tangent_step(
    target: DifferentiableTarget,
    x_old,
    cached_old: StepCache | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, StepRecord, StepCache]:
    """One MH transition with tangent Gaussian proposals.

    When ``cached_old`` carries the evaluation at ``x_old`` from the
    previous step, only the proposed point is evaluated, halving the cost
    relative to re-evaluating the current point every iteration (the two
    are mathematically identical).  The acceptance ratio is formed in log
    space and a ratio >= 1 short-circuits before the uniform deviate is
    drawn, keeping the random stream layout reproducible.

    A Hessian failure at the *proposed* point rejects the proposal and
    flags the record (log_ratio -inf); a failure at the current point is
    fatal, since the chain cannot continue from unverifiable ground.
    """
    x_old = np.atleast_1d(np.asarray(x_old, dtype=float))
    cost = EvalCost()
    if cached_old is None:
        res_old = target.evaluate(x_old, gradient=True, hessian=True)
        cost = cost + res_old.cost
        f_old = res_old.value
        prop_old = _fit_proposal(x_old, res_old)
    else:
        f_old = cached_old.value
        prop_old = cached_old.proposal

    x_prop = prop_old.sample(rng)
    log_q_prop = prop_old.log_q_at(x_prop)

    try:
        res_prop = target.evaluate(x_prop, gradient=True, hessian=True)
        cost = cost + res_prop.cost
        prop_prop = _fit_proposal(x_prop, res_prop)
    except HessianNotNegativeDefinite:
        # proposal landed outside the verifiably log-concave region
        record = StepRecord(x_prop, False, -math.inf, cost, hessian_failure=True)
        return x_old, record, StepCache(f_old, prop_old)

    log_q_old = prop_prop.log_q_at(x_old)
    log_ratio = (res_prop.value - f_old) + (log_q_old - log_q_prop)

    if log_ratio >= 0.0:
        accepted = True
    else:
        accepted = rng.random() < math.exp(log_ratio)

    record = StepRecord(x_prop, accepted, float(log_ratio), cost)
    if accepted:
        return x_prop, record, StepCache(res_prop.value, prop_prop)
    return x_old, record, StepCache(f_old, prop_old)


def run_chain(
    target: DifferentiableTarget,
    x0,
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> ChainTrace:
    """Run Newton burn-in, MH burn-in, then record ``cfg.n_samples`` steps.

    The Newton phase has no reject-and-stay escape: a Hessian failure
    there propagates.  Counters are cumulative from the start of the run,
    burn-in included.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    t0 = time.perf_counter()

    totals = EvalCost()
    for _ in range(cfg.newton_iterations):
        res = target.evaluate(x, gradient=True, hessian=True)
        totals = totals + res.cost
        x = _fit_proposal(x, res).dist.mean

    cache: StepCache | None = None
    n_mh_burnin = cfg.n_burnin - cfg.newton_iterations
    for _ in range(n_mh_burnin):
        x, rec, cache = tangent_step(target, x, cache, rng)
        totals = totals + rec.cost

    n = cfg.n_samples
    samples = np.empty((n, x.shape[0]))
    accepted = np.empty(n, dtype=bool)
    n_value = np.empty(n, dtype=np.int64)
    n_gradient = np.empty(n, dtype=np.int64)
    n_hessian = np.empty(n, dtype=np.int64)
    failures = 0
    for i in range(n):
        x, rec, cache = tangent_step(target, x, cache, rng)
        totals = totals + rec.cost
        samples[i] = x
        accepted[i] = rec.accepted
        failures += int(rec.hessian_failure)
        n_value[i] = totals.n_value
        n_gradient[i] = totals.n_gradient
        n_hessian[i] = totals.n_hessian

    meta = {
        "sampler": "tangent-mh",
        "seed": cfg.seed,
        "config": {
            "n_burnin": cfg.n_burnin,
            "n_samples": cfg.n_samples,
            "n_newton": cfg.newton_iterations,
        },
        "hessian_failures": failures,
        "final_cost": {
            "n_value": totals.n_value,
            "n_gradient": totals.n_gradient,
            "n_hessian": totals.n_hessian,
        },
    }
    return ChainTrace(
        samples.reshape(n, -1) if n else np.empty((0, x.shape[0])),
        accepted,
        n_value,
        n_gradient,
        n_hessian,
        time.perf_counter() - t0,
        meta,
    )
