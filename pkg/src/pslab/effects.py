"""Marginal log-odds treatment effects and their Monte Carlo ground truth."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logit

from . import rng as rngmod
from .cohort import assign_treatment, outcome_probability, sample_covariates, true_ps
from .errors import EstimationError, NoMatchesError, SeparationError


@dataclass(frozen=True)
class EffectEstimate:
    gamma1_hat: float
    method: str
    n_used: int
    strata_dropped: int = 0


def _arm_means(A, Y, weights):
    A = np.asarray(A)
    Y = np.asarray(Y, dtype=float)
    w = np.ones(Y.shape[0]) if weights is None else np.asarray(getattr(weights, "values", weights), dtype=float)
    t = A == 1
    c = ~t
    wt, wc = w[t].sum(), w[c].sum()
    if not (wt > 0 and wc > 0):
        raise EstimationError("both treatment arms need positive total weight")
    return float(w[t] @ Y[t] / wt), float(w[c] @ Y[c] / wc)


def marginal_effect(A, Y, weights=None, method="crude"):
    """Log-odds ratio from the saturated model ``logit P(Y=1|A) = g0 + g1*A``.

    The maximum-likelihood ``g1`` is ``logit(p1) - logit(p0)`` with ``pa`` the
    (weighted) outcome mean in arm ``a``.
    """
    p1, p0 = _arm_means(A, Y, weights)
    for arm, p in (("treated", p1), ("control", p0)):
        if p <= 0.0 or p >= 1.0:
            raise SeparationError(f"{arm} arm has a degenerate outcome (mean {p:g})")
    return EffectEstimate(float(logit(p1) - logit(p0)), method, int(np.asarray(A).shape[0]))


def matched_effect(cohort, matches, method="PSM"):
    if len(matches) == 0:
        raise NoMatchesError("matching produced no pairs")
    idx = np.concatenate([matches.pairs[:, 0], matches.pairs[:, 1]])
    est = marginal_effect(cohort.A[idx], cohort.Y[idx], method=method)
    return EffectEstimate(est.gamma1_hat, method, 2 * len(matches))


def stratified_effect(cohort, strata, method="PSS"):
    """Size-weighted mean of stratum-specific log-odds ratios.

    Strata with an empty arm or a degenerate outcome are dropped and the
    weights renormalized over the surviving strata.
    """
    A, Y = cohort.A, cohort.Y
    effects, sizes = [], []
    dropped = 0
    for s in range(1, strata.k + 1):
        mask = strata.stratum_of == s
        if not mask.any():
            dropped += 1
            continue
        try:
            effects.append(marginal_effect(A[mask], Y[mask]).gamma1_hat)
        except EstimationError:
            dropped += 1
            continue
        sizes.append(int(mask.sum()))
    if not effects:
        raise EstimationError("every stratum was dropped; no stratified estimate")
    sizes = np.asarray(sizes, dtype=float)
    gamma = float(np.dot(sizes / sizes.sum(), effects))
    return EffectEstimate(gamma, method, int(sizes.sum()), dropped)


@dataclass(frozen=True)
class TruthReport:
    conditional_gamma1: float
    marginal_ate: float
    marginal_ate_se: float
    marginal_att: float
    marginal_att_se: float
    mc_reps: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def true_marginal_effect(spec, mc_reps=1_000_000, seed=0, chunk=250_000):
    """Counterfactual Monte Carlo truth for the marginal log-odds effect.

    ``mc_reps`` subjects are simulated from the scenario. Each gets both
    potential outcomes from one shared uniform draw, with the treatment forced
    to 1 and to 0. The ATE contrasts the two means over everyone, the ATT over
    subjects whose simulated treatment is 1. Standard errors use the delta
    method on the paired per-subject contributions.
    """
    if mc_reps < 1:
        raise ValueError("mc_reps must be >= 1")
    coeffs = spec.coefficients
    # rows: everyone, treated; columns: n, sum y1, sum y0, sum y1^2, sum y0^2, sum y1*y0
    tot = np.zeros((2, 6))
    done = 0
    c = 0
    while done < mc_reps:
        m = min(chunk, mc_reps - done)
        W = sample_covariates(m, spec.correlation, rngmod.stream(seed, rngmod.ORACLE, c, rngmod.COVARIATES))
        A = assign_treatment(true_ps(spec, W), rngmod.stream(seed, rngmod.ORACLE, c, rngmod.TREATMENT))
        u = rngmod.stream(seed, rngmod.ORACLE, c, rngmod.OUTCOME).random(m)
        y1 = (u < outcome_probability(np.ones(m), W, coeffs)).astype(float)
        y0 = (u < outcome_probability(np.zeros(m), W, coeffs)).astype(float)
        for g, mask in enumerate((np.ones(m, dtype=bool), A == 1)):
            a, b = y1[mask], y0[mask]
            tot[g] += [mask.sum(), a.sum(), b.sum(), a @ a, b @ b, a @ b]
        done += m
        c += 1

    def contrast(row):
        n, s1, s0, q1, q0, x = row
        if n < 2:
            return float("nan"), float("nan")
        m1, m0 = s1 / n, s0 / n
        if not (0 < m1 < 1 and 0 < m0 < 1):
            return float("nan"), float("nan")
        v1 = q1 / n - m1 * m1
        v0 = q0 / n - m0 * m0
        cov = x / n - m1 * m0
        g1, g0 = 1.0 / (m1 * (1 - m1)), 1.0 / (m0 * (1 - m0))
        var = g1 * g1 * v1 + g0 * g0 * v0 - 2 * g1 * g0 * cov
        return float(logit(m1) - logit(m0)), float(np.sqrt(max(var, 0.0) / n))

    ate, ate_se = contrast(tot[0])
    att, att_se = contrast(tot[1])
    return TruthReport(
        conditional_gamma1=coeffs.gamma1,
        marginal_ate=ate,
        marginal_ate_se=ate_se,
        marginal_att=att,
        marginal_att_se=att_se,
        mc_reps=int(mc_reps),
    )

