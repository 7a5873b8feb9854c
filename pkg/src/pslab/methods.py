"""Propensity-score adjustment: estimation, caliper matching, weighting, stratification."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import UndefinedVarianceError
from .glm import fit_logistic, predict_proba

PS_FLOOR = 1e-12

IPW_VARIANTS = ("plain", "truncated", "stabilized", "truncated_stabilized")
STRATA_METHODS = ("quantile", "ps_value")


@dataclass(frozen=True)
class PSVector:
    values: np.ndarray
    source: str = "estimated"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("PS must be one-dimensional")
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValueError("PS values must lie strictly inside (0, 1)")
        if self.source not in ("estimated", "true"):
            raise ValueError("source must be 'estimated' or 'true'")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def _values(ps):
    return ps.values if isinstance(ps, PSVector) else np.asarray(ps, dtype=float)


def estimate_ps(cohort, model):
    """Fit a logistic model of treatment on ``model``'s terms; return fitted PS."""
    if model.uses("a") or model.uses("y"):
        raise ValueError("PS model must not contain treatment or outcome terms")
    cols = cohort.columns() if hasattr(cohort, "columns") else cohort
    X = model.matrix(cols)
    fit = fit_logistic(model, X, cols["a"])
    ps = predict_proba(fit, model, X)
    return PSVector(np.clip(ps, PS_FLOOR, 1.0 - PS_FLOOR), "estimated")


# -- matching ---------------------------------------------------------------


@dataclass(frozen=True)
class MatchedSet:
    pairs: np.ndarray  # (m, 2) int array of (treated index, control index)
    caliper_width: float

    def __len__(self):
        return self.pairs.shape[0]


def compute_caliper(ps, A, multiplier=0.1):
    """``multiplier`` times the pooled SD of PS across the two arms."""
    v = _values(ps)
    A = np.asarray(A)
    t, c = v[A == 1], v[A == 0]
    if t.size < 2 or c.size < 2:
        raise UndefinedVarianceError(
            f"each arm needs at least 2 subjects for a pooled SD (treated={t.size}, control={c.size})"
        )
    pooled = np.sqrt(((t.size - 1) * t.var(ddof=1) + (c.size - 1) * c.var(ddof=1)) / (t.size + c.size - 2))
    return float(multiplier * pooled)


def match_nearest(ps, A, caliper, stream, backend=None):
    """Greedy 1:1 nearest-neighbour matching without replacement.

    Treated subjects are visited in a random order drawn from ``stream``. Each
    takes the unmatched control with the smallest absolute PS difference (ties
    to the lowest control index) and stays unmatched if that difference
    exceeds ``caliper``.
    """
    if caliper < 0:
        raise ValueError("caliper must be non-negative")
    v = _values(ps)
    A = np.asarray(A)
    treated = np.flatnonzero(A == 1)
    controls = np.flatnonzero(A == 0)
    order = treated[stream.permutation(treated.size)]
    if treated.size == 0 or controls.size == 0:
        return MatchedSet(np.empty((0, 2), dtype=np.intp), float(caliper))

    sort = np.lexsort((controls, v[controls]))
    control_ps = np.ascontiguousarray(v[controls][sort])
    control_idx = np.ascontiguousarray(controls[sort]).astype(np.intp)
    group_start = np.searchsorted(control_ps, control_ps, side="left").astype(np.intp)
    treated_ps = np.ascontiguousarray(v[order])
    pos = np.searchsorted(control_ps, treated_ps, side="left").astype(np.intp)

    kernel = {"python": kernels.python_greedy_match, "cython": kernels.compiled_greedy_match}.get(
        backend, kernels.greedy_match
    )
    if kernel is None:
        raise RuntimeError("compiled matching kernel is not available")
    chosen = kernel(treated_ps, pos, control_ps, control_idx, group_start, float(caliper))
    hit = chosen >= 0
    pairs = np.column_stack([order[hit], control_idx[chosen[hit]]]).astype(np.intp)
    return MatchedSet(pairs, float(caliper))


# -- weighting --------------------------------------------------------------


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray
    variant: str
    truncation_percentile: float = None

    def __post_init__(self):
        if self.variant not in IPW_VARIANTS:
            raise ValueError(f"unknown IPW variant {self.variant!r}")
        v = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(v) & (v > 0)):
            raise ValueError("weights must be finite and positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def truncation_bounds(weights, p):
    """Order-statistic percentile bounds used for clamping.

    The lower bound is the order statistic at ``floor((n-1)p)`` and the upper
    bound the one at ``ceil((n-1)(1-p))`` (0-based). Both are observed weights,
    which makes clamping idempotent.
    """
    if not 0.0 < p < 0.5:
        raise ValueError("truncation percentile must lie in (0, 0.5)")
    w = np.sort(np.asarray(weights, dtype=float))
    n = w.size
    lo = w[int(np.floor((n - 1) * p))]
    hi = w[int(np.ceil((n - 1) * (1.0 - p)))]
    return float(lo), float(hi)


def truncate(weights, p):
    lo, hi = truncation_bounds(weights, p)
    return np.clip(np.asarray(weights, dtype=float), lo, hi)


def ipw_weights(ps, A, variant="plain", truncation_percentile=0.01):
    """Inverse probability of treatment weights.

    ``plain`` is 1/ps for treated and 1/(1-ps) for untreated. ``stabilized``
    multiplies by the sample treated fraction (or its complement). Truncated
    variants clamp the weights at their lower/upper ``truncation_percentile``
    order statistics, after stabilization when both are requested.
    """
    if variant not in IPW_VARIANTS:
        raise ValueError(f"unknown IPW variant {variant!r}; choose from {', '.join(IPW_VARIANTS)}")
    v = _values(ps)
    A = np.asarray(A, dtype=float)
    w = np.where(A == 1, 1.0 / v, 1.0 / (1.0 - v))
    if variant in ("stabilized", "truncated_stabilized"):
        pt = A.mean()
        w = w * np.where(A == 1, pt, 1.0 - pt)
    pct = None
    if variant in ("truncated", "truncated_stabilized"):
        w = truncate(w, truncation_percentile)
        pct = float(truncation_percentile)
    return WeightVector(w, variant, pct)


# -- stratification ---------------------------------------------------------


@dataclass(frozen=True)
class StratumAssignment:
    stratum_of: np.ndarray  # labels 1..k
    method: str
    k: int
    boundaries: np.ndarray
    degenerate: bool = False

    def sizes(self):
        return np.bincount(self.stratum_of, minlength=self.k + 1)[1:]


def quantile_type7(sorted_values, j, k):
    """The j/k empirical quantile with linear interpolation between order statistics.

    The position ``(n-1)j/k`` is split in integer arithmetic. An interpolated
    bound is kept strictly below the next order statistic.
    """
    x = sorted_values
    n = x.size
    f, rem = divmod((n - 1) * j, k)
    if rem == 0:
        return float(x[f])
    lo, hi = x[f], x[f + 1]
    b = lo + (hi - lo) * (rem / k)
    if b >= hi and hi > lo:
        b = np.nextafter(hi, -np.inf)
    return float(b)


def stratify(ps, method="quantile", k=5):
    """Split subjects into ``k`` PS strata.

    Intervals are right-closed, the lowest one also left-closed. ``quantile``
    puts boundaries at the j/k empirical quantiles; ``ps_value`` splits
    [min, max] into equal widths. Identical PS under ``ps_value`` yields one
    stratum with ``degenerate`` set.
    """
    if method == "psvalue":
        method = "ps_value"
    if method not in STRATA_METHODS:
        raise ValueError(f"unknown stratification method {method!r}")
    v = _values(ps)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if v.size < k:
        raise ValueError(f"need at least k={k} subjects, got {v.size}")
    vmin, vmax = float(v.min()), float(v.max())
    if method == "quantile":
        s = np.sort(v)
        bounds = np.array([quantile_type7(s, j, k) for j in range(k + 1)])
    else:
        if vmin == vmax:
            return StratumAssignment(np.ones(v.size, dtype=np.intp), method, k, np.array([vmin, vmax]), True)
        bounds = vmin + (vmax - vmin) * np.arange(k + 1) / k
        bounds[0], bounds[-1] = vmin, vmax
    labels = np.searchsorted(bounds[1:-1], v, side="left") + 1
    return StratumAssignment(labels.astype(np.intp), method, k, bounds, False)
