"""Replicate loop and aggregation for the method-comparison experiment.

One base cohort per scenario is subsampled ``reps`` times without
replacement; on each subsample the PS model is fitted once and every selected
method estimates the marginal log-odds effect. Estimates are summarized by
their mean and empirical 2.5/97.5 percentiles.
"""

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import rng as rngmod
from .cohort import LABELS, CoefficientSet, ScenarioSpec, generate_cohort
from .config import default_config
from .effects import marginal_effect, matched_effect, stratified_effect, true_marginal_effect
from .errors import ConfigError, PSLabError
from .glm import DesignSpec, main_effects_design
from .methods import compute_caliper, estimate_ps, ipw_weights, match_nearest, stratify

log = logging.getLogger(__name__)

METHODS = ("PSM", "IPW", "IPW-trunc", "IPW-stab", "IPW-trunc-stab", "PSS-quantile", "PSS-psvalue")
METHOD_LABELS = {
    "PSM": "PSM",
    "IPW": "IPW",
    "IPW-trunc": "IPW (truncated)",
    "IPW-stab": "IPW (stabilized)",
    "IPW-trunc-stab": "IPW (trunc & stab)",
    "PSS-quantile": "PSS (by quantile)",
    "PSS-psvalue": "PSS (by PS value)",
}
_IPW_VARIANT = {
    "IPW": "plain",
    "IPW-trunc": "truncated",
    "IPW-stab": "stabilized",
    "IPW-trunc-stab": "truncated_stabilized",
}
FAILURE_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = ("A",)
    n: int = 20000
    reps: int = 1000
    fraction: float = 0.7
    methods: tuple = METHODS
    ps_model: object = "main"  # "main", "true", or a DesignSpec
    seed: int = 0
    coefficients: CoefficientSet = None
    correlation: object = None
    truncation_pct: float = 0.01
    strata: int = 5
    caliper_mult: float = 0.1
    fresh_cohorts: bool = False
    oracle_mc: int = 1_000_000
    threads: int = 1

    def __post_init__(self):
        scen = tuple(str(s).upper() for s in self.scenarios)
        bad = [s for s in scen if s not in LABELS]
        if bad or not scen:
            raise ConfigError(f"unknown scenario {', '.join(bad) or '(none)'}; valid labels are {', '.join(LABELS)}")
        object.__setattr__(self, "scenarios", scen)
        methods = tuple(self.methods)
        bad = [m for m in methods if m not in METHODS]
        if bad or not methods:
            raise ConfigError(f"unknown method {', '.join(bad) or '(none)'}; valid methods are {', '.join(METHODS)}")
        object.__setattr__(self, "methods", methods)
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not 0.0 < self.truncation_pct < 0.5:
            raise ConfigError("truncation percentile must lie in (0, 0.5)")
        if self.strata < 1:
            raise ConfigError("strata must be >= 1")
        if self.caliper_mult < 0:
            raise ConfigError("caliper multiplier must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.oracle_mc < 0:
            raise ConfigError("oracle_mc must be >= 0")
        if not (self.ps_model in ("main", "true") or isinstance(self.ps_model, DesignSpec)):
            raise ConfigError("ps_model must be 'main', 'true' or a DesignSpec")
        if self.coefficients is None:
            object.__setattr__(self, "coefficients", CoefficientSet.default())
        if self.correlation is None:
            object.__setattr__(self, "correlation", default_config()["corr"])
        object.__setattr__(self, "correlation", np.asarray(self.correlation, dtype=float))

    def scenario_spec(self, label):
        return ScenarioSpec.from_label(label, self.coefficients, self.correlation, self.n)

    def design_for(self, label):
        if isinstance(self.ps_model, DesignSpec):
            return self.ps_model
        if self.ps_model == "true":
            return self.scenario_spec(label).true_design()
        return main_effects_design()

    def to_dict(self):
        """Fully resolved settings; enough to reproduce a run."""
        return {
            "scenarios": list(self.scenarios),
            "n": self.n,
            "reps": self.reps,
            "fraction": self.fraction,
            "methods": list(self.methods),
            "ps_model": self.ps_model.names if isinstance(self.ps_model, DesignSpec) else self.ps_model,
            "seed": self.seed,
            "coefficients": {
                "beta": list(self.coefficients.beta),
                "alpha": list(self.coefficients.alpha),
                "gamma1": self.coefficients.gamma1,
            },
            "correlation": self.correlation.tolist(),
            "truncation_pct": self.truncation_pct,
            "strata": self.strata,
            "caliper_mult": self.caliper_mult,
            "fresh_cohorts": self.fresh_cohorts,
            "oracle_mc": self.oracle_mc,
        }


@dataclass(frozen=True)
class MethodResult:
    method: str
    replicate: int
    estimate: float = None
    n_used: int = 0
    strata_dropped: int = 0
    error: str = None

    @property
    def ok(self):
        return self.error is None


def _apply(method, sub, ps, config, replicate):
    if method == "PSM":
        caliper = compute_caliper(ps, sub.A, config.caliper_mult)
        matches = match_nearest(ps, sub.A, caliper, rngmod.stream(config.seed, rngmod.MATCHING, replicate))
        return matched_effect(sub, matches, method)
    if method in _IPW_VARIANT:
        w = ipw_weights(ps, sub.A, _IPW_VARIANT[method], config.truncation_pct)
        return marginal_effect(sub.A, sub.Y, w, method)
    strata_method = "quantile" if method == "PSS-quantile" else "ps_value"
    return stratified_effect(sub, stratify(ps, strata_method, config.strata), method)


def run_replicate(cohort, config, replicate_index, scenario="A"):
    """Subsample, fit the PS model once, and apply every configured method.

    Failures are recorded per method and never abort the replicate.
    """
    n = cohort.n
    size = int(np.floor(config.fraction * n))
    stream = rngmod.stream(config.seed, rngmod.SUBSAMPLE, replicate_index)
    idx = np.sort(stream.choice(n, size=size, replace=False))
    sub = cohort.subset(idx)
    try:
        ps = estimate_ps(sub, config.design_for(scenario))
    except PSLabError as exc:
        msg = f"PS model: {exc}"
        return [MethodResult(m, replicate_index, error=msg) for m in config.methods]

    results = []
    for method in config.methods:
        try:
            est = _apply(method, sub, ps, config, replicate_index)
        except PSLabError as exc:
            results.append(MethodResult(method, replicate_index, error=f"{type(exc).__name__}: {exc}"))
            continue
        results.append(MethodResult(method, replicate_index, est.gamma1_hat, est.n_used, est.strata_dropped))
    return results


def aggregate(estimates):
    """Mean and empirical 2.5/97.5 percentiles (linear interpolation).

    Estimates are sorted first, so the result is independent of input order.
    """
    x = np.sort(np.asarray(estimates, dtype=float))
    if x.size == 0:
        return float("nan"), float("nan"), float("nan")
    lo, hi = np.percentile(x, [2.5, 97.5])
    # centring on the minimum keeps a constant sample's mean exact
    mean = x[0] + np.mean(x - x[0])
    return float(mean), float(lo), float(hi)


@dataclass
class Cell:
    mean: float
    ci_low: float
    ci_high: float
    n_success: int
    n_failed: int
    warning: bool
    errors: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "mean": _num(self.mean),
            "ci_low": _num(self.ci_low),
            "ci_high": _num(self.ci_high),
            "n_success": self.n_success,
            "n_failed": self.n_failed,
            "warning": self.warning,
            "errors": dict(sorted(self.errors.items())),
        }


def _num(x):
    return None if x is None or not np.isfinite(x) else float(x)


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    cells: dict  # (scenario, method) -> Cell
    truths: dict  # scenario -> TruthReport or None

    @property
    def warning(self):
        return any(c.warning for c in self.cells.values())

    def cell(self, scenario, method):
        return self.cells[(scenario, method)]

    def to_dict(self):
        return {
            "version": __version__,
            "config": self.config.to_dict(),
            "warning": self.warning,
            "scenarios": {
                s: {
                    "oracle": None if self.truths.get(s) is None else self.truths[s].to_dict(),
                    "methods": {m: self.cells[(s, m)].to_dict() for m in self.config.methods},
                }
                for s in self.config.scenarios
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scenario", "method", "mean", "ci_low", "ci_high", "n_success", "n_failed", "warning",
                     "oracle_ate", "oracle_att"])
        for s in self.config.scenarios:
            t = self.truths.get(s)
            for m in self.config.methods:
                c = self.cells[(s, m)]
                wr.writerow([s, m, _fmt(c.mean), _fmt(c.ci_low), _fmt(c.ci_high), c.n_success, c.n_failed,
                             int(c.warning), _fmt(t.marginal_ate if t else None),
                             _fmt(t.marginal_att if t else None)])
        return buf.getvalue()

    def plot_data_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scenario", "method", "mean", "ci_low", "ci_high"])
        for s in self.config.scenarios:
            for m in self.config.methods:
                c = self.cells[(s, m)]
                wr.writerow([s, m, _fmt(c.mean), _fmt(c.ci_low), _fmt(c.ci_high)])
        return buf.getvalue()

    def to_markdown(self):
        """Methods as rows, scenarios as columns; each cell ``mean [low, high]``."""
        scen = self.config.scenarios
        lines = [
            "| Method | " + " | ".join(scen) + " |",
            "|---|" + "---|" * len(scen),
        ]
        for m in self.config.methods:
            row = []
            for s in scen:
                c = self.cells[(s, m)]
                if c.n_success == 0:
                    row.append("FAILED")
                    continue
                txt = f"{c.mean:.3f} [{c.ci_low:.3f}, {c.ci_high:.3f}]"
                if c.warning:
                    txt += " (!)"
                row.append(txt)
            lines.append(f"| {METHOD_LABELS[m]} | " + " | ".join(row) + " |")
        truths = [self.truths.get(s) for s in scen]
        if any(t is not None for t in truths):
            lines.append(
                "| Oracle marginal ATE | "
                + " | ".join("-" if t is None else f"{t.marginal_ate:.3f}" for t in truths)
                + " |"
            )
        if self.warning:
            lines.append("")
            lines.append(f"(!) more than {FAILURE_WARN_FRACTION:.0%} of replicates failed for this cell")
        return "\n".join(lines) + "\n"


def _fmt(x):
    return "" if x is None or not np.isfinite(x) else repr(float(x))


def _summarize(results, reps):
    ok = [r.estimate for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    errors = {}
    for r in failed:
        key = r.error.split(":", 1)[0]
        errors[key] = errors.get(key, 0) + 1
    mean, lo, hi = aggregate(ok)
    return Cell(mean, lo, hi, len(ok), len(failed), len(failed) > FAILURE_WARN_FRACTION * reps, errors)


def run_experiment(config, progress=None):
    """Run every scenario in ``config``; results do not depend on ``threads``."""
    cells, truths = {}, {}
    for s_i, label in enumerate(config.scenarios):
        spec = config.scenario_spec(label)
        base = None if config.fresh_cohorts else generate_cohort(spec, config.seed)

        def one(rep, spec=spec, base=base, label=label):
            cohort = base if base is not None else generate_cohort(spec, config.seed, replicate=rep)
            return run_replicate(cohort, config, rep, label)

        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                per_rep = list(pool.map(one, range(config.reps)))
        else:
            per_rep = []
            for rep in range(config.reps):
                per_rep.append(one(rep))
                if progress is not None:
                    progress(label, rep + 1, config.reps)
        for j, m in enumerate(config.methods):
            cells[(label, m)] = _summarize([r[j] for r in per_rep], config.reps)
        truths[label] = true_marginal_effect(spec, config.oracle_mc, config.seed) if config.oracle_mc else None
        log.info("scenario %s done (%d replicates)", label, config.reps)
    return ExperimentSummary(config, cells, truths)

