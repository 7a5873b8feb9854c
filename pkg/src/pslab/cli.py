"""Command-line interface: ``pslab generate|estimate|run|oracle``.

Exit status: 0 on success, 1 on configuration errors (bad flags, bad files,
unknown labels), 2 on runtime failures.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .cohort import LABELS, CoefficientSet, Cohort, ScenarioSpec, generate_cohort
from .config import default_config, load_config
from .effects import true_marginal_effect
from .errors import ConfigError, PSLabError
from .glm import DesignSpec
from .harness import METHODS, ExperimentConfig, run_experiment, run_replicate

log = logging.getLogger("pslab")

FORMATS = ("json", "csv", "md")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _add_data_flags(p):
    p.add_argument("--n", type=_positive_int, default=20000, help="cohort size (default 20000)")
    p.add_argument("--seed", type=_nonneg_int, default=None, help="master seed (fallback: $PSLAB_SEED, then 0)")
    p.add_argument("--coeffs", help="coefficient file (beta0..beta7, alpha0..alpha7, gamma1)")
    p.add_argument("--corr", help="file with a 10x10 'corr' block")


def _add_scenario_flags(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--scenario", help="scenario label A..G (repeat or comma-separate for several)", action="append")
    g.add_argument("--all-scenarios", action="store_true", help="run all seven scenarios")


def _add_method_flags(p):
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--ps-model", default="main", help="main | true | path to a term file")
    p.add_argument("--truncation-pct", type=float, default=0.01)
    p.add_argument("--strata", type=_positive_int, default=5)
    p.add_argument("--strata-method", choices=("quantile", "psvalue"),
                   help="keep only this stratification variant")
    p.add_argument("--caliper-mult", type=float, default=0.1)


def build_parser():
    parser = _Parser(prog="pslab", description="Propensity-score method comparison on simulated cohorts.")
    parser.add_argument("--version", action="version", version=f"pslab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a simulated cohort as CSV")
    _add_scenario_flags(p)
    _add_data_flags(p)
    p.add_argument("--out", default=".", help="output directory or .csv path")

    p = sub.add_parser("estimate", help="apply every method once to a cohort CSV")
    p.add_argument("cohort", help="cohort CSV (header w1..w10,a,y,true_ps)")
    _add_scenario_flags(p, required=False)
    _add_method_flags(p)
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--seed", type=_nonneg_int, default=None)
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("run", help="run the full replicate experiment")
    _add_scenario_flags(p)
    _add_data_flags(p)
    _add_method_flags(p)
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--fraction", type=float, default=0.7)
    p.add_argument("--format", action="append", choices=FORMATS,
                   help="output format; repeatable (default: json and md)")
    p.add_argument("--out", default="pslab-out", help="output directory")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--mc-reps", type=_nonneg_int, default=1_000_000,
                   help="subjects simulated by the truth oracle per scenario (0 disables)")
    p.add_argument("--fresh-cohorts", action="store_true",
                   help="draw a new base cohort for every replicate")

    p = sub.add_parser("oracle", help="print the Monte Carlo marginal-effect truth")
    _add_scenario_flags(p)
    _add_data_flags(p)
    p.add_argument("--mc-reps", type=_positive_int, default=1_000_000)
    return parser


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PSLAB_SEED")
    if env is None:
        return 0
    try:
        v = int(env)
    except ValueError:
        raise ConfigError(f"PSLAB_SEED must be a non-negative integer, got {env!r}") from None
    if v < 0:
        raise ConfigError("PSLAB_SEED must be non-negative")
    return v


def _scenarios(args):
    if getattr(args, "all_scenarios", False):
        return LABELS
    labels = []
    for item in args.scenario or []:
        labels += [s.strip().upper() for s in item.split(",") if s.strip()]
    for s in labels:
        if s not in LABELS:
            raise ConfigError(f"unknown scenario {s!r}; valid labels are {', '.join(LABELS)}")
    return tuple(labels)


def _coefficients(args):
    fallback = default_config()
    coeffs = CoefficientSet.default()
    corr = fallback["corr"]
    if getattr(args, "coeffs", None):
        values = load_config(args.coeffs)
        coeffs = CoefficientSet.from_mapping(values, fallback)
        corr = values.get("corr", corr)
    if getattr(args, "corr", None):
        values = load_config(args.corr)
        if "corr" not in values:
            raise ConfigError("no 'corr' block found", path=args.corr, field="corr")
        corr = values["corr"]
    return coeffs, corr


def _methods(args):
    if args.methods:
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    else:
        methods = METHODS
    if args.strata_method == "quantile":
        methods = tuple(m for m in methods if m != "PSS-psvalue")
    elif args.strata_method == "psvalue":
        methods = tuple(m for m in methods if m != "PSS-quantile")
    return methods


def _ps_model(args):
    if args.ps_model in ("main", "true"):
        return args.ps_model
    return DesignSpec.from_file(args.ps_model)


def _cmd_generate(args):
    coeffs, corr = _coefficients(args)
    seed = _seed(args)
    out = Path(args.out)
    labels = _scenarios(args)
    for label in labels:
        spec = ScenarioSpec.from_label(label, coeffs, corr, args.n)
        cohort = generate_cohort(spec, seed)
        if out.suffix == ".csv" and len(labels) == 1:
            path = out
            path.parent.mkdir(parents=True, exist_ok=True)
        else:
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"cohort_{label}_seed{seed}.csv"
        cohort.to_csv(path)
        print(path)
    return 0


def _cmd_estimate(args):
    cohort = Cohort.from_csv(args.cohort)
    labels = _scenarios(args)
    if args.ps_model == "true" and len(labels) != 1:
        raise ConfigError("--ps-model true needs exactly one --scenario")
    label = labels[0] if labels else "A"
    config = ExperimentConfig(
        scenarios=(label,),
        n=cohort.n,
        reps=1,
        fraction=args.fraction,
        methods=_methods(args),
        ps_model=_ps_model(args),
        seed=_seed(args),
        truncation_pct=args.truncation_pct,
        strata=args.strata,
        caliper_mult=args.caliper_mult,
        oracle_mc=0,
    )
    results = run_replicate(cohort, config, 0, label)
    payload = {
        "cohort": str(args.cohort),
        "n": cohort.n,
        "estimates": {
            r.method: {"gamma1_hat": r.estimate, "n_used": r.n_used, "strata_dropped": r.strata_dropped,
                       "error": r.error}
            for r in results
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if any(r.ok for r in results) else 2


def _cmd_run(args):
    coeffs, corr = _coefficients(args)
    config = ExperimentConfig(
        scenarios=_scenarios(args),
        n=args.n,
        reps=args.reps,
        fraction=args.fraction,
        methods=_methods(args),
        ps_model=_ps_model(args),
        seed=_seed(args),
        coefficients=coeffs,
        correlation=corr,
        truncation_pct=args.truncation_pct,
        strata=args.strata,
        caliper_mult=args.caliper_mult,
        fresh_cohorts=args.fresh_cohorts,
        oracle_mc=args.mc_reps,
        threads=args.threads,
    )
    formats = args.format or ["json", "md"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = run_experiment(config)
    manifest = {"pslab_version": __version__, "command": "run", "config": config.to_dict()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if "json" in formats:
        (out / "summary.json").write_text(summary.to_json())
    if "csv" in formats:
        (out / "summary.csv").write_text(summary.to_csv())
    if "md" in formats:
        (out / "table.md").write_text(summary.to_markdown())
    (out / "plot_data.csv").write_text(summary.plot_data_csv())
    if "md" in formats:
        sys.stdout.write(summary.to_markdown())
    if summary.warning:
        print("warning: some cells exceed the failed-replicate threshold", file=sys.stderr)
    return 0


def _cmd_oracle(args):
    coeffs, corr = _coefficients(args)
    seed = _seed(args)
    report = {}
    for label in _scenarios(args):
        spec = ScenarioSpec.from_label(label, coeffs, corr, args.n)
        report[label] = true_marginal_effect(spec, args.mc_reps, seed).to_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


COMMANDS = {"generate": _cmd_generate, "estimate": _cmd_estimate, "run": _cmd_run, "oracle": _cmd_oracle}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if hasattr(args, "fraction") and not 0.0 < args.fraction <= 1.0:
            raise ConfigError(f"--fraction must lie in (0, 1], got {args.fraction}")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"pslab: error: {exc}", file=sys.stderr)
        return 1
    except (PSLabError, ValueError, OSError) as exc:
        print(f"pslab: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
