"""Synthetic observational cohorts under seven confounding scenarios.

Ten latent standard-normal covariates are drawn with a given correlation
matrix; W1, W3, W5, W6, W8, W9 are then dichotomized at zero. Treatment is
drawn from a scenario-specific logistic propensity model in W1..W7, and a
binary outcome from a logistic model in W1..W4, W8..W10 and the treatment.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import rng as rngmod
from .config import COEF_KEYS, default_config
from .errors import ConfigError, FactorizationError
from .glm import DesignSpec

N_COV = 10
BINARY_COLUMNS = (0, 2, 4, 5, 7, 8)  # W1, W3, W5, W6, W8, W9
CONTINUOUS_COLUMNS = (1, 3, 6, 9)  # W2, W4, W7, W10
OUTCOME_COLUMNS = (0, 1, 2, 3, 7, 8, 9)  # alpha1..alpha7 multiply these

# Squared covariates, in order of increasing non-linearity (1-based covariate).
QUADRATIC_TERMS = (2, 4, 7)
# (beta index, multiplier, covariate a, covariate b), 1-based, in the order
# used by the fully non-additive scenario.
INTERACTION_TERMS = (
    (1, 0.5, 1, 3),
    (2, 0.7, 2, 4),
    (3, 0.5, 3, 5),
    (4, 0.7, 4, 6),
    (5, 0.5, 5, 7),
    (1, 0.5, 1, 6),
    (2, 0.7, 2, 3),
    (3, 0.5, 3, 4),
    (4, 0.5, 4, 5),
    (5, 0.5, 5, 6),
)

# label -> (number of quadratic terms, number of interaction terms)
SCENARIOS = {
    "A": (0, 0),
    "B": (1, 0),
    "C": (3, 0),
    "D": (0, 3),
    "E": (1, 3),
    "F": (0, 10),
    "G": (3, 10),
}
LABELS = tuple(SCENARIOS)


@dataclass(frozen=True)
class CoefficientSet:
    beta: tuple
    alpha: tuple
    gamma1: float = -0.4

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        alpha = tuple(float(a) for a in self.alpha)
        if len(beta) != 8 or len(alpha) != 8:
            raise ValueError("beta and alpha need 8 entries each")
        if not all(np.isfinite(beta + alpha + (float(self.gamma1),))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma1", float(self.gamma1))

    @classmethod
    def from_mapping(cls, values, fallback=None):
        merged = dict(fallback or {})
        merged.update({k: v for k, v in values.items() if k in COEF_KEYS})
        missing = [k for k in COEF_KEYS if k not in merged and k != "gamma1"]
        if missing:
            raise ConfigError(f"missing coefficients: {', '.join(missing)}")
        return cls(
            beta=tuple(merged[f"beta{i}"] for i in range(8)),
            alpha=tuple(merged[f"alpha{i}"] for i in range(8)),
            gamma1=merged.get("gamma1", -0.4),
        )

    @classmethod
    def default(cls):
        return cls.from_mapping(default_config())

    def replace(self, **kw):
        d = {"beta": self.beta, "alpha": self.alpha, "gamma1": self.gamma1}
        d.update(kw)
        return CoefficientSet(**d)


def cholesky(corr):
    """Lower Cholesky factor of a correlation matrix.

    Raises FactorizationError naming the first leading minor (1-based) that is
    not positive definite, and ConfigError for asymmetric input, a non-unit
    diagonal, or entries outside [-1, 1].
    """
    c = np.asarray(corr, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ConfigError(f"correlation matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ConfigError("correlation matrix has non-finite entries")
    if np.any(np.abs(c) > 1.0):
        i, j = np.argwhere(np.abs(c) > 1.0)[0]
        raise ConfigError(f"correlation entry ({i + 1},{j + 1}) = {c[i, j]} outside [-1, 1]")
    if not np.allclose(np.diag(c), 1.0, rtol=0, atol=1e-12):
        raise ConfigError("correlation matrix diagonal must be 1")
    if not np.allclose(c, c.T, rtol=0, atol=1e-12):
        raise ConfigError("correlation matrix must be symmetric")
    k = c.shape[0]
    L = np.zeros_like(c)
    for j in range(k):
        d = c[j, j] - L[j, :j] @ L[j, :j]
        if d <= 1e-12:
            raise FactorizationError(j + 1)
        L[j, j] = np.sqrt(d)
        L[j + 1 :, j] = (c[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class ScenarioSpec:
    label: str
    quadratic_terms: tuple
    interaction_terms: tuple
    coefficients: CoefficientSet
    correlation: np.ndarray = field(compare=False)
    n: int = 20000

    def __post_init__(self):
        if self.label not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.label!r}; valid labels are {', '.join(LABELS)}")
        if int(self.n) < 1:
            raise ConfigError("n must be a positive integer")
        corr = np.array(self.correlation, dtype=float)
        cholesky(corr)
        corr.setflags(write=False)
        object.__setattr__(self, "correlation", corr)

    @classmethod
    def from_label(cls, label, coefficients=None, correlation=None, n=20000):
        label = str(label).upper()
        if label not in SCENARIOS:
            raise ConfigError(f"unknown scenario {label!r}; valid labels are {', '.join(LABELS)}")
        n_quad, n_int = SCENARIOS[label]
        if coefficients is None:
            coefficients = CoefficientSet.default()
        if correlation is None:
            correlation = default_config()["corr"]
        return cls(
            label=label,
            quadratic_terms=QUADRATIC_TERMS[:n_quad],
            interaction_terms=INTERACTION_TERMS[:n_int],
            coefficients=coefficients,
            correlation=correlation,
            n=int(n),
        )

    def true_design(self):
        """The scenario's propensity model as a DesignSpec (free coefficients)."""
        names = [f"w{i}" for i in range(1, 8)]
        names += [f"w{q}^2" for q in self.quadratic_terms]
        names += [f"w{a}*w{b}" for _, _, a, b in self.interaction_terms]
        return DesignSpec.from_names(names)

    def true_coefficients(self):
        """Coefficient vector aligned with :meth:`true_design`."""
        beta = self.coefficients.beta
        coefs = list(beta)
        coefs += [beta[q] for q in self.quadratic_terms]
        coefs += [beta[k] * m for k, m, _, _ in self.interaction_terms]
        return np.array(coefs)


@dataclass(frozen=True)
class Cohort:
    W: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    true_ps: np.ndarray

    def __post_init__(self):
        for name in ("W", "A", "Y", "true_ps"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.W.shape[0]
        if self.W.shape != (n, N_COV):
            raise ValueError(f"W must be n x {N_COV}")
        for name in ("A", "Y", "true_ps"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")

    @property
    def n(self):
        return self.W.shape[0]

    def columns(self):
        cols = {f"w{i + 1}": self.W[:, i] for i in range(N_COV)}
        cols["a"] = self.A
        cols["y"] = self.Y
        return cols

    def subset(self, idx):
        return Cohort(self.W[idx], self.A[idx], self.Y[idx], self.true_ps[idx])

    def to_csv(self, path):
        header = ",".join([f"w{i}" for i in range(1, N_COV + 1)] + ["a", "y", "true_ps"])
        data = np.column_stack([self.W, self.A, self.Y, self.true_ps])
        fmt = ["%d" if i in BINARY_COLUMNS else "%.17g" for i in range(N_COV)] + ["%d", "%d", "%.17g"]
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)

    @classmethod
    def from_csv(cls, path):
        expected = [f"w{i}" for i in range(1, N_COV + 1)] + ["a", "y", "true_ps"]
        try:
            with open(path) as fh:
                header = fh.readline().strip().split(",")
        except OSError as exc:
            raise ConfigError(f"cannot read file: {exc.strerror}", path) from None
        if [h.strip().lower() for h in header] != expected:
            raise ConfigError(f"header must be {','.join(expected)}", path, 1, "header")
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"malformed data: {exc}", path) from None
        if data.shape[1] != len(expected):
            raise ConfigError(f"expected {len(expected)} columns", path)
        return cls(data[:, :N_COV], data[:, N_COV], data[:, N_COV + 1], data[:, N_COV + 2])


def sample_covariates(n, corr, stream):
    """Draw n rows of correlated normals and dichotomize the binary columns at 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = cholesky(corr)
    Z = stream.standard_normal((n, L.shape[0])) @ L.T
    Z[:, BINARY_COLUMNS] = (Z[:, BINARY_COLUMNS] > 0).astype(float)
    return Z


def linear_predictor(spec, W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != N_COV:
        raise ValueError(f"W must have {N_COV} columns")
    beta = spec.coefficients.beta
    eta = beta[0] + W[:, :7] @ np.asarray(beta[1:])
    for q in spec.quadratic_terms:
        eta = eta + beta[q] * W[:, q - 1] ** 2
    for k, mult, a, b in spec.interaction_terms:
        eta = eta + beta[k] * mult * W[:, a - 1] * W[:, b - 1]
    return eta


def true_ps(spec, W):
    return expit(linear_predictor(spec, W))


def assign_treatment(ps, stream):
    ps = np.asarray(ps, dtype=float)
    return (stream.random(ps.shape[0]) < ps).astype(float)


def outcome_probability(A, W, coeffs):
    alpha = np.asarray(coeffs.alpha)
    eta = alpha[0] + np.asarray(W)[:, OUTCOME_COLUMNS] @ alpha[1:] + coeffs.gamma1 * np.asarray(A, dtype=float)
    return expit(eta)


def generate_outcome(A, W, coeffs, stream):
    p = outcome_probability(A, W, coeffs)
    return (stream.random(p.shape[0]) < p).astype(float)


def generate_cohort(spec, seed, replicate=None):
    """Build a cohort from per-purpose streams of ``seed``.

    ``replicate`` selects an independent cohort from the same master seed (used
    when every replicate regenerates its own cohort).
    """
    extra = () if replicate is None else (rngmod.FRESH_COHORT, replicate)
    W = sample_covariates(spec.n, spec.correlation, rngmod.stream(seed, rngmod.COVARIATES, *extra))
    ps = true_ps(spec, W)
    A = assign_treatment(ps, rngmod.stream(seed, rngmod.TREATMENT, *extra))
    Y = generate_outcome(A, W, spec.coefficients, rngmod.stream(seed, rngmod.OUTCOME, *extra))
    return Cohort(W=W, A=A, Y=Y, true_ps=ps)

