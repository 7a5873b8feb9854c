"""Weighted maximum-likelihood logistic regression.

A single Newton/IRLS solver serves both propensity-score fitting and effect
estimation. Models are described by a :class:`DesignSpec`, an ordered list of
terms built from named columns (``w1`` .. ``w10``, ``a``).
"""

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import RankDeficiencyError, SeparationError

SEPARATION_BOUND = 30.0
GRAD_TOL = 1e-8
REL_LL_TOL = 1e-10
STEP_TOL = 1e-7
MAX_ITER = 100


@dataclass(frozen=True)
class Term:
    """Product of zero or more named columns. No factors means the intercept."""

    factors: tuple = ()

    @property
    def name(self):
        if not self.factors:
            return "1"
        if len(self.factors) == 2 and self.factors[0] == self.factors[1]:
            return f"{self.factors[0]}^2"
        return "*".join(self.factors)

    @classmethod
    def parse(cls, text):
        """Parse ``1``, ``w3``, ``w2^2`` or ``w1*w3`` (case-insensitive)."""
        text = text.strip().lower().replace(" ", "")
        if text in ("1", "intercept", "const"):
            return cls(())
        if not text:
            raise ValueError("empty term")
        factors = []
        for part in text.split("*"):
            if "^" in part:
                base, _, power = part.partition("^")
                if not power.isdigit() or int(power) < 1:
                    raise ValueError(f"bad power in term {text!r}")
                factors.extend([base] * int(power))
            else:
                factors.append(part)
        for f in factors:
            if not _valid_column(f):
                raise ValueError(f"unknown column {f!r} in term {text!r}")
        return cls(tuple(factors))

    def evaluate(self, columns, n):
        out = np.ones(n)
        for f in self.factors:
            out = out * np.asarray(columns[f], dtype=float)
        return out


def _valid_column(name):
    if name == "a":
        return True
    return name.startswith("w") and name[1:].isdigit() and 1 <= int(name[1:]) <= 10


INTERCEPT = Term(())


@dataclass(frozen=True)
class DesignSpec:
    """Ordered model terms; the intercept is always present exactly once."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        n_int = sum(1 for t in terms if not t.factors)
        if n_int == 0:
            terms = (INTERCEPT,) + terms
        elif n_int > 1:
            raise ValueError("intercept listed more than once")
        names = [t.name for t in terms]
        keys = [tuple(sorted(t.factors)) for t in terms]
        if len(set(keys)) != len(keys):
            dup = next(n for n, k in zip(names, keys) if keys.count(k) > 1)
            raise ValueError(f"duplicate term {dup!r}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_names(cls, names: Sequence[str]):
        return cls(tuple(Term.parse(n) for n in names))

    @classmethod
    def from_file(cls, path):
        """Read one term per line; blank lines and ``#`` comments are ignored."""
        from .errors import ConfigError

        names = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    Term.parse(line)
                except ValueError as exc:
                    raise ConfigError(str(exc), path=path, line=lineno, field="term") from None
                names.append(line)
        if not names:
            raise ConfigError("no terms found", path=path)
        try:
            return cls.from_names(names)
        except ValueError as exc:
            raise ConfigError(str(exc), path=path) from None

    @property
    def names(self):
        return [t.name for t in self.terms]

    def __len__(self):
        return len(self.terms)

    def uses(self, column):
        return any(column in t.factors for t in self.terms)

    def matrix(self, columns: Mapping[str, np.ndarray]):
        """Evaluate every term on ``columns`` and stack them as an n x p matrix."""
        if hasattr(columns, "columns") and callable(columns.columns):
            columns = columns.columns()
        n = len(next(iter(columns.values())))
        return np.column_stack([t.evaluate(columns, n) for t in self.terms])


def main_effects_design(k=10):
    return DesignSpec.from_names([f"w{i}" for i in range(1, k + 1)])


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    separation_detected: bool = False
    log_likelihood: float = float("nan")
    term_names: list = field(default_factory=list)

    def coef(self, name):
        return float(self.coefficients[self.term_names.index(name)])


def _design_matrix(design, X):
    if isinstance(X, np.ndarray) and X.ndim == 2:
        if X.shape[1] != len(design):
            raise ValueError(f"matrix has {X.shape[1]} columns, design has {len(design)} terms")
        return np.asarray(X, dtype=float)
    return design.matrix(X)


def log_likelihood(beta, X, y, weights=None):
    """Weighted Bernoulli log-likelihood, computed without forming p."""
    eta = X @ beta
    ll = y * eta - np.logaddexp(0.0, eta)
    if weights is None:
        return float(ll.sum())
    return float(weights @ ll)


def score(beta, X, y, weights=None):
    """Gradient of :func:`log_likelihood` with respect to ``beta``."""
    r = y - expit(X @ beta)
    if weights is not None:
        r = r * weights
    return X.T @ r


def _check_rank(Xw, design):
    norms = np.sqrt(np.einsum("ij,ij->j", Xw, Xw))
    p = Xw.shape[1]
    for k in range(p):
        if norms[k] == 0.0:
            raise RankDeficiencyError(design.terms[k].name)
    Z = Xw / norms
    gram = Z.T @ Z
    if np.linalg.eigvalsh(gram).min() > 1e-11:
        return
    # find the first term whose addition does not raise the rank
    for k in range(1, p):
        sub = gram[: k + 1, : k + 1]
        if np.linalg.eigvalsh(sub).min() <= 1e-11:
            raise RankDeficiencyError(design.terms[k].name)
    raise RankDeficiencyError(design.terms[-1].name)


def fit_logistic(design, X, y, weights=None, *, ridge=0.0, max_iter=MAX_ITER):
    """Maximize the weighted Bernoulli log-likelihood by damped Newton steps.

    Parameters
    ----------
    design : DesignSpec
        Model terms, intercept first.
    X : mapping of column arrays, or an n x p matrix already matching ``design``
    y : array of 0/1 outcomes
    weights : optional non-negative case weights
    ridge : float
        L2 penalty on non-intercept coefficients. Off by default.

    Returns
    -------
    LogisticFit

    Raises
    ------
    SeparationError
        When a coefficient leaves [-30, 30] during the iterations.
    RankDeficiencyError
        When the weighted design is singular; names the first collinear term.
    """
    Xm = _design_matrix(design, X)
    y = np.asarray(y, dtype=float)
    n, p = Xm.shape
    if y.shape != (n,):
        raise ValueError("y length does not match X")
    if n < p:
        raise ValueError(f"need at least {p} rows for {p} terms, got {n}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,):
            raise ValueError("weights length does not match X")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(weights > 0):
            raise ValueError("all weights are zero")

    w = np.ones(n) if weights is None else weights
    if ridge == 0.0:
        _check_rank(Xm * np.sqrt(w)[:, None], design)
    penalty = np.full(p, float(ridge))
    penalty[[i for i, t in enumerate(design.terms) if not t.factors]] = 0.0

    def objective(b):
        return log_likelihood(b, Xm, y, weights) - 0.5 * float(penalty @ (b * b))

    beta = np.zeros(p)
    ll = objective(beta)
    converged = False
    polish = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(Xm @ beta)
        grad = Xm.T @ (w * (y - mu)) - penalty * beta
        hess = (Xm * (w * mu * (1.0 - mu))[:, None]).T @ Xm + np.diag(penalty)
        try:
            step = linalg.cho_solve(linalg.cho_factor(hess, check_finite=False), grad)
        except linalg.LinAlgError:
            if np.max(np.abs(beta)) > 10.0:
                raise SeparationError("information matrix became singular; outcome is separated") from None
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        gmax = float(np.max(np.abs(grad)))
        if gmax < GRAD_TOL and np.max(np.abs(step)) < STEP_TOL:
            converged = True
            break

        t = 1.0
        new = beta + step
        ll_new = objective(new)
        while ll_new < ll - 1e-12 * abs(ll) and t > 1e-10:
            t *= 0.5
            new = beta + t * step
            ll_new = objective(new)
        if np.max(np.abs(new)) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficient for {design.terms[int(np.argmax(np.abs(new)))].name!r} "
                f"exceeded {SEPARATION_BOUND:g} in magnitude"
            )
        change = abs(ll_new - ll)
        beta, ll = new, ll_new
        if polish:
            converged = True
            break
        # a flat likelihood with a large step means a coefficient drifting to infinity
        if change <= REL_LL_TOL * abs(ll) and t * np.max(np.abs(step)) < 1e-4:
            # one more full Newton step drives the gradient to rounding level
            polish = True

    grad = score(beta, Xm, y, weights) - penalty * beta
    return LogisticFit(
        coefficients=beta,
        converged=converged,
        iterations=it,
        final_gradient_norm=float(np.max(np.abs(grad))),
        separation_detected=False,
        log_likelihood=ll,
        term_names=design.names,
    )


def predict_proba(fit, design, X):
    """Fitted probabilities ``expit(X @ coefficients)``."""
    Xm = _design_matrix(design, X)
    return expit(Xm @ np.asarray(fit.coefficients if isinstance(fit, LogisticFit) else fit, dtype=float))
