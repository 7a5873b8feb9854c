import numpy as np
import pytest
from scipy.special import expit

from pslab import rng as rngmod
from pslab.cohort import (
    BINARY_COLUMNS,
    LABELS,
    Cohort,
    CoefficientSet,
    ScenarioSpec,
    assign_treatment,
    cholesky,
    generate_cohort,
    generate_outcome,
    outcome_probability,
    sample_covariates,
    true_ps,
)
from pslab.errors import ConfigError, FactorizationError
from pslab.glm import fit_logistic, predict_proba

from oracles import g_ps_transcribed


def identity_spec(label, **coef):
    c = CoefficientSet.default()
    if coef:
        c = c.replace(**coef)
    return ScenarioSpec.from_label(label, c, np.eye(10), n=1000)


def random_w(n, seed):
    return sample_covariates(n, np.eye(10), np.random.default_rng(seed))


def test_scenario_term_sets():
    s = {lab: ScenarioSpec.from_label(lab) for lab in LABELS}
    assert (s["A"].quadratic_terms, s["A"].interaction_terms) == ((), ())
    assert s["B"].quadratic_terms == (2,) and s["B"].interaction_terms == ()
    assert s["C"].quadratic_terms == (2, 4, 7) and s["C"].interaction_terms == ()
    assert s["D"].quadratic_terms == () and len(s["D"].interaction_terms) == 3
    assert s["E"].quadratic_terms == (2,) and s["E"].interaction_terms == s["D"].interaction_terms
    assert s["F"].quadratic_terms == () and len(s["F"].interaction_terms) == 10
    assert s["G"].quadratic_terms == s["C"].quadratic_terms
    assert s["G"].interaction_terms == s["F"].interaction_terms
    assert [(a, b) for _, _, a, b in s["D"].interaction_terms] == [(1, 3), (2, 4), (3, 5)]


def test_unknown_label():
    with pytest.raises(ConfigError, match="A, B, C, D, E, F, G"):
        ScenarioSpec.from_label("H")


def test_scenario_g_matches_transcription():
    spec = ScenarioSpec.from_label("G")
    W = random_w(500, 0)
    np.testing.assert_allclose(true_ps(spec, W), g_ps_transcribed(W, spec.coefficients.beta), rtol=0, atol=1e-12)


def test_true_ps_trivial_cases():
    W = random_w(50, 1)
    zero = identity_spec("G", beta=(0.0,) * 8)
    np.testing.assert_array_equal(true_ps(zero, W), 0.5)
    spec = identity_spec("A", beta=(0, 1, 0, 0, 0, 0, 0, 0))
    W = np.zeros((1, 10))
    W[0, 0] = 1.0
    assert true_ps(spec, W)[0] == pytest.approx(0.7311, abs=1e-4)


@pytest.mark.parametrize("label", LABELS)
def test_ps_ignores_outcome_only_covariates(label):
    spec = ScenarioSpec.from_label(label)
    W = random_w(300, 2)
    W2 = W.copy()
    W2[:, 7:] = np.random.default_rng(3).normal(size=(300, 3))
    np.testing.assert_array_equal(true_ps(spec, W), true_ps(spec, W2))


def test_outcome_ignores_treatment_only_covariates():
    c = CoefficientSet.default()
    W = random_w(300, 4)
    A = (np.arange(300) % 2).astype(float)
    W2 = W.copy()
    W2[:, 4:7] = np.random.default_rng(5).normal(size=(300, 3))
    np.testing.assert_array_equal(outcome_probability(A, W, c), outcome_probability(A, W2, c))


def test_outcome_trivial_cases():
    W = random_w(20, 6)
    null = CoefficientSet((0,) * 8, (0,) * 8, 0.0)
    np.testing.assert_array_equal(outcome_probability(np.ones(20), W, null), 0.5)
    c = CoefficientSet((0,) * 8, (0,) * 8, -0.4)
    assert outcome_probability(np.ones(1), W[:1], c)[0] == pytest.approx(expit(-0.4))
    assert expit(-0.4) == pytest.approx(0.4013, abs=1e-4)


def test_true_design_round_trip():
    for label in LABELS:
        spec = ScenarioSpec.from_label(label)
        W = random_w(200, 7)
        cols = {f"w{i + 1}": W[:, i] for i in range(10)}
        p = predict_proba(spec.true_coefficients(), spec.true_design(), cols)
        np.testing.assert_allclose(p, true_ps(spec, W), rtol=0, atol=1e-12)


def test_sample_covariates_identity_small():
    W = sample_covariates(4, np.eye(10), np.random.default_rng(0))
    assert W.shape == (4, 10)
    assert set(np.unique(W[:, BINARY_COLUMNS])) <= {0.0, 1.0}


def test_binary_columns_balanced_large_n():
    W = sample_covariates(100_000, np.eye(10), np.random.default_rng(1))
    assert np.all(np.abs(W[:, BINARY_COLUMNS].mean(axis=0) - 0.5) < 0.01)
    cont = np.delete(W, BINARY_COLUMNS, axis=1)
    assert np.all(np.abs(cont.mean(axis=0)) < 0.02)
    assert np.all(np.abs(cont.std(axis=0) - 1.0) < 0.02)


def test_latent_correlation_is_reproduced():
    corr = ScenarioSpec.from_label("A").correlation
    W = sample_covariates(200_000, corr, np.random.default_rng(2))
    # W2 and W4 are continuous; their partners W6 and W9 are dichotomized. A
    # point-biserial correlation with a median split is rho * sqrt(2/pi).
    r26 = np.corrcoef(W[:, 1], W[:, 5])[0, 1]
    assert r26 == pytest.approx(0.9 * np.sqrt(2 / np.pi), abs=0.01)


def test_bad_correlation_matrices():
    c = np.eye(10)
    c[0, 1] = c[1, 0] = 1.01
    with pytest.raises(ConfigError, match="outside"):
        cholesky(c)
    c = np.eye(10)
    c[0, 1] = c[1, 0] = 0.9
    c[0, 2] = c[2, 0] = 0.9
    c[1, 2] = c[2, 1] = -0.9
    with pytest.raises(FactorizationError) as err:
        cholesky(c)
    assert err.value.minor == 3
    assert "leading minor 3" in str(err.value)
    c = np.eye(10)
    c[0, 1] = 0.3
    with pytest.raises(ConfigError, match="symmetric"):
        cholesky(c)


def test_cholesky_reconstructs():
    corr = ScenarioSpec.from_label("A").correlation
    L = cholesky(corr)
    np.testing.assert_allclose(L @ L.T, corr, atol=1e-14)


def test_assign_treatment():
    ps = np.full(10, 0.999999)
    assert assign_treatment(ps, np.random.default_rng(0)).sum() >= 9
    a = assign_treatment(np.full(100_000, 0.5), np.random.default_rng(1))
    assert abs(a.mean() - 0.5) < 0.005
    s1 = assign_treatment(np.full(50, 0.3), rngmod.stream(9, rngmod.TREATMENT))
    s2 = assign_treatment(np.full(50, 0.3), rngmod.stream(9, rngmod.TREATMENT))
    np.testing.assert_array_equal(s1, s2)


def test_outcome_model_recovered_by_mle():
    c = CoefficientSet.default().replace(alpha=(-1.0, 0.3, -0.36, -0.73, -0.2, 0.71, -0.19, 0.26))
    rng = np.random.default_rng(10)
    n = 100_000
    W = sample_covariates(n, np.eye(10), rng)
    A = (rng.random(n) < 0.5).astype(float)
    Y = generate_outcome(A, W, c, rng)
    from pslab.glm import DesignSpec

    d = DesignSpec.from_names(["w1", "w2", "w3", "w4", "w8", "w9", "w10", "a"])
    cols = {f"w{i + 1}": W[:, i] for i in range(10)}
    cols["a"] = A
    fit = fit_logistic(d, cols, Y)
    np.testing.assert_allclose(fit.coefficients[:-1], c.alpha, atol=0.05)
    assert fit.coefficients[-1] == pytest.approx(c.gamma1, abs=0.05)


def test_generate_cohort_invariants():
    spec = ScenarioSpec.from_label("A", n=20000)
    c = generate_cohort(spec, 3)
    assert c.n == 20000
    assert set(np.unique(c.W[:, BINARY_COLUMNS])) <= {0.0, 1.0}
    assert np.all((c.true_ps > 0) & (c.true_ps < 1))
    assert abs(c.A.mean() - c.true_ps.mean()) < 3 * np.sqrt(0.25 / c.n)
    assert not c.W.flags.writeable


def test_generate_cohort_deterministic():
    spec = ScenarioSpec.from_label("C", n=500)
    a, b = generate_cohort(spec, 11), generate_cohort(spec, 11)
    for name in ("W", "A", "Y", "true_ps"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    c = generate_cohort(spec, 12)
    assert not np.array_equal(a.W, c.W)


def test_scenarios_share_covariate_stream():
    a = generate_cohort(ScenarioSpec.from_label("A", n=2000), 5)
    g = generate_cohort(ScenarioSpec.from_label("G", n=2000), 5)
    np.testing.assert_array_equal(a.W, g.W)
    assert not np.array_equal(a.A, g.A)


def test_fresh_replicate_cohorts_differ():
    spec = ScenarioSpec.from_label("A", n=300)
    assert not np.array_equal(generate_cohort(spec, 1, replicate=0).W, generate_cohort(spec, 1, replicate=1).W)


def test_csv_round_trip(tmp_path):
    c = generate_cohort(ScenarioSpec.from_label("B", n=50), 2)
    path = tmp_path / "c.csv"
    c.to_csv(path)
    assert path.read_text().splitlines()[0] == "w1,w2,w3,w4,w5,w6,w7,w8,w9,w10,a,y,true_ps"
    back = Cohort.from_csv(path)
    for name in ("W", "A", "Y", "true_ps"):
        np.testing.assert_array_equal(getattr(back, name), getattr(c, name))


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(ConfigError, match="header"):
        Cohort.from_csv(path)


def test_coefficient_set_validation():
    with pytest.raises(ValueError):
        CoefficientSet((0,) * 7, (0,) * 8)
    with pytest.raises(ValueError):
        CoefficientSet((0,) * 8, (0,) * 7 + (np.inf,))
    assert CoefficientSet((0,) * 8, (0,) * 8).gamma1 == -0.4
