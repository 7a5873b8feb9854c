import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pslab import kernels
from pslab.methods import compute_caliper, match_nearest

BACKENDS = ["python"] + (["cython"] if kernels.compiled_greedy_match is not None else [])


def brute_force_greedy(ps, A, caliper, order):
    """Scan every free control for each treated subject in ``order``."""
    free = [j for j in range(len(ps)) if A[j] == 0]
    pairs = []
    for t in order:
        best, best_d = None, None
        for j in free:
            d = abs(ps[t] - ps[j])
            if best is None or d < best_d or (d == best_d and j < best):
                best, best_d = j, d
        if best is None or best_d > caliper:
            continue
        pairs.append((t, best))
        free.remove(best)
    return pairs


def treated_order(A, seed):
    treated = np.flatnonzero(np.asarray(A) == 1)
    return treated[np.random.default_rng(seed).permutation(treated.size)]


@pytest.mark.parametrize("backend", BACKENDS)
def test_unique_nearest_within_caliper(backend):
    ps = np.array([0.50, 0.48, 0.60])
    A = np.array([1, 0, 0])
    m = match_nearest(ps, A, 0.05, np.random.default_rng(0), backend=backend)
    assert m.pairs.tolist() == [[0, 1]]


@pytest.mark.parametrize("backend", BACKENDS)
def test_caliper_excludes(backend):
    m = match_nearest(np.array([0.5, 0.6]), np.array([1, 0]), 0.05, np.random.default_rng(0), backend=backend)
    assert len(m) == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_ties_go_to_lowest_control_index(backend):
    # controls at equal distance on both sides, and duplicate PS values
    ps = np.array([0.7, 0.5, 0.5, 0.3, 0.7, 0.5])
    A = np.array([0, 0, 1, 0, 0, 0])
    m = match_nearest(ps, A, 1.0, np.random.default_rng(0), backend=backend)
    assert m.pairs.tolist() == [[2, 1]]
    ps = np.array([0.6, 0.4, 0.5])
    A = np.array([0, 0, 1])
    m = match_nearest(ps, A, 1.0, np.random.default_rng(0), backend=backend)
    assert m.pairs.tolist() == [[2, 0]]


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_caliper_matches_exact_ties_only(backend):
    ps = np.array([0.2, 0.2, 0.3, 0.31])
    A = np.array([1, 0, 1, 0])
    m = match_nearest(ps, A, 0.0, np.random.default_rng(1), backend=backend)
    assert sorted(m.pairs.tolist()) == [[0, 1]]


@pytest.mark.parametrize("backend", BACKENDS)
def test_empty_arms(backend):
    m = match_nearest(np.array([0.2, 0.3]), np.array([1, 1]), 0.1, np.random.default_rng(0), backend=backend)
    assert len(m) == 0 and m.pairs.shape == (0, 2)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_brute_force_greedy(backend, seed):
    rng = np.random.default_rng(seed)
    n = 20 if seed < 20 else 200
    # coarse grid forces plenty of exact PS ties
    ps = np.round(rng.uniform(0.05, 0.95, n), 2 if seed % 2 else 6)
    A = (rng.random(n) < 0.4).astype(int)
    caliper = [0.0, 0.01, 0.05, 1.0][seed % 4]
    m = match_nearest(ps, A, caliper, np.random.default_rng(seed), backend=backend)
    expected = brute_force_greedy(ps, A, caliper, treated_order(A, seed))
    assert [tuple(p) for p in m.pairs.tolist()] == expected


def test_backends_identical_on_large_input():
    if kernels.compiled_greedy_match is None:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(5)
    ps = rng.beta(2, 3, 14000)
    A = (rng.random(14000) < ps).astype(int)
    cal = compute_caliper(ps, A)
    a = match_nearest(ps, A, cal, np.random.default_rng(9), backend="python")
    b = match_nearest(ps, A, cal, np.random.default_rng(9), backend="cython")
    np.testing.assert_array_equal(a.pairs, b.pairs)


@settings(max_examples=200, deadline=None)
@given(
    ps=st.lists(st.floats(0.01, 0.99), min_size=2, max_size=40),
    bits=st.lists(st.booleans(), min_size=40, max_size=40),
    caliper=st.floats(0.0, 0.5),
    seed=st.integers(0, 1000),
)
def test_greedy_step_optimality(ps, bits, caliper, seed):
    ps = np.array(ps)
    A = np.array(bits[: ps.size], dtype=int)
    m = match_nearest(ps, A, caliper, np.random.default_rng(seed))
    assert [tuple(p) for p in m.pairs.tolist()] == brute_force_greedy(ps, A, caliper, treated_order(A, seed))


def test_caliper_formula():
    ps = np.array([0.4, 0.6, 0.4, 0.6])
    A = np.array([1, 1, 0, 0])
    assert compute_caliper(ps, A) == pytest.approx(0.1 * 0.1414213562373095, rel=1e-12)
    assert compute_caliper(ps, A, multiplier=0.0) == 0.0
    assert compute_caliper(np.full(4, 0.3), A) == 0.0


def test_caliper_pooled_sd_independent_computation():
    rng = np.random.default_rng(3)
    ps = rng.uniform(0.1, 0.9, 50)
    A = (np.arange(50) < 20).astype(int)
    t, c = ps[A == 1], ps[A == 0]
    ss = ((t - t.mean()) ** 2).sum() + ((c - c.mean()) ** 2).sum()
    assert compute_caliper(ps, A, 0.1) == pytest.approx(0.1 * np.sqrt(ss / 48), rel=1e-12)


def test_caliper_needs_two_per_arm():
    from pslab.errors import UndefinedVarianceError

    with pytest.raises(UndefinedVarianceError):
        compute_caliper(np.array([0.2, 0.3, 0.4]), np.array([1, 0, 0]))


def test_match_order_is_seeded():
    rng = np.random.default_rng(0)
    ps = rng.uniform(size=100)
    A = (rng.random(100) < 0.5).astype(int)
    a = match_nearest(ps, A, 0.02, np.random.default_rng(1))
    b = match_nearest(ps, A, 0.02, np.random.default_rng(1))
    np.testing.assert_array_equal(a.pairs, b.pairs)


def test_negative_caliper_rejected():
    with pytest.raises(ValueError):
        match_nearest(np.array([0.5, 0.4]), np.array([1, 0]), -0.1, np.random.default_rng(0))
