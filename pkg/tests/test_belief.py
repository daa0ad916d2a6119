"""Belief-engine tests: bit encodings, likelihoods, posterior recursion."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiaudit.belief import (
    AuditSelection,
    hypothesis_bits,
    hypothesis_index,
    likelihood_vector,
    malicious_clients,
    map_hypothesis,
    marginal_malicious,
    observation_likelihood,
    posterior_update,
    should_block,
    uniform_belief,
)


# --- independent oracle ----------------------------------------------------
# One-shot Bayes over a full observation history, written from first
# principles (own bit expansion, explicit probability products).  The
# recursive engine is checked against this, never the other way round.


def oracle_bits(j, n):
    return [(j >> (n - 1 - i)) & 1 for i in range(n)]


def oracle_posterior(history, q, n):
    h = 2**n
    post = []
    for j in range(h):
        bits = oracle_bits(j, n)
        p = 1.0 / h
        for obs in history:
            for client, value in obs.items():
                p *= (1.0 - q) if bits[client - 1] == value else q
        post.append(p)
    total = sum(post)
    return np.array([p / total for p in post])


# --- bit encoding ------------------------------------------------------------


def test_hypothesis_bits_examples():
    assert hypothesis_bits(3, 5).tolist() == [0, 0, 0, 1, 1]
    assert hypothesis_bits(0, 5).tolist() == [0, 0, 0, 0, 0]
    assert hypothesis_bits(31, 5).tolist() == [1, 1, 1, 1, 1]


def test_hypothesis_bits_marks_high_clients():
    # index 3 marks clients 4 and 5 for a 5-client board
    assert malicious_clients(hypothesis_bits(3, 5)) == (4, 5)


def test_hypothesis_bits_range_errors():
    with pytest.raises(ValueError):
        hypothesis_bits(32, 5)
    with pytest.raises(ValueError):
        hypothesis_bits(-1, 5)
    with pytest.raises(ValueError):
        hypothesis_bits(0, 0)
    with pytest.raises(ValueError):
        hypothesis_bits(0, 11)


@given(st.integers(min_value=1, max_value=8), st.data())
def test_hypothesis_bits_bijective(n, data):
    j = data.draw(st.integers(min_value=0, max_value=2**n - 1))
    assert hypothesis_index(hypothesis_bits(j, n)) == j


def test_audit_selection_subset_matches_popcount():
    sel = AuditSelection(3, 5)
    assert sel.subset == (4, 5)
    assert len(sel) == 2
    assert AuditSelection(0, 5).subset == ()
    assert AuditSelection.from_clients([4, 5], 5).action == 3


def test_audit_selection_rejects_out_of_range():
    with pytest.raises(ValueError):
        AuditSelection(32, 5)
    with pytest.raises(ValueError):
        AuditSelection.from_clients([6], 5)


# --- likelihood --------------------------------------------------------------


def test_likelihood_two_matching_bits():
    # clients 4 and 5 read malicious, hypothesis 3 says exactly that
    assert observation_likelihood({4: 1, 5: 1}, 3, 0.2, 5) == pytest.approx(0.64)


def test_likelihood_empty_observation_is_one():
    for j in range(8):
        assert observation_likelihood({}, j, 0.37, 3) == 1.0


def test_likelihood_single_mismatch_is_q():
    assert observation_likelihood({1: 1}, 0, 0.2, 5) == pytest.approx(0.2)


def test_likelihood_rejects_bad_q():
    for q in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            observation_likelihood({1: 1}, 0, q, 2)
        with pytest.raises(ValueError):
            likelihood_vector({1: 1}, q, 2)


def test_likelihood_vector_agrees_with_scalar():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        audited = [c for c in range(1, n + 1) if rng.random() < 0.6]
        obs = {c: int(rng.integers(0, 2)) for c in audited}
        q = float(rng.uniform(0.05, 0.45))
        vec = likelihood_vector(obs, q, n)
        for j in range(2**n):
            assert vec[j] == pytest.approx(observation_likelihood(obs, j, q, n))


# --- posterior recursion ------------------------------------------------------


def test_posterior_single_client_single_reading():
    post = posterior_update(np.array([0.5, 0.5]), {1: 1}, 0.2)
    np.testing.assert_allclose(post, [0.2, 0.8])


def test_posterior_empty_observation_returns_prior():
    prior = np.array([0.7, 0.1, 0.1, 0.1])
    post = posterior_update(prior, {}, 0.3)
    np.testing.assert_array_equal(post, prior)
    assert post is not prior


def test_posterior_two_clients_both_read_honest():
    post = posterior_update(uniform_belief(2), {1: 0, 2: 0}, 0.2)
    np.testing.assert_allclose(post, [0.64, 0.16, 0.16, 0.04])
    np.testing.assert_allclose(post, oracle_posterior([{1: 0, 2: 0}], 0.2, 2))


def test_posterior_normalization_invariant():
    rng = np.random.default_rng(1)
    belief = uniform_belief(4)
    for _ in range(50):
        audited = [c for c in range(1, 5) if rng.random() < 0.5]
        obs = {c: int(rng.integers(0, 2)) for c in audited}
        belief = posterior_update(belief, obs, 0.25)
        assert abs(belief.sum() - 1.0) <= 1e-9
        assert (belief >= 0).all()


def test_recursion_matches_oracle_over_histories():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        q = float(rng.choice([0.1, 0.2, 0.3]))
        rounds = int(rng.integers(1, 21))
        belief = uniform_belief(n)
        history = []
        for _ in range(rounds):
            audited = [c for c in range(1, n + 1) if rng.random() < 0.5]
            obs = {c: int(rng.integers(0, 2)) for c in audited}
            history.append(obs)
            belief = posterior_update(belief, obs, q)
        np.testing.assert_allclose(
            belief, oracle_posterior(history, q, n), atol=1e-10, rtol=0
        )


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=5),
    q=st.floats(min_value=0.05, max_value=0.45),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_permutation_equivariance(n, q, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)  # position i of the new board holds old client perm[i]+1

    belief = uniform_belief(n)
    audited = [c for c in range(1, n + 1) if rng.random() < 0.6]
    obs = {c: int(rng.integers(0, 2)) for c in audited}
    posterior = posterior_update(belief, obs, q)

    # relabel: new client i+1 is old client perm[i]+1
    obs_perm = {}
    for new_pos in range(n):
        old_client = int(perm[new_pos]) + 1
        if old_client in obs:
            obs_perm[new_pos + 1] = obs[old_client]
    posterior_perm = posterior_update(belief, obs_perm, q)

    # hypothesis-index map induced by the relabeling
    index_map = np.empty(2**n, dtype=int)
    for j in range(2**n):
        bits = hypothesis_bits(j, n)
        new_bits = [bits[perm[i]] for i in range(n)]
        index_map[j] = hypothesis_index(new_bits)
    expected = np.zeros_like(posterior)
    expected[index_map] = posterior
    np.testing.assert_array_equal(posterior_perm, expected)


def test_monotone_information_concentrates_belief():
    # auditing everyone every round drives the truth's posterior past 0.99
    # within 30 rounds in at least 95% of seeded episodes
    n, q, episodes = 4, 0.2, 500
    hits = 0
    for seed in range(episodes):
        rng = np.random.default_rng(10_000 + seed)
        true_bits = rng.integers(0, 2, size=n)
        true_j = hypothesis_index(true_bits)
        belief = uniform_belief(n)
        for _ in range(30):
            obs = {
                c: int(true_bits[c - 1]) ^ int(rng.random() < q)
                for c in range(1, n + 1)
            }
            belief = posterior_update(belief, obs, q)
            if belief[true_j] > 0.99:
                hits += 1
                break
    assert hits / episodes >= 0.95


# --- blocking / summaries ----------------------------------------------------


def test_should_block_cases():
    belief = np.array([0.85, 0.05, 0.05, 0.05])
    assert should_block(belief, 0.8)
    assert not should_block(uniform_belief(5), 0.8)
    exact = np.array([0.8, 0.1, 0.1, 0.0])
    assert not should_block(exact, 0.8)  # strict comparison


def test_should_block_never_fires_at_uniform():
    for n in range(1, 8):
        h = 2**n
        assert not should_block(uniform_belief(n), 1.0 / h + 1e-12)


def test_should_block_rejects_bad_threshold():
    with pytest.raises(ValueError):
        should_block(uniform_belief(2), 0.0)
    with pytest.raises(ValueError):
        should_block(uniform_belief(2), 1.0)


def test_map_hypothesis_tie_breaks_low():
    assert map_hypothesis(np.array([0.1, 0.7, 0.1, 0.1])) == 1
    assert map_hypothesis(uniform_belief(3)) == 0
    assert map_hypothesis(np.array([0.4, 0.4, 0.2, 0.0])) == 0


def test_marginal_malicious():
    np.testing.assert_allclose(marginal_malicious(np.array([0.2, 0.8])), [0.8])
    np.testing.assert_allclose(marginal_malicious(uniform_belief(3)), [0.5] * 3)
    np.testing.assert_allclose(
        marginal_malicious(np.array([0.0, 0.0, 0.0, 1.0])), [1.0, 1.0]
    )
