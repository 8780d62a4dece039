import math

import numpy as np
import pytest

from lmdp_npg import (
    LogLinearPolicy,
    NaiveRandomPolicy,
    OkdPolyFeatures,
    OneHotFeatures,
    OneHotPolicy,
    ParameterOverflowError,
    SecretarySpec,
    SpPolyFeatures,
    build_features,
    feature_norm_bound,
    sp_generate_distribution,
)

from oracles import finite_difference_gradient


def test_sp_poly_feature_layout():
    feats = SpPolyFeatures(3)
    f, x = 0.5, 1.0
    phi = feats.state_features((f, x))
    assert phi == pytest.approx([1, 0.5, 0.25, 1, 0.5, 0.25])
    phi0 = feats.state_features((0.5, 0.0))
    assert phi0 == pytest.approx([1, 0.5, 0.25, 0, 0, 0])
    assert feats.dim == 6


def test_okd_poly_feature_layout():
    feats = OkdPolyFeatures(2)
    assert feats.dim == 32
    obs = (0.5, 0.25, 1.0, 0.0, 0.8)
    phi = feats.state_features(obs)
    # lexicographic in (f, s, v, r, q) exponents, f slowest
    assert phi[0] == 1.0
    assert phi[1] == pytest.approx(0.8)          # q^1
    assert phi[16] == pytest.approx(0.5)         # f^1
    assert phi[-1] == pytest.approx(0.5 * 0.25 * 1.0 * 0.0 * 0.8)
    # every entry is the corresponding monomial
    k = 0
    for ef in range(2):
        for es in range(2):
            for ev in range(2):
                for er in range(2):
                    for eq in range(2):
                        expected = (obs[0] ** ef) * (obs[1] ** es) * (obs[2] ** ev) \
                            * (obs[3] ** er) * (obs[4] ** eq)
                        assert phi[k] == pytest.approx(expected)
                        k += 1


def test_zero_theta_gives_half():
    feats = SpPolyFeatures(4)
    pol = LogLinearPolicy(feats)
    for obs in ((0.1, 0.0), (1.0, 1.0), (0.0, 0.0)):
        assert pol.prob_accept(obs) == 0.5
        assert pol.action_probs(obs) == pytest.approx([0.5, 0.5])


def test_saturated_logit_is_stable():
    feats = OneHotFeatures([(1.0,)])
    pol = LogLinearPolicy(feats, np.array([40.0]))
    p = pol.prob_accept((1.0,))
    assert abs(p - 1.0) < 1e-12
    assert math.isfinite(pol.log_prob((1.0,), 1))
    pol_med = LogLinearPolicy(feats, np.array([math.log(3.0)]))
    assert pol_med.prob_accept((1.0,)) == pytest.approx(0.75, abs=1e-12)


def test_parameter_overflow_raises():
    feats = OneHotFeatures([(1.0,)])
    pol = LogLinearPolicy(feats, np.array([math.nan]))
    with pytest.raises(ParameterOverflowError, match="parameter overflow"):
        pol.prob_accept((1.0,))


def test_score_identity_and_closed_form():
    rng = np.random.default_rng(0)
    feats = SpPolyFeatures(4)
    for _ in range(50):
        theta = rng.normal(size=feats.dim) * 2.0
        pol = LogLinearPolicy(feats, theta)
        obs = (float(rng.integers(1, 11)) / 10.0, float(rng.integers(2)))
        p = pol.prob_accept(obs)
        g_acc = pol.grad_log_prob(obs, 1)
        g_rej = pol.grad_log_prob(obs, 0)
        # expectation of the score under the policy vanishes
        assert np.max(np.abs(p * g_acc + (1 - p) * g_rej)) < 1e-12
        # closed forms match the generic identity phi(s,a) - E[phi(s,a')]
        phi = feats.state_features(obs)
        phi_acc, phi_rej = phi, np.zeros_like(phi)
        mean_phi = p * phi_acc + (1 - p) * phi_rej
        assert g_acc == pytest.approx(phi_acc - mean_phi, abs=1e-12)
        assert g_rej == pytest.approx(phi_rej - mean_phi, abs=1e-12)


def test_grad_log_prob_matches_finite_differences():
    feats = SpPolyFeatures(3)
    rng = np.random.default_rng(1)
    theta = rng.normal(size=feats.dim)
    obs = (0.7, 1.0)
    for action in (0, 1):
        g = LogLinearPolicy(feats, theta).grad_log_prob(obs, action)
        fd = finite_difference_gradient(
            lambda th: LogLinearPolicy(feats, th).log_prob(obs, action), theta, eps=1e-6)
        rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)
        assert rel.max() < 1e-6


def test_score_norm_bound():
    # ||grad ln pi|| <= 2 * feature bound (two-action difference features)
    feats = SpPolyFeatures(4)
    bound = feats.analytic_norm_bound()
    rng = np.random.default_rng(2)
    for _ in range(100):
        theta = rng.normal(size=feats.dim) * 3
        pol = LogLinearPolicy(feats, theta)
        obs = (float(rng.random()), float(rng.integers(2)))
        for a in (0, 1):
            assert np.linalg.norm(pol.grad_log_prob(obs, a)) <= 2 * bound + 1e-12


def test_feature_norm_bounds():
    spec = SecretarySpec(sp_generate_distribution(8, classical=True))
    fb = feature_norm_bound(SpPolyFeatures(4), spec, samples=200, seed=0)
    assert fb.analytic == pytest.approx(math.sqrt(8))
    assert fb.empirical <= fb.analytic + 1e-12
    # the all-ones state (1/n = 1, x = 1) attains sqrt(2 d0) at the last position
    fb1 = feature_norm_bound(SpPolyFeatures(1), spec, samples=200, seed=0)
    assert fb1.empirical <= math.sqrt(2) + 1e-12
    one_hot = feature_norm_bound(OneHotFeatures(spec.observations()), spec, samples=50, seed=1)
    assert one_hot.analytic == 1.0
    assert one_hot.empirical == pytest.approx(1.0)


def test_one_hot_policy_terminal_maps_to_zero():
    spec = SecretarySpec(sp_generate_distribution(5, classical=True))
    pol = OneHotPolicy(spec.observations(), np.linspace(-1, 1, len(spec.observations())))
    assert pol.prob_accept((0.0, 0.0)) == 0.5  # zero feature vector
    assert np.all(pol.grad_log_prob((0.0, 0.0), 1) == 0.0)


def test_with_theta_returns_new_immutable_policy():
    feats = SpPolyFeatures(2)
    pol = LogLinearPolicy(feats)
    pol2 = pol.with_theta(np.ones(feats.dim))
    assert pol.prob_accept((1.0, 1.0)) == 0.5
    assert pol2.prob_accept((1.0, 1.0)) > 0.5
    with pytest.raises(ValueError):
        pol.theta[0] = 3.0  # read-only


def test_naive_random_policy():
    pol = NaiveRandomPolicy()
    assert pol.prob_accept((0.3, 1.0)) == 0.5


def test_build_features_roundtrip():
    for feats in (SpPolyFeatures(4), OkdPolyFeatures(2)):
        desc = feats.describe()
        rebuilt = build_features(desc["kind"], desc["d0"])
        assert rebuilt.dim == feats.dim
    with pytest.raises(ValueError):
        build_features("mystery", 3)
