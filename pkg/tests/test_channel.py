import numpy as np
import pytest

from noma_robust.channel import (
    Scenario, db_to_linear, generate_channels, linear_to_db, order_users, sample_error,
    trial_rng,
)


def test_generate_channels_deterministic():
    s = Scenario(seed=7)
    a, b = generate_channels(s, 3), generate_channels(s, 3)
    for f in ("h_hat", "h_true", "delta", "order"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = generate_channels(s, 4)
    assert not np.array_equal(a.h_hat, c.h_hat)


def test_independent_of_call_order():
    s = Scenario(seed=2)
    first = generate_channels(s, 10).h_hat
    for t in range(5):
        generate_channels(s, t)
    np.testing.assert_array_equal(generate_channels(s, 10).h_hat, first)


def test_ball_constraint_and_truth():
    s = Scenario(seed=1, epsilon=0.06)
    for t in range(50):
        cs = generate_channels(s, t)
        assert np.all(np.linalg.norm(cs.h_true - cs.h_hat, axis=1) <= 0.06 + 1e-12)
        norms = np.linalg.norm(cs.h_hat[cs.order], axis=1)
        assert np.all(np.diff(norms) >= 0)


def test_surface_sampling_on_sphere():
    s = Scenario(seed=1, epsilon=0.06)
    cs = generate_channels(s, 0, surface_only=True)
    np.testing.assert_allclose(np.linalg.norm(cs.delta, axis=1), 0.06, atol=1e-12)


def test_second_moment_without_pathloss():
    """E|h|^2 = M when path loss and shadowing are disabled."""
    M, n = 8, 100_000
    s = Scenario(M=M, K=1, pathloss_exp=0.0, shadow_std_db=0.0, epsilon=0.0, seed=5)
    # batch the draws through the same generator law
    rng = np.random.default_rng(5)
    v = (rng.standard_normal((n, M)) + 1j * rng.standard_normal((n, M))) / np.sqrt(2)
    mean = np.mean(np.sum(np.abs(v) ** 2, axis=1))
    assert abs(mean - M) <= 3 * M / np.sqrt(n) * np.sqrt(2)
    # and through generate_channels itself on a smaller sample
    h = np.array([generate_channels(s, t).h_hat[0] for t in range(20_000)])
    mean = np.mean(np.sum(np.abs(h) ** 2, axis=1))
    assert abs(mean - M) <= 3 * M / np.sqrt(20_000) * np.sqrt(2)
    assert np.var(h.ravel()) == pytest.approx(1.0, rel=0.05)


def test_sample_error_examples():
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(sample_error(rng, 3, 0.0), np.zeros(3))
    for _ in range(100):
        assert np.linalg.norm(sample_error(rng, 4, 0.2)) <= 0.2
        assert abs(np.linalg.norm(sample_error(rng, 4, 0.2, True)) - 0.2) <= 1e-12


def test_ball_volume_ratio():
    """Uniform in the complex 2-ball: P(|d| <= 1/2) = (1/2)^4."""
    rng = np.random.default_rng(42)
    n = 100_000
    norms = np.array([np.linalg.norm(sample_error(rng, 2, 1.0)) for _ in range(n)])
    assert abs(np.mean(norms <= 0.5) - 0.0625) <= 0.01


def test_order_users_examples():
    np.testing.assert_array_equal(order_users(np.array([[3.0], [1.0], [2.0]])), [1, 2, 0])
    np.testing.assert_array_equal(order_users(np.ones((4, 2))), [0, 1, 2, 3])
    np.testing.assert_array_equal(order_users(np.array([[1 + 1j, 0]])), [0])
    with pytest.raises(ValueError):
        order_users(np.zeros((0, 2)))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(M=0)
    with pytest.raises(ValueError):
        Scenario(epsilon=-0.1)
    with pytest.raises(ValueError):
        Scenario(min_dist_m=2000.0)
    with pytest.raises(ValueError):
        Scenario(K=3, noise_var=[0.1, 0.1])
    s = Scenario.from_db(10.0)
    assert s.gamma_min == pytest.approx((10.0, 10.0, 10.0))
    assert s.with_epsilon(0.02).epsilon == (0.02,) * 3


def test_db_round_trip():
    assert float(db_to_linear(10.0)) == pytest.approx(10.0)
    assert float(linear_to_db(db_to_linear(3.7))) == pytest.approx(3.7)


def test_trial_streams_differ():
    a = trial_rng(0, 0).random(4)
    b = trial_rng(0, 1).random(4)
    assert not np.array_equal(a, b)


def test_distance_range():
    s = Scenario(seed=3)
    for t in range(30):
        d = generate_channels(s, t).distance_m
        assert np.all((d >= 100) & (d <= 1000))
