import numpy as np
import pytest

from noma_robust.certify import (
    achieved_sinr, certify_design, min_achieved_sinr, nominal_sinr, sampled_min_sinr,
    worst_case_sinr,
)
from noma_robust.channel import Scenario, generate_channels
from noma_robust.formulation import design


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_achieved_orthogonal_interference():
    a = 0.7
    w = np.array([[1.0, 0.0], [0.0, 2.0]])
    h1 = np.array([a, 0.0])
    assert achieved_sinr(w, h1, np.zeros(2), 0.01, 0) == pytest.approx(a ** 2 / 0.01)


def test_achieved_zero_delta_has_no_residue():
    rng = np.random.default_rng(0)
    w, h = rand_c(rng, 3, 4), rand_c(rng, 4)
    direct = abs(np.vdot(h, w[2])) ** 2 / 0.02
    assert achieved_sinr(w, h, np.zeros(4), 0.02, 2) == pytest.approx(direct, rel=1e-12)


def test_achieved_direct_formula():
    rng = np.random.default_rng(1)
    w, d = rand_c(rng, 3, 4), 0.1 * rand_c(rng, 4)
    h = rand_c(rng, 4) + d
    k = 1
    num = abs(sum(h.conj() * w[k])) ** 2
    den = abs(sum(d.conj() * w[0])) ** 2 + abs(sum(h.conj() * w[2])) ** 2 + 0.05
    assert achieved_sinr(w, h, d, 0.05, k) == pytest.approx(num / den, rel=1e-12)


def test_worst_case_zero_eps_is_nominal():
    rng = np.random.default_rng(2)
    w, h = rand_c(rng, 2, 3), rand_c(rng, 3)
    r = worst_case_sinr(w, h, 0.0, 0.01, 0)
    assert r.worst_case == pytest.approx(nominal_sinr(w, h, 0.01, 0), rel=1e-9)


def test_worst_case_scalar_closed_form():
    p = 2.0
    r = worst_case_sinr(np.array([[np.sqrt(p)]]), np.array([1.0]), 0.3, 0.01, 0)
    assert r.worst_case == pytest.approx(0.7 ** 2 * p / 0.01, rel=1e-8)
    assert r.certified and r.lambda_star >= 0


def test_degenerate_ball_returns_zero():
    r = worst_case_sinr(np.array([[1.0, 0.0]]), np.array([0.2, 0.0]), 0.5, 0.01, 0)
    assert r.worst_case == pytest.approx(0.0, abs=1e-6)
    assert r.certified


@pytest.mark.parametrize("seed", range(4))
def test_lossless_against_sampling(seed):
    rng = np.random.default_rng(100 + seed)
    w, h = rand_c(rng, 2, 2), rand_c(rng, 2)
    for k in range(2):
        cert = worst_case_sinr(w, h, 0.1, 0.01, k).worst_case
        sampled = sampled_min_sinr(w, h, 0.1, 0.01, k, 100_000, rng)
        assert cert <= sampled * (1 + 1e-9)
        assert (sampled - cert) / sampled <= 0.02


def test_worst_le_nominal_and_monotone_in_eps():
    rng = np.random.default_rng(3)
    for _ in range(5):
        w, h = rand_c(rng, 3, 4), rand_c(rng, 4)
        for k in range(3):
            vals = [worst_case_sinr(w, h, e, 0.01, k).worst_case for e in (0, 0.02, 0.06, 0.1)]
            assert vals[0] <= nominal_sinr(w, h, 0.01, k) + 1e-9
            assert all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_scale_covariance_single_user():
    rng = np.random.default_rng(4)
    w, h = rand_c(rng, 1, 3), rand_c(rng, 3)
    a = worst_case_sinr(w, h, 0.1, 0.01, 0, tol=1e-12).worst_case
    b = worst_case_sinr(np.sqrt(3.0) * w, h, 0.1, 0.01, 0, tol=1e-12).worst_case
    assert b == pytest.approx(3.0 * a, rel=1e-9)


def test_robust_designs_certify():
    """Every recovered or rank-one robust design meets its targets for all pairs."""
    s = Scenario(M=4, K=2, epsilon=0.02, gamma_min=3.0, seed=11, pathloss_exp=0.0,
                 shadow_std_db=0.0)
    checked = 0
    for t in range(6):
        cs = generate_channels(s, t)
        d = design(s, cs, "robust")
        if not d.solved or (d.rank_flag and not d.recovered):
            continue
        for rep in certify_design(d, cs, s):
            assert rep.worst_case >= 3.0 * (1 - 1e-4)
        assert min_achieved_sinr(d, cs, s) >= 3.0 * 10 ** (-1e-4)
        checked += 1
    assert checked >= 3


def test_zero_eps_robust_design_meets_target():
    s = Scenario(M=4, K=3, epsilon=0.0, gamma_min=10.0, seed=3)
    cs = generate_channels(s, 0)
    d = design(s, cs, "robust")
    assert 10 * np.log10(min_achieved_sinr(d, cs, s)) >= 10 - 1e-3


def test_oma_min_sinr_is_rate_equivalent():
    s = Scenario(M=4, K=2, epsilon=0.0, gamma_min=3.0, seed=3)
    cs = generate_channels(s, 1)
    d = design(s, cs, "oma")
    assert d.solved
    assert min_achieved_sinr(d, cs, s) == pytest.approx(3.0, rel=1e-5)
