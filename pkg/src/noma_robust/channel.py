"""Scenario parameters, channel realizations and the SIC decoding order."""

from dataclasses import dataclass, field, replace

import numpy as np

DISTANCE_LAWS = ("uniform_distance", "uniform_area")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def _per_user(value, K, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(K, float(arr[0]))
    if arr.shape != (K,):
        raise ValueError(f"{name} must be a scalar or have {K} entries")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class Scenario:
    """Physical and design parameters of one downlink.

    ``epsilon``, ``gamma_min`` (linear) and ``noise_var`` accept a scalar or
    one value per user and are stored per user.
    """

    M: int = 8
    K: int = 3
    epsilon: tuple = 0.06
    gamma_min: tuple = 10.0
    noise_var: tuple = 0.01
    cell_radius_m: float = 1000.0
    min_dist_m: float = 100.0
    shadow_std_db: float = 8.0
    pathloss_exp: float = 3.8
    seed: int = 0
    distance_law: str = "uniform_distance"

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be >= 1")
        set_ = object.__setattr__
        set_(self, "epsilon", _per_user(self.epsilon, self.K, "epsilon"))
        set_(self, "gamma_min", _per_user(self.gamma_min, self.K, "gamma_min"))
        set_(self, "noise_var", _per_user(self.noise_var, self.K, "noise_var"))
        if min(self.epsilon) < 0:
            raise ValueError("epsilon must be >= 0")
        if min(self.gamma_min) <= 0 or min(self.noise_var) <= 0:
            raise ValueError("gamma_min and noise_var must be > 0")
        if not 0 < self.min_dist_m < self.cell_radius_m:
            raise ValueError("need 0 < min_dist_m < cell_radius_m")
        if self.distance_law not in DISTANCE_LAWS:
            raise ValueError(f"distance_law must be one of {DISTANCE_LAWS}")

    @classmethod
    def from_db(cls, gamma_min_db=10.0, **kwargs):
        return cls(gamma_min=db_to_linear(gamma_min_db), **kwargs)

    def with_gamma_db(self, gamma_db):
        return replace(self, gamma_min=db_to_linear(gamma_db))

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class ChannelSet:
    """Channels of one trial; rows are users in their original indexing."""

    h_hat: np.ndarray
    h_true: np.ndarray
    delta: np.ndarray
    order: np.ndarray
    distance_m: np.ndarray = field(default=None, repr=False)
    gain: np.ndarray = field(default=None, repr=False)

    def decoded(self):
        """``(h_hat, h_true, delta)`` permuted to decoding order (weakest first)."""
        o = self.order
        return self.h_hat[o], self.h_true[o], self.delta[o]


def trial_rng(seed, trial_index):
    """Independent random stream for one trial (counter-style seeding)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),)))


def sample_error(rng, dim, epsilon, surface_only=False):
    """Error vector with norm ``epsilon`` (sphere) or at most ``epsilon`` (ball).

    Ball samples are uniform in the volume of the complex ``dim``-ball, i.e.
    the real ``2*dim``-ball.  The same number of random draws is consumed for
    every ``epsilon`` so streams stay aligned across error bounds.
    """
    z = rng.standard_normal(2 * dim)
    u = rng.random()
    v = z[:dim] + 1j * z[dim:]
    nv = np.linalg.norm(v)
    direction = v / nv if nv > 0 else np.eye(dim, dtype=np.complex128)[0]
    radius = epsilon if surface_only else epsilon * u ** (1.0 / (2 * dim))
    return radius * direction


def order_users(h_hat):
    """Permutation sorting users by ascending channel norm (ties: lower index)."""
    norms = np.linalg.norm(np.atleast_2d(h_hat), axis=1)
    if norms.size == 0:
        raise ValueError("need at least one user")
    return np.argsort(norms, kind="stable")


def generate_channels(s, trial_index, surface_only=False):
    """Draw estimated and true channels for ``trial_index``.

    Deterministic in ``(s.seed, trial_index)``.  Estimation errors are drawn
    uniformly in each user's uncertainty ball (on its surface with
    ``surface_only``).
    """
    rng = trial_rng(s.seed, trial_index)
    K, M = s.K, s.M
    u = rng.random(K)
    if s.distance_law == "uniform_distance":
        d = s.min_dist_m + (s.cell_radius_m - s.min_dist_m) * u
    else:
        d = np.sqrt(s.min_dist_m ** 2 + (s.cell_radius_m ** 2 - s.min_dist_m ** 2) * u)
    shadow_db = s.shadow_std_db * rng.standard_normal(K)
    gain = 10.0 ** (shadow_db / 10.0) * (d / s.min_dist_m) ** (-s.pathloss_exp)
    v = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2.0)
    h_hat = np.sqrt(gain)[:, None] * v
    delta = np.stack([sample_error(rng, M, s.epsilon[k], surface_only) for k in range(K)])
    for a in (h_hat, delta):
        a.setflags(write=False)
    h_true = h_hat + delta
    h_true.setflags(write=False)
    return ChannelSet(h_hat=h_hat, h_true=h_true, delta=delta, order=order_users(h_hat),
                      distance_m=d, gain=gain)
