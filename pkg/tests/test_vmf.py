import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldnav.errors import ArityError, ValidationError
from fieldnav.field import BodyPartState, FieldQuery
from fieldnav.vmf import (
    LOG_UNIFORM_SPHERE,
    MotionSample,
    VmfPrior,
    derive_prior,
    log_likelihood_reward,
    log_vmf_normalizer,
    motion_sample,
    vmf_log_density,
)
from oracles import random_rotation_matrix, sphere_mc_integral

# High-precision references (30-digit evaluation of the closed form).
LOG_C3_AT_0 = -2.531024246969291
LOG_C3_AT_1 = -2.6924636085404864


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _query(vector, kappa):
    part = BodyPartState(0, np.zeros(3), np.zeros(3), is_root=True, radius=0.1)
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    mean = vector / norm if norm > 0 else np.array([1.0, 0.0, 0.0])
    return FieldQuery(
        part=part,
        vector=vector,
        root_weight=1.0,
        urgency=norm,
        mean_dir=mean,
        kappa=kappa,
    )


# ---------------------------------------------------------------------------
# Normalizer
# ---------------------------------------------------------------------------


def test_log_normalizer_at_zero_is_uniform_sphere():
    assert log_vmf_normalizer(0.0) == pytest.approx(LOG_C3_AT_0, abs=1e-12)
    assert LOG_UNIFORM_SPHERE == pytest.approx(-math.log(4 * math.pi), abs=1e-15)


def test_log_normalizer_at_one():
    assert log_vmf_normalizer(1.0) == pytest.approx(LOG_C3_AT_1, abs=1e-12)


def test_log_normalizer_branch_continuity():
    # The series and closed-form branches meet at kappa = 1e-4.
    k = 1e-4
    series = log_vmf_normalizer(np.nextafter(k, 0.0))
    closed = log_vmf_normalizer(k)
    assert abs(series - closed) < 1e-10


def test_log_normalizer_large_kappa_branch():
    # Continuity at the overflow-guard switch and stability far beyond it.
    lo = log_vmf_normalizer(30.0)
    hi = log_vmf_normalizer(np.nextafter(30.0, 31.0))
    assert abs(lo - hi) < 1e-12
    assert np.isfinite(log_vmf_normalizer(5000.0))


def test_log_normalizer_rejects_negative():
    with pytest.raises(ValidationError):
        log_vmf_normalizer(-0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 100.0))
def test_log_normalizer_monotone_decreasing(kappa):
    step = max(kappa * 1e-3, 1e-3)
    assert log_vmf_normalizer(kappa + step) < log_vmf_normalizer(kappa)


@pytest.mark.parametrize("kappa", [0.0, 0.1, 1.0, 10.0, 50.0])
def test_density_normalizes_on_sphere(kappa):
    mu = _unit([0.3, -0.5, 0.8])
    integral = sphere_mc_integral(kappa, mu, 1_000_000, seed=int(kappa * 10) + 1)
    assert abs(integral - 1.0) <= 1e-3


# ---------------------------------------------------------------------------
# Density
# ---------------------------------------------------------------------------


def test_density_uniform_for_zero_kappa():
    prior = VmfPrior(np.array([1.0, 0.0, 0.0]), 0.0)
    for v in ([0, 0, 1], [0, 1, 0], _unit([1, 1, 1])):
        assert vmf_log_density(prior, _unit(v)) == pytest.approx(LOG_C3_AT_0, abs=1e-12)


def test_density_at_mean_direction():
    mu = _unit([0.0, 1.0, 0.0])
    prior = VmfPrior(mu, 1.0)
    assert vmf_log_density(prior, mu) == pytest.approx(LOG_C3_AT_1 + 1.0, abs=1e-12)


def test_density_antisymmetry_is_two_kappa():
    rng = np.random.default_rng(0)
    for _ in range(10):
        mu = _unit(rng.normal(size=3))
        kappa = rng.uniform(0.1, 20)
        prior = VmfPrior(mu, kappa)
        fwd = vmf_log_density(prior, mu)
        bwd = vmf_log_density(prior, -mu)
        assert fwd - bwd == pytest.approx(2 * kappa, rel=1e-12)


def test_density_validates_unit_norm():
    prior = VmfPrior(np.array([1.0, 0.0, 0.0]), 1.0)
    with pytest.raises(ValidationError):
        vmf_log_density(prior, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValidationError):
        VmfPrior(np.array([1.0, 1.0, 0.0]), 1.0)
    VmfPrior(np.array([9.0, 9.0, 9.0]), 0.0)  # kappa = 0 exempts mu


def test_density_monotone_in_kappa():
    mu = _unit([1.0, 2.0, -1.0])
    kappas = [0.1, 0.5, 1.0, 3.0, 10.0]
    aligned = [vmf_log_density(VmfPrior(mu, k), mu) for k in kappas]
    opposed = [vmf_log_density(VmfPrior(mu, k), -mu) for k in kappas]
    assert all(b > a for a, b in zip(aligned, aligned[1:]))
    assert all(b < a for a, b in zip(opposed, opposed[1:]))


# ---------------------------------------------------------------------------
# Prior derivation
# ---------------------------------------------------------------------------


def test_derive_prior_degenerate():
    prior = derive_prior(_query([0.0, 0.0, 0.0], 0.0))
    assert prior.kappa == 0.0


def test_derive_prior_magnitude_scaling():
    q_root = _query([0.0, 1.0, 0.0], kappa=10.0)  # w0 w1 = 1
    prior = derive_prior(q_root)
    assert prior.kappa == pytest.approx(10.0)
    assert np.allclose(prior.mean_dir, [0, 1, 0])
    q_other = _query([0.0, 0.5, 0.0], kappa=5.0)  # non-root at the same state
    assert derive_prior(q_other).kappa == pytest.approx(5.0)
    assert np.allclose(derive_prior(q_other).mean_dir, [0, 1, 0])


# ---------------------------------------------------------------------------
# Motion samples and the reward
# ---------------------------------------------------------------------------


def test_motion_sample_speed_floor():
    slow = motion_sample(np.array([1e-4, 0.0, 0.0]))
    assert not slow.valid
    fast = motion_sample(np.array([0.5, 0.0, 0.0]))
    assert fast.valid
    assert np.allclose(fast.direction, [1, 0, 0])
    with pytest.raises(ValidationError):
        MotionSample(np.array([2.0, 0.0, 0.0]), valid=True)


def test_reward_uniform_sum():
    priors = [VmfPrior(np.array([1.0, 0.0, 0.0]), 0.0) for _ in range(13)]
    samples = [MotionSample(np.array([0.0, 0.0, 1.0]), True) for _ in range(13)]
    want = 13 * LOG_C3_AT_0
    assert log_likelihood_reward(priors, samples) == pytest.approx(want, rel=1e-12)


def test_reward_aligned_sum():
    rng = np.random.default_rng(1)
    mus = [_unit(rng.normal(size=3)) for _ in range(13)]
    priors = [VmfPrior(mu, 1.0) for mu in mus]
    samples = [MotionSample(mu, True) for mu in mus]
    want = 13 * (LOG_C3_AT_1 + 1.0)
    assert log_likelihood_reward(priors, samples) == pytest.approx(want, rel=1e-12)


def test_reward_invalid_samples_contribute_normalizer_only():
    mu = np.array([1.0, 0.0, 0.0])
    priors = [VmfPrior(mu, 2.0)]
    at_rest = [MotionSample(mu, valid=False)]
    assert log_likelihood_reward(priors, at_rest) == pytest.approx(
        log_vmf_normalizer(2.0), rel=1e-12
    )


def test_reward_arity_error():
    priors = [VmfPrior(np.array([1.0, 0, 0]), 1.0)] * 3
    samples = [MotionSample(np.array([1.0, 0, 0]), True)] * 2
    with pytest.raises(ArityError):
        log_likelihood_reward(priors, samples)


def test_reward_argmax_at_mean_directions():
    rng = np.random.default_rng(2)
    mus = [_unit(rng.normal(size=3)) for _ in range(13)]
    kappas = rng.uniform(0.2, 15.0, size=13)
    priors = [VmfPrior(mu, k) for mu, k in zip(mus, kappas)]
    best = log_likelihood_reward(priors, [MotionSample(mu, True) for mu in mus])
    for _ in range(100):
        other = [MotionSample(_unit(rng.normal(size=3)), True) for _ in range(13)]
        assert log_likelihood_reward(priors, other) < best


def test_reward_rotation_invariance():
    rng = np.random.default_rng(3)
    mus = [_unit(rng.normal(size=3)) for _ in range(13)]
    kappas = rng.uniform(0.0, 10.0, size=13)
    vs = [_unit(rng.normal(size=3)) for _ in range(13)]
    priors = [VmfPrior(mu, k) for mu, k in zip(mus, kappas)]
    samples = [MotionSample(v, True) for v in vs]
    base = log_likelihood_reward(priors, samples)
    for seed in range(5):
        rot = random_rotation_matrix(np.random.default_rng(seed))
        priors_r = [VmfPrior(_unit(rot @ mu), k) for mu, k in zip(mus, kappas)]
        samples_r = [MotionSample(_unit(rot @ v), True) for v in vs]
        assert log_likelihood_reward(priors_r, samples_r) == pytest.approx(
            base, abs=1e-9
        )
