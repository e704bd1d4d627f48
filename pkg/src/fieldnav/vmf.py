"""von Mises-Fisher motion prior and the whole-body alignment reward.

The prior p(v | mu, kappa) = C3(kappa) * exp(kappa * mu . v) lives on the unit
sphere (d = 3 throughout); kappa = 0 degenerates to the uniform density
1/(4 pi).  The reward is the summed log-likelihood of observed per-part motion
directions under per-part priors derived from field queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ValidationError
from .field import FieldQuery

LOG_UNIFORM_SPHERE = -math.log(4.0 * math.pi)

_SMALL_KAPPA = 1e-4
_LARGE_KAPPA = 30.0
_UNIT_TOL = 1e-6
SPEED_FLOOR = 1e-3

_X_AXIS = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class VmfPrior:
    """Preferred direction and concentration for one body part."""

    mean_dir: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mean_dir", np.asarray(self.mean_dir, dtype=np.float64))
        if self.mean_dir.shape != (3,):
            raise ValidationError("mean_dir must be a 3-vector")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValidationError("kappa must be finite and >= 0")
        if self.kappa > 0 and abs(np.linalg.norm(self.mean_dir) - 1.0) > 1e-9:
            raise ValidationError("mean_dir must be unit-norm when kappa > 0")


@dataclass(frozen=True)
class MotionSample:
    """Unit motion direction of one part; invalid when the part is at rest."""

    direction: np.ndarray
    valid: bool

    def __post_init__(self):
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        if self.direction.shape != (3,):
            raise ValidationError("direction must be a 3-vector")
        if self.valid and abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ValidationError("valid samples must be unit-norm")


def motion_sample(velocity, speed_floor: float = SPEED_FLOOR) -> MotionSample:
    """Normalize a velocity; below the speed floor the direction is undefined."""
    v = np.asarray(velocity, dtype=np.float64)
    speed = float(np.linalg.norm(v))
    if speed < speed_floor:
        return MotionSample(_X_AXIS.copy(), valid=False)
    return MotionSample(v / speed, valid=True)


def log_vmf_normalizer(kappa: float) -> float:
    """log C3(kappa) = log( kappa / (4 pi sinh kappa) ), stable for all kappa.

    Uses a quadratic series below 1e-4 and a log-space form above 30 to avoid
    sinh overflow; kappa = 0 returns the uniform-sphere constant log(1/4pi).
    """
    if not np.isfinite(kappa) or kappa < 0:
        raise ValidationError("kappa must be finite and >= 0")
    if kappa < _SMALL_KAPPA:
        return LOG_UNIFORM_SPHERE - kappa * kappa / 6.0
    if kappa > _LARGE_KAPPA:
        return (
            math.log(kappa)
            - kappa
            - math.log(2.0 * math.pi)
            - math.log1p(-math.exp(-2.0 * kappa))
        )
    return math.log(kappa) - math.log(4.0 * math.pi) - math.log(math.sinh(kappa))


def vmf_log_density(prior: VmfPrior, v_hat) -> float:
    """log p(v_hat | prior); v_hat must be unit-norm to 1e-6."""
    v = np.asarray(v_hat, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise ValidationError(f"v_hat norm {np.linalg.norm(v)} is not unit")
    if prior.kappa > 0 and abs(np.linalg.norm(prior.mean_dir) - 1.0) > _UNIT_TOL:
        raise ValidationError("prior mean_dir is not unit")
    return log_vmf_normalizer(prior.kappa) + prior.kappa * float(prior.mean_dir @ v)


def derive_prior(query: FieldQuery) -> VmfPrior:
    """Prior direction/concentration from a weighted field query.

    mu follows the weighted vector's direction and kappa its magnitude scaled
    by kappa_max (already folded into query.kappa); a zero query collapses to
    the uniform prior.
    """
    norm = query.magnitude
    if norm == 0.0:
        return VmfPrior(_X_AXIS.copy(), 0.0)
    return VmfPrior(query.vector / norm, query.kappa)


def log_likelihood_reward(priors, samples) -> float:
    """Whole-body reward: sum_k [ log C3(kappa_k) + kappa_k * mu_k . v_k ].

    Priors and samples are index-matched per part.  Parts at rest (invalid
    samples) contribute only their log-normalizer, which keeps the reward
    continuous as speed crosses the floor.
    """
    priors = list(priors)
    samples = list(samples)
    if len(priors) != len(samples):
        raise ArityError(f"{len(priors)} priors vs {len(samples)} samples")
    total = 0.0
    for prior, sample in zip(priors, samples):
        if sample.valid:
            total += vmf_log_density(prior, sample.direction)
        else:
            total += log_vmf_normalizer(prior.kappa)
    return total
