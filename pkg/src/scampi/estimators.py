"""Scalar posterior mean/variance estimators and EM parameter updates.

Each estimator maps the per-index pseudo-measurement pair (Sigma, R) of the
AMP iteration to the posterior moments (fa, fv) under one of three priors:

* SNIPE -- sparsifying limit prior on the difference entries, gated by omega;
* uniform -- improper flat prior (identity denoiser);
* Bernoulli-Gaussian -- spike at zero plus N(a, v) slab with weight lambda.

The EM path works with the per-index posterior quantities (pi, gamma, nu)
of the Bernoulli-Gaussian model and maximizes the likelihood over
(lambda, a, v) in closed form. All ratios of Gaussians are evaluated in the
log domain so no intermediate exponential can overflow.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels

LAMBDA_CLAMP = (1e-6, 1.0 - 1e-6)
V_FLOOR = 1e-12


class NoSupportWarning(UserWarning):
    """EM update received all-zero support probabilities."""


@dataclass(frozen=True)
class SnipePrior:
    """Sparsifying limit prior; omega shifts the keep/kill log-odds gate."""

    omega: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.omega):
            raise ValueError("omega must be finite")


@dataclass(frozen=True)
class SparseGaussianPrior:
    """Spike-and-slab prior lam * N(a, v) + (1 - lam) * delta(0)."""

    lam: float
    a: float
    v: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"sparsity rate must be in [0, 1], got {self.lam}")
        if self.v <= 0.0:
            raise ValueError(f"slab variance must be positive, got {self.v}")


@dataclass(frozen=True)
class PosteriorMoments:
    fa: object
    fv: object


def _prep(Sigma, R):
    """Broadcast inputs to matching 1d float64 arrays; remember scalar-ness."""
    Sigma_a, R_a = np.broadcast_arrays(np.asarray(Sigma, dtype=np.float64),
                                       np.asarray(R, dtype=np.float64))
    scalar = Sigma_a.ndim == 0
    shape = Sigma_a.shape
    Sigma_f = np.ascontiguousarray(Sigma_a).reshape(-1)
    R_f = np.ascontiguousarray(R_a).reshape(-1)
    if np.any(Sigma_f <= 0.0):
        raise ValueError("Sigma must be positive")
    return Sigma_f, R_f, scalar, shape


def _pack(fa, fv, scalar, shape):
    if scalar:
        return PosteriorMoments(float(fa[0]), float(fv[0]))
    return PosteriorMoments(fa.reshape(shape), fv.reshape(shape))


def snipe_moments(Sigma, R, omega=0.0) -> PosteriorMoments:
    """Posterior moments under the SNIPE prior.

    fa = R * sigmoid(z) and fv = sigmoid(z) * (Sigma + R^2 * sigmoid(-z))
    with gate log-odds z = R^2 / (2 Sigma) - omega; algebraically equal to
    the textbook 1/(1 + e^{omega - R^2/2Sigma}) forms but immune to overflow.
    """
    if isinstance(omega, SnipePrior):
        omega = omega.omega
    Sigma_f, R_f, scalar, shape = _prep(Sigma, R)
    fa, fv = kernels.snipe_sweep(Sigma_f, R_f, float(omega))
    return _pack(fa, fv, scalar, shape)


def uniform_moments(Sigma, R) -> PosteriorMoments:
    """Flat-prior moments: the pseudo-measurement passes through unchanged."""
    Sigma_f, R_f, scalar, shape = _prep(Sigma, R)
    return _pack(R_f.copy(), Sigma_f.copy(), scalar, shape)


def bernoulli_gaussian_moments(Sigma, R, prior: SparseGaussianPrior) -> PosteriorMoments:
    """Spike-and-slab posterior moments.

    lam = 0 collapses to (0, 0) (all mass at zero); lam = 1 is the pure
    Gaussian-product posterior.
    """
    Sigma_f, R_f, scalar, shape = _prep(Sigma, R)
    fa, fv = kernels.bg_sweep(Sigma_f, R_f, prior.lam, prior.a, prior.v)
    return _pack(fa, fv, scalar, shape)


def em_posterior_quantities(Sigma, R, prior: SparseGaussianPrior):
    """Per-index (pi, gamma, nu): support probability and slab mean/variance.

    pi * gamma equals the Bernoulli-Gaussian posterior mean, which ties the
    EM statistics to the estimator output.
    """
    Sigma_f, R_f, scalar, shape = _prep(Sigma, R)
    pi, gamma, nu = kernels.bg_posterior_sweep(Sigma_f, R_f,
                                               prior.lam, prior.a, prior.v)
    if scalar:
        return float(pi[0]), float(gamma[0]), float(nu[0])
    return pi.reshape(shape), gamma.reshape(shape), nu.reshape(shape)


def em_update(pis, gammas, nus, prior: SparseGaussianPrior) -> SparseGaussianPrior:
    """Closed-form EM maximization of (lambda, a, v).

    lambda' = mean(pi); a' = sum(pi gamma) / sum(pi); v' = sum(pi (nu +
    (gamma - a')^2)) / sum(pi) with a' computed first and reused. lambda is
    clamped to LAMBDA_CLAMP and v floored at V_FLOOR to keep later
    iterations nondegenerate. All-zero pi returns the prior unchanged with
    a NoSupportWarning.
    """
    pis = np.asarray(pis, dtype=np.float64).reshape(-1)
    gammas = np.asarray(gammas, dtype=np.float64).reshape(-1)
    nus = np.asarray(nus, dtype=np.float64).reshape(-1)
    if not (pis.size == gammas.size == nus.size):
        raise ValueError("pi, gamma, nu must have equal length")
    sum_pi = float(np.sum(pis))
    if sum_pi <= 0.0:
        warnings.warn("all support probabilities are zero; prior left unchanged",
                      NoSupportWarning)
        return prior
    lam = sum_pi / pis.size
    a = float(np.sum(pis * gammas)) / sum_pi
    v = float(np.sum(pis * (nus + (gammas - a) ** 2))) / sum_pi
    lam = float(np.clip(lam, *LAMBDA_CLAMP))
    v = max(v, V_FLOOR)
    return SparseGaussianPrior(lam=lam, a=a, v=v)


def save_sweep_csv(path, Sigma, R, moments: PosteriorMoments):
    """Dump an estimator sweep table (Sigma, R, fa, fv) for external checks."""
    cols = np.column_stack([np.asarray(Sigma, np.float64).reshape(-1),
                            np.asarray(R, np.float64).reshape(-1),
                            np.asarray(moments.fa, np.float64).reshape(-1),
                            np.asarray(moments.fv, np.float64).reshape(-1)])
    np.savetxt(path, cols, delimiter=",", header="Sigma,R,fa,fv", comments="")
