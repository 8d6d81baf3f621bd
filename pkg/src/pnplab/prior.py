"""Gaussian-mixture priors with closed-form smoothed densities and scores.

A mixture with isotropic per-component covariance stays a mixture after
Gaussian smoothing (the component variances just grow by sigma^2), so the
smoothed log-density, its gradient, and the exact posterior mean under
additive Gaussian noise are all available in closed form. That gives two
independent routes to the optimal denoiser: the score route
``y + sigma^2 * grad log p(y)`` and the direct posterior-mean route, which
the test suite holds against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GmmPrior"]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_points(y, dim: int):
    """View ``y`` as an (m, dim) batch; report whether it was a single vector."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        if y.size != dim:
            raise ValueError(f"point has dim {y.size}, expected {dim}")
        return y[None, :], True
    if y.ndim == 2:
        if y.shape[1] != dim:
            raise ValueError(f"points have dim {y.shape[1]}, expected {dim}")
        return y, False
    raise ValueError(f"points must be 1-D or 2-D, got shape {y.shape}")


@dataclass(frozen=True)
class GmmPrior:
    """Finite Gaussian mixture with isotropic per-component covariance.

    Parameters
    ----------
    weights : (K,) positive reals summing to 1.
    means : (K, n) component means.
    variances : (K,) positive per-component variances (covariance ``v_k * I``).
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu[:, None]
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty 1-D vector")
        if np.any(w <= 0):
            raise ValueError("all mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if mu.ndim != 2 or mu.shape[0] != w.size:
            raise ValueError("means must be a (K, n) array matching the weights")
        if v.shape != w.shape or np.any(v <= 0):
            raise ValueError("variances must be positive, one per component")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(v))):
            raise ValueError("prior parameters must be finite")
        for name, arr in (("weights", w), ("means", mu), ("variances", v)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def mean(self) -> np.ndarray:
        """Mixture mean ``sum_k w_k mu_k``."""
        return self.weights @ self.means

    @classmethod
    def from_config(cls, config: dict) -> "GmmPrior":
        for key in ("weights", "means", "variances"):
            if key not in config:
                raise ValueError(f"prior config missing required field {key!r}")
        return cls(config["weights"], config["means"], config["variances"])

    # -- densities ---------------------------------------------------------

    def _component_logpdf(self, points: np.ndarray, sigma: float) -> np.ndarray:
        """(m, K) array of ``log w_k + log N(y; mu_k, (v_k + sigma^2) I)``."""
        t = self.variances + sigma * sigma
        sq = (
            np.sum(points * points, axis=1)[:, None]
            + np.sum(self.means * self.means, axis=1)[None, :]
            - 2.0 * points @ self.means.T
        )
        sq = np.maximum(sq, 0.0)
        n = self.dim
        return (
            np.log(self.weights)[None, :]
            - 0.5 * n * (_LOG_2PI + np.log(t))[None, :]
            - 0.5 * sq / t[None, :]
        )

    def log_density(self, y, sigma: float = 0.0):
        """Log-density of the noise-smoothed mixture at noise level ``sigma``.

        ``sigma = 0`` gives the prior itself. Evaluated with log-sum-exp so
        points far from every component stay finite.
        """
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        points, single = _as_points(y, self.dim)
        logs = self._component_logpdf(points, sigma)
        top = logs.max(axis=1)
        out = top + np.log(np.sum(np.exp(logs - top[:, None]), axis=1))
        return float(out[0]) if single else out

    def responsibilities(self, y, sigma: float = 0.0):
        """Posterior component probabilities at noise level ``sigma``.

        Computed as a log-space softmax; when every component underflows the
        max-shift leaves a hard assignment to the nearest component.
        """
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        points, single = _as_points(y, self.dim)
        logs = self._component_logpdf(points, sigma)
        logs = logs - logs.max(axis=1, keepdims=True)
        r = np.exp(logs)
        r /= r.sum(axis=1, keepdims=True)
        return r[0] if single else r

    def score(self, y, sigma: float = 0.0):
        """Gradient of the smoothed log-density with respect to ``y``."""
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        points, single = _as_points(y, self.dim)
        t = self.variances + sigma * sigma
        r = self.responsibilities(points, sigma) / t[None, :]
        out = r @ self.means - points * r.sum(axis=1)[:, None]
        return out[0] if single else out

    # -- denoising ---------------------------------------------------------

    def mmse_denoise(self, y, sigma: float):
        """Posterior mean via the score route: ``y + sigma^2 * score(y, sigma)``."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        points, single = _as_points(y, self.dim)
        out = points + (sigma * sigma) * self.score(points, sigma)
        return out[0] if single else out

    def posterior_mean(self, y, sigma: float):
        """Posterior mean by direct mixture algebra, independent of the score.

        Each component contributes its Wiener-shrunk estimate
        ``mu_k + v_k / (v_k + sigma^2) * (y - mu_k)`` weighted by the
        responsibilities. Agrees with :meth:`mmse_denoise` to round-off; the
        two are kept as separate code paths on purpose.
        """
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        points, single = _as_points(y, self.dim)
        t = self.variances + sigma * sigma
        rho = self.variances / t
        r = self.responsibilities(points, sigma)
        out = (r * (1.0 - rho)[None, :]) @ self.means + points * (r @ rho)[:, None]
        return out[0] if single else out

    # -- sampling ----------------------------------------------------------

    def sample_pairs(self, sigma: float, count: int, seed: int):
        """Draw ``count`` (clean, noisy) pairs, noisy = clean + sigma * xi.

        Deterministic given ``seed``: same seed, bitwise-identical arrays.
        Returns two (count, n) arrays.
        """
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        comps = rng.choice(self.n_components, size=count, p=self.weights)
        clean = self.means[comps] + np.sqrt(self.variances[comps])[:, None] * (
            rng.standard_normal((count, self.dim))
        )
        noisy = clean + sigma * rng.standard_normal((count, self.dim))
        return clean, noisy
