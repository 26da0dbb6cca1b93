"""Gaussian-process surrogate with a squared-exponential kernel."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import log_ndtr, ndtr

LENGTH_SCALE_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)
# Diagonal added when the noise variance is zero, relative to the signal variance.
JITTER = 1e-10


def se_kernel(A: np.ndarray, B: np.ndarray, length_scale, signal_variance: float) -> np.ndarray:
    ls = np.asarray(length_scale, dtype=float)
    d = (A[:, None, :] - B[None, :, :]) / ls
    return signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))


@dataclass
class GpSurrogate:
    """GP regression on standardized targets.

    Length scales are picked per dimension from :data:`LENGTH_SCALE_GRID`
    by maximizing the log marginal likelihood unless fixed by the caller.
    """

    length_scale: tuple | None = None
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def fit(self, X, y) -> "GpSurrogate":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if len(X) == 0:
            raise ValueError("GP needs at least one observation")
        self.X_ = X
        self.y_mean_ = float(y.mean())
        scale = float(y.std())
        self.y_scale_ = scale if scale > 0 else 1.0
        self.z_ = (y - self.y_mean_) / self.y_scale_
        if self.length_scale is None:
            best = None
            for ls in itertools.product(LENGTH_SCALE_GRID, repeat=X.shape[1]):
                lml = self._factor(ls)
                if best is None or lml > best[0]:
                    best = (lml, ls)
            self.length_scale_ = best[1]
        else:
            self.length_scale_ = tuple(np.broadcast_to(self.length_scale, X.shape[1]).tolist())
        self._factor(self.length_scale_)
        return self

    def _factor(self, ls) -> float:
        K = se_kernel(self.X_, self.X_, ls, self.signal_variance)
        nugget = self.noise_variance / self.y_scale_ ** 2 + JITTER * self.signal_variance
        K[np.diag_indices_from(K)] += nugget
        self.chol_ = cho_factor(K, lower=True)
        self.alpha_ = cho_solve(self.chol_, self.z_)
        log_det = 2.0 * np.sum(np.log(np.diag(self.chol_[0])))
        n = len(self.z_)
        return float(-0.5 * self.z_ @ self.alpha_ - 0.5 * log_det - 0.5 * n * math.log(2 * math.pi))

    def log_marginal_likelihood(self) -> float:
        return self._factor(self.length_scale_)

    def predict(self, Xs, return_std: bool = True):
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = se_kernel(Xs, self.X_, self.length_scale_, self.signal_variance)
        mean = self.y_mean_ + self.y_scale_ * (Ks @ self.alpha_)
        if not return_std:
            return mean
        v = cho_solve(self.chol_, Ks.T)
        var = self.signal_variance - np.sum(Ks * v.T, axis=1)
        std = self.y_scale_ * np.sqrt(np.clip(var, 0.0, None))
        return mean, std


def probability_of_improvement(mu, sigma, f_best: float, xi: float):
    """PI for a maximization objective; a zero ``sigma`` gives 0 or 1."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - f_best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gap / np.where(sigma > 0, sigma, 1.0), 0.0)
    return np.where(sigma > 0, ndtr(z), (gap > 0).astype(float))


def log_probability_of_improvement(mu, sigma, f_best: float, xi: float):
    """Log of PI; keeps candidates distinguishable where PI underflows to 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - f_best - xi
    safe = np.where(sigma > 0, sigma, 1.0)
    degenerate = np.where(gap > 0, 0.0, -np.inf)
    return np.where(sigma > 0, log_ndtr(gap / safe), degenerate)
