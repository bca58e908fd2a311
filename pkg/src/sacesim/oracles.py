"""Closed-form Gaussian results used to check the simulation independently.

With the drift disabled every mode is an Ornstein-Uhlenbeck process, so
laws at grid times and the stationary law are explicit.
"""
import math

import numpy as np

from .spectral import eigenvalues


def ou_variance(q, t):
    """q_k (1 - exp(-2 lambda_k t)) / (2 lambda_k), written without expm1."""
    q = np.asarray(q, dtype=float)
    lam = eigenvalues(q.size)
    if math.isinf(t):
        return q / (2.0 * lam)
    return q * (1.0 - np.exp(-2.0 * lam * t)) / (2.0 * lam)


def gaussian_exp_neg_sq(mean, var):
    """E exp(-sum_k c_k^2) for independent c_k ~ N(mean_k, var_k)."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    d = 1.0 + 2.0 * var
    return float(np.prod(d**-0.5) * math.exp(-float(np.sum(mean**2 / d))))


def stationary_exp_neg_sq(q):
    """prod_k (1 + q_k / lambda_k)^(-1/2)."""
    q = np.asarray(q, dtype=float)
    return float(np.prod((1.0 + q / eigenvalues(q.size)) ** -0.5))


def constant_one_coefficients(n_modes):
    """<1, phi_k> = 2 sqrt(2) / (k pi) for odd k, 0 for even k."""
    k = np.arange(1, n_modes + 1)
    return np.where(k % 2 == 1, 2.0 * math.sqrt(2.0) / (k * math.pi), 0.0)
