"""Split scores.  Both are gains: larger is better."""

from __future__ import annotations

import numpy as np


def variance_gain(sum_l: float, n_l: int, sum_r: float, n_r: int) -> float:
    if n_l < 1 or n_r < 1:
        raise ValueError("both sides of a split need at least one sample")
    return float(variance_gains(np.array([sum_l], dtype=float), np.array([n_l]), sum_l + sum_r, n_l + n_r)[0])


def variance_gains(sum_l: np.ndarray, n_l: np.ndarray, total: float, n: int) -> np.ndarray:
    """(n_L*E[Y_L]^2 + n_R*E[Y_R]^2 - n*E[Y]^2) / n, vectorised over candidates."""
    sum_l = np.asarray(sum_l, dtype=np.float64)
    n_l = np.asarray(n_l, dtype=np.float64)
    sum_r = total - sum_l
    n_r = n - n_l
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_l = sum_l / n_l
        mean_r = sum_r / n_r
        mean = total / n
        return (n_l * mean_l**2 + n_r * mean_r**2 - n * mean**2) / n


def _entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    out = np.zeros_like(p)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -q * np.log(q) - (1 - q) * np.log1p(-q)
    return out


def cross_entropy_gain(sum_l: float, n_l: int, sum_r: float, n_r: int) -> float:
    if n_l < 1 or n_r < 1:
        raise ValueError("both sides of a split need at least one sample")
    return float(cross_entropy_gains(np.array([sum_l], dtype=float), np.array([n_l]), sum_l + sum_r, n_l + n_r)[0])


def cross_entropy_gains(sum_l: np.ndarray, n_l: np.ndarray, total: float, n: int) -> np.ndarray:
    """Parent entropy minus size-weighted child entropies (natural log)."""
    sum_l = np.asarray(sum_l, dtype=np.float64)
    n_l = np.asarray(n_l, dtype=np.float64)
    n_r = n - n_l
    with np.errstate(divide="ignore", invalid="ignore"):
        h_l = _entropy(np.atleast_1d(sum_l / n_l))
        h_r = _entropy(np.atleast_1d((total - sum_l) / n_r))
    h = _entropy(np.array([total / n]))[0]
    return h - (n_l / n) * h_l - (n_r / n) * h_r


GAINS = {"regression": variance_gains, "binary": cross_entropy_gains}
