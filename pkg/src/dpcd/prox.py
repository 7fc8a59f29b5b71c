"""Separable proximal operators, applied one coordinate at a time."""

import numpy as np


def apply_prox(regularizer, lam, v, t, j=0):
    """prox of t*psi_j at v for the given separable regularizer.

    none: identity. l1: soft threshold at t*lam, with sign(0) = 0.
    l2_squared: v / (1 + t*lam). box: clamp to [lo[j], hi[j]].
    """
    if t <= 0:
        raise ValueError("step size t must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    kind = regularizer.kind
    if kind == "none":
        return v
    if kind == "l1":
        tau = t * lam
        if v > tau:
            return v - tau
        if v < -tau:
            return v + tau
        return 0.0
    if kind == "l2_squared":
        return v / (1.0 + t * lam)
    return float(min(max(v, regularizer.lo[j]), regularizer.hi[j]))


def apply_prox_vector(regularizer, lam, v, t):
    """Vectorized prox of t*psi at v; psi is separable so this maps apply_prox."""
    if t <= 0:
        raise ValueError("step size t must be positive")
    kind = regularizer.kind
    if kind == "none":
        return np.asarray(v, dtype=np.float64).copy()
    if kind == "l1":
        tau = t * lam
        return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
    if kind == "l2_squared":
        return np.asarray(v) / (1.0 + t * lam)
    return np.clip(v, regularizer.lo, regularizer.hi)
