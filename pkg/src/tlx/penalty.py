"""Trimmed group l1 and truncated nuclear penalties.

A grouped vector ``z`` of length ``m * p`` is read as ``m`` consecutive
groups of size ``p``; group ``i`` occupies ``z[i*p:(i+1)*p]``.  The
trimmed norm leaves the ``K`` largest groups unpenalized and sums the
Euclidean norms of the remaining ``m - K``.
"""

from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import InputError, VerificationError

# singular values below RANK_RTOL * sigma_1 count as zero
RANK_RTOL = 1e-10

# step schedule for the one-sided difference oracle
ORACLE_STEPS = (1e-4, 1e-5, 1e-6)


def as_groups(z, p=1, m=None):
    """Reshape a flat vector into an ``(m, p)`` array of groups."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise InputError(f"grouped vector must be 1-d, got shape {z.shape}")
    if p < 1 or z.size == 0 or z.size % p:
        raise InputError(f"length {z.size} is not a positive multiple of p={p}")
    if m is not None and m * p != z.size:
        raise InputError(f"length {z.size} does not match m*p = {m}*{p}")
    return z.reshape(-1, p)


def group_norms(z, p=1):
    """Euclidean norm of each group."""
    return np.linalg.norm(as_groups(z, p), axis=1)


def _check_level(K, m, what="m"):
    if not (0 <= K <= m - 1) or int(K) != K:
        raise InputError(f"K={K} must be an integer in [0, {what}-1] with {what}={m}")


def trimmed_l1_value(z, K, p=1, m=None):
    """Sum of the ``m - K`` smallest group norms of ``z``.

    With ``K = 0`` this is the group l1 norm; with ``p = 1`` it is the
    ordinary trimmed l1 norm.  The value is zero exactly when at most
    ``K`` groups are nonzero.
    """
    norms = np.linalg.norm(as_groups(z, p, m), axis=1)
    _check_level(K, norms.size)
    return float(np.sort(norms)[: norms.size - K].sum())


def _deltas(zg, dg):
    # one-sided derivative of ||z_i + t d_i|| at t = 0, per group
    norms = np.linalg.norm(zg, axis=1)
    out = np.linalg.norm(dg, axis=1)
    nz = norms > 0
    out[nz] = np.einsum("ij,ij->i", zg[nz], dg[nz]) / norms[nz]
    return out, norms


def trimmed_l1_dir_deriv(z, K, d, p=1):
    """Exact directional derivative of the trimmed norm at ``z`` along ``d``.

    Groups strictly below the K-th largest norm always contribute; among
    the groups tied with it, the cheapest ones fill the remaining
    ``m - K - |below|`` slots.
    """
    zg = as_groups(z, p)
    dg = as_groups(d, p)
    if zg.shape != dg.shape:
        raise InputError(f"point and direction shapes differ: {zg.shape} vs {dg.shape}")
    m = zg.shape[0]
    _check_level(K, m)
    deltas, norms = _deltas(zg, dg)
    if K == 0:
        return float(deltas.sum())
    kth = np.sort(norms)[::-1][K - 1]
    below = norms < kth
    tied = norms == kth
    need = m - K - int(below.sum())
    fill = np.sort(deltas[tied])[:need]
    return float(deltas[below].sum() + fill.sum())


def largest_k_norm(x, K):
    """Sum of the ``K`` largest absolute entries of ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    if not (1 <= K <= x.size) or int(K) != K:
        raise InputError(f"K={K} must be an integer in [1, {x.size}]")
    return float(np.sort(np.abs(x))[::-1][:K].sum())


def singular_values(X):
    """Singular values in nonincreasing order."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or 0 in X.shape:
        raise InputError(f"expected a nonempty matrix, got shape {X.shape}")
    return np.linalg.svd(X, compute_uv=False)


def numerical_rank(X, rtol=RANK_RTOL):
    s = singular_values(X)
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def truncated_nuclear_value(X, K):
    """Sum of all singular values after the ``K`` largest."""
    s = singular_values(X)
    _check_level(K, s.size, "min(rows, cols)")
    return float(s[K:].sum())


class ShrinkDirection(NamedTuple):
    direction: np.ndarray
    degenerate: bool


def truncated_shrink_direction(X, K):
    """Direction that scales the trailing singular values toward zero.

    Returns ``-U diag(0, ..., 0, s_{K+1}, ..., s_q) V^T`` for the computed
    SVD of ``X``.  Along it the truncated nuclear norm has derivative
    ``-truncated_nuclear_value(X, K)``.  A zero matrix yields a zero
    direction with ``degenerate=True``.
    """
    X = np.asarray(X, dtype=float)
    s = singular_values(X)
    _check_level(K, s.size, "min(rows, cols)")
    if not s[0] > 0:
        return ShrinkDirection(np.zeros_like(X), True)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    tail = s.copy()
    tail[:K] = 0.0
    return ShrinkDirection(-(U * tail) @ Vt, False)


class DirDerivEstimate(NamedTuple):
    value: float
    error: float


def numeric_dir_deriv(F: Callable, x, d, steps: Optional[tuple] = None):
    """One-sided difference estimate of ``F'(x; d)``.

    Difference quotients ``(F(x + h d) - F(x)) / h`` on a decreasing step
    schedule are combined pairwise by Richardson extrapolation, which
    cancels the linear error term of piecewise smooth functions.  The
    finest extrapolant is returned; ``error`` is its distance to the
    coarser one.
    """
    steps = ORACLE_STEPS if steps is None else tuple(steps)
    if len(steps) < 3:
        raise InputError("need at least three steps")
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    f0 = float(F(x))
    quotients = []
    for h in steps:
        fh = float(F(x + h * d))
        if not (np.isfinite(f0) and np.isfinite(fh)):
            raise VerificationError(f"non-finite evaluation at step {h}")
        quotients.append((fh - f0) / h)
    extrap = []
    for (h1, q1), (h2, q2) in zip(zip(steps, quotients), zip(steps[1:], quotients[1:])):
        r = h1 / h2
        extrap.append((r * q2 - q1) / (r - 1.0))
    return DirDerivEstimate(float(extrap[-1]), float(abs(extrap[-1] - extrap[-2])))
