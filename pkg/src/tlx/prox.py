"""Proximal mappings of the trimmed and truncated penalties.

For a fixed set of penalized groups the prox problem

    min_z  gamma * T_K(z) + addon(z) + 0.5 * ||z - x||^2

splits into independent per-group problems.  Each group therefore has a
penalized optimum and an unpenalized optimum; the gap between their
partial costs is what the group saves by being left unpenalized.  The
global minimizer leaves the ``K`` groups with the largest savings
unpenalized.  That rule is our own derivation (the per-group split is
exact once the penalized set is fixed); :func:`prox_bruteforce`
certifies it by enumerating every penalized set.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import InputError, SizeError
from .penalty import _check_level, as_groups, trimmed_l1_value

BRUTEFORCE_CAP = 10**5


@dataclass(frozen=True)
class SeparableAddon:
    """Separable term added to the trimmed penalty inside a prox.

    ``kind`` is one of ``none``, ``l1``, ``box`` or ``nonneg``.  Box
    bounds may be scalars or per-coordinate arrays; ``nonneg`` is a box
    with ``lo = 0`` on the constrained coordinates and ``hi = inf``.
    """

    kind: str = "none"
    eta: float = 0.0
    lo: object = -np.inf
    hi: object = np.inf

    def __post_init__(self):
        if self.kind not in ("none", "l1", "box", "nonneg"):
            raise InputError(f"unknown addon kind {self.kind!r}")
        if self.eta < 0:
            raise InputError("l1 weight must be nonnegative")
        if np.any(np.asarray(self.lo) > np.asarray(self.hi)):
            raise InputError("box requires lo <= hi")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def l1(cls, eta):
        return cls("l1", eta=float(eta))

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def nonneg(cls, mask=None):
        if mask is None:
            return cls("nonneg", lo=0.0)
        mask = np.asarray(mask, dtype=bool)
        return cls("nonneg", lo=np.where(mask, 0.0, -np.inf))

    def scaled(self, t):
        """Addon multiplied by ``t > 0`` (indicators are unchanged)."""
        if self.kind == "l1":
            return SeparableAddon.l1(self.eta * t)
        return self

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "l1":
            return self.eta * float(np.abs(z).sum())
        if self.kind in ("box", "nonneg"):
            inside = np.all((z >= self.lo) & (z <= self.hi))
            return 0.0 if inside else np.inf
        return 0.0

    def project(self, z):
        """Prox of the addon alone."""
        z = np.asarray(z, dtype=float)
        if self.kind == "l1":
            return soft_threshold(z, self.eta)
        if self.kind in ("box", "nonneg"):
            return np.clip(z, self.lo, self.hi)
        return z.copy()


@dataclass
class ProxResult:
    point: np.ndarray
    objective: float
    untrimmed: tuple


def soft_threshold(x, t):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _group_shrink(xg, t):
    norms = np.linalg.norm(xg, axis=1, keepdims=True)
    scale = np.zeros_like(norms)
    big = norms > t
    scale[big] = 1.0 - t / norms[big]
    return scale * xg


def _coord_bounds(addon, size):
    lo = np.broadcast_to(np.asarray(addon.lo, dtype=float), (size,))
    hi = np.broadcast_to(np.asarray(addon.hi, dtype=float), (size,))
    return lo, hi


def _check_addon_for_groups(addon, p):
    if p == 1 or addon.kind in ("none", "l1"):
        return
    if addon.kind == "nonneg":
        return
    raise InputError("box add-on is only supported for p = 1")


def _prox_objective(z, x, K, gamma, addon, p):
    quad = 0.5 * float(np.sum((z - x) ** 2))
    return gamma * trimmed_l1_value(z, K, p) + addon.value(z) + quad


def _candidates(xg, gamma, addon):
    """Penalized and unpenalized per-group optima (closed forms)."""
    p = xg.shape[1]
    if addon.kind == "l1":
        base = soft_threshold(xg, addon.eta)
    elif addon.kind in ("box", "nonneg"):
        lo, hi = _coord_bounds(addon, xg.size)
        base = np.clip(xg, lo.reshape(xg.shape), hi.reshape(xg.shape))
    else:
        base = xg.copy()
    if p == 1 and addon.kind == "box":
        lo, hi = _coord_bounds(addon, xg.size)
        pen = np.clip(soft_threshold(xg, gamma), lo.reshape(xg.shape), hi.reshape(xg.shape))
    else:
        pen = _group_shrink(base, gamma)
    return pen, base


def _group_costs(zg, xg, gamma, addon, penalized):
    cost = 0.5 * np.sum((zg - xg) ** 2, axis=1)
    if addon.kind == "l1":
        cost = cost + addon.eta * np.abs(zg).sum(axis=1)
    if penalized:
        cost = cost + gamma * np.linalg.norm(zg, axis=1)
    return cost


def prox_trimmed_l1(x, K, gamma, addon=None, p=1):
    """Global minimizer of ``gamma*T_K(z) + addon(z) + 0.5||z - x||^2``.

    Ties in the savings are broken toward the lowest group index, so the
    result is deterministic.  Groups that end up at zero are written as
    literal zeros.
    """
    addon = SeparableAddon.none() if addon is None else addon
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    xg = as_groups(x, p)
    _check_level(K, xg.shape[0])
    _check_addon_for_groups(addon, p)
    zg, keep = _savings_rule(xg, K, gamma, addon)
    z = zg.ravel()
    return ProxResult(z, _prox_objective(z, xg.ravel(), K, gamma, addon, p), tuple(int(i) for i in keep))


def _savings_rule(xg, K, gamma, addon):
    pen, free = _candidates(xg, gamma, addon)
    savings = _group_costs(pen, xg, gamma, addon, True) - _group_costs(free, xg, gamma, addon, False)
    keep = np.sort(np.argsort(-savings, kind="stable")[:K])
    pen[keep] = free[keep]
    return pen, keep


def prox_point(x, K, gamma, addon, p=1):
    """Point part of :func:`prox_trimmed_l1` without argument checks.

    Used inside solver loops where the arguments were validated once.
    """
    return _savings_rule(x.reshape(-1, p), K, gamma, addon)[0].ravel()


def prox_truncated_nuclear(X, K, gamma):
    """Partial singular value thresholding.

    Keeps the ``K`` leading singular values and soft-thresholds the rest
    by ``gamma``; this minimizes ``gamma*TK(Z) + 0.5||Z - X||_F^2``.
    """
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError("expected a matrix")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    _check_level(K, s.size, "min(rows, cols)")
    new = s.copy()
    new[K:] = np.maximum(s[K:] - gamma, 0.0)
    Z = (U * new) @ Vt
    objective = gamma * float(new[K:].sum()) + 0.5 * float(np.sum((s - new) ** 2))
    return ProxResult(Z, objective, tuple(range(K)))


# -- certifying oracle -------------------------------------------------------


def _scalar_argmin(x, w, eta, lo, hi):
    """argmin of w|v| + eta|v| + 0.5(v - x)^2 over [lo, hi] by candidates."""
    t = w + eta
    cands = [0.0, x - t, x + t, lo, hi]
    best_v, best_f = None, np.inf
    for v in cands:
        if not np.isfinite(v):
            continue
        v = min(max(v, lo), hi)
        f = t * abs(v) + 0.5 * (v - x) ** 2
        if f < best_f:
            best_v, best_f = v, f
    return best_v


def _ray_argmin(y, w):
    """argmin of w||v|| + 0.5||v - y||^2, searched along the ray of y."""
    r = float(np.linalg.norm(y))
    if r == 0.0:
        return np.zeros_like(y)
    best_t, best_f = 0.0, 0.5 * r * r
    t = r - w
    if t > 0:
        f = w * t + 0.5 * (t - r) ** 2
        if f < best_f:
            best_t = t
    return (best_t / r) * y


def _oracle_group(xi, w, addon, lo, hi):
    p = xi.size
    if p == 1:
        eta = addon.eta if addon.kind == "l1" else 0.0
        return np.array([_scalar_argmin(float(xi[0]), w, eta, float(lo[0]), float(hi[0]))])
    if addon.kind == "l1":
        y = np.array([_scalar_argmin(float(v), 0.0, addon.eta, -np.inf, np.inf) for v in xi])
    elif addon.kind == "nonneg":
        y = np.maximum(xi, lo)
    else:
        y = xi.copy()
    return _ray_argmin(y, w) if w > 0 else y


def prox_bruteforce(x, K, gamma, addon=None, p=1, cap=BRUTEFORCE_CAP):
    """Prox by enumerating every penalized set of size ``m - K``.

    Each group is solved independently by candidate search, so this shares
    nothing with the savings rule beyond the objective itself.
    """
    addon = SeparableAddon.none() if addon is None else addon
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    xg = as_groups(x, p)
    m = xg.shape[0]
    _check_level(K, m)
    _check_addon_for_groups(addon, p)
    count = comb(m, m - K)
    if count > cap:
        raise SizeError(f"{count} subsets exceed the cap of {cap}", count=count)

    lo, hi = _coord_bounds(addon, xg.size)
    lo, hi = lo.reshape(xg.shape), hi.reshape(xg.shape)
    pen = np.array([_oracle_group(xg[i], gamma, addon, lo[i], hi[i]) for i in range(m)])
    free = np.array([_oracle_group(xg[i], 0.0, addon, lo[i], hi[i]) for i in range(m)])
    pen_cost = _group_costs(pen, xg, gamma, addon, True)
    free_cost = _group_costs(free, xg, gamma, addon, False)

    best, best_cost = None, np.inf
    for trimmed in combinations(range(m), m - K):
        mask = np.zeros(m, dtype=bool)
        mask[list(trimmed)] = True
        cost = pen_cost[mask].sum() + free_cost[~mask].sum()
        if cost < best_cost:
            best, best_cost = mask, cost
    zg = np.where(best[:, None], pen, free)
    z = zg.ravel()
    untrimmed = tuple(int(i) for i in np.flatnonzero(~best))
    return ProxResult(z, _prox_objective(z, xg.ravel(), K, gamma, addon, p), untrimmed)
