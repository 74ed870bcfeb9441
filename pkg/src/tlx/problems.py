"""Loss families, their constants, and seeded instance generators.

Every problem is ``f(x_0, x_1, ..., x_L) + sum_l gamma_l * penalty_l``
where the penalties (trimmed l1 on ``D_l x_l - c_l`` or truncated
nuclear on a matrix variable) are kept separate from the loss.  Vector
points are flat arrays laid out block after block; matrix families use
a 2-d array.

Families
--------
sparse_ols, power1, logistic, svm, robust_reg, mcv, trend_filter,
nonneg_ols, nmf_cluster, portfolio, sparse_eigen (vector) and
lowrank_ols, matrix_completion, multiclass, robust_pca, linear_matrix
(matrix).  ``linear_matrix`` is the linear loss ``C . X`` used by the
counterexample; it has no generator.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapabilityError, InputError
from .penalty import group_norms
from .prox import SeparableAddon, soft_threshold

SCHEMA_VERSION = 1

# residuals or margins within this distance of a kink are treated as on it
KINK_TOL = 1e-6


def rng_from_seed(seed):
    """Counter-based generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(int(seed)))


def difference_matrix(order, n):
    """First- or second-order difference matrix of shape ``(n-order, n)``.

    Rows carry the stencils ``(1, -1)`` and ``(1, -2, 1)``.
    """
    if order not in (1, 2):
        raise InputError(f"order must be 1 or 2, got {order}")
    if n < order + 1:
        raise InputError(f"n={n} too small for order {order}")
    stencil = (1.0, -1.0) if order == 1 else (1.0, -2.0, 1.0)
    D = np.zeros((n - order, n))
    for k, s in enumerate(stencil):
        D[np.arange(n - order), np.arange(n - order) + k] = s
    return D


def linear_trend_projection(b):
    """Least-squares fit of ``b`` by ``alpha + beta * t`` for ``t = 1..n``."""
    b = np.asarray(b, dtype=float)
    n = b.size
    if n < 3:
        raise InputError("need at least 3 samples")
    X = np.column_stack([np.ones(n), np.arange(1, n + 1, dtype=float)])
    coef = np.linalg.solve(X.T @ X, X.T @ b)
    return X @ coef


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PenaltySpec:
    """One penalty term attached to block ``block`` of the variable.

    ``kind='trimmed'`` penalizes ``T_{K,m,p}(D x_block - c)`` (``D=None``
    means identity, ``c=None`` means zero); ``witness`` is a point with
    ``D witness = c``.  ``kind='truncated'`` penalizes the truncated
    nuclear norm of the matrix variable.
    """

    block: int
    K: int
    m: int
    p: int = 1
    D: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    witness: Optional[np.ndarray] = None
    kind: str = "trimmed"

    @property
    def identity(self):
        return self.D is None and self.c is None

    def argument(self, xl):
        z = xl if self.D is None else self.D @ xl
        return z if self.c is None else z - self.c

    def apply(self, dl):
        return dl if self.D is None else self.D @ dl


@dataclass(frozen=True)
class LossProfile:
    smooth: Optional[float] = None
    lipschitz_l1: Optional[float] = None
    lipschitz_l2: Optional[float] = None
    lipschitz_nuclear: Optional[float] = None
    convex: bool = True


@dataclass(frozen=True)
class LossSplit:
    """``f(x) = h(A x)`` with ``h`` prox-friendly; ``A=None`` is identity."""

    A: Optional[np.ndarray]
    prox: Callable  # prox(v, t) = argmin_u t*h(u) + 0.5||u - v||^2


@dataclass(frozen=True)
class ProblemInstance:
    family: str
    data: dict
    blocks: tuple
    penalties: tuple
    constraint: str = "none"
    shape: Optional[tuple] = None
    truth: dict = field(default_factory=dict)

    @property
    def is_matrix(self):
        return self.shape is not None

    @property
    def size(self):
        return int(np.prod(self.shape)) if self.is_matrix else int(sum(self.blocks))

    @property
    def L(self):
        return len(self.penalties)

    @property
    def K(self):
        return tuple(pen.K for pen in self.penalties)

    def zeros(self):
        return np.zeros(self.shape) if self.is_matrix else np.zeros(self.size)

    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.blocks)]).astype(int)

    def block(self, x, l):
        """View of block ``l`` (0 is the unpenalized block)."""
        if self.is_matrix:
            return x
        off = self.offsets()
        return x[off[l]:off[l + 1]]

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        want = self.shape if self.is_matrix else (self.size,)
        if x.shape != want:
            raise InputError(f"point has shape {x.shape}, expected {want}")
        return x

    def penalty_arguments(self, x):
        return [pen.argument(self.block(x, pen.block)) for pen in self.penalties]


# -- family implementations ------------------------------------------------


class _Family:
    matrix = False
    convex = True
    constraint = "none"

    def build(self, data, K):
        raise NotImplementedError

    def smooth_value(self, P, x):
        raise CapabilityError(f"{P.family} has no smooth loss part")

    def smooth_grad(self, P, x):
        raise CapabilityError(f"{P.family} has no gradient")

    def nonsmooth_value(self, P, x):
        return 0.0

    def nonsmooth_dir_deriv(self, P, x, d, tol):
        return 0.0

    def value(self, P, x):
        return self.smooth_value(P, x) + self.nonsmooth_value(P, x)

    def dir_deriv(self, P, x, d, tol):
        return float(np.sum(self.smooth_grad(P, x) * d)) + self.nonsmooth_dir_deriv(P, x, d, tol)

    def profile(self, P):
        return LossProfile(convex=self.convex)

    def addons(self, P):
        return [SeparableAddon.none() for _ in P.penalties]

    def project_free(self, P, x0):
        return x0

    def split(self, P):
        raise CapabilityError(f"{P.family} has no loss splitting")

    def least_squares(self, P):
        """(design per block 0..L, b, eta per penalty) for least-squares losses."""
        raise CapabilityError(f"{P.family} is not a least-squares family")

    def generate(self, rng, noise, **kw):
        raise CapabilityError("no generator for this family")


def _cols_norm_max(A):
    return float(np.linalg.norm(A, axis=0).max())


def _spec2(A):
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def _check_design(data):
    A, b = data["A"], data["b"]
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise InputError(f"A with shape {A.shape} does not match b with shape {b.shape}")
    return A.shape[1]


def _vector_build(family, data, K, n, extra_blocks=()):
    return ProblemInstance(family, data, (0, n) + tuple(extra_blocks),
                           (PenaltySpec(1, int(K), n),))


def _sparse_truth(rng, n, k):
    x = np.zeros(n)
    idx = rng.choice(n, size=k, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], size=k) * (1.0 + np.abs(rng.standard_normal(k)))
    return x


class _SparseOLS(_Family):
    def build(self, data, K):
        data.setdefault("eta", 0.0)
        return _vector_build("sparse_ols", data, K, _check_design(data))

    def smooth_value(self, P, x):
        r = P.data["b"] - P.data["A"] @ x
        return 0.5 * float(r @ r)

    def smooth_grad(self, P, x):
        return P.data["A"].T @ (P.data["A"] @ x - P.data["b"])

    def nonsmooth_value(self, P, x):
        return float(P.data["eta"]) * float(np.abs(x).sum())

    def nonsmooth_dir_deriv(self, P, x, d, tol):
        eta = float(P.data["eta"])
        if eta == 0:
            return 0.0
        return eta * float(np.where(x == 0, np.abs(d), np.sign(x) * d).sum())

    def profile(self, P):
        return LossProfile(smooth=_spec2(P.data["A"]) ** 2, convex=True)

    def addons(self, P):
        eta = float(P.data["eta"])
        return [SeparableAddon.l1(eta) if eta > 0 else SeparableAddon.none()]

    def least_squares(self, P):
        return [None, P.data["A"]], P.data["b"], [float(P.data["eta"])]

    def generate(self, rng, noise, q=20, n=10, k_true=3, eta=0.0, K=None):
        A = rng.standard_normal((q, n)) / np.sqrt(q)
        x = _sparse_truth(rng, n, k_true)
        b = A @ x + noise * rng.standard_normal(q)
        return {"A": A, "b": b, "eta": eta}, (k_true if K is None else K), {"x": x}


class _Power1(_SparseOLS):
    def build(self, data, K):
        return _vector_build("power1", data, K, _check_design(data))

    def smooth_value(self, P, x):
        raise CapabilityError("power1 loss is not smooth")

    def smooth_grad(self, P, x):
        raise CapabilityError("power1 loss is not smooth")

    def value(self, P, x):
        return float(np.linalg.norm(P.data["b"] - P.data["A"] @ x))

    def dir_deriv(self, P, x, d, tol):
        A = P.data["A"]
        r = A @ x - P.data["b"]
        nr = np.linalg.norm(r)
        Ad = A @ d
        if nr <= tol * (1.0 + np.linalg.norm(P.data["b"])):
            return float(np.linalg.norm(Ad))
        return float(r @ Ad / nr)

    def profile(self, P):
        A = P.data["A"]
        return LossProfile(lipschitz_l1=_cols_norm_max(A), lipschitz_l2=_spec2(A), convex=True)

    def addons(self, P):
        return [SeparableAddon.none()]

    def least_squares(self, P):
        raise CapabilityError("power1 is not a least-squares family")

    def split(self, P):
        b = P.data["b"]

        def prox(v, t):
            r = v - b
            nr = np.linalg.norm(r)
            return b + (max(1.0 - t / nr, 0.0) * r if nr > 0 else r)

        return LossSplit(P.data["A"], prox)

    def generate(self, rng, noise, q=20, n=10, k_true=3, K=None):
        data, K, truth = super().generate(rng, noise, q=q, n=n, k_true=k_true, K=K)
        data.pop("eta")
        return data, K, truth


def _labels_from(rng, scores, noise):
    # Bernoulli draws from the logistic model keep the two classes overlapping,
    # so the logistic loss has a finite minimizer
    noisy = scores + noise * rng.standard_normal(scores.size)
    return np.where(rng.random(scores.size) < expit(noisy), 1.0, -1.0)


class _Logistic(_Family):
    def build(self, data, K):
        return _vector_build("logistic", data, K, _check_design(data))

    def smooth_value(self, P, x):
        return float(np.logaddexp(0.0, -P.data["b"] * (P.data["A"] @ x)).sum())

    def smooth_grad(self, P, x):
        A, b = P.data["A"], P.data["b"]
        return -A.T @ (b * expit(-b * (A @ x)))

    def profile(self, P):
        A = P.data["A"]
        return LossProfile(smooth=_spec2(A) ** 2 / 4.0,
                           lipschitz_l1=float(np.abs(A).max(axis=1).sum()),
                           lipschitz_l2=float(np.linalg.norm(A, axis=1).sum()),
                           convex=True)

    def generate(self, rng, noise, q=30, n=10, k_true=3, K=None):
        A = rng.standard_normal((q, n))
        x = _sparse_truth(rng, n, k_true)
        return {"A": A, "b": _labels_from(rng, A @ x, noise)}, (k_true if K is None else K), {"x": x}


class _SVM(_Logistic):
    def build(self, data, K):
        return _vector_build("svm", data, K, _check_design(data))

    def smooth_value(self, P, x):
        raise CapabilityError("hinge loss is not smooth")

    def smooth_grad(self, P, x):
        raise CapabilityError("hinge loss is not smooth")

    def value(self, P, x):
        return float(np.maximum(1.0 - P.data["b"] * (P.data["A"] @ x), 0.0).sum())

    def dir_deriv(self, P, x, d, tol):
        A, b = P.data["A"], P.data["b"]
        margin = 1.0 - b * (A @ x)
        slope = -b * (A @ d)
        active = margin > tol
        kink = np.abs(margin) <= tol
        return float(slope[active].sum() + np.maximum(slope[kink], 0.0).sum())

    def profile(self, P):
        A = P.data["A"]
        return LossProfile(lipschitz_l1=float(np.abs(A).max(axis=1).sum()),
                           lipschitz_l2=float(np.linalg.norm(A, axis=1).sum()), convex=True)

    def split(self, P):
        b = P.data["b"]

        def prox(v, t):
            w = b * v  # margins scaled by labels
            out = np.where(w >= 1.0, w, np.where(w <= 1.0 - t, w + t, 1.0))
            return b * out

        return LossSplit(P.data["A"], prox)


class _RobustReg(_Family):
    def build(self, data, K):
        _check_design(data)
        A = data["A"]
        K1, K2 = (K, K) if np.isscalar(K) else K
        q, n1 = A.shape
        return ProblemInstance("robust_reg", data, (0, n1, q),
                               (PenaltySpec(1, int(K1), n1), PenaltySpec(2, int(K2), q)))

    def _resid(self, P, x):
        return P.data["A"] @ P.block(x, 1) + P.block(x, 2) - P.data["b"]

    def smooth_value(self, P, x):
        r = self._resid(P, x)
        return 0.5 * float(r @ r)

    def smooth_grad(self, P, x):
        r = self._resid(P, x)
        return np.concatenate([P.data["A"].T @ r, r])

    def profile(self, P):
        A = P.data["A"]
        return LossProfile(smooth=_spec2(np.hstack([A, np.eye(A.shape[0])])) ** 2, convex=True)

    def least_squares(self, P):
        A = P.data["A"]
        return [None, A, np.eye(A.shape[0])], P.data["b"], [0.0, 0.0]

    def generate(self, rng, noise, q=20, n=8, k_true=3, outliers=2, K=None):
        A = rng.standard_normal((q, n)) / np.sqrt(q)
        x = _sparse_truth(rng, n, k_true)
        out = np.zeros(q)
        idx = rng.choice(q, size=outliers, replace=False)
        out[idx] = rng.choice([-1.0, 1.0], size=outliers) * (3.0 + rng.random(outliers))
        b = A @ x + out + noise * rng.standard_normal(q)
        K = (k_true, outliers) if K is None else K
        return {"A": A, "b": b}, K, {"x1": x, "x2": out}


def _affine_witness(D, c, b):
    """Closest point to ``b`` on ``{x : D x = c}`` (D surjective)."""
    return b - D.T @ np.linalg.solve(D @ D.T, D @ b - c)


class _MCV(_Family):
    def build(self, data, K):
        D, b, c = data["D"], data["b"], data["c"]
        m, n = D.shape
        if np.linalg.matrix_rank(D) < m:
            raise InputError("mcv requires a surjective D")
        w = _frozen(_affine_witness(D, c, b))
        return ProblemInstance("mcv", data, (0, n), (PenaltySpec(1, int(K), m, D=D, c=c, witness=w),))

    def smooth_value(self, P, x):
        r = P.data["b"] - x
        return 0.5 * float(r @ r)

    def smooth_grad(self, P, x):
        return x - P.data["b"]

    def profile(self, P):
        return LossProfile(smooth=1.0, convex=True)

    def least_squares(self, P):
        return [None, np.eye(P.size)], P.data["b"], [0.0]

    def generate(self, rng, noise, n=10, m=6, k_true=2, K=None):
        D = rng.standard_normal((m, n))
        x0 = rng.standard_normal(n)
        v = _sparse_truth(rng, m, k_true)
        c = D @ x0 - v
        b = x0 + noise * rng.standard_normal(n)
        return {"D": D, "b": b, "c": c}, (k_true if K is None else K), {"x": x0, "violation": v}


class _TrendFilter(_MCV):
    def build(self, data, K):
        b = data["b"]
        n = b.size
        D = _frozen(difference_matrix(2, n))
        w = _frozen(linear_trend_projection(b))
        return ProblemInstance("trend_filter", data, (0, n), (PenaltySpec(1, int(K), n - 2, D=D, witness=w),))

    def generate(self, rng, noise, n=20, kinks=2, linear=False, K=None):
        t = np.arange(n, dtype=float)
        if linear:
            b = 0.5 + 0.25 * t
            return {"b": b}, (kinks if K is None else K), {"kinks": []}
        at = np.sort(rng.choice(np.arange(2, n - 2), size=kinks, replace=False))
        slope = rng.standard_normal(kinks + 1)
        trend = slope[0] * t
        for s0, s1, k in zip(slope[:-1], slope[1:], at):
            trend = trend + (s1 - s0) * np.maximum(t - k, 0.0)
        b = trend + noise * rng.standard_normal(n)
        return {"b": b}, (kinks if K is None else K), {"kinks": at.tolist(), "trend": trend}


class _NonnegOLS(_SparseOLS):
    constraint = "nonneg"

    def build(self, data, K):
        n = _check_design(data)
        mask = np.zeros(n, dtype=bool)
        idx = data.get("nonneg")
        mask[np.arange(n) if idx is None else np.asarray(idx, dtype=int)] = True
        data["nonneg"] = np.flatnonzero(mask)
        data["eta"] = 0.0
        P = _vector_build("nonneg_ols", data, K, n)
        return ProblemInstance(P.family, data, P.blocks, P.penalties, "nonneg")

    def addons(self, P):
        mask = np.zeros(P.size, dtype=bool)
        mask[P.data["nonneg"].astype(int)] = True
        return [SeparableAddon.nonneg(mask)]

    def generate(self, rng, noise, q=20, n=10, k_true=3, K=None):
        A = rng.standard_normal((q, n)) / np.sqrt(q)
        x = np.abs(_sparse_truth(rng, n, k_true))
        b = A @ x + noise * rng.standard_normal(q)
        return {"A": A, "b": b}, (k_true if K is None else K), {"x": x}


class _NMFCluster(_Family):
    convex = False
    constraint = "nonneg_matrix_pair"

    def build(self, data, K):
        A = data["A"]
        pdim, q = A.shape
        n = int(data["clusters"])
        blocks = (pdim * n,) + (n,) * q
        pens = tuple(PenaltySpec(j + 1, 1, n) for j in range(q))
        return ProblemInstance("nmf_cluster", data, blocks, pens, "nonneg_matrix_pair")

    def unpack(self, P, x):
        pdim, q = P.data["A"].shape
        n = int(P.data["clusters"])
        W = x[: pdim * n].reshape(pdim, n)
        X = x[pdim * n:].reshape(q, n).T
        return W, X

    def smooth_value(self, P, x):
        W, X = self.unpack(P, x)
        R = P.data["A"] - W @ X
        e1, e2 = float(P.data["eta1"]), float(P.data["eta2"])
        return 0.5 * float(np.sum(R * R)) + 0.5 * e1 * float(np.sum(W * W)) + 0.5 * e2 * float(np.sum(X * X))

    def smooth_grad(self, P, x):
        W, X = self.unpack(P, x)
        R = W @ X - P.data["A"]
        gW = R @ X.T + float(P.data["eta1"]) * W
        gX = W.T @ R + float(P.data["eta2"]) * X
        return np.concatenate([gW.ravel(), gX.T.ravel()])

    def profile(self, P):
        return LossProfile(convex=False)

    def addons(self, P):
        return [SeparableAddon.nonneg() for _ in P.penalties]

    def project_free(self, P, x0):
        return np.maximum(x0, 0.0)

    def generate(self, rng, noise, features=4, samples=8, clusters=2, eta1=0.1, eta2=0.1, K=None):
        W = np.abs(rng.standard_normal((features, clusters))) + 0.1
        lab = rng.integers(0, clusters, size=samples)
        X = np.zeros((clusters, samples))
        X[lab, np.arange(samples)] = 1.0 + rng.random(samples)
        A = np.abs(W @ X + noise * rng.standard_normal((features, samples)))
        return {"A": A, "clusters": clusters, "eta1": eta1, "eta2": eta2}, 1, {"labels": lab}


class _Portfolio(_Family):
    constraint = "simplex"

    def build(self, data, K):
        if int(K) < 1:
            raise InputError("portfolio requires K >= 1")
        P = _vector_build("portfolio", data, K, data["A"].shape[0])
        return ProblemInstance(P.family, data, P.blocks, P.penalties, "simplex")

    def smooth_value(self, P, x):
        return 0.5 * float(x @ P.data["A"] @ x) + float(P.data["b"] @ x)

    def smooth_grad(self, P, x):
        return P.data["A"] @ x + P.data["b"]

    def profile(self, P):
        A, b = P.data["A"], P.data["b"]
        on_simplex = float(np.linalg.norm(A, axis=0).max() + np.linalg.norm(b))
        return LossProfile(smooth=_spec2(A), lipschitz_l2=on_simplex, convex=True)

    def generate(self, rng, noise, n=6, K=2):
        G = rng.standard_normal((n, n))
        return {"A": G.T @ G / n, "b": 0.1 * rng.standard_normal(n)}, K, {}


class _SparseEigen(_Family):
    convex = False
    constraint = "ball"

    def build(self, data, K):
        A = data["A"]
        if not np.allclose(A, A.T):
            raise InputError("sparse_eigen requires a symmetric matrix")
        if np.linalg.eigvalsh(A)[-1] <= 0:
            raise InputError("sparse_eigen requires lambda_max(A) > 0")
        P = _vector_build("sparse_eigen", data, K, A.shape[0])
        return ProblemInstance(P.family, data, P.blocks, P.penalties, "ball")

    def smooth_value(self, P, x):
        return -0.5 * float(x @ P.data["A"] @ x)

    def smooth_grad(self, P, x):
        return -(P.data["A"] @ x)

    def profile(self, P):
        return LossProfile(smooth=_spec2(P.data["A"]), convex=False)

    def generate(self, rng, noise, n=6, K=2):
        G = rng.standard_normal((n, n))
        A = (G + G.T) / 2.0
        A = A + (1.0 - np.linalg.eigvalsh(A)[-1]) * np.eye(n) if np.linalg.eigvalsh(A)[-1] <= 0 else A
        return {"A": A}, K, {}


# -- matrix families ----------------------------------------------------------


def _matrix_build(family, data, K, shape):
    shape = (int(shape[0]), int(shape[1]))
    pen = PenaltySpec(0, int(K), min(shape), kind="truncated")
    return ProblemInstance(family, data, (0, shape[0] * shape[1]), (pen,), "none", shape)


def _lowrank_truth(rng, m, n, r):
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, n))


class _LowRankOLS(_Family):
    matrix = True

    def build(self, data, K):
        Al = data["A_list"]
        if Al.ndim != 3:
            raise InputError("A_list must have shape (p, rows, cols)")
        return _matrix_build("lowrank_ols", data, K, Al.shape[1:])

    def op(self, P, X):
        return np.tensordot(P.data["A_list"], X, axes=([1, 2], [0, 1]))

    def adj(self, P, y):
        return np.tensordot(y, P.data["A_list"], axes=(0, 0))

    def smooth_value(self, P, X):
        r = self.op(P, X) - P.data["b"]
        return 0.5 * float(r @ r)

    def smooth_grad(self, P, X):
        return self.adj(P, self.op(P, X) - P.data["b"])

    def operators(self, P):
        return P.data["A_list"]

    def profile(self, P):
        Al = P.data["A_list"]
        return LossProfile(smooth=_spec2(Al.reshape(Al.shape[0], -1)) ** 2, convex=True)

    def least_squares(self, P):
        return None, P.data["b"], [0.0]

    def generate(self, rng, noise, rows=5, cols=5, rank=2, p=40, K=None):
        Al = rng.standard_normal((p, rows, cols)) / np.sqrt(p)
        X = _lowrank_truth(rng, rows, cols, rank)
        b = np.tensordot(Al, X, axes=([1, 2], [0, 1])) + noise * rng.standard_normal(p)
        return {"A_list": Al, "b": b}, (rank if K is None else K), {"X": X}


class _MatrixCompletion(_LowRankOLS):
    def build(self, data, K):
        omega = np.asarray(data["omega"], dtype=int).reshape(-1, 2)
        if omega.shape[0] == 0:
            raise InputError("matrix completion needs observed entries")
        data["omega"] = omega
        data["shape"] = np.asarray(data["shape"], dtype=int)
        return _matrix_build("matrix_completion", data, K, data["shape"])

    def op(self, P, X):
        om = P.data["omega"]
        return X[om[:, 0], om[:, 1]]

    def adj(self, P, y):
        om = P.data["omega"]
        G = np.zeros(P.shape)
        np.add.at(G, (om[:, 0], om[:, 1]), y)
        return G

    def operators(self, P):
        om = P.data["omega"]
        E = np.zeros((om.shape[0],) + P.shape)
        E[np.arange(om.shape[0]), om[:, 0], om[:, 1]] = 1.0
        return E

    def profile(self, P):
        return LossProfile(smooth=1.0, convex=True)

    def generate(self, rng, noise, rows=10, cols=10, rank=2, fraction=0.5, K=None):
        X = _lowrank_truth(rng, rows, cols, rank)
        count = int(round(fraction * rows * cols))
        lin = np.sort(rng.choice(rows * cols, size=count, replace=False))
        omega = np.column_stack(np.unravel_index(lin, (rows, cols)))
        b = X[omega[:, 0], omega[:, 1]] + noise * rng.standard_normal(count)
        return {"shape": [rows, cols], "omega": omega, "b": b}, (rank if K is None else K), {"X": X}


class _Multiclass(_Family):
    matrix = True

    def build(self, data, K):
        A = data["A"]
        labels = np.asarray(data["labels"], dtype=int)
        n = int(data["classes"])
        if labels.min() < 0 or labels.max() >= n:
            raise InputError("labels must lie in 0..classes-1")
        data["labels"] = labels
        return _matrix_build("multiclass", data, K, (A.shape[1], n))

    def _scores(self, P, X):
        return P.data["A"] @ X

    def smooth_value(self, P, X):
        S = self._scores(P, X)
        lab = P.data["labels"]
        return float((logsumexp(S, axis=1) - S[np.arange(S.shape[0]), lab]).sum())

    def smooth_grad(self, P, X):
        S = self._scores(P, X)
        prob = np.exp(S - logsumexp(S, axis=1, keepdims=True))
        prob[np.arange(S.shape[0]), P.data["labels"]] -= 1.0
        return P.data["A"].T @ prob

    def profile(self, P):
        A = P.data["A"]
        return LossProfile(smooth=0.5 * _spec2(A) ** 2,
                           lipschitz_nuclear=float(np.sqrt(2.0) * np.linalg.norm(A, axis=1).sum()),
                           convex=True)

    def generate(self, rng, noise, features=5, classes=3, samples=20, rank=2, K=None, signal=0.1):
        A = rng.standard_normal((samples, features))
        X = signal * _lowrank_truth(rng, features, classes, rank)
        # Gumbel-max sampling from a weak softmax model: with strong scores the
        # classes separate in a rank-K subspace and the loss has no minimizer
        scores = A @ X + noise * rng.standard_normal((samples, classes))
        labels = np.argmax(scores + rng.gumbel(size=(samples, classes)), axis=1)
        return {"A": A, "labels": labels, "classes": classes}, (rank if K is None else K), {"X": X}


class _RobustPCA(_Family):
    matrix = True

    def build(self, data, K):
        return _matrix_build("robust_pca", data, K, data["A"].shape)

    def value(self, P, X):
        return float(np.abs(P.data["A"] - X).sum())

    def dir_deriv(self, P, X, D, tol):
        R = X - P.data["A"]
        scale = tol * (1.0 + np.abs(P.data["A"]))
        kink = np.abs(R) <= scale
        return float(np.where(kink, np.abs(D), np.sign(R) * D).sum())

    def profile(self, P):
        m, n = P.shape
        return LossProfile(lipschitz_l1=1.0, lipschitz_nuclear=float(np.sqrt(m * n)), convex=True)

    def split(self, P):
        A = P.data["A"]
        return LossSplit(None, lambda V, t: A + soft_threshold(V - A, t))

    def generate(self, rng, noise, rows=8, cols=8, rank=2, outliers=6, K=None):
        L = _lowrank_truth(rng, rows, cols, rank)
        S = np.zeros(rows * cols)
        idx = rng.choice(rows * cols, size=outliers, replace=False)
        S[idx] = rng.choice([-1.0, 1.0], size=outliers) * (5.0 + rng.random(outliers))
        A = L + S.reshape(rows, cols) + noise * rng.standard_normal((rows, cols))
        return {"A": A}, (rank if K is None else K), {"L": L}


class _LinearMatrix(_Family):
    matrix = True

    def build(self, data, K):
        return _matrix_build("linear_matrix", data, K, data["C"].shape)

    def smooth_value(self, P, X):
        return float(np.sum(P.data["C"] * X))

    def smooth_grad(self, P, X):
        return np.array(P.data["C"])

    def profile(self, P):
        C = P.data["C"]
        return LossProfile(smooth=0.0, lipschitz_nuclear=_spec2(C), convex=True)


FAMILIES = {
    "sparse_ols": _SparseOLS(),
    "power1": _Power1(),
    "logistic": _Logistic(),
    "svm": _SVM(),
    "robust_reg": _RobustReg(),
    "mcv": _MCV(),
    "trend_filter": _TrendFilter(),
    "nonneg_ols": _NonnegOLS(),
    "nmf_cluster": _NMFCluster(),
    "portfolio": _Portfolio(),
    "sparse_eigen": _SparseEigen(),
    "lowrank_ols": _LowRankOLS(),
    "matrix_completion": _MatrixCompletion(),
    "multiclass": _Multiclass(),
    "robust_pca": _RobustPCA(),
    "linear_matrix": _LinearMatrix(),
}

# data entries kept as ints / scalars rather than float arrays
_INT_KEYS = {"omega", "labels", "nonneg", "shape"}
_SCALAR_KEYS = {"eta", "eta1", "eta2", "clusters", "classes"}


def family_of(problem_or_name):
    name = problem_or_name if isinstance(problem_or_name, str) else problem_or_name.family
    try:
        return FAMILIES[name]
    except KeyError:
        raise CapabilityError(f"unknown problem family {name!r}") from None


def _normalize_data(data):
    out = {}
    for key, val in data.items():
        if key in _SCALAR_KEYS:
            out[key] = float(val) if key.startswith("eta") else int(val)
        elif key in _INT_KEYS:
            arr = np.array(val, dtype=int)
            arr.flags.writeable = False
            out[key] = arr
        else:
            out[key] = _frozen(val)
    return out


def make_problem(family, K=1, truth=None, **data):
    """Assemble a problem instance from raw family data.

    ``K`` is the trim level (a pair for ``robust_reg``).  Block layout,
    penalty terms, constraint tag and feasibility witnesses are derived
    from the family.
    """
    fam = family_of(family)
    data = _normalize_data(data)
    try:
        P = fam.build(data, K)
    except KeyError as exc:
        raise InputError(f"{family} data is missing {exc}") from None
    for pen in P.penalties:
        if pen.witness is not None and pen.c is not None:
            res = np.linalg.norm(pen.D @ pen.witness - pen.c)
            if res > 1e-8 * (1.0 + np.linalg.norm(pen.c)):
                raise InputError(f"witness residual {res:.3e} too large")
        if pen.kind == "trimmed" and not (0 <= pen.K <= pen.m - 1):
            raise InputError(f"K={pen.K} out of range for m={pen.m}")
        if pen.kind == "truncated" and not (0 <= pen.K <= pen.m - 1):
            raise InputError(f"K={pen.K} out of range for min(rows, cols)={pen.m}")
    if truth:
        P = ProblemInstance(P.family, P.data, P.blocks, P.penalties, P.constraint, P.shape, dict(truth))
    return P


def generate_instance(family, seed=0, noise=0.1, **dims):
    """Seeded synthetic instance with a planted sparse or low-rank truth.

    The truth is recorded in ``problem.truth`` for reporting only.
    """
    fam = family_of(family)
    try:
        data, K, truth = fam.generate(rng_from_seed(seed), float(noise), **dims)
    except TypeError as exc:
        raise InputError(f"invalid dimensions for {family}: {exc}") from None
    except ValueError as exc:
        raise InputError(f"invalid dimensions for {family}: {exc}") from None
    return make_problem(family, K=K, truth=truth, **data)


# -- public loss API ----------------------------------------------------------


def loss_value(problem, x):
    """Loss without the trimmed/truncated penalty terms."""
    x = problem.check_point(x)
    return float(family_of(problem).value(problem, x))


def smooth_value(problem, x):
    return float(family_of(problem).smooth_value(problem, problem.check_point(x)))


def smooth_gradient(problem, x):
    """Gradient of the smooth part of the loss."""
    return family_of(problem).smooth_grad(problem, problem.check_point(x))


def loss_dir_deriv(problem, x, d, kink_tol=KINK_TOL):
    """One-sided directional derivative of the loss.

    Smooth parts use the gradient; hinge, power-1 and entrywise l1 terms
    use their exact one-sided rules, treating points within ``kink_tol``
    of a kink as on it.
    """
    x = problem.check_point(x)
    d = problem.check_point(d)
    return float(family_of(problem).dir_deriv(problem, x, d, kink_tol))


def loss_profile(problem):
    return family_of(problem).profile(problem)


def prox_addons(problem):
    return family_of(problem).addons(problem)


def project_free_block(problem, x0):
    return family_of(problem).project_free(problem, x0)


def loss_split(problem):
    return family_of(problem).split(problem)


def least_squares_parts(problem):
    return family_of(problem).least_squares(problem)


def measurement_operators(problem):
    """Stacked ``A_i`` matrices of a matrix least-squares family."""
    fam = family_of(problem)
    if not hasattr(fam, "operators"):
        raise CapabilityError(f"{problem.family} has no measurement operator")
    return fam.operators(problem)


def cardinality(problem, x, penalty_args=None):
    """Nonzero-group count (trimmed) or numerical rank (truncated) per penalty."""
    from .penalty import numerical_rank

    x = problem.check_point(x)
    args = problem.penalty_arguments(x) if penalty_args is None else penalty_args
    out = []
    for pen, z in zip(problem.penalties, args):
        if pen.kind == "truncated":
            out.append(numerical_rank(z))
        else:
            out.append(int(np.count_nonzero(group_norms(z, pen.p))))
    return tuple(out)


# -- serialization ------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    return v


def problem_to_dict(problem):
    K = list(problem.K)
    return {
        "schema": SCHEMA_VERSION,
        "family": problem.family,
        "K": K[0] if len(K) == 1 or problem.family == "nmf_cluster" else K,
        "constraint": problem.constraint,
        "blocks": list(problem.blocks),
        "data": _jsonable(dict(problem.data)),
        "truth": _jsonable(dict(problem.truth)),
    }


def problem_from_dict(doc):
    if doc.get("schema") != SCHEMA_VERSION:
        raise InputError(f"unsupported instance schema {doc.get('schema')!r}")
    try:
        return make_problem(doc["family"], K=doc["K"], truth=doc.get("truth"), **doc["data"])
    except KeyError as exc:
        raise InputError(f"instance document is missing {exc}") from None
