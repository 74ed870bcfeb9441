"""Exact-penalty thresholds and the matrix quantities they depend on.

A threshold ``gamma_bar`` guarantees that with ``gamma > gamma_bar``
every d-stationary point of the penalized problem satisfies the
cardinality (or rank) constraint.  Each calculator returns a
:class:`ThresholdCertificate` recording the rule used and every
intermediate number so the arithmetic can be replayed.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, InputError, SizeError, VerificationError
from .penalty import RANK_RTOL, _check_level
from .problems import (
    difference_matrix,
    family_of,
    least_squares_parts,
    linear_trend_projection,
    loss_profile,
    make_problem,
    measurement_operators,
    smooth_gradient,
)

SUBSET_CAP = 10**6
DEFAULT_DELTA = 1e-3
# penalty used when a certificate's threshold is exactly zero
ZERO_THRESHOLD_FLOOR = 1e-3
POWER_TOL = 1e-8
LINEAR_FIT_RTOL = 1e-12


@dataclass(frozen=True)
class ThresholdCertificate:
    """Per-block exact-penalty values with the ingredients that produced them.

    ``zero_threshold`` marks certificates with some ``gamma_bar == 0``;
    any positive ``gamma`` then satisfies the strict inequality.
    """

    gamma_bar: tuple
    rule: str
    ingredients: dict
    zero_threshold: bool = False
    replay: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not all(np.isfinite(g) and g >= 0 for g in self.gamma_bar):
            raise VerificationError(f"invalid threshold values {self.gamma_bar}")
        for key, val in self.ingredients.items():
            if not np.all(np.isfinite(val)):
                raise VerificationError(f"ingredient {key} is not finite")

    def recompute(self):
        """Rerun the calculation from the raw data and demand identical output."""
        if self.replay is None:
            raise VerificationError("certificate carries no replay hook")
        again = self.replay()
        if again.gamma_bar != self.gamma_bar or again.ingredients != self.ingredients:
            raise VerificationError("replayed certificate differs from the original")
        return True

    def as_flat_dict(self):
        out = {"rule": self.rule}
        out["gamma_bar"] = self.gamma_bar[0] if len(self.gamma_bar) == 1 else list(self.gamma_bar)
        out["zero_threshold"] = self.zero_threshold
        for key, val in self.ingredients.items():
            out[key] = val if np.isscalar(val) else list(val)
        return out


def _certificate(gammas, rule, ingredients, replay):
    gammas = tuple(float(g) for g in gammas)
    clean = {k: (float(v) if np.isscalar(v) else tuple(float(w) for w in v)) for k, v in ingredients.items()}
    return ThresholdCertificate(gammas, rule, clean, any(g == 0 for g in gammas), replay)


def select_gamma(certificate, multiplier=1.0 + DEFAULT_DELTA):
    """Penalty parameters ``multiplier * gamma_bar`` per block.

    Zero thresholds are replaced by :data:`ZERO_THRESHOLD_FLOOR` before
    scaling so the returned values stay positive.
    """
    if not multiplier > 0:
        raise InputError("multiplier must be positive")
    return tuple(multiplier * (g if g > 0 else ZERO_THRESHOLD_FLOOR) for g in certificate.gamma_bar)


# -- sigma_{K,m,p} ------------------------------------------------------------


def _sigma_min_nonzero(M):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return None
    return float(s[s > RANK_RTOL * s[0]][-1])


def sigma_kmp(D, K, p=1):
    """Smallest nonzero singular value over row-group submatrices of ``D``.

    When ``D`` has full row rank this is ``sigma_min(D)``.  Otherwise every
    choice of ``m - K`` row groups is enumerated and the minimum of the
    submatrices' smallest nonzero singular values is returned (all-zero
    submatrices are skipped).  ``D=None`` stands for the identity.
    """
    if D is None:
        return 1.0
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] % p:
        raise InputError(f"D with shape {D.shape} does not split into groups of {p}")
    if not np.any(D):
        raise InputError("D must be nonzero")
    m = D.shape[0] // p
    _check_level(K, m)
    s = np.linalg.svd(D, compute_uv=False)
    rank = int(np.count_nonzero(s > RANK_RTOL * s[0]))
    if rank == D.shape[0]:
        return float(s[rank - 1])
    count = comb(m, m - K)
    if count > SUBSET_CAP:
        raise SizeError(f"{count} row-group subsets exceed the cap of {SUBSET_CAP}", count=count)
    groups = D.reshape(m, p, -1)
    best = np.inf
    for subset in combinations(range(m), m - K):
        val = _sigma_min_nonzero(groups[list(subset)].reshape(-1, D.shape[1]))
        if val is not None and val < best:
            best = val
    return float(best)


def trend_sigma_bound(n):
    """Closed-form lower bound on ``sigma_min`` of the second-difference matrix."""
    if n < 4:
        raise InputError("need n >= 4")
    return 2.0 * np.sqrt((1.0 - np.cos(np.pi / n)) * (1.0 - np.cos(np.pi / (n - 1))))


def adjoint_operator_norm(A_list, starts=4, tol=POWER_TOL, max_iter=10_000):
    """``sup_{||y||_2 = 1} ||sum_i y_i A_i||_2`` by alternating power iteration.

    Each sweep takes the top singular pair ``(u, v)`` of ``sum y_i A_i``
    and sets ``y`` proportional to ``(u^T A_i v)_i``; the value never
    decreases.  Several deterministic starts are tried and the best value
    is returned, so the result is a certified lower bound of the supremum
    (the stacked Frobenius bound is an upper bound).
    """
    A = np.asarray(A_list, dtype=float)
    if A.ndim != 3 or A.shape[0] == 0:
        raise InputError("need a nonempty sequence of equally shaped matrices")
    flat = A.reshape(A.shape[0], -1)
    if not np.any(flat):
        return 0.0
    rng = np.random.Generator(np.random.Philox(0))
    inits = [np.linalg.svd(flat, full_matrices=False)[0][:, 0]]
    inits += [rng.standard_normal(A.shape[0]) for _ in range(starts - 1)]
    best = 0.0
    for y in inits:
        y = y / np.linalg.norm(y)
        val = 0.0
        for _ in range(max_iter):
            U, s, Vt = np.linalg.svd(np.tensordot(y, A, axes=(0, 0)))
            new = float(s[0])
            g = np.einsum("i,kij,j->k", U[:, 0], A, Vt[0])
            ng = np.linalg.norm(g)
            if ng == 0:
                break
            y = g / ng
            if new - val <= tol * max(new, 1.0):
                val = max(val, new, ng)
                break
            val = new
        best = max(best, val)
    return float(best)


# -- generic threshold rules ------------------------------------------------------


def _is_identity(pen):
    if pen.kind != "trimmed" or pen.p != 1:
        return False
    D_ok = pen.D is None or (pen.D.shape[0] == pen.D.shape[1] and np.array_equal(pen.D, np.eye(pen.D.shape[0])))
    c_ok = pen.c is None or not np.any(pen.c)
    return D_ok and c_ok


def _bounds_vector(problem, C):
    L = problem.L
    C = np.atleast_1d(np.asarray(C, dtype=float))
    if C.size == L + 1:
        out = C
    elif C.size == L and problem.blocks[0] == 0:
        out = np.concatenate([[0.0], C])
    elif C.size == 1:
        out = np.concatenate([[0.0 if problem.blocks[0] == 0 else C[0]], np.repeat(C, L)])
    else:
        raise InputError(f"expected {L + 1} bounds, got {C.size}")
    if np.any(out < 0):
        raise InputError("bounds must be nonnegative")
    return out


def threshold_smooth_bounded(problem, C):
    """Threshold for an M-smooth loss with caller-supplied solution bounds.

    ``C`` bounds ``||x_l||_2`` for every block (block 0 included).  The
    gradient norm is ``||.||_inf`` for identity penalties and for
    constrained problems, ``||.||_2`` divided by sigma otherwise.  The
    matrix version uses the spectral norm of the gradient and a single
    Frobenius bound.
    """
    prof = loss_profile(problem)
    if prof.smooth is None:
        raise CapabilityError(f"{problem.family} has no registered smoothness constant")
    M = float(prof.smooth)
    grad = smooth_gradient(problem, problem.zeros())

    def run():
        if problem.is_matrix:
            c = float(np.atleast_1d(C)[0])
            g = float(np.linalg.norm(grad, 2))
            return _certificate([g + M * c], "smooth_bounded_truncated",
                                {"grad_norm": g, "M": M, "C": c}, run)
        Cv = _bounds_vector(problem, C)
        radius = float(np.sqrt(np.sum(Cv ** 2)))
        eta = float(problem.data.get("eta", 0.0))
        gammas, gnorms, sigmas = [], [], []
        for pen in problem.penalties:
            gl = problem.block(grad, pen.block)
            if problem.constraint != "none" or _is_identity(pen):
                gn, sig = float(np.abs(gl).max()), 1.0
                gammas.append(max(gn + M * radius - eta, 0.0))
            else:
                gn, sig = float(np.linalg.norm(gl)), sigma_kmp(pen.D, pen.K, pen.p)
                gammas.append((gn + M * radius) / sig)
            gnorms.append(gn)
            sigmas.append(sig)
        rule = "smooth_bounded_constrained" if problem.constraint != "none" else "smooth_bounded"
        return _certificate(gammas, rule, {"grad_norm": gnorms, "sigma": sigmas, "M": M, "radius": radius}, run)

    return run()


def threshold_lipschitz(problem):
    """Threshold ``M / sigma`` for a Lipschitz loss (``M'`` in the l1 case)."""
    prof = loss_profile(problem)

    def run():
        if problem.is_matrix:
            if prof.lipschitz_nuclear is None:
                raise CapabilityError(f"{problem.family} has no nuclear-norm Lipschitz constant")
            M = float(prof.lipschitz_nuclear)
            return _certificate([M], "lipschitz_truncated", {"M": M}, run)
        identity = all(_is_identity(pen) for pen in problem.penalties)
        if (identity or problem.constraint != "none") and prof.lipschitz_l1 is not None:
            M = float(prof.lipschitz_l1)
            return _certificate([M] * problem.L, "lipschitz_l1", {"M_l1": M}, run)
        if problem.constraint != "none" or prof.lipschitz_l2 is None:
            raise CapabilityError(f"{problem.family} has no usable Lipschitz constant")
        M = float(prof.lipschitz_l2)
        sigmas = [sigma_kmp(pen.D, pen.K, pen.p) for pen in problem.penalties]
        return _certificate([M / s for s in sigmas], "lipschitz_l2", {"M_l2": M, "sigma": sigmas}, run)

    return run()


def threshold_least_squares(problem):
    """Threshold for a least-squares loss.

    Identity penalties use ``max_j ||a_j|| ||b|| - eta``; composite
    penalties use ``||A_l||_2 ||b - sum A_l xbar_l|| / sigma`` with the
    stored feasibility witnesses; matrix problems use
    ``||A*||_{2,2} ||b||``.
    """
    def run():
        if problem.is_matrix:
            least_squares_parts(problem)
            op = adjoint_operator_norm(measurement_operators(problem))
            nb = float(np.linalg.norm(problem.data["b"]))
            return _certificate([op * nb], "least_squares_truncated", {"adjoint_norm": op, "b_norm": nb}, run)
        designs, b, etas = least_squares_parts(problem)
        nb = float(np.linalg.norm(b))
        if problem.constraint != "none":
            cols = [float(np.linalg.norm(designs[pen.block], axis=0).max()) for pen in problem.penalties]
            return _certificate([c * nb for c in cols], "least_squares_constrained",
                                {"max_col_norm": cols, "b_norm": nb}, run)
        if all(_is_identity(pen) for pen in problem.penalties):
            cols = [float(np.linalg.norm(designs[pen.block], axis=0).max()) for pen in problem.penalties]
            gammas = [max(c * nb - e, 0.0) for c, e in zip(cols, etas)]
            return _certificate(gammas, "least_squares_identity",
                                {"max_col_norm": cols, "b_norm": nb, "eta": etas}, run)
        resid = np.array(b, dtype=float)
        for pen in problem.penalties:
            if pen.c is not None and np.any(pen.c):
                if pen.witness is None:
                    raise InputError("a feasibility witness is required when c is nonzero")
                resid = resid - designs[pen.block] @ pen.witness
            elif pen.witness is not None:
                resid = resid - designs[pen.block] @ pen.witness
        rn = float(np.linalg.norm(resid))
        norms = [float(np.linalg.norm(designs[pen.block], 2)) for pen in problem.penalties]
        sigmas = [sigma_kmp(pen.D, pen.K, pen.p) for pen in problem.penalties]
        gammas = [a * rn / s for a, s in zip(norms, sigmas)]
        return _certificate(gammas, "least_squares_composite",
                            {"design_norm": norms, "residual_norm": rn, "sigma": sigmas}, run)

    return run()


# -- per-family catalog ------------------------------------------------------------


def _catalog_sparse_ols(d):
    A, b, eta = d["A"], d["b"], float(d.get("eta", 0.0))
    col, nb = float(np.linalg.norm(A, axis=0).max()), float(np.linalg.norm(b))
    return [max(col * nb - eta, 0.0)], {"max_col_norm": col, "b_norm": nb, "eta": eta}


def _catalog_power1(d):
    col = float(np.linalg.norm(d["A"], axis=0).max())
    return [col], {"max_col_norm": col}


def _catalog_margin(d):
    M = float(np.abs(d["A"]).max(axis=1).sum())
    return [M], {"sum_row_inf_norm": M}


def _catalog_robust_reg(d):
    col, nb = float(np.linalg.norm(d["A"], axis=0).max()), float(np.linalg.norm(d["b"]))
    return [col * nb, nb], {"max_col_norm": col, "b_norm": nb}


def _catalog_mcv(d):
    P = make_problem("mcv", K=0, **d)
    pen = P.penalties[0]
    s = float(np.linalg.svd(pen.D, compute_uv=False)[-1])
    r = float(np.linalg.norm(np.asarray(d["b"]) - pen.witness))
    return [r / s], {"residual_norm": r, "sigma_min": s}


def _catalog_trend(d):
    b = np.asarray(d["b"], dtype=float)
    n = b.size
    r = float(np.linalg.norm(b - linear_trend_projection(b)))
    # an exactly linear b leaves a round-off residual; its threshold is zero
    if r <= LINEAR_FIT_RTOL * (1.0 + float(np.linalg.norm(b))):
        r = 0.0
    bound = float(trend_sigma_bound(n))
    s = float(np.linalg.svd(difference_matrix(2, n), compute_uv=False)[-1])
    return [r / bound], {"residual_norm": r, "sigma_bound": bound, "sigma_min": s}


def _catalog_nonneg(d):
    col, nb = float(np.linalg.norm(d["A"], axis=0).max()), float(np.linalg.norm(d["b"]))
    return [col * nb], {"max_col_norm": col, "b_norm": nb}


def _catalog_nmf(d):
    A = np.asarray(d["A"], dtype=float)
    e1, e2 = float(d["eta1"]), float(d["eta2"])
    if not (e1 > 0 and e2 > 0):
        raise InputError("nmf_cluster requires eta1 > 0 and eta2 > 0")
    col = float(np.linalg.norm(A, axis=0).max())
    fro = float(np.linalg.norm(A))
    g = col / np.sqrt(2.0) * (fro / np.sqrt(e1) + np.sqrt(e2))
    q = A.shape[1]
    return [g] * q, {"max_col_norm": col, "frobenius": fro, "eta1": e1, "eta2": e2}


def _catalog_portfolio(d):
    A, b = np.asarray(d["A"], dtype=float), np.asarray(d["b"], dtype=float)
    M = float(np.linalg.norm(A, 2))
    M_simplex = float(np.linalg.norm(A, axis=0).max() + np.linalg.norm(b))
    g0 = float(np.linalg.norm(b))
    g = min(np.sqrt(2.0) * M_simplex, np.sqrt(2.0) * (g0 + M))
    return [g], {"M_simplex": M_simplex, "M": M, "grad_norm": g0}


def _catalog_sparse_eigen(d):
    A = np.asarray(d["A"], dtype=float)
    if np.linalg.eigvalsh(A)[-1] <= 0:
        raise InputError("sparse_eigen requires lambda_max(A) > 0")
    M = float(np.linalg.norm(A, 2))
    return [M], {"M": M, "C": 1.0, "grad_norm": 0.0}


def _catalog_lowrank(d):
    op = adjoint_operator_norm(d["A_list"])
    nb = float(np.linalg.norm(d["b"]))
    return [op * nb], {"adjoint_norm": op, "b_norm": nb}


def _catalog_completion(d):
    shape = tuple(int(s) for s in d["shape"])
    omega = np.asarray(d["omega"], dtype=int).reshape(-1, 2)
    E = np.zeros((omega.shape[0],) + shape)
    E[np.arange(omega.shape[0]), omega[:, 0], omega[:, 1]] = 1.0
    op = adjoint_operator_norm(E)
    nb = float(np.linalg.norm(d["b"]))
    return [op * nb], {"adjoint_norm": op, "b_norm": nb}


def _catalog_multiclass(d):
    s = float(np.linalg.norm(np.asarray(d["A"], dtype=float), axis=1).sum())
    return [np.sqrt(2.0) * s], {"sum_row_norm": s}


def _catalog_robust_pca(d):
    if "A" in d:
        m, n = np.asarray(d["A"]).shape
    else:
        m, n = int(d["rows"]), int(d["cols"])
    return [float(np.sqrt(m * n))], {"rows": m, "cols": n}


def _catalog_sdb_quad(d):
    A, H = np.asarray(d["A"], dtype=float), np.asarray(d["H"], dtype=float)
    g = float(np.linalg.norm(H * H * A, 2))
    M = float((H * H).max())
    c = float(np.sqrt(A.shape[0]))
    return [g + M * c], {"grad_norm": g, "M": M, "C": c}


_CATALOG = {
    "sparse_ols": ("least_squares_identity", _catalog_sparse_ols),
    "power1": ("lipschitz_l1", _catalog_power1),
    "logistic": ("lipschitz_l1", _catalog_margin),
    "svm": ("lipschitz_l1", _catalog_margin),
    "robust_reg": ("least_squares_identity", _catalog_robust_reg),
    "mcv": ("least_squares_composite", _catalog_mcv),
    "trend_filter": ("trend_closed_form", _catalog_trend),
    "nonneg_ols": ("least_squares_constrained", _catalog_nonneg),
    "nmf_cluster": ("nmf_clustering", _catalog_nmf),
    "portfolio": ("simplex_portfolio", _catalog_portfolio),
    "sparse_eigen": ("smooth_bounded_constrained", _catalog_sparse_eigen),
    "lowrank_ols": ("least_squares_truncated", _catalog_lowrank),
    "matrix_completion": ("least_squares_truncated", _catalog_completion),
    "multiclass": ("lipschitz_truncated", _catalog_multiclass),
    "robust_pca": ("lipschitz_truncated", _catalog_robust_pca),
    "sdb_quad": ("smooth_bounded_truncated", _catalog_sdb_quad),
}

CATALOG_FAMILIES = tuple(sorted(_CATALOG))


def threshold_catalog(family, data):
    """Family-specific threshold computed straight from raw data.

    ``data`` is the same mapping accepted by :func:`make_problem`
    (``robust_pca`` also accepts bare ``rows``/``cols``; ``sdb_quad`` takes
    ``A`` and ``H`` and has no problem class).
    """
    if family not in _CATALOG:
        raise CapabilityError(f"no threshold rule for family {family!r}")
    rule, fn = _CATALOG[family]
    data = dict(data)

    def run():
        try:
            gammas, ingredients = fn(data)
        except KeyError as exc:
            raise InputError(f"{family} data is missing {exc}") from None
        return _certificate(gammas, rule, ingredients, run)

    return run()


def certify(problem):
    """Catalog threshold for an assembled problem instance."""
    family_of(problem)
    return threshold_catalog(problem.family, problem.data)
