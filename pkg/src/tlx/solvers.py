"""Iterative solvers for trimmed / truncated penalized problems.

* :func:`solve_pgm` - proximal gradient with step ``1/M``.
* :func:`solve_sparsa` - Barzilai-Borwein steps with a nonmonotone
  (window-max) acceptance test.
* :func:`solve_padmm` - proximal ADMM, either splitting ``z = D x - c``
  for composite penalties or ``u = A x`` for nonsmooth losses.
* :func:`solve_dca` - classical DCA on ``||x||_1 - ||x||_<K>``; kept as a
  baseline because it stalls at the origin whenever ``gamma`` exceeds
  ``||grad f(0)||_inf``.

All solvers write literal zeros through the prox, so cardinalities in
the report are exact integer counts.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import CapabilityError, InputError, VerificationError
from .penalty import RANK_RTOL, trimmed_l1_value, truncated_nuclear_value
from .problems import (
    cardinality,
    family_of,
    least_squares_parts,
    loss_profile,
    loss_split,
    loss_value,
    project_free_block,
    prox_addons,
    rng_from_seed,
)
from .prox import SeparableAddon, prox_point, soft_threshold
from .thresholds import sigma_kmp

ALGORITHMS = ("pgm", "sparsa", "padmm", "dca")
ARMIJO = 1e-4
MAX_BACKTRACKS = 80
EXACT_SOLVE_LIMIT = 500
DIVERGENCE_WINDOW = 100
MAX_RHO_DOUBLINGS = 10
DCA_INNER_CAP = 100_000


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``step`` is the PGM step size (auto ``1/M``) or the initial SpaRSA
    step; ``rho`` is the ADMM penalty (auto ``10 M / sigma_min(D)^2`` or
    10).  ``x0`` is ``None`` (zeros), ``"random"`` (drawn from ``seed``)
    or an explicit point.  ``min_iter`` forces a number of iterations
    before the stopping test is consulted.  ``check`` runs the probe
    stationarity check on the final point.
    """

    algorithm: str = "pgm"
    step: Optional[float] = None
    rho: Optional[float] = None
    tol: float = 1e-8
    max_iter: int = 100_000
    nonmonotone_window: int = 10
    bb_clip: tuple = (1e-10, 1e10)
    seed: int = 0
    x0: object = None
    min_iter: int = 0
    trace: bool = False
    check: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {self.algorithm!r}")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.nonmonotone_window < 1:
            raise InputError("nonmonotone_window must be at least 1")
        if self.max_iter < 1 or self.min_iter < 0:
            raise InputError("iteration limits must be positive")
        for name in ("step", "rho"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise InputError(f"{name} must be positive")
        lo, hi = self.bb_clip
        if not 0 < lo <= hi:
            raise InputError("bb_clip must satisfy 0 < lo <= hi")


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``cardinality`` counts literal nonzero groups (or singular values
    above ``1e-10 * sigma_1``) of the penalty arguments.  For composite
    ADMM these arguments are the split variable ``z``, kept in
    ``extras['penalty_args']``.
    """

    final_point: np.ndarray
    objective: float
    penalty_values: tuple
    cardinality: tuple
    stationarity_residual: Optional[float]
    iterations: int
    converged: bool
    trace_summary: dict
    algorithm: str = ""
    extras: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def to_dict(self):
        extras = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in self.extras.items() if k != "penalty_args"}
        return {
            "algorithm": self.algorithm,
            "final_point": np.asarray(self.final_point).tolist(),
            "objective": self.objective,
            "penalty_values": list(self.penalty_values),
            "cardinality": list(self.cardinality),
            "stationarity_residual": self.stationarity_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "trace_summary": self.trace_summary,
            "extras": extras,
        }


# -- shared pieces ------------------------------------------------------------------


def _gammas(problem, gamma):
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.size == 1 and problem.L > 1:
        g = np.repeat(g, problem.L)
    if g.size != problem.L:
        raise InputError(f"expected {problem.L} penalty parameters, got {g.size}")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise InputError("penalty parameters must be finite and nonnegative")
    return tuple(float(v) for v in g)


def penalty_values(problem, x, penalty_args=None):
    args = problem.penalty_arguments(x) if penalty_args is None else penalty_args
    out = []
    for pen, z in zip(problem.penalties, args):
        if pen.kind == "truncated":
            out.append(truncated_nuclear_value(z, pen.K))
        else:
            out.append(trimmed_l1_value(z, pen.K, pen.p))
    return tuple(out)


def objective(problem, gammas, x):
    """Loss plus weighted penalties at ``x``."""
    return loss_value(problem, x) + sum(g * v for g, v in zip(gammas, penalty_values(problem, x)))


class _Evaluator:
    """Objective, penalty total and support pattern, without argument checks.

    The support pattern is a boolean group mask (trimmed) or the numerical
    rank (truncated); solver loops only compare it for equality.
    """

    def __init__(self, problem, gammas):
        self.problem = problem
        self.fam = family_of(problem)
        self.gammas = gammas
        off = problem.offsets()
        self.slices = [slice(off[pen.block], off[pen.block + 1]) for pen in problem.penalties]

    def __call__(self, x, args=None):
        P = self.problem
        loss = float(self.fam.value(P, x))
        if P.is_matrix:
            pen = P.penalties[0]
            s = np.linalg.svd(x if args is None else args[0], compute_uv=False)
            val = float(s[pen.K:].sum())
            rank = int(np.count_nonzero(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
            return loss + self.gammas[0] * val, val, rank
        F, total, masks = loss, 0.0, []
        for i, (pen, g) in enumerate(zip(P.penalties, self.gammas)):
            z = pen.argument(x[self.slices[i]]) if args is None else args[i]
            norms = np.abs(z) if pen.p == 1 else np.linalg.norm(z.reshape(-1, pen.p), axis=1)
            val = float(np.sort(norms)[: norms.size - pen.K].sum())
            total += val
            F += g * val
            masks.append(norms != 0)
        return F, total, np.concatenate(masks)


def _identity_penalties(problem):
    for pen in problem.penalties:
        if pen.kind != "trimmed":
            continue
        if pen.D is not None and not (pen.D.shape[0] == pen.D.shape[1] and np.array_equal(pen.D, np.eye(pen.D.shape[0]))):
            return False
        if pen.c is not None and np.any(pen.c):
            return False
    return True


def _check_prox_available(problem):
    if problem.constraint in ("simplex", "ball"):
        raise CapabilityError(f"no prox for the trimmed penalty over the {problem.constraint} constraint")
    if not _identity_penalties(problem):
        raise CapabilityError("composite penalties need solve_padmm")


class _ProxStep:
    """Prox of ``t * (penalties + separable terms)``."""

    def __init__(self, problem, gammas):
        self.problem = problem
        self.gammas = gammas
        self.addons = None if problem.is_matrix else prox_addons(problem)
        off = problem.offsets()
        self.free = slice(0, off[1])
        self.slices = [slice(off[pen.block], off[pen.block + 1]) for pen in problem.penalties]

    def __call__(self, v, t):
        P = self.problem
        if P.is_matrix:
            g = self.gammas[0]
            if g == 0:
                return v.copy()
            U, s, Vt = np.linalg.svd(v, full_matrices=False)
            K = P.penalties[0].K
            s[K:] = np.maximum(s[K:] - t * g, 0.0)
            return (U * s) @ Vt
        out = np.empty_like(v)
        if self.free.stop > 0:
            out[self.free] = project_free_block(P, v[self.free])
        for pen, g, addon, sl in zip(P.penalties, self.gammas, self.addons, self.slices):
            scaled = addon.scaled(t)
            out[sl] = prox_point(v[sl], pen.K, t * g, scaled, pen.p) if g > 0 else scaled.project(v[sl])
        return out


def _initial_point(problem, config):
    if config.x0 is None:
        return problem.zeros()
    if isinstance(config.x0, str):
        if config.x0 != "random":
            raise InputError(f"unknown x0 mode {config.x0!r}")
        rng = rng_from_seed(config.seed)
        x = rng.standard_normal(problem.shape if problem.is_matrix else problem.size)
        if problem.constraint in ("nonneg", "nonneg_matrix_pair"):
            x = np.abs(x)
        return x
    return problem.check_point(np.array(config.x0, dtype=float))


class _Recorder:
    """Objective summary, support-change counter and optional trace rows."""

    def __init__(self, config):
        self.keep = config.trace
        self.rows = []
        self.first = None
        self.last = None
        self.lowest = np.inf
        self.support_changes = 0
        self.last_support = None
        self.monotone = True

    def log(self, k, F, pen, residual, support):
        if self.last is not None and F > self.last + 1e-12 * (1.0 + abs(self.last)):
            self.monotone = False
        if self.first is None:
            self.first = F
        self.last = F
        self.lowest = min(self.lowest, F)
        if self.last_support is not None and not np.array_equal(support, self.last_support):
            self.support_changes += 1
        self.last_support = support
        if self.keep:
            self.rows.append((k, float(F), float(pen), float(residual)))

    def summary(self):
        return {"first": float(self.first), "last": float(self.last), "min": float(self.lowest),
                "monotone": self.monotone}


def _finish(problem, gammas, x, k, converged, rec, config, extras, penalty_args=None):
    from .stationarity import dstationarity_residual

    x = np.array(x)
    pv = penalty_values(problem, x)
    F = loss_value(problem, x) + sum(g * v for g, v in zip(gammas, pv))
    card = cardinality(problem, x, penalty_args)
    residual = None
    if config.check:
        residual = dstationarity_residual(problem, gammas, x, penalty_args=penalty_args, seed=config.seed).residual
    extras = dict(extras)
    extras["support_changes"] = rec.support_changes
    if penalty_args is not None:
        extras["penalty_args"] = penalty_args
    return SolveReport(x, float(F), pv, card, residual, k, converged, rec.summary(),
                       config.algorithm, extras, rec.rows)


def _small_change(xn, x, tol):
    return np.linalg.norm(xn - x) <= tol * (1.0 + np.linalg.norm(xn))


def _gradient(problem):
    fam = family_of(problem)
    return lambda x: fam.smooth_grad(problem, x)


# -- proximal gradient ----------------------------------------------------------------


def solve_pgm(problem, gamma, config=None):
    """Proximal gradient method with constant step ``1/M``.

    Stops when ``||x+ - x|| <= tol (1 + ||x+||)``.  With the exact step the
    objective never increases; ``trace_summary['monotone']`` records it.
    """
    config = config or SolverConfig("pgm")
    gammas = _gammas(problem, gamma)
    _check_prox_available(problem)
    if config.step is not None:
        t = float(config.step)
    else:
        M = loss_profile(problem).smooth
        if M is None:
            raise CapabilityError(f"{problem.family} has no smoothness constant; pass a step or use sparsa")
        t = 1.0 / M if M > 0 else 1.0
    prox, grad, ev = _ProxStep(problem, gammas), _gradient(problem), _Evaluator(problem, gammas)
    x = _initial_point(problem, config)
    rec = _Recorder(config)
    F, pen, sup = ev(x)
    rec.log(0, F, pen, 0.0, sup)
    converged = False
    k = 0
    while k < config.max_iter:
        k += 1
        xn = prox(x - t * grad(x), t)
        F, pen, sup = ev(xn)
        rec.log(k, F, pen, 0.0, sup)
        done = _small_change(xn, x, config.tol)
        x = xn
        if done and k >= config.min_iter:
            converged = True
            break
    return _finish(problem, gammas, x, k, converged, rec, config, {"step": t})


def solve_sparsa(problem, gamma, config=None):
    """Proximal gradient with Barzilai-Borwein steps and nonmonotone acceptance.

    A trial step ``t`` is accepted when
    ``F(x+) <= max(last window objectives) - 1e-4 / t * ||x+ - x||^2``;
    otherwise ``t`` is halved.  After acceptance the next trial step is
    ``s's / s'y`` clipped to ``bb_clip`` (the previous step is kept when
    ``s'y <= 0``).  The first 1000 accepted steps are kept in
    ``extras['steps']``.
    """
    config = config or SolverConfig("sparsa")
    gammas = _gammas(problem, gamma)
    _check_prox_available(problem)
    lo, hi = config.bb_clip
    if config.step is not None:
        t = float(config.step)
    else:
        M = loss_profile(problem).smooth
        t = 1.0 / M if M else 1.0
    prox, grad, ev = _ProxStep(problem, gammas), _gradient(problem), _Evaluator(problem, gammas)
    x = _initial_point(problem, config)
    g = grad(x)
    F, pen, sup = ev(x)
    window = deque([F], maxlen=config.nonmonotone_window)
    rec = _Recorder(config)
    rec.log(0, F, pen, 0.0, sup)
    steps = []
    backtracks = 0
    converged = False
    k = 0
    while k < config.max_iter:
        k += 1
        ref = max(window)
        for _ in range(MAX_BACKTRACKS):
            xn = prox(x - t * g, t)
            F, pen, sup = ev(xn)
            if F <= ref - ARMIJO / t * float(np.sum((xn - x) ** 2)):
                break
            t *= 0.5
            backtracks += 1
        else:
            raise VerificationError(f"line search failed at iteration {k}")
        if len(steps) < 1000:
            steps.append(t)
        gn = grad(xn)
        s, y = (xn - x).ravel(), (gn - g).ravel()
        sy = float(s @ y)
        if sy > 0:
            t = min(max(float(s @ s) / sy, lo), hi)
        done = _small_change(xn, x, config.tol)
        x, g = xn, gn
        window.append(F)
        rec.log(k, F, pen, 0.0, sup)
        if done and k >= config.min_iter:
            converged = True
            break
    return _finish(problem, gammas, x, k, converged, rec, config, {"steps": steps, "backtracks": backtracks})


# -- proximal ADMM ------------------------------------------------------------------------


class _Diverged(Exception):
    def __init__(self, history):
        super().__init__("diverged")
        self.history = history


class _DivergenceWatch:
    """Flags a primal residual that grew tenfold over the last 100 iterations."""

    def __init__(self):
        self.hist = deque(maxlen=DIVERGENCE_WINDOW + 1)

    def __call__(self, r, scale):
        self.hist.append(r)
        # residuals at round-off level are noise, not divergence
        floor = 1e-3 * (1.0 + scale)
        if len(self.hist) > DIVERGENCE_WINDOW and r > 10.0 * max(self.hist[0], floor):
            raise _Diverged([float(v) for v in list(self.hist)[-5:]])


def _admm_mode(problem):
    if problem.is_matrix:
        if problem.family != "robust_pca":
            raise CapabilityError(f"no ADMM splitting for {problem.family}")
        return "split"
    if problem.constraint != "none":
        raise CapabilityError(f"ADMM does not handle the {problem.constraint} constraint")
    if not _identity_penalties(problem):
        if problem.L != 1 or problem.blocks[0] != 0:
            raise CapabilityError("composite ADMM supports a single penalized block")
        return "composite"
    try:
        loss_split(problem)
    except CapabilityError:
        # smooth losses with an identity penalty still fit the composite split
        # as long as no separable term lives in the loss
        plain = all(a.kind == "none" for a in prox_addons(problem))
        if problem.L == 1 and problem.blocks[0] == 0 and plain and loss_profile(problem).smooth is not None:
            return "composite"
        raise CapabilityError(f"no ADMM splitting for {problem.family}") from None
    return "split"


def solve_padmm(problem, gamma, config=None):
    """Proximal ADMM.

    Composite penalties split ``z = D x - c`` and alternate a z-prox, an
    x-minimization (exact linear solve for least-squares losses up to 500
    unknowns, one linearized step otherwise) and dual ascent.  Nonsmooth
    losses ``h(A x)`` split ``u = A x`` instead, with a linearized
    x-update and the prox of ``h``.  Stops once the primal residual and the
    changes of both primal variables are below ``tol`` (relative).  When
    the residual grows tenfold over 100 iterations the run restarts with
    ``rho`` doubled, at most 10 times.
    """
    config = config or SolverConfig("padmm")
    gammas = _gammas(problem, gamma)
    mode = _admm_mode(problem)
    if config.rho is not None:
        rho = float(config.rho)
    elif mode == "composite":
        M = loss_profile(problem).smooth
        pen = problem.penalties[0]
        rho = 10.0 * (M if M else 1.0) / sigma_kmp(pen.D, pen.K, pen.p) ** 2
    else:
        rho = 10.0
    runner = _admm_composite if mode == "composite" else _admm_split
    history = []
    for attempt in range(MAX_RHO_DOUBLINGS + 1):
        try:
            return runner(problem, gammas, config, rho, attempt)
        except _Diverged as exc:
            history = exc.history
            rho *= 2.0
    raise VerificationError(f"ADMM diverged after {MAX_RHO_DOUBLINGS} doublings of rho; last residuals {history}")


def _admm_composite(problem, gammas, config, rho, attempt):
    pen = problem.penalties[0]
    D = pen.D if pen.D is not None else np.eye(problem.size)
    c = pen.c if pen.c is not None else np.zeros(D.shape[0])
    gamma = gammas[0]
    none = SeparableAddon.none()
    ev = _Evaluator(problem, gammas)
    x = _initial_point(problem, config)
    try:
        designs, b, _ = least_squares_parts(problem)
        exact = problem.size <= EXACT_SOLVE_LIMIT
    except CapabilityError:
        exact = False
    if exact:
        A = designs[1]
        factor = cho_factor(A.T @ A + rho * D.T @ D)
        Atb = A.T @ b
    else:
        M = loss_profile(problem).smooth
        if M is None:
            raise CapabilityError(f"{problem.family} has no smoothness constant")
        grad = _gradient(problem)
        tau = M + rho * np.linalg.norm(D, 2) ** 2
    Dx = D @ x
    z = Dx - c
    lam = np.zeros_like(z)
    rec = _Recorder(config)
    watch = _DivergenceWatch()
    converged = False
    rn = 0.0
    k = 0
    while k < config.max_iter:
        k += 1
        v = Dx - c + lam / rho
        zn = prox_point(v, pen.K, gamma / rho, none, pen.p) if gamma > 0 else v
        if exact:
            xn = cho_solve(factor, Atb + D.T @ (rho * (c + zn) - lam))
        else:
            xn = x - (grad(x) + D.T @ (lam + rho * (Dx - c - zn))) / tau
        Dx = D @ xn
        r = Dx - c - zn
        lam = lam + rho * r
        rn = float(np.linalg.norm(r))
        F, pval, sup = ev(xn, [zn])
        rec.log(k, F, pval, rn, sup)
        zscale = float(np.linalg.norm(zn))
        watch(rn, zscale)
        done = (rn <= config.tol * (1.0 + zscale)
                and _small_change(xn, x, config.tol) and _small_change(zn, z, config.tol))
        x, z = xn, zn
        if done and k >= config.min_iter:
            converged = True
            break
    extras = {"rho": rho, "rho_doublings": attempt, "mode": "composite", "primal_residual": rn,
              "x_update": "exact" if exact else "linearized"}
    return _finish(problem, gammas, x, k, converged, rec, config, extras, penalty_args=[z])


def _admm_split(problem, gammas, config, rho, attempt):
    split = loss_split(problem)
    A = split.A
    prox, ev = _ProxStep(problem, gammas), _Evaluator(problem, gammas)
    x = _initial_point(problem, config)
    tau = rho * (1.0 if A is None else 1.01 * np.linalg.norm(A, 2) ** 2)
    Ax = x if A is None else A @ x
    u = Ax.copy()
    lam = np.zeros_like(u)
    rec = _Recorder(config)
    watch = _DivergenceWatch()
    converged = False
    rn = 0.0
    k = 0
    while k < config.max_iter:
        k += 1
        if A is None:
            # identity operator: the x-step is an exact prox
            xn = prox(u - lam / rho, 1.0 / rho)
            Ax = xn
        else:
            xn = prox(x - A.T @ (lam + rho * (Ax - u)) / tau, 1.0 / tau)
            Ax = A @ xn
        un = split.prox(Ax + lam / rho, 1.0 / rho)
        r = Ax - un
        lam = lam + rho * r
        rn = float(np.linalg.norm(r))
        F, pval, sup = ev(xn)
        rec.log(k, F, pval, rn, sup)
        uscale = float(np.linalg.norm(un))
        watch(rn, uscale)
        done = (rn <= config.tol * (1.0 + uscale)
                and _small_change(xn, x, config.tol) and _small_change(un, u, config.tol))
        x, u = xn, un
        if done and k >= config.min_iter:
            converged = True
            break
    extras = {"rho": rho, "rho_doublings": attempt, "mode": "loss_split", "primal_residual": rn}
    return _finish(problem, gammas, x, k, converged, rec, config, extras)


# -- DCA baseline --------------------------------------------------------------------------


def largest_k_subgradient(x, K):
    """Sign pattern on the ``K`` largest magnitudes (ties to the lowest index)."""
    x = np.asarray(x, dtype=float)
    s = np.zeros_like(x)
    top = np.argsort(-np.abs(x), kind="stable")[:K]
    s[top] = np.sign(x[top])
    return s


def solve_dca(problem, gamma, config=None):
    """DCA on ``f + gamma (||x||_1 - ||x||_<K>)``.

    Each outer step linearizes the largest-K norm and solves the convex
    l1-regularized subproblem by proximal gradient to ``tol / 10``.  At
    the origin the linearization is zero, so the subproblem returns the
    origin whenever ``gamma >= ||grad f(0)||_inf``; ``extras['stagnated']``
    flags a run that never left its starting point.
    """
    config = config or SolverConfig("dca")
    gammas = _gammas(problem, gamma)
    fam = family_of(problem)
    if problem.is_matrix or problem.constraint != "none" or problem.L != 1 or problem.blocks[0] != 0:
        raise CapabilityError("DCA needs a single unconstrained trimmed block")
    pen = problem.penalties[0]
    if pen.p != 1 or not _identity_penalties(problem) or not fam.convex:
        raise CapabilityError("DCA needs p = 1, D = I, c = 0 and a convex smooth loss")
    M = loss_profile(problem).smooth
    if M is None:
        raise CapabilityError(f"{problem.family} has no smoothness constant")
    t = float(config.step) if config.step is not None else (1.0 / M if M > 0 else 1.0)
    g = gammas[0]
    addon = prox_addons(problem)[0]
    eta = addon.eta if addon.kind == "l1" else 0.0
    grad, ev = _gradient(problem), _Evaluator(problem, gammas)
    x = _initial_point(problem, config)
    x0 = x.copy()
    rec = _Recorder(config)
    F, pval, sup = ev(x)
    rec.log(0, F, pval, 0.0, sup)
    inner_tol = config.tol / 10.0
    inner_total = 0
    converged = False
    k = 0
    while k < config.max_iter:
        k += 1
        s = largest_k_subgradient(x, pen.K)
        y = x.copy()
        for _ in range(DCA_INNER_CAP):
            yn = soft_threshold(y - t * (grad(y) - g * s), t * (g + eta))
            inner_total += 1
            stop = _small_change(yn, y, inner_tol)
            y = yn
            if stop:
                break
        done = _small_change(y, x, config.tol)
        x = y
        F, pval, sup = ev(x)
        rec.log(k, F, pval, 0.0, sup)
        if done and k >= config.min_iter:
            converged = True
            break
    stagnated = bool(np.array_equal(x, x0))
    return _finish(problem, gammas, x, k, converged, rec, config,
                   {"step": t, "inner_iterations": inner_total, "stagnated": stagnated})


SOLVERS = {"pgm": solve_pgm, "sparsa": solve_sparsa, "padmm": solve_padmm, "dca": solve_dca}

# solver used for each family when the caller does not choose one
DEFAULT_ALGORITHM = {
    "sparse_ols": "pgm",
    "power1": "padmm",
    "logistic": "pgm",
    "svm": "padmm",
    "robust_reg": "pgm",
    "mcv": "padmm",
    "trend_filter": "padmm",
    "nonneg_ols": "pgm",
    "nmf_cluster": "sparsa",
    "lowrank_ols": "pgm",
    "matrix_completion": "pgm",
    "multiclass": "sparsa",
    "robust_pca": "padmm",
    "linear_matrix": "pgm",
}


# the origin is a saddle of these losses, so default runs start elsewhere
RANDOM_START = ("nmf_cluster",)


def default_config(problem, **overrides):
    """Config with the family's default algorithm (and start for nonconvex losses)."""
    if problem.family in RANDOM_START:
        overrides.setdefault("x0", "random")
    return SolverConfig(DEFAULT_ALGORITHM.get(problem.family, "pgm"), **overrides)


def solve(problem, gamma, config=None):
    """Dispatch on ``config.algorithm`` (family default when omitted)."""
    config = config or default_config(problem)
    return SOLVERS[config.algorithm](problem, gamma, config)
