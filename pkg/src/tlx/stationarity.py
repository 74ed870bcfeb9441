"""Directional stationarity checks and the truncated-nuclear counterexample.

The probe check evaluates ``F'(x; d)`` over a finite set of feasible
directions.  A negative minimum proves ``x`` is not d-stationary; a
nonnegative minimum is only a necessary-condition pass, since no finite
probe set covers every direction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .penalty import (
    numeric_dir_deriv,
    singular_values,
    trimmed_l1_dir_deriv,
    truncated_nuclear_value,
    truncated_shrink_direction,
)
from .problems import loss_dir_deriv, make_problem, rng_from_seed

PROBE_TOL = 1e-6
DECREASE_TOL = 1e-10
RANDOM_PROBES = 100
FEAS_TOL = 1e-10


@dataclass(frozen=True)
class ProbeSet:
    directions: tuple
    provenance: tuple

    def __len__(self):
        return len(self.directions)


@dataclass(frozen=True)
class StationarityVerdict:
    """Minimum directional derivative over the probes.

    ``is_necessary_pass`` means no probe found descent; it is not a proof
    of d-stationarity.
    """

    residual: float
    worst_direction: np.ndarray
    worst_provenance: str
    is_necessary_pass: bool
    probes: int

    def to_dict(self):
        return {"residual": self.residual, "worst_provenance": self.worst_provenance,
                "is_necessary_pass": self.is_necessary_pass, "probes": self.probes}


@dataclass(frozen=True)
class SampleVerdict:
    max_decrease: float
    worst_point: np.ndarray
    passed: bool
    samples: int

    def to_dict(self):
        return {"max_decrease": self.max_decrease, "passed": self.passed, "samples": self.samples}


# -- feasibility --------------------------------------------------------------------


def _nonneg_mask(problem):
    mask = np.zeros(problem.size, dtype=bool)
    if problem.constraint == "nonneg":
        mask[problem.data["nonneg"].astype(int)] = True
    elif problem.constraint == "nonneg_matrix_pair":
        mask[:] = True
    return mask


def check_feasible(problem, x):
    x = problem.check_point(x)
    tag = problem.constraint
    if tag in ("nonneg", "nonneg_matrix_pair"):
        if np.any(x[_nonneg_mask(problem)] < 0):
            raise InputError("point violates the nonnegativity constraint")
    elif tag == "ball":
        if np.linalg.norm(x) > 1.0 + FEAS_TOL:
            raise InputError("point lies outside the unit ball")
    elif tag == "simplex":
        if np.any(x < 0) or abs(x.sum() - 1.0) > FEAS_TOL:
            raise InputError("point lies outside the simplex")
    return x


def feasible_direction(problem, x, d):
    """Map ``d`` into the feasible cone at ``x`` (zero if nothing survives)."""
    tag = problem.constraint
    d = np.array(d, dtype=float)
    if tag in ("nonneg", "nonneg_matrix_pair"):
        at_bound = _nonneg_mask(problem) & (x <= 0)
        d[at_bound] = np.maximum(d[at_bound], 0.0)
    elif tag == "ball":
        if np.linalg.norm(x) >= 1.0 - FEAS_TOL:
            inner = float(x @ d)
            if inner > -1e-12:
                d = d - (inner + 1e-3 * np.linalg.norm(d)) * x
    elif tag == "simplex":
        free = x > 0
        d[~free] = np.maximum(d[~free], 0.0)
        d[free] -= d.sum() / max(int(free.sum()), 1)
        if not free.any():
            d[:] = 0.0
    return d


# -- probes ---------------------------------------------------------------------------


def _unit(d):
    n = np.linalg.norm(d)
    return d / n if n > 0 else None


def _zeroing_directions(problem, x, args):
    out = []
    for pen, z in zip(problem.penalties, args):
        if pen.kind != "trimmed":
            continue
        zg = np.asarray(z).reshape(-1, pen.p)
        norms = np.linalg.norm(zg, axis=1)
        order = np.argsort(-norms, kind="stable")
        target = np.zeros_like(zg)
        target[order[pen.K:]] = -zg[order[pen.K:]]
        target = target.ravel()
        d = problem.zeros()
        off = problem.offsets()
        sl = slice(off[pen.block], off[pen.block + 1])
        if pen.D is None:
            d[sl] = target
        else:
            d[sl] = np.linalg.lstsq(pen.D, target, rcond=None)[0]
        out.append(d)
        if pen.witness is not None:
            w = problem.zeros()
            w[sl] = pen.witness - problem.block(x, pen.block)
            out.append(w)
    return out


def build_probes(problem, point, seed=0, random_count=RANDOM_PROBES, penalty_args=None):
    """Coordinate, group-zeroing, shrink and seeded random directions."""
    x = problem.check_point(point)
    args = problem.penalty_arguments(x) if penalty_args is None else penalty_args
    raw, prov = [], []
    size = problem.size
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        for sgn in (1.0, -1.0):
            raw.append((sgn * e).reshape(x.shape))
            prov.append("coordinate")
    if problem.is_matrix:
        for pen in problem.penalties:
            sd = truncated_shrink_direction(x, pen.K)
            if not sd.degenerate:
                raw.append(sd.direction)
                prov.append("shrink")
    else:
        for d in _zeroing_directions(problem, x, args):
            raw.append(d)
            prov.append("group_zeroing")
    rng = rng_from_seed(seed)
    for _ in range(random_count):
        raw.append(rng.standard_normal(x.shape))
        prov.append(f"random({seed})")
    dirs, kept = [], []
    for d, p in zip(raw, prov):
        if not problem.is_matrix:
            d = feasible_direction(problem, x, d)
        u = _unit(d)
        if u is not None:
            dirs.append(u)
            kept.append(p)
    return ProbeSet(tuple(dirs), tuple(kept))


def objective_dir_deriv(problem, gammas, x, d, penalty_args=None):
    """``F'(x; d)``: exact for the loss and trimmed terms, numeric for the
    truncated nuclear norm."""
    val = loss_dir_deriv(problem, x, d)
    args = problem.penalty_arguments(x) if penalty_args is None else penalty_args
    for pen, g, z in zip(problem.penalties, gammas, args):
        if g == 0:
            continue
        if pen.kind == "truncated":
            est = numeric_dir_deriv(lambda Z: truncated_nuclear_value(Z, pen.K), z, d)
            val += g * est.value
        else:
            val += g * trimmed_l1_dir_deriv(z, pen.K, pen.apply(problem.block(d, pen.block)), pen.p)
    return float(val)


def dstationarity_residual(problem, gammas, point, probes=None, tol=PROBE_TOL, penalty_args=None, seed=0):
    """Minimum of ``F'(point; d)`` over the probe set.

    ``penalty_args`` overrides the penalty arguments ``D x - c`` (used for
    split-variable solvers whose split copy carries the exact zeros).
    """
    gammas = tuple(float(g) for g in np.atleast_1d(gammas))
    if len(gammas) == 1 and problem.L > 1:
        gammas = gammas * problem.L
    x = check_feasible(problem, point)
    probes = probes or build_probes(problem, x, seed=seed, penalty_args=penalty_args)
    vals = [objective_dir_deriv(problem, gammas, x, d, penalty_args) for d in probes.directions]
    if not vals:
        raise InputError("empty probe set")
    worst = int(np.argmin(vals))
    res = float(vals[worst])
    if not np.isfinite(res):
        raise InputError("non-finite directional derivative")
    return StationarityVerdict(res, probes.directions[worst], probes.provenance[worst], res >= -tol, len(vals))


# -- local optimality sampling --------------------------------------------------------


def _objective(problem, gammas, x):
    from .solvers import objective

    return objective(problem, gammas, x)


def _feasible_perturbation(problem, x, delta, rng, radius):
    tag = problem.constraint
    if tag in ("nonneg", "nonneg_matrix_pair"):
        y = x + delta
        mask = _nonneg_mask(problem)
        y[mask] = np.maximum(y[mask], 0.0)
        return y
    if tag == "ball":
        y = x + delta
        n = np.linalg.norm(y)
        return y / n if n > 1.0 else y
    if tag == "simplex":
        w = rng.dirichlet(np.ones(x.size))
        step = w - x
        n = np.linalg.norm(step)
        scale = min(1.0, radius * rng.random() / n) if n > 0 else 0.0
        return x + scale * step
    return x + delta


def local_opt_sample_check(problem, gammas, point, radius=1e-4, samples=500, seed=0, extra_directions=()):
    """Largest objective decrease over random feasible points near ``point``.

    Each sample is ``point + r u`` with ``u`` a random unit direction and
    ``r`` uniform in ``(0, radius]``, mapped back into the constraint set.
    Every extra direction is also tried at ten evenly spaced lengths up to
    ``radius``.  Passes when the decrease never exceeds ``1e-10``.
    """
    gammas = tuple(float(g) for g in np.atleast_1d(gammas))
    if len(gammas) == 1 and problem.L > 1:
        gammas = gammas * problem.L
    x = check_feasible(problem, point)
    F0 = _objective(problem, gammas, x)
    rng = rng_from_seed(seed)
    best, worst_point = -np.inf, x
    candidates = []
    for _ in range(samples):
        u = rng.standard_normal(x.shape)
        u /= np.linalg.norm(u)
        candidates.append(_feasible_perturbation(problem, x, radius * (1.0 - rng.random()) * u, rng, radius))
    for d in extra_directions:
        u = np.asarray(d, dtype=float).reshape(x.shape)
        u = u / np.linalg.norm(u)
        for frac in np.linspace(0.1, 1.0, 10):
            candidates.append(_feasible_perturbation(problem, x, frac * radius * u, rng, radius))
    for y in candidates:
        dec = F0 - _objective(problem, gammas, y)
        if dec > best:
            best, worst_point = dec, y
    return SampleVerdict(float(best), worst_point, bool(best <= DECREASE_TOL), len(candidates))


# -- counterexample -----------------------------------------------------------------


COUNTEREXAMPLE_POINT = np.array([[1.0, 0.0], [0.0, 2.0]])
COUNTEREXAMPLE_DIRECTION = np.array([[2.0, -1.0], [-1.0, 2.0]])
XI_GRID = tuple(np.round(np.arange(1, 11) * 0.05, 2))


def counterexample_problem(gamma):
    return make_problem("linear_matrix", K=1, C=[[-float(gamma), 0.0], [0.0, 0.0]])


def h_closed_form(xi, gamma):
    """Objective along ``X* + xi Y`` for the 2x2 counterexample."""
    return 0.5 * gamma * (1.0 - np.sqrt(4.0 * xi * xi + 1.0))


def sigma2_gradient_fd(X, step=1e-6):
    """Central-difference gradient of the second singular value."""
    G = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = step
        G[idx] = (singular_values(X + E)[1] - singular_values(X - E)[1]) / (2.0 * step)
    return G


def counterexample_report(gamma=1.0, radius=0.5, samples=500, seed=0):
    """Linear loss plus truncated nuclear norm: d-stationary, not locally optimal.

    Returns the probe verdict at ``X*``, the sampled objective curve
    along ``Y`` against its closed form, the finite-difference gradient
    of ``sigma_2`` at ``X*`` and the local sampling verdict (which
    includes the direction ``Y``).
    """
    if not gamma > 0:
        raise InputError("gamma must be positive")
    gamma = float(gamma)
    P = counterexample_problem(gamma)
    X, Y = COUNTEREXAMPLE_POINT, COUNTEREXAMPLE_DIRECTION
    verdict = dstationarity_residual(P, (gamma,), X, seed=seed)
    curve = []
    for xi in XI_GRID:
        sampled = _objective(P, (gamma,), X + xi * Y)
        curve.append({"xi": float(xi), "h": sampled, "closed_form": float(h_closed_form(xi, gamma))})
    deviation = max(abs(c["h"] - c["closed_form"]) for c in curve)
    G = sigma2_gradient_fd(X)
    grad_err = float(np.abs(G - np.diag([1.0, 0.0])).max())
    sample = local_opt_sample_check(P, (gamma,), X, radius=radius, samples=samples, seed=seed,
                                    extra_directions=(Y,))
    return {
        "gamma": gamma,
        "probe_residual": verdict.residual,
        "probe_pass": verdict.is_necessary_pass,
        "probes": verdict.probes,
        "h_curve": curve,
        "h_max_deviation": float(deviation),
        "sigma2_gradient": G.tolist(),
        "sigma2_gradient_error": grad_err,
        "max_decrease": sample.max_decrease,
        "sampling_pass": sample.passed,
        "separates": bool(verdict.is_necessary_pass and not sample.passed),
    }
