"""Seeded sweeps over penalty multipliers with CSV / JSON output.

Each (seed, multiplier) pair generates an instance, computes its
threshold certificate, solves with ``gamma = multiplier * gamma_bar`` and
records one row per penalty block.  The headline check is that rows with
``multiplier > 1`` whose run converged and passed the probe check satisfy
the cardinality or rank constraint.
"""

import csv
import dataclasses
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import jsonschema

from .errors import InputError, TLXError
from .penalty import RANK_RTOL
from .problems import FAMILIES, generate_instance
from .solvers import DEFAULT_ALGORITHM, SolverConfig, default_config, solve
from .stationarity import PROBE_TOL
from .thresholds import certify, select_gamma

DEFAULT_GAMMA_GRID = (0.5, 0.9, 1.001, 1.1, 2.0)

_SOLVER_FIELDS = {
    "algorithm": {"enum": ["pgm", "sparsa", "padmm", "dca"]},
    "step": {"type": "number", "exclusiveMinimum": 0},
    "rho": {"type": "number", "exclusiveMinimum": 0},
    "tol": {"type": "number", "exclusiveMinimum": 0},
    "max_iter": {"type": "integer", "minimum": 1},
    "nonmonotone_window": {"type": "integer", "minimum": 1},
    "bb_clip": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2},
    "x0": {"enum": [None, "random"]},
    "min_iter": {"type": "integer", "minimum": 0},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "tlx experiment config",
    "type": "object",
    "required": ["family", "seeds"],
    "additionalProperties": False,
    "properties": {
        "family": {"enum": sorted(FAMILIES)},
        "dims": {"type": "object"},
        "noise": {"type": "number", "minimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "gamma_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "solver": {"type": "object", "properties": _SOLVER_FIELDS, "additionalProperties": False},
        "outputs": {
            "type": "object",
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"}},
            "additionalProperties": False,
        },
        "timing": {"type": "boolean"},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition.

    ``solver`` holds :class:`SolverConfig` overrides; omitted keys use the
    family default.  ``timing`` fills ``wall_ms``; it is off by default so
    repeated runs write byte-identical files.
    """

    family: str
    seeds: tuple
    dims: dict = field(default_factory=dict)
    noise: float = 0.1
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    solver: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timing: bool = False

    def __post_init__(self):
        validate_config(self.as_dict())

    def as_dict(self):
        return {
            "family": self.family,
            "dims": dict(self.dims),
            "noise": self.noise,
            "seeds": list(self.seeds),
            "gamma_grid": list(self.gamma_grid),
            "solver": dict(self.solver),
            "outputs": dict(self.outputs),
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, doc):
        validate_config(doc)
        doc = dict(doc)
        doc["seeds"] = tuple(doc["seeds"])
        if "gamma_grid" in doc:
            doc["gamma_grid"] = tuple(doc["gamma_grid"])
        return cls(**doc)


def validate_config(doc):
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid experiment config at {path}: {exc.message}") from None


def load_config(path):
    """Read and validate a JSON experiment config."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True)
class ExperimentRow:
    """One penalty block of one (seed, multiplier) run.

    ``support_rule`` names how the count was taken: literal zeros for
    trimmed penalties, singular values above ``1e-10 * sigma_1`` for
    truncated ones.  ``status`` is ``ok`` or the error class of a failed
    run, whose numeric fields are then empty.
    """

    family: str
    seed: int
    gamma_multiplier: float
    gamma: float
    gamma_bar: float
    final_cardinality_or_rank: object
    K: int
    constraint_satisfied: object
    objective: object
    stationarity_residual: object
    iterations: object
    wall_ms: float
    block: int = 1
    algorithm: str = ""
    converged: object = None
    probe_pass: object = None
    support_rule: str = ""
    status: str = "ok"

    @property
    def headline_applies(self):
        return self.status == "ok" and self.gamma_multiplier > 1 and bool(self.converged) and bool(self.probe_pass)

    @property
    def headline_ok(self):
        return not self.headline_applies or bool(self.constraint_satisfied)


ROW_FIELDS = tuple(f.name for f in dataclasses.fields(ExperimentRow))


def _support_rule(problem):
    return f"rank_rtol_{RANK_RTOL:g}" if problem.is_matrix else "exact_zero"


def _solver_config(problem, overrides, seed):
    overrides = dict(overrides)
    if "bb_clip" in overrides:
        overrides["bb_clip"] = tuple(overrides["bb_clip"])
    if "algorithm" not in overrides:
        return default_config(problem, seed=seed, **overrides)
    return SolverConfig(seed=seed, **overrides)


def run_single(config, seed, multiplier):
    """Rows for one (seed, multiplier) pair; solver errors become failed rows."""
    problem = generate_instance(config.family, seed=seed, noise=config.noise, **config.dims)
    cert = certify(problem)
    gammas = select_gamma(cert, multiplier)
    algorithm = config.solver.get("algorithm", DEFAULT_ALGORITHM.get(problem.family, "pgm"))
    base = {"family": config.family, "seed": seed, "gamma_multiplier": multiplier,
            "algorithm": algorithm, "support_rule": _support_rule(problem)}
    start = perf_counter()
    try:
        report = solve(problem, gammas, _solver_config(problem, config.solver, seed))
    except TLXError as exc:
        wall = round(1000 * (perf_counter() - start), 3) if config.timing else 0.0
        return [ExperimentRow(gamma=g, gamma_bar=gb, final_cardinality_or_rank=None, K=pen.K,
                              constraint_satisfied=None, objective=None, stationarity_residual=None,
                              iterations=None, wall_ms=wall, block=l + 1, status=type(exc).__name__, **base)
                for l, (pen, g, gb) in enumerate(zip(problem.penalties, gammas, cert.gamma_bar))]
    wall = round(1000 * (perf_counter() - start), 3) if config.timing else 0.0
    residual = report.stationarity_residual
    probe_pass = residual is not None and residual >= -PROBE_TOL
    rows = []
    for l, (pen, g, gb, card) in enumerate(zip(problem.penalties, gammas, cert.gamma_bar, report.cardinality)):
        rows.append(ExperimentRow(
            gamma=g, gamma_bar=gb, final_cardinality_or_rank=int(card), K=pen.K,
            constraint_satisfied=bool(card <= pen.K), objective=report.objective,
            stationarity_residual=residual, iterations=report.iterations, wall_ms=wall,
            block=l + 1, converged=report.converged, probe_pass=probe_pass, **base))
    return rows


def thread_count():
    """Worker count: ``TLX_THREADS`` if set, else the CPU count (at most 8)."""
    raw = os.environ.get("TLX_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"TLX_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InputError("TLX_THREADS must be at least 1")
    return n


def run_experiment(config):
    """All rows of the sweep, sorted by seed, then multiplier, then block."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    pairs = [(s, m) for s in sorted(set(config.seeds)) for m in sorted(set(config.gamma_grid))]
    workers = min(thread_count(), len(pairs))
    if workers <= 1:
        chunks = [run_single(config, s, m) for s, m in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda sm: run_single(config, *sm), pairs))
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=lambda r: (r.seed, r.gamma_multiplier, r.block))


def headline_failures(rows):
    """Rows that converged, passed the probe check at multiplier > 1 and still violate."""
    return [r for r in rows if not r.headline_ok]


# -- serialization -----------------------------------------------------------------


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow([_csv_cell(getattr(r, name)) for name in ROW_FIELDS])
    return buf.getvalue()


_INT_FIELDS = {"seed", "final_cardinality_or_rank", "K", "iterations", "block"}
_FLOAT_FIELDS = {"gamma_multiplier", "gamma", "gamma_bar", "objective", "stationarity_residual", "wall_ms"}
_BOOL_FIELDS = {"constraint_satisfied", "converged", "probe_pass"}


def _parse_cell(name, text):
    if text == "":
        return None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    if name in _BOOL_FIELDS:
        return text == "true"
    return text


def rows_from_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != ROW_FIELDS:
        raise InputError("CSV header does not match the experiment row fields")
    return [ExperimentRow(**{name: _parse_cell(name, cell) for name, cell in zip(header, line)}) for line in reader]


def rows_to_json(rows, config=None):
    doc = {"fields": list(ROW_FIELDS), "rows": [dataclasses.asdict(r) for r in rows]}
    if config is not None:
        doc["config"] = config.as_dict()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def rows_from_json(text):
    doc = json.loads(text)
    return [ExperimentRow(**row) for row in doc["rows"]]


def write_outputs(rows, config):
    """Write the CSV and JSON files named in ``config.outputs``."""
    written = []
    for kind, render in (("csv", rows_to_csv), ("json", lambda r: rows_to_json(r, config))):
        path = config.outputs.get(kind)
        if not path:
            continue
        try:
            with open(path, "w", newline="") as fh:
                fh.write(render(rows))
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror}") from None
        written.append(path)
    return written

