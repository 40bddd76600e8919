"""Experiment configuration documents and their validation.

A configuration is one JSON object::

    {"experiment": "whole_space_sandwich",
     "kernel": {"d": 1, "alpha": 1.0, "beta": 0, "normalization": "standard"},
     "domain": {"shape": "full_space", "d": 1},
     "grid": [[0.25, 0.0, 0.5], ...],
     "n_paths": 1000000, "eps_cut": 0.01, "seed": 1,
     "tolerances": {"ratio": 12.566},
     "options": {...}}

Validation collects every problem before failing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from ..errors import ConfigError
from ..geometry import DomainSpec
from ..kernels import KernelSpec, fractional_laplacian_constant

EXPERIMENTS = (
    "whole_space_sandwich",
    "dirichlet_sandwich",
    "survival_slope",
    "exit_time",
    "exit_cone",
    "levy_system",
    "meyer_domination",
    "green",
    "lambda_D",
    "barrier_scan",
    "negative_control",
)

# names of the entries of one grid tuple; "x"/"y" are points (scalar in d = 1)
GRID_SCHEMA = {
    "whole_space_sandwich": ("t", "x", "y"),
    "dirichlet_sandwich": ("t", "x", "y"),
    "negative_control": ("t", "x", "y"),
    "meyer_domination": ("t", "x", "y"),
    "survival_slope": ("t", "delta"),
    "exit_time": ("x",),
    "exit_cone": ("delta", "r", "lam"),
    "levy_system": ("x",),
    "green": ("x", "y"),
    "lambda_D": ("x",),
    "barrier_scan": ("delta",),
}

TOLERANCE_KEYS = {
    "ratio", "rel_error", "se_rule", "n_se", "slope", "slope_tol", "abs", "r2", "rel", "p_value", "ks",
}

MIN_PATHS = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    kernel: KernelSpec
    domain: DomainSpec
    grid: tuple
    n_paths: int
    eps_cut: float
    seed: int
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    name: str = ""
    expected: str = "pass"

    def tol(self, key, default):
        return self.tolerances.get(key, default)

    def opt(self, key, default=None):
        return self.options.get(key, default)

    def with_overrides(self, seed=None, n_paths=None):
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if n_paths is not None:
            changes["n_paths"] = int(n_paths)
        out = replace(self, **changes)
        problems = semantic_problems(out)
        if problems:
            raise ConfigError(problems)
        return out

    def to_dict(self):
        k = self.kernel.to_dict()
        return {
            "name": self.name,
            "experiment": self.experiment,
            "expected": self.expected,
            "kernel": k,
            "domain": self.domain.to_dict(),
            "grid": [list(_jsonable(v) for v in row) for row in self.grid],
            "n_paths": self.n_paths,
            "eps_cut": self.eps_cut,
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
            "options": _jsonable(dict(self.options)),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(u) for u in v]
    if isinstance(v, list):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def _kernel(doc, problems):
    if not isinstance(doc, dict):
        problems.append("kernel must be an object")
        return None
    doc = dict(doc)
    norm = doc.pop("normalization", None)
    if norm not in (None, "standard", "unit"):
        problems.append(f"kernel.normalization must be 'standard' or 'unit', got {norm!r}")
        norm = None
    if norm == "standard":
        try:
            k0 = fractional_laplacian_constant(int(doc["d"]), float(doc["alpha"]))
        except Exception as exc:  # reported below by the kernel itself
            problems.append(f"kernel: cannot compute the standard normalization ({exc})")
            return None
        kap = dict(doc.get("kappa", {}))
        kap["kappa0"] = k0
        doc["kappa"] = kap
        doc.setdefault("L3", max(k0 + abs(kap.get("eps", 0.0)), 1.0 / (k0 - abs(kap.get("eps", 0.0))), 1.0))
    try:
        return KernelSpec.from_dict(doc)
    except ConfigError as exc:
        problems.extend(f"kernel: {p}" for p in exc.problems)
    except (TypeError, ValueError, KeyError) as exc:
        problems.append(f"kernel: malformed ({exc})")
    return None


def _domain(doc, problems):
    if not isinstance(doc, dict):
        problems.append("domain must be an object")
        return None
    try:
        return DomainSpec.from_dict(doc)
    except ConfigError as exc:
        problems.extend(f"domain: {p}" for p in exc.problems)
    except (TypeError, ValueError, KeyError) as exc:
        problems.append(f"domain: malformed ({exc})")
    return None


def _grid(doc, experiment, d, problems):
    if not isinstance(doc, list) or not doc:
        problems.append("grid must be a non-empty list of tuples")
        return ()
    schema = GRID_SCHEMA.get(experiment)
    if schema is None:
        return ()
    rows = []
    for i, row in enumerate(doc):
        row = row if isinstance(row, list) else [row]
        if len(row) != len(schema):
            problems.append(f"grid[{i}] must have the shape ({', '.join(schema)})")
            continue
        out = []
        for name, v in zip(schema, row):
            if name in ("x", "y"):
                p = [v] if not isinstance(v, list) else v
                if len(p) != d or not all(isinstance(u, (int, float)) for u in p):
                    problems.append(f"grid[{i}].{name} must be a point with {d} coordinates")
                    p = [math.nan] * d
                out.append(tuple(float(u) for u in p))
            else:
                if not isinstance(v, (int, float)) or not v > 0:
                    problems.append(f"grid[{i}].{name} must be a positive number")
                    v = math.nan
                out.append(float(v))
        rows.append(tuple(out))
    return tuple(rows)


def _scalar_problems(n_paths, eps_cut, seed):
    out = []
    if n_paths < MIN_PATHS:
        out.append(f"n_paths must be >= {MIN_PATHS}, got {n_paths}")
    if not 0.0 < eps_cut < 1.0:
        out.append(f"eps_cut must lie in (0, 1), got {eps_cut}")
    if not 0 <= seed < 2**64:
        out.append("seed must be a 64-bit unsigned integer")
    return out


def semantic_problems(cfg, scalars=True):
    """Cross-field checks on a structurally valid configuration."""
    out = _scalar_problems(cfg.n_paths, cfg.eps_cut, cfg.seed) if scalars else []
    k, dom, e = cfg.kernel, cfg.domain, cfg.experiment
    if k.d != dom.d:
        out.append(f"kernel dimension {k.d} differs from domain dimension {dom.d}")
    if not k.alpha / 2.0 < dom.eta <= 1.0:
        out.append(f"eta must lie in (alpha/2, 1] = ({k.alpha / 2}, 1], got {dom.eta}")
    unknown = set(cfg.tolerances) - TOLERANCE_KEYS
    if unknown:
        out.append(f"unknown tolerance keys {sorted(unknown)}")
    if cfg.expected not in ("pass", "fail"):
        out.append("expected must be 'pass' or 'fail'")
    full = dom.shape == "full_space"
    if e == "whole_space_sandwich" and not full:
        out.append("whole_space_sandwich needs the full_space domain")
    if e in ("dirichlet_sandwich", "negative_control", "survival_slope", "exit_time", "exit_cone",
             "meyer_domination") and full:
        out.append(f"{e} needs a proper domain, not full_space")
    if e in ("green", "lambda_D", "levy_system", "exit_time") and not dom.bounded:
        out.append(f"{e} needs a bounded domain")
    if e == "levy_system" and dom.shape not in ("ball", "interval_union"):
        out.append("levy_system needs U = ball")
    if e == "meyer_domination" and k.beta == 0.0:
        out.append("meyer_domination needs beta > 0 (nothing is removed at beta = 0)")
    if e == "negative_control" and k.beta == 0.0:
        out.append("negative_control inflates gamma, which only changes the shape for beta > 0")
    if e == "barrier_scan":
        if dom.shape not in ("half_space", "ball", "graph_domain"):
            out.append("barrier_scan supports half_space, ball and graph_domain")
        r = cfg.opt("r", 0.5)
        if not (isinstance(r, (int, float)) and 0 < r <= dom.R_char):
            out.append(f"barrier radius r = {r} must lie in (0, R] with R = {dom.R_char}")
    if e == "exit_cone":
        R1 = min(dom.R_char, 1.0)
        for i, row in enumerate(cfg.grid):
            delta, r, lam = row
            if lam < 4:
                out.append(f"grid[{i}]: lam = {lam} < 4")
            if r > R1 / 4.0:
                out.append(f"grid[{i}]: r = {r} exceeds (R ∧ 1)/4 = {R1 / 4}")
            if not delta < r / (2.0 * lam):
                out.append(f"grid[{i}]: delta = {delta} is not below r/(2 lam) = {r / (2 * lam)}")
    if e in ("whole_space_sandwich", "dirichlet_sandwich", "negative_control", "meyer_domination"):
        for i, row in enumerate(cfg.grid):
            if row and not row[0] > 0:
                out.append(f"grid[{i}]: t must be positive")
    return out


def validate_config(document):
    """Parse and validate a configuration (dict or JSON text); raises ConfigError listing every problem."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(document, dict):
        raise ConfigError(["configuration must be a JSON object"])
    problems = []
    known = {"name", "experiment", "expected", "kernel", "domain", "grid", "n_paths", "eps_cut", "seed",
             "tolerances", "options", "description"}
    extra = set(document) - known
    if extra:
        problems.append(f"unknown fields {sorted(extra)}")
    for key in ("experiment", "kernel", "domain", "grid", "n_paths", "eps_cut"):
        if key not in document:
            problems.append(f"missing field {key!r}")
    exp = document.get("experiment")
    if exp is not None and exp not in EXPERIMENTS:
        problems.append(f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    kernel = _kernel(document.get("kernel"), problems) if "kernel" in document else None
    domain = _domain(document.get("domain"), problems) if "domain" in document else None
    d = kernel.d if kernel is not None else (domain.d if domain is not None else 1)
    grid = _grid(document.get("grid"), exp, d, problems) if "grid" in document else ()
    n_paths = document.get("n_paths", MIN_PATHS)
    if not isinstance(n_paths, int) or isinstance(n_paths, bool):
        problems.append("n_paths must be an integer")
        n_paths = MIN_PATHS
    eps = document.get("eps_cut", 0.01)
    if not isinstance(eps, (int, float)):
        problems.append("eps_cut must be a number")
        eps = 0.01
    seed = document.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append("seed must be an integer")
        seed = 0
    tol = document.get("tolerances", {})
    if not isinstance(tol, dict) or not all(isinstance(v, (int, float)) for v in tol.values()):
        problems.append("tolerances must map names to numbers")
        tol = {}
    opts = document.get("options", {})
    if not isinstance(opts, dict):
        problems.append("options must be an object")
        opts = {}
    problems.extend(_scalar_problems(n_paths, eps, seed))
    if problems or kernel is None or domain is None:
        raise ConfigError(problems)
    cfg = ExperimentConfig(
        experiment=exp, kernel=kernel, domain=domain, grid=grid, n_paths=n_paths, eps_cut=float(eps),
        seed=seed, tolerances=dict(tol), options=dict(opts), name=str(document.get("name", exp)),
        expected=document.get("expected", "pass"),
    )
    problems = semantic_problems(cfg, scalars=False)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path):
    with open(path) as fh:
        return validate_config(fh.read())
