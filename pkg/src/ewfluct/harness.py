"""Experiment configuration, orchestration and reporting.

Configs are TOML documents with flat sections (two levels).  Schema:

    [experiment]  name = "mean" | "scaling" | "qv" | "clt" | "corrpde"
                         | "stationary" | "msd"
    [covariance]  kind = "compressible" (amp, R) | "incompressible" (g0, zeta)
    [grid]        d, L, N                  (N a power of two)
    [dynamics]    kappa, T, dt             (+ burn_in, t_obs, sample_every,
                                            n, n_list where relevant)
    [statistics]  replicas, seed, alpha, test_fn, particles, paths,
                  record_count
    [output]      dir, workers
    [tolerances]  per-experiment pass thresholds (all optional)

Unknown keys are rejected in strict mode; constraint violations cite the
violated inequality.  Scale-dependent experiments (scaling, qv, clt) treat
the configured (N, dt) as the n = 1 resolution and use (N * n, dt / n^2) for
rescaling level n, which keeps both the transport-displacement ratio and the
points-per-correlation-length count independent of n.
"""

import hashlib
import time
from dataclasses import dataclass, field, fields as dc_fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import covariance as cov
from .errors import ConfigError, ConstraintViolation, MissingSection, UnknownKey
from .io import write_csv, write_json

EXPERIMENTS = ("mean", "scaling", "qv", "clt", "corrpde", "stationary", "msd")

# transport-displacement rule: sqrt(2 nu dt) * N / (2 L) <= DT_RULE * (1 + grace).
# The canonical configs sit exactly at the dx/2 displacement this encodes, so a
# small rounding grace keeps them valid while a 2x-too-large dt still fails.
DT_RULE = 0.25
DT_RULE_GRACE = 0.06

_REQUIRED = object()


@dataclass
class Tolerances:
    mean_stderr_mult: float = 3.0
    scaling_slope_tol: float = 0.15
    qv_rel_tol: float = 0.10
    clt_var_tol: float = 0.10
    clt_p_min: float = 0.01
    corr_rel_tol: float = 0.05
    corr_stderr_mult: float = 3.0
    stat_lag0_tol: float = 0.05
    stat_profile_tol: float = 0.02
    stat_veff_tol: float = 0.05
    msd_slope_tol: float = 0.05
    quenched_stderr_mult: float = 4.0
    mass_rel_tol: float = 1e-12


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    amp: float
    R: float
    g0: float
    zeta: float
    d: int
    L: float
    N: int
    kappa: float
    T: float
    dt: float
    burn_in: float
    t_obs: float
    sample_every: float
    n: int
    n_list: list
    replicas: int
    seed: int
    alpha: float
    test_fn: str
    particles: int
    paths: int
    record_count: int
    out_dir: str
    workers: int
    tolerances: Tolerances = field(default_factory=Tolerances)

    def covariance_spec(self):
        if self.kind == cov.COMPRESSIBLE:
            return cov.CovarianceSpec(kind=self.kind, d=self.d, amp=self.amp, R=self.R)
        return cov.CovarianceSpec(kind=self.kind, d=self.d, g0=self.g0, zeta=self.zeta)

    def grid(self):
        from .grid import TorusGrid

        return TorusGrid(self.d, self.L, self.N)

    def config_hash(self):
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()[:16]


_SCHEMA = {
    "experiment": {"name": (str, _REQUIRED)},
    "covariance": {
        "kind": (str, _REQUIRED),
        "amp": (float, 1.0),
        "R": (float, 1.0),
        "g0": (float, 1.0),
        "zeta": (float, 1.0),
    },
    "grid": {"d": (int, _REQUIRED), "L": (float, _REQUIRED), "N": (int, _REQUIRED)},
    "dynamics": {
        "kappa": (float, _REQUIRED),
        "T": (float, _REQUIRED),
        "dt": (float, _REQUIRED),
        "burn_in": (float, 20.0),
        "t_obs": (float, 36.0),
        "sample_every": (float, 0.5),
        "n": (int, 8),
        "n_list": (list, [2, 4, 8]),
    },
    "statistics": {
        "replicas": (int, 100),
        "seed": (int, 0),
        "alpha": (float, 0.75),
        "test_fn": (str, "cos2"),
        "particles": (int, 8000),
        "paths": (int, 5),
        "record_count": (int, 25),
    },
    "output": {"dir": (str, "ewfluct-out"), "workers": (int, 1)},
}

_FIELD_MAP = {
    ("experiment", "name"): "name",
    ("covariance", "kind"): "kind",
    ("covariance", "amp"): "amp",
    ("covariance", "R"): "R",
    ("covariance", "g0"): "g0",
    ("covariance", "zeta"): "zeta",
    ("grid", "d"): "d",
    ("grid", "L"): "L",
    ("grid", "N"): "N",
    ("dynamics", "kappa"): "kappa",
    ("dynamics", "T"): "T",
    ("dynamics", "dt"): "dt",
    ("dynamics", "burn_in"): "burn_in",
    ("dynamics", "t_obs"): "t_obs",
    ("dynamics", "sample_every"): "sample_every",
    ("dynamics", "n"): "n",
    ("dynamics", "n_list"): "n_list",
    ("statistics", "replicas"): "replicas",
    ("statistics", "seed"): "seed",
    ("statistics", "alpha"): "alpha",
    ("statistics", "test_fn"): "test_fn",
    ("statistics", "particles"): "particles",
    ("statistics", "paths"): "paths",
    ("statistics", "record_count"): "record_count",
    ("output", "dir"): "out_dir",
    ("output", "workers"): "workers",
}


def parse_config(text, strict=True, overrides=None):
    """Parse and validate a TOML experiment config.

    Raises UnknownKey / MissingSection / ConstraintViolation (each carrying
    every violation of its category); mixed violations raise ConfigError.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax error: {exc}"]) from None

    unknown, missing, constraint = [], [], []
    values = {}
    for section, keys in _SCHEMA.items():
        present = doc.get(section, {})
        if not isinstance(present, dict):
            constraint.append(f"section [{section}] must be a table")
            present = {}
        for key in present:
            if key not in keys:
                unknown.append(f"unknown key '{key}' in [{section}]")
        for key, (typ, default) in keys.items():
            if key in present:
                raw = present[key]
                if typ is float and isinstance(raw, int) and not isinstance(raw, bool):
                    raw = float(raw)
                if typ is int and isinstance(raw, float) and float(raw).is_integer():
                    raw = int(raw)
                if not isinstance(raw, typ) or isinstance(raw, bool):
                    constraint.append(
                        f"[{section}].{key} must be {typ.__name__}, got {raw!r}")
                    continue
                values[_FIELD_MAP[(section, key)]] = raw
            elif default is _REQUIRED:
                missing.append(f"missing required key [{section}].{key}")
            else:
                values[_FIELD_MAP[(section, key)]] = default
    for section in doc:
        if section == "tolerances":
            continue
        if section not in _SCHEMA:
            if strict:
                unknown.append(f"unknown section [{section}]")
    tol = Tolerances()
    tol_names = {f.name for f in dc_fields(Tolerances)}
    for key, raw in doc.get("tolerances", {}).items():
        if key not in tol_names:
            unknown.append(f"unknown key '{key}' in [tolerances]")
            continue
        setattr(tol, key, float(raw))

    if strict and unknown:
        if missing or constraint:
            raise ConfigError(unknown + missing + constraint)
        raise UnknownKey(unknown)
    if missing:
        if constraint:
            raise ConfigError(missing + constraint)
        raise MissingSection(missing)
    if constraint:
        raise ConstraintViolation(constraint)

    cfg = ExperimentConfig(tolerances=tol, **values)
    for key, val in (overrides or {}).items():
        setattr(cfg, key, val)
    violations = validate_constraints(cfg)
    if violations:
        raise ConstraintViolation(violations)
    return cfg


def validate_constraints(cfg):
    v = []
    if cfg.name not in EXPERIMENTS:
        v.append(f"experiment name must be one of {EXPERIMENTS}, got {cfg.name!r}")
    if cfg.kind not in (cov.COMPRESSIBLE, cov.INCOMPRESSIBLE):
        v.append(f"covariance kind must be compressible|incompressible, got {cfg.kind!r}")
    if cfg.N < 2 or (cfg.N & (cfg.N - 1)) != 0:
        v.append(f"N must be a power of two, got {cfg.N}")
    if cfg.L <= 0:
        v.append("L must be positive")
    if cfg.d < 1:
        v.append("d must be >= 1")
    if cfg.kind == cov.INCOMPRESSIBLE and cfg.d < 2:
        v.append("incompressible noise requires d >= 2 "
                 "(divergence-free fields in d = 1 are constant)")
    if cfg.kind == cov.INCOMPRESSIBLE and not (0.0 < cfg.zeta < 2.0):
        v.append(f"zeta must lie in (0, 2), got {cfg.zeta}")
    if cfg.kind == cov.COMPRESSIBLE and (cfg.amp < 0 or cfg.R <= 0):
        v.append("compressible model needs amp >= 0 and R > 0")
    if cfg.dt <= 0:
        v.append("dt must be positive")
    if cfg.T <= 0:
        v.append("T must be positive")
    if cfg.kappa <= 0:
        v.append("kappa must be positive")
    if cfg.replicas < 1:
        v.append("replicas must be >= 1")
    if cfg.seed < 0 or cfg.seed > 2**63 - 1:
        v.append("seed must fit in 64 bits")
    if cfg.name in ("scaling",) and len(cfg.n_list) < 3:
        v.append("scaling experiment needs at least 3 entries in n_list")
    # transport-displacement rule (checked at the n = 1 resolution; the
    # (N n, dt / n^2) scaling law leaves the ratio invariant)
    if cfg.dt > 0 and cfg.kind in (cov.COMPRESSIBLE, cov.INCOMPRESSIBLE):
        try:
            nu = cfg.covariance_spec().nu
        except Exception:
            nu = None
        if nu is not None and nu > 0:
            ratio = (2.0 * nu * cfg.dt) ** 0.5 * cfg.N / (2.0 * cfg.L)
            if ratio > DT_RULE * (1.0 + DT_RULE_GRACE):
                v.append(
                    "transport displacement rule violated: "
                    f"sqrt(2 nu dt) * xi_max = {ratio:.4f} > {DT_RULE} "
                    "(need sqrt(2 nu dt) |xi_max| <= 0.25, xi_max = N/(2L))"
                )
    return v


def serialize_config(cfg):
    """Resolved config as canonical TOML; parse(serialize(c)) == c."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        raise TypeError(f"cannot serialise {v!r}")

    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {fmt(getattr(cfg, _FIELD_MAP[(section, key)]))}")
        lines.append("")
    lines.append("[tolerances]")
    for f in dc_fields(Tolerances):
        lines.append(f"{f.name} = {fmt(getattr(cfg.tolerances, f.name))}")
    lines.append("")
    return "\n".join(lines)


@dataclass
class ExperimentReport:
    experiment: str
    config_hash: str
    seed: int
    metrics: dict
    passes: dict
    tables: dict = field(default_factory=dict)
    wallclock_s: float = 0.0

    @property
    def all_passed(self):
        return all(self.passes.values())


def run_experiment(cfg, out_dir=None):
    """Execute the named experiment, write artifacts, return the report.

    Reruns with identical (config, seed) produce byte-identical CSV files and
    report.json; wall-clock time goes to run_meta.json, which is excluded
    from the reproducibility contract.
    """
    import os

    from . import experiments

    t0 = time.time()
    metrics, passes, tables = experiments.dispatch(cfg)
    wall = time.time() - t0
    report = ExperimentReport(
        experiment=cfg.name,
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        metrics=metrics,
        passes=passes,
        tables=tables,
        wallclock_s=wall,
    )
    out = out_dir if out_dir is not None else cfg.out_dir
    if out:
        os.makedirs(out, exist_ok=True)
        for name, (columns, rows) in tables.items():
            write_csv(os.path.join(out, f"{name}.csv"), columns, rows)
        write_json(os.path.join(out, "report.json"), {
            "experiment": cfg.name,
            "config_hash": report.config_hash,
            "seed": cfg.seed,
            "config": serialize_config(cfg),
            "metrics": metrics,
            "passes": passes,
            "all_passed": report.all_passed,
        })
        write_json(os.path.join(out, "run_meta.json"), {"wallclock_s": wall})
    return report
