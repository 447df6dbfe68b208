"""Monte-Carlo experiment harness: config, trials, SE tables, comparison.

Tables are plain CSV preceded by ``#`` header lines, which carry the
config hash and a full parameter echo. Floats are written with 17
significant digits so a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import recovery
from .model import (BgPrior, NoiseModel, QuantizerSpec, SelectionMask, as_rng,
                    forward_measure, quantize, sample_signal)
from .state_evolution import SeDivergence, se_trajectory
from .transform import DftPlan, is_power_of_two

UNQUANTIZED = "unquantized"


class ConfigError(ValueError):
    pass


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 4096
    alpha: float = 0.7
    snr_db: float = 50.0
    bits: int | str = 3
    delta: float | None = None
    rho: float = 0.4
    varsigma_x: float | None = None
    trials: int = 200
    t_max: int = 50
    tol: float = 1e-8
    damping: float = 1.0
    base_seed: int = 0

    def __post_init__(self):
        errs = []
        if not (isinstance(self.n, int) and is_power_of_two(self.n)):
            errs.append(f"n: must be a power of two, got {self.n!r}")
        if not (0.0 < self.alpha <= 1.0):
            errs.append(f"alpha: must be in (0, 1], got {self.alpha!r}")
        if not math.isfinite(self.snr_db):
            errs.append(f"snr_db: must be finite, got {self.snr_db!r}")
        if self.bits != UNQUANTIZED and not (isinstance(self.bits, int) and 1 <= self.bits <= 24):
            errs.append(f"bits: must be an integer in [1, 24] or '{UNQUANTIZED}', got {self.bits!r}")
        if self.delta is not None and not (self.delta > 0 and math.isfinite(self.delta)):
            errs.append(f"delta: must be positive, got {self.delta!r}")
        if not (0.0 < self.rho <= 1.0):
            errs.append(f"rho: must be in (0, 1], got {self.rho!r}")
        if self.varsigma_x is not None and not (self.varsigma_x > 0 and math.isfinite(self.varsigma_x)):
            errs.append(f"varsigma_x: must be positive, got {self.varsigma_x!r}")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            errs.append(f"trials: must be >= 1, got {self.trials!r}")
        if not (isinstance(self.t_max, int) and self.t_max >= 1):
            errs.append(f"t_max: must be >= 1, got {self.t_max!r}")
        if not self.tol >= 0:
            errs.append(f"tol: must be >= 0, got {self.tol!r}")
        if not (0.0 < self.damping <= 1.0):
            errs.append(f"damping: must be in (0, 1], got {self.damping!r}")
        if not (isinstance(self.base_seed, int) and self.base_seed >= 0):
            errs.append(f"base_seed: must be a non-negative integer, got {self.base_seed!r}")
        if errs:
            raise ConfigError("; ".join(errs))
        if self.bits != UNQUANTIZED and self.delta is None:
            object.__setattr__(self, "delta", 2.0 ** (1 - self.bits))
        if self.varsigma_x is None:
            object.__setattr__(self, "varsigma_x", 1.0 / self.rho)
        if self.m < 1:
            raise ConfigError(f"alpha: round(alpha*n) must be >= 1, got m={self.m}")

    @property
    def m(self) -> int:
        return int(round(self.alpha * self.n))

    @property
    def alpha_eff(self) -> float:
        return self.m / self.n

    @property
    def prior(self) -> BgPrior:
        return BgPrior(self.rho, self.varsigma_x)

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel.from_snr_db(self.snr_db)

    @property
    def quantizer(self) -> QuantizerSpec | None:
        if self.bits == UNQUANTIZED:
            return None
        return QuantizerSpec(self.bits, self.delta)

    @property
    def options(self) -> recovery.RecoveryOptions:
        return recovery.RecoveryOptions(self.t_max, self.damping, self.tol)

    def echo(self) -> dict[str, str]:
        return {f.name: _fmt(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def model_hash(self) -> str:
        """Hash of the fields that define the measurement model.

        Trials, seed and iteration controls are excluded so that a
        simulation and an SE run of the same model carry the same hash.
        """
        keys = ("n", "alpha", "snr_db", "bits", "delta", "rho", "varsigma_x")
        blob = "\n".join(f"{k}={_fmt(getattr(self, k))}" for k in keys)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in ("n", "trials", "t_max", "base_seed"):
            f = float(raw)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if key == "bits":
            return UNQUANTIZED if raw.lower() == UNQUANTIZED else int(raw)
        if key in ("delta", "varsigma_x") and raw.lower() in ("none", ""):
            return None
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a key=value file (optional) and apply overrides on top.

    Override values may be strings (CLI) or already-typed values.
    """
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), str(path)))
    for key, val in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _parse_value(key, val) if isinstance(val, str) else val
    return ExperimentConfig(**values)


# ---------------------------------------------------------------- simulation

@dataclass
class TrialOutcome:
    trial: int
    mse: np.ndarray
    stop_reason: str


def run_trial(cfg: ExperimentConfig, trial: int, plan: DftPlan | None = None) -> TrialOutcome:
    plan = plan or DftPlan(cfg.n)
    rng = as_rng(cfg.base_seed + trial)
    mask = SelectionMask.random(cfg.n, cfg.m, rng)
    x = sample_signal(cfg.prior, cfg.n, rng)
    y = forward_measure(x, mask, cfg.noise, plan, rng)
    spec = cfg.quantizer
    meas = quantize(y, spec, mask)
    res = recovery.run(meas, mask, spec, cfg.noise, cfg.prior, plan, cfg.options, truth=x)
    return TrialOutcome(trial, res.mse_per_iter, res.stop_reason.value)


def _trial_batch(args):
    cfg, trials = args
    plan = DftPlan(cfg.n)
    return [run_trial(cfg, t, plan) for t in trials]


def run_simulation(cfg: ExperimentConfig, workers: int = 1) -> list[TrialOutcome]:
    """All trials, ordered by trial index regardless of ``workers``."""
    idx = list(range(cfg.trials))
    if workers <= 1:
        out = _trial_batch((cfg, idx))
    else:
        chunks = [idx[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = [o for part in pool.map(_trial_batch, [(cfg, c) for c in chunks]) for o in part]
    return sorted(out, key=lambda o: o.trial)


def sim_rows(outcomes: list[TrialOutcome]) -> list[tuple[int, int, float]]:
    return [(o.trial, t + 1, float(val)) for o in outcomes for t, val in enumerate(o.mse)]


def aggregate(rows, t_max: int | None = None) -> dict[int, tuple[float, float]]:
    """Mean and standard error of MSE per iteration.

    A trial that stopped early (converged) keeps its last value for later
    iterations, since its estimate no longer changes.
    """
    per_trial: dict[int, list[tuple[int, float]]] = {}
    for trial, it, val in rows:
        per_trial.setdefault(int(trial), []).append((int(it), float(val)))
    if not per_trial:
        raise TableError("simulation table is empty")
    length = max(it for seq in per_trial.values() for it, _ in seq)
    if t_max is not None:
        length = min(length, t_max)
    mat = np.empty((len(per_trial), length))
    for r, trial in enumerate(sorted(per_trial)):
        seq = [v for _, v in sorted(per_trial[trial])]
        seq = (seq + [seq[-1]] * length)[:length]
        mat[r] = seq
    mean = mat.mean(axis=0)
    se = mat.std(axis=0, ddof=1) / np.sqrt(mat.shape[0]) if mat.shape[0] > 1 else np.zeros(length)
    return {t + 1: (float(mean[t]), float(se[t])) for t in range(length)}


def run_se(cfg: ExperimentConfig) -> tuple[list[tuple[int, float, float, float]], bool]:
    """SE table rows (iter, v, eta, mse_pred) and whether the recursion diverged."""
    diverged = False
    try:
        traj = se_trajectory(cfg.alpha_eff, cfg.prior, cfg.noise.sigma2, cfg.quantizer,
                             cfg.t_max, cfg.tol)
    except SeDivergence as exc:
        traj, diverged = exc.partial, True
    rows = [(s.t, s.v, s.eta, s.mse_pred) for s in traj if s.t >= 1]
    return rows, diverged


# ---------------------------------------------------------------- CSV tables

SIM_COLUMNS = ("trial", "iter", "mse")
SE_COLUMNS = ("iter", "v", "eta", "mse_pred")
CMP_COLUMNS = ("t", "mse_sim_mean", "mse_sim_stderr", "mse_pred", "gap_db")


@dataclass
class Table:
    kind: str
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict[str, str]

    @property
    def config_hash(self) -> str | None:
        return self.meta.get("config_hash")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def format_table(table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# table={table.kind}\n")
    for k, v in table.meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_table(table: Table, path) -> None:
    Path(path).write_text(format_table(table))


_INT_COLUMNS = {"trial", "iter", "t", "pass"}


def parse_table(text: str) -> Table:
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    if not body:
        raise TableError("table has no header row")
    reader = csv.reader(body)
    columns = tuple(next(reader))
    rows = []
    for rec in reader:
        if len(rec) != len(columns):
            raise TableError(f"row has {len(rec)} cells, expected {len(columns)}")
        rows.append(tuple(int(c) if name in _INT_COLUMNS else float(c)
                          for name, c in zip(columns, rec)))
    kind = meta.pop("table", "unknown")
    return Table(kind, columns, rows, meta)


def read_table(path) -> Table:
    return parse_table(Path(path).read_text())


def _meta(cfg: ExperimentConfig, **extra) -> dict[str, str]:
    meta = {"config_hash": cfg.model_hash()}
    meta.update({k: str(v) for k, v in extra.items()})
    meta.update({f"param.{k}": v for k, v in cfg.echo().items()})
    return meta


def simulation_table(cfg: ExperimentConfig, outcomes: list[TrialOutcome]) -> Table:
    diverged = [o.trial for o in outcomes if o.stop_reason == recovery.StopReason.DIVERGED.value]
    extra = {"diverged_trials": ",".join(map(str, diverged)) or "none"}
    return Table("sim", SIM_COLUMNS, sim_rows(outcomes), _meta(cfg, **extra))


def se_table(cfg: ExperimentConfig) -> tuple[Table, bool]:
    rows, diverged = run_se(cfg)
    return Table("se", SE_COLUMNS, rows, _meta(cfg, diverged=int(diverged))), diverged


# ---------------------------------------------------------------- comparison

@dataclass
class ComparisonReport:
    rows: list[tuple[int, float, float, float, float]]
    max_gap_db: float
    converged_fraction: float
    t_check: int
    tol_db: float

    @property
    def passed(self) -> bool:
        return self.max_gap_db <= self.tol_db

    def table(self, config_hash: str | None = None) -> Table:
        meta = {"config_hash": config_hash or "none", "t_check": str(self.t_check),
                "tol_db": _fmt(float(self.tol_db)), "max_gap_db": _fmt(self.max_gap_db),
                "converged_fraction": _fmt(self.converged_fraction),
                "pass": str(int(self.passed))}
        return Table("compare", CMP_COLUMNS, self.rows, meta)


def compare(sim: Table, se: Table, t_check: int, tol_db: float = 0.5) -> ComparisonReport:
    """Join a simulation table and an SE table on the iteration index."""
    if sim.columns != SIM_COLUMNS or se.columns != SE_COLUMNS:
        raise TableError("expected a sim table and an se table")
    if sim.config_hash is None or sim.config_hash != se.config_hash:
        raise TableError(f"config hash mismatch: sim={sim.config_hash} se={se.config_hash}")
    if t_check < 1:
        raise TableError(f"t_check must be >= 1, got {t_check}")
    agg = aggregate(sim.rows)
    pred = {int(r[0]): float(r[3]) for r in se.rows}
    common = sorted(set(agg) & set(pred))
    if not common:
        raise TableError("no overlapping iterations between the tables")
    rows = []
    for t in common:
        m, s = agg[t]
        rows.append((t, m, s, pred[t], 10.0 * math.log10(m / pred[t])))
    gaps = [abs(r[4]) for r in rows if r[0] <= t_check]
    if not gaps:
        raise TableError(f"no overlapping iterations with t <= {t_check}")
    # a trial converged if it stopped before the last simulated iteration
    lengths: dict[int, int] = {}
    for trial, it, _ in sim.rows:
        lengths[trial] = max(lengths.get(trial, 0), int(it))
    t_max = int(float(sim.meta.get("param.t_max", max(lengths.values()))))
    flagged = {int(k) for k in sim.meta.get("diverged_trials", "none").split(",") if k.isdigit()}
    conv = sum(1 for k, n_it in lengths.items() if n_it < t_max and k not in flagged) / len(lengths)
    return ComparisonReport(rows, max(gaps), conv, t_check, tol_db)


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 8))
