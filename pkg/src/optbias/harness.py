"""Monte-Carlo experiment runner.

One population model is calibrated per run. Each trial simulates a single
panel at the largest dimension, slices it to every requested ``p``, fits the
selected estimators and records one metrics row per ``(p, estimator)``.
Rows are merged in ``(p, estimator, trial)`` order, so the output bytes do not
depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.linalg import LinAlgError

from . import __version__
from .bias import opt_bias, phi_estimator
from .correction import ESTIMATORS, assemble_model, corrected_basis
from .errors import ConfigError, OptBiasError
from .optimize import QuadProblem, evaluate, true_min_variance
from .simmodel import PopulationModel, TruthSlice, calibrate, simulate_panel, truth_slice
from .spectra import make_centering, sample_spectrum

logger = logging.getLogger(__name__)

WORKERS_ENV = "OPTBIAS_WORKERS"
MAX_SKIP_FRACTION = 0.01

METRICS = (
    "v_p", "d_hat", "q_hat", "q_realized", "q_true", "abs_bias", "abs_phi",
    "projection_err", "diag_norm", "sigma_min", "scaled_bias_sq",
)
TRIAL_COLUMNS = ("p", "estimator", "trial") + METRICS


@dataclass(frozen=True)
class ExperimentConfig:
    p_list: tuple[int, ...] = (500, 2000, 8000)
    n: int = 120
    q: int = 7
    trials: int = 200
    seed: int = 20240101
    centering: bool = True
    kappa_mode: str = "mp"
    estimators: tuple[str, ...] = ESTIMATORS
    c0: float = 1.0
    c1: float = 1.0
    output_dir: str = "results"
    p_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        self.validate()

    @property
    def calibrated_p_max(self) -> int:
        return self.p_max if self.p_max is not None else max(self.p_list)

    def validate(self) -> None:
        if not self.p_list:
            raise ConfigError("p_list is empty")
        if list(self.p_list) != sorted(set(self.p_list)):
            raise ConfigError("p_list must be strictly ascending")
        if self.p_list[0] < 1:
            raise ConfigError("dimensions must be positive")
        if self.p_max is not None and self.p_list[-1] > self.p_max:
            raise ConfigError(f"p={self.p_list[-1]} exceeds p_max={self.p_max}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 1 <= self.q < self.n:
            raise ConfigError("need 1 <= q < n")
        if self.q != 7:
            raise ConfigError("the simulated population model has exactly 7 factors")
        if self.kappa_mode not in ("plain", "mp"):
            raise ConfigError(f"unknown kappa mode {self.kappa_mode!r}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"estimators must be a nonempty subset of {ESTIMATORS}")
        if self.c1 == 0:
            raise ConfigError("c1 must be nonzero")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ExperimentConfig":
        """Build from string values (config file lines or CLI overrides)."""
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key == "out":
                key = "output_dir"
            raw = str(raw).strip()
            if key in ("p_list", "estimators"):
                items = [x for x in raw.replace(",", " ").split() if x]
                kwargs[key] = tuple(int(x) for x in items) if key == "p_list" else tuple(items)
            elif key in ("n", "q", "trials", "seed", "p_max"):
                kwargs[key] = int(raw)
            elif key in ("c0", "c1"):
                kwargs[key] = float(raw)
            elif key == "centering":
                if raw.lower() not in ("on", "off", "true", "false", "1", "0"):
                    raise ConfigError(f"centering must be on/off, got {raw!r}")
                kwargs[key] = raw.lower() in ("on", "true", "1")
            elif key in ("kappa_mode", "output_dir"):
                kwargs[key] = raw
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class _Context:
    config: ExperimentConfig
    truths: dict[int, TruthSlice]
    sigma_min: dict[int, float] = field(default_factory=dict)


_CONTEXT: _Context | None = None


def _build_context(config: ExperimentConfig, model: PopulationModel | None = None) -> _Context:
    model = model if model is not None else calibrate(config.calibrated_p_max, config.seed)
    truths = {p: truth_slice(model, p) for p in config.p_list}
    ctx = _Context(config, truths)
    for p, truth in truths.items():
        ctx.sigma_min[p] = float(np.sqrt(true_min_variance(truth.covariance, np.ones(p))))
        truth.scrB  # warm the cached basis once per worker
    return ctx


def _init_worker(config: ExperimentConfig) -> None:
    global _CONTEXT
    _CONTEXT = _build_context(config)


def trial_rows(ctx: _Context, trial: int) -> list[dict]:
    """All metric rows of one trial, ordered by ``(p, estimator)``."""
    cfg = ctx.config
    largest = ctx.truths[cfg.p_list[-1]]
    panel = simulate_panel(largest, cfg.n, cfg.seed, trial)
    J = make_centering(cfg.n, center=cfg.centering)
    rows = []
    for p in cfg.p_list:
        truth = ctx.truths[p]
        zeta = np.ones(p)
        spec = sample_spectrum(panel.head(p), J, cfg.q, cfg.kappa_mode)
        phi_norm = phi_estimator(spec, zeta).norm
        for label in ESTIMATORS:
            if label not in cfg.estimators:
                continue
            basis = corrected_basis(spec, zeta, label)
            model = assemble_model(basis, spec)
            report = evaluate(QuadProblem(cfg.c0, cfg.c1, zeta, model), truth.covariance)
            bias = opt_bias(truth.scrB, basis.vectors, zeta, is_basis=True).norm
            proj = basis.vectors.T @ truth.scrB
            rows.append({
                "p": p, "estimator": label, "trial": trial,
                "v_p": report.volatility,
                "d_hat": report.d_hat,
                "q_hat": report.q_hat,
                "q_realized": report.q_realized,
                "q_true": report.q_true,
                "abs_bias": bias,
                "abs_phi": phi_norm,
                "projection_err": float(np.linalg.norm(proj @ proj.T - np.diag(basis.phi_sq), 2)),
                "diag_norm": float(np.max(basis.phi_sq)),
                "sigma_min": ctx.sigma_min[p],
                "scaled_bias_sq": p * bias ** 2,
            })
    return rows


def _run_chunk(trials: list[int]) -> tuple[list[dict], list[tuple[int, str]]]:
    assert _CONTEXT is not None
    return _collect(_CONTEXT, trials)


def _collect(ctx: _Context, trials) -> tuple[list[dict], list[tuple[int, str]]]:
    rows, skipped = [], []
    for t in trials:
        try:
            rows.extend(trial_rows(ctx, t))
        except (OptBiasError, LinAlgError) as exc:
            logger.warning("trial %d skipped: %s", t, exc)
            skipped.append((t, f"{type(exc).__name__}: {exc}"))
    return rows, skipped


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def simulate_trials(config: ExperimentConfig, workers: int | None = None,
                    model: PopulationModel | None = None) -> tuple[list[dict], list[tuple[int, str]]]:
    """Run every trial and return rows sorted by ``(p, estimator, trial)`` plus skips."""
    workers = worker_count() if workers is None else workers
    trials = list(range(config.trials))
    if workers <= 1 or config.trials == 1 or model is not None:
        rows, skipped = _collect(_build_context(config, model), trials)
    else:
        chunks = [trials[i::workers] for i in range(workers)]
        rows, skipped = [], []
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config,)) as pool:
            for chunk_rows, chunk_skipped in pool.map(_run_chunk, chunks):
                rows.extend(chunk_rows)
                skipped.extend(chunk_skipped)
    order = {label: i for i, label in enumerate(ESTIMATORS)}
    rows.sort(key=lambda r: (r["p"], order[r["estimator"]], r["trial"]))
    skipped.sort()
    return rows, skipped


# ---------------------------------------------------------------- aggregation

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def summarize(rows: list[dict], p_list, metrics=METRICS) -> dict:
    """``{(p, estimator): {metric: (mean, sd, se, count)}}``."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["p"], row["estimator"]), []).append(row)
    out = {}
    for key, members in groups.items():
        stats = {}
        for m in metrics:
            x = np.array([r[m] for r in members], dtype=float)
            sd = float(x.std(ddof=1)) if x.size > 1 else float("nan")
            stats[m] = (float(x.mean()), sd, sd / np.sqrt(x.size), x.size)
        out[key] = stats
    return out


# (column name, metric, estimator or None for estimator-free, statistic)
TABLES = {
    "table_vol": [
        ("sigma_min", "sigma_min", None, "mean"),
        ("vol_pca", "v_p", "pca", "mean"),
        ("vol_flat", "v_p", "flat", "mean"),
        ("vol_sharp", "v_p", "sharp", "mean"),
        ("sd_vol_pca", "v_p", "pca", "sd"),
        ("sd_vol_flat", "v_p", "flat", "sd"),
        ("sd_vol_sharp", "v_p", "sharp", "sd"),
        ("se_vol_pca", "v_p", "pca", "se"),
        ("se_vol_flat", "v_p", "flat", "se"),
        ("se_vol_sharp", "v_p", "sharp", "se"),
    ],
    "table_discrep": [
        ("max_q", "q_true", None, "mean"),
        ("q_realized_pca", "q_realized", "pca", "mean"),
        ("d_pca", "d_hat", "pca", "mean"),
        ("q_realized_sharp", "q_realized", "sharp", "mean"),
        ("d_sharp", "d_hat", "sharp", "mean"),
        ("sd_d_pca", "d_hat", "pca", "sd"),
        ("sd_d_sharp", "d_hat", "sharp", "sd"),
        ("se_d_pca", "d_hat", "pca", "se"),
        ("se_d_sharp", "d_hat", "sharp", "se"),
    ],
    "table_optbias": [
        ("abs_phi", "abs_phi", None, "mean"),
        ("abs_bias_pca", "abs_bias", "pca", "mean"),
        ("abs_bias_sharp", "abs_bias", "sharp", "mean"),
        ("scaled_bias_sq_pca", "scaled_bias_sq", "pca", "mean"),
        ("scaled_bias_sq_sharp", "scaled_bias_sq", "sharp", "mean"),
    ],
    "table_gps": [
        ("max_q", "q_true", None, "mean"),
        ("q_realized_flat", "q_realized", "flat", "mean"),
        ("d_flat", "d_hat", "flat", "mean"),
        ("abs_bias_flat", "abs_bias", "flat", "mean"),
        ("scaled_bias_sq_flat", "scaled_bias_sq", "flat", "mean"),
        ("sd_d_flat", "d_hat", "flat", "sd"),
        ("se_d_flat", "d_hat", "flat", "se"),
    ],
    "table_hb": [
        ("projection_err_sharp", "projection_err", "sharp", "mean"),
        ("diag_norm_sharp", "diag_norm", "sharp", "mean"),
        ("projection_err_pca", "projection_err", "pca", "mean"),
        ("diag_norm_pca", "diag_norm", "pca", "mean"),
    ],
}
_STAT_INDEX = {"mean": 0, "sd": 1, "se": 2}


def build_tables(summary: dict, p_list, estimators) -> dict[str, list[dict]]:
    tables = {}
    for name, columns in TABLES.items():
        rows = []
        for p in p_list:
            row = {"p": p}
            for col, metric, est, stat in columns:
                if est is None:
                    # estimator-free metrics are identical across estimators
                    est = next(e for e in ESTIMATORS if e in estimators)
                stats = summary.get((p, est))
                row[col] = stats[metric][_STAT_INDEX[stat]] if stats else float("nan")
            rows.append(row)
        tables[name] = rows
    return tables


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]
    skipped: list[tuple[int, str]]
    summary: dict
    tables: dict[str, list[dict]]
    paths: dict[str, Path]

    def mean(self, metric: str, p: int, estimator: str) -> float:
        return self.summary[(p, estimator)][metric][0]


class TooManySkipped(OptBiasError, RuntimeError):
    pass


def run_experiment(config: ExperimentConfig, workers: int | None = None, figures: bool = True,
                   model: PopulationModel | None = None) -> ExperimentResult:
    """Run the study and write trials, tables, figures and a manifest to ``output_dir``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, skipped = simulate_trials(config, workers, model)
    population = model if model is not None else calibrate(config.calibrated_p_max, config.seed)
    summary = summarize(rows, config.p_list)
    tables = build_tables(summary, config.p_list, config.estimators)

    paths = {"population": out / "population.json", "trials": out / "trials.csv"}
    population.save(paths["population"])
    write_csv(paths["trials"], TRIAL_COLUMNS, rows)
    for name, table_rows in tables.items():
        paths[name] = out / f"{name}.csv"
        write_csv(paths[name], ["p"] + [c[0] for c in TABLES[name]], table_rows)
    if figures:
        from .plotting import discrepancy_figure, volatility_figure

        paths["fig_vol"] = volatility_figure(summary, config, out / "fig_vol.svg")
        paths["fig_discrep"] = discrepancy_figure(summary, config, out / "fig_discrep.svg")

    manifest = {
        "config": {**asdict(config), "p_list": list(config.p_list), "estimators": list(config.estimators)},
        "p_max": config.calibrated_p_max,
        "seed": config.seed,
        "version": __version__,
        "trials_run": config.trials,
        "trials_skipped": len(skipped),
        "skipped": [{"trial": t, "reason": why} for t, why in skipped],
        "error_bars": "figures show mean +/- 2 standard errors of the mean; tables carry sd and se columns",
    }
    paths["run_manifest"] = out / "run_manifest.json"
    paths["run_manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    result = ExperimentResult(config, rows, skipped, summary, tables, paths)
    if len(skipped) > MAX_SKIP_FRACTION * config.trials:
        raise TooManySkipped(f"{len(skipped)} of {config.trials} trials failed numerically")
    return result
