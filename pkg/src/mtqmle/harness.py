"""Config-driven Monte Carlo experiment runner.

An experiment sweeps one axis (weight width omega, SNR in dB, or sample
count), runs every configured estimator over ``trials`` independent datasets
per sweep value, and tabulates the empirical MSE next to the closed-form and
empirical asymptotic MSE traces of the reweighted estimator. Per-trial RNG
streams are keyed by (seed, sweep index * trials + trial), so results do not
depend on execution order.
"""

from __future__ import annotations

import functools
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import baselines, doa, regression, samplers


@functools.lru_cache(maxsize=8)
def _tuned_tukey_c(target: float, p: int) -> float:
    return baselines.tune_c_for_are(target, p)

_REG_ESTIMATORS = ("mt-gqmle", "gqmle", "tukey", "mle")
_DOA_ESTIMATORS = ("mt-gqmle", "gqmle")
_SWEEP_AXES = ("omega", "snr", "n")


@dataclass
class ExperimentConfig:
    application: str                       # 'regression' | 'doa'
    noise_kind: str                        # 'gaussian' | 't' | 'k'
    theta0: list
    estimators: list
    sweep_axis: str
    sweep_values: list
    trials: int
    seed: int
    n_samples: int = 1000
    snr_db: float = 0.0
    noise_lam: Optional[float] = None
    omega: object = "select"               # float, or 'select' for data-driven
    omega_grid: list = field(default_factory=lambda: [1.0, 30.0, 30])
    p: Optional[int] = None
    angles: list = field(default_factory=lambda: [np.pi / 3, np.pi / 6])
    sigma2_s: float = 1.0
    k_theta: int = 10_000
    output: Optional[str] = None
    tukey_are: float = 0.95

    def __post_init__(self):
        if self.application not in ("regression", "doa"):
            raise ValueError(f"unknown application {self.application!r}")
        allowed = _REG_ESTIMATORS if self.application == "regression" else _DOA_ESTIMATORS
        for name in self.estimators:
            if name not in allowed:
                raise ValueError(f"unknown estimator {name!r} for "
                                 f"{self.application}; allowed: {allowed}")
        if self.sweep_axis not in _SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {_SWEEP_AXES}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.p is None:
            self.p = 10 if self.application == "regression" else 4
        if not (isinstance(self.omega, (int, float)) or self.omega == "select"):
            raise ValueError("omega must be a number or 'select'")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ValueError(f"invalid config: {exc}") from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def omega_candidates(self) -> np.ndarray:
        lo, hi, count = self.omega_grid
        return np.linspace(float(lo), float(hi), int(count))


@dataclass
class ResultRow:
    sweep_value: float
    estimator: str
    empirical_mse: float
    asymptotic_mse_trace: float
    empirical_asymptotic_mse_trace: float
    failures: int
    trials: int
    mean_seconds: float


@dataclass
class ResultTable:
    rows: list

    def by(self, estimator: str) -> list:
        return [r for r in self.rows if r.estimator == estimator]


# --- per-application plumbing -------------------------------------------------

class _RegressionContext:
    def __init__(self, config: ExperimentConfig, snr_db: float):
        angles = config.angles
        probe = regression.build_steering_regressors(
            config.p, angles[0], angles[1],
            samplers.NoiseSpec("gaussian", 1.0, config.p))
        sigma2 = samplers.regression_sigma2_for_snr_db(probe.a_matrix, snr_db)
        self.noise = samplers.NoiseSpec(config.noise_kind, sigma2, config.p,
                                        lam=config.noise_lam)
        self.model = regression.build_steering_regressors(
            config.p, angles[0], angles[1], self.noise)
        self.theta0 = np.asarray(config.theta0, dtype=float)
        self.alpha0 = regression.unrealify(self.theta0)
        self._tukey_c = None
        self._config = config

    def synthesize(self, n: int, rng) -> np.ndarray:
        return samplers.synthesize_regression(self.model.a_matrix, self.alpha0,
                                              self.noise, n, rng)

    def tukey_c(self) -> float:
        if self._tukey_c is None:
            self._tukey_c = _tuned_tukey_c(self._config.tukey_are,
                                           self._config.p)
        return self._tukey_c

    def select_omega(self, x: np.ndarray, omegas: np.ndarray):
        traces = np.full(omegas.size, np.nan)
        for i, om in enumerate(omegas):
            try:
                traces[i] = np.trace(
                    regression.empirical_asymptotic_mse_regression(
                        x, self.model, float(om)))
            except ValueError:
                continue
        if np.all(np.isnan(traces)):
            raise ValueError("all omega candidates degenerate")
        return float(omegas[int(np.nanargmin(traces))]), traces

    def estimator(self, name: str, omega_policy) -> Callable:
        if name == "gqmle":
            return lambda x: regression.gqmle_regression(x, self.model)
        if name == "tukey":
            c = self.tukey_c()
            return lambda x: baselines.tukey_m_estimator(x, self.model, c).theta
        if name == "mle":
            if self.noise.kind == "gaussian":
                return lambda x: baselines.least_squares(x, self.model).theta
            if self.noise.kind == "t":
                return lambda x: baselines.mle_t_noise(
                    x, self.model, self.noise.lam).theta
            raise ValueError("omniscient MLE is unavailable for "
                             f"{self.noise.kind!r} regression noise")
        if name == "mt-gqmle":
            if omega_policy == "select":
                omegas = self._config.omega_candidates()

                def run(x):
                    omega_opt, _ = self.select_omega(x, omegas)
                    return regression.mt_gqmle_regression(x, self.model, omega_opt)

                return run
            return lambda x: regression.mt_gqmle_regression(
                x, self.model, float(omega_policy))
        raise ValueError(name)

    def omega_used(self, x0: np.ndarray, omega_policy):
        if omega_policy == "select":
            return self.select_omega(x0, self._config.omega_candidates())[0]
        return float(omega_policy)

    def asymptotic_trace(self, omega: float, n: int) -> float:
        return float(np.trace(regression.asymptotic_mse_regression(
            self.model, omega, n)))

    def empirical_asymptotic_trace(self, x0: np.ndarray, omega: float) -> float:
        return float(np.trace(regression.empirical_asymptotic_mse_regression(
            x0, self.model, omega)))


class _DOAContext:
    def __init__(self, config: ExperimentConfig, snr_db: float):
        sigma2 = samplers.doa_sigma2_for_snr_db(config.sigma2_s, snr_db)
        self.noise = samplers.NoiseSpec(config.noise_kind, sigma2, config.p,
                                        lam=config.noise_lam)
        self.model = doa.ULAModel(config.p, config.sigma2_s, self.noise)
        self.theta0 = np.asarray(config.theta0, dtype=float)
        self._config = config

    def synthesize(self, n: int, rng) -> np.ndarray:
        return samplers.synthesize_doa(self._config.p, float(self.theta0[0]),
                                       self._config.sigma2_s, self.noise, n, rng)

    def select_omega(self, x: np.ndarray, omegas: np.ndarray):
        traces = np.full(omegas.size, np.nan)
        thetas = np.full(omegas.size, np.nan)
        for i, om in enumerate(omegas):
            try:
                th = doa.estimate_doa(x, self.model, float(om),
                                      self._config.k_theta)
                traces[i] = doa.empirical_asymptotic_mse_doa(
                    x, self.model, th, float(om))
                thetas[i] = th
            except ValueError:
                continue
        if np.all(np.isnan(traces)):
            raise ValueError("all omega candidates degenerate")
        idx = int(np.nanargmin(traces))
        return float(omegas[idx]), float(thetas[idx]), traces

    def estimator(self, name: str, omega_policy) -> Callable:
        if name == "gqmle":
            return lambda x: np.array([doa.bartlett_doa(
                x, self.model, self._config.k_theta)])
        if name == "mt-gqmle":
            if omega_policy == "select":
                omegas = self._config.omega_candidates()

                def run(x):
                    _, theta, _ = self.select_omega(x, omegas)
                    return np.array([theta])

                return run
            return lambda x: np.array([doa.estimate_doa(
                x, self.model, float(omega_policy), self._config.k_theta)])
        raise ValueError(name)

    def omega_used(self, x0: np.ndarray, omega_policy):
        if omega_policy == "select":
            return self.select_omega(x0, self._config.omega_candidates())[0]
        return float(omega_policy)

    def asymptotic_trace(self, omega: float, n: int) -> float:
        return doa.asymptotic_mse_doa(self.model, float(self.theta0[0]),
                                      omega, n)

    def empirical_asymptotic_trace(self, x0: np.ndarray, omega: float) -> float:
        theta = doa.estimate_doa(x0, self.model, omega, self._config.k_theta)
        return doa.empirical_asymptotic_mse_doa(x0, self.model, theta, omega)


def _context(config: ExperimentConfig, snr_db: float):
    if config.application == "regression":
        return _RegressionContext(config, snr_db)
    return _DOAContext(config, snr_db)


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run the configured sweep; deterministic for a fixed config and seed.

    A trial where an estimator raises is recorded as a failure for that
    estimator and excluded from its average.
    """
    rows = []
    for sweep_idx, sweep_value in enumerate(config.sweep_values):
        snr_db = float(sweep_value) if config.sweep_axis == "snr" else config.snr_db
        n = int(sweep_value) if config.sweep_axis == "n" else config.n_samples
        omega_policy = (float(sweep_value) if config.sweep_axis == "omega"
                        else config.omega)
        ctx = _context(config, snr_db)
        runners = {name: ctx.estimator(name, omega_policy)
                   for name in config.estimators}
        sq_err = {name: [] for name in config.estimators}
        failures = {name: 0 for name in config.estimators}
        seconds = {name: 0.0 for name in config.estimators}
        calls = {name: 0 for name in config.estimators}
        x0 = None
        for trial in range(config.trials):
            rng = samplers.stream_rng(config.seed,
                                      sweep_idx * config.trials + trial)
            x = ctx.synthesize(n, rng)
            if trial == 0:
                x0 = x
            for name, run in runners.items():
                start = time.perf_counter()
                try:
                    theta = np.asarray(run(x), dtype=float).ravel()
                except ValueError:
                    failures[name] += 1
                    continue
                finally:
                    seconds[name] += time.perf_counter() - start
                    calls[name] += 1
                sq_err[name].append(float(np.sum((theta - ctx.theta0) ** 2)))

        mt_omega = None
        if "mt-gqmle" in config.estimators:
            try:
                mt_omega = ctx.omega_used(x0, omega_policy)
            except ValueError:
                mt_omega = None
        for name in config.estimators:
            asym = np.nan
            emp_asym = np.nan
            if name == "mt-gqmle" and mt_omega is not None:
                asym = ctx.asymptotic_trace(mt_omega, n)
                try:
                    emp_asym = ctx.empirical_asymptotic_trace(x0, mt_omega)
                except ValueError:
                    pass
            ok = len(sq_err[name])
            rows.append(ResultRow(
                sweep_value=float(sweep_value),
                estimator=name,
                empirical_mse=float(np.mean(sq_err[name])) if ok else np.nan,
                asymptotic_mse_trace=float(asym),
                empirical_asymptotic_mse_trace=float(emp_asym),
                failures=failures[name],
                trials=config.trials,
                mean_seconds=seconds[name] / max(calls[name], 1)))
    return ResultTable(rows=rows)


_CSV_COLUMNS = ("sweep_value", "estimator", "empirical_mse",
                "asymptotic_mse_trace", "empirical_asymptotic_mse_trace",
                "failures", "trials")


def emit_csv(table: ResultTable, path, include_timing: bool = False) -> None:
    """Write the table as UTF-8 CSV with 12 significant digits.

    Timing is excluded by default so that two runs with the same config and
    seed produce byte-identical files.
    """
    columns = _CSV_COLUMNS + (("mean_seconds",) if include_timing else ())
    lines = [",".join(columns)]
    for row in table.rows:
        cells = []
        for col in columns:
            val = getattr(row, col)
            if isinstance(val, str):
                cells.append(val)
            elif isinstance(val, int):
                cells.append(str(val))
            else:
                cells.append(f"{val:.12g}")
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> list:
    """Parse a file written by emit_csv back into dictionaries."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = {}
        for key, cell in zip(header, cells):
            if key == "estimator":
                rec[key] = cell
            elif key in ("failures", "trials"):
                rec[key] = int(cell)
            else:
                rec[key] = float(cell)
        out.append(rec)
    return out


def timing_report(config: ExperimentConfig) -> list:
    """Mean wall seconds per estimator call at the first sweep value.

    Comparative only; absolute numbers are machine dependent.
    """
    reduced = ExperimentConfig.from_dict({
        **{k: getattr(config, k) for k in config.__dataclass_fields__},
        "sweep_values": [config.sweep_values[0]],
    })
    table = run_experiment(reduced)
    return [(row.estimator, row.mean_seconds, row.trials - row.failures)
            for row in table.rows]
