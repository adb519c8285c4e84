"""Comparison estimators for the regression problem: Tukey bi-square
M-estimation with a MAD scale, the t-noise maximum likelihood fixed point,
the least-squares / Gaussian MLE path, and the median-location initializer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .core import as_dataset
from .regression import RegressionModel, realify, unrealify

# Two MAD scalings are exposed: the default divides by erfinv(3/4), the
# second by the normal quartile (the conventional Gaussian-consistent 1.4826).
GAMMA_ERFINV = 1.0 / special.erfinv(0.75)
GAMMA_NORMAL_QUARTILE = 1.0 / (np.sqrt(2.0) * special.erfinv(0.5))


@dataclass
class FixedPointConfig:
    max_iter: int = 100
    rel_tol: float = 1e-6
    init: Optional[np.ndarray] = None   # theta = [Re alpha; Im alpha]

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


@dataclass
class BaselineResult:
    theta: np.ndarray
    converged: bool
    n_iter: int
    scale: Optional[float] = None
    objective_path: Optional[np.ndarray] = None  # diagnostic, one value per iterate


def median_location(data) -> np.ndarray:
    """Marginal median of the real and imaginary parts, per coordinate."""
    x = as_dataset(data)
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    return np.median(x.real, axis=0) + 1j * np.median(x.imag, axis=0)


def _mad(values: np.ndarray) -> np.ndarray:
    med = np.median(values, axis=0)
    return np.median(np.abs(values - med), axis=0)


def mad_scale(data, gamma: float = GAMMA_ERFINV) -> float:
    """Robust scale sqrt((1/p) sum_k gamma^2 (MAD(Re x_k)^2 + MAD(Im x_k)^2)).

    ``gamma`` defaults to 1/erfinv(3/4); pass GAMMA_NORMAL_QUARTILE for the
    conventional 1.4826... normal-consistency constant.
    """
    x = as_dataset(data)
    if x.shape[0] < 2:
        raise ValueError("scale estimation needs at least 2 samples")
    per_coord = gamma ** 2 * (_mad(x.real) ** 2 + _mad(x.imag) ** 2)
    if np.all(per_coord == 0.0):
        raise ValueError("degenerate scale")
    return float(np.sqrt(per_coord.mean()))


def _fixed_point(x: np.ndarray, model: RegressionModel,
                 weight_fn: Callable[[np.ndarray], np.ndarray],
                 config: FixedPointConfig,
                 objective_fn: Optional[Callable[[np.ndarray], float]] = None
                 ) -> BaselineResult:
    """alpha <- (A^H A)^-1 A^H (sum_n w_n x_n / sum_n w_n) until relative
    change drops below tolerance; returns the last iterate flagged when the
    budget runs out. ``objective_fn(residual norms)`` is evaluated at every
    iterate as a monotonicity diagnostic (recorded, never enforced)."""
    a = model.a_matrix
    if config.init is not None:
        alpha = unrealify(config.init)
    else:
        alpha = np.linalg.solve(model.aha, a.conj().T @ median_location(x))
    converged = False
    it = 0
    path = []
    for it in range(1, config.max_iter + 1):
        resid = np.linalg.norm(x - (a @ alpha)[None, :], axis=1)
        if objective_fn is not None:
            path.append(objective_fn(resid))
        w = weight_fn(resid)
        total = w.sum()
        if total == 0.0:
            raise ValueError("all samples rejected")
        alpha_new = np.linalg.solve(model.aha, a.conj().T @ ((w @ x) / total))
        denom = np.linalg.norm(alpha)
        step = np.linalg.norm(alpha_new - alpha)
        alpha = alpha_new
        if denom > 0 and step / denom < config.rel_tol:
            converged = True
            break
        if denom == 0.0 and step == 0.0:
            converged = True
            break
    return BaselineResult(theta=realify(alpha), converged=converged, n_iter=it,
                          objective_path=np.asarray(path) if path else None)


def tukey_weights(r: np.ndarray, c: float) -> np.ndarray:
    """Bi-square weights (1 - (r/c)^2)^2 on r <= c, zero beyond the cutoff."""
    r = np.asarray(r, dtype=float)
    inside = r <= c
    w = np.zeros_like(r)
    w[inside] = (1.0 - (r[inside] / c) ** 2) ** 2
    return w


def tukey_loss(r: np.ndarray, c: float) -> np.ndarray:
    """Bi-square loss: 1 - (1 - (r/c)^2)^3 inside the cutoff, 1 beyond."""
    r = np.asarray(r, dtype=float)
    out = np.ones_like(r)
    inside = r <= c
    out[inside] = 1.0 - (1.0 - (r[inside] / c) ** 2) ** 3
    return out


def tukey_m_estimator(data, model: RegressionModel, c: float,
                      config: Optional[FixedPointConfig] = None,
                      gamma: float = GAMMA_ERFINV) -> BaselineResult:
    """Tukey bi-square fixed point with residuals normalized by the MAD scale."""
    x = as_dataset(data)
    config = config or FixedPointConfig()
    sigma = mad_scale(x, gamma=gamma)
    result = _fixed_point(
        x, model, lambda r: tukey_weights(r / sigma, c), config,
        objective_fn=lambda r: float(np.sum(tukey_loss(r / sigma, c))))
    result.scale = sigma
    return result


def mle_t_noise(data, model: RegressionModel, lam: float,
                sigma2_z: Optional[float] = None,
                config: Optional[FixedPointConfig] = None) -> BaselineResult:
    """Maximum likelihood under t-distributed noise via the same fixed point
    with weights (1 + 2 r^2 / (lam sigma2))^-1."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    x = as_dataset(data)
    config = config or FixedPointConfig()
    s2 = model.sigma2_z if sigma2_z is None else float(sigma2_z)
    if not s2 > 0:
        raise ValueError("sigma2_z must be positive")
    return _fixed_point(
        x, model, lambda r: 1.0 / (1.0 + 2.0 * r ** 2 / (lam * s2)), config,
        objective_fn=lambda r: float(
            np.sum(np.log1p(2.0 * r ** 2 / (lam * s2)))))


def least_squares(data, model: RegressionModel) -> BaselineResult:
    """Gaussian MLE: least squares on the sample mean (non-iterative)."""
    x = as_dataset(data)
    alpha = np.linalg.solve(model.aha, model.a_matrix.conj().T @ x.mean(axis=0))
    return BaselineResult(theta=realify(alpha), converged=True, n_iter=1)


def are_tukey(c: float, p: int) -> float:
    """Asymptotic relative efficiency of the bi-square estimator vs the
    Gaussian CRLB, as a function of the cutoff c.

    The normalized residual R of a unit-dispersion complex p-vector satisfies
    sqrt(2) R ~ chi with 2p degrees of freedom; the expectations below are
    evaluated by deterministic quadrature against that density on [0, c].
    """
    if not c > 0:
        raise ValueError("c must be positive")
    dist = stats.chi(2 * p, scale=2.0 ** -0.5)

    def expect(fn):
        val, _ = integrate.quad(lambda r: fn(r) * dist.pdf(r), 0.0, c,
                                limit=200)
        return val

    t_lin = expect(lambda r: (1.0 - (r / c) ** 2) * r ** 2)
    t_sq = expect(lambda r: (1.0 - (r / c) ** 2) ** 2)
    denom = expect(lambda r: (1.0 - (r / c) ** 2) ** 4 * r ** 2) / p
    return (2.0 * t_lin / (c ** 2 * p) - t_sq) ** 2 / denom


def tune_c_for_are(target: float, p: int, tol: float = 1e-4,
                   c_min: float = 0.5, c_max: float = 1e3) -> float:
    """Bisection on the monotone ARE curve to |ARE - target| < tol."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    lo, hi = c_min, c_min * 2.0
    if are_tukey(lo, p) > target:
        raise ValueError(f"target {target} unreachable above c_min={c_min}")
    while are_tukey(hi, p) < target:
        hi *= 2.0
        if hi > c_max:
            raise ValueError(f"target {target} unreachable below c_max={c_max}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = are_tukey(mid, p)
        if abs(val - target) < tol:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
