"""Parametric moment models, the quasi-likelihood objective, and its maximizer.

The estimator fits a parametric family of (possibly reweighted) means and
covariances to the empirical reweighted moments of the data by maximizing

    J_u(theta) = -D_LD[S_hat || S(theta)] - ||m_hat - m(theta)||^2_{S(theta)^-1},

which is <= 0 with equality iff the empirical moments match the model ones.
Maximization runs through a model-supplied closed-form solver when present,
otherwise over an exhaustive grid of the (compact, box-shaped) parameter
space; both paths are deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import inv_quad_form, log_det_divergence
from .transform import EmpiricalMTMoments, MTFunction, constant_mt_function, empirical_mt_moments


@dataclass(frozen=True)
class ParameterSpace:
    """Compact box with a fixed search grid (endpoints included)."""

    lower: np.ndarray
    upper: np.ndarray
    grid_sizes: np.ndarray

    def __init__(self, lower, upper, grid_sizes):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        grid_sizes = np.atleast_1d(np.asarray(grid_sizes, dtype=int))
        if grid_sizes.size == 1:
            grid_sizes = np.full(lower.size, int(grid_sizes[0]))
        if not (lower.size == upper.size == grid_sizes.size):
            raise ValueError("lower, upper and grid_sizes sizes differ")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(grid_sizes < 1):
            raise ValueError("grid sizes must be >= 1")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "grid_sizes", grid_sizes)

    @property
    def dim(self) -> int:
        return self.lower.size

    def axes(self) -> list:
        return [np.linspace(lo, hi, k) for lo, hi, k in
                zip(self.lower, self.upper, self.grid_sizes)]

    def grid_points(self) -> np.ndarray:
        """All grid points, shape (prod(grid_sizes), dim), lowest index first."""
        return np.array(list(itertools.product(*self.axes())))

    def contains(self, theta, atol: float = 1e-12) -> bool:
        theta = np.asarray(theta, dtype=float).ravel()
        return bool(np.all(theta >= self.lower - atol)
                    and np.all(theta <= self.upper + atol))

    def on_boundary(self, theta, rtol: float = 1e-9) -> bool:
        theta = np.asarray(theta, dtype=float).ravel()
        span = np.maximum(self.upper - self.lower, 1e-300)
        return bool(np.any((theta - self.lower) <= rtol * span)
                    or np.any((self.upper - theta) <= rtol * span))


@dataclass
class ParametricMomentModel:
    """Maps a real parameter vector to model mean/covariance and derivatives.

    mt_mean(theta) -> (p,), mt_cov(theta) -> (p, p) positive definite on the
    whole space; d_mean(theta) -> (m, p) and d_cov(theta) -> (m, p, p) stack
    the first derivatives along the parameter axis. Second derivatives
    (d2_mean -> (m, m, p), d2_cov -> (m, m, p, p)) are optional; when absent
    the curvature machinery falls back to finite differences of the score.
    ``solver``, when set, maps empirical moments straight to the maximizer.
    """

    theta_dim: int
    mt_mean: Callable[[np.ndarray], np.ndarray]
    mt_cov: Callable[[np.ndarray], np.ndarray]
    d_mean: Callable[[np.ndarray], np.ndarray]
    d_cov: Callable[[np.ndarray], np.ndarray]
    space: ParameterSpace
    d2_mean: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2_cov: Optional[Callable[[np.ndarray], np.ndarray]] = None
    solver: Optional[Callable[[EmpiricalMTMoments], np.ndarray]] = None
    label: str = "model"
    info: dict = field(default_factory=dict)

    @property
    def has_second_derivatives(self) -> bool:
        return self.d2_mean is not None and self.d2_cov is not None


@dataclass
class EstimationResult:
    theta: np.ndarray
    objective: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def objective_j_u(moments: EmpiricalMTMoments, model: ParametricMomentModel,
                  theta) -> float:
    """J_u(theta); always <= 0, zero iff the moments match the model exactly."""
    theta = np.asarray(theta, dtype=float).ravel()
    sigma = model.mt_cov(theta)
    div = log_det_divergence(moments.mt_cov, sigma)
    quad = inv_quad_form(moments.mt_mean - model.mt_mean(theta), sigma)
    return -(div + quad)


def _grid_search(moments: EmpiricalMTMoments, model: ParametricMomentModel
                 ) -> EstimationResult:
    points = model.space.grid_points()
    if points.size == 0:
        raise ValueError("empty parameter grid")
    best_idx = -1
    best_val = -np.inf
    values = np.empty(points.shape[0])
    for i, theta in enumerate(points):
        val = objective_j_u(moments, model, theta)
        values[i] = val
        if val > best_val:  # strict: first (lowest-index) maximizer wins
            best_val = val
            best_idx = i
    theta = points[best_idx]
    return EstimationResult(
        theta=theta, objective=best_val, method="grid",
        diagnostics={"grid_index": best_idx,
                     "grid_size": points.shape[0],
                     "on_boundary": model.space.on_boundary(theta)})


def estimate_mt_gqmle(data, u: MTFunction, model: ParametricMomentModel
                      ) -> EstimationResult:
    """Maximize J_u built from the empirical reweighted moments of ``data``.

    Uses the model's closed-form solver when available, else the exhaustive
    grid (ties broken toward the lowest grid index).
    """
    moments = empirical_mt_moments(data, u)
    if model.solver is not None:
        theta = np.asarray(model.solver(moments), dtype=float).ravel()
        if theta.size != model.theta_dim:
            raise ValueError("solver returned a parameter of wrong dimension")
        return EstimationResult(
            theta=theta, objective=objective_j_u(moments, model, theta),
            method="closed-form",
            diagnostics={"in_space": model.space.contains(theta),
                         "on_boundary": model.space.on_boundary(theta)})
    return _grid_search(moments, model)


def estimate_gqmle(data, model: ParametricMomentModel) -> EstimationResult:
    """Unweighted special case: estimate_mt_gqmle with u == 1."""
    return estimate_mt_gqmle(data, constant_mt_function(), model)


def finite_diff_moment_derivatives(model: ParametricMomentModel, theta,
                                   k: int, step: float):
    """Central differences of mt_mean and mt_cov in coordinate k."""
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=float).ravel()
    lo = theta.copy()
    hi = theta.copy()
    hi[k] += step
    lo[k] -= step
    for point in (hi, lo):
        if not model.space.contains(point):
            raise ValueError("finite-difference stencil leaves the parameter space")
    d_mean = (model.mt_mean(hi) - model.mt_mean(lo)) / (2.0 * step)
    d_cov = (model.mt_cov(hi) - model.mt_cov(lo)) / (2.0 * step)
    return d_mean, d_cov


@dataclass
class IdentifiabilityReport:
    flagged: list          # (theta, mean_dist, cov_dist) triples
    n_checked: int

    @property
    def ok(self) -> bool:
        return not self.flagged


def check_identifiability(model: ParametricMomentModel, theta0,
                          grid: Optional[np.ndarray] = None,
                          tol: float = 1e-8) -> IdentifiabilityReport:
    """Flag grid points whose model moments collide with those at theta0.

    A collision (both the mean and covariance distances below ``tol``) at
    theta != theta0 means the fit objective cannot separate the two points.
    """
    theta0 = np.asarray(theta0, dtype=float).ravel()
    points = model.space.grid_points() if grid is None else np.atleast_2d(grid)
    mean0 = model.mt_mean(theta0)
    cov0 = model.mt_cov(theta0)
    flagged = []
    for theta in points:
        if np.linalg.norm(theta - theta0) < 1e-12:
            continue
        mean_dist = float(np.linalg.norm(model.mt_mean(theta) - mean0))
        cov_dist = float(np.linalg.norm(model.mt_cov(theta) - cov0))
        if mean_dist < tol and cov_dist < tol:
            flagged.append((theta.copy(), mean_dist, cov_dist))
    return IdentifiabilityReport(flagged=flagged, n_checked=len(points))
