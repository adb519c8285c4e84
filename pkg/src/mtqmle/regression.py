"""Complex linear regression: X_n = A alpha0 + W_n with spherically contoured
noise, estimated through a projected Gaussian weight u(x) = exp(-||P_perp x||^2
/ omega^2) that only sees the component of x orthogonal to range(A).

Under that weight the noise keeps zero reweighted mean and a covariance of the
form r0 P_A + r1 I, so the estimator collapses to the closed form
alpha_hat = (A^H A)^-1 A^H mu_hat, and the asymptotic MSE, its empirical
estimate, and the influence function all have explicit expressions. The real
parameter is theta = [Re alpha; Im alpha] of dimension 2q.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
import numpy as np

from .core import as_dataset, hermitize
from .estimator import ParameterSpace, ParametricMomentModel
from .samplers import NoiseSpec, texture_expectation
from .transform import MTFunction, empirical_mt_moments, gaussian_mt_function

_COLLINEARITY_TOL = 1e-8


def realify(alpha: np.ndarray) -> np.ndarray:
    """Stack [Re alpha; Im alpha]."""
    alpha = np.asarray(alpha, dtype=complex).ravel()
    return np.concatenate([alpha.real, alpha.imag])


def unrealify(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    q = theta.size // 2
    return theta[:q] + 1j * theta[q:]


def realify_matrix(c: np.ndarray) -> np.ndarray:
    """[[Re C, -Im C], [Im C, Re C]], the real form of a complex matrix."""
    c = np.asarray(c, dtype=complex)
    return np.block([[c.real, -c.imag], [c.imag, c.real]])


@dataclass
class RegressionModel:
    """Known regressors plus the noise description used by the closed forms."""

    a_matrix: np.ndarray
    noise: NoiseSpec

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] <= a.shape[1]:
            raise ValueError("regressor matrix must be tall (p > q)")
        if np.linalg.matrix_rank(a) < a.shape[1]:
            # construction proceeds; solves against A^H A will fail downstream
            warnings.warn("regressor matrix is (numerically) rank deficient",
                          RuntimeWarning, stacklevel=2)
        if self.noise.p != a.shape[0]:
            raise ValueError("noise dimension differs from observation dimension")
        self.a_matrix = a
        self.p, self.q = a.shape
        self.aha = a.conj().T @ a
        self.m_real = realify_matrix(self.aha)          # B^-1 in the real form
        try:
            self.b_matrix = np.linalg.inv(self.m_real)
            self.proj_a = hermitize(a @ np.linalg.solve(self.aha, a.conj().T))
        except np.linalg.LinAlgError:                   # rank-deficient A
            self.b_matrix = np.linalg.pinv(self.m_real)
            self.proj_a = hermitize(a @ np.linalg.pinv(self.aha) @ a.conj().T)
        self.proj_perp = np.eye(self.p) - self.proj_a

    @property
    def theta_dim(self) -> int:
        return 2 * self.q

    @property
    def sigma2_z(self) -> float:
        return self.noise.sigma2


def build_steering_regressors(p: int, angle0: float, angle1: float,
                           noise: NoiseSpec) -> RegressionModel:
    """Two-column unit-modulus regressors A = [a_0, a_1] / sqrt(2) with
    a_k = [1, e^{i angle_k}, ..., e^{i (p-1) angle_k}]^T / sqrt(p).

    Nearly equal angles are allowed but warned about (columns become
    collinear and the fit ill-conditioned).
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if abs(np.sin(angle0) - np.sin(angle1)) < _COLLINEARITY_TOL and \
            abs(np.cos(angle0) - np.cos(angle1)) < _COLLINEARITY_TOL:
        warnings.warn("regressor angles nearly equal; columns are close to "
                      "collinear", RuntimeWarning, stacklevel=2)
    cols = [np.exp(1j * np.arange(p) * ang) / np.sqrt(p)
            for ang in (angle0, angle1)]
    return RegressionModel(np.stack(cols, axis=1) / np.sqrt(2.0), noise)


def projected_mt_function(model: RegressionModel, omega: float) -> MTFunction:
    """Gaussian weight of width omega on the orthogonal complement of range(A)."""
    return gaussian_mt_function(omega, projector=model.proj_perp)


def mt_gqmle_regression(data, model: RegressionModel, omega: float
                        ) -> np.ndarray:
    """Closed-form estimate: realified (A^H A)^-1 A^H mu_hat^(u)."""
    mean = empirical_mt_moments(data, projected_mt_function(model, omega)).mt_mean
    return realify(np.linalg.solve(model.aha, model.a_matrix.conj().T @ mean))


def gqmle_regression(data, model: RegressionModel) -> np.ndarray:
    """Unweighted limit: least squares on the plain sample mean."""
    mean = as_dataset(data).mean(axis=0)
    return realify(np.linalg.solve(model.aha, model.a_matrix.conj().T @ mean))


@functools.lru_cache(maxsize=256)
def _mean_weight(noise: NoiseSpec, expo: int, omega: float) -> float:
    s2 = noise.sigma2
    w2 = omega ** 2
    return texture_expectation(
        noise, lambda nu2: np.exp(expo * (np.log(w2) - np.log(s2 * nu2 + w2))))


def mean_weight_regression(model: RegressionModel, omega: float) -> float:
    """Expected weight E[u] = E[(w^2/(s^2 nu^2 + w^2))^(p-q)] over the texture."""
    return _mean_weight(model.noise, model.p - model.q, float(omega))


def _texture_ratio(model: RegressionModel, omega: float) -> float:
    """E[nu^2 (w^2/(2 s^2 nu^2 + w^2))^(p-q)] / E[(w^2/(s^2 nu^2 + w^2))^(p-q)]^2."""
    expo = model.p - model.q
    s2 = model.sigma2_z
    w2 = omega ** 2

    def numerator(nu2):
        # single exp keeps huge-texture tails at 0 instead of 0 * inf
        return np.exp(np.log(nu2) + expo * (np.log(w2) - np.log(2.0 * s2 * nu2 + w2)))

    num = texture_expectation(model.noise, numerator)
    return num / mean_weight_regression(model, omega) ** 2


def asymptotic_mse_regression(model: RegressionModel, omega: float, n: int
                              ) -> np.ndarray:
    """Closed-form asymptotic MSE matrix: texture ratio times sigma2/(2n) B."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return _texture_ratio(model, omega) * (model.sigma2_z / (2.0 * n)) * model.b_matrix


def empirical_asymptotic_mse_regression(data, model: RegressionModel,
                                        omega: float) -> np.ndarray:
    """Empirical estimate sum u^2 zeta zeta^T / (sum u)^2 with
    zeta = B [Re h; Im h], h = A^H (x - mu_hat^(u))."""
    x = as_dataset(data)
    u = projected_mt_function(model, omega)
    lw = u.log_weights(x)
    scaled = np.exp(lw - np.max(lw))        # ratio below is scale invariant
    mean = empirical_mt_moments(x, u).mt_mean
    h = (x - mean) @ model.a_matrix.conj()
    zeta = np.concatenate([h.real, h.imag], axis=1) @ model.b_matrix.T
    num = np.einsum("n,nk,nj->kj", scaled ** 2, zeta, zeta)
    return num / np.sum(scaled) ** 2


def influence_regression(y, theta0, model: RegressionModel, omega: float
                         ) -> np.ndarray:
    """Closed-form influence of a contamination point y.

    Grows without bound along range(A) but is damped by
    exp(-||P_perp y||^2 / omega^2) everywhere else.
    """
    y = np.asarray(y, dtype=complex).ravel()
    theta0 = np.asarray(theta0, dtype=float).ravel()
    pref = 1.0 / mean_weight_regression(model, omega)
    bracket = model.b_matrix @ realify(model.a_matrix.conj().T @ y) - theta0
    py = model.proj_perp @ y
    return pref * bracket * np.exp(-float(np.real(py.conj() @ py)) / omega ** 2)


def fit_noise_cov_scalars(model: RegressionModel, sigma_hat: np.ndarray
                          ) -> tuple:
    """Least-squares fit of Sigma_hat ~ r0 P_A + r1 I over the two-matrix basis."""
    p, q = model.p, model.q
    t_pa = float(np.trace(model.proj_a @ sigma_hat).real)
    t_i = float(np.trace(sigma_hat).real)
    gram = np.array([[q, q], [q, p]], dtype=float)
    r0, r1 = np.linalg.solve(gram, np.array([t_pa, t_i]))
    # keep the model covariance positive definite
    r1 = max(r1, 1e-12 * max(t_i / p, 1e-30))
    r0 = max(r0, 0.0)
    return float(r0), float(r1)


def regression_moment_model(model: RegressionModel, data, u: MTFunction,
                            bounds: float = 3.0, grid_size: int = 9,
                            use_solver: bool = True) -> ParametricMomentModel:
    """Generic-path moment model for this application.

    The reweighted noise covariance scalars (r0, r1) are fitted to the
    empirical reweighted covariance of ``data``; the mean map is the exact
    affine A alpha. The closed-form solver reproduces the direct estimator
    (the (A^H A)-weighting cancels the structured covariance for any r0, r1).
    """
    a = model.a_matrix
    p, q = model.p, model.q
    m = 2 * q
    r0, r1 = fit_noise_cov_scalars(model, empirical_mt_moments(data, u).mt_cov)
    cov_const = r0 * model.proj_a + r1 * np.eye(p)
    d_mean = np.concatenate([a.T, 1j * a.T], axis=0)       # (m, p)
    zeros_cov = np.zeros((m, p, p), dtype=complex)

    def solver(moments):
        return realify(np.linalg.solve(model.aha,
                                       a.conj().T @ moments.mt_mean))

    space = ParameterSpace(lower=-bounds * np.ones(m),
                           upper=bounds * np.ones(m),
                           grid_sizes=grid_size)
    return ParametricMomentModel(
        theta_dim=m,
        mt_mean=lambda theta: a @ unrealify(theta),
        mt_cov=lambda theta: cov_const,
        d_mean=lambda theta: d_mean,
        d_cov=lambda theta: zeros_cov,
        d2_mean=lambda theta: np.zeros((m, m, p), dtype=complex),
        d2_cov=lambda theta: np.zeros((m, m, p, p), dtype=complex),
        space=space,
        solver=solver if use_solver else None,
        label="regression",
        info={"r0": r0, "r1": r1})


def population_f_regression(model: RegressionModel, omega: float,
                            r_sum: float) -> np.ndarray:
    """Population weighted-curvature matrix E[u] (2 / (r0 + r1)) B^-1 for the
    structured covariance with the given r0 + r1 (pairs with the moment model
    that carries those scalars)."""
    return mean_weight_regression(model, omega) * (2.0 / r_sum) * model.m_real


# --- known-likelihood quantities (Gaussian noise only) ------------------------

def _require_gaussian(model: RegressionModel):
    if model.noise.kind != "gaussian":
        raise ValueError("likelihood unknown")


def gaussian_score_regression(data, theta, model: RegressionModel) -> np.ndarray:
    """Likelihood score (2/sigma2)[Re h; Im h], h = A^H (x - A alpha), (n, 2q)."""
    _require_gaussian(model)
    x = as_dataset(data)
    resid = x - model.a_matrix @ unrealify(theta)
    h = resid @ model.a_matrix.conj()
    return (2.0 / model.sigma2_z) * np.concatenate([h.real, h.imag], axis=1)


def gaussian_fim_regression(model: RegressionModel) -> np.ndarray:
    """Per-sample Fisher information (2/sigma2) B^-1 under Gaussian noise."""
    _require_gaussian(model)
    return (2.0 / model.sigma2_z) * model.m_real


def gaussian_crlb_regression(model: RegressionModel, n: int) -> np.ndarray:
    """sigma2/(2n) B, the n-sample Gaussian CRLB for theta."""
    _require_gaussian(model)
    return model.sigma2_z / (2.0 * n) * model.b_matrix
