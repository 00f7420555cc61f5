"""Plug-in quadratic optimization with an estimated covariance.

The objective is ``Q(x) = c0 + c1 <x, zeta> - <x, Sigma x> / 2``. Its maximizer
under an estimate ``Sigma_hat`` is evaluated against the true ``Sigma``; the
ratio between the realized and the promised gain is the discrepancy
``D_hat = 2 - m_hat^2 V^2``, which equals one when ``Sigma_hat = Sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bias import opt_bias, residual_direction, unit_target
from .covariance import CovarianceModel, DenseCovariance, LowRankCovariance
from .errors import DegenerateObjective, DimensionError, NotPositiveDefinite


@dataclass(frozen=True)
class QuadProblem:
    c0: float
    c1: float
    zeta: np.ndarray
    model: CovarianceModel

    def __post_init__(self):
        zeta = np.asarray(self.zeta, dtype=float).ravel()
        unit_target(zeta)
        object.__setattr__(self, "zeta", zeta)


@dataclass(frozen=True)
class OptimizationReport:
    x_hat: np.ndarray
    m_hat_sq: float
    q_hat: float
    q_realized: float
    q_true: float
    d_hat: float
    v_sq: float
    u_H: np.ndarray | None

    @property
    def volatility(self) -> float:
        return float(np.sqrt(self.v_sq))


def precision_apply(model: CovarianceModel, v: np.ndarray) -> np.ndarray:
    """``Sigma^{-1} v``; Woodbury for low-rank models, Cholesky for dense ones."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != model.p:
        raise DimensionError(f"vector has length {v.shape[0]}, model has p={model.p}")
    out = model.solve(v)
    if not np.all(np.isfinite(out)):
        raise NotPositiveDefinite("precision solve produced non-finite values")
    return out


def min_variance(model: CovarianceModel, zeta: np.ndarray) -> np.ndarray:
    """Weights minimizing ``<w, Sigma w>`` subject to ``<w, zeta> = 1``."""
    zeta = np.asarray(zeta, dtype=float).ravel()
    unit_target(zeta)
    x = precision_apply(model, zeta)
    return x / (zeta @ x)


def true_min_variance(truth: CovarianceModel, zeta: np.ndarray) -> float:
    zeta = np.asarray(zeta, dtype=float).ravel()
    unit_target(zeta)
    return float(1.0 / (zeta @ precision_apply(truth, zeta)))


def evaluate(problem: QuadProblem, truth: CovarianceModel) -> OptimizationReport:
    c0, c1, zeta = problem.c0, problem.c1, problem.zeta
    if c1 == 0:
        raise DegenerateObjective("c1 = 0 makes the maximizer zero and the discrepancy undefined")
    if truth.p != problem.model.p:
        raise DimensionError("truth and estimate have different dimensions")
    prec_zeta = precision_apply(problem.model, zeta)
    m_hat_sq = float(zeta @ prec_zeta)
    x_hat = c1 * prec_zeta
    w_hat = prec_zeta / m_hat_sq
    v_sq = float(w_hat @ truth.matvec(w_hat))
    mu_sq = float(zeta @ precision_apply(truth, zeta))
    u_H = None
    if isinstance(problem.model, LowRankCovariance):
        resid, denom = residual_direction(problem.model.basis, zeta)
        u_H = resid / denom
    return OptimizationReport(
        x_hat=x_hat,
        m_hat_sq=m_hat_sq,
        q_hat=c0 + c1 ** 2 * m_hat_sq / 2,
        q_realized=float(c0 + c1 * (x_hat @ zeta) - 0.5 * (x_hat @ truth.matvec(x_hat))),
        q_true=c0 + c1 ** 2 * mu_sq / 2,
        d_hat=2.0 - m_hat_sq * v_sq,
        v_sq=v_sq,
        u_H=u_H,
    )


def discrepancy_forecast(lambdas: np.ndarray, gamma: np.ndarray, scrB: np.ndarray, H: np.ndarray,
                         zeta: np.ndarray, gamma_hat_sq: float) -> float:
    """Leading-order discrepancy ``-|Lambda E|^2 / g^2 + 2 - <u, Gamma u> / g^2``.

    ``lambdas`` are the singular values of the population loadings matched to
    the columns of ``scrB``; ``gamma`` is the specific covariance, either its
    diagonal (vector) or a full matrix.
    """
    bias = opt_bias(scrB, H, zeta, is_basis=True)
    resid, denom = residual_direction(H, zeta)
    u = resid / denom
    gamma = np.asarray(gamma, dtype=float)
    u_gamma_u = float(u @ (gamma * u)) if gamma.ndim == 1 else float(u @ gamma @ u)
    scaled = np.asarray(lambdas, dtype=float) * bias.values
    return float(-(scaled @ scaled) / gamma_hat_sq + 2.0 - u_gamma_u / gamma_hat_sq)


__all__ = [
    "DenseCovariance", "LowRankCovariance", "OptimizationReport", "QuadProblem",
    "discrepancy_forecast", "evaluate", "min_variance", "precision_apply", "true_min_variance",
]
