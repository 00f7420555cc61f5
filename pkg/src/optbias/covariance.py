"""Covariance model containers: low-rank-plus-diagonal and dense."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import DimensionError, NotPositiveDefinite


@dataclass(frozen=True)
class LowRankCovariance:
    """``U diag(spike_sq) U^T + diag(noise)``.

    ``noise`` is a positive scalar (the estimators' ``gamma_hat^2 I``) or a
    length-p vector (a diagonal specific-variance matrix).
    """

    basis: np.ndarray
    spike_sq: np.ndarray
    noise: float | np.ndarray

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float).T).T
        spike_sq = np.asarray(self.spike_sq, dtype=float).ravel()
        if basis.shape[1] != spike_sq.size:
            raise DimensionError("basis columns and spike count differ")
        if np.any(spike_sq <= 0):
            raise NotPositiveDefinite("spike variances must be positive")
        noise = self.noise
        if np.ndim(noise) == 0:
            noise = float(noise)
            ok = noise > 0
        else:
            noise = np.asarray(noise, dtype=float).ravel()
            if noise.size != basis.shape[0]:
                raise DimensionError("noise diagonal has the wrong length")
            ok = bool(np.all(noise > 0))
        if not ok:
            raise NotPositiveDefinite("noise variance must be positive")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "spike_sq", spike_sq)
        object.__setattr__(self, "noise", noise)

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def noise_diag(self) -> np.ndarray:
        return np.broadcast_to(self.noise, (self.p,))

    def _noise_like(self, v: np.ndarray):
        if np.ndim(self.noise) == 0:
            return self.noise
        return self.noise.reshape((-1,) + (1,) * (np.ndim(v) - 1))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        spikes = self.spike_sq.reshape((-1,) + (1,) * (v.ndim - 1))
        return self.basis @ (spikes * (self.basis.T @ v)) + self._noise_like(v) * v

    @cached_property
    def _capacitance(self):
        scaled = self.basis / np.reshape(self.noise, (-1, 1)) if np.ndim(self.noise) else self.basis / self.noise
        cap = np.diag(1.0 / self.spike_sq) + self.basis.T @ scaled
        return linalg.cho_factor(cap, lower=True), scaled

    def solve(self, v: np.ndarray) -> np.ndarray:
        """``Sigma^{-1} v`` by the Woodbury identity, O(pq) per call."""
        v = np.asarray(v, dtype=float)
        factor, scaled = self._capacitance
        return v / self._noise_like(v) - scaled @ linalg.cho_solve(factor, scaled.T @ v)

    def dense(self) -> np.ndarray:
        out = (self.basis * self.spike_sq) @ self.basis.T
        out[np.diag_indices_from(out)] += self.noise
        return out

    def trace(self) -> float:
        return float(np.sum(self.spike_sq * np.sum(self.basis ** 2, axis=0)) + np.sum(self.noise_diag))


@dataclass(frozen=True)
class DenseCovariance:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("covariance must be square")
        scale = max(np.abs(matrix).max(), 1.0)
        if np.abs(matrix - matrix.T).max() > 1e-10 * scale:
            raise NotPositiveDefinite("covariance matrix is not symmetric")
        object.__setattr__(self, "matrix", matrix)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    @cached_property
    def _cholesky(self):
        try:
            return linalg.cho_factor(self.matrix, lower=True)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefinite("covariance matrix is not positive definite") from exc

    def solve(self, v: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._cholesky, v)

    def dense(self) -> np.ndarray:
        return self.matrix.copy()

    def trace(self) -> float:
        return float(np.trace(self.matrix))


CovarianceModel = LowRankCovariance | DenseCovariance
