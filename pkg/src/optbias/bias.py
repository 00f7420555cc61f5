"""Quadratic optimization bias of an estimated spike basis, and its data-only norm proxy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularTransform, TargetInSpikeSpan, ZeroTarget
from .spectra import SampleSpectrum, select_singvecs

# |z - z_H| below this means the target sits inside col(H).
SPAN_TOL = 1e-8


@dataclass(frozen=True)
class BiasVector:
    values: np.ndarray
    denom: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class PhiEstimator:
    phi: np.ndarray
    pi: np.ndarray
    z_perp: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.phi))


def unit_target(zeta: np.ndarray) -> np.ndarray:
    zeta = np.asarray(zeta, dtype=float).ravel()
    length = np.linalg.norm(zeta)
    if not length > 0:
        raise ZeroTarget("target vector has zero length")
    return zeta / length


def _orthonormal_range(H: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(H)
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= H.shape[0] * np.finfo(float).eps * diag.max():
        raise DimensionError("estimated basis is not of full column rank")
    return Q


def residual_direction(H: np.ndarray, zeta: np.ndarray) -> tuple[np.ndarray, float]:
    """``(z - z_H, |z - z_H|)`` for ``z = zeta / |zeta|``."""
    z = unit_target(zeta)
    H = np.atleast_2d(np.asarray(H, dtype=float).T).T
    if H.shape[0] != z.size:
        raise DimensionError(f"basis has {H.shape[0]} rows but target has length {z.size}")
    Q = _orthonormal_range(H)
    resid = z - Q @ (Q.T @ z)
    denom = float(np.linalg.norm(resid))
    if denom < SPAN_TOL:
        raise TargetInSpikeSpan(f"|z - z_H| = {denom:.3g} is below {SPAN_TOL:g}")
    return resid, denom


def population_basis(B: np.ndarray) -> np.ndarray:
    B = np.atleast_2d(np.asarray(B, dtype=float).T).T
    return select_singvecs(B, B.shape[1])


def opt_bias(B: np.ndarray, H: np.ndarray, zeta: np.ndarray, *, is_basis: bool = False) -> BiasVector:
    """Optimization bias ``scrB^T (z - z_H) / |z - z_H|``.

    ``B`` is the population loading matrix; pass ``is_basis=True`` when it is
    already the selected orthonormal eigenbasis (recomputing the selection of
    an orthonormal matrix would rotate it).
    """
    scrB = np.atleast_2d(np.asarray(B, dtype=float).T).T if is_basis else population_basis(B)
    resid, denom = residual_direction(H, zeta)
    return BiasVector(scrB.T @ resid / denom, denom)


def bias_invariance_check(B: np.ndarray, H: np.ndarray, K: np.ndarray, zeta: np.ndarray, *,
                          is_basis: bool = False) -> BiasVector:
    """Bias of ``H K``; equals the bias of ``H`` for any invertible ``K``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] != K.shape[1] or np.linalg.matrix_rank(K) < K.shape[0]:
        raise SingularTransform("column transform must be square and invertible")
    H = np.atleast_2d(np.asarray(H, dtype=float).T).T
    return opt_bias(B, H @ K, zeta, is_basis=is_basis)


def phi_estimator(spec: SampleSpectrum, zeta: np.ndarray) -> PhiEstimator:
    """Data-only q-vector whose length tracks ``|E_p(scrH)|``."""
    z = unit_target(zeta)
    scrH = spec.eigvecs
    if scrH.shape[0] != z.size:
        raise DimensionError(f"spectrum has p={scrH.shape[0]} but target has length {z.size}")
    Hz = scrH.T @ z
    resid = z - scrH @ Hz
    denom = float(np.linalg.norm(resid))
    if denom < SPAN_TOL:
        raise TargetInSpikeSpan(f"|z - z_H| = {denom:.3g} is below {SPAN_TOL:g}")
    pi = 1.0 / spec.psi - spec.psi
    return PhiEstimator(phi=pi * Hz / denom, pi=pi, z_perp=resid / denom)
