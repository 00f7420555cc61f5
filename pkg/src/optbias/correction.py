"""Corrected spike bases and the low-rank-plus-scalar estimators built on them.

Three orthonormal p x q bases feed the same estimator family
``basis (S Psi)^2 basis^T + gamma_hat^2 I``:

* ``pca``   -- the raw sample eigenvectors,
* ``flat``  -- sample eigenvectors with only the leading one corrected by the
  single-spike two-parameter rotation toward the target,
* ``sharp`` -- every eigenvector corrected jointly, so the optimization bias
  vanishes asymptotically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bias import phi_estimator, unit_target
from .covariance import LowRankCovariance
from .errors import DegenerateCorrection, DimensionError, SpikeBelowNoiseFloor, TargetInSpikeSpan
from .spectra import SampleSpectrum, select_eigvecs, select_singvecs

Label = Literal["pca", "flat", "sharp"]
ESTIMATORS: tuple[Label, ...] = ("pca", "flat", "sharp")

DEGENERATE_TOL = 1e-10


@dataclass(frozen=True)
class CorrectedBasis:
    vectors: np.ndarray
    phi_sq: np.ndarray   # Phi^2 for ``sharp``, Psi^2 otherwise
    label: Label


def pca_basis(spec: SampleSpectrum) -> CorrectedBasis:
    return CorrectedBasis(spec.eigvecs, spec.psi_sq, "pca")


def correct_sharp(spec: SampleSpectrum, zeta: np.ndarray) -> CorrectedBasis:
    """Jointly corrected eigenvectors ``(H Psi + z_perp phi^T) M Phi^{-1}``.

    ``M`` and ``Phi^2`` are the selected eigenvectors and eigenvalues of
    ``Psi^2 + phi phi^T``; the output has orthonormal columns because the
    Gram matrix of ``H Psi + z_perp phi^T`` is exactly that q x q matrix.
    """
    est = phi_estimator(spec, zeta)
    gram = np.diag(spec.psi_sq) + np.outer(est.phi, est.phi)
    phi_sq, M = select_eigvecs(gram, spec.q)
    if np.sqrt(max(phi_sq.min(), 0.0)) < DEGENERATE_TOL:
        raise DegenerateCorrection(f"smallest Phi entry {phi_sq.min():.3g} is degenerate")
    raw = spec.eigvecs * spec.psi + np.outer(est.z_perp, est.phi)
    return CorrectedBasis(raw @ (M / np.sqrt(phi_sq)), phi_sq, "sharp")


def flat_column(h: np.ndarray, psi: float, zeta: np.ndarray) -> tuple[np.ndarray, float]:
    """Single-spike correction of one unit eigenvector ``h``.

    Returns the corrected unit vector ``t1 h + t2 z_perp_h`` and the scalar
    bias proxy ``phi`` used to form ``(t1, t2)``.
    """
    if not 0 < psi < 1:
        raise SpikeBelowNoiseFloor(f"signal-to-noise entry psi={psi:.3g} outside (0, 1)")
    z = unit_target(zeta)
    hz = float(h @ z)
    resid = z - hz * h
    denom = float(np.linalg.norm(resid))
    if denom < 1e-8:
        raise TargetInSpikeSpan("target is parallel to the leading eigenvector")
    phi = (1.0 / psi - psi) * hz / denom
    # (psi^2, psi phi) normalized; psi > 0 cancels.
    t = np.array([psi, phi]) / np.hypot(psi, phi)
    return t[0] * h + t[1] * (resid / denom), phi


def correct_flat(spec: SampleSpectrum, zeta: np.ndarray) -> CorrectedBasis:
    """Correct only the leading eigenvector, then re-orthonormalize.

    The result is the selected left singular basis of ``K S Psi`` where ``K``
    is the sample basis with column 1 replaced by its corrected version.
    """
    if spec.q < 1:
        raise DimensionError("need at least one spike")
    K = spec.eigvecs.copy()
    K[:, 0], _ = flat_column(K[:, 0], float(spec.psi[0]), zeta)
    vectors = select_singvecs(K * (np.sqrt(spec.eigvals) * spec.psi), spec.q)
    return CorrectedBasis(vectors, spec.psi_sq, "flat")


def corrected_basis(spec: SampleSpectrum, zeta: np.ndarray, label: Label) -> CorrectedBasis:
    if label == "pca":
        return pca_basis(spec)
    if label == "flat":
        return correct_flat(spec, zeta)
    if label == "sharp":
        return correct_sharp(spec, zeta)
    raise ValueError(f"unknown estimator {label!r}")


def corrected_eigenvalues(spec: SampleSpectrum) -> np.ndarray:
    """Spike variances with the bulk level removed, ``(S Psi)^2 = S^2 - kappa^2``."""
    return spec.eigvals * spec.psi_sq


def assemble_model(basis: CorrectedBasis, spec: SampleSpectrum) -> LowRankCovariance:
    if basis.vectors.shape != spec.eigvecs.shape:
        raise DimensionError("basis and spectrum dimensions differ")
    return LowRankCovariance(basis.vectors, corrected_eigenvalues(spec), spec.gamma_hat_sq)
