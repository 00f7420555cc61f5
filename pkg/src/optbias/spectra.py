"""Top-q sample spectra of a p x n data panel.

The sample covariance ``S = Y J Y^T / n`` is never formed when p > n; its
nonzero spectrum is read off the n x n Gram matrix ``J Y^T Y J / n`` and the
p-dimensional eigenvectors are recovered by one multiplication with Y.

Eigenvectors are chosen by a deterministic selection rule so that every
downstream quantity is bit-reproducible: inside each group of (numerically)
equal singular values, the k-th vector is the normalized projection of the
first standard basis vector that is not orthogonal to the part of the group
not yet selected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, InvalidProjector, RankDeficient, SpikeBelowNoiseFloor

KappaMode = Literal["plain", "mp"]

EPS = np.finfo(float).eps
# A standard basis vector is "not orthogonal" to a subspace when its
# projection is longer than this.
BASIS_TOL = np.sqrt(EPS)
# Singular values closer than TIE_FACTOR * max(m, l) * eps * largest are tied.
TIE_FACTOR = 16.0


@dataclass(frozen=True)
class DataMatrix:
    """Observed p x n panel; columns are observations."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"data must be a 2-d array, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 2:
            raise DimensionError(f"need p >= 1 and n >= 2, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DimensionError("data contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def head(self, p: int) -> "DataMatrix":
        """First ``p`` rows (nested sub-panel)."""
        if not 1 <= p <= self.p:
            raise DimensionError(f"cannot take {p} rows of a panel with p={self.p}")
        return DataMatrix(self.values[:p])


@dataclass(frozen=True)
class CenteringProjector:
    """``J = I - g g^T / |g|^2`` or the identity (``g is None``)."""

    n: int
    g: np.ndarray | None = None

    @property
    def mode(self) -> str:
        return "identity" if self.g is None else "center"

    def matrix(self) -> np.ndarray:
        if self.g is None:
            return np.eye(self.n)
        return np.eye(self.n) - np.outer(self.g, self.g) / (self.g @ self.g)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``J v`` for a vector or for each column of a matrix."""
        v = np.asarray(v, dtype=float)
        if self.g is None:
            return v.copy()
        g = self.g
        return v - np.multiply.outer(g, g @ v) / (g @ g)

    def right_apply(self, Y: np.ndarray) -> np.ndarray:
        """``Y J`` for a p x n matrix."""
        Y = np.asarray(Y, dtype=float)
        if self.g is None:
            return Y.copy()
        g = self.g
        return Y - np.outer(Y @ g, g) / (g @ g)


def make_centering(n: int, g: np.ndarray | None = None, center: bool = True) -> CenteringProjector:
    """Build the centering projector for ``n`` observations.

    With ``center=False`` the identity is returned. Otherwise ``g`` defaults to
    the all-ones vector, i.e. removal of the sample mean.
    """
    if n < 1:
        raise InvalidProjector(f"n must be positive, got {n}")
    if not center:
        if g is not None:
            raise InvalidProjector("a centering vector was given with centering disabled")
        return CenteringProjector(n)
    if g is None:
        g = np.ones(n)
    g = np.asarray(g, dtype=float).ravel()
    if g.shape != (n,):
        raise InvalidProjector(f"centering vector has length {g.size}, expected {n}")
    if not np.all(np.isfinite(g)) or not np.linalg.norm(g) > 0:
        raise InvalidProjector("centering vector must be finite with nonzero length")
    g.setflags(write=False)
    return CenteringProjector(n, g)


def _tie_groups(values: np.ndarray, atol: float, stop: int) -> list[tuple[int, int]]:
    """Contiguous runs of tied values (descending input) covering indices < stop."""
    groups = []
    start = 0
    while start < stop:
        end = start + 1
        while end < len(values) and values[start] - values[end] <= atol:
            end += 1
        groups.append((start, end))
        start = end
    return groups


def _select(values: np.ndarray, vectors: np.ndarray, q: int, atol: float) -> np.ndarray:
    m = vectors.shape[0]
    out = np.empty((m, q))
    for start, end in _tie_groups(values, atol, q):
        take = min(end, q) - start
        if end - start == 1:
            u = vectors[:, start]
            s = int(np.argmax(np.abs(u) > BASIS_TOL))
            out[:, start] = u if u[s] > 0 else -u
            continue
        basis = vectors[:, start:end]
        full = end - start == m
        chosen: list[np.ndarray] = []
        for _ in range(take):
            for s in range(m):
                if full:
                    proj = np.zeros(m)
                    proj[s] = 1.0
                else:
                    proj = basis @ basis[s]
                for v in chosen:
                    proj = proj - v * v[s]
                length = np.linalg.norm(proj)
                if length > BASIS_TOL:
                    break
            else:  # pragma: no cover - cannot happen for a nonempty complement
                raise RuntimeError("no standard basis vector projects onto the tie space")
            chosen.append(proj / length)
        out[:, start:start + take] = np.column_stack(chosen)
    return out


def select_singvecs(A: np.ndarray, q: int) -> np.ndarray:
    """Deterministic left singular vectors of ``A`` for its q largest singular values.

    Columns are ordered by descending singular value; ties and signs are
    resolved by the standard-basis projection rule described in the module
    docstring. ``select_singvecs(np.eye(m), q)`` is exactly ``np.eye(m)[:, :q]``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError("expected a matrix")
    m, l = A.shape
    if not 0 <= q <= min(m, l):
        raise DimensionError(f"q={q} exceeds min(m, l)={min(m, l)}")
    if q == 0:
        return np.empty((m, 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    atol = TIE_FACTOR * max(m, l) * EPS * s[0]
    # A tie group reaching the zero singular values of a tall matrix needs the
    # full left null space, which the thin SVD does not return.
    last_group = _tie_groups(s, atol, q)[-1]
    if m > len(s) and last_group[1] == len(s) and s[last_group[0]] <= atol:
        U, s, _ = np.linalg.svd(A, full_matrices=True)
        s = np.concatenate([s, np.zeros(m - len(s))])
    return _select(s, U, q, atol)


def select_eigvecs(S: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-q eigenpairs of a symmetric positive semidefinite matrix.

    Equivalent to ``select_singvecs(S, q)`` (for PSD ``S`` the singular
    vectors are eigenvectors) but uses a symmetric eigensolver. Returns
    ``(eigenvalues, vectors)`` with eigenvalues descending.
    """
    S = np.asarray(S, dtype=float)
    m = S.shape[0]
    if S.shape != (m, m):
        raise DimensionError("expected a square matrix")
    if not 0 <= q <= m:
        raise DimensionError(f"q={q} exceeds m={m}")
    w, V = np.linalg.eigh((S + S.T) / 2)
    w = w[::-1]
    V = V[:, ::-1]
    atol = TIE_FACTOR * m * EPS * max(abs(w[0]), 0.0)
    return w[:q].copy(), _select(w, V, q, atol)


@dataclass(frozen=True)
class SampleSpectrum:
    """Top-q sample eigenpairs plus bulk-noise summaries."""

    q: int
    eigvals: np.ndarray      # S_p^2, descending
    eigvecs: np.ndarray      # p x q, orthonormal columns
    n_plus: int
    bulk_sum: float
    kappa_sq: float
    psi: np.ndarray          # diag of Psi, entries in (0, 1]
    gamma_hat_sq: float
    n: int

    @property
    def p(self) -> int:
        return self.eigvecs.shape[0]

    @property
    def psi_sq(self) -> np.ndarray:
        return self.psi ** 2


def bulk_level(bulk_sum: float, n_plus: int, q: int, n: int, p: int, kappa_mode: KappaMode = "plain") -> float:
    """Average bulk eigenvalue, optionally with the Marchenko-Pastur adjustment."""
    if kappa_mode == "plain":
        return bulk_sum / (n_plus - q)
    if kappa_mode == "mp":
        ratio = n / p
        return bulk_sum * (1 + ratio) / (n_plus - q + ratio)
    raise ValueError(f"unknown kappa mode {kappa_mode!r}")


def sample_spectrum(Y: DataMatrix | np.ndarray, J: CenteringProjector | None, q: int,
                    kappa_mode: KappaMode = "plain") -> SampleSpectrum:
    """Spectrum of ``Y J Y^T / n`` computed from the n x n Gram matrix."""
    if not isinstance(Y, DataMatrix):
        Y = DataMatrix(Y)
    p, n = Y.p, Y.n
    if J is None:
        J = make_centering(n, center=False)
    if J.n != n:
        raise DimensionError(f"projector is {J.n}-dimensional but the panel has n={n}")
    if q < 1:
        raise DimensionError("q must be at least 1")

    YJ = J.right_apply(Y.values)
    gram = YJ.T @ YJ / n
    w, V = np.linalg.eigh((gram + gram.T) / 2)
    w = w[::-1]
    V = V[:, ::-1]
    rank_tol = max(n, p) * EPS * w[0]
    n_plus = int(np.count_nonzero(w > rank_tol))
    if n_plus <= q:
        raise RankDeficient(f"only {n_plus} nonzero sample eigenvalues for q={q}")

    eigvals = w[:q].copy()
    atol = TIE_FACTOR * n * EPS * w[0]
    V_q = _select(w, V, q, atol)
    eigvecs = YJ @ V_q / np.sqrt(n * eigvals)

    bulk_sum = float(np.sum(w[q:n_plus]))
    kappa_sq = bulk_level(bulk_sum, n_plus, q, n, p, kappa_mode)
    # a spike within the tie tolerance of the bulk level is not separated from it
    if eigvals[-1] <= kappa_sq + atol:
        raise SpikeBelowNoiseFloor(
            f"smallest spike {eigvals[-1]:.6g} does not exceed the bulk level {kappa_sq:.6g}")
    psi = np.sqrt(1.0 - kappa_sq / eigvals)
    return SampleSpectrum(
        q=q, eigvals=eigvals, eigvecs=eigvecs, n_plus=n_plus, bulk_sum=bulk_sum,
        kappa_sq=kappa_sq, psi=psi, gamma_hat_sq=n * kappa_sq / p, n=n,
    )
