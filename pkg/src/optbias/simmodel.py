"""Seven-factor equity-style population model and Gaussian panel simulation.

Units are percent annualized throughout. Every random quantity comes from its
own named Philox stream keyed by ``(seed, purpose, indices...)``, so draws are
independent of evaluation order and each column/row array is a prefix of the
same array drawn at a larger dimension.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .covariance import LowRankCovariance
from .errors import DimensionError
from .spectra import DataMatrix, select_singvecs

Q_FACTORS = 7

FACTOR_COV = np.array([
    [250.0, 0.0, 0.0, 55.0, 44.0, 68.0, -22.0],
    [0.0, 64.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 16.0, 0.0, 0.0, 0.0, 0.0],
    [55.0, 0.0, 0.0, 481.0, 192.0, -108.0, 0.0],
    [44.0, 0.0, 0.0, 192.0, 260.0, -8.0, 22.0],
    [68.0, 0.0, 0.0, -108.0, -8.0, 160.0, -44.0],
    [-22.0, 0.0, 0.0, 0.0, 22.0, -44.0, 121.0],
])
FACTOR_COV.setflags(write=False)

MARKET_MEAN, MARKET_SD = 1.0, 0.25
STYLE_SDS = (0.5, 1.0)
N_INDUSTRIES = 4
SPECIFIC_VOL_FLOOR, SPECIFIC_VOL_RANGE = 25.0, 75.0
SPECIFIC_BETA = (4.0, 16.0)


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Counter-based generator for one named purpose (and optional indices)."""
    key = (zlib.crc32(purpose.encode()),) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True)
class PopulationModel:
    p_max: int
    alpha: np.ndarray
    Xi: np.ndarray
    var_f: np.ndarray
    A: np.ndarray
    gamma_diag: np.ndarray
    seed: int | None = None

    @property
    def q(self) -> int:
        return self.Xi.shape[1]

    @cached_property
    def B(self) -> np.ndarray:
        return self.Xi @ self.A

    @property
    def sigma_f(self) -> np.ndarray:
        return np.sqrt(np.diag(self.var_f))

    def to_dict(self) -> dict:
        return {
            "p_max": self.p_max,
            "q": self.q,
            "seed": self.seed,
            "alpha": self.alpha.tolist(),
            "Xi": self.Xi.tolist(),
            "var_f": self.var_f.tolist(),
            "A": self.A.tolist(),
            "gamma_diag": self.gamma_diag.tolist(),
        }

    def save(self, path: str | Path) -> None:
        """Write the model as JSON; floats round-trip exactly."""
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "PopulationModel":
        data = json.loads(Path(path).read_text())
        return cls(
            p_max=int(data["p_max"]), alpha=np.array(data["alpha"]), Xi=np.array(data["Xi"]),
            var_f=np.array(data["var_f"]), A=np.array(data["A"]),
            gamma_diag=np.array(data["gamma_diag"]), seed=data["seed"],
        )


def industry_exposures(p: int, seed: int) -> np.ndarray:
    """Two-industry membership block.

    Each row draws industries ``I1`` and ``I2`` independently and uniformly,
    sets ``Xi[I1] = U1`` and then adds ``U2`` to ``Xi[I2]``. Distinct draws give
    exposures ``U1`` and ``U2`` (0.5 on average); coinciding draws give a
    single nonzero exposure ``U1 + U2``.
    """
    first = stream(seed, "industry-first").integers(0, N_INDUSTRIES, size=p)
    second = stream(seed, "industry-second").integers(0, N_INDUSTRIES, size=p)
    u1 = stream(seed, "industry-u1").random(size=p)
    u2 = stream(seed, "industry-u2").random(size=p)
    block = np.zeros((p, N_INDUSTRIES))
    rows = np.arange(p)
    block[rows, first] = u1
    block[rows, second] += u2
    return block


def specific_variances(p: int, seed: int) -> np.ndarray:
    a, b = SPECIFIC_BETA
    x = stream(seed, "specific-gamma-a").standard_gamma(a, size=p)
    y = stream(seed, "specific-gamma-b").standard_gamma(b, size=p)
    vol = SPECIFIC_VOL_FLOOR + SPECIFIC_VOL_RANGE * x / (x + y)
    return vol ** 2


def calibrate(p_max: int, seed: int) -> PopulationModel:
    if p_max < 1:
        raise DimensionError("p_max must be positive")
    market = stream(seed, "market").normal(MARKET_MEAN, MARKET_SD, size=p_max)
    styles = [stream(seed, "style", j).normal(0.0, sd, size=p_max) for j, sd in enumerate(STYLE_SDS)]
    Xi = np.column_stack([market, *styles, industry_exposures(p_max, seed)])
    var_f = FACTOR_COV.copy()
    A = np.linalg.cholesky(var_f)
    sigma_f = np.sqrt(np.diag(var_f))
    return PopulationModel(
        p_max=p_max, alpha=Xi @ sigma_f, Xi=Xi, var_f=var_f, A=A,
        gamma_diag=specific_variances(p_max, seed), seed=seed,
    )


@dataclass(frozen=True)
class TruthSlice:
    """Population ground truth restricted to the first ``p`` variables."""

    p: int
    B: np.ndarray
    gamma_diag: np.ndarray
    alpha: np.ndarray

    @cached_property
    def scrB(self) -> np.ndarray:
        return select_singvecs(self.B, self.B.shape[1])

    @cached_property
    def lambdas(self) -> np.ndarray:
        """Singular values of ``B`` in the column order of ``scrB``."""
        return np.linalg.svd(self.B, compute_uv=False)

    @cached_property
    def covariance(self) -> LowRankCovariance:
        return LowRankCovariance(self.B, np.ones(self.B.shape[1]), self.gamma_diag)

    def dense(self) -> np.ndarray:
        return self.covariance.dense()


def truth_slice(model: PopulationModel, p: int) -> TruthSlice:
    if not 1 <= p <= model.p_max:
        raise DimensionError(f"p={p} outside [1, {model.p_max}]")
    return TruthSlice(p=p, B=model.B[:p], gamma_diag=model.gamma_diag[:p], alpha=model.alpha[:p])


def simulate_panel(truth: TruthSlice, n: int, seed: int, trial: int, alpha: np.ndarray | None = None) -> DataMatrix:
    """``n`` i.i.d. columns ``alpha + B x + eps`` with ``x ~ N(0, I)``, ``eps ~ N(0, Gamma)``.

    Rows are drawn in order, so the panel for a smaller ``p`` (same seed and
    trial) equals the leading rows of the panel for a larger one.
    """
    if n < 2:
        raise DimensionError("need at least two observations")
    alpha = truth.alpha if alpha is None else np.asarray(alpha, dtype=float)
    factors = stream(seed, "trial-factors", trial).standard_normal((truth.B.shape[1], n))
    noise = stream(seed, "trial-noise", trial).standard_normal((truth.p, n))
    Y = alpha[:, None] + truth.B @ factors + noise * np.sqrt(truth.gamma_diag)[:, None]
    return DataMatrix(Y)
