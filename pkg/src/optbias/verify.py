"""Small-dimension oracle and property checks, runnable without pytest."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bias import bias_invariance_check, opt_bias
from .correction import assemble_model, correct_sharp, pca_basis
from .covariance import DenseCovariance, LowRankCovariance
from .errors import OptBiasError
from .optimize import QuadProblem, evaluate, precision_apply
from .simmodel import calibrate, simulate_panel, truth_slice
from .spectra import BASIS_TOL, make_centering, sample_spectrum, select_singvecs


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _woodbury(rng, dims):
    worst = 0.0
    for p in dims:
        for q in (1, 3, 7):
            U = np.linalg.qr(rng.standard_normal((p, q)))[0]
            model = LowRankCovariance(U, rng.uniform(1.0, 50.0, q) * p, rng.uniform(0.5, 2.0))
            v = rng.standard_normal(p)
            dense = np.linalg.solve(model.dense(), v)
            worst = max(worst, np.linalg.norm(precision_apply(model, v) - dense) / np.linalg.norm(dense))
    return worst <= 1e-9, f"max relative error {worst:.2e} (tol 1e-9)"


def _panel(seed, p=200, n=40):
    model = calibrate(p, seed)
    truth = truth_slice(model, p)
    Y = simulate_panel(truth, n, seed, 0)
    spec = sample_spectrum(Y, make_centering(n), 7, "mp")
    return truth, spec


def _invariance(rng, seed):
    truth, spec = _panel(seed)
    zeta = np.ones(truth.p)
    base = opt_bias(truth.scrB, spec.eigvecs, zeta, is_basis=True).values
    worst = 0.0
    for _ in range(100):
        U, _, Vt = np.linalg.svd(rng.standard_normal((7, 7)))
        K = U @ np.diag(np.logspace(0, 3, 7)) @ Vt
        got = bias_invariance_check(truth.scrB, spec.eigvecs, K, zeta, is_basis=True).values
        worst = max(worst, np.abs(got - base).max())
    return worst <= 1e-10, f"max |E(H) - E(HK)| = {worst:.2e} over 100 transforms (tol 1e-10)"


def _sharp_orthonormal(rng, seed):
    truth, spec = _panel(seed)
    sharp = correct_sharp(spec, np.ones(truth.p)).vectors
    err = np.abs(sharp.T @ sharp - np.eye(7)).max()
    return err <= 1e-10, f"max |H#^T H# - I| = {err:.2e} (tol 1e-10)"


def _selection(rng):
    A = rng.standard_normal((6, 4))
    first = select_singvecs(A, 3)
    again = select_singvecs(A.copy(), 3)
    same = np.array_equal(first, again)
    eye = np.array_equal(select_singvecs(np.eye(5), 3), np.eye(5)[:, :3])
    U = np.linalg.svd(A)[0][:, :3]
    aligned = np.allclose(np.abs(np.sum(U * first, axis=0)), 1.0, atol=1e-12)
    lead = [col[np.argmax(np.abs(col) > BASIS_TOL)] for col in first.T]
    signs = all(x > 0 for x in lead)
    ok = same and eye and aligned and signs
    return ok, f"repeatable={same} identity-exact={eye} svd-aligned={aligned} sign-rule={signs}"


def _discrepancy(rng, seed, inject_asymmetric):
    truth, spec = _panel(seed, p=120, n=30)
    zeta = np.ones(truth.p)
    dense_truth = truth.dense()
    if inject_asymmetric:
        dense_truth[0, 1] += 1.0
    truth_model = DenseCovariance(dense_truth)
    est = assemble_model(pca_basis(spec), spec)
    report = evaluate(QuadProblem(1.0, 1.0, zeta, est), truth_model)
    identity = abs(report.d_hat - (2 - report.m_hat_sq * report.v_sq))
    plug_in = evaluate(QuadProblem(1.0, 1.0, zeta, truth_model), truth_model)
    ok = identity <= 1e-10 and abs(plug_in.d_hat - 1.0) <= 1e-10
    return ok, f"|D - (2 - m^2 V^2)| = {identity:.1e}, plug-in D - 1 = {plug_in.d_hat - 1:.1e}"


def verify_suite(seed: int = 7, dims=(50, 100, 200), inject_asymmetric_truth: bool = False) -> list[CheckResult]:
    """Run every check; numerical errors are reported as failures, not raised."""
    rng = np.random.default_rng(seed)
    checks: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("woodbury_vs_dense", lambda: _woodbury(rng, dims)),
        ("bias_column_invariance", lambda: _invariance(rng, seed)),
        ("sharp_orthonormal", lambda: _sharp_orthonormal(rng, seed)),
        ("selection_determinism", lambda: _selection(rng)),
        ("discrepancy_identity", lambda: _discrepancy(rng, seed, inject_asymmetric_truth)),
    ]
    results = []
    for name, check in checks:
        try:
            ok, detail = check()
        except OptBiasError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
