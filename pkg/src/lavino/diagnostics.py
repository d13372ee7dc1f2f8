"""Self-checks behind the ``verify`` subcommand.

Each check returns (name, passed, measured, threshold); the CLI prints one
line per check and exits nonzero if any fail.  These are product diagnostics,
not the test-suite oracles (the tests carry their own independent ones).
"""

from __future__ import annotations

import numpy as np

from .operators import BoundOp, problem_operator, op_from_spec
from .prox import AdamParams, CGParams, PDHGParams, prox_quadratic, prox_tv_data_adam, \
    prox_tv_data_pdhg, tv_data_objective
from .regularizers import TVWeights

DOT_TEST_SHAPE = (9, 16, 16, 3)
DOT_TEST_SEEDS = 20
DOT_TEST_TOL = 1e-5


def dot_test(op: BoundOp, seeds: int = DOT_TEST_SEEDS, break_adjoint: bool = False) -> float:
    """Max relative adjoint-identity error over random tensor pairs."""
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(op.in_shape)
        y = rng.standard_normal(op.out_shape)
        ax = op.apply(x)
        aty = op.adjoint(y)
        if break_adjoint:
            aty = aty * 1.001  # deliberate fault for the verification-path test
        lhs = float(np.vdot(ax, y).real)
        rhs = float(np.vdot(x, aty).real)
        denom = np.linalg.norm(ax) * np.linalg.norm(y)
        if denom == 0:
            continue
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


def standard_operators(shape=DOT_TEST_SHAPE):
    ops = {
        "temporal-pool(4)": op_from_spec("temporal-pool:4", shape),
        "temporal-pool(8)": op_from_spec("temporal-pool:8", shape),
        "spatial-pool(4)": op_from_spec("spatial-pool:4", shape),
        "spatial-pool(8)": op_from_spec("spatial-pool:8", shape),
        "temporal-circ-blur(7)": op_from_spec("temporal-circ-blur:7", shape),
        "problem-A": problem_operator("A", shape),
        "problem-B": problem_operator("B", shape),
        "problem-C": problem_operator("C", shape),
    }
    return ops


def materialize(op: BoundOp) -> np.ndarray:
    """Dense matrix of a small operator, column by column."""
    n = int(np.prod(op.in_shape))
    m = int(np.prod(op.out_shape))
    mat = np.zeros((m, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        mat[:, j] = op.apply(e.reshape(op.in_shape)).ravel()
        e[j] = 0.0
    return mat


def cg_vs_dense_check(epsilon: float = 1e3) -> float:
    """prox_quadratic against the materialized normal-equation solve."""
    rng = np.random.default_rng(7)
    shape = (4, 2, 2, 1)
    op = op_from_spec("temporal-pool:2", shape)
    u = rng.standard_normal(shape)
    y = rng.standard_normal(op.out_shape)
    a = materialize(op)
    n = a.shape[1]
    dense = np.linalg.solve(np.eye(n) + epsilon * a.T @ a,
                            u.ravel() + epsilon * a.T @ y.ravel())
    approx = prox_quadratic(op, y, u, epsilon, CGParams(max_iters=200, tol=1e-12))
    return float(np.linalg.norm(approx.ravel() - dense) / np.linalg.norm(dense))


def bundled_tv_instance():
    """Deterministic 5-frame 8x8 pure-temporal instance shared by checks."""
    rng = np.random.default_rng(42)
    shape = (5, 8, 8, 1)
    op = op_from_spec("temporal-pool:2", shape)
    x_true = rng.standard_normal(shape) * 0.3 + 0.5
    y = op.apply(x_true) + 0.01 * rng.standard_normal(op.out_shape)
    u = op.pinv(y) + 0.05 * rng.standard_normal(shape)
    w = TVWeights(0.0, 0.0, 0.05)
    return op, y, u, w


def pdhg_vs_adam_check() -> float:
    """Relative objective gap between the two TV prox solvers on the bundled instance."""
    op, y, u, w = bundled_tv_instance()
    delta_eta = 10.0
    sigma_n = 0.5
    x_pdhg = prox_tv_data_pdhg(op, y, u, w, delta_eta,
                               PDHGParams(iters=600), CGParams(max_iters=30, tol=1e-10),
                               sigma_n=sigma_n)
    x_adam = prox_tv_data_adam(op, y, u, w, delta_eta,
                               AdamParams(lr=1e-3, iters=20000), sigma_n=sigma_n)
    f_pdhg = tv_data_objective(op, y, x_pdhg, u, w, delta_eta, sigma_n, drop_trust=False)
    f_adam = tv_data_objective(op, y, x_adam, u, w, delta_eta, sigma_n, drop_trust=False)
    return abs(f_pdhg - f_adam) / min(abs(f_pdhg), abs(f_adam))


def run_all(break_adjoint: bool = False):
    """All verification checks as (name, passed, measured, threshold) rows."""
    rows = []
    for name, op in standard_operators().items():
        err = dot_test(op, break_adjoint=break_adjoint)
        rows.append((f"dot-test {name}", err <= DOT_TEST_TOL, err, DOT_TEST_TOL))
    for eps in (1.0, 1e3, 1e5):
        err = cg_vs_dense_check(eps)
        rows.append((f"cg-vs-dense eps={eps:g}", err <= 1e-5, err, 1e-5))
    gap = pdhg_vs_adam_check()
    rows.append(("pdhg-vs-adam objective gap", gap <= 5e-3, gap, 5e-3))
    return rows
