"""Independent reference computations used to cross-check the fast paths.

Everything here is deliberately written the slow, obvious way (dense solves,
per-sample loops, closed forms) and stays separate from the code it checks.
The CLI exposes these so recorded expectations can be regenerated.
"""

from __future__ import annotations

import csv

import numpy as np
from scipy.linalg import expm

from .basis import BasisConfig, build_bspline_basis
from .lifted import (ContinuousTransferFunction, DiscreteStateSpace,
                     LiftedOperator, impulse_response, tf_to_state_space)


def ridge_weights(rows: np.ndarray, targets: np.ndarray,
                  regularization: float) -> np.ndarray:
    """Dense normal-equations solve of the regularized least squares fit."""
    rows = np.asarray(rows, dtype=float)
    targets = np.asarray(targets, dtype=float)
    f = rows.shape[1]
    gram = rows.T @ rows + regularization * np.eye(f)
    return np.linalg.solve(gram, rows.T @ targets)


def reference_hybrid_prediction(q: int, p: int, weights, ypb_tail,
                                e_tail, ypb_future) -> np.ndarray:
    """Scalar-loop corrected prediction, independent of the lift machinery.

    ``ypb_tail`` holds the q-1 physics predictions before the span,
    ``e_tail`` the p errors before it (measured), ``ypb_future`` the span
    itself. Estimated errors are appended as the recursion advances.
    """
    weights = list(map(float, weights))
    w0 = weights[0]
    wy = weights[1:1 + q]
    we = weights[1 + q:1 + q + p]
    ypb = list(map(float, ypb_tail)) + list(map(float, ypb_future))
    err = list(map(float, e_tail))
    out = []
    for t in range(len(ypb_future)):
        yt = (q - 1) + t
        e_hat = w0
        for a in range(q):
            e_hat += wy[a] * ypb[yt - q + 1 + a]
        for a in range(p):
            e_hat += we[a] * err[t + a]
        err.append(e_hat)
        out.append(ypb[yt] + e_hat)
    return np.array(out)


def continuous_step_response(ctf: ContinuousTransferFunction, ts: float,
                             n: int) -> np.ndarray:
    """Exact continuous-time step response sampled at k*ts.

    Evaluates y(t) = c A^-1 (e^{At} - I) b + d directly per sample; a stable
    model has no eigenvalue at zero, so A is invertible.
    """
    a, b, c, d = tf_to_state_space(ctf)
    if a.shape[0] == 0:
        return np.full(n, d)
    a_inv_b = np.linalg.solve(a, b)
    out = np.zeros(n)
    eye = np.eye(a.shape[0])
    for k in range(n):
        phi = expm(a * (k * ts))
        out[k] = (c @ ((phi - eye) @ a_inv_b))[0, 0] + d
    return out


def full_horizon_tracking(y_d: np.ndarray, model: DiscreteStateSpace,
                          basis_cfg: BasisConfig):
    """One global least-squares fit over the whole horizon.

    Builds the complete lifted convolution operator and the full clamped
    basis, then solves for every coefficient at once. Returns
    (rms_residual, u) and is the yardstick for the receding-horizon loop.
    """
    y_d = np.asarray(y_d, dtype=float)
    horizon = y_d.size
    sampled = build_bspline_basis(basis_cfg, horizon)
    h = impulse_response(model, horizon)
    op = LiftedOperator.from_impulse(h, horizon, horizon)
    filtered = op.matrix @ sampled.matrix
    gamma, *_ = np.linalg.lstsq(filtered, y_d, rcond=None)
    residual = y_d - filtered @ gamma
    u = sampled.matrix @ gamma
    return float(np.sqrt(np.mean(residual ** 2))), u


def csv_rms(path: str, column: str = "e", start_step: int = 0) -> float:
    """Root mean square of a steps-file column, recomputed from the text."""
    total = 0.0
    count = 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["step"]) < start_step:
                continue
            val = float(row[column])
            total += val * val
            count += 1
    if count == 0:
        raise ValueError("no rows at or after the requested step")
    return float(np.sqrt(total / count))


def partition_of_unity_error(basis_cfg: BasisConfig, horizon: int) -> float:
    """Worst deviation of the basis row sums from one, interior steps only."""
    sampled = build_bspline_basis(basis_cfg, horizon)
    sums = sampled.matrix.sum(axis=1)
    return float(np.abs(sums - 1.0).max())
