"""Online-learned correction model riding on the physics predictions.

A linear regressor estimates the physics model's prediction error at each
step from a bias term, the last q physics predictions, and the last p
prediction errors (measured where available, previously estimated otherwise):

    e_hat(k) = w . [1, ypb(k-q+1..k), e(k-p..k-1)]
    yh(k)    = ypb(k) + e_hat(k)

Weights are the ridge-regularized least-squares fit over all measured steps,
maintained exactly by recursive least squares. Unrolling the recursion over a
batch or a delayed two-batch window gives the linear "lift" operators the
window optimizer and the stability monitor consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class HybridModelError(RuntimeError):
    """Raised when training can no longer proceed soundly."""


@dataclass(frozen=True)
class HybridConfig:
    """Feature sizes, ridge factor, and the batch length they operate on."""

    q: int
    p: int
    regularization: float
    batch_len: int

    def __post_init__(self):
        if self.q < 1 or self.p < 1:
            raise ValueError("q and p must be >= 1")
        if self.regularization <= 0:
            raise ValueError("regularization must be positive")
        if self.batch_len < 1:
            raise ValueError("batch length must be >= 1")
        # The delayed window form stores one batch of history per signal, so
        # the feature lookback may not reach past a single batch.
        if self.q - 1 > self.batch_len:
            raise ValueError("q - 1 may not exceed the batch length")
        if self.p > self.batch_len:
            raise ValueError("p may not exceed the batch length")

    @property
    def feature_len(self) -> int:
        return 1 + self.q + self.p


@dataclass(frozen=True)
class DataDrivenLift:
    """Unrolled per-step recursion as linear operators.

    Maps [physics predictions being optimized; stored past predictions;
    measured error tail; 1] to the corrected prediction:

        yh = l_a @ ypb_decision + l_uy @ ypb_past + l_ue @ e_tail + l_u1

    ``scope`` is "batch" (no acquisition delay, one batch out) or "window"
    (one-batch delay, two batches out).
    """

    scope: str
    l_a: np.ndarray
    l_uy: np.ndarray
    l_ue: np.ndarray
    l_u1: np.ndarray

    @classmethod
    def identity(cls, scope: str, out_len: int, past_len: int,
                 p: int) -> "DataDrivenLift":
        """Zero-weight collapse: yh == ypb."""
        return cls(scope=scope, l_a=np.eye(out_len),
                   l_uy=np.zeros((out_len, past_len)),
                   l_ue=np.zeros((out_len, p)),
                   l_u1=np.zeros(out_len))

    def apply(self, ypb_decision: np.ndarray, ypb_past: np.ndarray,
              e_tail: np.ndarray) -> np.ndarray:
        return (self.l_a @ ypb_decision + self.l_uy @ ypb_past
                + self.l_ue @ e_tail + self.l_u1)


def _unroll_lift(cfg: HybridConfig, weights: np.ndarray, n_ypb_batches: int,
                 n_rec_batches: int, n_out_batches: int) -> DataDrivenLift:
    """Push unit inputs through the error recursion to get its matrix form.

    The recursion covers the last ``n_rec_batches`` of the ``n_ypb_batches``
    prediction slots; errors before the recursion start are measured inputs
    (the last p of them), errors inside it are the recursion's own estimates.
    Linearity of the recursion in all inputs makes this construction exact.
    """
    n, q, p = cfg.batch_len, cfg.q, cfg.p
    w = np.asarray(weights, dtype=float)
    if w.shape != (cfg.feature_len,):
        raise ValueError(f"weights must have length {cfg.feature_len}")
    w0, wy, we = w[0], w[1:1 + q], w[1 + q:]
    nz = 1 + n_ypb_batches * n + p
    e_rows = np.zeros((p + n_rec_batches * n, nz))
    e_rows[np.arange(p), 1 + n_ypb_batches * n + np.arange(p)] = 1.0
    out = np.zeros((n_out_batches * n, nz))
    out_from = (n_rec_batches - n_out_batches) * n
    hist = (n_ypb_batches - n_rec_batches) * n
    for t in range(n_rec_batches * n):
        yt = hist + t
        row = we @ e_rows[t:t + p]
        row[0] += w0
        row[1 + yt - q + 1:1 + yt + 1] += wy
        e_rows[p + t] = row
        if t >= out_from:
            o = out[t - out_from]
            o[:] = row
            o[1 + yt] += 1.0
    past_cols = 1 + (n_ypb_batches - n_out_batches) * n
    return DataDrivenLift(
        scope="batch" if n_out_batches == 1 else "window",
        l_a=out[:, past_cols:1 + n_ypb_batches * n],
        l_uy=out[:, 1:past_cols],
        l_ue=out[:, 1 + n_ypb_batches * n:],
        l_u1=out[:, 0].copy())


def build_lift_batch(cfg: HybridConfig, weights: np.ndarray) -> DataDrivenLift:
    """One-batch lift: measured errors are current through the batch start.

    Inputs: decision predictions for the batch, the stored previous batch,
    and the last p measured errors.
    """
    return _unroll_lift(cfg, weights, n_ypb_batches=2, n_rec_batches=1,
                        n_out_batches=1)


def build_lift_window(cfg: HybridConfig, weights: np.ndarray) -> DataDrivenLift:
    """Two-batch window lift under a one-batch acquisition delay.

    The freshest measurement is two batches old, so the recursion first
    re-estimates the intervening batch and then the window itself. Inputs:
    decision predictions for the two window batches, the two stored batches
    before them, and the last p measured errors.
    """
    return _unroll_lift(cfg, weights, n_ypb_batches=4, n_rec_batches=3,
                        n_out_batches=2)


class HybridModel:
    """Mutable training state: weights, covariance, and signal histories.

    The controller appends one batch of physics predictions (plus its error
    estimates) whenever it commits an input batch, and one batch of measured
    errors whenever a delayed measurement arrives. Training consumes measured
    data only.
    """

    def __init__(self, cfg: HybridConfig, record_training: bool = False):
        self.cfg = cfg
        f = cfg.feature_len
        self.weights = np.zeros(f)
        # cov = (lambda I + sum phi phi^T)^-1, so the recursive trajectory
        # coincides with the batch ridge solution after every sample.
        self.cov = np.eye(f) / cfg.regularization
        self._ypb = np.zeros(0)
        self._e_meas = np.zeros(0)
        self._e_est = np.zeros(0)
        self.record_training = record_training
        self.training_rows: list[np.ndarray] = []
        self.training_targets: list[float] = []

    @property
    def committed_steps(self) -> int:
        return self._ypb.size

    @property
    def measured_steps(self) -> int:
        return self._e_meas.size

    def record_physics_prediction(self, ypb_batch: np.ndarray,
                                  e_est_batch: np.ndarray | None = None):
        """Append one committed batch of physics predictions (and the error
        estimates made for it, used as stand-ins until measurement arrives)."""
        ypb_batch = np.asarray(ypb_batch, dtype=float)
        if ypb_batch.size != self.cfg.batch_len:
            raise ValueError("prediction batch has the wrong length")
        if e_est_batch is None:
            e_est_batch = np.zeros(self.cfg.batch_len)
        self._ypb = np.concatenate([self._ypb, ypb_batch])
        self._e_est = np.concatenate([self._e_est, np.asarray(e_est_batch,
                                                              dtype=float)])

    def _padded(self, series: np.ndarray, start: int, stop: int) -> np.ndarray:
        """series[start:stop] with zeros outside the recorded range."""
        out = np.zeros(stop - start)
        lo = max(start, 0)
        hi = min(stop, series.size)
        if hi > lo:
            out[lo - start:hi - start] = series[lo:hi]
        return out

    def feature_vector(self, k: int) -> np.ndarray:
        """Regression features for step k.

        [1, ypb(k-q+1..k), e(k-p..k-1)], zero-padded before the start of the
        run; error entries at or beyond the measured horizon fall back to the
        recorded estimates.
        """
        cfg = self.cfg
        phi = np.zeros(cfg.feature_len)
        phi[0] = 1.0
        phi[1:1 + cfg.q] = self._padded(self._ypb, k - cfg.q + 1, k + 1)
        lo, hi = k - cfg.p, k
        meas = self._padded(self._e_meas, lo, hi)
        if hi > self.measured_steps:
            est = self._padded(self._e_est, lo, hi)
            idx = np.arange(lo, hi)
            meas = np.where(idx >= self.measured_steps, est, meas)
        phi[1 + cfg.q:] = meas
        return phi

    def measured_error_tail(self, end_step: int) -> np.ndarray:
        """Last p measured errors before ``end_step`` (zero-padded)."""
        return self._padded(self._e_meas, end_step - self.cfg.p, end_step)

    def physics_tail(self, end_step: int, count: int) -> np.ndarray:
        """Last ``count`` recorded physics predictions before ``end_step``."""
        return self._padded(self._ypb, end_step - count, end_step)

    def ingest_errors(self, e_batch: np.ndarray, train: bool = True):
        """Append one batch of measured errors; optionally run RLS on it.

        Measurements must arrive in order; the batch is assumed to cover
        steps [measured_steps, measured_steps + batch_len).
        """
        e_batch = np.asarray(e_batch, dtype=float)
        n = self.cfg.batch_len
        if e_batch.size != n:
            raise ValueError("error batch has the wrong length")
        if self.measured_steps + n > self.committed_steps:
            raise ValueError("measured errors outrun committed predictions")
        start = self.measured_steps
        e_all = np.concatenate([self._e_meas, e_batch])
        if not train:
            self._e_meas = e_all
            return
        # phi(k) only looks at errors before k, all of which are already in
        # e_all by construction, so the extended array can be used directly.
        w = self.weights.copy()
        cov = self.cov.copy()
        for t in range(n):
            k = start + t
            phi = np.zeros(self.cfg.feature_len)
            phi[0] = 1.0
            phi[1:1 + self.cfg.q] = self._padded(self._ypb, k - self.cfg.q + 1,
                                                 k + 1)
            phi[1 + self.cfg.q:] = self._padded(e_all, k - self.cfg.p, k)
            target = e_batch[t]
            cov_phi = cov @ phi
            denom = 1.0 + phi @ cov_phi
            if denom <= np.finfo(float).eps:
                raise HybridModelError(
                    f"covariance lost positive definiteness at step {k} "
                    f"(denominator {denom:.3e}); state unchanged")
            gain = cov_phi / denom
            w = w + gain * (target - w @ phi)
            cov = cov - np.outer(gain, cov_phi)
            cov = 0.5 * (cov + cov.T)
            if self.record_training:
                self.training_rows.append(phi)
                self.training_targets.append(target)
        self.weights = w
        self.cov = cov
        self._e_meas = e_all

    def predict_batches(self, ypb_future: np.ndarray) -> np.ndarray:
        """Recursive corrected prediction over whole batches.

        ``ypb_future`` covers m batches starting at the first unmeasured step;
        estimated errors from earlier batches feed the later ones.
        """
        cfg = self.cfg
        ypb_future = np.asarray(ypb_future, dtype=float)
        if ypb_future.size % cfg.batch_len != 0 or ypb_future.size == 0:
            raise ValueError("prediction span must cover m >= 1 whole batches")
        k0 = self.measured_steps
        w0, wy, we = (self.weights[0], self.weights[1:1 + cfg.q],
                      self.weights[1 + cfg.q:])
        ypb = np.concatenate([self._padded(self._ypb, k0 - cfg.q + 1, k0),
                              ypb_future])
        err = np.concatenate([self.measured_error_tail(k0),
                              np.zeros(ypb_future.size)])
        yh = np.zeros(ypb_future.size)
        for t in range(ypb_future.size):
            yt = cfg.q - 1 + t
            e_hat = (w0 + wy @ ypb[yt - cfg.q + 1:yt + 1]
                     + we @ err[t:t + cfg.p])
            err[cfg.p + t] = e_hat
            yh[t] = ypb[yt] + e_hat
        return yh

    def ridge_objective(self, weights: np.ndarray) -> float:
        """Training objective at the given weights over all measured data."""
        total = self.cfg.regularization * float(weights @ weights)
        for k in range(self.measured_steps):
            phi = self.feature_vector(k)
            total += float((self._e_meas[k] - weights @ phi) ** 2)
        return total
