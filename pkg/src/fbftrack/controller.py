"""Receding-horizon feedforward controller.

Each batch period the controller solves one two-batch window: it ingests any
newly available measurement, builds the correction lift for the current
weights (identity during warm-up and in plain standard mode), solves the
window least-squares problem for the new spline coefficients, commands the
first batch of the reconstructed input, and advances the coefficient shift
register. A stability check runs every window; in learned mode its verdict
can trigger the configured mitigation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisConfig, BasisSet, steady_window_blocks
from .hybrid import DataDrivenLift, HybridConfig, HybridModel, build_lift_window
from .lifted import DiscreteStateSpace, simulate
from .plant import Batch, Plant
from .stability import (assemble_closed_loop, check_stability, pseudo_inverse,
                        spectral_radius)

MODES = ("none", "standard", "hybrid", "frozen-hybrid")
MITIGATIONS = ("freeze-learning", "revert-standard", "halt", "none")

#: a batch whose input exceeds this multiple of the desired peak is divergent
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class ControllerSettings:
    mode: str = "standard"
    warmup_batches: int = 78
    mitigation: str = "freeze-learning"
    stability_threshold: float = 0.97
    weight_scale: float = 1.0
    weight_scale_ramp: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mitigation not in MITIGATIONS:
            raise ValueError(f"mitigation must be one of {MITIGATIONS}")
        if self.warmup_batches < 0:
            raise ValueError("warmup must be nonnegative")
        if not 0.0 < self.stability_threshold <= 1.0:
            raise ValueError("stability threshold must lie in (0, 1]")

    @property
    def learned(self) -> bool:
        return self.mode in ("hybrid", "frozen-hybrid")


@dataclass
class TrackingRecord:
    """Per-step traces, per-window monitor results, and run-level events."""

    ts: float
    batch_len: int
    warmup_batches: int
    y_d: np.ndarray
    u: np.ndarray
    y_true: np.ndarray
    y_meas: np.ndarray
    y_hat_pb: np.ndarray
    y_hat_h: np.ndarray
    window_radius: np.ndarray
    window_verdict: list[str]
    weight_change: np.ndarray
    rank_flags: list[bool]
    gamma_p: list[np.ndarray]
    yh_provisional: list[np.ndarray]
    ypb_provisional: list[np.ndarray]
    final_weights: np.ndarray
    alarm_window: int | None = None
    engaged_window: int | None = None
    diverged_window: int | None = None
    halted: bool = False

    @property
    def n_steps(self) -> int:
        return self.u.size

    @property
    def n_windows(self) -> int:
        return len(self.window_verdict)

    def error(self) -> np.ndarray:
        return self.y_d[:self.n_steps] - self.y_meas

    def rms_error(self, start_step: int = 0) -> float:
        e = self.error()[start_step:]
        if e.size == 0:
            return float("nan")
        return float(np.sqrt(np.mean(e ** 2)))


def optimize_window(y_d_window: np.ndarray, basis: BasisSet,
                    lift: DataDrivenLift, gamma_p: np.ndarray,
                    ypb_past: np.ndarray, e_tail: np.ndarray,
                    pinv: np.ndarray | None = None):
    """Least-squares window solve for the current spline coefficients.

    Minimizes the predicted window tracking error over gamma_c; everything
    already decided (past coefficients, stored predictions, measured error
    tail, bias) is folded into the right-hand side. Returns
    (gamma_c, rank_flagged); a rank-deficient solve proceeds with the
    truncated pseudoinverse but is flagged.
    """
    a_eff = lift.l_a @ basis.psit_c
    if pinv is None:
        pinv, rank = pseudo_inverse(a_eff)
    else:
        rank = basis.n_c
    rhs = (y_d_window - lift.l_a @ (basis.psit_pc @ gamma_p)
           - lift.l_uy @ ypb_past - lift.l_ue @ e_tail - lift.l_u1)
    return pinv @ rhs, rank < basis.n_c


def reconstruct_input(gamma_c: np.ndarray, gamma_p: np.ndarray,
                      basis: BasisSet, batch_len: int) -> np.ndarray:
    """First batch of the raw spline combination for the window."""
    u_window = basis.psi_c @ gamma_c + basis.psi_pc @ gamma_p
    return u_window[:batch_len]


def shift_gamma(gamma_p: np.ndarray, gamma_c: np.ndarray, basis_cfg: BasisConfig):
    """Past coefficients for the next window: supports that still overlap."""
    merged = np.concatenate([gamma_p, gamma_c])
    n_b = basis_cfg.coeffs_per_batch
    return merged[n_b:n_b + basis_cfg.n_past]


def _scaled_weights(weights: np.ndarray, cfg: HybridConfig,
                    scale: float) -> np.ndarray:
    """Error-feedback entries scaled by the destabilization factor."""
    if scale == 1.0:
        return weights.copy()
    w = weights.copy()
    w[1 + cfg.q:] *= scale
    return w


def run_tracking(y_d: np.ndarray, nominal: DiscreteStateSpace,
                 basis_cfg: BasisConfig, hybrid_cfg: HybridConfig,
                 settings: ControllerSettings, plant: Plant | None,
                 record_training: bool = False,
                 initial_weights: np.ndarray | None = None) -> TrackingRecord:
    """Run the batch loop over a whole trajectory.

    ``plant`` is the simulated axis; passing None runs the loop against the
    controller's own predictions (measurements are the committed corrected
    predictions under a one-batch delay), which is the validation mode used
    to check the closed-loop rewrite. ``initial_weights`` seeds the
    correction model, e.g. to resume a frozen run from trained weights.
    """
    y_d = np.asarray(y_d, dtype=float)
    n = basis_cfg.batch_len
    if y_d.size % n != 0 or y_d.size == 0:
        raise ValueError("trajectory length must be a whole number of batches")
    if settings.mode == "none":
        return _run_uncompensated(y_d, nominal, basis_cfg, plant)
    n_batches = y_d.size // n
    nw = basis_cfg.window_len
    basis = steady_window_blocks(basis_cfg, nominal)
    model = HybridModel(hybrid_cfg, record_training=record_training)
    if initial_weights is not None:
        model.weights = np.asarray(initial_weights, dtype=float).copy()
        if model.weights.shape != (hybrid_cfg.feature_len,):
            raise ValueError("initial weights have the wrong length")
    y_d_pad = np.concatenate([y_d, np.full(nw, y_d[-1])])
    peak = max(float(np.abs(y_d).max()), np.finfo(float).tiny)
    p = hybrid_cfg.p
    identity_lift = DataDrivenLift.identity("window", nw, nw, p)

    rec = TrackingRecord(
        ts=nominal.ts, batch_len=n, warmup_batches=settings.warmup_batches,
        y_d=y_d, u=np.zeros(y_d.size), y_true=np.zeros(y_d.size),
        y_meas=np.zeros(y_d.size), y_hat_pb=np.zeros(y_d.size),
        y_hat_h=np.zeros(y_d.size), window_radius=np.zeros(n_batches),
        window_verdict=[], weight_change=np.zeros(n_batches), rank_flags=[],
        gamma_p=[], yh_provisional=[], ypb_provisional=[],
        final_weights=np.zeros(hybrid_cfg.feature_len))

    gamma_p = np.zeros(basis_cfg.n_past)
    training_on = settings.mode == "hybrid"
    warmup_training = settings.mode == "frozen-hybrid"
    scale = settings.weight_scale
    scale_frozen = False
    reverted = False
    prev_weights = model.weights.copy()
    identity_radius: float | None = None
    next_ingest = 0
    committed = 0

    for j in range(n_batches):
        # ingest every measurement the acquisition delay has released
        while True:
            meas = _fetch(plant, rec, next_ingest, j)
            if meas is None:
                break
            sl = slice(next_ingest * n, (next_ingest + 1) * n)
            e_batch = meas - rec.y_hat_pb[sl]
            train_now = training_on or (warmup_training
                                        and j < settings.warmup_batches)
            model.ingest_errors(e_batch, train=train_now)
            next_ingest += 1

        learned_now = (settings.learned and j >= settings.warmup_batches
                       and not reverted)
        if learned_now:
            if settings.weight_scale_ramp and not scale_frozen:
                scale = (settings.weight_scale + settings.weight_scale_ramp
                         * (j - settings.warmup_batches))
            lift = build_lift_window(
                hybrid_cfg, _scaled_weights(model.weights, hybrid_cfg, scale))
            if not all(np.isfinite(blk).all() for blk in
                       (lift.l_a, lift.l_uy, lift.l_ue, lift.l_u1)):
                # the unrolled recursion itself overflowed
                rec.diverged_window = j
                break
        else:
            lift = identity_lift

        with np.errstate(over="ignore", invalid="ignore"):
            a_eff = lift.l_a @ basis.psit_c
        if not np.isfinite(a_eff).all():
            rec.diverged_window = j
            break
        pinv, rank = pseudo_inverse(a_eff)
        rec.rank_flags.append(rank < basis.n_c)

        # stability check on the law actually in use this window
        if learned_now:
            system = assemble_closed_loop(lift, basis, pinv=pinv,
                                          window_index=j)
            radius = spectral_radius(system)
        else:
            if identity_radius is None:
                system = assemble_closed_loop(identity_lift, basis,
                                              window_index=j)
                identity_radius = spectral_radius(system)
            radius = identity_radius
        verdict = check_stability(radius, settings.stability_threshold)
        rec.window_radius[j] = radius
        rec.window_verdict.append(verdict)
        if verdict == "alarm" and rec.alarm_window is None:
            rec.alarm_window = j
        if (learned_now and verdict != "stable"
                and rec.engaged_window is None
                and settings.mitigation != "none"):
            rec.engaged_window = j
            if settings.mitigation == "freeze-learning":
                training_on = False
                warmup_training = False
                scale_frozen = True
            elif settings.mitigation == "revert-standard":
                training_on = False
                warmup_training = False
                reverted = True
                lift = identity_lift
                a_eff = lift.l_a @ basis.psit_c
                pinv, _ = pseudo_inverse(a_eff)
            elif settings.mitigation == "halt":
                rec.halted = True
                break

        ypb_past = model.physics_tail(j * n, 2 * n)
        e_tail = model.measured_error_tail((j - 1) * n)
        y_d_window = y_d_pad[j * n:j * n + nw]
        with np.errstate(over="ignore", invalid="ignore"):
            gamma_c, _ = optimize_window(y_d_window, basis, lift, gamma_p,
                                         ypb_past, e_tail, pinv=pinv)
            u_batch = reconstruct_input(gamma_c, gamma_p, basis, n)
        if (not np.isfinite(u_batch).all()
                or np.abs(u_batch).max() > DIVERGENCE_FACTOR * peak):
            rec.diverged_window = j
            break

        ypb_window = basis.psit_pc @ gamma_p + basis.psit_c @ gamma_c
        yh_window = lift.apply(ypb_window, ypb_past, e_tail)
        sl = slice(j * n, (j + 1) * n)
        rec.u[sl] = u_batch
        rec.y_hat_pb[sl] = ypb_window[:n]
        rec.y_hat_h[sl] = yh_window[:n]
        rec.gamma_p.append(gamma_p.copy())
        rec.ypb_provisional.append(ypb_window[n:].copy())
        rec.yh_provisional.append(yh_window[n:].copy())
        model.record_physics_prediction(ypb_window[:n],
                                        yh_window[:n] - ypb_window[:n])
        if plant is not None:
            true_batch = plant.step_batch(Batch(j, u_batch))
            rec.y_true[sl] = true_batch.values
        else:
            rec.y_true[sl] = yh_window[:n]
            rec.y_meas[sl] = yh_window[:n]
        rec.weight_change[j] = float(np.linalg.norm(model.weights
                                                    - prev_weights))
        prev_weights = model.weights.copy()
        gamma_p = shift_gamma(gamma_p, gamma_c, basis_cfg)
        committed = j + 1

    _truncate(rec, committed, plant)
    rec.final_weights = model.weights.copy()
    return rec


def _fetch(plant: Plant | None, rec: TrackingRecord, index: int,
           window: int) -> np.ndarray | None:
    """Next measured batch, or None while the delay still hides it."""
    if plant is not None:
        batch = plant.fetch_measurement(index)
        return None if batch is None else batch.values
    # self-measure validation loop: one-batch delay, measurement equals the
    # committed corrected prediction
    if index + 1 >= window:
        return None
    n = rec.batch_len
    return rec.y_hat_h[index * n:(index + 1) * n].copy()


def _truncate(rec: TrackingRecord, committed: int, plant: Plant | None):
    """Cut per-step arrays to the committed batches and fill measurements."""
    n = rec.batch_len
    steps = committed * n
    for name in ("u", "y_true", "y_meas", "y_hat_pb", "y_hat_h"):
        setattr(rec, name, getattr(rec, name)[:steps])
    rec.window_radius = rec.window_radius[:len(rec.window_verdict)]
    rec.weight_change = rec.weight_change[:len(rec.window_verdict)]
    if plant is not None and committed:
        rec.y_meas = plant.measured_series()[:steps]


def _run_uncompensated(y_d: np.ndarray, nominal: DiscreteStateSpace,
                       basis_cfg: BasisConfig,
                       plant: Plant | None) -> TrackingRecord:
    """Open-loop baseline: the desired trajectory is the command."""
    if plant is None:
        raise ValueError("uncompensated mode needs a plant")
    n = basis_cfg.batch_len
    n_batches = y_d.size // n
    rec = TrackingRecord(
        ts=nominal.ts, batch_len=n, warmup_batches=0, y_d=y_d,
        u=y_d.copy(), y_true=np.zeros(y_d.size), y_meas=np.zeros(y_d.size),
        y_hat_pb=np.zeros(y_d.size), y_hat_h=np.zeros(y_d.size),
        window_radius=np.zeros(0), window_verdict=[],
        weight_change=np.zeros(0), rank_flags=[], gamma_p=[],
        yh_provisional=[], ypb_provisional=[], final_weights=np.zeros(0))
    for j in range(n_batches):
        sl = slice(j * n, (j + 1) * n)
        batch = plant.step_batch(Batch(j, y_d[sl]))
        rec.y_true[sl] = batch.values
    rec.y_meas = plant.measured_series()
    rec.y_hat_pb = simulate(nominal, y_d)
    rec.y_hat_h = rec.y_hat_pb.copy()
    return rec
