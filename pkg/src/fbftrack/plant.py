"""Virtual vibration-prone axis: nominal LTI dynamics plus injectable
unmodeled behavior, batched I/O, and delayed measurement delivery.

The controller never sees this module's internals; it only commands input
batches and fetches measured batches after the configured acquisition delay.
Unmodeled effects are output-stage add-ons to the linear response:

* cubic stiffness:  y -> y - gain * y^3 / amplitude_scale^2
* friction:         y -> y - coeff * sign(velocity estimate)
* resonance detune: the two mid-band denominator coefficients of the true
  plant are scaled before discretization while the controller keeps the
  nominal model (an aftermarket-modification stand-in)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lifted import ContinuousTransferFunction, DiscreteStateSpace, discretize_zoh


class PlantError(ValueError):
    """Raised for invalid plant configuration or batch sequencing."""


@dataclass(frozen=True)
class Batch:
    """Values for time steps [index*N, (index+1)*N)."""

    index: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=float))
        if self.index < 0:
            raise PlantError("batch index must be nonnegative")


@dataclass(frozen=True)
class PlantConfig:
    nominal: ContinuousTransferFunction
    ts: float
    cubic_stiffness_gain: float = 0.0
    friction_coefficient: float = 0.0
    resonance_detune: float = 1.0
    amplitude_scale: float = 1.0
    noise_sigma: float = 0.0
    delay_batches: int = 1

    def __post_init__(self):
        if self.ts <= 0:
            raise PlantError("ts must be positive")
        if self.noise_sigma < 0:
            raise PlantError("noise sigma must be nonnegative")
        if self.delay_batches < 0:
            raise PlantError("delay must be nonnegative")
        if self.amplitude_scale <= 0:
            raise PlantError("amplitude scale must be positive")
        if self.resonance_detune <= 0:
            raise PlantError("resonance detune factor must be positive")


def detuned_transfer_function(nominal: ContinuousTransferFunction,
                              factor: float) -> ContinuousTransferFunction:
    """Scale the two mid-band denominator coefficients by ``factor``.

    For a denominator of length L the scaled indices are L//2 - 1 and L//2,
    which shifts the resonant band while leaving DC and the highest powers
    untouched. factor = 1 returns the nominal function unchanged.
    """
    if factor == 1.0:
        return nominal
    den = nominal.den.copy()
    if den.size < 3:
        raise PlantError("detuning needs a denominator of order >= 2")
    mid = den.size // 2
    den[mid - 1] *= factor
    den[mid] *= factor
    return ContinuousTransferFunction(nominal.num, den)


class Plant:
    """Single-owner simulation state; batches must be commanded in order."""

    def __init__(self, config: PlantConfig, batch_len: int, seed: int = 0):
        if batch_len < 1:
            raise PlantError("batch length must be >= 1")
        self.config = config
        self.batch_len = batch_len
        true_tf = detuned_transfer_function(config.nominal,
                                            config.resonance_detune)
        self.model: DiscreteStateSpace = discretize_zoh(true_tf, config.ts)
        self._x = np.zeros((self.model.order, 1))
        self._y_lin_prev = 0.0
        self._rng = np.random.default_rng(seed)
        self._true: list[np.ndarray] = []
        self._measured: list[np.ndarray] = []

    @property
    def batches_commanded(self) -> int:
        return len(self._true)

    def step_batch(self, u_batch: Batch) -> Batch:
        """Apply one input batch; returns the true (noise-free) output batch.

        The measured copy (noise added) becomes fetchable once the acquisition
        delay has elapsed.
        """
        if u_batch.index != self.batches_commanded:
            raise PlantError(
                f"batch {u_batch.index} commanded out of order; expected "
                f"{self.batches_commanded}")
        u = u_batch.values
        if u.size != self.batch_len:
            raise PlantError(
                f"batch length {u.size} != configured {self.batch_len}")
        cfg = self.config
        a, b, c, d = (self.model.a, self.model.b, self.model.c, self.model.d)
        y = np.zeros(self.batch_len)
        x = self._x
        for k, uk in enumerate(u):
            y_lin = (c @ x)[0, 0] + d * uk if self.model.order else d * uk
            y_nl = y_lin
            if cfg.cubic_stiffness_gain:
                y_nl = y_nl - (cfg.cubic_stiffness_gain * y_lin ** 3
                               / cfg.amplitude_scale ** 2)
            if cfg.friction_coefficient:
                y_nl = y_nl - cfg.friction_coefficient * np.sign(
                    y_lin - self._y_lin_prev)
            self._y_lin_prev = y_lin
            y[k] = y_nl
            if self.model.order:
                x = a @ x + b * uk
        self._x = x
        measured = y.copy()
        if cfg.noise_sigma > 0:
            measured = measured + cfg.noise_sigma * self._rng.standard_normal(
                self.batch_len)
        self._true.append(y)
        self._measured.append(measured)
        return Batch(u_batch.index, y)

    def fetch_measurement(self, j: int) -> Batch | None:
        """Measured batch j, or None while the acquisition delay still hides it.

        Asking for a batch that can never exist (negative index) is an error;
        asking too early is not.
        """
        if j < 0:
            raise PlantError(f"batch {j} was never produced")
        if j + self.config.delay_batches >= self.batches_commanded:
            return None
        return Batch(j, self._measured[j].copy())

    def true_series(self) -> np.ndarray:
        return (np.concatenate(self._true) if self._true
                else np.zeros(0))

    def measured_series(self) -> np.ndarray:
        return (np.concatenate(self._measured) if self._measured
                else np.zeros(0))
