"""Discrete LTI model handling: ZOH discretization, simulation, lifted filtering.

All signals are sampled at a fixed interval ``ts``. Models are SISO and must
be stable; the rest of the package builds its filtered-basis machinery on the
impulse responses produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


class ModelError(ValueError):
    """Raised for transfer functions or realizations the pipeline cannot use."""


@dataclass(frozen=True)
class ContinuousTransferFunction:
    """Proper SISO transfer function, coefficients in descending powers of s."""

    num: np.ndarray
    den: np.ndarray

    def __init__(self, num, den):
        num = np.atleast_1d(np.asarray(num, dtype=float))
        den = np.atleast_1d(np.asarray(den, dtype=float))
        num = np.trim_zeros(num, "f")
        if num.size == 0:
            num = np.zeros(1)
        if den.size == 0 or den[0] == 0.0:
            raise ModelError("denominator leading coefficient must be nonzero")
        if num.size > den.size:
            raise ModelError(
                f"improper transfer function: numerator degree {num.size - 1} "
                f"> denominator degree {den.size - 1}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return self.den.size - 1

    def poles(self) -> np.ndarray:
        if self.order == 0:
            return np.zeros(0, dtype=complex)
        return np.roots(self.den)

    def dc_gain(self) -> float:
        if self.den[-1] == 0.0:
            raise ModelError("transfer function has a pole at s = 0; no DC gain")
        num_dc = self.num[-1] if self.num.size else 0.0
        return float(num_dc / self.den[-1])

    def frequency_response(self, freq_hz: float) -> complex:
        s = 2j * np.pi * freq_hz
        return complex(np.polyval(self.num, s) / np.polyval(self.den, s))


@dataclass(frozen=True)
class DiscreteStateSpace:
    """Stable discrete SISO state-space model (a, b, c, d) at interval ts."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float
    ts: float

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1, 1)
        c = np.asarray(self.c, dtype=float).reshape(1, -1)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", float(self.d))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ModelError("state matrix must be square")
        if n and (b.shape[0] != n or c.shape[1] != n):
            raise ModelError("b/c dimensions do not match the state matrix")
        if self.ts <= 0:
            raise ModelError("sampling interval must be positive")
        if n:
            mags = np.abs(np.linalg.eigvals(a))
            if mags.max() >= 1.0:
                raise ModelError(
                    f"unstable discrete model: |eig| max = {mags.max():.6g} >= 1"
                )

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def dc_gain(self) -> float:
        if self.order == 0:
            return self.d
        n = self.order
        g = self.c @ np.linalg.solve(np.eye(n) - self.a, self.b)
        return float(g[0, 0] + self.d)


def tf_to_state_space(ctf: ContinuousTransferFunction):
    """Controllable canonical realization, scaled by the leading den coefficient."""
    den = ctf.den / ctf.den[0]
    n = den.size - 1
    num_p = np.zeros(n + 1)
    num_scaled = ctf.num / ctf.den[0]
    num_p[n + 1 - num_scaled.size:] = num_scaled
    d = num_p[0]
    num_r = num_p[1:] - d * den[1:]
    a = np.zeros((n, n))
    if n:
        a[0, :] = -den[1:]
        if n > 1:
            a[1:, :-1] = np.eye(n - 1)
    b = np.zeros((n, 1))
    if n:
        b[0, 0] = 1.0
    c = num_r.reshape(1, -1)
    return a, b, c, d


def discretize_zoh(ctf: ContinuousTransferFunction, ts: float) -> DiscreteStateSpace:
    """Exact zero-order-hold discretization of a stable proper transfer function.

    Uses the matrix exponential of the augmented [[A, B], [0, 0]] block, so the
    discrete step response matches the continuous one at the sample instants.

    Raises
    ------
    ModelError
        If ts <= 0 or the continuous poles are not strictly in the left half
        plane (the controller assumes a stable plant model).
    """
    if ts <= 0:
        raise ModelError("sampling interval must be positive")
    poles = ctf.poles()
    if poles.size and poles.real.max() >= 0.0:
        raise ModelError(
            f"unstable continuous model: max Re(pole) = {poles.real.max():.6g} >= 0"
        )
    a, b, c, d = tf_to_state_space(ctf)
    n = a.shape[0]
    if n == 0:
        return DiscreteStateSpace(np.zeros((0, 0)), np.zeros((0, 1)),
                                  np.zeros((1, 0)), d, ts)
    blk = np.zeros((n + 1, n + 1))
    blk[:n, :n] = a * ts
    blk[:n, n:] = b * ts
    e = expm(blk)
    return DiscreteStateSpace(e[:n, :n], e[:n, n:], c, d, ts)


def impulse_response(model: DiscreteStateSpace, n: int) -> np.ndarray:
    """First n samples of the impulse response: h(0)=d, h(k)=c a^(k-1) b."""
    if n < 1:
        raise ValueError("need at least one sample")
    h = np.zeros(n)
    h[0] = model.d
    if model.order == 0:
        return h
    x = model.b.copy()
    for k in range(1, n):
        h[k] = (model.c @ x)[0, 0]
        x = model.a @ x
    return h


def effective_impulse_length(model: DiscreteStateSpace,
                             rel_tol: float = 1e-12,
                             min_time_constants: float = 5.0) -> int:
    """Length after which |h| stays below rel_tol * max|h|.

    Floored at ``min_time_constants`` times the dominant time constant so a
    slowly decaying mode is never truncated early.
    """
    if model.order == 0:
        return 1
    mags = np.abs(np.linalg.eigvals(model.a))
    rho = mags.max()
    if rho <= 0.0:
        floor = model.order + 1
    else:
        tau = -1.0 / np.log(rho)
        floor = int(np.ceil(min_time_constants * tau)) + 1
    chunk = max(floor, 256)
    h = impulse_response(model, chunk)
    peak = np.abs(h).max()
    while True:
        below = np.abs(h) < rel_tol * max(peak, np.finfo(float).tiny)
        # last index still above the threshold
        keep = len(h) - 1
        while keep >= 0 and below[keep]:
            keep -= 1
        if keep < len(h) - 1:
            return max(keep + 1, floor)
        h = impulse_response(model, 2 * len(h))
        peak = np.abs(h).max()
        if len(h) > 10_000_000:  # pragma: no cover - stable models terminate
            raise ModelError("impulse response does not decay")


def simulate(model: DiscreteStateSpace, u: np.ndarray,
             x0: np.ndarray | None = None) -> np.ndarray:
    """State recursion y(k) = c x(k) + d u(k), x(k+1) = a x(k) + b u(k)."""
    u = np.asarray(u, dtype=float)
    y = np.zeros(u.size)
    if model.order == 0:
        return model.d * u
    x = np.zeros((model.order, 1)) if x0 is None else np.asarray(
        x0, dtype=float).reshape(-1, 1).copy()
    a, b, c, d = model.a, model.b, model.c, model.d
    for k, uk in enumerate(u):
        y[k] = (c @ x)[0, 0] + d * uk
        x = a @ x + b * uk
    return y


def lifted_filter(h: np.ndarray, u: np.ndarray,
                  initial_tail: np.ndarray = ()) -> np.ndarray:
    """Convolve input with impulse response h, honoring preceding samples.

    ``initial_tail`` holds the input samples immediately before ``u`` (oldest
    first); an empty tail means zero initial history. Output is aligned with
    ``u``.
    """
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    tail = np.asarray(initial_tail, dtype=float)
    x = np.concatenate([tail, u]) if tail.size else u
    full = np.convolve(x, h)
    return full[tail.size:tail.size + u.size]


@dataclass(frozen=True)
class LiftedOperator:
    """Toeplitz convolution operator on a finite horizon.

    ``row_offset`` is the time-step offset between input sample 0 and output
    sample 0; entries with output index < input index + offset are zero
    (causality), and entries depend only on the index difference.
    """

    matrix: np.ndarray
    row_offset: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        rows, cols = m.shape
        ri = np.arange(rows)[:, None]
        ci = np.arange(cols)[None, :]
        if np.any(m[ri + self.row_offset < ci] != 0.0):
            raise ModelError("lifted operator is not causal")
        if rows > 1 and cols > 1 and not np.array_equal(m[1:, 1:], m[:-1, :-1]):
            raise ModelError("lifted operator is not Toeplitz")

    @classmethod
    def from_impulse(cls, h: np.ndarray, rows: int,
                     cols: int | None = None) -> "LiftedOperator":
        h = np.asarray(h, dtype=float)
        cols = rows if cols is None else cols
        m = np.zeros((rows, cols))
        for c in range(cols):
            ln = min(h.size, rows - c)
            if ln > 0:
                m[c:c + ln, c] = h[:ln]
        return cls(m, 0)

    @classmethod
    def from_model(cls, model: DiscreteStateSpace, rows: int,
                   cols: int | None = None) -> "LiftedOperator":
        n = min(rows, effective_impulse_length(model))
        return cls.from_impulse(impulse_response(model, n), rows, cols)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(u, dtype=float)
