"""B-spline basis construction, model filtering, and window partitioning.

The control input is parameterized as a combination of uniform B-splines, one
coefficient per ``knot_spacing`` time steps. Filtering each basis function
through the plant model and restricting to a two-batch window yields the
blocks consumed by the window optimizer:

* ``psi_c`` / ``psit_c``       current-window functions, raw and filtered
* ``psi_pc`` / ``psit_pc``     past functions whose support still reaches the
                               window, raw and filtered

Because the batch length is a multiple of the knot spacing, these blocks are
identical for every window in the steady (uniform-knot) region, so they are
built once and reused for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lifted import DiscreteStateSpace, impulse_response, lifted_filter


class BasisError(ValueError):
    """Raised for unusable basis configurations or degenerate filtered blocks."""


MAX_CONDITION = 1e8


@dataclass(frozen=True)
class BasisConfig:
    """Spline degree, knot spacing (steps), batch and window lengths (steps)."""

    degree: int
    knot_spacing: int
    batch_len: int
    window_len: int

    def __post_init__(self):
        if self.degree < 1:
            raise BasisError("degree must be >= 1")
        if self.knot_spacing < 1:
            raise BasisError("knot spacing must be >= 1")
        if self.window_len != 2 * self.batch_len:
            raise BasisError("window length must be twice the batch length")
        if self.batch_len % self.knot_spacing != 0:
            raise BasisError(
                "batch length must be a multiple of the knot spacing "
                "(otherwise the filtered blocks vary from window to window)"
            )

    @property
    def support_len(self) -> int:
        """Support of one basis function in time steps."""
        return (self.degree + 1) * self.knot_spacing

    @property
    def n_past(self) -> int:
        """Past coefficients whose support crosses the window start."""
        return self.degree + 1

    @property
    def n_current(self) -> int:
        """Coefficients introduced within one window."""
        return self.window_len // self.knot_spacing

    @property
    def coeffs_per_batch(self) -> int:
        return self.batch_len // self.knot_spacing


def bspline_value(knots: np.ndarray, index: int, degree: int, t: float) -> float:
    """Cox-de Boor evaluation of one B-spline at scalar t."""
    if degree == 0:
        return 1.0 if knots[index] <= t < knots[index + 1] else 0.0
    value = 0.0
    den_left = knots[index + degree] - knots[index]
    if den_left > 0.0:
        value += (t - knots[index]) / den_left * bspline_value(
            knots, index, degree - 1, t)
    den_right = knots[index + degree + 1] - knots[index + 1]
    if den_right > 0.0:
        value += (knots[index + degree + 1] - t) / den_right * bspline_value(
            knots, index + 1, degree - 1, t)
    return value


@dataclass(frozen=True)
class SampledBasis:
    """Basis matrix sampled on the step grid, with per-column support bounds."""

    matrix: np.ndarray          # (horizon, n_functions)
    support_start: np.ndarray   # (n_functions,) in steps
    support_end: np.ndarray     # (n_functions,) exclusive, in steps

    @property
    def horizon(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_functions(self) -> int:
        return self.matrix.shape[1]


def build_bspline_basis(config: BasisConfig, horizon: int) -> SampledBasis:
    """Clamped uniform B-spline basis sampled at integer time steps.

    End knots are repeated so boundary values are exactly representable and
    the partition of unity holds over the whole horizon.
    """
    d, m = config.degree, config.knot_spacing
    if horizon < config.support_len:
        raise BasisError(
            f"horizon {horizon} shorter than one basis support "
            f"({config.support_len} steps)"
        )
    span_end = int(np.ceil(horizon / m)) * m
    interior = np.arange(0, span_end + m, m, dtype=float)
    knots = np.concatenate([np.zeros(d), interior, np.full(d, span_end)])
    n_funcs = knots.size - d - 1
    grid = np.arange(horizon, dtype=float)
    matrix = np.zeros((horizon, n_funcs))
    starts = np.zeros(n_funcs, dtype=int)
    ends = np.zeros(n_funcs, dtype=int)
    for i in range(n_funcs):
        lo, hi = knots[i], knots[i + d + 1]
        starts[i] = int(lo)
        ends[i] = int(hi)
        sel = (grid >= lo) & (grid < hi)
        matrix[sel, i] = [bspline_value(knots, i, d, t) for t in grid[sel]]
    return SampledBasis(matrix, starts, ends)


@lru_cache(maxsize=32)
def _uniform_bump(degree: int, spacing: int) -> np.ndarray:
    """One interior (uniform-knot) basis function sampled over its support."""
    width = (degree + 1) * spacing
    knots = np.arange(0, width + spacing, spacing, dtype=float)
    return np.array([bspline_value(knots, 0, degree, float(t))
                     for t in range(width)])


@dataclass(frozen=True)
class BasisSet:
    """Raw and filtered window blocks plus the conditioning of the filtered
    current block (the optimizer's pseudoinverse operand)."""

    psi_c: np.ndarray
    psi_pc: np.ndarray
    psit_c: np.ndarray
    psit_pc: np.ndarray
    n_c: int
    n_p: int
    condition_number: float


def _check_current_block(psit_c: np.ndarray, n_c: int) -> float:
    sv = np.linalg.svd(psit_c, compute_uv=False)
    if sv[-1] <= 0.0 or sv.size < n_c:
        raise BasisError(
            f"filtered current block is rank deficient; singular values {sv}")
    cond = float(sv[0] / sv[-1])
    if cond > MAX_CONDITION:
        raise BasisError(
            f"filtered current block condition number {cond:.3e} exceeds "
            f"{MAX_CONDITION:.0e}; singular values {sv}")
    return cond


def filter_and_partition(basis: SampledBasis, model: DiscreteStateSpace,
                         config: BasisConfig, window_index: int) -> BasisSet:
    """Filter a sampled basis through the model and extract window blocks.

    The window must sit in the steady region: at least one support width after
    the horizon start, and fully covered (plus one support width) before the
    horizon end. Within that region the returned blocks do not depend on
    ``window_index``.
    """
    n, nw = config.batch_len, config.window_len
    start = window_index * n
    if start < config.support_len + config.knot_spacing:
        raise BasisError(
            f"window {window_index} starts inside the clamped boundary region")
    if start + nw + config.support_len > basis.horizon:
        raise BasisError(
            f"window {window_index} reaches the end of the sampled horizon")
    h = impulse_response(model, basis.horizon)
    past_cols = [i for i in range(basis.n_functions)
                 if start - config.support_len <= basis.support_start[i] < start]
    curr_cols = [i for i in range(basis.n_functions)
                 if start <= basis.support_start[i] < start + nw]
    if len(past_cols) != config.n_past or len(curr_cols) != config.n_current:
        raise BasisError(
            f"window {window_index}: found {len(past_cols)} past / "
            f"{len(curr_cols)} current supports, expected "
            f"{config.n_past} / {config.n_current}")
    rows = slice(start, start + nw)
    psi_pc = basis.matrix[rows][:, past_cols]
    psi_c = basis.matrix[rows][:, curr_cols]
    filt = np.column_stack([
        lifted_filter(h, basis.matrix[:, i]) for i in past_cols + curr_cols])
    psit_pc = filt[rows][:, :len(past_cols)]
    psit_c = filt[rows][:, len(past_cols):]
    cond = _check_current_block(psit_c, config.n_current)
    return BasisSet(psi_c=psi_c, psi_pc=psi_pc, psit_c=psit_c,
                    psit_pc=psit_pc, n_c=config.n_current,
                    n_p=config.n_past, condition_number=cond)


def steady_window_blocks(config: BasisConfig,
                         model: DiscreteStateSpace) -> BasisSet:
    """Window blocks for the steady (uniform-knot) region, built directly.

    Every column is a shifted copy of the single uniform basis function (raw)
    or of its filtered-from-rest response, so the construction is manifestly
    window invariant. Matches :func:`filter_and_partition` evaluated at any
    steady window index.
    """
    d, m = config.degree, config.knot_spacing
    nw = config.window_len
    n_p, n_c = config.n_past, config.n_current
    width = config.support_len
    span = n_p * m + nw
    bump = _uniform_bump(d, m)
    h = impulse_response(model, span)
    resp = lifted_filter(h, np.concatenate([bump, np.zeros(span - width)]))
    bump_pad = np.zeros(span)
    bump_pad[:width] = bump
    psi_pc = np.zeros((nw, n_p))
    psit_pc = np.zeros((nw, n_p))
    for t in range(n_p):
        age = (n_p - t) * m   # offset of this past function before the window
        psi_pc[:, t] = bump_pad[age:age + nw]
        psit_pc[:, t] = resp[age:age + nw]
    psi_c = np.zeros((nw, n_c))
    psit_c = np.zeros((nw, n_c))
    for cix in range(n_c):
        off = cix * m
        psi_c[off:, cix] = bump_pad[:nw - off]
        psit_c[off:, cix] = resp[:nw - off]
    cond = _check_current_block(psit_c, n_c)
    return BasisSet(psi_c=psi_c, psi_pc=psi_pc, psit_c=psit_c,
                    psit_pc=psit_pc, n_c=n_c, n_p=n_p,
                    condition_number=cond)
