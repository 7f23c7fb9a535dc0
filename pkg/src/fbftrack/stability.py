"""Closed-loop stability monitoring for the learned-correction controller.

The per-window control law plus the correction model's own feedback (its
error tail is reconstructed from predictions once the loop is closed) form a
linear window-to-window state recursion

    x[j+1] = A x[j] + B u[j],    u[j] = K x[j] + M yd[j]

over the state [yh(j-2), yh(j-1), yh(j), ypb(j-2), ypb(j-1), ypb(j),
gamma_past, 1]. While the weights are frozen this rewrite reproduces the live
controller exactly, so the spectral radius of (A + B K) predicts divergence
before it shows up in the commanded inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .basis import BasisSet
from .hybrid import DataDrivenLift


#: radius >= threshold yields "warning"; >= 1 yields "alarm"
DEFAULT_THRESHOLD = 0.97


def pseudo_inverse(mat: np.ndarray, rcond: float = 1e-10):
    """SVD pseudoinverse with a relative singular-value threshold.

    Returns (pinv, effective_rank). Shared by the window optimizer and the
    closed-loop assembly so both use the same M operator.
    """
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    cutoff = rcond * s[0] if s.size else 0.0
    rank = int(np.sum(s > cutoff))
    inv = np.zeros_like(s)
    inv[:rank] = 1.0 / s[:rank]
    return (vt.T * inv) @ u.T, rank


@dataclass
class ClosedLoopSystem:
    """Assembled window-to-window dynamics with the bias state held at 1.

    The bias row keeps affine terms alive during propagation; the spectral
    radius is evaluated on the dynamic core (all states but the bias), whose
    eigenvalues are unaffected by the bias column.
    """

    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    m: np.ndarray
    batch_len: int
    n_p: int
    n_c: int
    window_index: int = -1
    spectral_radius: float | None = None

    @property
    def state_dim(self) -> int:
        return 6 * self.batch_len + self.n_p + 1

    def closed_loop_matrix(self) -> np.ndarray:
        return self.a + self.b @ self.k

    def propagate(self, x: np.ndarray, y_d_window: np.ndarray) -> np.ndarray:
        return self.closed_loop_matrix() @ x + self.b @ (self.m @ y_d_window)


def assemble_closed_loop(lift: DataDrivenLift, basis: BasisSet,
                         pinv: np.ndarray | None = None,
                         window_index: int = -1) -> ClosedLoopSystem:
    """Build A, B, K, M from a window-scope lift and the basis blocks.

    ``pinv`` lets the caller pass the pseudoinverse of (l_a @ psit_c) it
    already computed for the control solve, keeping M bit-identical to the
    operator the controller used.
    """
    if lift.scope != "window":
        raise ValueError("closed-loop assembly needs a window-scope lift")
    nw = lift.l_a.shape[0]
    n = nw // 2
    if lift.l_uy.shape[1] != nw:
        raise ValueError("lift past-prediction block does not match 2 batches")
    p = lift.l_ue.shape[1]
    if p > n:
        raise ValueError("error tail longer than one batch cannot be "
                         "represented in the closed-loop state")
    n_p, n_c = basis.n_p, basis.n_c
    if basis.psit_c.shape != (nw, n_c):
        raise ValueError("basis blocks do not match the lift window size")
    a_eff = lift.l_a @ basis.psit_c
    if pinv is None:
        pinv, _ = pseudo_inverse(a_eff)
    dim = 6 * n + n_p + 1
    blk = [slice(i * n, (i + 1) * n) for i in range(6)]
    gam = slice(6 * n, 6 * n + n_p)
    bias = 6 * n + n_p
    # error tail reconstructed from the stored batch (j-2): last p entries of
    # (yh(j-2) - ypb(j-2))
    sel = np.zeros((p, n))
    sel[:, n - p:] = np.eye(p)
    from_yh2 = lift.l_ue @ sel
    from_ypb2 = lift.l_uy[:, :n] - from_yh2
    from_ypb1 = lift.l_uy[:, n:]
    from_gamma = lift.l_a @ basis.psit_pc
    a = np.zeros((dim, dim))
    b = np.zeros((dim, n_c))
    k = np.zeros((n_c, dim))
    a[blk[0], blk[1]] = np.eye(n)
    for half, rows in enumerate((blk[1], blk[2])):
        r = slice(half * n, (half + 1) * n)
        a[rows, blk[0]] = from_yh2[r]
        a[rows, blk[3]] = from_ypb2[r]
        a[rows, blk[4]] = from_ypb1[r]
        a[rows, gam] = from_gamma[r]
        a[rows, bias] = lift.l_u1[r]
        b[rows, :] = a_eff[r]
    a[blk[3], blk[4]] = np.eye(n)
    a[blk[4], gam] = basis.psit_pc[:n]
    a[blk[5], gam] = basis.psit_pc[n:]
    b[blk[4], :] = basis.psit_c[:n]
    b[blk[5], :] = basis.psit_c[n:]
    # coefficient shift register: gamma_past' = [gamma_past; gamma_c][nb:nb+np]
    n_b = n_c // 2
    for t in range(n_p):
        src = n_b + t
        if src < n_p:
            a[6 * n + t, 6 * n + src] = 1.0
        else:
            b[6 * n + t, src - n_p] = 1.0
    a[bias, bias] = 1.0
    k[:, blk[0]] = -pinv @ from_yh2
    k[:, blk[3]] = -pinv @ from_ypb2
    k[:, blk[4]] = -pinv @ from_ypb1
    k[:, gam] = -pinv @ from_gamma
    k[:, bias] = -pinv @ lift.l_u1
    return ClosedLoopSystem(a=a, b=b, k=k, m=pinv, batch_len=n, n_p=n_p,
                            n_c=n_c, window_index=window_index)


def _dense_radius(core: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(core)).max())


def _arpack_radius(core: np.ndarray) -> float:
    vals = spla.eigs(core, k=1, which="LM", return_eigenvectors=False,
                     maxiter=core.shape[0] * 40, tol=1e-9)
    return float(np.abs(vals).max())


def spectral_radius(system: ClosedLoopSystem, method: str = "auto") -> float:
    """Largest eigenvalue modulus of the closed-loop dynamic core.

    ``method`` is "auto" (iterative fast path with dense fallback), "dense"
    (reference eigendecomposition), or "iterative". If every solver fails the
    radius is reported as +inf, which reads as an alarm.
    """
    core = system.closed_loop_matrix()[:-1, :-1]
    if method == "dense":
        rho = _dense_radius(core)
    elif method == "iterative":
        rho = _arpack_radius(core)
    elif method == "auto":
        if core.shape[0] < 24:
            rho = _dense_radius(core)
        else:
            try:
                rho = _arpack_radius(core)
            except (spla.ArpackNoConvergence, spla.ArpackError):
                try:
                    rho = _dense_radius(core)
                except np.linalg.LinAlgError:
                    rho = float("inf")
    else:
        raise ValueError(f"unknown method {method!r}")
    system.spectral_radius = rho
    return rho


def check_stability(radius: float,
                    threshold: float = DEFAULT_THRESHOLD) -> str:
    """Classify a spectral radius: 'stable', 'warning', or 'alarm'."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    if radius >= 1.0 or not np.isfinite(radius):
        return "alarm"
    if radius >= threshold:
        return "warning"
    return "stable"
