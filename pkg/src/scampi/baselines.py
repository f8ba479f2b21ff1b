"""Reference estimators: support detection + LS, plain LS, and OMP.

All of them work on the raw compressed measurement r = W h + n (no
augmented system); supports index into the row-major channel vector.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import EstimationReport
from .selection import Measurement, SelectionNetwork


class RankDeficiencyWarning(UserWarning):
    """Restricted LS system was rank deficient; minimum-norm solution used."""


@dataclass
class SupportSet:
    """Channel-vector positions plus the per-path squares that produced them."""

    indices: np.ndarray
    per_path_squares: list

    def __post_init__(self):
        self.indices = np.unique(np.asarray(self.indices, dtype=np.int64))


def _solve_support(net: SelectionNetwork, r: np.ndarray, idx: np.ndarray):
    """Minimum-norm LS on the support columns.

    Solved by SVD (lstsq), which on rank-deficient systems returns the
    minimum-norm solution, i.e. the ridge-regularized solve in the limit of
    vanishing ridge; deficiency is reported to the caller.
    """
    if idx.size == 0:
        return np.zeros(0), False
    Wsub = net.columns(idx)
    coef, _, rank, _ = np.linalg.lstsq(Wsub, r, rcond=None)
    return coef, rank < min(Wsub.shape)


def _square_block(center: int, square: int, M: int, N: int) -> np.ndarray:
    """Flat indices of a square block around ``center``, shifted (not shrunk)
    to stay inside the grid; sides clip only when the grid itself is smaller."""
    row, col = divmod(center, N)
    sr = min(square, M)
    sc = min(square, N)
    r0 = min(max(row - (sr - 1) // 2, 0), M - sr)
    c0 = min(max(col - (sc - 1) // 2, 0), N - sc)
    rr = np.arange(r0, r0 + sr)
    cc = np.arange(c0, c0 + sc)
    return (rr[:, None] * N + cc[None, :]).reshape(-1)


def sd_estimate(meas: Measurement, net: SelectionNetwork, L: int, square: int,
                shape: tuple, truth=None) -> EstimationReport:
    """Support detection: per path, matched-filter detect the strongest
    remaining component, add a square of indices around it, LS-refit on the
    accumulated support and subtract; final LS on the union support.
    """
    if square < 1:
        raise ValueError("square side must be >= 1")
    if L < 0:
        raise ValueError("path count must be >= 0")
    M, N = shape
    if M * N != net.MN:
        raise ValueError(f"shape {shape} does not match network MN={net.MN}")
    r = np.asarray(meas.r, dtype=np.float64)
    residual = r.copy()
    mask = np.zeros(net.MN, dtype=bool)
    squares = []
    coef = np.zeros(0)
    idx = np.zeros(0, dtype=np.int64)
    rank_def = False
    for _ in range(L + 1):
        corr = net.apply_transpose(residual)
        center = int(np.argmax(np.abs(corr)))
        mask[_square_block(center, square, M, N)] = True
        squares.append((center, square))
        idx = np.flatnonzero(mask)
        coef, rd = _solve_support(net, r, idx)
        rank_def = rank_def or rd
        residual = r - net.columns(idx) @ coef
    if rank_def:
        warnings.warn("support LS was rank deficient", RankDeficiencyWarning)
    h_est = np.zeros(net.MN)
    h_est[idx] = coef
    nmse = None
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64).reshape(-1)
        err = h_est - truth
        nmse = float(err @ err) / float(truth @ truth)
    return EstimationReport(h_est=h_est, d_est=None, iterations=L + 1,
                            converged=True, nmse=nmse, tau_trace=[],
                            rank_deficient=rank_def)


def ls_estimate(meas: Measurement, net: SelectionNetwork,
                support=None) -> np.ndarray:
    """Minimum-norm least squares restricted to ``support`` (default: all)."""
    r = np.asarray(meas.r, dtype=np.float64)
    if support is None:
        idx = np.arange(net.MN, dtype=np.int64)
    elif isinstance(support, SupportSet):
        idx = support.indices
    else:
        idx = np.unique(np.asarray(support, dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= net.MN):
        raise ValueError("support indices out of range")
    coef, rank_def = _solve_support(net, r, idx)
    if rank_def:
        warnings.warn("support LS was rank deficient", RankDeficiencyWarning)
    h_est = np.zeros(net.MN)
    h_est[idx] = coef
    return h_est


def omp_estimate(meas: Measurement, net: SelectionNetwork, sparsity: int,
                 truth=None) -> EstimationReport:
    """Orthogonal matching pursuit: greedy atom picks with per-step LS refit."""
    if not 0 <= sparsity <= net.Q:
        raise ValueError(f"need 0 <= sparsity <= Q={net.Q}, got {sparsity}")
    r = np.asarray(meas.r, dtype=np.float64)
    residual = r.copy()
    chosen: list = []
    coef = np.zeros(0)
    rank_def = False
    for _ in range(sparsity):
        corr = net.apply_transpose(residual)
        corr[chosen] = 0.0
        chosen.append(int(np.argmax(np.abs(corr))))
        idx = np.asarray(sorted(chosen), dtype=np.int64)
        coef, rd = _solve_support(net, r, idx)
        rank_def = rank_def or rd
        residual = r - net.columns(idx) @ coef
    h_est = np.zeros(net.MN)
    if chosen:
        h_est[np.asarray(sorted(chosen), dtype=np.int64)] = coef
    nmse = None
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64).reshape(-1)
        err = h_est - truth
        nmse = float(err @ err) / float(truth @ truth)
    return EstimationReport(h_est=h_est, d_est=None, iterations=sparsity,
                            converged=True, nmse=nmse, tau_trace=[],
                            rank_deficient=rank_def)
