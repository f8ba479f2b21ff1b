"""Neighbor-difference analysis operator D and the augmented system.

The channel h is not sparse itself but its horizontal/vertical neighbor
differences d = D h are. SCAMPI therefore runs AMP on the stacked system

    [r]   [W  0 ] [h]
    [0] = [D -I ] [d] + noise,

where the block operator is never materialized: W routes through the fast
Hadamard path, D is a pair of edge index arrays, and -I is implicit.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .selection import Measurement, SelectionNetwork


@dataclass
class DifferenceOperator:
    """All horizontal, then all vertical neighbor differences, row-major scan.

    Row k of D has +1 at column ei[k] and -1 at column ej[k].
    """

    M: int
    N: int
    ei: np.ndarray
    ej: np.ndarray

    @property
    def edge_count(self) -> int:
        return self.ei.size

    @property
    def MN(self) -> int:
        return self.M * self.N

    def apply(self, h: np.ndarray) -> np.ndarray:
        """D @ h."""
        return kernels.edge_apply(np.ascontiguousarray(h, np.float64), self.ei, self.ej)

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        return kernels.edge_apply_t(np.ascontiguousarray(y, np.float64),
                                    self.ei, self.ej, self.MN)

    def apply_squared(self, x: np.ndarray) -> np.ndarray:
        """(D * D) @ x; squared entries are all 1, so this sums the two endpoints."""
        return kernels.edge_abs_apply(np.ascontiguousarray(x, np.float64), self.ei, self.ej)

    def apply_squared_transpose(self, y: np.ndarray) -> np.ndarray:
        return kernels.edge_abs_apply_t(np.ascontiguousarray(y, np.float64),
                                        self.ei, self.ej, self.MN)

    def _sparse(self, lo: int, hi: int):
        from scipy.sparse import csr_matrix
        k = hi - lo
        data = np.tile(np.array([1.0, -1.0]), k)
        indices = np.stack([self.ei[lo:hi], self.ej[lo:hi]], axis=1).reshape(-1)
        indptr = np.arange(0, 2 * k + 1, 2)
        return csr_matrix((data, indices, indptr), shape=(k, self.MN))

    @property
    def D_h(self):
        return self._sparse(0, self.M * (self.N - 1))

    @property
    def D_v(self):
        return self._sparse(self.M * (self.N - 1), self.edge_count)

    @property
    def D(self):
        return self._sparse(0, self.edge_count)


def build_difference_operator(M: int, N: int) -> DifferenceOperator:
    """Edge list of the M x N grid: |E| = M(N-1) + N(M-1)."""
    if M < 1 or N < 1:
        raise ValueError(f"grid must be at least 1x1, got {M}x{N}")
    idx = np.arange(M * N, dtype=np.int64).reshape(M, N)
    hi = idx[:, :-1].reshape(-1)
    hj = idx[:, 1:].reshape(-1)
    vi = idx[:-1, :].reshape(-1)
    vj = idx[1:, :].reshape(-1)
    ei = np.ascontiguousarray(np.concatenate([hi, vi]))
    ej = np.ascontiguousarray(np.concatenate([hj, vj]))
    return DifferenceOperator(M=M, N=N, ei=ei, ej=ej)


def save_difference_coo(diff: DifferenceOperator, path):
    """Coordinate triplets ``row col value``, one entry per line."""
    with open(path, "w") as f:
        for k in range(diff.edge_count):
            f.write(f"{k} {diff.ei[k]} 1\n")
            f.write(f"{k} {diff.ej[k]} -1\n")


@dataclass
class AugmentedSystem:
    """Structured operator [[W, 0], [D, -I]] with its stacked observation."""

    net: SelectionNetwork
    diff: DifferenceOperator
    r_aug: np.ndarray
    Delta: float = 0.0
    snr_db: float | None = None

    @property
    def Q(self) -> int:
        return self.net.Q

    @property
    def MN(self) -> int:
        return self.net.MN

    @property
    def E(self) -> int:
        return self.diff.edge_count

    @property
    def n_rows(self) -> int:
        return self.Q + self.E

    @property
    def n_cols(self) -> int:
        return self.MN + self.E

    @property
    def dims(self) -> dict:
        return {"Q": self.Q, "MN": self.MN, "E": self.E,
                "rows": self.n_rows, "cols": self.n_cols}

    def split_cols(self, x: np.ndarray):
        return x[:self.MN], x[self.MN:]

    def split_rows(self, y: np.ndarray):
        return y[:self.Q], y[self.Q:]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """[[W, 0], [D, -I]] @ [h; d]."""
        x = np.ascontiguousarray(x, np.float64)
        if x.size != self.n_cols:
            raise ValueError(f"expected length {self.n_cols}, got {x.size}")
        h, d = self.split_cols(x)
        return np.concatenate([self.net.apply(h), self.diff.apply(h) - d])

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(y, np.float64)
        if y.size != self.n_rows:
            raise ValueError(f"expected length {self.n_rows}, got {y.size}")
        yr, yd = self.split_rows(y)
        top = self.net.apply_transpose(yr) + self.diff.apply_transpose(yd)
        return np.concatenate([top, -yd])

    def apply_squared(self, x: np.ndarray) -> np.ndarray:
        """Elementwise-squared operator times x; the -I block squares to +I."""
        x = np.ascontiguousarray(x, np.float64)
        if x.size != self.n_cols:
            raise ValueError(f"expected length {self.n_cols}, got {x.size}")
        h, d = self.split_cols(x)
        return np.concatenate([self.net.apply_squared(h),
                               self.diff.apply_squared(h) + d])

    def apply_squared_transpose(self, y: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(y, np.float64)
        if y.size != self.n_rows:
            raise ValueError(f"expected length {self.n_rows}, got {y.size}")
        yr, yd = self.split_rows(y)
        top = self.net.apply_squared_transpose(yr) + self.diff.apply_squared_transpose(yd)
        return np.concatenate([top, yd.copy()])

    def toarray(self) -> np.ndarray:
        """Dense stacked operator for small-instance cross-checks."""
        W = self.net.toarray()
        D = self.diff.D.toarray()
        top = np.hstack([W, np.zeros((self.Q, self.E))])
        bot = np.hstack([D, -np.eye(self.E)])
        return np.vstack([top, bot])


def augment(net: SelectionNetwork, diff: DifferenceOperator,
            meas: Measurement) -> AugmentedSystem:
    if net.MN != diff.MN:
        raise ValueError(f"network covers {net.MN} antennas, grid has {diff.MN}")
    r = np.ascontiguousarray(meas.r, np.float64)
    if r.size != net.Q:
        raise ValueError(f"measurement length {r.size} does not match Q={net.Q}")
    r_aug = np.concatenate([r, np.zeros(diff.edge_count)])
    return AugmentedSystem(net=net, diff=diff, r_aug=r_aug,
                           Delta=meas.Delta, snr_db=meas.snr_db)
