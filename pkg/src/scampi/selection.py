"""Phase-shifter selection network W and compressed measurements.

W consists of Q distinct rows of a row/column-permuted Hadamard matrix of
order pad (the next power of two >= MN; extra columns are dropped after the
permutation), scaled by 1/sqrt(MN). It is never materialized on the hot
path: matvecs route through the fast Walsh-Hadamard transform and squared
matvecs reduce to scaled sums because every unmasked entry is +-1/sqrt(MN).

Phase-shifter reduction zeroes an exact count of uniformly chosen entries;
the zeroed entries are carried as a sparse correction subtracted from the
dense-Hadamard transform result.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

_MASK_TAG = 0x6D61736B  # derives the reduction stream from the network seed
_DENSE_LIMIT = 1 << 24


@dataclass
class SelectionNetwork:
    """Q x MN combiner with {0, +-1} entries (scaled by 1/sqrt(MN))."""

    Q: int
    MN: int
    seed: int
    pad: int
    row_sel: np.ndarray
    col_perm: np.ndarray
    scale: float
    p: float = 0.0
    off_rows: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    off_cols: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    off_vals: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    mask_seed: int | None = None

    def __post_init__(self):
        self._off_by_col = None

    # -- fast operator primitives -------------------------------------

    def apply(self, h: np.ndarray) -> np.ndarray:
        """W @ h."""
        h = np.ascontiguousarray(h, dtype=np.float64)
        if h.size != self.MN:
            raise ValueError(f"expected length {self.MN}, got {h.size}")
        y = self.scale * kernels.hadamard_project(h, self.col_perm, self.row_sel, self.pad)
        if self.off_rows.size:
            y -= kernels.coo_apply(self.off_rows, self.off_cols, self.off_vals, h, self.Q)
        return y

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        """W.T @ y."""
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.size != self.Q:
            raise ValueError(f"expected length {self.Q}, got {y.size}")
        x = self.scale * kernels.hadamard_backproject(y, self.row_sel, self.col_perm, self.pad)
        if self.off_rows.size:
            x -= kernels.coo_apply_t(self.off_rows, self.off_cols, self.off_vals, y, self.MN)
        return x

    def apply_squared(self, x: np.ndarray) -> np.ndarray:
        """(W * W) @ x with elementwise squares; every live entry squares to scale^2."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.size != self.MN:
            raise ValueError(f"expected length {self.MN}, got {x.size}")
        out = np.full(self.Q, self.scale ** 2 * float(np.sum(x)))
        if self.off_rows.size:
            out -= kernels.coo_apply(self.off_rows, self.off_cols,
                                     np.full(self.off_rows.size, self.scale ** 2),
                                     x, self.Q)
        return out

    def apply_squared_transpose(self, y: np.ndarray) -> np.ndarray:
        """(W * W).T @ y."""
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.size != self.Q:
            raise ValueError(f"expected length {self.Q}, got {y.size}")
        out = np.full(self.MN, self.scale ** 2 * float(np.sum(y)))
        if self.off_rows.size:
            out -= kernels.coo_apply_t(self.off_rows, self.off_cols,
                                       np.full(self.off_rows.size, self.scale ** 2),
                                       y, self.MN)
        return out

    # -- explicit entry access (tests and baselines) --------------------

    def columns(self, idx) -> np.ndarray:
        """Dense Q x len(idx) submatrix of W at the requested channel indices."""
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        hcols = self.col_perm[idx]
        parity = np.bitwise_count(self.row_sel[:, None] & hcols[None, :]).astype(np.int64) & 1
        sub = self.scale * (1.0 - 2.0 * parity)
        if self.off_rows.size:
            if self._off_by_col is None:
                order = np.argsort(self.off_cols, kind="stable")
                self._off_by_col = (self.off_cols[order], self.off_rows[order])
            sc, sr = self._off_by_col
            for k, j in enumerate(idx):
                lo = np.searchsorted(sc, j, side="left")
                hi = np.searchsorted(sc, j, side="right")
                sub[sr[lo:hi], k] = 0.0
        return sub

    def toarray(self) -> np.ndarray:
        if self.Q * self.MN > _DENSE_LIMIT:
            raise ValueError("network too large to materialize; use apply()")
        return self.columns(np.arange(self.MN))

    @property
    def W(self) -> np.ndarray:
        return self.toarray()

    @property
    def mask(self) -> np.ndarray:
        """Boolean connectivity; False exactly where an entry was switched off."""
        if self.Q * self.MN > _DENSE_LIMIT:
            raise ValueError("network too large to materialize; use off_rows/off_cols")
        m = np.ones((self.Q, self.MN), dtype=bool)
        m[self.off_rows, self.off_cols] = False
        return m

    def descriptor(self) -> dict:
        """Compact {seed, Q, MN, p} form that regenerates the network bit-exactly."""
        if self.mask_seed is not None:
            raise ValueError("network was reduced with an explicit seed; "
                             "descriptor covers only the derived-seed path")
        return {"seed": int(self.seed), "Q": int(self.Q),
                "MN": int(self.MN), "p": float(self.p)}


@dataclass(frozen=True)
class Measurement:
    """Observation r = W h + n with recorded noise variance."""

    r: np.ndarray
    Delta: float
    snr_db: float | None


def build_hadamard_selection(Q: int, MN: int, seed: int) -> SelectionNetwork:
    """Draw Q distinct rows of a row/column-permuted order-pad Hadamard matrix.

    Non-power-of-two MN pads to the next power of two and keeps the first MN
    permuted columns; the power-of-two case (every square benchmark grid) is
    exact and has orthonormal rows after the 1/sqrt(MN) scaling.
    """
    if MN < 1 or Q < 1 or Q > MN:
        raise ValueError(f"need 1 <= Q <= MN, got Q={Q}, MN={MN}")
    if seed is None:
        raise ValueError("selection network requires an integer seed")
    pad = 1 << (MN - 1).bit_length()
    rng = np.random.default_rng(seed)
    row_sel = np.ascontiguousarray(rng.permutation(pad)[:Q].astype(np.int64))
    col_perm = np.ascontiguousarray(rng.permutation(pad)[:MN].astype(np.int64))
    return SelectionNetwork(Q=Q, MN=MN, seed=int(seed), pad=pad,
                            row_sel=row_sel, col_perm=col_perm,
                            scale=1.0 / np.sqrt(MN))


def reduce_phase_shifters(net: SelectionNetwork, p: float,
                          seed: int | None = None) -> SelectionNetwork:
    """Switch off exactly floor(p * Q * MN) uniformly random phase shifters.

    Always reduces the pristine network (repeated calls replace, not stack,
    so the operation is idempotent for a fixed seed). With ``seed=None`` the
    reduction stream derives from the network seed, which keeps the network
    reproducible from its {seed, Q, MN, p} descriptor.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"reduction ratio must be in [0, 1), got {p}")
    base = SelectionNetwork(Q=net.Q, MN=net.MN, seed=net.seed, pad=net.pad,
                            row_sel=net.row_sel, col_perm=net.col_perm,
                            scale=net.scale)
    if p == 0.0:
        return base
    n_off = int(np.floor(p * net.Q * net.MN))
    if seed is None:
        rng = np.random.default_rng(np.random.SeedSequence((net.seed, _MASK_TAG)))
    else:
        rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(net.Q * net.MN, size=n_off, replace=False))
    rows = (flat // net.MN).astype(np.int64)
    cols = (flat % net.MN).astype(np.int64)
    parity = np.bitwise_count(base.row_sel[rows] & base.col_perm[cols]).astype(np.int64) & 1
    vals = base.scale * (1.0 - 2.0 * parity)
    base.p = p
    base.off_rows = rows
    base.off_cols = cols
    base.off_vals = vals
    base.mask_seed = None if seed is None else int(seed)
    return base


def from_descriptor(desc: dict) -> SelectionNetwork:
    net = build_hadamard_selection(desc["Q"], desc["MN"], desc["seed"])
    p = float(desc.get("p", 0.0))
    if p > 0.0:
        net = reduce_phase_shifters(net, p)
    return net


def measure(net: SelectionNetwork, h: np.ndarray, snr_db,
            rng: np.random.Generator | None = None) -> Measurement:
    """r = W h + n with n ~ N(0, Delta I); Delta set so ||Wh||^2/(Q Delta) hits the SNR.

    ``snr_db=None`` (or +inf) returns the noiseless measurement.
    """
    y = net.apply(h)
    if snr_db is None or np.isinf(snr_db):
        return Measurement(r=y, Delta=0.0, snr_db=None)
    sig = float(y @ y)
    if sig == 0.0:
        raise ValueError("zero-signal input cannot meet a finite SNR")
    if rng is None:
        raise ValueError("finite SNR requires an rng for the noise draw")
    Delta = sig / (net.Q * 10.0 ** (snr_db / 10.0))
    r = y + np.sqrt(Delta) * rng.standard_normal(net.Q)
    return Measurement(r=r, Delta=Delta, snr_db=float(snr_db))


def save_network_csv(net: SelectionNetwork, path):
    """Dense W as CSV; only sensible for small networks."""
    np.savetxt(path, net.toarray(), delimiter=",")
