"""Beamspace channels of a 3D lens antenna array.

A lens of electrical size (D_y_tilde, D_z_tilde) focuses an incident plane
wave onto an M x N antenna grid with a separable sinc-product amplitude
pattern. Channels are real-valued superpositions of L+1 such patterns with
i.i.d. standard-normal gains; directional sines default to beam-grid
centers with sub-beam jitter (fully uniform sines stay available through
the angle_dist hook).

The row-major vectorization fixed here is the ordering every downstream
operator (selection network, difference operator) assumes.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"LCH1"
_NO_SEED = 2**64 - 1


@dataclass(frozen=True)
class LensConfig:
    """Array geometry, equivalent lens dimensions, and AoA jitter width."""

    M: int
    N: int
    D_y_tilde: float = 12.0
    D_z_tilde: float = 12.0
    wavelength: float = 1.0
    beam_jitter: float = 0.15

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.M}x{self.N}")
        if self.D_y_tilde <= 0 or self.D_z_tilde <= 0 or self.wavelength <= 0:
            raise ValueError("lens dimensions and wavelength must be positive")
        if not 0.0 <= self.beam_jitter <= 0.5:
            raise ValueError(f"beam_jitter must lie in [0, 0.5] beam spacings, "
                             f"got {self.beam_jitter}")

    @property
    def aperture(self) -> float:
        """A = wavelength^2 / (D_y * D_z); the wavelength cancels."""
        return 1.0 / (self.D_y_tilde * self.D_z_tilde)

    def row_coords(self) -> np.ndarray:
        """Symmetric grid coordinates m~ (half-integers for even M)."""
        return np.arange(self.M, dtype=np.float64) - (self.M - 1) / 2.0

    def col_coords(self) -> np.ndarray:
        return np.arange(self.N, dtype=np.float64) - (self.N - 1) / 2.0


@dataclass(frozen=True)
class PathParams:
    """One propagation path: real gain and directional sines."""

    alpha: float
    phi_y_tilde: float
    phi_z_tilde: float

    def __post_init__(self):
        if abs(self.phi_y_tilde) > 1.0 or abs(self.phi_z_tilde) > 1.0:
            raise ValueError("directional sines must lie in [-1, 1]")


@dataclass
class MultipathChannel:
    """L+1 paths plus the beamspace matrix H and its vectorization h."""

    paths: list
    H: np.ndarray
    h: np.ndarray = field(default=None)
    seed: int | None = None

    def __post_init__(self):
        if self.h is None:
            self.h = vectorize(self.H)


def default_grid_size(d_tilde: float) -> int:
    """Antenna count 1 + floor(2*D~) matching the lens focal sampling.

    Provided as a helper only; M, N are free config parameters because the
    benchmark grids (32/64/128 wide at D~ = 12) do not follow this rule.
    """
    return 1 + int(np.floor(2.0 * d_tilde))


def array_response(m_idx, path: PathParams, cfg: LensConfig) -> float:
    """Amplitude sqrt(A) sinc(m~ - D_y*phi_y) sinc(n~ - D_z*phi_z) at one antenna.

    ``m_idx`` is a (row, col) pair of integer grid indices.
    """
    row, col = m_idx
    if not (0 <= row < cfg.M and 0 <= col < cfg.N):
        raise ValueError(f"index {m_idx} outside {cfg.M}x{cfg.N} grid")
    m_t = row - (cfg.M - 1) / 2.0
    n_t = col - (cfg.N - 1) / 2.0
    amp = np.sqrt(cfg.aperture)
    return float(amp
                 * np.sinc(m_t - cfg.D_y_tilde * path.phi_y_tilde)
                 * np.sinc(n_t - cfg.D_z_tilde * path.phi_z_tilde))


def build_response_matrix(path: PathParams, cfg: LensConfig) -> np.ndarray:
    """M x N response matrix of a single path (separable sinc outer product)."""
    ry = np.sinc(cfg.row_coords() - cfg.D_y_tilde * path.phi_y_tilde)
    rz = np.sinc(cfg.col_coords() - cfg.D_z_tilde * path.phi_z_tilde)
    return np.sqrt(cfg.aperture) * np.outer(ry, rz)


def grid_angles(rng: np.random.Generator, n_paths: int,
                cfg: LensConfig) -> np.ndarray:
    """Directional sines on the beam grid with sub-beam jitter.

    The lens resolves directions in steps of 1/D~ (one beam spacing), and
    the focal-grid coordinate a beam must hit to excite a single antenna is
    m~ = m - (M-1)/2: half-integers for even M, integers for odd M. Each
    path picks a random beam cell and jitters uniformly by up to
    cfg.beam_jitter beam spacings around its center, so the nominal response
    is a few dominant entries plus jitter-controlled sinc leakage.
    """
    out = np.empty((n_paths, 2))
    for j, (d, size) in enumerate(((cfg.D_y_tilde, cfg.M),
                                   (cfg.D_z_tilde, cfg.N))):
        half = int(d)
        offset = 0.5 if size % 2 == 0 else 0.0
        low = -half if offset else -(half - 1)  # keep |sine| <= 1 after jitter
        k = rng.integers(min(low, 0), max(half, 1), size=n_paths)
        f = rng.uniform(-cfg.beam_jitter, cfg.beam_jitter, size=n_paths)
        out[:, j] = (k + offset + f) / d
    np.clip(out, -1.0, 1.0, out=out)
    return out


def uniform_angles(rng: np.random.Generator, size) -> np.ndarray:
    """Fully uniform directional sines on [-1, 1] (angle_dist callable)."""
    return rng.uniform(-1.0, 1.0, size=size)


def sample_channel(rng: np.random.Generator, L: int, cfg: LensConfig,
                   gain_dist=None, angle_dist=None) -> MultipathChannel:
    """Draw a multipath channel H = sqrt(MN/(L+1)) sum_l alpha_l A_l.

    ``gain_dist(rng, size)`` and ``angle_dist(rng, size)`` override the
    default standard-normal gains and grid-aligned jittered directional
    sines (see :func:`grid_angles`; pass :func:`uniform_angles` for fully
    uniform sines). All L+1 paths are exchangeable (no privileged
    line-of-sight gain).
    """
    if L < 0:
        raise ValueError("path count L must be >= 0")
    n_paths = L + 1
    if gain_dist is None:
        alphas = rng.standard_normal(n_paths)
    else:
        alphas = np.asarray(gain_dist(rng, n_paths), dtype=np.float64)
    if angle_dist is None:
        angles = grid_angles(rng, n_paths, cfg)
    else:
        angles = np.asarray(angle_dist(rng, (n_paths, 2)), dtype=np.float64)

    paths = [PathParams(float(alphas[l]), float(angles[l, 0]), float(angles[l, 1]))
             for l in range(n_paths)]
    H = np.zeros((cfg.M, cfg.N), dtype=np.float64)
    for p in paths:
        H += p.alpha * build_response_matrix(p, cfg)
    H *= np.sqrt(cfg.M * cfg.N / n_paths)
    return MultipathChannel(paths=paths, H=H)


def vectorize(H: np.ndarray) -> np.ndarray:
    """Row-major vectorization shared with the difference operator."""
    return np.asarray(H, dtype=np.float64).reshape(-1).copy()


def devectorize(h: np.ndarray, M: int, N: int) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.size != M * N:
        raise ValueError(f"vector of length {h.size} does not fill a {M}x{N} grid")
    return h.reshape(M, N).copy()


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def save_channel_csv(chan: MultipathChannel, path):
    """Row-major H as plain CSV, one matrix row per line."""
    np.savetxt(path, chan.H, delimiter=",")


def load_channel_csv(path) -> np.ndarray:
    H = np.loadtxt(path, delimiter=",", dtype=np.float64)
    return np.atleast_2d(H)


def save_channel_bin(chan: MultipathChannel, path, seed: int | None = None):
    """Binary container documented in the README.

    Layout (little-endian): magic ``LCH1``; uint32 M, N, L; uint64 seed
    (all-ones sentinel when unknown); then (L+1) float64 triples
    (alpha, phi_y_tilde, phi_z_tilde); then M*N float64 H entries row-major.
    """
    if seed is None:
        seed = chan.seed
    seed_field = _NO_SEED if seed is None else int(seed)
    M, N = chan.H.shape
    L = len(chan.paths) - 1
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIIQ", M, N, L, seed_field))
        trip = np.array([[p.alpha, p.phi_y_tilde, p.phi_z_tilde]
                         for p in chan.paths], dtype="<f8")
        f.write(trip.tobytes())
        f.write(chan.H.astype("<f8").tobytes())


def load_channel_bin(path) -> MultipathChannel:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        M, N, L, seed_field = struct.unpack("<IIIQ", f.read(20))
        trip = np.frombuffer(f.read((L + 1) * 3 * 8), dtype="<f8").reshape(L + 1, 3)
        H = np.frombuffer(f.read(M * N * 8), dtype="<f8").reshape(M, N)
    paths = [PathParams(*row) for row in trip]
    seed = None if seed_field == _NO_SEED else int(seed_field)
    return MultipathChannel(paths=paths, H=H.copy(), seed=seed)
