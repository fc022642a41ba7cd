"""Sparse multipath mmWave MIMO channels and noisy vectorized observations."""

from dataclasses import dataclass

import numpy as np

from .frames import vec
from .steering import grid_angles, steering_matrix, steering_rx, steering_tx  # noqa: F401
from .untf import MeasurementMatrix

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ChannelConfig:
    T: int = 8
    R: int = 8
    L: int = 3
    sigma_gamma2: float = 1.0
    d_over_lambda: float = 0.5
    on_grid: bool = False
    G_T: int = 10
    G_R: int = 10

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.T < 1 or self.R < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.d_over_lambda <= 0:
            raise ValueError("d/lambda must be positive")
        if self.G_T < 1 or self.G_R < 1:
            raise ValueError("grid sizes must be >= 1")


@dataclass(frozen=True)
class ChannelRealization:
    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    H: np.ndarray  # R x T
    sparse_x: np.ndarray  # length G_T * G_R, index g_t * G_R + g_r
    on_grid: bool
    scale: float  # sqrt(T R / L)

    @property
    def support(self):
        return np.flatnonzero(self.sparse_x)

    @property
    def H_gamma(self):
        return self.scale * np.diag(self.gains)


def nearest_grid_index(phi, G):
    """Index of the closest grid angle ``2 pi g / G`` with wraparound; ties go low."""
    if G < 1:
        raise ValueError("G must be >= 1")
    th = grid_angles(G)
    d = np.abs(np.mod(phi, TWO_PI) - th)
    d = np.minimum(d, TWO_PI - d)
    return int(np.argmin(d))  # argmin returns the first (lowest) of equal minima


def assemble_channel(gains, aoa, aod, T, R, d_over_lambda=0.5):
    """``sqrt(TR/L) * sum_l gamma_l a_r(aoa_l) a_t(aod_l)^H``."""
    gains = np.asarray(gains, dtype=np.complex128)
    L = gains.shape[0]
    A_R = steering_matrix(aoa, R, d_over_lambda)
    A_T = steering_matrix(aod, T, d_over_lambda)
    return np.sqrt(T * R / L) * (A_R * gains) @ A_T.conj().T


def draw_channel(cfg, rng):
    """Draw one realization.

    Off-grid angles are uniform on ``[0, 2 pi)``; on-grid paths occupy ``L``
    distinct cells of the ``G_T x G_R`` grid. ``sparse_x`` always holds the
    nearest-grid representation (exact only for on-grid channels).
    """
    rng = np.random.default_rng(rng)
    T, R, L = cfg.T, cfg.R, cfg.L
    n_cells = cfg.G_T * cfg.G_R
    if cfg.on_grid and L > n_cells:
        raise ValueError(f"cannot place L={L} paths on a grid of {n_cells} cells")
    gains = np.sqrt(cfg.sigma_gamma2 / 2.0) * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    if cfg.on_grid:
        cells = rng.choice(n_cells, size=L, replace=False)
        g_t, g_r = np.divmod(cells, cfg.G_R)
        aod = grid_angles(cfg.G_T)[g_t]
        aoa = grid_angles(cfg.G_R)[g_r]
    else:
        aod = rng.uniform(0.0, TWO_PI, L)
        aoa = rng.uniform(0.0, TWO_PI, L)
        g_t = np.array([nearest_grid_index(a, cfg.G_T) for a in aod])
        g_r = np.array([nearest_grid_index(a, cfg.G_R) for a in aoa])
    scale = float(np.sqrt(T * R / L))
    H = assemble_channel(gains, aoa, aod, T, R, cfg.d_over_lambda)
    x = np.zeros(n_cells, dtype=np.complex128)
    np.add.at(x, g_t * cfg.G_R + g_r, scale * gains)
    return ChannelRealization(gains, aoa, aod, H, x, cfg.on_grid, scale)


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    noise_sigma: float
    snr_db: float
    Phi_used: MeasurementMatrix


def observe(channel, phi, snr_db, rng, noise_sigma=None):
    """``y = Phi vec(H) + n`` with ``n ~ CN(0, noise_sigma^2 I)``.

    ``noise_sigma`` defaults to the value giving received SNR
    ``||Phi vec(H)||^2 / (m noise_sigma^2) = 10^(snr_db / 10)``; ``snr_db=inf``
    is noiseless.
    """
    rng = np.random.default_rng(rng)
    H = channel.H if isinstance(channel, ChannelRealization) else np.asarray(channel)
    Phi = phi.matrix if isinstance(phi, MeasurementMatrix) else np.asarray(phi)
    s = Phi @ vec(H)
    m = s.shape[0]
    if noise_sigma is None:
        if np.isinf(snr_db) and snr_db > 0:
            noise_sigma = 0.0
        else:
            noise_sigma = float(np.sqrt(np.vdot(s, s).real / (m * 10.0 ** (snr_db / 10.0))))
    n = (noise_sigma / np.sqrt(2.0)) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    if noise_sigma == 0.0:
        n = np.zeros(m, dtype=np.complex128)
    if not isinstance(phi, MeasurementMatrix):
        T = H.shape[1]
        phi = MeasurementMatrix(Phi, T, H.shape[0])
    return Observation(s + n, float(noise_sigma), float(snr_db), phi)


def trial_seed(master_seed, trial_index):
    """Per-trial seed sequence, independent of execution order."""
    return np.random.SeedSequence([int(master_seed), int(trial_index)])
