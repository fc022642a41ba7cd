"""Complex frames and their frame-theoretic diagnostics.

Matrices are plain ``complex128`` numpy arrays whose columns are the frame
vectors. ``vec`` is column stacking (Fortran order) everywhere in the package.
"""

from dataclasses import dataclass

import numpy as np

from .steering import grid_angles, steering_matrix

UNIT_NORM_TOL = 1e-8


class FrameError(ValueError):
    """Raised for matrices that are not valid frames for the requested operation."""


def vec(A):
    """Column-stacking vectorization."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((rows, cols), order="F")


def as_frame(F, allow_square=True):
    """Validate ``F`` as an M x N frame matrix and return it as complex128.

    Rejects non-2D input, non-finite entries and ``N < M``.
    """
    F = np.asarray(F, dtype=np.complex128)
    if F.ndim != 2:
        raise FrameError(f"frame must be a 2-D matrix, got shape {F.shape}")
    M, N = F.shape
    if M < 1 or N < 1:
        raise FrameError("frame must be non-empty")
    if N < M or (N == M and not allow_square):
        raise FrameError(f"frame needs N >= M, got {M}x{N}")
    if not np.all(np.isfinite(F)):
        raise FrameError("frame contains NaN or Inf")
    return F


def is_unit_norm(F, tol=UNIT_NORM_TOL):
    norms = np.linalg.norm(F, axis=0)
    return bool(np.all(np.abs(norms - 1.0) <= tol))


def normalize_columns(F):
    F = np.asarray(F, dtype=np.complex128)
    norms = np.linalg.norm(F, axis=0)
    if np.any(norms == 0):
        raise FrameError("cannot normalize a zero column")
    return F / norms


def gram(F):
    """Gram matrix ``F^H F``, symmetrized so it is exactly Hermitian."""
    F = as_frame(F)
    G = F.conj().T @ F
    return 0.5 * (G + G.conj().T)


def normalized_gram_magnitudes(F):
    """``|g_ij| / (||f_i|| ||f_j||)`` for all pairs, as a full N x N matrix."""
    F = as_frame(F)
    norms = np.linalg.norm(F, axis=0)
    if np.any(norms == 0):
        raise FrameError("frame has a zero-norm column")
    Fn = F / norms
    return np.abs(Fn.conj().T @ Fn)


def pair_magnitudes(F):
    """Normalized inner-product magnitudes over the N(N-1)/2 distinct pairs."""
    A = normalized_gram_magnitudes(F)
    iu = np.triu_indices(A.shape[0], k=1)
    return A[iu]


def coherence(F):
    """Mutual coherence: largest normalized off-diagonal Gram magnitude."""
    A = normalized_gram_magnitudes(F)
    if A.shape[0] < 2:
        return 0.0
    np.fill_diagonal(A, 0.0)
    return float(A.max())


def welch_bound(M, N):
    """Welch lower bound ``sqrt((N - M) / (M (N - 1)))`` on unit-norm frame coherence."""
    if M < 1 or N < M:
        raise FrameError(f"Welch bound needs N >= M >= 1, got M={M}, N={N}")
    if N == M:
        return 0.0
    return float(np.sqrt((N - M) / (M * (N - 1))))


def frame_bounds(F):
    """Smallest and largest eigenvalues of ``F F^H``."""
    F = as_frame(F)
    S = F @ F.conj().T
    ev = np.linalg.eigvalsh(0.5 * (S + S.conj().T))
    return float(max(ev[0], 0.0)), float(ev[-1])


def redundancy(F):
    M, N = np.shape(F)
    return N / M


def tightness_residual(F):
    """Relative distance ``||F F^H - (N/M) I||_F / ||(N/M) I||_F``."""
    F = as_frame(F)
    M, N = F.shape
    rho = N / M
    target = rho * np.eye(M)
    return float(np.linalg.norm(F @ F.conj().T - target) / np.linalg.norm(target))


@dataclass(frozen=True)
class FrameDiagnostics:
    coherence: float
    welch_bound: float
    frame_bounds: tuple
    tightness_residual: float
    redundancy: float
    max_unit_norm_deviation: float

    def to_dict(self):
        return {
            "coherence": self.coherence,
            "welch_bound": self.welch_bound,
            "frame_bounds": list(self.frame_bounds),
            "tightness_residual": self.tightness_residual,
            "redundancy": self.redundancy,
            "max_unit_norm_deviation": self.max_unit_norm_deviation,
        }


def diagnose(F):
    F = as_frame(F)
    M, N = F.shape
    return FrameDiagnostics(
        coherence=coherence(F),
        welch_bound=welch_bound(M, N),
        frame_bounds=frame_bounds(F),
        tightness_residual=tightness_residual(F),
        redundancy=N / M,
        max_unit_norm_deviation=float(np.max(np.abs(np.linalg.norm(F, axis=0) - 1.0))),
    )


def harmonic_frame(M, N, rows=None):
    """M rows of the N x N unitary DFT, columns rescaled to unit norm.

    The result is a unit-norm tight frame for any choice of distinct rows.
    """
    if N < M:
        raise FrameError("harmonic frame needs N >= M")
    rows = np.arange(M) if rows is None else np.asarray(rows)
    if len(set(rows.tolist())) != M:
        raise FrameError("harmonic frame rows must be M distinct indices")
    n = np.arange(N)
    F = np.exp(-2j * np.pi * np.outer(rows, n) / N) / np.sqrt(N)
    return normalize_columns(F)


def random_unit_norm_frame(M, N, rng):
    """Independent standard complex Gaussian columns, normalized."""
    rng = np.random.default_rng(rng)
    F = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    return normalize_columns(F)


@dataclass(frozen=True)
class GridDictionary:
    """Kronecker grid dictionary ``kron(conj(A_T), A_R)``.

    Column ``g_t * G_R + g_r`` is ``vec(a_r(theta_gr) a_t(theta_gt)^H)``.
    """

    T: int
    R: int
    G_T: int
    G_R: int
    d_over_lambda: float
    grid_angles_tx: np.ndarray
    grid_angles_rx: np.ndarray
    A_T: np.ndarray
    A_R: np.ndarray
    matrix: np.ndarray

    @property
    def n_atoms(self):
        return self.G_T * self.G_R

    def flat_index(self, g_t, g_r):
        return g_t * self.G_R + g_r

    def grid_index(self, flat):
        return divmod(int(flat), self.G_R)


def build_dictionary(T, R, G_T, G_R, d_over_lambda=0.5):
    if min(T, R, G_T, G_R) < 1:
        raise ValueError("T, R, G_T, G_R must all be >= 1")
    th_t = grid_angles(G_T)
    th_r = grid_angles(G_R)
    A_T = steering_matrix(th_t, T, d_over_lambda)
    A_R = steering_matrix(th_r, R, d_over_lambda)
    return GridDictionary(
        T=T, R=R, G_T=G_T, G_R=G_R, d_over_lambda=d_over_lambda,
        grid_angles_tx=th_t, grid_angles_rx=th_r,
        A_T=A_T, A_R=A_R, matrix=np.kron(A_T.conj(), A_R),
    )
