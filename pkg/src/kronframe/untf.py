"""Tight-frame projection and Frobenius normalization of the measurement matrix."""

from dataclasses import dataclass

import numpy as np

from .frames import FrameError, as_frame

RANK_TOL = 1e-12


@dataclass(frozen=True)
class MeasurementMatrix:
    matrix: np.ndarray
    T: int
    R: int

    @property
    def target_frobenius(self):
        return float(np.sqrt(self.T * self.R))

    @property
    def shape(self):
        return self.matrix.shape


def polar_tighten(F):
    """Nearest tight frame via the polar factor of ``F``.

    With the thin SVD ``F = U S V^H`` the result is ``sqrt(N/M) U V^H``, so
    ``F* F*^H = (N/M) I``.

    Raises
    ------
    FrameError
        If ``F`` is numerically rank deficient (``s_min < 1e-12 s_max``).
    """
    F = as_frame(F)
    M, N = F.shape
    U, s, Vh = np.linalg.svd(F, full_matrices=False)
    if s[-1] < RANK_TOL * s[0]:
        raise FrameError(f"degenerate frame: rank deficient (s_min/s_max = {s[-1] / s[0]:.3e})")
    return np.sqrt(N / M) * (U @ Vh)


def normalize_measurement(F, T, R):
    """Scale ``F`` to Frobenius norm ``sqrt(T R)``."""
    F = np.asarray(F, dtype=np.complex128)
    if F.ndim != 2 or F.shape[1] != T * R:
        raise FrameError(f"measurement matrix needs T*R = {T * R} columns, got shape {F.shape}")
    nrm = np.linalg.norm(F)
    if nrm == 0:
        raise FrameError("cannot normalize a zero matrix")
    return MeasurementMatrix(np.sqrt(T * R) * F / nrm, T, R)
