"""Uniform linear array response vectors."""

import numpy as np


def steering_vector(phi, n_antennas, d_over_lambda=0.5):
    """Unit-norm ULA response for a single angle.

    Entry ``k`` is ``exp(j 2 pi (d/lambda) k sin(phi)) / sqrt(n_antennas)``.
    """
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    k = np.arange(n_antennas)
    return np.exp(2j * np.pi * d_over_lambda * k * np.sin(phi)) / np.sqrt(n_antennas)


def steering_matrix(angles, n_antennas, d_over_lambda=0.5):
    """Stack steering vectors for ``angles`` as columns (n_antennas x len(angles))."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    k = np.arange(n_antennas)[:, None]
    return np.exp(2j * np.pi * d_over_lambda * k * np.sin(angles)[None, :]) / np.sqrt(n_antennas)


def steering_rx(phi, R, d_over_lambda=0.5):
    return steering_vector(phi, R, d_over_lambda)


def steering_tx(phi, T, d_over_lambda=0.5):
    return steering_vector(phi, T, d_over_lambda)


def grid_angles(G):
    """Quantized angles ``2 pi g / G`` for ``g = 0..G-1``."""
    if G < 1:
        raise ValueError("grid size must be >= 1")
    return 2.0 * np.pi * np.arange(G) / G
