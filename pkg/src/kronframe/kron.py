"""Nearest Kronecker factorization of a measurement matrix into beamformers.

A measurement matrix of shape ``(M_T M_R) x (T R)`` is split into an
``M_T x T`` grid of ``M_R x R`` blocks. Stacking the vectorized blocks as rows,
in column-major block order, gives a ``(M_T T) x (M_R R)`` matrix that equals
``vec(U^T) vec(V^H)^T`` exactly when ``Phi = kron(U^T, V^H)``. Its dominant
singular triplet therefore yields the Frobenius-nearest Kronecker product.
"""

from dataclasses import dataclass

import numpy as np

from .frames import unvec, vec
from .untf import MeasurementMatrix, normalize_measurement


@dataclass(frozen=True)
class KronDims:
    M_T: int
    M_R: int
    T: int
    R: int

    @classmethod
    def parse(cls, text):
        """Parse ``"T,R,MT,MR"`` (the CLI order)."""
        try:
            T, R, M_T, M_R = (int(v) for v in text.split(","))
        except ValueError as exc:
            raise ValueError(f"dims must be 'T,R,MT,MR', got {text!r}") from exc
        return cls(M_T=M_T, M_R=M_R, T=T, R=R)

    @property
    def phi_shape(self):
        return (self.M_T * self.M_R, self.T * self.R)

    @property
    def rearranged_shape(self):
        return (self.M_T * self.T, self.M_R * self.R)


def _matrix(phi):
    return phi.matrix if isinstance(phi, MeasurementMatrix) else np.asarray(phi, dtype=np.complex128)


def rearrange(phi, dims):
    """Row ``q*M_T + p`` of the output is ``vec(Phi_pq)`` (block row ``p``, block column ``q``)."""
    A = _matrix(phi)
    if A.shape != dims.phi_shape:
        raise ValueError(f"expected shape {dims.phi_shape}, got {A.shape}")
    X = A.reshape(dims.M_T, dims.M_R, dims.T, dims.R)  # [p, a, q, b]
    return X.transpose(2, 0, 3, 1).reshape(dims.rearranged_shape)


def inverse_rearrange(Rm, dims):
    Rm = np.asarray(Rm)
    if Rm.shape != dims.rearranged_shape:
        raise ValueError(f"expected shape {dims.rearranged_shape}, got {Rm.shape}")
    X = Rm.reshape(dims.T, dims.M_T, dims.R, dims.M_R).transpose(1, 3, 0, 2)
    return X.reshape(dims.phi_shape)


@dataclass(frozen=True)
class BeamformerPair:
    U: np.ndarray  # T x M_T precoder
    V: np.ndarray  # R x M_R combiner
    sigma: float
    approx_error: float
    degenerate: bool = False

    @property
    def dims(self):
        T, M_T = self.U.shape
        R, M_R = self.V.shape
        return KronDims(M_T=M_T, M_R=M_R, T=T, R=R)


def factor(phi, dims):
    """Frobenius-nearest ``kron(U^T, V^H)`` to ``phi`` from one SVD.

    The dominant singular value is split evenly, ``vec(U^T) = sqrt(s) u`` and
    ``vec(V^H) = sqrt(s) v``, with ``u`` phased so its largest-magnitude entry
    is real and positive.
    """
    A = _matrix(phi)
    Rm = rearrange(A, dims)
    W, s, Vh = np.linalg.svd(Rm, full_matrices=False)
    u = W[:, 0]
    v = Vh[0]
    k = int(np.argmax(np.abs(u)))
    ph = np.exp(-1j * np.angle(u[k]))
    u = u * ph
    v = v / ph
    sigma = float(s[0])
    degenerate = bool(len(s) > 1 and s[1] >= s[0] * (1.0 - 1e-12) and s[0] > 0)

    Ut = unvec(np.sqrt(sigma) * u, dims.M_T, dims.T)
    Vh_mat = unvec(np.sqrt(sigma) * v, dims.M_R, dims.R)
    U = Ut.T.copy()
    V = Vh_mat.conj().T.copy()
    err = float(np.linalg.norm(A - np.kron(Ut, Vh_mat)))
    return BeamformerPair(U=U, V=V, sigma=sigma, approx_error=err, degenerate=degenerate)


def kron_operator(U, V):
    """``kron(U^T, V^H)``."""
    return np.kron(np.asarray(U).T, np.asarray(V).conj().T)


def realize(pair, renormalize=False):
    """Measurement matrix ``kron(U^T, V^H)`` actually applied by the hardware.

    With ``renormalize`` the result is rescaled to Frobenius norm ``sqrt(T R)``.
    """
    d = pair.dims
    Phi = kron_operator(pair.U, pair.V)
    if renormalize:
        return normalize_measurement(Phi, d.T, d.R)
    return MeasurementMatrix(Phi, d.T, d.R)


def singular_tail(phi, dims):
    """``sqrt(sum_{k>=2} s_k^2)`` of the rearranged matrix (the Eckart-Young error)."""
    s = np.linalg.svd(rearrange(phi, dims), compute_uv=False)
    return float(np.sqrt(np.sum(s[1:] ** 2)))


def vec_factors(pair):
    """``(vec(U^T), vec(V^H))``."""
    return vec(pair.U.T), vec(pair.V.conj().T)
