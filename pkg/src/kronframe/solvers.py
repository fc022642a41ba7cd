"""Sparse recovery of ``x`` from ``y = Omega x + n``.

``bpdn`` solves ``min ||W x||_1  s.t.  ||y - Omega x||_2 <= delta`` by ADMM on
the split ``u1 = x``, ``u2 = Omega x``: the ``x`` step is a fixed linear solve
with ``I + Omega^H Omega``, ``u1`` is a (weighted) soft threshold and ``u2`` an
exact projection onto the ball of radius ``delta`` around ``y``. The solver
takes ``y`` of shape ``(m,)`` or ``(m, B)``; columns of a batch are independent
problems sharing one factorization.
"""

from dataclasses import dataclass, field

import numpy as np

from .frames import unvec

OMP, BPDN, RW_BPDN = "OMP", "BPDN", "RW-BPDN"
SOLVERS = (OMP, BPDN, RW_BPDN)

SUPPORT_THRESHOLD = 1e-3


class SolverError(ValueError):
    pass


class SensingOperator:
    """``Omega = Phi Psi`` with cached column norms and the ADMM inverse."""

    def __init__(self, omega):
        omega = np.asarray(omega, dtype=np.complex128)
        if omega.ndim != 2:
            raise SolverError("sensing matrix must be 2-D")
        self.omega = omega
        self.column_norms = np.linalg.norm(omega, axis=0)
        if np.any(self.column_norms == 0):
            raise SolverError("sensing matrix has a zero column")
        self._inv = None

    @classmethod
    def from_parts(cls, phi, psi):
        phi = getattr(phi, "matrix", phi)
        psi = getattr(psi, "matrix", psi)
        return cls(np.asarray(phi) @ np.asarray(psi))

    @property
    def shape(self):
        return self.omega.shape

    @property
    def admm_inverse(self):
        """``(I + Omega^H Omega)^-1`` via the m x m Woodbury form."""
        if self._inv is None:
            m, n = self.omega.shape
            O = self.omega
            S = np.eye(m) + O @ O.conj().T
            self._inv = np.eye(n) - O.conj().T @ np.linalg.solve(S, O)
        return self._inv


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    support: np.ndarray
    residual_norm: float
    iterations: int
    solver_id: str
    converged: bool = True
    infeasible: bool = False

    def to_dict(self):
        return {
            "solver_id": self.solver_id,
            "support": [int(i) for i in self.support],
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "x_hat": {"rows": int(self.x_hat.shape[0]), "cols": 1,
                      "entries": [[float(v.real), float(v.imag)] for v in self.x_hat]},
        }


def thresholded_support(x, rel=SUPPORT_THRESHOLD):
    """Indices with ``|x_i| >= rel * ||x||_inf``."""
    x = np.asarray(x)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak == 0:
        return np.array([], dtype=int)
    return np.flatnonzero(np.abs(x) >= rel * peak)


def _as_operator(op):
    return op if isinstance(op, SensingOperator) else SensingOperator(op)


# --------------------------------------------------------------------------
# OMP
# --------------------------------------------------------------------------

def omp(y, op, sparsity_K, residual_stop=0.0):
    """Orthogonal matching pursuit.

    Atoms are chosen by correlation with unit-normalized columns; coefficients
    are refit by least squares on the raw columns after every selection.
    """
    op = _as_operator(op)
    O = op.omega
    m, n = O.shape
    if sparsity_K < 1:
        raise SolverError("sparsity K must be >= 1")
    if sparsity_K > m:
        raise SolverError(f"K={sparsity_K} exceeds the {m} measurements")
    y = np.asarray(y, dtype=np.complex128)
    On = O / op.column_norms
    r = y.copy()
    support = []
    coef = np.zeros(0, dtype=np.complex128)
    for _ in range(sparsity_K):
        if np.linalg.norm(r) <= residual_stop:
            break
        corr = np.abs(On.conj().T @ r)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        coef = np.linalg.lstsq(O[:, support], y, rcond=None)[0]
        r = y - O[:, support] @ coef
    x = np.zeros(n, dtype=np.complex128)
    x[support] = coef
    return RecoveryResult(x, np.array(support, dtype=int), float(np.linalg.norm(y - O @ x)),
                          len(support), OMP)


# --------------------------------------------------------------------------
# BPDN
# --------------------------------------------------------------------------

@dataclass
class BpdnConfig:
    delta: float = 0.0
    max_iter: int = 2000
    tol: float = 1e-6
    rho: float = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.delta) < 0):
            raise SolverError("delta must be nonnegative")
        if self.max_iter < 1 or self.tol <= 0 or self.rho <= 0:
            raise SolverError("max_iter, tol and rho must be positive")


@dataclass
class _AdmmState:
    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    iterations: np.ndarray = field(default=None)
    converged: np.ndarray = field(default=None)


def _soft(v, thresh):
    mag = np.abs(v)
    scale = np.maximum(mag - thresh, 0.0) / np.where(mag > 0, mag, 1.0)
    return v * scale


def _ball_project(v, y, delta):
    diff = v - y
    nrm = np.linalg.norm(diff, axis=0)
    scale = np.where(nrm > delta, delta / np.where(nrm > 0, nrm, 1.0), 1.0)
    return y + diff * scale


def _admm(op, Y, delta, weights, cfg, state=None):
    """Batched ADMM. ``Y`` is (m, B), ``delta`` (B,), ``weights`` (n, B)."""
    O = op.omega
    OH = O.conj().T
    Kinv = op.admm_inverse
    m, n = O.shape
    B = Y.shape[1]
    if state is None:
        z = np.zeros((n, B), dtype=np.complex128)
        state = _AdmmState(z.copy(), z.copy(), np.zeros((m, B), dtype=np.complex128),
                           z.copy(), np.zeros((m, B), dtype=np.complex128))
    x, u1, u2, d1, d2 = state.x.copy(), state.u1.copy(), state.u2.copy(), state.d1.copy(), state.d2.copy()
    thresh = weights / cfg.rho
    scale = np.maximum(1.0, np.linalg.norm(Y, axis=0))
    iterations = np.zeros(B, dtype=int)
    done = np.zeros(B, dtype=bool)
    active = np.arange(B)
    for _ in range(cfg.max_iter):
        if active.size == 0:
            break
        a = active
        xa = Kinv @ ((u1[:, a] + d1[:, a]) + OH @ (u2[:, a] + d2[:, a]))
        Oxa = O @ xa
        u1_new = _soft(xa - d1[:, a], thresh[:, a])
        u2_new = _ball_project(Oxa - d2[:, a], Y[:, a], delta[a])
        r1 = xa - u1_new
        r2 = Oxa - u2_new
        primal = np.sqrt(np.sum(np.abs(r1) ** 2, axis=0) + np.sum(np.abs(r2) ** 2, axis=0))
        dual = cfg.rho * np.linalg.norm((u1_new - u1[:, a]) + OH @ (u2_new - u2[:, a]), axis=0)
        x[:, a] = xa
        u1[:, a] = u1_new
        u2[:, a] = u2_new
        d1[:, a] -= r1
        d2[:, a] -= r2
        iterations[a] += 1
        fin = (primal <= cfg.tol * scale[a]) & (dual <= cfg.tol * scale[a])
        done[a[fin]] = True
        active = a[~fin]
    return _AdmmState(x, u1, u2, d1, d2, iterations, done)


def _broadcast(y, delta, weights, n):
    Y = np.asarray(y, dtype=np.complex128)
    single = Y.ndim == 1
    if single:
        Y = Y[:, None]
    B = Y.shape[1]
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (B,)).copy()
    if weights is None:
        W = np.ones((n, B))
    else:
        W = np.asarray(weights, dtype=float)
        W = np.broadcast_to(W[:, None] if W.ndim == 1 else W, (n, B)).copy()
    return Y, delta, W, single


def _results(op, Y, state, solver_id, delta, single, iters=None):
    O = op.omega
    out = []
    for b in range(Y.shape[1]):
        xb = state.u1[:, b].copy()
        res = float(np.linalg.norm(Y[:, b] - O @ xb))
        ok = bool(state.converged[b])
        out.append(RecoveryResult(
            xb, thresholded_support(xb), res,
            int(state.iterations[b] if iters is None else iters[b]), solver_id,
            converged=ok, infeasible=(not ok) and res > delta[b] * (1.0 + 1e-3),
        ))
    return out[0] if single else out


def bpdn(y, op, cfg=None, weights=None):
    """Basis pursuit denoising, ``min ||W x||_1 s.t. ||y - Omega x||_2 <= delta``.

    ``y`` may be a batch ``(m, B)``; ``cfg.delta`` may then be a length-``B``
    array. Returns one :class:`RecoveryResult` per column (a list for batches).
    A result with ``converged=False`` hit ``max_iter``; the last iterate is
    returned.
    """
    op = _as_operator(op)
    cfg = cfg or BpdnConfig()
    Y, delta, W, single = _broadcast(y, cfg.delta, weights, op.shape[1])
    state = _admm(op, Y, delta, W, cfg)
    return _results(op, Y, state, BPDN, delta, single)


@dataclass
class ReweightConfig:
    t_max: int = 4
    epsilon: float = 0.1
    weight_tol: float = 1e-4  # stop once unit-mean weights move less than this

    def __post_init__(self):
        if self.t_max < 1:
            raise SolverError("t_max must be >= 1")
        if self.epsilon <= 0:
            raise SolverError("epsilon must be positive")
        if self.weight_tol < 0:
            raise SolverError("weight_tol must be nonnegative")


def reweight(x, epsilon):
    """Weights ``1 / (|x_i| + epsilon)``."""
    return 1.0 / (np.abs(x) + epsilon)


def reweighted_bpdn(y, op, bpdn_cfg=None, rw_cfg=None):
    """Iteratively reweighted BPDN.

    Pass 1 is plain BPDN; each later pass solves the weighted problem with
    ``w_i = 1 / (|x_i| + epsilon)`` from the previous pass, warm-started from
    the previous ADMM state. Weights are rescaled to unit mean per problem,
    which leaves each weighted minimizer unchanged. A problem stops early once
    its rescaled weights change by at most ``rw_cfg.weight_tol``.
    """
    op = _as_operator(op)
    bpdn_cfg = bpdn_cfg or BpdnConfig()
    rw_cfg = rw_cfg or ReweightConfig()
    n = op.shape[1]
    Y, delta, W, single = _broadcast(y, bpdn_cfg.delta, None, n)
    B = Y.shape[1]
    state = _admm(op, Y, delta, W, bpdn_cfg)
    total = state.iterations.copy()
    active = np.arange(B)
    for _ in range(rw_cfg.t_max - 1):
        W_new = reweight(state.u1[:, active], rw_cfg.epsilon)
        W_new /= W_new.mean(axis=0, keepdims=True)
        moving = np.max(np.abs(W_new - W[:, active]), axis=0) > rw_cfg.weight_tol
        active, W_new = active[moving], W_new[:, moving]
        if active.size == 0:
            break
        W[:, active] = W_new
        sub = _AdmmState(state.x[:, active], state.u1[:, active], state.u2[:, active],
                         state.d1[:, active], state.d2[:, active])
        sub = _admm(op, Y[:, active], delta[active], W_new, bpdn_cfg, sub)
        for name in ("x", "u1", "u2", "d1", "d2"):
            getattr(state, name)[:, active] = getattr(sub, name)
        state.converged[active] = sub.converged
        total[active] += sub.iterations
    return _results(op, Y, state, RW_BPDN, delta, single, iters=total)


# --------------------------------------------------------------------------
# Channel reconstruction and error
# --------------------------------------------------------------------------

def reconstruct_channel(x_hat, dictionary):
    """``unvec(Psi x_hat)`` as an R x T matrix."""
    psi = dictionary.matrix
    return unvec(psi @ np.asarray(x_hat), dictionary.R, dictionary.T)


def nmse(H_true, H_hat):
    """``||H - H_hat||_F / ||H||_F`` for one realization."""
    H_true = np.asarray(H_true)
    ref = np.linalg.norm(H_true)
    if ref == 0:
        raise SolverError("true channel is zero")
    return float(np.linalg.norm(H_true - np.asarray(H_hat)) / ref)


def bpdn_delta(noise_sigma, m):
    """High-probability bound on ``||n||_2`` for ``n ~ CN(0, noise_sigma^2 I_m)``."""
    return float(noise_sigma * np.sqrt(m + 2.0 * np.sqrt(2.0 * m)))
