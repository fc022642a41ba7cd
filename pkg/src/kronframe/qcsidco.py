"""Mutual-coherence minimization by cyclic per-column quadratic programs.

Each column ``f_i`` of a unit-norm frame is replaced, in turn, by the solution
of a small convex program in ``R^(2M+2)``::

    minimize    t_R^2 + t_I^2
    subject to  |Re(f_j^H f)| <= t_R,  |Im(f_j^H f)| <= t_I   for all j != i
                ||f - f_i||^2 <= T_i

where ``T_i = 1 - max_j |g_ij|^2`` keeps the new column away from every other
column's line. The program is solved with a log-barrier interior-point method.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .frames import FrameError, as_frame, coherence, is_unit_norm, random_unit_norm_frame

log = logging.getLogger(__name__)


# duality-gap target (m / tau) at which the barrier method stops
GAP_TOL = 1e-6


class DegenerateFrameWarning(UserWarning):
    """A column is collinear with another, leaving an empty search ball."""


# --------------------------------------------------------------------------
# C^M <-> R^2M
# --------------------------------------------------------------------------

def realify(f):
    """Map ``f`` in C^M to ``[Re(f); Im(f)]`` in R^2M (works column-wise on matrices)."""
    f = np.asarray(f)
    return np.concatenate([f.real, f.imag], axis=0)


def complexify(x):
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    M = x.shape[0] // 2
    return x[:M] + 1j * x[M:]


def rotation_matrix(M):
    """``[[0, -1], [1, 0]] kron I_M``: multiplication by ``j`` in realified coordinates."""
    return np.kron(np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(M))


def realified_inner(f_j, f):
    """``(Re(f_j^H f), Im(f_j^H f))`` computed through the realified constraint rows."""
    p = realify(f_j)
    x = realify(f)
    D = rotation_matrix(len(f_j))
    return float(p @ x), float(-(p @ D @ x))


# --------------------------------------------------------------------------
# Subproblem
# --------------------------------------------------------------------------

def ball_radius(gram_row):
    """Squared search-ball radius ``1 - max_j |g_ij|^2``.

    Returns 0 and emits :class:`DegenerateFrameWarning` when a column is
    collinear with the anchor.
    """
    g = np.abs(np.asarray(gram_row))
    if g.size == 0:
        return 1.0
    gmax = float(g.max())
    if gmax >= 1.0 - 1e-12:
        warnings.warn("collinear frame columns: search ball is empty", DegenerateFrameWarning,
                      stacklevel=2)
        return 0.0
    return 1.0 - gmax ** 2


@dataclass
class SubproblemData:
    index: int
    pruned: np.ndarray
    anchor: np.ndarray
    radius: float
    Q: np.ndarray
    A_R1: np.ndarray
    A_R2: np.ndarray
    A_I1: np.ndarray
    A_I2: np.ndarray
    B: np.ndarray
    b: np.ndarray

    @property
    def M(self):
        return self.anchor.shape[0]

    @property
    def constraints(self):
        """All linear inequality rows stacked, ``G x <= 0``."""
        return np.vstack([self.A_R1, self.A_R2, self.A_I1, self.A_I2])

    def ball_value(self, x):
        """Left-hand side of the ball constraint; feasible iff <= 0."""
        return float(x @ self.B @ x - 2.0 * self.b @ x + 1.0 - self.radius)

    def objective(self, x):
        return float(x @ self.Q @ x)

    def column_objective(self, f):
        """``t_R^2 + t_I^2`` at the tightest epigraph values for column ``f``."""
        ip = self.pruned.conj().T @ f
        return float(np.max(np.abs(ip.real)) ** 2 + np.max(np.abs(ip.imag)) ** 2)


def assemble_subproblem(F, i, guard=1.0):
    """Build the quadratic program that re-optimizes column ``i`` of ``F``.

    ``guard`` scales the ball radius (``guard * (1 - max|g_ij|^2)``).
    """
    F = as_frame(F)
    M, N = F.shape
    if N < 2:
        raise FrameError("need at least two columns")
    if not 0 <= i < N:
        raise IndexError(f"column index {i} out of range for N={N}")
    anchor = F[:, i].copy()
    pruned = np.delete(F, i, axis=1)
    radius = guard * ball_radius(pruned.conj().T @ anchor)

    n = 2 * M + 2
    P = realify(pruned).T  # (N-1) x 2M, row j gives Re(f_j^H f)
    PD = P @ rotation_matrix(M)  # row j gives -Im(f_j^H f)
    ones = np.ones((N - 1, 1))
    zeros = np.zeros((N - 1, 1))
    A_R1 = np.hstack([P, -ones, zeros])
    A_R2 = np.hstack([-P, -ones, zeros])
    A_I1 = np.hstack([PD, zeros, -ones])
    A_I2 = np.hstack([-PD, zeros, -ones])

    Q = np.zeros((n, n))
    Q[-2:, -2:] = np.eye(2)
    B = np.zeros((n, n))
    B[: 2 * M, : 2 * M] = np.eye(2 * M)
    b = np.concatenate([realify(anchor), [0.0, 0.0]])
    return SubproblemData(i, pruned, anchor, radius, Q, A_R1, A_R2, A_I1, A_I2, B, b)


@dataclass
class SubproblemResult:
    f: np.ndarray  # unit-norm column
    x: np.ndarray  # raw optimizer in R^(2M+2)
    converged: bool
    newton_steps: int
    objective: float
    anchor_objective: float


@njit(cache=True)
def _barrier_value(a, c, tR, tI, xf, anchor_x, radius, tau, t, da, dc, dR, dI, dxf):
    """Barrier objective at ``x + t * dx`` (``inf`` outside the strict interior)."""
    r = radius
    for k in range(xf.shape[0]):
        r -= (xf[k] + t * dxf[k] - anchor_x[k]) ** 2
    if r <= 0.0:
        return np.inf
    R = tR + t * dR
    I = tI + t * dI
    val = tau * (R * R + I * I) - np.log(r)
    for k in range(a.shape[0]):
        ak = a[k] + t * da[k]
        ck = c[k] + t * dc[k]
        s1 = R - ak
        s2 = R + ak
        s3 = I - ck
        s4 = I + ck
        if s1 <= 0.0 or s2 <= 0.0 or s3 <= 0.0 or s4 <= 0.0:
            return np.inf
        val -= np.log(s1 * s2) + np.log(s3 * s4)
    return val


@njit(cache=True)
def _spd_solve(H, g):
    L = np.linalg.cholesky(H)
    n = g.shape[0]
    y = np.empty(n)
    for i in range(n):
        acc = g[i]
        for k in range(i):
            acc -= L[i, k] * y[k]
        y[i] = acc / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True)
def _barrier_solve(P, PD, anchor_x, radius, tol, gap_tol, max_newton, mu):
    """Log-barrier method for the column program.

    ``P`` and ``PD`` are the real and (negated) imaginary inner-product rows,
    so the linear constraints read ``|P x_f| <= t_R`` and ``|PD x_f| <= t_I``.
    Returns ``(x, converged, newton_steps)`` with ``x = [x_f; t_R; t_I]``.
    """
    nf = P.shape[1]
    m = 4 * P.shape[0] + 1
    PT = np.ascontiguousarray(P.T)
    PDT = np.ascontiguousarray(PD.T)
    xf = anchor_x.copy()
    a = P @ xf
    c = PD @ xf
    # strictly feasible epigraph start
    tR = 1.1 * np.max(np.abs(a)) + 1e-3
    tI = 1.1 * np.max(np.abs(c)) + 1e-3

    tau = m / max(tR * tR + tI * tI, 1e-3)
    steps = 0
    n = nf + 2
    H = np.empty((n, n))
    grad = np.empty(n)
    while True:
        while True:
            s1 = tR - a
            s2 = tR + a
            s3 = tI - c
            s4 = tI + c
            i1 = 1.0 / s1
            i2 = 1.0 / s2
            i3 = 1.0 / s3
            i4 = 1.0 / s4
            d = xf - anchor_x
            r = radius - d @ d

            grad[:nf] = PT @ (i1 - i2) + PDT @ (i3 - i4) + (2.0 / r) * d
            grad[nf] = 2.0 * tau * tR - np.sum(i1 + i2)
            grad[nf + 1] = 2.0 * tau * tI - np.sum(i3 + i4)

            wa = i1 * i1 + i2 * i2
            wc = i3 * i3 + i4 * i4
            H[:nf, :nf] = (PT * wa) @ P + (PDT * wc) @ PD + (4.0 / r ** 2) * np.outer(d, d)
            for k in range(nf):
                H[k, k] += 2.0 / r
            hR = PT @ (i2 * i2 - i1 * i1)
            hI = PDT @ (i4 * i4 - i3 * i3)
            H[:nf, nf] = hR
            H[nf, :nf] = hR
            H[:nf, nf + 1] = hI
            H[nf + 1, :nf] = hI
            H[nf, nf] = 2.0 * tau + np.sum(wa)
            H[nf + 1, nf + 1] = 2.0 * tau + np.sum(wc)
            H[nf, nf + 1] = 0.0
            H[nf + 1, nf] = 0.0

            dx = -_spd_solve(H, grad)
            lam2 = -(grad @ dx)
            if lam2 / 2.0 <= tol:
                break
            steps += 1
            if steps > max_newton:
                return np.concatenate((xf, np.array([tR, tI]))), False, steps
            dxf = dx[:nf]
            da = P @ dxf
            dc = PD @ dxf
            dR = dx[nf]
            dI = dx[nf + 1]
            # largest step keeping the linear slacks positive
            t = 1.0
            for k in range(a.shape[0]):
                d1 = da[k] - dR
                d2 = -da[k] - dR
                d3 = dc[k] - dI
                d4 = -dc[k] - dI
                if d1 > 0.0:
                    t = min(t, 0.99 * s1[k] / d1)
                if d2 > 0.0:
                    t = min(t, 0.99 * s2[k] / d2)
                if d3 > 0.0:
                    t = min(t, 0.99 * s3[k] / d3)
                if d4 > 0.0:
                    t = min(t, 0.99 * s4[k] / d4)
            f0 = _barrier_value(a, c, tR, tI, xf, anchor_x, radius, tau, 0.0, da, dc, dR, dI, dxf)
            while (_barrier_value(a, c, tR, tI, xf, anchor_x, radius, tau, t, da, dc, dR, dI, dxf)
                   > f0 - 0.01 * t * lam2):
                t *= 0.5
                if t < 1e-12:
                    break
            if t < 1e-12:
                # no descent at working precision: treat the point as centered
                break
            xf = xf + t * dxf
            a = a + t * da
            c = c + t * dc
            tR += t * dR
            tI += t * dI
        if m / tau < gap_tol:
            return np.concatenate((xf, np.array([tR, tI]))), True, steps
        tau *= mu
        # refresh products to avoid drift from incremental updates
        a = P @ xf
        c = PD @ xf


def solve_subproblem(sub, tol=1e-8, gap_tol=GAP_TOL, max_newton=200):
    """Solve one column program and return the renormalized column.

    An empty ball or a solver failure returns the anchor with
    ``converged=False``.
    """
    anchor_obj = sub.column_objective(sub.anchor)
    if sub.radius <= 0:
        x = np.concatenate([realify(sub.anchor), [0.0, 0.0]])
        return SubproblemResult(sub.anchor.copy(), x, False, 0, anchor_obj, anchor_obj)
    nf = 2 * sub.M
    P = np.ascontiguousarray(sub.A_R1[:, :nf])
    PD = np.ascontiguousarray(sub.A_I1[:, :nf])
    x, ok, steps = _barrier_solve(P, PD, realify(sub.anchor), float(sub.radius), float(tol),
                                  float(gap_tol), int(max_newton), 10.0)
    f = complexify(x[:-2])
    nrm = np.linalg.norm(f)
    if not ok or nrm == 0 or not np.all(np.isfinite(x)):
        log.debug("column %d: barrier solver did not converge", sub.index)
        x = np.concatenate([realify(sub.anchor), [0.0, 0.0]])
        return SubproblemResult(sub.anchor.copy(), x, False, steps, anchor_obj, anchor_obj)
    return SubproblemResult(f / nrm, x, True, steps, sub.objective(x), anchor_obj)


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

@dataclass
class SidcoConfig:
    max_sweeps: int = 100
    coherence_tol: float = 1e-6
    qp_tol: float = 1e-8
    ball_shrink_guard: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.coherence_tol <= 0 or self.qp_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.ball_shrink_guard <= 1:
            raise ValueError("ball_shrink_guard must lie in (0, 1]")


@dataclass
class SidcoReport:
    sweeps: int = 0
    coherence_trace: list = field(default_factory=list)
    flagged_columns: list = field(default_factory=list)
    rejected_steps: int = 0
    degenerate: bool = False

    def to_dict(self):
        return {
            "sweeps": self.sweeps,
            "coherence_trace": [float(c) for c in self.coherence_trace],
            "flagged_columns": sorted(int(i) for i in self.flagged_columns),
        }


def _column_max_ip(F, i, f):
    ip = np.abs(F.conj().T @ f)
    ip[i] = 0.0
    return ip.max()


def minimize_coherence(initial, cfg=None, allow_square=False):
    """Run cyclic column sweeps until coherence stalls.

    ``coherence_trace[0]`` is the initial coherence and entry ``k`` the value
    after sweep ``k``. A column update is kept only if it does not raise that
    column's largest true inner-product modulus, so the trace never increases.
    """
    cfg = cfg or SidcoConfig()
    F = as_frame(initial).copy()
    M, N = F.shape
    if N == M and not allow_square:
        raise FrameError("coherence minimization needs N > M")
    if not is_unit_norm(F):
        raise FrameError("initial frame must be unit-norm")
    F = F / np.linalg.norm(F, axis=0)

    report = SidcoReport(coherence_trace=[coherence(F)])
    flagged = set()
    for sweep in range(cfg.max_sweeps):
        degenerate = set()
        for i in range(N):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateFrameWarning)
                sub = assemble_subproblem(F, i, guard=cfg.ball_shrink_guard)
            if sub.radius <= 0:
                degenerate.add(i)
                flagged.add(i)
                continue
            res = solve_subproblem(sub, tol=cfg.qp_tol)
            if not res.converged:
                flagged.add(i)
                continue
            before = _column_max_ip(F, i, F[:, i])
            after = _column_max_ip(F, i, res.f)
            if after <= before:
                F[:, i] = res.f
            else:
                report.rejected_steps += 1
        report.sweeps = sweep + 1
        report.coherence_trace.append(coherence(F))
        log.debug("sweep %d: coherence %.6f", report.sweeps, report.coherence_trace[-1])
        if report.coherence_trace[-2] - report.coherence_trace[-1] < cfg.coherence_tol:
            break
    report.flagged_columns = sorted(flagged)
    if degenerate:
        report.degenerate = True
        warnings.warn(f"collinear columns persist: {sorted(degenerate)}", DegenerateFrameWarning,
                      stacklevel=2)
    return F, report


def design_frame(M, N, cfg=None):
    """Seeded Gaussian unit-norm start followed by :func:`minimize_coherence`."""
    cfg = cfg or SidcoConfig()
    F0 = random_unit_norm_frame(M, N, np.random.default_rng(cfg.seed))
    F, report = minimize_coherence(F0, cfg)
    return F0, F, report
