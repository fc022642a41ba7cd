"""Experiment harness: measurement-matrix pipeline, coherence profiles and NMSE sweeps."""

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import solvers as sv
from .channel import ChannelConfig, draw_channel, observe, trial_seed
from .frames import (build_dictionary, coherence, harmonic_frame, pair_magnitudes,
                     random_unit_norm_frame, tightness_residual, welch_bound)
from .kron import KronDims, factor, realize
from .qcsidco import SidcoConfig, minimize_coherence
from .untf import MeasurementMatrix, normalize_measurement, polar_tighten

log = logging.getLogger(__name__)

QCSIDCO, RANDOM_UNITNORM, HARMONIC = "QCSIDCO", "RANDOM_UNITNORM", "HARMONIC"
FRAME_DESIGNS = (QCSIDCO, RANDOM_UNITNORM, HARMONIC)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    T: int = 8
    R: int = 8
    M_T: int = 4
    M_R: int = 4
    G_T: int = 10
    G_R: int = 10
    L: int = 3
    sigma_gamma2: float = 1.0
    d_over_lambda: float = 0.5
    on_grid: bool = False
    snr_grid_db: list = field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
    trials: int = 200
    solvers: list = field(default_factory=lambda: list(sv.SOLVERS))
    frame_design: list = field(default_factory=lambda: [QCSIDCO, RANDOM_UNITNORM])
    use_realized_kron: bool = True
    renormalize_realized: bool = True
    master_seed: int = 0
    omp_sparsity: int = None  # defaults to L
    sidco_max_sweeps: int = 100
    sidco_coherence_tol: float = 1e-6
    rw_t_max: int = 4
    rw_epsilon: float = 0.1
    bpdn_max_iter: int = 2000
    bpdn_tol: float = 1e-6
    bpdn_rho: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.frame_design, str):
            self.frame_design = [self.frame_design]
        self.frame_design = list(self.frame_design)
        self.solvers = list(self.solvers)
        self.snr_grid_db = [float(s) for s in self.snr_grid_db]
        self.validate()

    def validate(self):
        ints = dict(T=self.T, R=self.R, M_T=self.M_T, M_R=self.M_R, G_T=self.G_T, G_R=self.G_R, L=self.L)
        for k, v in ints.items():
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{k} must be a positive integer, got {v!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.M_T * self.M_R > self.T * self.R:
            raise ConfigError("M_T * M_R must not exceed T * R")
        if self.M_T > self.T or self.M_R > self.R:
            raise ConfigError("need M_T <= T and M_R <= R")
        bad = [d for d in self.frame_design if d not in FRAME_DESIGNS]
        if bad or not self.frame_design:
            raise ConfigError(f"frame_design must be drawn from {FRAME_DESIGNS}, got {self.frame_design}")
        bad = [s for s in self.solvers if s not in sv.SOLVERS]
        if bad or not self.solvers:
            raise ConfigError(f"solvers must be drawn from {sv.SOLVERS}, got {self.solvers}")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db is empty")
        if self.on_grid and self.L > self.G_T * self.G_R:
            raise ConfigError("L exceeds the number of grid cells")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        K = self.sparsity_K
        if K < 1 or K > self.M_T * self.M_R:
            raise ConfigError(f"OMP sparsity {K} must lie in [1, M_T*M_R]")

    @property
    def sparsity_K(self):
        return self.L if self.omp_sparsity is None else self.omp_sparsity

    @property
    def dims(self):
        return KronDims(M_T=self.M_T, M_R=self.M_R, T=self.T, R=self.R)

    @property
    def channel_config(self):
        return ChannelConfig(T=self.T, R=self.R, L=self.L, sigma_gamma2=self.sigma_gamma2,
                             d_over_lambda=self.d_over_lambda, on_grid=self.on_grid,
                             G_T=self.G_T, G_R=self.G_R)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def config_hash(self):
        """Short digest of every field that affects results (``workers`` excluded)."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------

@dataclass
class PipelineResult:
    design: str
    initial_frame: np.ndarray
    frame: np.ndarray  # unit-norm design output (before tightening)
    phi_ideal: MeasurementMatrix
    pair: object
    phi_used: MeasurementMatrix
    stages: list
    sidco_report: object = None


def design_seed(master_seed):
    return np.random.SeedSequence([int(master_seed), 0x5eed])


def run_pipeline(cfg, design=None):
    """Design, tighten, normalize and factor one measurement matrix.

    Emits one diagnostics entry per stage: ``design``, ``tighten``,
    ``normalize`` and ``factor``. Skipped stages carry ``"skipped": true``.
    """
    design = design or cfg.frame_design[0]
    M, N = cfg.M_T * cfg.M_R, cfg.T * cfg.R
    stages = []
    report = None
    rng = np.random.default_rng(design_seed(cfg.master_seed))
    F0 = random_unit_norm_frame(M, N, rng)

    t0 = time.perf_counter()
    if design == QCSIDCO:
        scfg = SidcoConfig(max_sweeps=cfg.sidco_max_sweeps, coherence_tol=cfg.sidco_coherence_tol,
                           seed=cfg.master_seed)
        F, report = minimize_coherence(F0, scfg)
        stages.append(_stage("design", F, t0, coherence_before=coherence(F0), sweeps=report.sweeps))
    elif design == RANDOM_UNITNORM:
        F = F0
        stages.append(_stage("design", F, t0, coherence_before=coherence(F0), sweeps=0))
    else:
        F0 = harmonic_frame(M, N)
        F = F0
        stages.append(_stage("design", F, t0, skipped=True))

    t0 = time.perf_counter()
    if design == QCSIDCO:
        Ft = polar_tighten(F)
        stages.append(_stage("tighten", Ft, t0, coherence_before=coherence(F)))
    else:
        Ft = F
        stages.append(_stage("tighten", Ft, t0, skipped=True))

    t0 = time.perf_counter()
    phi = normalize_measurement(Ft, cfg.T, cfg.R)
    st = _stage("normalize", phi.matrix, t0)
    st["frobenius_norm"] = float(np.linalg.norm(phi.matrix))
    stages.append(st)

    t0 = time.perf_counter()
    pair = factor(phi, cfg.dims)
    realized = realize(pair, renormalize=cfg.renormalize_realized)
    st = _stage("factor", realized.matrix, t0)
    st.update(approx_error=pair.approx_error, sigma=pair.sigma,
              relative_error=pair.approx_error / float(np.linalg.norm(phi.matrix)),
              degenerate=pair.degenerate)
    stages.append(st)

    used = realized if cfg.use_realized_kron else phi
    return PipelineResult(design, F0, F, phi, pair, used, stages, report)


def _stage(name, A, t0, skipped=False, **extra):
    M, N = A.shape
    d = {"stage": name, "skipped": skipped, "coherence": coherence(A),
         "welch_bound": welch_bound(M, N), "tightness_residual": tightness_residual(A),
         "seconds": time.perf_counter() - t0}
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# Coherence profile
# --------------------------------------------------------------------------

def coherence_profile(phi, bins=64):
    """Histogram and empirical CDF of normalized pair magnitudes on ``[0, 1]``.

    Returns a list of ``(bin_center, count, empirical_cdf)`` rows.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    A = phi.matrix if isinstance(phi, MeasurementMatrix) else phi
    mags = np.clip(pair_magnitudes(A), 0.0, 1.0)
    counts, edges = np.histogram(mags, bins=bins, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    cdf = np.cumsum(counts) / max(mags.size, 1)
    return [(float(c), int(k), float(p)) for c, k, p in zip(centers, counts, cdf)]


# --------------------------------------------------------------------------
# Monte-Carlo sweeps
# --------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial_index: int
    derived_seed: int
    snr_db: float
    frame_design: str
    nmse: dict
    support_hit: dict
    timings_ms: dict


def _draw_trials(cfg):
    """Channels plus one noise generator state per (trial, snr), all from per-trial seeds."""
    ccfg = cfg.channel_config
    out = []
    for t in range(cfg.trials):
        ss = trial_seed(cfg.master_seed, t)
        ch_ss, noise_ss = ss.spawn(2)
        channel = draw_channel(ccfg, np.random.default_rng(ch_ss))
        out.append((t, int(ss.generate_state(1)[0]), channel, noise_ss.spawn(len(cfg.snr_grid_db))))
    return out


def _solve_point(args):
    """All trials of one (design, snr) point. Returns per-trial records."""
    cfg, design, phi_used, snr_index, trials = args
    snr = cfg.snr_grid_db[snr_index]
    D = build_dictionary(cfg.T, cfg.R, cfg.G_T, cfg.G_R, cfg.d_over_lambda)
    op = sv.SensingOperator.from_parts(phi_used, D)
    m = op.shape[0]
    obs = [observe(ch, phi_used, snr, np.random.default_rng(seeds[snr_index]))
           for _, _, ch, seeds in trials]
    Y = np.stack([o.y for o in obs], axis=1)
    deltas = np.array([sv.bpdn_delta(o.noise_sigma, m) for o in obs])
    bcfg = sv.BpdnConfig(delta=deltas, max_iter=cfg.bpdn_max_iter, tol=cfg.bpdn_tol, rho=cfg.bpdn_rho)

    estimates, timings = {}, {}
    for solver in cfg.solvers:
        t0 = time.perf_counter()
        if solver == sv.OMP:
            estimates[solver] = [sv.omp(o.y, op, cfg.sparsity_K) for o in obs]
        elif solver == sv.BPDN:
            estimates[solver] = sv.bpdn(Y, op, bcfg)
        else:
            estimates[solver] = sv.reweighted_bpdn(
                Y, op, bcfg, sv.ReweightConfig(t_max=cfg.rw_t_max, epsilon=cfg.rw_epsilon))
        timings[solver] = 1e3 * (time.perf_counter() - t0) / len(obs)

    records = []
    for k, (t, dseed, ch, _) in enumerate(trials):
        truth = set(ch.support.tolist())
        nm, hit = {}, {}
        for solver in cfg.solvers:
            res = estimates[solver][k]
            nm[solver] = sv.nmse(ch.H, sv.reconstruct_channel(res.x_hat, D))
            hit[solver] = truth <= set(res.support.tolist())
        records.append(TrialRecord(t, dseed, snr, design, nm, hit, dict(timings)))
    return records


def run_trials(cfg, pipelines=None):
    """Per-trial records for every design, SNR and trial, in deterministic order."""
    pipelines = pipelines or {d: run_pipeline(cfg, d) for d in cfg.frame_design}
    trials = _draw_trials(cfg)
    jobs = [(cfg, d, pipelines[d].phi_used, i, trials)
            for d in cfg.frame_design for i in range(len(cfg.snr_grid_db))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_solve_point, jobs))
    else:
        chunks = [_solve_point(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


SWEEP_COLUMNS = ["snr_db", "solver", "frame_design", "mean_nmse", "std", "stderr", "trials",
                 "M_T", "M_R", "config_hash"]


def summarize(cfg, records):
    """Average per-trial NMSE by (snr, solver, design); rows follow config order."""
    rows = []
    h = cfg.config_hash()
    for snr in cfg.snr_grid_db:
        for solver in cfg.solvers:
            for design in cfg.frame_design:
                vals = np.array([r.nmse[solver] for r in records
                                 if r.snr_db == snr and r.frame_design == design])
                std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
                rows.append({"snr_db": snr, "solver": solver, "frame_design": design,
                             "mean_nmse": float(vals.mean()), "std": std,
                             "stderr": std / np.sqrt(vals.size), "trials": int(vals.size),
                             "M_T": cfg.M_T, "M_R": cfg.M_R, "config_hash": h})
    return rows


def nmse_sweep(cfg, pipelines=None):
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    records = run_trials(cfg, pipelines)
    return summarize(cfg, records)


def parse_pairs(text):
    """``"4x4,2x8"`` -> ``[(4, 4), (2, 8)]``."""
    pairs = []
    for tok in text.split(","):
        try:
            a, b = tok.lower().split("x")
            pairs.append((int(a), int(b)))
        except ValueError as exc:
            raise ConfigError(f"bad aspect pair {tok!r}; expected like 4x4") from exc
    return pairs


def aspect_ratio_sweep(cfg, mt_mr_pairs):
    """:func:`nmse_sweep` for each ``(M_T, M_R)`` with ``T``, ``R`` fixed."""
    rows = []
    for M_T, M_R in mt_mr_pairs:
        sub = replace(cfg, M_T=M_T, M_R=M_R)
        rows.extend(nmse_sweep(sub))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def rows_to_csv(rows, columns=None):
    """CSV text: header row, comma separated, 9 significant digits, LF endings."""
    columns = columns or (list(rows[0].keys()) if rows else SWEEP_COLUMNS)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))
