"""Replicated convergence studies, power-law rate fits, and the mean-field OU
reproduction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import stats

from . import rng
from .measures import EmpiricalMeasure, GaussianMeasure, WeightFamily, mixture, weighted_empirical
from .model import MvModel, kappa, mean_field_ou
from .sde import (
    SimConfig,
    SimulationBlowUp,
    simulate_frozen,
    simulate_particles,
    simulate_self_interacting,
)
from .wasserstein import w2_1d_squared, w2_sliced, w2_vs_gaussian_1d

Z95 = NormalDist().inv_cdf(0.975)
OU_INVARIANT_VARIANCE = 4.0 / 9.0
PROCESSES = ("frozen", "self_interacting", "particles")


class StudyError(RuntimeError):
    def __init__(self, replicate: int, time: float, cause: Exception):
        super().__init__(f"replicate {replicate}, t={time:g}: {cause}")
        self.replicate = replicate
        self.time = time


@dataclass(frozen=True)
class GaussianReference:
    mean: float
    sd: float
    n_quantiles: int = 10_000

    def view(self) -> GaussianMeasure:
        return GaussianMeasure.from_sd(self.mean, self.sd)


@dataclass
class StudySpec:
    model: MvModel
    process: str
    pi: WeightFamily
    wp: WeightFamily
    reference: GaussianReference | EmpiricalMeasure
    checkpoints: list
    replications: int
    cfg: SimConfig
    n_particles: int = 1
    mode: str = "weighted_empirical"
    y0: list | None = None
    stationary_start: bool = False
    n_proj: int = 64

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        cps = [float(t) for t in self.checkpoints]
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("checkpoints must be a non-empty increasing list")
        if cps[0] <= 0 or cps[-1] > self.cfg.n_steps * self.cfg.dt * (1 + 1e-12):
            raise ValueError("checkpoints must lie in (0, t_max]")
        self.checkpoints = cps
        if self.stationary_start and not isinstance(self.reference, GaussianReference):
            raise ValueError("stationary_start needs a Gaussian reference")

    @property
    def n_paths(self) -> int:
        return self.n_particles if self.process == "particles" else 1


@dataclass
class SummaryRow:
    t: float
    mean_w2_sq: float
    ci_low: float
    ci_high: float
    n_reps: int


def summarize(values) -> tuple[float, float, float]:
    """Mean with a 95% normal-approximation interval across replicates."""
    v = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(v))
    if len(v) < 2:
        return mean, mean, mean
    half = Z95 * float(np.std(v, ddof=1)) / math.sqrt(len(v))
    return mean, mean - half, mean + half


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)  # (t, replicate, w2_sq)

    @property
    def summary(self) -> list[SummaryRow]:
        out = []
        for t in sorted({r[0] for r in self.rows}):
            vals = [r[2] for r in self.rows if r[0] == t]
            mean, lo, hi = summarize(vals)
            out.append(SummaryRow(t, mean, lo, hi, len(vals)))
        return out


@dataclass
class RateFit:
    slope: float
    intercept: float
    stderr_slope: float
    window: tuple
    n_points: int

    @property
    def exponent(self) -> float:
        return -self.slope

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "stderr_slope": self.stderr_slope, "window": list(self.window),
                "n_points": self.n_points}


def _initial_states(spec: StudySpec, seed: int) -> np.ndarray:
    d = spec.model.dim
    n = spec.n_paths
    if spec.stationary_start:
        ref = spec.reference
        g = rng.generator(rng.child(seed, 1 << 40))
        return ref.mean + ref.sd * g.standard_normal((n, d))
    if spec.y0 is None:
        return np.zeros((n, d))
    y0 = np.asarray(spec.y0, dtype=np.float64)
    return np.broadcast_to(y0.reshape(-1, d) if y0.size != n * d else y0.reshape(n, d), (n, d)).copy()


def _simulate(spec: StudySpec, cfg: SimConfig, y0s: np.ndarray):
    if spec.process == "frozen":
        ref = spec.reference
        mu_star = ref.view() if isinstance(ref, GaussianReference) else ref
        return [simulate_frozen(spec.model, mu_star, y0s[0], cfg)]
    if spec.process == "self_interacting":
        return [simulate_self_interacting(spec.model, spec.pi, y0s[0], cfg)]
    return simulate_particles(spec.model, spec.n_particles, spec.pi, spec.mode, y0s, cfg)


def distance_squared(mu: EmpiricalMeasure, reference, n_proj: int = 64, seed: int = 0) -> float:
    """Squared W2 to the reference: quantile scheme for a Gaussian, exact on
    the line, sliced with ``n_proj`` directions for d > 1."""
    if isinstance(reference, GaussianReference):
        return w2_vs_gaussian_1d(mu, reference.mean, reference.sd, reference.n_quantiles) ** 2
    if mu.dim == 1:
        return w2_1d_squared(mu, reference)
    return w2_sliced(mu, reference, n_proj, seed) ** 2


def _replicate(spec: StudySpec, r: int) -> list[tuple]:
    seed = rng.child(spec.cfg.seed, r)
    cfg = spec.cfg.with_seed(seed)
    try:
        paths = _simulate(spec, cfg, _initial_states(spec, seed))
    except SimulationBlowUp as exc:
        raise StudyError(r, exc.time, exc) from exc
    out = []
    for t in spec.checkpoints:
        parts = [weighted_empirical(p, spec.wp, t) for p in paths]
        mu = parts[0] if len(parts) == 1 else mixture(parts)
        out.append((t, r, distance_squared(mu, spec.reference, spec.n_proj, rng.child(seed, 1 << 41))))
    return out


def run_convergence(spec: StudySpec, threads: int = 1) -> ConvergenceTable:
    """One trajectory per replicate, evaluated at every checkpoint.

    Replicate r uses seed ``child(cfg.seed, r)``; rows are assembled in
    replicate order, so the table does not depend on ``threads``.
    """
    reps = range(spec.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _replicate(spec, r), reps))
    else:
        results = [_replicate(spec, r) for r in reps]
    rows = sorted((row for res in results for row in res), key=lambda row: (row[0], row[1]))
    return ConvergenceTable(rows)


def fit_rate(table, window: tuple | None = None) -> RateFit:
    """Least-squares slope of log(mean W2^2) against log(t) inside ``window``.

    ``table`` is a ConvergenceTable or a list of SummaryRow. The default window
    is [t_last/100, t_last].
    """
    summary = table.summary if isinstance(table, ConvergenceTable) else list(table)
    if not summary:
        raise ValueError("empty table")
    if window is None:
        t_last = max(s.t for s in summary)
        window = (t_last / 100.0, t_last)
    lo, hi = float(window[0]), float(window[1])
    pts = [s for s in summary if lo * (1 - 1e-12) <= s.t <= hi * (1 + 1e-12)]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 checkpoints in [{lo:g}, {hi:g}], found {len(pts)}")
    if any(not s.mean_w2_sq > 0 for s in pts):
        raise ValueError("non-positive mean inside the fit window")
    x = np.log([s.t for s in pts])
    y = np.log([s.mean_w2_sq for s in pts])
    res = stats.linregress(x, y)
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), (lo, hi), len(pts))


def guaranteed_exponent(model: MvModel, process: str, pi: WeightFamily | None = None) -> float | None:
    """Supremum of the decay exponent the theory guarantees for W2^2.

    frozen: kappa; self-interacting and particle systems: min(1 - beta/alpha,
    kappa). None when pi is dirac, which lies outside Pi_2 and so outside the
    self-interacting results.
    """
    k = kappa(model.dim, model.claimed_rho)
    if process == "frozen":
        return k
    if pi is not None and pi.kind == "dirac":
        return None
    return min(1.0 - model.claimed_beta / model.claimed_alpha, k)


# ---------------------------------------------------------------------------
# mean-field OU reproduction


@dataclass
class OuReport:
    steps: np.ndarray  # trace points (step counts)
    particle_counts: list
    mean_err: dict  # N -> (replications, len(steps)) array of |m_k|
    var_err: dict  # N -> same shape, |v_k - m_k^2 - 4/9|

    def terminal(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return self.mean_err[n][:, -1], self.var_err[n][:, -1]

    def rows(self):
        for n in self.particle_counts:
            for j, k in enumerate(self.steps):
                m, m_lo, m_hi = summarize(self.mean_err[n][:, j])
                v, v_lo, v_hi = summarize(self.var_err[n][:, j])
                yield (int(k), int(n), m, m_lo, m_hi, v, v_lo, v_hi)

    HEADER = ("step", "n_particles", "mean_err", "mean_err_ci_low", "mean_err_ci_high",
              "var_err", "var_err_ci_low", "var_err_ci_high")


def trace_steps(steps: int, points: int = 40) -> np.ndarray:
    """Roughly log-spaced step counts from 1 to ``steps`` (both included)."""
    grid = np.unique(np.round(np.logspace(0, math.log10(steps), points)).astype(np.int64))
    return grid if grid[-1] == steps else np.append(grid, steps)


def _ou_run(n: int, seed: int, steps: int, points: np.ndarray):
    cfg = SimConfig(dt=1.0, t_max=float(steps), seed=seed, store_stride=steps, stepper="ou_exact")
    paths = simulate_particles(mean_field_ou(), n, WeightFamily.discrete_delayed(1.0), "weighted_empirical",
                               np.zeros((n, 1)), cfg, record_measure=True)
    tr = paths[0].measure_trace
    # refresh q happens at step q+1 and averages the samples at steps 0..q
    m = tr.mean[points - 1, 0]
    v = tr.second_moment[points - 1]
    return np.abs(m), np.abs(v - m * m - OU_INVARIANT_VARIANCE)


def reproduce_ou(steps: int, replications: int, particle_counts, seed: int = 0,
                 threads: int = 1, points: int = 40) -> OuReport:
    """Exact-step simulation of the mean-field OU particle systems.

    Replicate r of every particle count uses seed ``child(seed, r)``, so the
    particle counts share common random numbers.
    """
    if steps < 1000:
        raise ValueError("steps must be at least 1000")
    if replications < 1:
        raise ValueError("replications must be positive")
    counts = [int(n) for n in particle_counts]
    if not counts or min(counts) < 1:
        raise ValueError("particle counts must be positive")
    grid = trace_steps(steps, points)
    tasks = [(n, r) for n in counts for r in range(replications)]

    def work(task):
        n, r = task
        return _ou_run(n, rng.child(seed, r), steps, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    mean_err, var_err = {}, {}
    for n in counts:
        res = [results[i] for i, (nn, _) in enumerate(tasks) if nn == n]
        mean_err[n] = np.array([a for a, _ in res])
        var_err[n] = np.array([b for _, b in res])
    return OuReport(grid, counts, mean_err, var_err)
