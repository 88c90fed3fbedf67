"""Trajectories of frozen-measure, self-interacting and particle SDEs.

Built-in models run on the compiled moment kernel: their coefficients read
only the mean and second moment of the measure argument, so the weighted
empirical measure is carried as online moment accumulators in O(1) memory.
Other models take the generic path, which materializes the measure argument
as atoms at every refresh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .measures import (
    MeasureView,
    MomentAccumulator,
    WeightFamily,
    make_empirical,
)
from .model import MvModel, eval_diffusion, eval_drift

STEPPERS = ("euler", "ou_exact")
PARTICLE_MODES = ("weighted_empirical", "instantaneous_law")
_CHUNK_VALUES = 1 << 18


class SimulationBlowUp(RuntimeError):
    """The state left the ball |x| <= 1e12 (or became NaN)."""

    def __init__(self, time: float, particle: int | None = None):
        where = "" if particle is None else f" (particle {particle})"
        super().__init__(f"state blew up at t={time:g}{where}")
        self.time = time
        self.particle = particle


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    seed: int = 0
    store_stride: int = 1
    measure_refresh: float | None = None  # None: max(dt, t_max/1000)
    stepper: str = "euler"

    def __post_init__(self):
        rng.check_seed(self.seed)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max >= self.dt:
            raise ValueError("t_max must be at least dt")
        if int(self.store_stride) != self.store_stride or self.store_stride < 1:
            raise ValueError("store_stride must be a positive integer")
        if self.measure_refresh is not None and not self.measure_refresh >= self.dt * (1 - 1e-12):
            raise ValueError("measure_refresh must be at least dt")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    @property
    def refresh(self) -> float:
        return self.measure_refresh if self.measure_refresh is not None else max(self.dt, self.t_max / 1000.0)

    def with_seed(self, seed: int) -> SimConfig:
        return SimConfig(self.dt, self.t_max, seed, self.store_stride, self.measure_refresh, self.stepper)


@dataclass
class MeasureTrace:
    """Moments of the measure argument after each refresh."""

    times: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray


@dataclass
class PathRecord:
    times: np.ndarray
    states: np.ndarray  # (n_stored, d)
    acc: MomentAccumulator  # over every generated state, stored or not
    seed_trace: int
    measure_trace: MeasureTrace | None = None

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


# ---------------------------------------------------------------------------
# measure-argument schedule


@dataclass
class _Schedule:
    mode: int
    sample_steps: np.ndarray
    refresh_steps: np.ndarray
    refresh_counts: np.ndarray
    need_history: bool


def _steps_of(duration: float, dt: float, what: str) -> int:
    k = int(round(duration / dt))
    if k < 1:
        raise ValueError(f"{what}={duration} is shorter than dt={dt}")
    return k


def _schedule(family: WeightFamily | None, cfg: SimConfig, current: bool = False) -> _Schedule:
    """When to sample the path and when to rebuild the measure argument.

    A refresh at step k takes effect for the move k -> k+1 and sees samples
    taken strictly before step k.
    """
    n = cfg.n_steps
    empty = np.zeros(0, dtype=np.int64)
    if family is None:
        return _Schedule(kernels.MEASURE_FIXED, empty, empty, empty, False)
    if family.kind == "discrete_delayed":
        if family.tau < cfg.dt * (1 - 1e-12):
            raise ValueError(f"sampling period tau={family.tau} is shorter than dt={cfg.dt}")
        period = _steps_of(family.tau, cfg.dt, "tau")
    else:
        period = _steps_of(cfg.refresh, cfg.dt, "measure_refresh")
    refresh_steps = np.arange(period, n + 1, period, dtype=np.int64)
    if current or family.kind == "dirac":
        return _Schedule(kernels.MEASURE_CURRENT, empty, refresh_steps, np.zeros_like(refresh_steps), False)
    if family.kind == "lebesgue":
        return _Schedule(kernels.MEASURE_ACCUMULATE, np.arange(n + 1, dtype=np.int64),
                         refresh_steps, refresh_steps.copy(), False)
    delay = int(round(family.theta / cfg.dt))
    counts = refresh_steps // period
    n_samples = int(counts[-1]) if len(counts) else 0
    sample_steps = np.maximum(np.arange(n_samples, dtype=np.int64) * period - delay, 0)
    return _Schedule(kernels.MEASURE_ACCUMULATE, sample_steps, refresh_steps, counts, delay > 0)


# ---------------------------------------------------------------------------
# drivers


def _noise_chunks(seeds, dim, n_steps):
    gens = [rng.generator(s) for s in seeds]
    chunk = max(1, min(n_steps, _CHUNK_VALUES // (len(gens) * dim)))
    done = 0
    while done < n_steps:
        c = min(chunk, n_steps - done)
        yield np.stack([g.standard_normal((c, dim)) for g in gens], axis=1)
        done += c


def _coefs(dt: float):
    ea = math.exp(-2.0 * dt)
    return (dt, math.sqrt(dt), ea, (1.0 - ea) / 2.0, math.sqrt(1.0 - math.exp(-4.0 * dt)))


def _check_stepper(model: MvModel, cfg: SimConfig):
    if cfg.stepper == "ou_exact" and (model.kernel is None or model.kernel.code != kernels.MODEL_OU):
        raise ValueError("the ou_exact stepper applies only to the mean-field-ou model")


def _records(times_all, states, acc_mean, acc_m2, count, seeds, trace) -> list[PathRecord]:
    out = []
    for i, seed in enumerate(seeds):
        acc = MomentAccumulator(int(count), acc_mean[i].copy(), float(acc_m2[i]))
        out.append(PathRecord(times_all, states[:, i, :].copy(), acc, seed, trace))
    return out


def _run_kernel(model, y0s, seeds, sched, fixed, cfg, record_measure, impl=None):
    impl = impl or kernels
    n = cfg.n_steps
    fixed_m, fixed_v = fixed if fixed is not None else (np.zeros(model.dim), 0.0)
    stepper = kernels.STEP_OU_EXACT if cfg.stepper == "ou_exact" else kernels.STEP_EULER
    system = impl.MomentSystem(
        model.kernel.code, model.kernel.params, y0s, _coefs(cfg.dt), stepper, sched.mode,
        fixed_m, fixed_v, sched.sample_steps, sched.refresh_steps, sched.refresh_counts,
        sched.need_history, record_measure, n, int(cfg.store_stride),
    )
    for noise in _noise_chunks(seeds, model.dim, n):
        blown = system.advance(noise)
        if blown >= 0:
            bad = np.flatnonzero(~(np.abs(system.state()) <= 1e12).all(axis=1))
            raise SimulationBlowUp(blown * cfg.dt, int(bad[0]) if len(bad) and len(seeds) > 1 else None)
    system.finish()
    steps, states = system.stored()
    acc_mean, acc_m2, count = system.accumulators()
    trace = None
    if record_measure:
        rows = system.trace()
        trace = MeasureTrace(sched.refresh_steps * cfg.dt, rows[:, :-1].copy(), rows[:, -1].copy())
    return _records(steps * cfg.dt, states, acc_mean, acc_m2, count, seeds, trace)


def _run_generic(model, y0s, seeds, sched, fixed_view, cfg, record_measure):
    if cfg.stepper != "euler":
        raise ValueError("models without a compiled kernel support only the euler stepper")
    n = cfg.n_steps
    n_part, d = y0s.shape
    dt, sqdt = cfg.dt, math.sqrt(cfg.dt)
    history = np.empty((n + 1, n_part, d))
    history[0] = y0s
    accs = [MomentAccumulator.empty(d) for _ in range(n_part)]
    if sched.mode == kernels.MEASURE_FIXED:
        mu: MeasureView = fixed_view
    else:
        mu = make_empirical(y0s)
    q = 0
    trace_rows = []
    noise_iter = _noise_chunks(seeds, d, n)
    buf, pos = np.zeros((0, n_part, d)), 0
    for k in range(n + 1):
        y = history[k]
        for i in range(n_part):
            accs[i].update(y[i])
        if q < len(sched.refresh_steps) and sched.refresh_steps[q] == k:
            if sched.mode == kernels.MEASURE_CURRENT:
                mu = make_empirical(y)
            elif sched.mode == kernels.MEASURE_ACCUMULATE and sched.refresh_counts[q] > 0:
                idx = sched.sample_steps[: sched.refresh_counts[q]]
                mu = make_empirical(history[idx].reshape(-1, d))
            if record_measure:
                trace_rows.append(np.append(mu.mean(), mu.second_moment()))
            q += 1
        if k == n:
            break
        if pos == len(buf):
            buf, pos = next(noise_iter), 0
        xi = buf[pos]
        pos += 1
        nxt = np.empty_like(y)
        for i in range(n_part):
            b = eval_drift(model, y[i], mu)
            s = eval_diffusion(model, y[i], mu)
            nxt[i] = y[i] + b * dt + s @ (sqdt * xi[i])
        if not np.all(np.abs(nxt) <= 1e12):
            bad = np.flatnonzero(~(np.abs(nxt) <= 1e12).all(axis=1))
            raise SimulationBlowUp((k + 1) * dt, int(bad[0]) if n_part > 1 else None)
        history[k + 1] = nxt
    stride = int(cfg.store_stride)
    keep = np.arange(0, n + 1, stride)
    if keep[-1] != n:
        keep = np.append(keep, n)
    trace = None
    if record_measure:
        rows = np.array(trace_rows).reshape(-1, d + 1)
        trace = MeasureTrace(sched.refresh_steps * cfg.dt, rows[:, :-1], rows[:, -1])
    acc_mean = np.array([a.mean for a in accs])
    acc_m2 = np.array([a.second_moment for a in accs])
    return _records(keep * cfg.dt, history[keep], acc_mean, acc_m2, n + 1, seeds, trace)


def _initial(model: MvModel, y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(n, -1)
    if y.shape[1] != model.dim:
        raise ValueError(f"initial state has dimension {y.shape[1]}, model has {model.dim}")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    return y


def _backend(name):
    if name is None:
        return None
    table = kernels.backends()
    if name not in table:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(table)}")
    return table[name]


def _dispatch(model, y0s, seeds, sched, mu_star, cfg, record_measure, backend=None):
    _check_stepper(model, cfg)
    impl = _backend(backend)
    if model.kernel is not None:
        fixed = None
        if mu_star is not None:
            fixed = (np.atleast_1d(np.asarray(mu_star.mean(), dtype=np.float64)), float(mu_star.second_moment()))
        return _run_kernel(model, y0s, seeds, sched, fixed, cfg, record_measure, impl)
    return _run_generic(model, y0s, seeds, sched, mu_star, cfg, record_measure)


def simulate_frozen(model: MvModel, mu_star: MeasureView, x0, cfg: SimConfig,
                    record_measure: bool = False, backend: str | None = None) -> PathRecord:
    """Euler (or exact OU) path with the measure argument fixed at ``mu_star``."""
    y0 = _initial(model, x0, 1)
    return _dispatch(model, y0, [cfg.seed], _schedule(None, cfg), mu_star, cfg, record_measure, backend)[0]


def simulate_self_interacting(model: MvModel, pi: WeightFamily, y0, cfg: SimConfig,
                              record_measure: bool = False, backend: str | None = None) -> PathRecord:
    """Path whose coefficients read its own weighted empirical measure.

    The measure argument starts as delta_{y0} and is rebuilt every
    ``cfg.refresh`` time units (continuous families) or every ``pi.tau``
    (discrete_delayed, piecewise-frozen coefficients).
    """
    y = _initial(model, y0, 1)
    return _dispatch(model, y, [cfg.seed], _schedule(pi, cfg), None, cfg, record_measure, backend)[0]


def simulate_particles(model: MvModel, n_particles: int, pi: WeightFamily, mode: str, y0s,
                       cfg: SimConfig, record_measure: bool = False,
                       backend: str | None = None) -> list[PathRecord]:
    """N particles driven by independent noises and one shared measure argument.

    ``weighted_empirical``: the average over particles of their weighted
    empirical measures. ``instantaneous_law``: the current particle cloud.
    Particle i draws its noise from ``rng.child(cfg.seed, i)``. ``backend``
    ("compiled" or "python") pins the kernel implementation.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be positive")
    if mode not in PARTICLE_MODES:
        raise ValueError(f"mode must be one of {PARTICLE_MODES}")
    y = _initial(model, y0s, n_particles)
    seeds = [rng.child(cfg.seed, i) for i in range(n_particles)]
    sched = _schedule(pi, cfg, current=(mode == "instantaneous_law"))
    return _dispatch(model, y, seeds, sched, None, cfg, record_measure, backend)


def ou_exact_step(y: float, m: float, v: float, xi: float) -> float:
    """One unit-time step of the mean-field OU model with frozen mean m and
    second moment v, exact in law."""
    if v < 0:
        raise ValueError("second moment must be non-negative")
    ea = math.exp(-2.0)
    return ea * y - (1.0 - ea) / 2.0 * m + (1.0 - math.sqrt(v) / 2.0) * math.sqrt(1.0 - math.exp(-4.0)) * xi

