"""Discrete measures on R^d, time-weight families on [0, 1], and their statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

WEIGHT_TOL = 1e-12
RENORM_TOL = 1e-9


class MeasureView(Protocol):
    """What model coefficients may read from a measure argument."""

    def mean(self) -> np.ndarray: ...

    def second_moment(self) -> float: ...

    def expectation(self, f: Callable[[np.ndarray], float]) -> float: ...


def _as_atoms(atoms) -> np.ndarray:
    a = np.asarray(atoms, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError("atoms must be a list of vectors")
    return a


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finitely many weighted atoms; ``atoms`` has shape (n, d)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_atoms(self.atoms)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if atoms.shape[0] == 0:
            raise ValueError("empty atom list")
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError(f"{atoms.shape[0]} atoms but {weights.shape[0]} weights")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atom coordinates must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("negative weight")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def second_moment(self) -> float:
        return float(self.weights @ np.einsum("ij,ij->i", self.atoms, self.atoms))

    def expectation(self, f) -> float:
        return float(sum(w * f(a) for a, w in zip(self.atoms, self.weights)))

    def same_distribution(self, other: EmpiricalMeasure) -> bool:
        a, b = merge_atoms(self), merge_atoms(other)
        return (a.atoms.shape == b.atoms.shape and np.array_equal(a.atoms, b.atoms)
                and np.allclose(a.weights, b.weights, rtol=0, atol=1e-12))


def make_empirical(atoms, weights=None) -> EmpiricalMeasure:
    """Validated measure; weights off from 1 by at most 1e-9 are renormalized.

    ``weights=None`` means uniform weights.
    """
    a = _as_atoms(atoms)
    if weights is None:
        if a.shape[0] == 0:
            raise ValueError("empty atom list")
        return EmpiricalMeasure(a, np.full(a.shape[0], 1.0 / a.shape[0]))
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0 or a.shape[0] == 0:
        raise ValueError("empty atom list")
    if np.any(w < 0):
        raise ValueError("negative weight")
    total = w.sum()
    if not abs(total - 1.0) <= RENORM_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1")
    return EmpiricalMeasure(a, w / total)


def merge_atoms(mu: EmpiricalMeasure) -> EmpiricalMeasure:
    """Coincident atoms combined by adding weights; atoms come out sorted."""
    uniq, inverse = np.unique(mu.atoms, axis=0, return_inverse=True)
    w = np.bincount(inverse.reshape(-1), weights=mu.weights, minlength=uniq.shape[0])
    return make_empirical(uniq, w)


def mixture(measures: Sequence[EmpiricalMeasure]) -> EmpiricalMeasure:
    """Equal-weight average of measures, coincident atoms merged."""
    k = len(measures)
    atoms = np.concatenate([m.atoms for m in measures])
    weights = np.concatenate([m.weights / k for m in measures])
    return merge_atoms(make_empirical(atoms, weights))


def moments(mu: EmpiricalMeasure) -> tuple[np.ndarray, float]:
    return mu.mean(), mu.second_moment()


class GaussianMeasure:
    """Closed-form normal measure N(mean, cov) usable as a measure argument."""

    def __init__(self, mean, cov):
        self._mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        d = self._mean.shape[0]
        self._cov = cov * np.eye(d) if cov.ndim == 0 else cov.reshape(d, d)

    @classmethod
    def from_sd(cls, mean: float, sd: float) -> GaussianMeasure:
        return cls([mean], sd * sd)

    def mean(self) -> np.ndarray:
        return self._mean.copy()

    def second_moment(self) -> float:
        return float(self._mean @ self._mean + np.trace(self._cov))

    def expectation(self, f, nodes: int = 20) -> float:
        # Gauss-Hermite tensor rule; exact for polynomials of degree < 2*nodes
        d = self._mean.shape[0]
        if d > 4:
            raise ValueError("Gaussian expectation is limited to d <= 4")
        x, w = np.polynomial.hermite_e.hermegauss(nodes)
        w = w / w.sum()
        lam, vec = np.linalg.eigh(self._cov)
        root = vec * np.sqrt(np.clip(lam, 0.0, None))
        total = 0.0
        for idx in np.ndindex(*(nodes,) * d):
            z = x[list(idx)]
            total += float(np.prod(w[list(idx)])) * f(self._mean + root @ z)
        return total


# ---------------------------------------------------------------------------
# weight families


@dataclass(frozen=True)
class WeightFamily:
    """A rule t -> pi_t on [0, 1]: ``dirac`` (pi_t = delta_1), ``lebesgue``, or
    ``discrete_delayed`` sampling every ``tau`` time units with delay ``theta``."""

    kind: str
    tau: float = 1.0
    theta: float = 0.0

    KINDS = ("dirac", "lebesgue", "discrete_delayed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown weight family {self.kind!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.theta >= 0:
            raise ValueError("theta must be non-negative")

    @classmethod
    def dirac(cls) -> WeightFamily:
        return cls("dirac")

    @classmethod
    def lebesgue(cls) -> WeightFamily:
        return cls("lebesgue")

    @classmethod
    def discrete_delayed(cls, tau: float = 1.0, theta: float = 0.0) -> WeightFamily:
        return cls("discrete_delayed", float(tau), float(theta))

    @property
    def continuous(self) -> bool:
        return self.kind != "discrete_delayed"


@dataclass(frozen=True, eq=False)
class DiscreteWeights:
    """A realized pi_t: component i has mass ``weights[i]`` spread uniformly over
    ``positions[i] -/+ widths[i]/2``; zero width is a point mass."""

    positions: np.ndarray
    weights: np.ndarray
    widths: np.ndarray = field(default=None)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        wid = np.zeros_like(pos) if self.widths is None else np.asarray(self.widths, dtype=np.float64).reshape(-1)
        if not pos.shape == w.shape == wid.shape or pos.size == 0:
            raise ValueError("positions, weights and widths must be non-empty and aligned")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must be non-negative and sum to 1")
        if np.any(wid < 0) or np.any(pos - wid / 2 < -1e-15) or np.any(pos + wid / 2 > 1 + 1e-15):
            raise ValueError("weight support must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "widths", wid)

    @property
    def lower(self) -> np.ndarray:
        return np.maximum(self.positions - self.widths / 2, 0.0)

    @property
    def upper(self) -> np.ndarray:
        return np.minimum(self.positions + self.widths / 2, 1.0)


def realize_weights(family: WeightFamily, t: float, grid_size: int = 1) -> DiscreteWeights:
    """pi_t on a finite grid.

    lebesgue: ``grid_size`` equal cells ``[i/n, (i+1)/n]`` located at their
    midpoints, so integrals against it are exact cell by cell.
    discrete_delayed: ``floor(t/tau)`` point masses at ``max(k*tau - theta, 0)/t``;
    masses that land on s = 0 are moved to ``tau/t`` so s^-eps stays finite.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if family.kind == "dirac":
        return DiscreteWeights(np.array([1.0]), np.array([1.0]))
    if family.kind == "lebesgue":
        n = int(grid_size)
        if n < 1:
            raise ValueError("grid_size must be at least 1")
        pos = (2.0 * np.arange(n) + 1.0) / (2.0 * n)
        return DiscreteWeights(pos, np.full(n, 1.0 / n), np.full(n, 1.0 / n))
    n_t = math.floor(t / family.tau + 1e-12)
    if n_t < 1:
        raise ValueError(f"t={t} is shorter than one sampling period tau={family.tau}")
    sample_times = np.maximum(np.arange(n_t) * family.tau - family.theta, 0.0)
    pos = sample_times / t
    pos[pos == 0.0] = family.tau / t
    return DiscreteWeights(pos, np.full(n_t, 1.0 / n_t))


def _nearest_index(times: np.ndarray, targets: np.ndarray, scale: float) -> np.ndarray:
    # ties (within round-off) resolve to the later sample
    right = np.clip(np.searchsorted(times, targets, side="left"), 0, len(times) - 1)
    left = np.clip(right - 1, 0, len(times) - 1)
    d_right = np.abs(times[right] - targets)
    d_left = np.abs(targets - times[left])
    return np.where(d_right <= d_left + 1e-9 * scale, right, left)


def weighted_empirical(path, family: WeightFamily, t: float, grid_size: int | None = None) -> EmpiricalMeasure:
    """The weighted empirical measure of a stored path at time t.

    Each component of pi_t at s picks the stored state nearest to time ``t*s``.
    ``grid_size`` (lebesgue only) defaults to the number of stored samples in (0, t].
    """
    times = np.asarray(path.times, dtype=np.float64)
    states = np.asarray(path.states, dtype=np.float64)
    if not t > 0:
        raise ValueError("t must be positive")
    if t > times[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"t={t} is beyond the path horizon {times[-1]}")
    if grid_size is None:
        grid_size = max(1, int(np.count_nonzero((times > 0) & (times <= t * (1 + 1e-12)))))
    pi = realize_weights(family, t, grid_size)
    idx = _nearest_index(times, t * pi.positions, t)
    w = np.bincount(idx, weights=pi.weights, minlength=len(times))
    keep = np.flatnonzero(w > 0)
    return merge_atoms(make_empirical(states[keep], w[keep]))


# ---------------------------------------------------------------------------
# online moments


@dataclass
class MomentAccumulator:
    """Running mean and second moment (average of |x|^2) without storing samples."""

    count: int
    mean: np.ndarray
    second_moment: float = 0.0

    @classmethod
    def empty(cls, dim: int) -> MomentAccumulator:
        return cls(0, np.zeros(dim), 0.0)

    def update(self, sample) -> MomentAccumulator:
        x = np.atleast_1d(np.asarray(sample, dtype=np.float64))
        if x.shape != self.mean.shape:
            raise ValueError(f"sample has shape {x.shape}, expected {self.mean.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite sample")
        k = self.count
        # m_{k+1} = k/(k+1) m_k + x_k/(k+1)
        self.mean = k / (k + 1) * self.mean + x / (k + 1)
        self.second_moment = k / (k + 1) * self.second_moment + float(x @ x) / (k + 1)
        self.count = k + 1
        return self


def update_online(acc: MomentAccumulator, sample) -> MomentAccumulator:
    """Functional form of :meth:`MomentAccumulator.update`; ``acc`` is left untouched."""
    return MomentAccumulator(acc.count, acc.mean.copy(), acc.second_moment).update(sample)


# ---------------------------------------------------------------------------
# Pi-class statistics
#
# pi_t components are point masses or uniform cells, so each statistic is
# integrated exactly through antiderivatives of the kernel:
#   P1' = s^-eps,  P2' = P1,
#   g(u) = min(cap, |u|^-eps) with cap = t^eps, G1' = g, G2' = G1, G1(0)=G2(0)=0.


def _p1(u, eps):
    u = np.asarray(u, dtype=np.float64)
    if eps == 1.0:
        with np.errstate(divide="ignore"):
            return np.log(u)
    return u ** (1.0 - eps) / (1.0 - eps)


def _p2(u, eps):
    u = np.asarray(u, dtype=np.float64)
    if eps == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)) - u, 0.0)
    return u ** (2.0 - eps) / ((1.0 - eps) * (2.0 - eps))


class _CappedKernel:
    def __init__(self, eps: float, t: float):
        self.eps = eps
        self.cap = t ** eps
        self.knee = 1.0 / t  # |u|^-eps == cap here

    def g(self, u):
        u = np.abs(np.asarray(u, dtype=np.float64))
        with np.errstate(divide="ignore"):
            return np.where(u <= self.knee, self.cap, u ** -self.eps)

    def g1(self, u):
        u = np.asarray(u, dtype=np.float64)
        a = np.abs(u)
        kn, eps = self.knee, self.eps
        inner = self.cap * a
        outer = self.cap * kn + _p1(np.maximum(a, kn), eps) - _p1(kn, eps)
        return np.sign(u) * np.where(a <= kn, inner, outer)

    def g2(self, u):
        a = np.abs(np.asarray(u, dtype=np.float64))
        kn, eps = self.knee, self.eps
        inner = self.cap * a * a / 2.0
        b = np.maximum(a, kn)
        outer = (self.cap * kn * kn / 2.0 + self.cap * kn * (b - kn)
                 + _p2(b, eps) - _p2(kn, eps) - _p1(kn, eps) * (b - kn))
        return np.where(a <= kn, inner, outer)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    return eps


def _pi1_value(pi: DiscreteWeights, eps: float) -> float:
    lo, hi = pi.lower, pi.upper
    cells = hi > lo
    if np.any(~cells & (pi.positions <= 0.0)):
        raise ValueError("point mass at s = 0 makes the statistic infinite")
    out = np.empty_like(pi.positions)
    out[~cells] = pi.positions[~cells] ** -eps
    if np.any(cells):
        with np.errstate(divide="ignore", invalid="ignore"):
            out[cells] = (_p1(hi[cells], eps) - _p1(lo[cells], eps)) / (hi[cells] - lo[cells])
    return float(pi.weights @ out)


def _pi2_single(pi: DiscreteWeights, k: _CappedKernel) -> float:
    lo, hi = pi.lower, pi.upper
    cells = hi > lo
    out = np.empty_like(pi.positions)
    out[~cells] = k.g(pi.positions[~cells])
    out[cells] = (k.g1(hi[cells]) - k.g1(lo[cells])) / (hi[cells] - lo[cells])
    return float(pi.weights @ out)


def _uniform_span(pi: DiscreteWeights):
    """(lo, hi, density) when pi is a constant density on [lo, hi], else None."""
    lo, hi = pi.lower, pi.upper
    if np.any(hi <= lo):
        return None
    order = np.argsort(lo)
    lo, hi, w = lo[order], hi[order], pi.weights[order]
    span = hi[-1] - lo[0]
    if not np.allclose(lo[1:], hi[:-1], rtol=0, atol=1e-12 * span):
        return None
    dens = w / (hi - lo)
    if not np.allclose(dens, dens[0], rtol=1e-9, atol=0):
        return None
    return lo[0], hi[-1], 1.0 / span


def _pi2_double(pi: DiscreteWeights, k: _CappedKernel, chunk: int = 2048) -> float:
    span = _uniform_span(pi)
    if span is not None:
        # density c on [lo, hi]: the double integral of g(s1 - s2) is 2 c^2 G2(hi - lo)
        lo, hi, c = span
        return float(2.0 * c * c * k.g2(hi - lo))
    lo, hi, w = pi.lower, pi.upper, pi.weights
    width = hi - lo
    cell = width > 0
    total = 0.0
    n = len(w)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        a, b = lo[sl, None], hi[sl, None]
        c, d = lo[None, :], hi[None, :]
        ca, cb = cell[sl, None], cell[None, :]
        x = pi.positions[sl, None]
        y = pi.positions[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            both = (k.g2(d - a) - k.g2(d - b) - k.g2(c - a) + k.g2(c - b)) / ((b - a) * (d - c))
            left_cell = (k.g1(y - a) - k.g1(y - b)) / (b - a)
            right_cell = (k.g1(d - x) - k.g1(c - x)) / (d - c)
        val = np.where(ca & cb, both,
                       np.where(ca, left_cell, np.where(cb, right_cell, k.g(y - x))))
        total += float(w[sl] @ val @ w)
    return total


def pi1_statistic(family: WeightFamily, eps: float, t_list, grid_size: int = 10_000) -> list[float]:
    """Integral of s^-eps against pi_t, for each t (Pi_1 membership trace)."""
    eps = _check_eps(eps)
    return [_pi1_value(realize_weights(family, float(t), grid_size), eps) for t in t_list]


def pi2_statistic(family: WeightFamily, eps: float, t_list, grid_size: int = 10_000) -> list[tuple[float, float]]:
    """(single, double) capped integrals of pi_t for each t (Pi_2 membership trace).

    single = int t^eps ^ s^-eps pi_t(ds);
    double = int int t^eps ^ |s1 - s2|^-eps pi_t(ds1) pi_t(ds2).
    """
    eps = _check_eps(eps)
    out = []
    for t in t_list:
        t = float(t)
        pi = realize_weights(family, t, grid_size)
        k = _CappedKernel(eps, t)
        out.append((_pi2_single(pi, k), _pi2_double(pi, k)))
    return out


def tail_average(values: Sequence[float], fraction: float = 0.5) -> float:
    """Mean of the last ``fraction`` of a statistic trace (limsup proxy)."""
    vals = np.asarray(values, dtype=np.float64)
    n = max(1, int(math.ceil(len(vals) * fraction)))
    return float(vals[-n:].mean())
