"""Wasserstein-2 distances between discrete measures and against a 1-D Gaussian."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import ndtri

from . import kernels, rng
from ._simplex import transport
from .measures import EmpiricalMeasure, make_empirical

EXACT_MAX_ATOMS = 64
_ASSIGNMENT_MAX_CELLS = 512


def _canonical(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    """Fixed argument order so every distance is exactly symmetric."""
    key_mu = (len(mu), mu.atoms.tobytes(), mu.weights.tobytes())
    key_nu = (len(nu), nu.atoms.tobytes(), nu.weights.tobytes())
    return (nu, mu, True) if key_nu < key_mu else (mu, nu, False)


def _check_dims(mu, nu):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def _sorted_1d(mu: EmpiricalMeasure):
    x = mu.atoms[:, 0]
    order = np.argsort(x, kind="stable")
    return x[order], mu.weights[order]


def w2_1d_squared(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    _check_dims(mu, nu)
    if mu.dim != 1:
        raise ValueError("w2_1d needs 1-dimensional measures")
    mu, nu, _ = _canonical(mu, nu)
    xa, wa = _sorted_1d(mu)
    xb, wb = _sorted_1d(nu)
    return max(0.0, kernels.w2_sorted_cost(xa, wa, xb, wb))


def w2_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact W2 on the line through the monotone (quantile) coupling."""
    return math.sqrt(w2_1d_squared(mu, nu))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    rows: EmpiricalMeasure
    cols: EmpiricalMeasure
    plan: np.ndarray
    cost: float

    def __post_init__(self):
        if np.any(self.plan < -1e-15):
            raise ValueError("negative coupling entry")
        if not (np.allclose(self.plan.sum(axis=1), self.rows.weights, atol=1e-9, rtol=0)
                and np.allclose(self.plan.sum(axis=0), self.cols.weights, atol=1e-9, rtol=0)):
            raise ValueError("coupling marginals do not match")

    def to_json(self) -> dict:
        return {
            "rows": {"atoms": self.rows.atoms.tolist(), "weights": self.rows.weights.tolist()},
            "cols": {"atoms": self.cols.atoms.tolist(), "weights": self.cols.weights.tolist()},
            "plan": self.plan.tolist(),
            "cost": self.cost,
        }


def _sq_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _uniform_count(mu: EmpiricalMeasure) -> int | None:
    n = len(mu)
    return n if np.allclose(mu.weights, 1.0 / n, rtol=0, atol=1e-15) else None


def w2_exact_small(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> tuple[float, TransportPlan]:
    """Exact discrete W2 in any dimension, with its optimal plan.

    Equal-weight pairs are refined to a common grid of lcm(n, m) cells and
    solved as an assignment problem; general weights go through the
    transportation simplex. Oracle use only: at most 64 atoms per side.
    """
    _check_dims(mu, nu)
    if len(mu) > EXACT_MAX_ATOMS or len(nu) > EXACT_MAX_ATOMS:
        raise ValueError(f"exact OT is capped at {EXACT_MAX_ATOMS} atoms per measure")
    a, b, swapped = _canonical(mu, nu)
    cost = _sq_dist(a.atoms, b.atoms)
    n, m = len(a), len(b)
    un, um = _uniform_count(a), _uniform_count(b)
    cells = math.lcm(n, m)
    if un and um and cells <= _ASSIGNMENT_MAX_CELLS:
        ra, rb = cells // n, cells // m
        big = np.repeat(np.repeat(cost, ra, axis=0), rb, axis=1)
        r, c = linear_sum_assignment(big)
        plan = np.zeros((n, m))
        np.add.at(plan, (r // ra, c // rb), 1.0 / cells)
    else:
        plan = transport(a.weights, b.weights, cost)
    total = max(0.0, float(np.sum(plan * cost)))
    if swapped:
        plan = plan.T
    return math.sqrt(total), TransportPlan(mu, nu, plan, total)


def _directions(dim: int, n_proj: int, seed: int) -> np.ndarray:
    g = rng.generator(seed).standard_normal((n_proj, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def w2_sliced(mu: EmpiricalMeasure, nu: EmpiricalMeasure, n_proj: int = 64, seed: int = 0) -> float:
    """Root mean of squared 1-D distances over random projection directions."""
    _check_dims(mu, nu)
    if n_proj < 1:
        raise ValueError("n_proj must be at least 1")
    if mu.dim == 1:
        return w2_1d(mu, nu)
    mu, nu, _ = _canonical(mu, nu)
    total = 0.0
    for theta in _directions(mu.dim, n_proj, seed):
        pa = make_empirical(mu.atoms @ theta, mu.weights)
        pb = make_empirical(nu.atoms @ theta, nu.weights)
        total += w2_1d_squared(pa, pb)
    return math.sqrt(total / n_proj)


def gaussian_quantile_measure(mean: float, sd: float, n_quantiles: int) -> EmpiricalMeasure:
    """N(mean, sd^2) discretized at its ``n_quantiles`` midpoint quantiles."""
    if not sd > 0:
        raise ValueError("sd must be positive")
    u = (2.0 * np.arange(n_quantiles) + 1.0) / (2.0 * n_quantiles)
    return make_empirical(mean + sd * ndtri(u), np.full(n_quantiles, 1.0 / n_quantiles))


def w2_vs_gaussian_1d(mu: EmpiricalMeasure, mean: float, sd: float, n_quantiles: int = 10_000) -> float:
    if n_quantiles < 100:
        raise ValueError("n_quantiles must be at least 100")
    return w2_1d(mu, gaussian_quantile_measure(mean, sd, n_quantiles))
