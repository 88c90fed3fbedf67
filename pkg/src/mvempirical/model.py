"""McKean-Vlasov models, the convergence exponent kappa, and assumption probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels, rng
from .measures import EmpiricalMeasure, MeasureView, make_empirical
from .wasserstein import w2_1d, w2_exact_small

VIOLATION_TOL = 1e-9


class ModelEvaluationError(ArithmeticError):
    """A drift or diffusion evaluation produced a non-finite value."""

    def __init__(self, message, x=None, measure_summary=None):
        super().__init__(message)
        self.x = x
        self.measure_summary = measure_summary


@dataclass(frozen=True)
class KernelSpec:
    """Compiled-kernel form of a model whose coefficients read only the mean
    and second moment of the measure argument."""

    code: int
    params: tuple = ()


@dataclass(frozen=True)
class MvModel:
    name: str
    dim: int
    drift: Callable[[np.ndarray, MeasureView], np.ndarray]
    diffusion: Callable[[np.ndarray, MeasureView], np.ndarray]
    claimed_alpha: float
    claimed_beta: float
    claimed_gamma: float
    claimed_rho: float
    claimed_K: float
    kernel: KernelSpec | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.claimed_alpha > self.claimed_beta >= 0:
            raise ValueError("claimed constants need alpha > beta >= 0")
        if not (self.claimed_gamma > 0 and self.claimed_rho > 0 and self.claimed_K >= 0):
            raise ValueError("claimed constants need gamma > 0, rho > 0, K >= 0")

    @property
    def constants(self) -> dict:
        return {"alpha": self.claimed_alpha, "beta": self.claimed_beta,
                "gamma": self.claimed_gamma, "rho": self.claimed_rho, "K": self.claimed_K}

    def without_kernel(self) -> MvModel:
        """Same coefficients, forced onto the generic (atom-materializing) path."""
        return MvModel(self.name, self.dim, self.drift, self.diffusion, self.claimed_alpha,
                       self.claimed_beta, self.claimed_gamma, self.claimed_rho, self.claimed_K,
                       None, dict(self.params))


def kappa(d: int, rho: float) -> float:
    """Empirical-measure rate exponent rho / ((d + 2)(rho + 2))."""
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if not rho > 0:
        raise ValueError("rho must be positive")
    return rho / ((d + 2) * (rho + 2))


def _summary(mu) -> dict:
    try:
        return {"mean": np.asarray(mu.mean()).tolist(), "second_moment": float(mu.second_moment())}
    except Exception:  # summary is diagnostic only
        return {}


def _check_x(model: MvModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (model.dim,):
        raise ValueError(f"state has shape {x.shape}, model dimension is {model.dim}")
    return x


def eval_drift(model: MvModel, x, mu: MeasureView) -> np.ndarray:
    x = _check_x(model, x)
    out = np.atleast_1d(np.asarray(model.drift(x, mu), dtype=np.float64))
    if out.shape != (model.dim,) or not np.all(np.isfinite(out)):
        raise ModelEvaluationError(f"{model.name}: drift is not a finite {model.dim}-vector",
                                   x, _summary(mu))
    return out


def eval_diffusion(model: MvModel, x, mu: MeasureView) -> np.ndarray:
    x = _check_x(model, x)
    out = np.asarray(model.diffusion(x, mu), dtype=np.float64)
    if out.ndim == 0:
        out = out * np.eye(model.dim)
    if out.shape != (model.dim, model.dim) or not np.all(np.isfinite(out)):
        raise ModelEvaluationError(f"{model.name}: diffusion is not a finite {model.dim}x{model.dim} matrix",
                                   x, _summary(mu))
    return out


# ---------------------------------------------------------------------------
# built-in models


def _sqrt_moment(mu: MeasureView) -> float:
    v = float(mu.second_moment())
    if v < 0:
        raise ModelEvaluationError("negative second moment under a square root", None, {"second_moment": v})
    return math.sqrt(v)


def mean_field_ou() -> MvModel:
    """dX = (-2X - E X) dt + (2 - sqrt(E|X|^2)) dW, with invariant law N(0, 4/9).

    The diffusion coefficient is not clamped: it turns negative when the second
    moment exceeds 4, which changes nothing since only its square enters the law.
    Constants (alpha, beta, gamma, rho, K) = (3, 2, 3, 1, 8) follow from Young's
    inequality with |E X - E Y| <= W2 and |sqrt(v_mu) - sqrt(v_nu)| <= W2.
    """

    def drift(x, mu):
        return -2.0 * x - mu.mean()

    def diffusion(x, mu):
        return np.array([[2.0 - _sqrt_moment(mu)]])

    return MvModel("mean-field-ou", 1, drift, diffusion, 3.0, 2.0, 3.0, 1.0, 8.0,
                   KernelSpec(kernels.MODEL_OU))


def linear(a: float = 1.0, c: float = 0.0, s: float = 1.0, dim: int = 1) -> MvModel:
    """b(x, mu) = -a x + c E mu, sigma = s I.

    Claims alpha = gamma = 2a - |c|, beta = |c|, rho = 1, K = max(|c|, d s^2),
    which needs a > |c|.
    """
    a, c, s, dim = float(a), float(c), float(s), int(dim)
    if not a > abs(c):
        raise ValueError("linear model needs a > |c|")

    def drift(x, mu):
        return -a * x + c * mu.mean()

    def diffusion(x, mu):
        return s * np.eye(dim)

    return MvModel("linear", dim, drift, diffusion, 2 * a - abs(c), abs(c), 2 * a - abs(c), 1.0,
                   max(abs(c), dim * s * s), KernelSpec(kernels.MODEL_LINEAR, (a, c, s)),
                   {"a": a, "c": c, "s": s, "dim": dim})


def cubic(a: float = -1.0, c: float = 0.5, s: float = 0.5) -> MvModel:
    """b(x, mu) = -x^3 - a x - c (x - E mu), sigma = s.

    With a < 0 the confining potential is a double well and monotonicity fails
    near the origin. The claimed constants (1, 0, 1, 1, 2 + s^2) are candidates
    for the probes to refute, not a proof.
    """
    a, c, s = float(a), float(c), float(s)

    def drift(x, mu):
        return -(x * x * x) - a * x - c * (x - mu.mean())

    def diffusion(x, mu):
        return np.array([[s]])

    return MvModel("cubic", 1, drift, diffusion, 1.0, 0.0, 1.0, 1.0, 2.0 + s * s,
                   KernelSpec(kernels.MODEL_CUBIC, (a, c, s)), {"a": a, "c": c, "s": s})


BUILTIN_MODELS = {
    "mean-field-ou": mean_field_ou,
    "linear": linear,
    "cubic": cubic,
}


def make_model(name: str, **params) -> MvModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# assumption probes


@dataclass(frozen=True)
class ProbePlan:
    """Random probe points: states uniform in [-state_box, state_box]^d and
    measures with 1..max_atoms atoms uniform in [-measure_box, measure_box]^d
    and Dirichlet(1) weights. Every fourth probe reuses mu for nu."""

    seed: int = 0
    count: int = 10_000
    state_box: float = 5.0
    measure_box: float = 5.0
    max_atoms: int = 8

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("empty probe plan")
        if not 1 <= self.max_atoms <= 8:
            raise ValueError("max_atoms must be between 1 and 8")
        if not (self.state_box > 0 and self.measure_box > 0):
            raise ValueError("sampling boxes must be positive")


@dataclass
class Violation:
    index: int
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


@dataclass
class ProbeReport:
    condition: str
    constants: dict
    n_probes: int
    violations: list
    worst_margin: float
    worst_index: int
    note: str = ("probes sample bounded boxes and <= 8-atom measures; tail behavior "
                 "is not exercised, so a clean report does not prove the inequality")

    @property
    def pass_rate(self) -> float:
        return 1.0 - len(self.violations) / self.n_probes

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self, max_listed: int = 20) -> dict:
        return {
            "condition": self.condition,
            "constants": self.constants,
            "n_probes": self.n_probes,
            "n_violations": len(self.violations),
            "pass_rate": self.pass_rate,
            "worst_margin": self.worst_margin,
            "worst_index": self.worst_index,
            "violations": [{"index": v.index, "lhs": v.lhs, "rhs": v.rhs, "margin": v.margin}
                           for v in self.violations[:max_listed]],
            "note": self.note,
        }


def _random_measure(g: np.random.Generator, dim: int, plan: ProbePlan) -> EmpiricalMeasure:
    n = int(g.integers(1, plan.max_atoms + 1))
    atoms = g.uniform(-plan.measure_box, plan.measure_box, size=(n, dim))
    return make_empirical(atoms, g.dirichlet(np.ones(n)))


def _probe_points(model: MvModel, plan: ProbePlan):
    """Deterministic probe sequence; probe 0 is the identity case x = y, mu = nu."""
    g = rng.generator(plan.seed)
    for i in range(plan.count):
        x = g.uniform(-plan.state_box, plan.state_box, size=model.dim)
        mu = _random_measure(g, model.dim, plan)
        if i == 0:
            yield x, x.copy(), mu, mu
            continue
        y = g.uniform(-plan.state_box, plan.state_box, size=model.dim)
        nu = mu if i % 4 == 0 else _random_measure(g, model.dim, plan)
        yield x, y, mu, nu


def _w2(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    if mu is nu:
        return 0.0
    if mu.dim == 1:
        return w2_1d(mu, nu)
    return w2_exact_small(mu, nu)[0]


def _fold(condition, constants, rows) -> ProbeReport:
    violations = []
    worst, worst_i, n = -math.inf, -1, 0
    for i, lhs, rhs in rows:
        n += 1
        if lhs - rhs > worst:
            worst, worst_i = lhs - rhs, i
        if lhs > rhs + VIOLATION_TOL:
            violations.append(Violation(i, lhs, rhs))
    return ProbeReport(condition, constants, n, violations, worst, worst_i)


def probe_monotonicity(model: MvModel, alpha: float, beta: float, probes: ProbePlan) -> ProbeReport:
    """Checks 2<b(x,mu)-b(y,nu), x-y> + |sigma(x,mu)-sigma(y,nu)|_F^2
    <= -alpha|x-y|^2 + beta W2(mu,nu)^2 at every probe."""

    def rows():
        for i, (x, y, mu, nu) in enumerate(_probe_points(model, probes)):
            dx = x - y
            db = eval_drift(model, x, mu) - eval_drift(model, y, nu)
            ds = eval_diffusion(model, x, mu) - eval_diffusion(model, y, nu)
            lhs = 2.0 * float(db @ dx) + float(np.sum(ds * ds))
            rhs = -alpha * float(dx @ dx) + beta * _w2(mu, nu) ** 2
            yield i, lhs, rhs

    return _fold("monotonicity", {"alpha": alpha, "beta": beta}, rows())


def probe_dissipativity(model: MvModel, gamma: float, rho: float, K: float, probes: ProbePlan) -> ProbeReport:
    """Checks 2<b(x,mu), x> + (1+rho)|sigma(x,mu)|_F^2
    <= -gamma|x|^2 + K(1 + rho + mu(|.|^2)) at every probe."""

    def rows():
        for i, (x, _, mu, _) in enumerate(_probe_points(model, probes)):
            if i == 0:
                x = np.zeros(model.dim)
                mu = make_empirical(np.zeros((1, model.dim)))
            sig = eval_diffusion(model, x, mu)
            lhs = 2.0 * float(eval_drift(model, x, mu) @ x) + (1.0 + rho) * float(np.sum(sig * sig))
            rhs = -gamma * float(x @ x) + K * (1.0 + rho + mu.second_moment())
            yield i, lhs, rhs

    return _fold("dissipativity", {"gamma": gamma, "rho": rho, "K": K}, rows())
