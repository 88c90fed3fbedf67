"""Command-line front end.

Seed precedence: ``--seed`` beats ``sim.seed`` in the config, which beats 0.
Exit status: 0 success, 1 configuration error, 2 runtime error,
3 when check-assumptions finds violations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import io
from .harness import (
    GaussianReference,
    OuReport,
    StudyError,
    StudySpec,
    fit_rate,
    guaranteed_exponent,
    reproduce_ou,
    run_convergence,
    SummaryRow,
)
from .measures import GaussianMeasure, WeightFamily, pi1_statistic, pi2_statistic
from .model import ModelEvaluationError, ProbePlan, make_model, probe_dissipativity, probe_monotonicity
from .sde import SimConfig, SimulationBlowUp, simulate_frozen, simulate_particles, simulate_self_interacting
from .wasserstein import EXACT_MAX_ATOMS, w2_1d, w2_exact_small, w2_sliced

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VIOLATIONS = 0, 1, 2, 3


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(f"config error at '{key}': {message}")
        self.key = key


# ---------------------------------------------------------------------------
# config schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantsSection(_Strict):
    alpha: float
    beta: float
    gamma: float
    rho: float
    K: float


class ModelSection(_Strict):
    name: str
    params: dict[str, float] = Field(default_factory=dict)
    constants: Optional[ConstantsSection] = None


class ProcessSection(_Strict):
    kind: Literal["frozen", "self_interacting", "particles"] = "self_interacting"
    n_particles: int = Field(1, ge=1)
    mode: Literal["weighted_empirical", "instantaneous_law"] = "weighted_empirical"
    y0: Union[float, list[float], list[list[float]]] = 0.0


class WeightSpec(_Strict):
    kind: Literal["dirac", "lebesgue", "discrete_delayed"]
    tau: float = Field(1.0, gt=0)
    theta: float = Field(0.0, ge=0)

    def family(self) -> WeightFamily:
        return WeightFamily(self.kind, self.tau, self.theta)


class WeightsSection(_Strict):
    pi: WeightSpec = WeightSpec(kind="lebesgue")
    wp: Optional[WeightSpec] = None


class SimSection(_Strict):
    dt: float = Field(gt=0)
    t_max: float = Field(gt=0)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    store_stride: int = Field(1, ge=1)
    measure_refresh: Optional[float] = Field(None, gt=0)
    stepper: Literal["euler", "ou_exact"] = "euler"


class ReferenceSection(_Strict):
    gaussian_mean: Optional[float] = None
    gaussian_sd: Optional[float] = Field(None, gt=0)
    file: Optional[Path] = None
    n_quantiles: int = Field(10_000, ge=100)

    @model_validator(mode="after")
    def _one_kind(self):
        gauss = self.gaussian_mean is not None or self.gaussian_sd is not None
        if gauss and self.file is not None:
            raise ValueError("give either gaussian_mean/gaussian_sd or file, not both")
        if gauss and (self.gaussian_mean is None or self.gaussian_sd is None):
            raise ValueError("gaussian reference needs both gaussian_mean and gaussian_sd")
        if not gauss and self.file is None:
            raise ValueError("reference needs gaussian_mean/gaussian_sd or file")
        return self

    @field_validator("file")
    @classmethod
    def _exists(cls, v):
        if v is not None and not v.is_file():
            raise ValueError(f"file not found: {v}")
        return v


class StudySection(_Strict):
    checkpoints: list[float] = Field(min_length=1)
    replications: int = Field(10, ge=1)
    reference: ReferenceSection
    window: Optional[tuple[float, float]] = None
    stationary_start: bool = False
    n_proj: int = Field(64, ge=1)


class ProbeSection(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    count: int = Field(10_000, ge=1)
    state_box: float = Field(5.0, gt=0)
    measure_box: float = Field(5.0, gt=0)
    max_atoms: int = Field(8, ge=1, le=8)


class OutputSection(_Strict):
    dir: Path = Path("out")
    format: Literal["csv", "json"] = "csv"


class RunConfig(_Strict):
    model: Optional[ModelSection] = None
    process: ProcessSection = ProcessSection()
    weights: WeightsSection = WeightsSection()
    sim: Optional[SimSection] = None
    study: Optional[StudySection] = None
    probe: ProbeSection = ProbeSection()
    output: OutputSection = OutputSection()


def _loc(err: dict) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError("--config", f"file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    # relative reference files resolve against the config's directory
    ref = (doc.get("study") or {}).get("reference") if isinstance(doc, dict) else None
    if isinstance(ref, dict) and isinstance(ref.get("file"), str) and not Path(ref["file"]).is_absolute():
        ref["file"] = str(p.parent / ref["file"])
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(_loc(err), err["msg"]) from None


def _require(section, key: str):
    if section is None:
        raise ConfigError(key, "section is required for this subcommand")
    return section


def _build_model(cfg: RunConfig):
    sec = _require(cfg.model, "model")
    try:
        return make_model(sec.name, **sec.params)
    except TypeError as exc:
        raise ConfigError("model.params", str(exc)) from None
    except ValueError as exc:
        key = "model.name" if "unknown model" in str(exc) else "model.params"
        raise ConfigError(key, str(exc)) from None


def _sim_config(cfg: RunConfig, seed: Optional[int]) -> SimConfig:
    sec = _require(cfg.sim, "sim")
    s = seed if seed is not None else (sec.seed if sec.seed is not None else 0)
    try:
        return SimConfig(sec.dt, sec.t_max, s, sec.store_stride, sec.measure_refresh, sec.stepper)
    except ValueError as exc:
        raise ConfigError("sim", str(exc)) from None


def _reference(sec: ReferenceSection):
    if sec.file is not None:
        try:
            return io.read_measure(sec.file)
        except (ValueError, KeyError) as exc:
            raise ConfigError("study.reference.file", str(exc)) from None
    return GaussianReference(sec.gaussian_mean, sec.gaussian_sd, sec.n_quantiles)


def _y0s(cfg: RunConfig, n: int, dim: int) -> np.ndarray:
    y0 = np.asarray(cfg.process.y0, dtype=np.float64)
    if y0.size == 1:
        return np.full((n, dim), float(y0.reshape(-1)[0]))
    if y0.size == dim:
        return np.broadcast_to(y0.reshape(1, dim), (n, dim)).copy()
    if y0.size == n * dim:
        return y0.reshape(n, dim)
    raise ConfigError("process.y0", f"expected 1, {dim} or {n * dim} values, got {y0.size}")


# ---------------------------------------------------------------------------
# output


class Output:
    def __init__(self, directory: Path, fmt: str):
        self.dir = Path(directory)
        self.fmt = fmt

    def table(self, stem: str, header, rows) -> Path:
        rows = list(rows)
        if self.fmt == "json":
            data = [{h: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for h, v in zip(header, r)}
                    for r in rows]
            return io.write_json(self.dir / f"{stem}.json", data)
        return io.write_rows(self.dir / f"{stem}.csv", header, rows)

    def json(self, name: str, obj) -> Path:
        return io.write_json(self.dir / name, obj)


def _output(args, cfg: RunConfig) -> Output:
    directory = Path(args.out) if args.out else cfg.output.dir
    fmt = args.format or cfg.output.format
    return Output(directory, fmt)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, cfg: RunConfig) -> int:
    model = _build_model(cfg)
    sim = _sim_config(cfg, args.seed)
    pi = cfg.weights.pi.family()
    proc = cfg.process
    out = _output(args, cfg)
    if proc.kind == "particles":
        y0s = _y0s(cfg, proc.n_particles, model.dim)
        paths = simulate_particles(model, proc.n_particles, pi, proc.mode, y0s, sim)
        names = [f"path_p{i}" for i in range(len(paths))]
    elif proc.kind == "self_interacting":
        paths = [simulate_self_interacting(model, pi, _y0s(cfg, 1, model.dim)[0], sim)]
        names = ["path"]
    else:
        ref = _reference(_require(cfg.study, "study").reference)
        mu_star = GaussianMeasure.from_sd(ref.mean, ref.sd) if isinstance(ref, GaussianReference) else ref
        paths = [simulate_frozen(model, mu_star, _y0s(cfg, 1, model.dim)[0], sim)]
        names = ["path"]
    for name, rec in zip(names, paths):
        if out.fmt == "json":
            out.json(f"{name}.json", io.path_to_json(rec))
        else:
            io.write_path_csv(out.dir / f"{name}.csv", rec)
    print(f"wrote {len(paths)} path file(s) to {out.dir}")
    return EXIT_OK


def _study(cfg: RunConfig, seed: Optional[int]) -> StudySpec:
    model = _build_model(cfg)
    sim = _sim_config(cfg, seed)
    st = _require(cfg.study, "study")
    pi = cfg.weights.pi.family()
    wp = (cfg.weights.wp or cfg.weights.pi).family()
    proc = cfg.process
    n = proc.n_particles if proc.kind == "particles" else 1
    try:
        return StudySpec(model, proc.kind, pi, wp, _reference(st.reference), st.checkpoints, st.replications,
                         sim, proc.n_particles, proc.mode, _y0s(cfg, n, model.dim).tolist(),
                         st.stationary_start, st.n_proj)
    except ValueError as exc:
        raise ConfigError("study", str(exc)) from None


def cmd_convergence(args, cfg: RunConfig) -> int:
    spec = _study(cfg, args.seed)
    out = _output(args, cfg)
    table = run_convergence(spec, threads=args.threads)
    out.table("table", ("t", "replicate", "w2_sq"), table.rows)
    summary = table.summary
    out.table("summary", ("t", "mean_w2_sq", "ci_low", "ci_high", "n_reps"),
              ((s.t, s.mean_w2_sq, s.ci_low, s.ci_high, s.n_reps) for s in summary))
    try:
        fit = fit_rate(summary, cfg.study.window)
    except ValueError as exc:
        print(f"rate fit skipped: {exc}", file=sys.stderr)
        return EXIT_OK
    rate = fit.to_json()
    rate["exponent"] = fit.exponent
    rate["guaranteed_exponent"] = guaranteed_exponent(spec.model, spec.process, spec.pi)
    out.json("rate.json", rate)
    print(f"fitted exponent {fit.exponent:.4f} (stderr {fit.stderr_slope:.4f})")
    return EXIT_OK


def read_summary(path) -> list[SummaryRow]:
    p = Path(path)
    if p.suffix.lower() == ".json":
        rows = json.loads(p.read_text())
        return [SummaryRow(float(r["t"]), float(r["mean_w2_sq"]), float(r.get("ci_low", r["mean_w2_sq"])),
                           float(r.get("ci_high", r["mean_w2_sq"])), int(r.get("n_reps", 1))) for r in rows]
    header, rows = io.read_rows(p)
    for key in ("t", "mean_w2_sq"):
        if key not in header:
            raise ConfigError("--in", f"summary file lacks a '{key}' column")
    col = {h: i for i, h in enumerate(header)}

    def get(r, k, default):
        return float(r[col[k]]) if k in col else default

    out = []
    for r in rows:
        m = float(r[col["mean_w2_sq"]])
        out.append(SummaryRow(float(r[col["t"]]), m, get(r, "ci_low", m), get(r, "ci_high", m),
                              int(get(r, "n_reps", 1))))
    return out


def cmd_fit_rate(args, cfg: RunConfig) -> int:
    if not Path(args.input).is_file():
        raise ConfigError("--in", f"file not found: {args.input}")
    summary = read_summary(args.input)
    window = tuple(args.window) if args.window else (cfg.study.window if cfg.study else None)
    fit = fit_rate(summary, window)
    out = _output(args, cfg)
    rate = fit.to_json()
    rate["exponent"] = fit.exponent
    out.json("rate.json", rate)
    print(f"slope {fit.slope!r}")
    return EXIT_OK


def cmd_wasserstein(args, cfg: RunConfig) -> int:
    measures = []
    for key, f in (("a", args.a), ("b", args.b)):
        if not Path(f).is_file():
            raise ConfigError(key, f"file not found: {f}")
        try:
            measures.append(io.read_measure(f))
        except (ValueError, KeyError) as exc:
            raise ConfigError(key, str(exc)) from None
    mu, nu = measures
    if mu.dim != nu.dim:
        raise ConfigError("b", f"dimension mismatch: {mu.dim} vs {nu.dim}")
    method = args.method
    if method == "auto":
        if mu.dim == 1:
            method = "1d"
        elif max(len(mu), len(nu)) <= EXACT_MAX_ATOMS:
            method = "exact"
        else:
            method = "sliced"
    seed = args.seed if args.seed is not None else 0
    if method == "1d":
        d = w2_1d(mu, nu)
    elif method == "exact":
        d = w2_exact_small(mu, nu)[0]
    else:
        d = w2_sliced(mu, nu, args.n_proj, seed)
    print(repr(float(d)))
    if args.out:
        Output(Path(args.out), args.format or "csv").json("wasserstein.json", {"method": method, "w2": d})
    return EXIT_OK


def cmd_check_assumptions(args, cfg: RunConfig) -> int:
    model = _build_model(cfg)
    c = cfg.model.constants
    k = c.model_dump() if c is not None else {
        "alpha": model.claimed_alpha, "beta": model.claimed_beta, "gamma": model.claimed_gamma,
        "rho": model.claimed_rho, "K": model.claimed_K}
    p = cfg.probe
    seed = args.seed if args.seed is not None else p.seed
    try:
        plan = ProbePlan(seed, p.count, p.state_box, p.measure_box, p.max_atoms)
    except ValueError as exc:
        raise ConfigError("probe", str(exc)) from None
    mono = probe_monotonicity(model, k["alpha"], k["beta"], plan)
    diss = probe_dissipativity(model, k["gamma"], k["rho"], k["K"], plan)
    report = {"model": model.name, "params": dict(model.params), "constants": k, "seed": seed,
              "monotonicity": mono.to_json(), "dissipativity": diss.to_json(),
              "passed": mono.passed and diss.passed}
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    print(text)
    if args.out:
        Output(Path(args.out), "json").json("assumptions.json", report)
    return EXIT_OK if report["passed"] else EXIT_VIOLATIONS


def cmd_reproduce_ou(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else (cfg.sim.seed if cfg.sim and cfg.sim.seed is not None else 0)
    if args.steps < 1000:
        raise ConfigError("--steps", "must be at least 1000")
    if args.replications < 1:
        raise ConfigError("--replications", "must be positive")
    if not args.particles or min(args.particles) < 1:
        raise ConfigError("--particles", "counts must be positive")
    rep = reproduce_ou(args.steps, args.replications, args.particles, seed, threads=args.threads)
    out = _output(args, cfg)
    out.table("ou_report", OuReport.HEADER, rep.rows())
    terminal = ((n, r, float(m), float(v)) for n in rep.particle_counts
                for r, (m, v) in enumerate(zip(*rep.terminal(n))))
    out.table("ou_terminal", ("n_particles", "replicate", "mean_err", "var_err"), terminal)
    for n in rep.particle_counts:
        m, v = rep.terminal(n)
        print(f"N={n}: terminal mean_err {np.mean(m):.3e}, var_err {np.mean(v):.3e}")
    return EXIT_OK


def cmd_pi_stats(args, cfg: RunConfig) -> int:
    if args.family:
        try:
            fam = WeightFamily(args.family, args.tau, args.theta)
        except ValueError as exc:
            raise ConfigError("--family", str(exc)) from None
    else:
        fam = cfg.weights.pi.family()
    times = args.times
    if not times or min(times) <= 0:
        raise ConfigError("--times", "need positive times")
    if not 0 < args.eps <= 1:
        raise ConfigError("--eps", "must lie in (0, 1]")
    pi1 = pi1_statistic(fam, args.eps, times, args.grid)
    pi2 = pi2_statistic(fam, args.eps, times, args.grid)
    out = _output(args, cfg)
    out.table("pi_stats", ("t", "pi1", "pi2_single", "pi2_double"),
              ((t, a, s, d) for t, a, (s, d) in zip(times, pi1, pi2)))
    print(f"wrote pi statistics for {len(times)} time(s) to {out.dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: output.dir from config, else ./out)")
    common.add_argument("--seed", type=int, help="master seed; beats sim.seed in the config, default 0")
    common.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads; results do not depend on it")

    p = argparse.ArgumentParser(prog="mvempirical", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one configuration and write paths")
    sub.add_parser("convergence", parents=[common], help="replicated W2 study with a rate fit")
    f = sub.add_parser("fit-rate", parents=[common], help="log-log rate fit of an existing summary")
    f.add_argument("--in", dest="input", required=True, help="summary.csv or summary.json")
    f.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    w = sub.add_parser("wasserstein", parents=[common], help="W2 distance between two measure files")
    w.add_argument("a")
    w.add_argument("b")
    w.add_argument("--method", choices=("auto", "1d", "exact", "sliced"), default="auto")
    w.add_argument("--n-proj", type=int, default=64)
    sub.add_parser("check-assumptions", parents=[common], help="probe the monotonicity/dissipativity constants")
    r = sub.add_parser("reproduce-ou", parents=[common], help="mean-field OU error traces")
    r.add_argument("--steps", type=int, default=100_000)
    r.add_argument("--replications", type=int, default=10)
    r.add_argument("--particles", type=int, nargs="+", default=[1])
    s = sub.add_parser("pi-stats", parents=[common], help="Pi_1/Pi_2 statistics of a weight family")
    s.add_argument("--family", choices=WeightFamily.KINDS)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--times", type=float, nargs="+", default=[10.0, 100.0, 1000.0])
    s.add_argument("--grid", type=int, default=10_000)
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "fit-rate": cmd_fit_rate,
    "wasserstein": cmd_wasserstein,
    "check-assumptions": cmd_check_assumptions,
    "reproduce-ou": cmd_reproduce_ou,
    "pi-stats": cmd_pi_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads", "must be positive")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationBlowUp, StudyError, ModelEvaluationError, ValueError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
