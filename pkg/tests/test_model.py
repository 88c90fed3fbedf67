import numpy as np
import pytest

from mvempirical.measures import GaussianMeasure, make_empirical
from mvempirical.model import (
    BUILTIN_MODELS,
    ModelEvaluationError,
    MvModel,
    ProbePlan,
    cubic,
    eval_diffusion,
    eval_drift,
    kappa,
    linear,
    make_model,
    mean_field_ou,
    probe_dissipativity,
    probe_monotonicity,
)


def test_kappa_examples():
    assert kappa(1, 2) == pytest.approx(1 / 6)
    assert kappa(1, 1e12) == pytest.approx(1 / 3, rel=1e-9)
    assert kappa(1, 1e-12) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5])
def test_kappa_bounds_and_monotonicity(d):
    rhos = np.logspace(-3, 3, 30)
    ks = [kappa(d, r) for r in rhos]
    assert all(k < 1 / (d + 2) for k in ks)
    assert all(b > a for a, b in zip(ks, ks[1:]))
    assert kappa(d + 1, 1.0) < kappa(d, 1.0)


def test_kappa_input_checks():
    with pytest.raises(ValueError):
        kappa(0, 1.0)
    with pytest.raises(ValueError):
        kappa(1, 0.0)


def test_ou_drift_and_diffusion():
    ou = mean_field_ou()
    assert eval_drift(ou, [1.0], make_empirical([[0.0], [1.0]]))[0] == -2.5
    assert eval_drift(ou, [0.0], make_empirical([[-1.0], [1.0]]))[0] == 0.0
    assert eval_diffusion(ou, [0.0], make_empirical([[2.0], [-2.0]]))[0, 0] == 0.0
    assert eval_diffusion(ou, [0.0], GaussianMeasure.from_sd(0, 2 / 3))[0, 0] == pytest.approx(4 / 3)
    assert eval_diffusion(ou, [0.0], make_empirical([[0.0]]))[0, 0] == 2.0


def test_ou_diffusion_goes_negative_without_clamping():
    assert eval_diffusion(mean_field_ou(), [0.0], make_empirical([[3.0]]))[0, 0] == -1.0


def test_linear_drift_ignores_measure_when_c_zero():
    m = linear(a=1.0, c=0.0)
    for mu in (make_empirical([[5.0]]), make_empirical([[-3.0], [7.0]])):
        assert eval_drift(m, [2.0], mu)[0] == -2.0


def test_drift_is_pure():
    ou = mean_field_ou()
    mu = make_empirical(np.random.default_rng(0).normal(size=(5, 1)))
    assert np.array_equal(eval_drift(ou, [0.3], mu), eval_drift(ou, [0.3], mu))


def test_dimension_checked():
    with pytest.raises(ValueError):
        eval_drift(mean_field_ou(), [0.0, 1.0], make_empirical([[0.0]]))


def test_nonfinite_evaluation_raises():
    def bad(x, mu):
        return np.array([np.nan])

    m = MvModel("bad", 1, bad, bad, 2, 1, 1, 1, 1)
    with pytest.raises(ModelEvaluationError):
        eval_drift(m, [0.0], make_empirical([[0.0]]))


def test_model_constant_validation():
    with pytest.raises(ValueError):
        MvModel("x", 1, None, None, 1, 2, 1, 1, 1)
    with pytest.raises(ValueError):
        linear(a=1.0, c=2.0)


def test_registry():
    assert set(BUILTIN_MODELS) == {"mean-field-ou", "linear", "cubic"}
    assert make_model("cubic", a=-1.0).name == "cubic"
    with pytest.raises(ValueError):
        make_model("nope")


PLAN = ProbePlan(seed=0, count=10_000)


def test_ou_monotonicity_constants_hold():
    rep = probe_monotonicity(mean_field_ou(), 3, 2, PLAN)
    assert rep.passed and rep.pass_rate == 1.0 and rep.n_probes == 10_000


def test_ou_monotonicity_too_strong_alpha_fails():
    assert len(probe_monotonicity(mean_field_ou(), 5, 2, ProbePlan(count=500)).violations) >= 1


def test_ou_dissipativity_constants_hold():
    assert probe_dissipativity(mean_field_ou(), 3, 1, 8, PLAN).passed


def test_ou_dissipativity_small_K_fails():
    rep = probe_dissipativity(mean_field_ou(), 3, 1, 0.1, ProbePlan(count=50))
    assert any(v.index == 0 for v in rep.violations)
    first = [v for v in rep.violations if v.index == 0][0]
    assert first.lhs == 8.0 and first.rhs == pytest.approx(0.2)


def test_dissipativity_identity_probe_values():
    rep = probe_dissipativity(mean_field_ou(), 3, 1, 8, ProbePlan(count=1))
    assert rep.worst_index == 0 and rep.worst_margin == -8.0


def test_identity_probe_never_violates():
    for model in (mean_field_ou(), linear(2.0, 1.0), cubic()):
        rep = probe_monotonicity(model, 1e6, 0.0, ProbePlan(count=1))
        assert rep.passed


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_ou_probes_pass_for_other_seeds(seed):
    plan = ProbePlan(seed=seed, count=2000)
    assert probe_monotonicity(mean_field_ou(), 3, 2, plan).passed
    assert probe_dissipativity(mean_field_ou(), 3, 1, 8, plan).passed


def test_probe_reports_are_deterministic():
    plan = ProbePlan(seed=9, count=300)
    a = probe_monotonicity(cubic(), 1, 0, plan).to_json()
    b = probe_monotonicity(cubic(), 1, 0, plan).to_json()
    assert a == b


def test_linear_claimed_constants_hold():
    m = linear(a=2.0, c=1.0, s=0.5, dim=2)
    c = m.constants
    plan = ProbePlan(count=500, max_atoms=4)
    assert probe_monotonicity(m, c["alpha"], c["beta"], plan).passed
    assert probe_dissipativity(m, c["gamma"], c["rho"], c["K"], plan).passed


def test_probe_plan_validation():
    with pytest.raises(ValueError):
        ProbePlan(max_atoms=9)
    with pytest.raises(ValueError):
        ProbePlan(count=0)
