import json

import numpy as np
from hypothesis import given, settings, strategies as st

from mvempirical import io
from mvempirical.measures import WeightFamily, make_empirical, realize_weights
from mvempirical.sde import SimConfig, simulate_self_interacting
from mvempirical.model import mean_field_ou

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=10))
def test_fmt_round_trips(xs):
    assert [float(io.fmt(x)) for x in xs] == xs


def test_measure_csv_round_trip(tmp_path):
    g = np.random.default_rng(0)
    mu = make_empirical(g.normal(size=(7, 2)), g.dirichlet(np.ones(7)))
    io.write_measure_csv(tmp_path / "m.csv", mu)
    back = io.read_measure(tmp_path / "m.csv")
    assert np.array_equal(back.atoms, mu.atoms) and np.array_equal(back.weights, mu.weights)


def test_measure_json_round_trip(tmp_path):
    mu = make_empirical([[0.1], [0.2], [0.7]], [0.2, 0.3, 0.5])
    (tmp_path / "m.json").write_text(json.dumps(io.measure_to_json(mu)))
    assert io.read_measure(tmp_path / "m.json").same_distribution(mu)


def test_csv_without_weights_is_uniform(tmp_path):
    (tmp_path / "m.csv").write_text("x_0\n1\n2\n3\n4\n")
    assert np.allclose(io.read_measure(tmp_path / "m.csv").weights, 0.25)


def test_weights_serialization(tmp_path):
    pi = realize_weights(WeightFamily.lebesgue(), 1.0, 4)
    doc = io.weights_to_json(pi)
    assert set(doc) == {"positions", "weights", "widths"}
    io.write_weights_csv(tmp_path / "w.csv", pi)
    header, rows = io.read_rows(tmp_path / "w.csv")
    assert header == ["position", "weight", "width"] and len(rows) == 4


def test_path_csv_round_trip(tmp_path):
    rec = simulate_self_interacting(mean_field_ou(), WeightFamily.lebesgue(), [0.3], SimConfig(0.1, 2.0, seed=1))
    io.write_path_csv(tmp_path / "p.csv", rec)
    back = io.read_path_csv(tmp_path / "p.csv")
    assert np.array_equal(back.times, rec.times) and np.array_equal(back.states, rec.states)
