"""Every study config under configs/ runs and its fitted decay exponent is
at least the proven one (minus one standard error)."""

import json
from pathlib import Path

import pytest

from mvempirical.cli import main

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))


@pytest.mark.parametrize("config", CONFIGS, ids=[c.stem for c in CONFIGS])
def test_fitted_exponent_not_below_guarantee(config, tmp_path):
    assert main(["convergence", "--config", str(config), "--out", str(tmp_path), "--threads", "4"]) == 0
    rate = json.loads((tmp_path / "rate.json").read_text())
    floor = rate["guaranteed_exponent"]
    assert floor is not None
    assert rate["exponent"] >= floor - rate["stderr_slope"]
    assert rate["exponent"] >= 0.4


def test_configs_present():
    assert len(CONFIGS) >= 3
