import json

import pytest

from pegstress.config import ENV_VAR, RunConfig, digest
from pegstress.errors import InputError

from conftest import SAMPLE_CONFIG


def test_bundled_and_env(monkeypatch, tmp_path):
    monkeypatch.delenv(ENV_VAR, raising=False)
    cfg = RunConfig.load()
    assert cfg.coins == ["usdc", "usdt", "dai"]
    assert cfg.coin_path("usdc").is_file()
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"coins": ["dai"], "simulation": {"trials": 5}}))
    monkeypatch.setenv(ENV_VAR, str(p))
    cfg = RunConfig.load()
    assert cfg.coins == ["dai"]
    assert cfg["simulation"]["seed"] == 20250430  # merged default
    assert cfg.sim_config().trials == 5


def test_sim_config_overrides():
    cfg = RunConfig.load(SAMPLE_CONFIG)
    sim = cfg.sim_config(seed=1, trials=None)
    assert sim.seed == 1 and sim.trials == 20000 and sim.days == 2007


def test_sweep_fixed_modes():
    cfg = RunConfig.from_dict({})
    assert cfg.sweep_fixed("f_delta") == {"f_beta": 0.5, "f_gamma": 0.2}
    cfg = RunConfig.from_dict({"sweep": {"fixed_mode": "baseline"}})
    assert cfg.sweep_fixed("f_delta") == {"f_beta": 0.5, "f_gamma": 0.1}


def test_invalid(tmp_path):
    with pytest.raises(InputError):
        RunConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(InputError):
        RunConfig.load(bad)
    with pytest.raises(InputError):
        RunConfig.from_dict({"window": {"start": "2024-01-02", "end": "2024-01-01"}})
    with pytest.raises(InputError):
        RunConfig.from_dict({}).coin_path("usdc")


def test_digest_stable():
    assert digest({"b": 1, "a": [1.5, "x"]}) == digest({"a": [1.5, "x"], "b": 1})
    assert digest({"a": 1}) != digest({"a": 2})
    assert len(digest({})) == 64


def test_bad_simulation_settings_are_input_errors():
    with pytest.raises(InputError):
        RunConfig.from_dict({"simulation": {"fractions": {"f_beta": 2.0}}}).sim_config()
    with pytest.raises(InputError):
        RunConfig.from_dict({"simulation": {"trials": 0}}).sim_config()
