"""Configuration schema: validation, canonical hashing, presets."""
from __future__ import annotations

import json

import pytest

from spinbic.config import (MODEL_PRESETS, CalculusSettings, ConfigError,
                            JunctionSettings, ModelConfig, RunConfig,
                            SwitchSettings, canonical_json, config_from_dict,
                            config_hash, load_config, merged_config)


def test_defaults_give_valid_config():
    cfg = RunConfig()
    assert cfg.command == "verify-bic"
    assert cfg.left_model.name == "atomic-insulator"
    assert cfg.right_model.name == "spinful-haldane"
    assert cfg.calculus.engine == "spectral"


def test_unknown_command_and_engine_rejected():
    with pytest.raises(ConfigError, match="unknown command"):
        RunConfig(command="explode")
    with pytest.raises(ConfigError, match="unknown engine"):
        CalculusSettings(engine="m")
    with pytest.raises(ConfigError, match="switch kind"):
        SwitchSettings(kind="cliff")
    with pytest.raises(ConfigError, match="torque_target"):
        RunConfig(torque_target="sideways")


def test_dict_round_trip_with_nesting():
    data = {
        "command": "convergence",
        "left_model": {"name": "atomic-insulator"},
        "right_model": {"name": "bhz", "params": {"breaking": 0.2}},
        "junction": {"spin_mixing": True, "amplitude": 0.4},
        "extents": [6, 8],
        "seed": 3,
    }
    cfg = config_from_dict(data)
    assert cfg.right_model.params == {"breaking": 0.2}
    assert cfg.junction.amplitude == 0.4
    assert cfg.extents == [6, 8]
    assert isinstance(cfg.junction, JunctionSettings)


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigError, match="typo"):
        config_from_dict({"typo": 1})
    with pytest.raises(ConfigError, match=r"junction\."):
        config_from_dict({"junction": {"ampliutde": 0.4}})


def test_load_config_errors(tmp_path):
    missing = tmp_path / "nope.cfg"
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(missing)
    bad = tmp_path / "bad.cfg"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    good = tmp_path / "good.cfg"
    good.write_text(json.dumps({"command": "chern",
                                "model": {"name": "bhz"}}))
    cfg = load_config(good)
    assert cfg.command == "chern" and cfg.model.name == "bhz"


def test_canonical_json_excludes_output_path():
    a = RunConfig(out=None)
    b = RunConfig(out="/tmp/somewhere")
    assert canonical_json(a) == canonical_json(b)
    assert config_hash(a) == config_hash(b)
    assert "out" not in json.loads(canonical_json(a))


def test_hash_is_stable_and_sensitive():
    base = RunConfig()
    assert config_hash(base) == config_hash(RunConfig())
    assert len(config_hash(base)) == 64
    changed = RunConfig(seed=1)
    assert config_hash(changed) != config_hash(base)


def test_merged_config_overrides():
    cfg = RunConfig()
    out = merged_config(cfg, seed=5, extent=8,
                        calculus={"engine": "quadrature"})
    assert out.seed == 5 and out.extent == 8
    assert out.calculus.engine == "quadrature"
    # untouched nested fields survive the merge
    assert out.calculus.gl_order == cfg.calculus.gl_order
    # None means "keep"
    assert merged_config(cfg, seed=None).seed == cfg.seed
    with pytest.raises(ConfigError, match="unknown override"):
        merged_config(cfg, banana=1)


def test_junction_kwargs_resolve_seed():
    j = JunctionSettings()
    assert j.kwargs(7)["coupling_seed"] == 7
    j = JunctionSettings(coupling_seed=2)
    assert j.kwargs(7)["coupling_seed"] == 2


def test_model_config_build_and_errors():
    model = ModelConfig(name="bhz", params={"breaking": 0.2}).build()
    assert model.params["breaking"] == 0.2
    with pytest.raises(ConfigError, match="unknown model"):
        ModelConfig(name="nope").build()
    with pytest.raises(ConfigError, match="bad parameters"):
        ModelConfig(name="bhz", params={"banana": 1}).build()


def test_model_presets_build():
    for name, spec in MODEL_PRESETS.items():
        model = ModelConfig(**spec).build()
        assert model.name == spec["name"], name
