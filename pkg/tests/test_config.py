import json

import pytest

from qctf.config import RunConfig, config_from_dict, default_config_json, load_config
from qctf.errors import ConfigError, DataError


def test_default_round_trip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(default_config_json())
    assert load_config(p) == RunConfig()


def test_partial_override():
    cfg = config_from_dict({"f": 0.3, "quantum": {"lam": 3}, "find": {"lam": 4}})
    assert cfg.pipeline.f == 0.3 and cfg.quantum.lam == 3 and cfg.pipeline.find.lam == 4
    assert cfg.superposition().lam == 3


@pytest.mark.parametrize("bad", [{"nope": 1}, {"quantum": {"zzz": 1}}, {"cuts": 5}])
def test_unknown_or_malformed(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(DataError):
        load_config(p)
    p.write_text(json.dumps([1, 2]))
    with pytest.raises(DataError):
        load_config(p)
