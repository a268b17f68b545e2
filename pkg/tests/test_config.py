import pytest

from frenetdrive.config import Config, config_from_dict, load_config
from frenetdrive.errors import ScenarioError


def test_defaults():
    cfg = load_config(None)
    assert cfg == Config()
    assert cfg.grid.delta_d == 1.0 and cfg.grid.delta_T == 0.2 and cfg.grid.delta_v == 1.38
    assert cfg.planner.D0 == 5.0 and cfg.planner.tau == 1.0
    assert cfg.infractions.blocked_time == 180.0


def test_yaml_overrides(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("grid:\n  n_d: 2\n  T_max: 4.0\nplanner:\n  D0: 7\nlocalization:\n  q: [1, 1, 1, 1, 1]\n")
    cfg = load_config(p)
    assert cfg.grid.n_d == 2 and cfg.grid.T_max == 4.0
    assert cfg.planner.D0 == 7.0 and isinstance(cfg.planner.D0, float)
    assert cfg.localization.q == (1.0,) * 5
    assert cfg.weights == Config().weights


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert load_config(p) == Config()


@pytest.mark.parametrize("doc,needle", [
    ({"gird": {}}, "config.gird"),
    ({"grid": {"delta": 1}}, "config.grid.delta"),
    ({"grid": {"n_d": 1.5}}, "integer"),
    ({"planner": {"D0": "far"}}, "number"),
    ({"grid": {"T_min": 6, "T_max": 5}}, "config.grid"),
    ({"grid": [1, 2]}, "mapping"),
    ([1], "top level"),
])
def test_invalid_documents(doc, needle):
    with pytest.raises(ScenarioError, match=needle):
        config_from_dict(doc)


def test_yaml_syntax_error_has_location(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("grid:\n  n_d: [1, 2\n")
    with pytest.raises(ScenarioError, match=r"bad\.yaml:\d+:\d+"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_round_trip_through_dict():
    cfg = Config()
    assert config_from_dict({k: v for k, v in cfg.to_dict().items()}) == cfg
