from pathlib import Path

import pytest

from marketnet.config import ConfigError, RunConfig, config_from_dict, load_config, parse_years

REPO = Path(__file__).resolve().parents[1]


def test_parse_years():
    assert parse_years("2004-2006") == [2004, 2005, 2006]
    assert parse_years(2010) == [2010]
    assert parse_years("2010") == [2010]
    assert parse_years([2001, 2003]) == [2001, 2003]
    assert parse_years(None) == []
    with pytest.raises(ConfigError):
        parse_years("2006-2004")


def test_bundled_config_loads_and_validates():
    cfg = load_config(REPO / "configs" / "synthetic.yaml")
    assert cfg.years == [2004, 2005, 2006]
    assert Path(cfg.input).is_file()
    assert cfg.ggm.gamma == 0.25 and cfg.community.objectives == ["Q2", "Q3"]
    cfg.validate()
    assert cfg.workers >= 1


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "p.csv").write_text("date,ticker,close\n")
    (tmp_path / "c.yaml").write_text("input: p.csv\noutput: out\nyears: [2001]\n")
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.input == str(tmp_path / "p.csv") and cfg.output == str(tmp_path / "out")
    cfg.validate()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict({"years": [2001], "bogus": 1})
    with pytest.raises(ConfigError, match="ggm: unknown keys"):
        config_from_dict({"ggm": {"gama": 0.2}})


def test_empty_years_nothing_to_do():
    with pytest.raises(ConfigError, match="nothing to do"):
        RunConfig(input="x", years=[]).validate(check_input=False)


@pytest.mark.parametrize(
    "doc",
    [
        {"filter": {"min_fraction": 0.0}},
        {"ggm": {"selection": "aic"}},
        {"ggm": {"gamma": 2.0}},
        {"garch": {"restarts": 9}},
        {"garch": {"reduce": "median"}},
        {"community": {"objectives": ["Q4"]}},
        {"centrality": {"bin_width": 0}},
        {"threads": -1},
        {"years": [2001, 2001]},
    ],
)
def test_invalid_values(doc):
    doc = {"years": [2001], **doc}
    with pytest.raises(ConfigError):
        config_from_dict(doc).validate(check_input=False)


def test_missing_input_and_bad_yaml(tmp_path):
    with pytest.raises(ConfigError, match="input file not found"):
        RunConfig(input=str(tmp_path / "nope.csv"), years=[2001]).validate()
    (tmp_path / "bad.yaml").write_text("years: [2001\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "list.yaml")


def test_to_dict_round_trip():
    cfg = config_from_dict({"years": "2001-2002", "ggm": {"gamma": 0.5}})
    again = config_from_dict(cfg.to_dict())
    assert again == cfg
