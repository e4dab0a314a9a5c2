import pytest

from ulab.core.config import ExperimentConfig, ExperimentParams, ResultRow, load_config, parse_config, parse_int
from ulab.core.errors import ConfigError

GOOD = """\
[experiment]
kind = gowers-avg
seed = 7
output = out/u2.csv

[params]
spec = liouville
X = 10^3, 1e4
H = X^0.4
k = 2
samples = 25
method = direct
logarithmic = true
"""


@pytest.mark.parametrize("text,expected", [
    ("10^4", 10_000), ("1e4", 10_000), ("10000", 10_000), (" 2^10 ", 1024), (7, 7),
])
def test_parse_int(text, expected):
    assert parse_int(text) == expected


class TestParseConfig:
    def test_good_config(self):
        cfg = parse_config(GOOD)
        assert cfg.kind == "gowers-avg"
        assert cfg.seed == 7
        assert cfg.output == "out/u2.csv"
        assert cfg.params.X == [1000, 10_000]
        assert cfg.params.k == 2
        assert cfg.params.method == "direct"
        assert cfg.params.logarithmic is True

    def test_inline_comments(self):
        cfg = parse_config("[experiment]\nkind = sieve  # tabulate\nseed = 1\n")
        assert cfg.kind == "sieve"

    def test_round_trip(self):
        cfg = parse_config(GOOD)
        assert parse_config(cfg.to_ini()) == cfg

    def test_round_trip_lists(self):
        cfg = ExperimentConfig(kind="polyavg", seed=3, params=ExperimentParams(
            polys="m; 2*m; m^2", weights="lambda, von_mangoldt, lambda", ks="1..4", shifts="0, 2"))
        assert cfg.params.polys == ["m", "2*m", "m^2"]
        assert cfg.params.ks == [1, 2, 3, 4]
        back = parse_config(cfg.to_ini())
        assert back == cfg

    def test_unknown_key_position(self):
        text = "[experiment]\nkind = chowla\nseed = 1\n[params]\nbogus = 3\n"
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert (exc.value.line, exc.value.column) == (5, 1)

    def test_bad_value_position(self):
        text = "[experiment]\nkind = chowla\nseed = 1\n[params]\nX = 100\nepsilon = lots\n"
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert exc.value.line == 6

    def test_unknown_kind(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[experiment]\nkind = astrology\nseed = 1\n")
        assert exc.value.line == 2

    def test_missing_seed(self):
        with pytest.raises(ConfigError):
            parse_config("[experiment]\nkind = sieve\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[experiment]\nkind = sieve\nseed = 1\n\n[extras]\nx = 1\n")
        assert exc.value.line == 5

    def test_missing_experiment_section(self):
        with pytest.raises(ConfigError):
            parse_config("[params]\nX = 100\n")

    def test_missing_header(self):
        with pytest.raises(ConfigError):
            parse_config("kind = sieve\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[experiment]\nkind = sieve\nkind = chowla\nseed = 1\n")
        assert exc.value.line == 3


def test_load_config(tmp_path):
    path = tmp_path / "u2.ini"
    path.write_text(GOOD, encoding="utf-8")
    assert load_config(path).params.samples == 25
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_cache_dir_falls_back_to_env(monkeypatch, tmp_path):
    cfg = ExperimentConfig(kind="sieve", seed=1)
    assert cfg.resolved_cache_dir() is None
    monkeypatch.setenv("ULAB_CACHE", str(tmp_path))
    assert cfg.resolved_cache_dir() == str(tmp_path)
    assert ExperimentConfig(kind="sieve", seed=1, cache_dir="here").resolved_cache_dir() == "here"


def test_result_row_flat():
    row = ResultRow(experiment="chowla:chowla_average", params={"X": 100}, values={"value": 0.5},
                    wall_time=1.23456)
    assert row.flat() == {"experiment": "chowla:chowla_average", "X": 100, "value": 0.5, "wall_time": 1.235}
