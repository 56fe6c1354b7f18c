import pytest

from rbdsde.config import ConfigError, load, parse


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_parse():
    cfg = parse({})
    assert cfg.ensemble.N == 50 and cfg.spec.f.kind == "zero" and not cfg.obstacle_spec.present


@pytest.mark.parametrize("raw,key", [
    ({"ensemble": {"paths": 10}}, "ensemble.paths"),
    ({"solver": {"degre": 2}}, "solver.degre"),
    ({"extras": {}}, "extras"),
])
def test_unknown_keys_are_errors(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse(raw)


@pytest.mark.parametrize("raw,key", [
    ({"ensemble": {"M": 1.5}}, "ensemble.M"),
    ({"ensemble": {"M": True}}, "ensemble.M"),
    ({"ensemble": {"N": 0}}, "ensemble.N"),
    ({"generator": {"L": "big"}}, "generator.L"),
    ({"constants": {"beta": -1.0}}, "constants.beta"),
    ({"delay": {"atoms": [[-2.0, 1.0]]}}, "delay.atoms"),
    ({"generator": {"f": "cubic"}}, "cubic"),
    ({"obstacle": {"form": "put"}}, "obstacle.params"),
    ({"terminal": {"form": "linear_W", "params": [1.0]}}, "terminal"),
    ({"oracle": {"kind": "magic"}}, "oracle.kind"),
])
def test_bad_values_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse(raw)


def test_alpha_cites_open_interval():
    with pytest.raises(ConfigError, match=r"generator\.alpha.*open interval.*H2"):
        parse({"generator": {"alpha": 1.5}})


def test_obstacle_above_terminal_cites_h6():
    raw = {"obstacle": {"form": "linear", "params": [1.0, 0.0]}, "terminal": {"form": "constant", "params": [0.0]}}
    with pytest.raises(ConfigError, match="H6"):
        parse(raw)


def test_put_obstacle_with_call_terminal_rejected():
    raw = {"obstacle": {"form": "put", "params": [0.2]}, "terminal": {"form": "call", "params": [0.2]}}
    with pytest.raises(ConfigError, match="H6"):
        parse(raw)


def test_lipschitz_violation_is_config_error():
    with pytest.raises(ConfigError, match="Lipschitz"):
        parse({"generator": {"f": "affine", "f_params": [1.0], "L": 0.5}})


def test_non_strict_generator_allowed():
    cfg = parse({"generator": {"f": "affine", "f_params": [1.0], "L": 0.5, "strict": False}})
    assert not cfg.spec.strict


@pytest.mark.parametrize("raw", [
    {"oracle": {"kind": "martingale"}, "generator": {"g": "constant", "g_params": [0.5]}},
    {"oracle": {"kind": "delay_ode"}},
    {"oracle": {"kind": "snell"}, "generator": {"f": "constant", "f_params": [1.0]}},
    {"oracle": {"kind": "backward_integral"}, "obstacle": {"form": "put", "params": [5.0]},
     "terminal": {"form": "put", "params": [5.0]}},
])
def test_oracle_must_match_problem(raw):
    with pytest.raises(ConfigError, match="oracle.kind"):
        parse(raw)


def test_load_with_overrides(tmp_path):
    p = write(tmp_path, "[ensemble]\nM = 10\nseed = 3\n")
    cfg = load(p, seed=8, threads=2)
    assert cfg.ensemble.seed == 8 and cfg.ensemble.threads == 2 and cfg.ensemble.M == 10


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load(tmp_path / "missing.toml")
    with pytest.raises(ConfigError, match="does not parse"):
        load(write(tmp_path, "[ensemble\nM = 1"))


def test_shipped_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.toml")):
        load(p)
    for p in sorted((root / "invalid").glob("*.toml")):
        with pytest.raises(ConfigError):
            load(p)
