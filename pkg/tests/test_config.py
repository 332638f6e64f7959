import json
import pickle

import pytest

from src.utils.config import RunConfig, build_config, dump_config, load_config, save_config
from src.utils.errors import ConfigError
from src.utils.parallel import THREADS_ENV, parallel_map, resolve_threads


def test_defaults():
    config = build_config({"command": "rate-function"})
    assert config.gamma == 0.8
    assert (config.lambda1_0, config.lambda2_0, config.d_0) == (1.5, 0.0, 0.0)
    assert (config.lambda1_1, config.lambda2_1, config.d_1) == (0.0, 0.2, 0.0)
    assert config.n_modes == 2048
    assert config.t_max == 20.0
    assert config.eps_crit == 1e-6
    assert config.tau == 20.0
    assert config.engine == "covariance"
    assert config.format == "csv"
    assert config.threads == 0


def test_unknown_key_names_the_key():
    with pytest.raises(ConfigError) as info:
        build_config({"command": "rate-function", "n_mode": 16})
    assert info.value.key == "n_mode"


@pytest.mark.parametrize(
    "values, key",
    [
        ({"command": "plot"}, "command"),
        ({"command": "rate-function", "n_modes": 0}, "n_modes"),
        ({"command": "rate-function", "eps_crit": 1.0}, "eps_crit"),
        ({"command": "rate-function", "engine": "mps"}, "engine"),
        ({"command": "rate-function", "nx": 402}, "nx"),
        ({"command": "rate-function", "threads": -1}, "threads"),
        ({"command": "rate-function", "tau": 0}, "tau"),
    ],
)
def test_field_bounds(values, key):
    with pytest.raises(ConfigError) as info:
        build_config(values)
    assert info.value.key == key


@pytest.mark.parametrize(
    "values, key",
    [
        ({"command": "rate-function", "dt": 2.0, "t_max": 1.0}, "dt"),
        ({"command": "rate-function", "size": 6}, "size"),
        ({"command": "ggm-scan", "engine": "ed"}, "size"),
        ({"command": "entanglement-dynamics", "engine": "ed", "size": 14}, "size"),
        ({"command": "entanglement-dynamics", "engine": "ed", "size": 7}, "size"),
    ],
)
def test_cross_field_checks(values, key):
    with pytest.raises(ConfigError) as info:
        build_config(values)
    assert info.value.key == key


@pytest.mark.parametrize("size", [4, 6, 10, 12])
def test_exact_engine_accepts_even_sizes(size):
    config = build_config({"command": "ggm-scan", "engine": "ed", "size": size})
    assert config.size == size


def test_config_error_survives_pickling():
    error = pickle.loads(pickle.dumps(ConfigError("size", "too large")))
    assert isinstance(error, ConfigError)
    assert error.key == "size"
    assert str(error) == "size: too large"


def test_missing_command():
    with pytest.raises(ConfigError) as info:
        build_config({})
    assert info.value.key == "command"


def test_text_file_with_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# quench into the chiral phase\ncommand = critical-times\n\nd_1 = 1.0  # strong DM\nlambda1_1=0.4\n")
    config = build_config(load_config(str(path)))
    assert config.command == "critical-times"
    assert config.d_1 == 1.0
    assert config.lambda1_1 == 0.4


def test_text_file_without_assignment(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("command rate-function\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_empty_and_missing_files(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("  \n")
    with pytest.raises(ConfigError):
        load_config(str(path))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.cfg"))


def test_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"command": "dqpt-scan", "nx": 5, "ny": 3}))
    config = build_config(load_config(str(path)))
    assert (config.nx, config.ny) == (5, 3)


def test_json_rejects_nesting(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"command": "dqpt-scan", "quench": {"d_1": 1.0}}))
    with pytest.raises(ConfigError) as info:
        load_config(str(path))
    assert info.value.key == "quench"


def test_save_and_reload(tmp_path):
    config = build_config({"command": "ggm-scan", "tau": 12.5, "d_1": 0.1, "out": "scan.csv", "eps_crit": 1e-7})
    path = tmp_path / "echo.cfg"
    save_config(config, str(path))
    assert build_config(load_config(str(path))) == config
    assert "out = scan.csv" in dump_config(config)


def test_quench_helpers():
    config = build_config({"command": "dqpt-scan", "plane": "lambda1-d", "lambda2_1": 0.3})
    assert config.quench().initial.fields() == (1.5, 0.0, 0.0)
    assert config.plane_fixed() == 0.3
    assert isinstance(config, RunConfig)


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(2, 0) == 2
    assert resolve_threads(None, 5) == 3
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_threads(None, 5) == 5
    monkeypatch.setenv(THREADS_ENV, "many")
    assert resolve_threads(None, 4) == 4


def _add(a, b):
    return a + b


def test_parallel_map_keeps_order():
    items = [(k, 10 * k) for k in range(7)]
    assert parallel_map(_add, items, threads=1) == [11 * k for k in range(7)]
