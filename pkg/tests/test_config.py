from pathlib import Path

import pytest

from lavino.config import (ConfigError, PROBLEM_DEFAULTS, load_experiment_config,
                           parse_kv, read_kv, write_kv)

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def test_parse_kv_basics():
    text = """
    # a comment
    problem = A
    sampler.step_vcm = 1e5   # trailing comment
    empty.value =
    """
    kv = parse_kv(text)
    assert kv["problem"] == "A"
    assert kv["sampler.step_vcm"] == "1e5"
    assert kv["empty.value"] == ""


def test_parse_kv_malformed_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_kv("a = 1\nnot a pair\n")


def test_kv_round_trip(tmp_path):
    entries = {"a.b": "1", "c": "hello world", "d.e.f": "1e-4"}
    p = tmp_path / "t.cfg"
    write_kv(entries, p, header="round trip")
    assert read_kv(p) == entries


def test_problem_defaults_applied():
    cfg = load_experiment_config({"problem": "B"}, check_paths=False)
    assert cfg.sampler_cfg.step_icm == 2e3
    assert cfg.sampler_cfg.tv_weights.is_zero()
    cfg = load_experiment_config({"problem": "C"}, check_paths=False)
    assert cfg.sampler_cfg.tv_weights.lambda_h == 1e-4
    assert cfg.sampler_cfg.tv_solver == "adam"


def test_explicit_keys_override_defaults():
    cfg = load_experiment_config({"problem": "A", "sampler.step_vcm": "7"},
                                 check_paths=False)
    assert cfg.sampler_cfg.step_vcm == 7.0
    assert cfg.sampler_cfg.tv_weights.lambda_t == 0.005


def test_validation_collects_field_errors():
    entries = {
        "problem": "Z",
        "sampler.kind": "nope",
        "tv.lambda_h": "-1",
        "cg.iters": "x",
    }
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(entries, check_paths=False)
    msg = str(exc.value)
    for field in ("problem", "sampler.kind", "tv.lambda_h", "cg.iters"):
        assert field in msg


def test_pdhg_with_spatial_weights_rejected():
    entries = {"problem": "C", "tv.solver": "pdhg"}
    with pytest.raises(ConfigError, match="tv.solver"):
        load_experiment_config(entries, check_paths=False)


def test_vision_xl_needs_eps_prior():
    entries = {"sampler.kind": "vision-xl", "prior.vcm": "builtin:smoothing"}
    with pytest.raises(ConfigError, match="eps"):
        load_experiment_config(entries, check_paths=False)
    ok = dict(entries, **{"prior.vcm": "builtin:gaussian"})
    cfg = load_experiment_config(ok, check_paths=False)
    assert cfg.vxl.rho_fraction == 0.3


def test_missing_paths_reported():
    entries = {"paths.input": "/nonexistent/clip.vten"}
    with pytest.raises(ConfigError, match="paths.input"):
        load_experiment_config(entries, check_paths=True)


def test_init_file_required_when_file_init():
    with pytest.raises(ConfigError, match="init_file"):
        load_experiment_config({"sampler.init": "file"}, check_paths=False)


def test_shipped_configs_carry_documented_values_verbatim():
    # string-compare the shipped files against the documented hyperparameters
    files = {"A": "problem_a.cfg", "B": "problem_b.cfg", "C": "problem_c.cfg"}
    for problem, fname in files.items():
        kv = read_kv(CONFIG_DIR / fname)
        for key, value in PROBLEM_DEFAULTS[problem].items():
            assert kv[key] == value, (problem, key, kv[key], value)


def test_shipped_configs_parse_and_validate():
    for fname in ("problem_a.cfg", "problem_b.cfg", "problem_c.cfg"):
        cfg = load_experiment_config(read_kv(CONFIG_DIR / fname), check_paths=False)
        assert cfg.sampler == "latino"
        assert len(cfg.sampler_cfg.vcm_timesteps) == 5
        assert len(cfg.sampler_cfg.icm_timesteps) == 4
