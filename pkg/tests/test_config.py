import math

import pytest

from cfrobust.config import (ConfigError, SimConfig, apply_settings, desk_config, dump_config,
                             load_config, paper_config, parse_overrides, recipe_path)


def test_defaults():
    cfg = desk_config()
    assert (cfg.N, cfg.K, cfg.L, cfg.N_a) == (32, 8, 8, 1)
    assert cfg.sigma_e ** 2 == pytest.approx(0.1)
    assert cfg.sweep_axis is None
    p = paper_config()
    assert (p.N, p.K, p.n_channel_draws, p.n_error_draws) == (128, 16, 100, 100)


@pytest.mark.parametrize("bad", [
    dict(N=0), dict(L=40), dict(N_a=9), dict(sigma_e=-0.1), dict(schemes=("ZF",)),
    dict(theta_mode="full"), dict(sinr_model="x"), dict(sigma_e=(0.1, 0.2), snr_db=(0.0, 5.0)),
])
def test_validation(bad):
    with pytest.raises(ConfigError):
        SimConfig(**bad)


def test_recipes_load():
    fig1 = load_config(recipe_path("fig1"))
    assert fig1.sweep_axis == "snr_db"
    assert fig1.snr_db == (0.0, 5.0, 10.0, 15.0, 20.0)
    assert fig1.sigma_e == pytest.approx(math.sqrt(0.1))
    fig2 = load_config(recipe_path("fig2"))
    assert fig2.sweep_axis == "sigma_e" and fig2.snr_db == 15.0


def test_dump_roundtrip(tmp_path):
    cfg = desk_config(sigma_e=(0.0, 0.25), N=20, theta_mode="exact_diagonal", seed=9)
    path = tmp_path / "r.cfg"
    path.write_text(dump_config(cfg))
    back = load_config(str(path))
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_overrides():
    cfg = apply_settings(desk_config(), parse_overrides(
        ["network.K=4", "experiment.schemes=MMSE,MMSE-RB", "solver.max_iterations=3",
         "propagation.shadow_std_db=0", "experiment.normalize_channels=no"]))
    assert cfg.K == 4 and cfg.schemes == ("MMSE", "MMSE-RB")
    assert cfg.solver.max_iterations == 3 and cfg.propagation.shadow_std_db == 0.0
    assert cfg.normalize_channels is False


@pytest.mark.parametrize("pair", ["network.Q=1", "bogus.N=1", "N=3", "network.K=abc",
                                  "propagation.d0=100", "experiment.normalize_channels=maybe"])
def test_bad_overrides(pair):
    with pytest.raises(ConfigError):
        apply_settings(desk_config(), parse_overrides([pair]))
    with pytest.raises(ConfigError):
        parse_overrides(["noequals"])


def test_digest_changes_with_config():
    assert desk_config().digest() != desk_config(seed=2).digest()
    assert desk_config().digest() == desk_config().digest()
