import pytest
from hypothesis import given, strategies as st

from p2pnet.config import RunConfig, defaults_help, parse_config, serialize_config
from p2pnet.datasynth import ConfigError, GeneratorSpec
from p2pnet.layers import full_preset
from p2pnet.losses import LossWeights
from p2pnet.trainer import TrainConfig


def test_defaults_roundtrip():
    text = serialize_config(RunConfig())
    assert parse_config(text) == RunConfig()
    assert serialize_config(parse_config(text)) == text


def test_preset_and_overrides():
    cfg = parse_config("[network]\npreset = full\ndim = 3\nnoise_len = 0\n[loss]\nmu_reg = 0.5\n[train]\nepochs = 7\n")
    assert cfg.network.sa_layers == full_preset(3).sa_layers and cfg.network.noise_len == 0
    assert cfg.train.weights.mu_reg == 0.5 and cfg.train.epochs == 7


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[train]\nepoch = 3\n")
    with pytest.raises(ConfigError, match="section"):
        parse_config("[optim]\nlr = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[train]\nnoise = maybe\n")
    with pytest.raises(ConfigError):
        parse_config("[network]\npreset = huge\n")


def test_help_lists_every_key():
    text = defaults_help()
    for key in ("epochs", "lr_init", "mu_reg", "k_density", "sa_layers", "noise_len", "points_per_set"):
        assert f"{key} = " in text


@given(
    st.integers(1, 500),
    st.floats(1e-4, 1e-2),
    st.booleans(),
    st.booleans(),
    st.floats(0, 2),
    st.integers(1, 16),
    st.sampled_from(["line_disk", "line_bars", "cat_dog"]),
    st.dictionaries(st.sampled_from(["aspect", "protrusion", "bar_gap"]), st.one_of(st.booleans(), st.floats(0.1, 2.0))),
)
def test_parse_serialize_fixed_point(epochs, lr, noise, reg, lam, k, kind, params):
    cfg = RunConfig(
        train=TrainConfig(epochs=epochs, lr_init=lr, lr_floor=min(lr, 1e-4), noise=noise, crossreg=reg, weights=LossWeights(lam, 0.1, k)),
        data=GeneratorSpec(kind, count=10, points_per_set=64, params=params),
    )
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
