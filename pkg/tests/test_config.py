"""Config file parsing, schema enforcement, and TrainConfig validation."""

import pytest

from ganmtl.config import (ConfigError, ExperimentConfig, TrainConfig,
                           experiment_from_text, known_keys, load_experiment,
                           parse_kv_lines, with_paths)
from ganmtl.losses import LossConfig
from ganmtl.optim import AdamConfig


def test_train_config_defaults():
    cfg = TrainConfig()
    assert cfg.mode == "gan"
    assert cfg.steps == 5000
    assert cfg.batch_size == 16
    assert cfg.d_steps_per_g_step == 1
    assert cfg.eval_every == 200
    assert cfg.noise_dim == 16
    assert cfg.window == 9
    assert cfg.loss == LossConfig()
    assert cfg.adam == AdamConfig()
    assert cfg.data is None and cfg.out is None


def test_train_config_validation():
    with pytest.raises(ConfigError, match="mode"):
        TrainConfig(mode="wgan")
    with pytest.raises(ConfigError, match="steps"):
        TrainConfig(steps=0)
    with pytest.raises(ConfigError, match="batch_size"):
        TrainConfig(batch_size=1)
    with pytest.raises(ConfigError, match="d_steps"):
        TrainConfig(d_steps_per_g_step=-1)
    with pytest.raises(ConfigError, match="window"):
        TrainConfig(window=2)
    with pytest.raises(ConfigError, match="noise_dim"):
        TrainConfig(mode="gan", noise_dim=0)
    with pytest.raises(ConfigError, match="adversarial"):
        TrainConfig(mode="mse", pure_adversarial=True)
    with pytest.raises(ConfigError, match="dense_widths"):
        TrainConfig(dense_widths=())
    with pytest.raises(ConfigError, match="conv_channels"):
        TrainConfig(conv_channels=(4,))
    with pytest.raises(ConfigError, match="fc_width"):
        TrainConfig(fc_width=0)


def test_effective_noise_dim_by_mode():
    assert TrainConfig(mode="gan", noise_dim=7).effective_noise_dim == 7
    assert TrainConfig(mode="gan-pc", noise_dim=7).effective_noise_dim == 7
    # noise-free modes ignore the knob entirely
    assert TrainConfig(mode="mse", noise_dim=0).effective_noise_dim == 0
    assert TrainConfig(mode="asv", noise_dim=99).effective_noise_dim == 0


def test_uses_discriminator_by_mode():
    assert not TrainConfig(mode="mse").uses_discriminator
    assert TrainConfig(mode="gan").uses_discriminator
    assert TrainConfig(mode="gan-pc").uses_discriminator
    assert TrainConfig(mode="asv").uses_discriminator


def test_parse_kv_lines_comments_and_blanks():
    flat = parse_kv_lines("# header\n\n a = 1 \nb=two # trailing\n")
    assert flat == {"a": "1", "b": "two"}


def test_parse_kv_lines_rejects_bad_lines():
    with pytest.raises(ConfigError, match="line 2"):
        parse_kv_lines("a=1\nnot a pair\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_kv_lines("a=1\na=2\n")


FULL_TEXT = """
corpus.phonemes=6
corpus.spectral_dims=5
corpus.utterances=12
corpus.segments_per_utterance=4
corpus.frames_per_phoneme=4,8
corpus.sigma=0.2
corpus.delta_scale=0.4
corpus.f0_sin_amp=0.05
corpus.seed=11

train.mode=gan-pc
train.steps=40
train.batch_size=8
train.d_steps_per_g_step=2
train.eval_every=10
train.seed=3
train.pure_adversarial=false

model.noise_dim=5
model.window=7
model.dense_widths=24,24
model.rec_hidden=12
model.rec_layers=1
model.conv_channels=4,6
model.fc_width=20

loss.adv_weight=0.5
loss.recon_norm=l1
loss.g_adv_form=non-saturating
loss.prob_clamp=1e-6

adam.lr=0.002
adam.beta1=0.8
adam.beta2=0.99
adam.eps=1e-9
"""


def test_experiment_from_text_applies_every_section():
    exp = experiment_from_text(FULL_TEXT)
    assert isinstance(exp, ExperimentConfig)
    assert exp.corpus.phonemes == 6
    assert exp.corpus.frames_per_phoneme == (4, 8)
    assert exp.corpus.sigma == 0.2
    assert exp.train.mode == "gan-pc"
    assert exp.train.d_steps_per_g_step == 2
    assert exp.train.dense_widths == (24, 24)
    assert exp.train.conv_channels == (4, 6)
    assert exp.train.loss.recon_norm == "l1"
    assert exp.train.loss.g_adv_form == "non-saturating"
    assert exp.train.loss.prob_clamp == 1e-6
    assert exp.train.adam.lr == 0.002
    assert exp.train.adam.beta2 == 0.99


def test_empty_text_gives_defaults():
    exp = experiment_from_text("")
    assert exp.train == TrainConfig()
    assert exp.corpus.phonemes == 8


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        experiment_from_text("train.mode=gan\ntrain.momentum=0.9\n")
    with pytest.raises(ConfigError, match="model.sigma"):
        # a real key, but in the wrong section
        experiment_from_text("model.sigma=0.1\n")
    with pytest.raises(ConfigError, match="nosection"):
        experiment_from_text("nosection.key=1\n")


def test_value_type_errors():
    with pytest.raises(ConfigError, match="integer"):
        experiment_from_text("train.steps=many\n")
    with pytest.raises(ConfigError, match="number"):
        experiment_from_text("adam.lr=fast\n")
    with pytest.raises(ConfigError, match="true/false"):
        experiment_from_text("train.pure_adversarial=maybe\n")
    with pytest.raises(ConfigError, match="comma-separated"):
        experiment_from_text("model.dense_widths=24;24\n")


def test_section_validation_becomes_config_error():
    with pytest.raises(ConfigError, match="corpus config"):
        experiment_from_text("corpus.utterances=3\n")
    with pytest.raises(ConfigError, match="mode"):
        experiment_from_text("train.mode=blstm\n")
    with pytest.raises(ConfigError, match="lr"):
        experiment_from_text("adam.lr=0\n")


def test_load_experiment_from_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(FULL_TEXT, encoding="utf-8")
    assert load_experiment(path) == experiment_from_text(FULL_TEXT)


def test_with_paths_sets_only_given_fields():
    cfg = TrainConfig()
    cfg2 = with_paths(cfg, data="/x/ds.gspd")
    assert cfg2.data == "/x/ds.gspd" and cfg2.out is None
    cfg3 = with_paths(cfg2, out="/x/run")
    assert cfg3.data == "/x/ds.gspd" and cfg3.out == "/x/run"


def test_known_keys_lists_full_schema():
    keys = known_keys()
    assert "train.mode" in keys
    assert "corpus.frames_per_phoneme" in keys
    assert "loss.adv_weight" in keys
    assert "adam.beta1" in keys
    assert "model.conv_channels" in keys
    assert len(keys) == len(set(keys))
