"""GMTL checkpoint format: exact round trips and corruption detection."""

import struct
import zlib

import numpy as np
import pytest

from ganmtl.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from ganmtl.config import TrainConfig
from ganmtl.corpus import CorpusConfig, generate_corpus
from ganmtl.dataio import FormatError
from ganmtl.losses import LossConfig
from ganmtl.rng import Rng
from ganmtl.trainer import synthesize, train


@pytest.fixture(scope="module")
def dataset():
    ds, _ = generate_corpus(CorpusConfig(utterances=16, segments_per_utterance=5,
                                         phonemes=6, spectral_dims=5, seed=21))
    return ds


def _tiny_cfg(**overrides):
    base = dict(mode="gan", steps=3, batch_size=4, eval_every=2, seed=2,
                noise_dim=3, window=5, dense_widths=(10, 10), rec_hidden=6,
                rec_layers=1, conv_channels=(3, 4), fc_width=10)
    base.update(overrides)
    return TrainConfig(**base)


def _trained(dataset, **overrides):
    ckpt, _ = train(_tiny_cfg(**overrides), dataset)
    return ckpt


def test_round_trip_is_exact(dataset, tmp_path):
    ckpt = _trained(dataset)
    path = tmp_path / "ck.gmtl"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)

    assert loaded.cfg == ckpt.cfg
    assert (loaded.step, loaded.epoch, loaded.batch_pos) == (
        ckpt.step, ckpt.epoch, ckpt.batch_pos)
    assert (loaded.ling_dim, loaded.acoustic_dim, loaded.classes) == (
        ckpt.ling_dim, ckpt.acoustic_dim, ckpt.classes)
    assert loaded.noise_state == ckpt.noise_state
    assert loaded.adam_g.t == ckpt.adam_g.t
    assert loaded.adam_d.t == ckpt.adam_d.t

    by_name = {p.name: p.value.data for p in loaded.generator.params()}
    for p in ckpt.generator.params():
        assert np.array_equal(by_name[p.name], p.value.data)
    by_name = {p.name: p.value.data for p in loaded.discriminator.params()}
    for p in ckpt.discriminator.params():
        assert np.array_equal(by_name[p.name], p.value.data)
    for key, buf in ckpt.discriminator.buffers().items():
        assert np.array_equal(loaded.discriminator.buffers()[key].data, buf.data)
    for name, m in ckpt.adam_g.m.items():
        assert np.array_equal(loaded.adam_g.m[name], m)
        assert np.array_equal(loaded.adam_g.v[name], ckpt.adam_g.v[name])
    for name, m in ckpt.adam_d.m.items():
        assert np.array_equal(loaded.adam_d.m[name], m)


def test_round_trip_preserves_synthesis(dataset, tmp_path):
    ckpt = _trained(dataset)
    path = tmp_path / "ck.gmtl"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    ling = dataset.utterances[0].ling
    assert np.array_equal(synthesize(ckpt, ling, 5), synthesize(loaded, ling, 5))


def test_save_load_save_is_bytewise_stable(dataset, tmp_path):
    ckpt = _trained(dataset, mode="gan-pc")
    first = tmp_path / "a.gmtl"
    second = tmp_path / "b.gmtl"
    save_checkpoint(ckpt, first)
    save_checkpoint(load_checkpoint(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_mse_checkpoint_has_no_discriminator(dataset, tmp_path):
    ckpt = _trained(dataset, mode="mse")
    assert ckpt.discriminator is None and ckpt.adam_d is None
    path = tmp_path / "ck.gmtl"
    save_checkpoint(ckpt, path)
    assert b"d.conv1" not in path.read_bytes()
    loaded = load_checkpoint(path)
    assert loaded.discriminator is None and loaded.adam_d is None


def test_noise_state_resumes_the_stream(dataset, tmp_path):
    ckpt = _trained(dataset)
    path = tmp_path / "ck.gmtl"
    save_checkpoint(ckpt, path)
    a = Rng.from_state(ckpt.noise_state).uniform((8,))
    b = load_checkpoint(path).noise_rng().uniform((8,))
    assert np.array_equal(a, b)


def test_bad_magic(tmp_path):
    path = tmp_path / "ck.gmtl"
    path.write_bytes(b"GSPD" + b"\x00" * 64)
    with pytest.raises(FormatError, match="bad magic"):
        load_checkpoint(path)


def test_version_mismatch(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 9)
    body = bytes(raw[:-4])
    raw[-4:] = struct.pack("<I", zlib.crc32(body))
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version 9"):
        load_checkpoint(path)


def test_truncated_file(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)


def test_checksum_detects_payload_corruption(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    raw = bytearray(path.read_bytes())
    raw[-100] ^= 0x20  # somewhere inside the last tensor's data
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="checksum"):
        load_checkpoint(path)


def _rewrite_crc(raw: bytearray) -> bytes:
    raw[-4:] = struct.pack("<I", zlib.crc32(bytes(raw[:-4])))
    return bytes(raw)


def test_tensor_name_mismatch_names_the_gap(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    raw = bytearray(path.read_bytes())
    i = raw.find(b"g.dense0.w")
    assert i > 0
    raw[i:i + len(b"g.dense0.w")] = b"g.denseX.w"
    path.write_bytes(_rewrite_crc(raw))
    with pytest.raises(FormatError, match="do not match"):
        load_checkpoint(path)


def test_config_field_missing(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    raw = bytearray(path.read_bytes())
    i = raw.find(b"mode=mse")
    assert i > 0
    raw[i:i + 4] = b"modX"  # same length keeps the framing intact
    path.write_bytes(_rewrite_crc(raw))
    with pytest.raises(FormatError, match="missing field 'mode'"):
        load_checkpoint(path)


def test_trailing_garbage(dataset, tmp_path):
    path = tmp_path / "ck.gmtl"
    save_checkpoint(_trained(dataset, mode="mse", steps=1), path)
    path.write_bytes(path.read_bytes() + b"extra")
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_magic_constant():
    assert MAGIC == b"GMTL"


def test_checkpoint_config_survives_unusual_values(dataset, tmp_path):
    ckpt = _trained(dataset, loss=LossConfig(adv_weight=0.0, prob_clamp=1e-9,
                                             g_adv_form="non-saturating"),
                    d_steps_per_g_step=0, pure_adversarial=False)
    path = tmp_path / "ck.gmtl"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.cfg.loss == ckpt.cfg.loss
    assert loaded.cfg.d_steps_per_g_step == 0
