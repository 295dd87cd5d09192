"""GSPD dataset files: round trips and corruption detection."""

import struct

import numpy as np
import pytest

from ganmtl.corpus import CorpusConfig, generate_corpus
from ganmtl.dataio import (
    FormatError,
    config_from_text,
    config_to_text,
    read_dataset,
    write_dataset,
)


def _small_dataset():
    return generate_corpus(CorpusConfig(utterances=10, segments_per_utterance=3, seed=8))[0]


def test_round_trip_bit_exact(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert back.config == ds.config
    assert back.split_of == ds.split_of
    assert len(back.utterances) == len(ds.utterances)
    for a, b in zip(ds.utterances, back.utterances):
        assert a.ling.tobytes() == b.ling.tobytes()
        assert a.acoustic.tobytes() == b.acoustic.tobytes()
        assert np.array_equal(a.labels, b.labels)


def test_config_text_round_trip():
    cfg = CorpusConfig(utterances=37, sigma=0.125, delta_scale=0.3, seed=99,
                       frames_per_phoneme=(4, 11))
    assert config_from_text(config_to_text(cfg)) == cfg


def test_config_text_errors():
    cfg = CorpusConfig()
    with pytest.raises(FormatError, match="missing"):
        config_from_text(config_to_text(cfg).replace("sigma=", "sygma="))
    with pytest.raises(FormatError, match="key=value"):
        config_from_text("phonemes\n")
    with pytest.raises(FormatError, match="unknown"):
        config_from_text(config_to_text(cfg) + "extra=1\n")


def test_bad_magic(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XSPD"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        read_dataset(path)


def test_version_mismatch(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 9)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version 9"):
        read_dataset(path)


def test_truncation_names_utterance(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    raw = path.read_bytes()

    cfg_len = len(config_to_text(ds.config).encode("utf-8"))
    offset = 4 + 4 + 4 + cfg_len + 4  # through utterance count
    for utt in ds.utterances[:1]:
        T, L = utt.ling.shape
        A = utt.acoustic.shape[1]
        offset += 12 + 8 * T * L + 8 * T * A + 4 * T
    # cut inside utterance 1's linguistic matrix
    path.write_bytes(raw[:offset + 12 + 17])
    with pytest.raises(FormatError, match="utterance 1 linguistic"):
        read_dataset(path)


def test_checksum_detects_bit_flip(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="checksum"):
        read_dataset(path)


def test_trailing_garbage_rejected(tmp_path):
    ds = _small_dataset()
    path = tmp_path / "corpus.gspd"
    write_dataset(ds, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        read_dataset(path)
