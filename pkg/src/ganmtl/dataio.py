"""Dataset file format (GSPD): deterministic, checksummed, bit-exact round trip.

Layout, all integers little-endian:

    magic   4 bytes  b"GSPD"
    version u32      format revision (currently 1)
    config  u32 length + UTF-8 "key=value" lines (the generating CorpusConfig)
    count   u32      number of utterances
    per utterance:
        T, L, A as u32
        linguistic matrix   T*L float64, row-major
        acoustic matrix     T*A float64, row-major
        labels              T   u32
    crc32   u32      of every preceding byte

A wrong magic or unknown version fails before anything else is touched;
short files fail while parsing, naming the utterance; bit flips that keep
the length intact fail the trailing checksum.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .corpus import CorpusConfig, Dataset, Utterance

MAGIC = b"GSPD"
VERSION = 1

_INT_FIELDS = ("phonemes", "spectral_dims", "utterances", "segments_per_utterance", "seed")
_FLOAT_FIELDS = ("sigma", "delta_scale", "f0_sin_amp")


class FormatError(ValueError):
    """Raised for any malformed, truncated, or corrupted GSPD/GMTL file."""


def config_to_text(cfg: CorpusConfig) -> str:
    lines = [f"{name}={getattr(cfg, name)}" for name in _INT_FIELDS]
    lines += [f"{name}={getattr(cfg, name)!r}" for name in _FLOAT_FIELDS]
    lo, hi = cfg.frames_per_phoneme
    lines.append(f"frames_per_phoneme={lo},{hi}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> CorpusConfig:
    fields: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"config line {lineno} is not key=value: {line!r}")
        fields[key] = value
    kwargs: dict = {}
    try:
        for name in _INT_FIELDS:
            kwargs[name] = int(fields.pop(name))
        for name in _FLOAT_FIELDS:
            kwargs[name] = float(fields.pop(name))
        lo, hi = fields.pop("frames_per_phoneme").split(",")
        kwargs["frames_per_phoneme"] = (int(lo), int(hi))
    except KeyError as e:
        raise FormatError(f"config is missing field {e.args[0]}") from None
    except ValueError as e:
        raise FormatError(f"config field unparseable: {e}") from None
    if fields:
        raise FormatError(f"config has unknown fields: {sorted(fields)}")
    return CorpusConfig(**kwargs)


class _Cursor:
    """Bounds-checked reader over a byte buffer."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"file truncated while reading {what}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f64_matrix(self, rows: int, cols: int, what: str) -> np.ndarray:
        raw = self.take(8 * rows * cols, what)
        return np.frombuffer(raw, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_dataset(ds: Dataset, path) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    cfg_bytes = config_to_text(ds.config).encode("utf-8")
    parts.append(struct.pack("<I", len(cfg_bytes)))
    parts.append(cfg_bytes)
    parts.append(struct.pack("<I", len(ds.utterances)))
    for utt in ds.utterances:
        T, L = utt.ling.shape
        A = utt.acoustic.shape[1]
        parts.append(struct.pack("<III", T, L, A))
        parts.append(np.ascontiguousarray(utt.ling, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(utt.acoustic, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(utt.labels, dtype="<u4").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body)))


def read_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        raw = f.read()
    cur = _Cursor(raw)
    if cur.take(4, "magic") != MAGIC:
        raise FormatError("not a GSPD dataset (bad magic)")
    version = cur.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported GSPD version {version} (expected {VERSION})")
    cfg_len = cur.u32("config length")
    cfg = config_from_text(cur.take(cfg_len, "config block").decode("utf-8"))
    count = cur.u32("utterance count")
    utts = []
    for i in range(count):
        what = f"utterance {i}"
        T = cur.u32(f"{what} header")
        L = cur.u32(f"{what} header")
        A = cur.u32(f"{what} header")
        if T < 1:
            raise FormatError(f"{what} has no frames")
        ling = cur.f64_matrix(T, L, f"{what} linguistic matrix")
        acoustic = cur.f64_matrix(T, A, f"{what} acoustic matrix")
        labels_raw = cur.take(4 * T, f"{what} labels")
        labels = np.frombuffer(labels_raw, dtype="<u4").astype(np.int64)
        utts.append(Utterance(ling=ling, acoustic=acoustic, labels=labels))
    stated = struct.unpack("<I", cur.take(4, "checksum"))[0]
    if cur.pos != len(raw):
        raise FormatError(f"{len(raw) - cur.pos} trailing bytes after checksum")
    if zlib.crc32(raw[:cur.pos - 4]) != stated:
        raise FormatError("checksum mismatch: file is corrupted")
    return Dataset(utterances=utts, config=cfg)
