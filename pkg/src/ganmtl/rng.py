"""Counter-based splittable pseudo-random numbers.

Every draw is a pure function of (stream key, draw index), so independent
streams can be consumed in any order without affecting one another, and a
stream's whole state serializes as two integers.  That property is what
makes training runs resumable bit-for-bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_ROOT_SALT = 0x6A09E667F3BCC909  # decorrelates small consecutive seeds
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer: a bijective avalanche mix of 64-bit words."""
    with np.errstate(over="ignore"):  # uint64 wrap-around is the point
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _mix_int(z: int) -> int:
    return int(_mix(np.uint64(z & _MASK64)))


def _tag_hash(tag) -> int:
    """Stable 64-bit FNV-1a hash of a stream tag (int, str, or tuple)."""
    if isinstance(tag, tuple):
        h = _FNV_OFFSET
        for part in tag:
            h = ((h ^ _tag_hash(part)) * _FNV_PRIME) & _MASK64
        return h
    if isinstance(tag, (int, np.integer)):
        data = b"i" + (int(tag) & _MASK64).to_bytes(8, "little")
    else:
        data = b"s" + str(tag).encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class Rng:
    """Deterministic uniform source with derivable substreams.

    ``Rng(seed)`` roots a generator; ``stream(tag)`` derives an independent
    substream whose values depend only on (seed, tag path).  Draw order
    within a stream is tracked by a plain counter.
    """

    def __init__(self, seed: int, _key: int | None = None, _counter: int = 0):
        self.seed = int(seed) & _MASK64
        if _key is None:
            _key = _mix_int(self.seed ^ _ROOT_SALT)
        self._key = _key & _MASK64
        self._counter = int(_counter)

    def stream(self, tag) -> "Rng":
        """Derive an independent substream keyed by ``tag``."""
        key = _mix_int(self._key ^ _tag_hash(tag))
        return Rng(self.seed, _key=key, _counter=0)

    # -- state ------------------------------------------------------------

    def state(self) -> dict:
        return {"seed": self.seed, "key": self._key, "counter": self._counter}

    @classmethod
    def from_state(cls, state: dict) -> "Rng":
        return cls(state["seed"], _key=state["key"], _counter=state["counter"])

    # -- raw draws ---------------------------------------------------------

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` 64-bit words of the stream."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self._key) + idx * np.uint64(_GOLDEN))

    # -- typed draws -------------------------------------------------------

    def uniform(self, shape=(), lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Uniform float64 samples in [lo, hi)."""
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        out = lo + u * (hi - lo)
        return out.reshape(shape)

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Gaussian samples via Box-Muller on paired uniforms."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        pairs = (n + 1) // 2
        u = self.uniform((2, pairs))
        r = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1-u in (0, 1], log finite
        theta = 2.0 * np.pi * u[1]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return (mean + std * z).reshape(shape)

    def integers(self, lo: int, hi: int, shape=()) -> np.ndarray:
        """Integer samples in [lo, hi)."""
        if not lo < hi:
            raise ValueError(f"integers requires lo < hi, got lo={lo}, hi={hi}")
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        vals = self._raw(n) % np.uint64(hi - lo)
        return (lo + vals.astype(np.int64)).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")

    def choice_sign(self, shape=()) -> np.ndarray:
        """Samples from {-1.0, +1.0} with equal probability."""
        return np.where(self.uniform(shape) < 0.5, -1.0, 1.0)


def rng_uniform(rng: Rng, shape, lo: float, hi: float):
    """Uniform draw packaged as a Tensor (see ``ganmtl.tensor``)."""
    from .tensor import Tensor

    return Tensor(rng.uniform(shape, lo, hi))
