"""Randomness and privacy primitives.

Every random draw in the package comes from a counter-based stream keyed by
``(master_seed, trial, role, user)``. A draw is addressed by its counter, so
a user's output never depends on the order in which other users were
evaluated, and a single entry (for example one RR bit of one row) can be
regenerated on demand without materializing the rest of the row.

This is a research simulator: floating-point Laplace sampling is not hardened
against precision-based attacks.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_NEG_53 = 2.0**-53


def _mix(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


_U_GOLDEN, _U_M1, _U_M2 = np.uint64(_GOLDEN), np.uint64(_M1), np.uint64(_M2)
_U30, _U27, _U31, _U11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)


def _mix_array(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays (wraps mod 2**64)."""
    z = x + _U_GOLDEN
    z ^= z >> _U30
    z *= _U_M1
    z ^= z >> _U27
    z *= _U_M2
    z ^= z >> _U31
    return z


def role_tag(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def _to_unit(bits: int) -> float:
    # 53 random bits -> open interval (0, 1)
    return ((bits >> 11) + 0.5) * _TWO_NEG_53


def _to_unit_array(bits: np.ndarray) -> np.ndarray:
    return ((bits >> _U11).astype(np.float64) + 0.5) * _TWO_NEG_53


class Stream:
    """A keyed stream of uniforms on (0, 1).

    ``uniform_at(c)`` is a pure function of ``(key, c)``. ``next_uniform``
    walks the counter for callers that just want sequential draws.
    """

    __slots__ = ("key", "_pos")

    def __init__(self, key: int):
        self.key = key & _MASK
        self._pos = 0

    def uniform_at(self, counter: int) -> float:
        return _to_unit(_mix(self.key ^ _mix(counter & _MASK)))

    def uniforms_at(self, counters) -> np.ndarray:
        c = np.asarray(counters).astype(np.uint64)
        with np.errstate(over="ignore"):
            return _to_unit_array(_mix_array(np.uint64(self.key) ^ _mix_array(c)))

    def next_uniform(self) -> float:
        u = self.uniform_at(self._pos)
        self._pos += 1
        return u


class ConstantStream(Stream):
    """Zero-entropy stream: every uniform equals ``value``.

    With ``value=0.5`` Laplace draws are exactly 0 and RR never flips, which
    turns every estimator into its noiseless counterpart.
    """

    __slots__ = ("value",)

    def __init__(self, value: float = 0.5):
        super().__init__(0)
        self.value = value

    def uniform_at(self, counter: int) -> float:
        return self.value

    def uniforms_at(self, counters) -> np.ndarray:
        return np.full(np.shape(counters), self.value, dtype=np.float64)


class RandomSource:
    """Derives independent streams from a master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._base = _mix(self.master_seed & _MASK)
        self._prefix: dict[tuple[int, str], int] = {}

    def _trial_role(self, trial: int, role: str) -> int:
        key = (trial, role)
        k = self._prefix.get(key)
        if k is None:
            if len(self._prefix) > 4096:
                self._prefix.clear()
            k = _mix(_mix(self._base ^ (trial & _MASK)) ^ role_tag(role))
            self._prefix[key] = k
        return k

    def stream(self, trial: int, role: str, user: int = 0) -> Stream:
        return Stream(_mix(self._trial_role(trial, role) ^ (user & _MASK)))

    def keys(self, trial: int, role: str, users) -> np.ndarray:
        """Stream keys for many users at once (same derivation as ``stream``)."""
        u = np.asarray(users).astype(np.uint64)
        with np.errstate(over="ignore"):
            return _mix_array(np.uint64(self._trial_role(trial, role)) ^ u)

    def uniforms(self, trial: int, role: str, users, counters) -> np.ndarray:
        """Uniform for each ``(users[m], counters[m])``, equal to the scalar path."""
        keys = self.keys(trial, role, users)
        c = np.asarray(counters).astype(np.uint64)
        with np.errstate(over="ignore"):
            return _to_unit_array(_mix_array(keys ^ _mix_array(c)))

    def seed_for(self, trial: int, role: str) -> int:
        """A 63-bit integer seed, e.g. for ``numpy.random.default_rng``."""
        return _mix(self._trial_role(trial, role)) >> 1


class ConstantSource(RandomSource):
    """Source whose every stream is a :class:`ConstantStream`."""

    def __init__(self, value: float = 0.5, master_seed: int = 0):
        super().__init__(master_seed)
        self.value = value

    def stream(self, trial: int, role: str, user: int = 0) -> Stream:
        return ConstantStream(self.value)

    def uniforms(self, trial, role, users, counters) -> np.ndarray:
        return np.full(np.shape(counters), self.value, dtype=np.float64)


def laplace(stream: Stream, scale: float) -> float:
    """One draw from Lap(scale) by inverse CDF."""
    if scale < 0:
        raise ValueError(f"Laplace scale must be non-negative, got {scale}")
    if scale == 0:
        return 0.0
    u = stream.next_uniform() - 0.5
    if u == 0.0:
        return 0.0
    return -scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u))


def laplace_from_uniforms(uniforms: np.ndarray, scale: float) -> np.ndarray:
    """Vectorized inverse-CDF Laplace on uniforms in (0, 1)."""
    if scale < 0:
        raise ValueError(f"Laplace scale must be non-negative, got {scale}")
    u = np.asarray(uniforms, dtype=np.float64) - 0.5
    if scale == 0:
        return np.zeros_like(u)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def rr_flip_prob(eps: float) -> float:
    """Flip probability 1/(e^eps + 1) of randomized response."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    # 1/(e^eps+1) written to stay finite for large eps
    return math.exp(-eps) / (1.0 + math.exp(-eps))


def rr_bit(stream: Stream, eps: float, bit: int) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    flip = stream.next_uniform() < rr_flip_prob(eps)
    return bit ^ int(flip)


def rr_lower_row(stream: Stream, eps: float, a) -> np.ndarray:
    """Randomized response on the entries of ``a`` left of the diagonal.

    Entry ``j`` of the result is RR applied to ``a[owner, j]`` for ``j < owner``;
    its uniform is ``stream.uniform_at(j)``, so any single entry can be
    recomputed without the others.
    """
    i = a.owner
    row = np.zeros(i, dtype=np.uint8)
    lower = a.bits[a.bits < i]
    row[lower] = 1
    if i == 0:
        return row
    flips = stream.uniforms_at(np.arange(i)) < rr_flip_prob(eps)
    return row ^ flips.astype(np.uint8)


@dataclass(frozen=True)
class PrivacyBudget:
    """Budget per round: eps0 (max degree), eps1 (RR), eps2 (Laplace)."""

    eps0: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0

    def __post_init__(self):
        for name in ("eps0", "eps1", "eps2"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")

    def edge_ldp_total(self) -> float:
        return self.eps0 + self.eps1 + self.eps2

    def entire_edge_ldp_total(self) -> float:
        # the noisy-degree round is not lower-triangular: one edge moves two degrees
        return 2 * self.eps0 + self.eps1 + self.eps2

    def __add__(self, other: "PrivacyBudget") -> "PrivacyBudget":
        return PrivacyBudget(
            self.eps0 + other.eps0, self.eps1 + other.eps1, self.eps2 + other.eps2
        )
