"""The two seeded hash families used by the protocol.

``hash_h_prime`` is the key extractor::

    h'(x, (a, b)) = [a * x^2 + b * x]_{1..l}            in GF(2^n)

``hash_h`` is the tag function.  x is split into a leading t-bit part y1 and
a trailing (n-t)-bit part y2.  The 2n-bit extractor seed is cut into r
chunks c_1..c_r of n-t bits each::

    u   = s2 * y2^(r+2) + sum_{i=1..r} c_i * y2^i          in GF(2^(n-t))
    tag = [u]_{1..t} + y1^3 + s1 * y1                     in GF(2^t)

Seed layout: the extractor seed is ``s2pp || s1pp`` (s2pp in the high n
bits).  It is followed by 1-bits up to r(n-t) bits, so the padding lands in
the low-index chunks.  Chunk c_r holds the most significant bits.  s2 must
have its least significant bit set.

Every function has a scalar form on Python ints, which works at any width,
and a numpy form for the exhaustive oracles, which needs n <= 31.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf2 import FieldSpec


def min_odd_r(n: int, t: int) -> int:
    """Smallest odd r with r * (n - t) >= 2n."""
    w = n - t
    r = -(-2 * n // w)
    return r if r % 2 else r + 1


def random_bits(rng: np.random.Generator, k: int) -> int:
    """Uniform k-bit int from a numpy generator (any k >= 0)."""
    if k == 0:
        return 0
    nbytes = (k + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - k)


@dataclass(frozen=True)
class HashParams:
    n: int
    t: int
    l: int
    r: int = 0
    field_nt: FieldSpec = field(default=None, repr=False)
    field_t: FieldSpec | None = field(default=None, repr=False)
    field_n: FieldSpec = field(default=None, repr=False)

    def __post_init__(self):
        n, t, l = self.n, self.t, self.l
        if n < 2:
            raise ValueError("n must be >= 2")
        if not 0 <= t <= n // 2:
            raise ValueError(f"need 0 <= t <= n/2, got t={t}, n={n}")
        if not 0 <= l <= n:
            raise ValueError(f"need 0 <= l <= n, got l={l}")
        if self.r == 0:
            object.__setattr__(self, "r", min_odd_r(n, t))
        if self.r % 2 == 0 or self.r * (n - t) < 2 * n:
            raise ValueError(f"r={self.r} must be odd with r(n-t) >= 2n")
        if self.field_nt is None:
            object.__setattr__(self, "field_nt", FieldSpec.default(n - t))
        if self.field_t is None and t > 0:
            object.__setattr__(self, "field_t", FieldSpec.default(t))
        if self.field_n is None:
            object.__setattr__(self, "field_n", FieldSpec.default(n))
        if self.field_nt.m != n - t or self.field_n.m != n:
            raise ValueError("field widths do not match n, t")
        if t and self.field_t.m != t:
            raise ValueError("field_t width does not match t")

    @property
    def pad_bits(self) -> int:
        return self.r * (self.n - self.t) - 2 * self.n

    def seed_space_size(self) -> int:
        """|S'| * |S|: extractor seeds times tag seeds (s2 with odd low bit)."""
        return 1 << (2 * self.n + (self.n - self.t - 1) + self.t)

    def to_dict(self) -> dict:
        d = {"n": self.n, "t": self.t, "l": self.l, "r": self.r,
             "field_nt": self.field_nt.to_dict(), "field_n": self.field_n.to_dict()}
        if self.field_t is not None:
            d["field_t"] = self.field_t.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HashParams":
        fields = {k: FieldSpec.from_dict(d[k]) for k in ("field_nt", "field_t", "field_n") if k in d}
        return cls(int(d["n"]), int(d["t"]), int(d["l"]), int(d.get("r", 0)), **fields)


@dataclass(frozen=True)
class SeedPair:
    """Extractor seed (s2pp, s1pp) and tag seed (s2, s1), all plain ints.

    A pair whose s2 has a zero low bit can be built, so that tampered
    messages can be represented.  ``valid`` reports whether it is usable.
    """

    s2pp: int
    s1pp: int
    s2: int
    s1: int

    @property
    def valid(self) -> bool:
        return bool(self.s2 & 1)

    def s_prime(self, n: int) -> int:
        return (self.s2pp << n) | self.s1pp

    def fits(self, params: HashParams) -> bool:
        n, t = params.n, params.t
        return (self.s2pp >> n == 0 and self.s1pp >> n == 0
                and self.s2 >> (n - t) == 0 and self.s1 >> t == 0)

    def to_dict(self, params: HashParams) -> dict:
        n, t = params.n, params.t
        return {
            "s2pp": hex_field(self.s2pp, n),
            "s1pp": hex_field(self.s1pp, n),
            "s2": hex_field(self.s2, n - t),
            "s1": hex_field(self.s1, t),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedPair":
        return cls(*(int(d[k], 16) if d[k] else 0 for k in ("s2pp", "s1pp", "s2", "s1")))


def hex_field(value: int, width: int) -> str:
    """Zero-padded lowercase hex holding ``width`` bits; empty for width 0."""
    return format(value, f"0{(width + 3) // 4}x") if width else ""


def sample_seed_pair(params: HashParams, rng: np.random.Generator) -> SeedPair:
    n, t = params.n, params.t
    s2pp = random_bits(rng, n)
    s1pp = random_bits(rng, n)
    s2 = random_bits(rng, n - t) | 1
    s1 = random_bits(rng, t)
    return SeedPair(s2pp, s1pp, s2, s1)


def split_x(x: int, n: int, t: int) -> tuple[int, int]:
    """(y2, y1): y1 is the leading t bits of x, y2 the trailing n-t bits."""
    if not 0 <= x < 1 << n:
        raise ValueError(f"{x:#x} is not an {n}-bit value")
    return x & ((1 << (n - t)) - 1), x >> (n - t)


def join_x(y2: int, y1: int, n: int, t: int) -> int:
    return (y1 << (n - t)) | y2


def chunk_s_prime(s_prime: int, params: HashParams) -> list[int]:
    """Chunks [c_r, ..., c_1] of the 1-padded extractor seed."""
    w = params.n - params.t
    pad = params.pad_bits
    padded = (s_prime << pad) | ((1 << pad) - 1)
    mask = (1 << w) - 1
    return [(padded >> (i * w)) & mask for i in range(params.r - 1, -1, -1)]


def _tag_coeffs(seeds: SeedPair, params: HashParams) -> list[int]:
    """[c_1, ..., c_r, 0, s2]: u is their no-constant-term polynomial in y2."""
    chunks = chunk_s_prime(seeds.s_prime(params.n), params)
    return chunks[::-1] + [0, seeds.s2]


def _check_x(x: int, n: int) -> None:
    if not 0 <= x < 1 << n:
        raise ValueError(f"{x:#x} is not an {n}-bit value")


def hash_h(x: int, seeds: SeedPair, params: HashParams) -> int:
    """t-bit tag of an n-bit x."""
    _check_x(x, params.n)
    if not seeds.valid:
        raise ValueError("s2 must have its low bit set")
    if not seeds.fits(params):
        raise ValueError("seed widths do not match the hash parameters")
    return _hash_h(x, _tag_coeffs(seeds, params), seeds.s1, params)


def _hash_h(x: int, coeffs: list[int], s1: int, params: HashParams) -> int:
    n, t = params.n, params.t
    if t == 0:
        return 0
    y2, y1 = split_x(x, n, t)
    u = params.field_nt.horner(coeffs, y2)
    ft = params.field_t
    cubic = ft.mul(ft.mul(y1, y1), y1) ^ ft.mul(s1, y1)
    return (u >> (n - 2 * t)) ^ cubic


def hash_h_prime(x: int, seeds: SeedPair, params: HashParams, l: int | None = None) -> int:
    """l-bit extracted key of an n-bit x (l defaults to ``params.l``)."""
    n = params.n
    l = params.l if l is None else l
    _check_x(x, n)
    if not 0 <= l <= n:
        raise ValueError(f"key length {l} outside [0, {n}]")
    f = params.field_n
    v = f.mul(seeds.s2pp, f.mul(x, x)) ^ f.mul(seeds.s1pp, x)
    return v >> (n - l)


class Hasher:
    """Both hashes bound to one seed pair, with the chunk layout precomputed."""

    def __init__(self, seeds: SeedPair, params: HashParams):
        if not seeds.valid:
            raise ValueError("s2 must have its low bit set")
        if not seeds.fits(params):
            raise ValueError("seed widths do not match the hash parameters")
        self.seeds = seeds
        self.params = params
        self._coeffs = _tag_coeffs(seeds, params)

    def h(self, x: int) -> int:
        _check_x(x, self.params.n)
        return _hash_h(x, self._coeffs, self.seeds.s1, self.params)

    def h_prime(self, x: int) -> int:
        return hash_h_prime(x, self.seeds, self.params)

    def h_array(self, xs) -> np.ndarray:
        s = self.seeds
        return hash_h_array(self.params, xs, s.s2pp, s.s1pp, s.s2, s.s1)

    def h_prime_array(self, xs) -> np.ndarray:
        s = self.seeds
        return hash_h_prime_array(self.params, xs, s.s2pp, s.s1pp)


# -- numpy kernels ---------------------------------------------------------


def hash_h_array(params: HashParams, x, s2pp, s1pp, s2, s1) -> np.ndarray:
    """Vectorized hash_h; all inputs broadcast together.  Needs n <= 31."""
    n, t = params.n, params.t
    if n > 31:
        raise ValueError("array kernels need n <= 31")
    x = np.asarray(x, dtype=np.int64)
    if t == 0:
        return np.zeros(np.broadcast_shapes(x.shape, np.shape(s2pp), np.shape(s2)), dtype=np.int64)
    w = n - t
    y2 = x & ((1 << w) - 1)
    y1 = x >> w
    fnt, ft = params.field_nt, params.field_t
    pad = params.pad_bits
    # the padded seed has r*w bits; past 62 it goes through object ints
    dtype = np.int64 if params.r * w <= 62 else object
    padded = (((np.asarray(s2pp, dtype=dtype) << n) | np.asarray(s1pp, dtype=dtype)) << pad) | ((1 << pad) - 1)
    mask = (1 << w) - 1
    chunks = [np.asarray((padded >> (i * w)) & mask).astype(np.int64) for i in range(params.r)]
    coeffs = chunks + [0, np.asarray(s2, dtype=np.int64)]
    acc = np.zeros(1, dtype=np.int64)
    for c in reversed(coeffs):
        acc = fnt.mul_array(acc ^ c, y2)
    cubic = ft.mul_array(ft.mul_array(y1, y1), y1) ^ ft.mul_array(s1, y1)
    return (acc >> (w - t)) ^ cubic


def hash_h_prime_array(params: HashParams, x, s2pp, s1pp, l: int | None = None) -> np.ndarray:
    n = params.n
    l = params.l if l is None else l
    f = params.field_n
    x = np.asarray(x, dtype=np.int64)
    v = f.mul_array(s2pp, f.mul_array(x, x)) ^ f.mul_array(s1pp, x)
    return v >> (n - l)


def hash_h_grid(params: HashParams, xs, s2pp, s1pp, s2, s1) -> np.ndarray:
    """Tags for every (message, x) pair as an (M, X) table.

    Messages are 1-d arrays of length M, ``xs`` a 1-d array.  The polynomial
    part is evaluated once per distinct y2 and the cubic once per distinct
    y1, then gathered, which is far cheaper than broadcasting every x.
    """
    n, t = params.n, params.t
    xs = np.asarray(xs, dtype=np.int64)
    s2pp, s1pp, s2, s1 = (np.asarray(v, dtype=np.int64).reshape(-1) for v in (s2pp, s1pp, s2, s1))
    if t == 0:
        return np.zeros((len(s2pp), len(xs)), dtype=np.int64)
    w = n - t
    y2_vals, y2_idx = np.unique(xs & ((1 << w) - 1), return_inverse=True)
    y1_vals, y1_idx = np.unique(xs >> w, return_inverse=True)
    zero = np.zeros(1, dtype=np.int64)
    u = hash_h_array(params, y2_vals[None, :], s2pp[:, None], s1pp[:, None], s2[:, None], zero)
    ft = params.field_t
    y1 = y1_vals[None, :]
    cubic = ft.mul_array(ft.mul_array(y1, y1), y1) ^ ft.mul_array(s1[:, None], y1)
    small = np.int16 if t < 16 else np.int32
    return u.astype(small)[:, y2_idx] ^ cubic.astype(small)[:, y1_idx]
