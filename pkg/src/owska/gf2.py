"""Binary extension fields GF(2^m).

Elements are plain Python ints.  Bit ``m - 1`` of the int is the coefficient
of ``x^(m-1)``; that is also "bit 1" when the element is written as an m-bit
string, most significant first.  Every truncation in the hash constructions
(``[v]_{1..t}``) keeps the *leading* t bits under this convention.

Two integer paths share one API:

* m <= 16: log/antilog tables, built lazily per field.
* m > 16: carryless multiply over the set bits of one operand, folded
  modulo the (sparse) reduction polynomial.  Python ints are arbitrary
  precision, so the same code serves every width up to ``MAX_DEGREE``.

``FieldSpec.mul_array``/``pow_array`` are numpy kernels used by the
exhaustive oracles.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

MAX_DEGREE = 4096
TABLE_PATH_MAX = 16
EXHAUSTIVE_CHECK_MAX = 16


class FieldMismatchError(ValueError):
    """Operands belong to different fields."""


@functools.lru_cache(maxsize=None)
def _load_table() -> dict[int, int]:
    text = resources.files("owska").joinpath("polytable.txt").read_text()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m_str, _, rest = line.partition(":")
        m = int(m_str)
        poly = (1 << m) | 1
        for k in filter(None, rest.split(",")):
            poly |= 1 << int(k)
        table[m] = poly
    return table


def standard_poly(m: int) -> int:
    """Low-weight irreducible of degree m from the built-in table."""
    try:
        return _load_table()[m]
    except KeyError:
        raise ValueError(f"no built-in reduction polynomial for m={m}") from None


def poly_to_str(poly: int) -> str:
    terms = []
    for k in range(poly.bit_length() - 1, -1, -1):
        if poly >> k & 1:
            terms.append("1" if k == 0 else "x" if k == 1 else f"x^{k}")
    return " + ".join(terms) or "0"


def clmul(a: int, b: int) -> int:
    """Carryless product of two binary polynomials (no reduction)."""
    if a.bit_count() < b.bit_count():
        a, b = b, a
    r = 0
    while b:
        low = b & -b
        r ^= a * low
        b ^= low
    return r


def poly_mod(a: int, f: int) -> int:
    df = f.bit_length()
    while a.bit_length() >= df:
        a ^= f << (a.bit_length() - df)
    return a


def _is_irreducible_by_trial_division(f: int) -> bool:
    m = f.bit_length() - 1
    if m == 1:
        return True
    for d in range(2, 1 << (m // 2 + 1)):
        if d.bit_length() - 1 > m // 2:
            break
        if poly_mod(f, d) == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """GF(2^m) defined by ``reduction_poly`` (an (m+1)-bit int, top bit set)."""

    m: int
    reduction_poly: int

    def __post_init__(self):
        m, f = self.m, self.reduction_poly
        if not 1 <= m <= MAX_DEGREE:
            raise ValueError(f"field degree m={m} outside [1, {MAX_DEGREE}]")
        if f.bit_length() != m + 1:
            raise ValueError(f"reduction polynomial {f:#x} does not have degree {m}")
        if not f & 1:
            raise ValueError(f"reduction polynomial {f:#x} has zero constant term")
        if m <= EXHAUSTIVE_CHECK_MAX:
            if not _is_irreducible_by_trial_division(f):
                raise ValueError(f"{poly_to_str(f)} is reducible")
        elif f != standard_poly(m):
            raise ValueError(
                f"m={m} > {EXHAUSTIVE_CHECK_MAX}: only the built-in polynomial "
                f"{poly_to_str(standard_poly(m))} is accepted"
            )

    @classmethod
    def default(cls, m: int) -> "FieldSpec":
        return _default_field(m)

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        poly = d["reduction_poly"]
        if isinstance(poly, str):
            poly = int(poly, 16)
        return cls(int(d["m"]), poly)

    def to_dict(self) -> dict:
        return {"m": self.m, "reduction_poly": format(self.reduction_poly, "#x")}

    def __repr__(self):
        return f"GF(2^{self.m}) mod {poly_to_str(self.reduction_poly)}"

    @property
    def order(self) -> int:
        return 1 << self.m

    @property
    def mask(self) -> int:
        return (1 << self.m) - 1

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value, self)

    def zero(self) -> "FieldElement":
        return FieldElement(0, self)

    def one(self) -> "FieldElement":
        return FieldElement(1, self)

    # -- integer kernels -------------------------------------------------

    def check(self, a: int) -> int:
        if not 0 <= a <= self.mask:
            raise ValueError(f"{a:#x} is not an element of GF(2^{self.m})")
        return a

    def reduce(self, p: int) -> int:
        m, mask = self.m, self.mask
        low = self.reduction_poly ^ (1 << m)
        while p >> m:
            p = (p & mask) ^ clmul(p >> m, low)
        return p

    def mul(self, a: int, b: int) -> int:
        if not a or not b:
            return 0
        if self.m <= TABLE_PATH_MAX:
            exp, log = _log_tables(self.m, self.reduction_poly)
            return exp[log[a] + log[b]]
        return self.reduce(clmul(a, b))

    def square(self, a: int) -> int:
        return self.mul(a, a)

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            raise ValueError("negative exponent")
        result = 1
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            e >>= 1
            if e:
                base = self.mul(base, base)
        return result

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        # extended Euclid on binary polynomials
        u, v = a, self.reduction_poly
        g1, g2 = 1, 0
        while u != 1:
            j = u.bit_length() - v.bit_length()
            if j < 0:
                u, v, g1, g2 = v, u, g2, g1
                j = -j
            u ^= v << j
            g1 ^= g2 << j
        return g1

    def horner(self, coeffs: Sequence[int], point: int) -> int:
        """sum_{i=1..r} coeffs[i-1] * point^i (no constant term)."""
        acc = 0
        for c in reversed(coeffs):
            acc = self.mul(acc ^ c, point)
        return acc

    # -- numpy kernels ---------------------------------------------------

    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        """(exp, log) as numpy arrays; exp has length 2*(2^m - 1)."""
        if self.m > TABLE_PATH_MAX:
            raise ValueError(f"no log tables for m={self.m} > {TABLE_PATH_MAX}")
        return _np_log_tables(self.m, self.reduction_poly)

    def mul_table(self) -> np.ndarray:
        """Full 2^m x 2^m product table (m <= 8)."""
        if self.m > 8:
            raise ValueError("product tables are limited to m <= 8")
        return _np_mul_table(self.m, self.reduction_poly)

    def mul_array(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.m <= 8:
            return self.mul_table()[a, b]
        if self.m <= TABLE_PATH_MAX:
            exp, log = self.tables()
            out = exp[log[a] + log[b]]
            return np.where((a == 0) | (b == 0), 0, out)
        if self.m <= 31:
            a, b = np.broadcast_arrays(a.astype(np.uint64), b.astype(np.uint64))
            prod = np.zeros(a.shape, dtype=np.uint64)
            for i in range(self.m):
                bit = (b >> np.uint64(i)) & np.uint64(1)
                prod ^= (a << np.uint64(i)) * bit
            f = np.uint64(self.reduction_poly)
            for k in range(2 * self.m - 2, self.m - 1, -1):
                top = (prod >> np.uint64(k)) & np.uint64(1)
                prod ^= (f << np.uint64(k - self.m)) * top
            return prod.astype(np.int64)
        raise ValueError(f"mul_array supports m <= 31, got m={self.m}")

    def pow_array(self, a, e: int) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if e == 0:
            return np.ones_like(a)
        exp, log = self.tables()
        period = (1 << self.m) - 1
        out = exp[(log[a] * e) % period]
        return np.where(a == 0, 0, out)


@functools.lru_cache(maxsize=None)
def _default_field(m: int) -> FieldSpec:
    return FieldSpec(m, standard_poly(m))


def _slow_mul(a: int, b: int, f: int) -> int:
    return poly_mod(clmul(a, b), f)


@functools.lru_cache(maxsize=None)
def _log_tables(m: int, f: int) -> tuple[list[int], list[int]]:
    order = (1 << m) - 1
    # smallest primitive element; irreducible f need not be primitive
    for g in range(2, 1 << m) if m > 1 else (1,):
        exp = [1] * order
        cur = 1
        ok = True
        for i in range(1, order):
            cur = _slow_mul(cur, g, f)
            if cur == 1:
                ok = False
                break
            exp[i] = cur
        if ok:
            break
    else:  # pragma: no cover - every finite field has a generator
        raise RuntimeError("no generator found")
    log = [0] * (1 << m)
    for i, v in enumerate(exp):
        log[v] = i
    return exp + exp, log


@functools.lru_cache(maxsize=None)
def _np_log_tables(m: int, f: int) -> tuple[np.ndarray, np.ndarray]:
    exp, log = _log_tables(m, f)
    return np.array(exp, dtype=np.int64), np.array(log, dtype=np.int64)


@functools.lru_cache(maxsize=None)
def _np_mul_table(m: int, f: int) -> np.ndarray:
    exp, log = _np_log_tables(m, f)
    a = np.arange(1 << m)
    table = exp[log[a][:, None] + log[a][None, :]]
    table[0, :] = 0
    table[:, 0] = 0
    return table


@dataclass(frozen=True)
class FieldElement:
    """An element of a specific GF(2^m); arithmetic operators check the field."""

    value: int
    field: FieldSpec

    def __post_init__(self):
        self.field.check(self.value)

    @property
    def bits(self) -> str:
        return format(self.value, f"0{self.field.m}b")

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement(0b{self.bits}, m={self.field.m})"

    def _same(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")

    def __add__(self, other):
        self._same(other)
        return FieldElement(self.value ^ other.value, self.field)

    __sub__ = __add__

    def __mul__(self, other):
        self._same(other)
        return FieldElement(self.field.mul(self.value, other.value), self.field)

    def __pow__(self, e: int):
        return FieldElement(self.field.pow(self.value, e), self.field)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)


def _field_of(f: FieldSpec | None, *elems: FieldElement) -> FieldSpec:
    fields = {e.field for e in elems}
    if f is not None:
        fields.add(f)
    if len(fields) != 1:
        raise FieldMismatchError("operands are not all in the same field")
    return fields.pop()


def gf_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def gf_mul(a: FieldElement, b: FieldElement, f: FieldSpec | None = None) -> FieldElement:
    field = _field_of(f, a, b)
    return FieldElement(field.mul(a.value, b.value), field)


def gf_pow(a: FieldElement, e: int, f: FieldSpec | None = None) -> FieldElement:
    field = _field_of(f, a)
    return FieldElement(field.pow(a.value, e), field)


def poly_eval(
    coeffs: Sequence[FieldElement], point: FieldElement, f: FieldSpec | None = None
) -> FieldElement:
    """Evaluate sum_{i=1..r} coeffs[i-1] * point^i by Horner's rule.

    The sum starts at i = 1, so there is no constant term and ``point = 0``
    always evaluates to 0.
    """
    if not coeffs:
        raise ValueError("empty coefficient list")
    field = _field_of(f, point, *coeffs)
    return FieldElement(field.horner([c.value for c in coeffs], point.value), field)


def truncate(a: FieldElement | int, t: int, m: int | None = None) -> int:
    """Leading t bits of an m-bit value, returned as a t-bit int."""
    if isinstance(a, FieldElement):
        value, m = a.value, a.field.m
    else:
        if m is None:
            raise TypeError("m is required for raw ints")
        value = a
    if not 0 <= t <= m:
        raise ValueError(f"cannot truncate {m}-bit value to {t} bits")
    return value >> (m - t)


def to_bitstring(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def from_bits(bits: Iterable[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v
