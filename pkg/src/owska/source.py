"""Correlated sources P_XYZ and the entropy functionals computed from them.

A ``JointSpec`` holds a single-letter pmf over finite alphabets.  n-symbol
vectors are i.i.d. draws.  Vectors are indexed in mixed radix with the
first symbol most significant, so for binary alphabets the vector
``(x_1, ..., x_n)`` maps to the n-bit int whose leading bit is x_1.  This
matches the bit order used by the field code.

Two numeric modes exist.  Float specs use numpy float64.  Exact specs hold
``fractions.Fraction`` entries, and the mass-valued functions return
Fractions, so lemma-level comparisons are equalities rather than
tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEFAULT_BUDGET = 1 << 24
# shared slack for "cost <= nu" comparisons in float mode
COST_TOL = 1e-9


class BudgetExceeded(ValueError):
    """An exhaustive computation would exceed its configured size budget."""


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    raise TypeError(f"exact mode needs Fraction/int/str probabilities, got {v!r}")


class JointSpec:
    """Single-letter joint pmf P_XYZ with shape (|X|, |Y|, |Z|)."""

    def __init__(self, pmf, exact: bool | None = None):
        arr = np.asarray(pmf, dtype=object)
        if arr.ndim != 3:
            raise ValueError("pmf must be a 3-d table indexed [x, y, z]")
        if min(arr.shape) < 2:
            raise ValueError(f"alphabet sizes must be >= 2, got {arr.shape}")
        if exact is None:
            exact = all(isinstance(v, (Fraction, str)) for v in arr.flat)
        self.exact = exact
        if exact:
            arr = np.vectorize(_as_fraction, otypes=[object])(arr)
            if any(v < 0 for v in arr.flat):
                raise ValueError("negative probability")
            total = sum(arr.flat, Fraction(0))
            if total != 1:
                raise ValueError(f"pmf sums to {total}, not 1")
            self.frac = arr
            self.pmf = arr.astype(float)
        else:
            self.frac = None
            self.pmf = arr.astype(float)
            if (self.pmf < 0).any():
                raise ValueError("negative probability")
            total = self.pmf.sum()
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"pmf sums to {total!r}, not 1")
        self.pmf.setflags(write=False)

    # -- construction ---------------------------------------------------

    @classmethod
    def bsc(cls, p, q, exact: bool = False) -> "JointSpec":
        """X a uniform bit; Y and Z are X through independent BSC(p), BSC(q)."""
        if exact:
            p, q, half, one = Fraction(p), Fraction(q), Fraction(1, 2), Fraction(1)
        else:
            p, q, half, one = float(p), float(q), 0.5, 1.0
        if not (0 <= p <= 1 and 0 <= q <= 1):
            raise ValueError("flip probabilities must lie in [0, 1]")
        pmf = np.empty((2, 2, 2), dtype=object)
        for x in range(2):
            for y in range(2):
                for z in range(2):
                    py = p if y != x else one - p
                    pz = q if z != x else one - q
                    pmf[x, y, z] = half * py * pz
        return cls(pmf, exact=exact)

    @classmethod
    def from_rows(cls, sizes: Sequence[int], rows: Iterable[Sequence]) -> "JointSpec":
        """Build from (x, y, z, prob) rows; string probabilities select exact mode."""
        rows = list(rows)
        exact = bool(rows) and all(isinstance(r[3], str) for r in rows)
        zero = Fraction(0) if exact else 0.0
        pmf = np.full(tuple(sizes), zero, dtype=object)
        for x, y, z, prob in rows:
            if pmf[x, y, z] != 0:
                raise ValueError(f"duplicate row for {(x, y, z)}")
            pmf[x, y, z] = Fraction(prob) if exact else float(prob)
        return cls(pmf, exact=exact)

    def to_rows(self) -> list[list]:
        src = self.frac if self.exact else self.pmf
        rows = []
        for (x, y, z), v in np.ndenumerate(src):
            if v != 0:
                rows.append([x, y, z, str(v) if self.exact else float(v)])
        return rows

    def to_dict(self) -> dict:
        return {"sizes": list(self.shape), "rows": self.to_rows()}

    @classmethod
    def from_dict(cls, d: dict) -> "JointSpec":
        if "bsc" in d:
            b = d["bsc"]
            return cls.bsc(b["p"], b["q"], exact=bool(b.get("exact", False)))
        return cls.from_rows(d["sizes"], d["rows"])

    def __repr__(self):
        return f"JointSpec(shape={self.shape}, exact={self.exact})"

    # -- views -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pmf.shape

    @property
    def table(self) -> np.ndarray:
        """The pmf in its native mode (Fractions when exact)."""
        return self.frac if self.exact else self.pmf

    def marginal(self, keep: str) -> np.ndarray:
        """Marginal over the named variables, e.g. ``"xz"`` gives P_XZ."""
        axes = tuple(i for i, v in enumerate("xyz") if v not in keep)
        return self.table.sum(axis=axes)

    def x_given_y(self) -> np.ndarray:
        """P(x|y) as an |X| x |Y| float matrix; columns with P(y)=0 are 0."""
        pxy = self.pmf.sum(axis=2)
        py = pxy.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(py > 0, pxy / py, 0.0)

    def costs(self) -> np.ndarray:
        """-log2 P(x|y) per symbol pair, +inf for impossible transitions."""
        with np.errstate(divide="ignore"):
            return -np.log2(self.x_given_y())


@dataclass(frozen=True)
class SampleTriple:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if not len(self.x) == len(self.y) == len(self.z):
            raise ValueError("x, y, z must have identical length")


def vec_to_int(vec: Sequence[int], base: int = 2) -> int:
    v = 0
    for s in vec:
        v = v * base + int(s)
    return v


def int_to_vec(value: int, n: int, base: int = 2) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        value, out[i] = divmod(value, base)
    return out


def index_digits(n: int, base: int) -> np.ndarray:
    """(base^n, n) array of all vectors in index order."""
    idx = np.arange(base**n)
    powers = base ** np.arange(n - 1, -1, -1)
    return (idx[:, None] // powers) % base


def sample_iid(spec: JointSpec, n: int, rng: np.random.Generator) -> SampleTriple:
    if n < 1:
        raise ValueError("n must be >= 1")
    flat = spec.pmf.ravel()
    draws = rng.choice(flat.size, size=n, p=flat / flat.sum())
    x, y, z = np.unravel_index(draws, spec.shape)
    return SampleTriple(x.astype(np.int64), y.astype(np.int64), z.astype(np.int64))


def entropy_of_mass(mass) -> float:
    """-log2 of a guessing probability; +inf for mass 0."""
    if mass == 0:
        return math.inf
    if isinstance(mass, Fraction):
        # separate logs keep precision for tiny masses
        return math.log2(mass.denominator) - math.log2(mass.numerator) + 0.0
    if mass >= 1.0 - 1e-12:
        return 0.0
    return -math.log2(mass)


def shannon_cond_entropy(spec: JointSpec) -> float:
    """H(X|Y) in bits."""
    pxy = spec.pmf.sum(axis=2)
    cond = spec.x_given_y()
    mask = pxy > 0
    return float(-(pxy[mask] * np.log2(cond[mask])).sum()) + 0.0


def guess_mass(joint: np.ndarray):
    """sum_w max_x P(x, w) for a 2-d table indexed [x, w]."""
    return sum(joint.max(axis=0).tolist(), joint.flat[0] * 0)


def min_entropy(spec: JointSpec, var: str = "x") -> float:
    """Unconditional H_inf of one variable."""
    return entropy_of_mass(max(spec.marginal(var).tolist()))


def avg_min_entropy(spec: JointSpec, given: str = "z") -> float:
    """Average conditional min-entropy H~_inf(X | given), per symbol."""
    return entropy_of_mass(guess_mass(spec.marginal("x" + given)))


def vector_min_entropy(spec: JointSpec, n: int) -> float:
    """H~_inf of n i.i.d. symbols of X given Z; the product rule makes it additive."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * avg_min_entropy(spec)


def cond_logprob(spec: JointSpec, x: Sequence[int], y: Sequence[int]) -> float:
    """sum_i -log2 P(x_i | y_i); +inf if any transition is impossible."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if (spec.pmf.sum(axis=(0, 2))[y] == 0).any():
        raise ValueError("conditioning on a y with zero probability")
    return float(spec.costs()[x, y].sum()) + 0.0


# -- vector-level tables ----------------------------------------------------


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.multiply.outer(a, b)
    return out.transpose(0, 2, 1, 3).reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])


def product_table(mat: np.ndarray, n: int) -> np.ndarray:
    """n-fold Kronecker power of a 2-d probability table."""
    out = mat
    for _ in range(n - 1):
        out = _kron(out, mat)
    return out


def _check_budget(spec: JointSpec, n: int, budget: int) -> None:
    size = int(np.prod(spec.shape)) ** n
    if size > budget:
        raise BudgetExceeded(f"|X|^n|Y|^n|Z|^n = {size} exceeds budget {budget}")


def _nu_as_fraction(nu) -> Fraction:
    f = Fraction(nu) if not isinstance(nu, float) else Fraction(repr(nu))
    if f.denominator > 10_000:
        raise ValueError(f"exact mode needs a rational threshold with small denominator, got {nu!r}")
    return f


def qualifying_matrix(spec: JointSpec, n: int, nu) -> np.ndarray:
    """Boolean |X|^n x |Y|^n table of [ -log2 P(x|y) <= nu ]."""
    if nu < 0:
        raise ValueError("nu must be non-negative")
    if spec.exact:
        pxy = spec.marginal("xy")
        py = pxy.sum(axis=0)
        cond = np.array(
            [[pxy[a, b] / py[b] if py[b] else Fraction(0) for b in range(len(py))] for a in range(pxy.shape[0])],
            dtype=object,
        )
        cond_n = product_table(cond, n)
        f = _nu_as_fraction(nu)
        p, q = f.numerator, f.denominator
        # P >= 2^(-p/q)  <=>  P^q * 2^p >= 1
        return np.vectorize(lambda v: v != 0 and v**q * 2**p >= 1, otypes=[bool])(cond_n)
    c = spec.costs()
    cost_n = c
    for _ in range(n - 1):
        cost_n = (cost_n[:, None, :, None] + c[None, :, None, :]).reshape(
            cost_n.shape[0] * c.shape[0], cost_n.shape[1] * c.shape[1]
        )
    return cost_n <= nu + COST_TOL


def fuzzy_guess_mass(spec: JointSpec, n: int, nu, conditional: bool = True, budget: int = DEFAULT_BUDGET):
    """Best qualifying-set mass an adversary captures by naming one x vector.

    Conditional: sum_z max_x sum_{y in Q(x)} P(y, z).
    Unconditional: max_x sum_{y in Q(x)} P(y).
    Q(x) is the set of y vectors with -log2 P(x|y) <= nu.
    """
    _check_budget(spec, n, budget)
    qual = qualifying_matrix(spec, n, nu)
    pyz = product_table(spec.marginal("yz"), n)
    if not conditional:
        pyz = pyz.sum(axis=1, keepdims=True)
    return side_guess_mass(qual, pyz)


def side_guess_mass(qual: np.ndarray, pya: np.ndarray):
    """sum_a max_x sum_y qual[x, y] * P(y, a) for any side variable A.

    ``pya`` is indexed [y vector, a]; object arrays of Fractions stay exact.
    """
    if pya.dtype == object:
        captured = qual.astype(int).astype(object) @ pya
        return sum(captured.max(axis=0).tolist(), Fraction(0))
    captured = qual.astype(float) @ pya
    return float(captured.max(axis=0).sum())


def fuzzy_min_entropy_exact(
    spec: JointSpec, n: int, nu, conditional: bool = True, budget: int = DEFAULT_BUDGET
) -> float:
    """nu-fuzzy min-entropy of X^n (given Z^n when ``conditional``) by enumeration.

    Returns +inf when no (x, y) pair qualifies.
    """
    return entropy_of_mass(fuzzy_guess_mass(spec, n, nu, conditional, budget))


def fuzzy_min_entropy_lower_bound(spec: JointSpec, n: int, nu: float) -> float:
    """n * H~_inf(X|Z) - nu; may be negative and is left unclamped."""
    if nu < 0:
        raise ValueError("nu must be non-negative")
    return vector_min_entropy(spec, n) - nu


def entropy_report(spec: JointSpec, n: int | None = None, nu: float | None = None) -> dict:
    report = {
        "H(X|Y)": shannon_cond_entropy(spec),
        "H(X|Z)_avg_min": avg_min_entropy(spec),
        "H_inf(X)": min_entropy(spec, "x"),
        "H_inf(Y)": min_entropy(spec, "y"),
        "H(X|Y)_avg_min": avg_min_entropy(spec, "y"),
    }
    if n is not None:
        report["n"] = n
        report["H(X^n|Z^n)_avg_min"] = vector_min_entropy(spec, n)
        if nu is not None:
            report["nu"] = nu
            report["fuzzy_lower_bound"] = fuzzy_min_entropy_lower_bound(spec, n, nu)
            try:
                report["fuzzy_exact"] = fuzzy_min_entropy_exact(spec, n, nu)
            except BudgetExceeded:
                report["fuzzy_exact"] = None
    return report
