"""One-way key agreement: parameter solver, Alice, Bob and the candidate set R.

Alice holds x, Bob holds y.  Alice sends c = (h(x, seeds), seeds) and keeps
k = h'(x, s').  Bob searches R = {x' : -log2 P(x'|y) <= nu} for the unique
candidate whose tag matches, and derives the same key from it.

x must be a binary vector (it is read as an n-bit field element).  Y and Z
may use any finite alphabet.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .gf2 import FieldSpec
from .hashes import HashParams, Hasher, SeedPair, hex_field, min_odd_r, sample_seed_pair
from .source import (
    COST_TOL,
    BudgetExceeded,
    JointSpec,
    avg_min_entropy,
    fuzzy_min_entropy_exact,
    fuzzy_min_entropy_lower_bound,
    sample_iid,
    shannon_cond_entropy,
    vec_to_int,
)

WIRE_VERSION = "owska/1"
MODES = ("theorem", "calibrated", "overridden")


class InfeasibleParams(ValueError):
    """No parameter set satisfies every constraint; ``violations`` lists them."""

    def __init__(self, violations: list[str], partial: dict):
        super().__init__("; ".join(violations))
        self.violations = violations
        self.partial = partial


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    t: int
    l: int
    nu: float
    r: int
    eps: float
    sigma: float
    delta: float | None
    nu_source: str = "theorem"
    t_source: str = "theorem1"
    robustness_bound: float | None = None
    fuzzy_term: str | None = None
    notes: tuple[str, ...] = ()
    field_overrides: tuple[tuple[int, int], ...] = ()
    hash: HashParams = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        for name in ("eps", "sigma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        polys = dict(self.field_overrides)

        def pick(m):
            return FieldSpec(m, polys[m]) if m in polys else None

        hp = HashParams(self.n, self.t, self.l, self.r, field_nt=pick(self.n - self.t),
                        field_t=pick(self.t) if self.t else None, field_n=pick(self.n))
        object.__setattr__(self, "hash", hp)

    @classmethod
    def manual(cls, n: int, t: int, l: int, nu: float, eps: float = 0.5, sigma: float = 0.5,
               delta: float | None = None, **kw) -> "ProtocolParams":
        """Hand-picked parameters; r defaults to the smallest odd value."""
        kw.setdefault("nu_source", "overridden")
        kw.setdefault("t_source", "override")
        return cls(n, t, l, nu, kw.pop("r", min_odd_r(n, t)), eps, sigma, delta, **kw)

    @property
    def eps1(self) -> float:
        return (math.sqrt(self.n) - 1) * self.eps / math.sqrt(self.n)

    @property
    def eps2(self) -> float:
        return self.eps / math.sqrt(self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("hash")
        d["notes"] = list(self.notes)
        d["field_overrides"] = {str(m): format(f, "#x") for m, f in self.field_overrides}
        return d


@dataclass(frozen=True)
class ProtocolMessage:
    """c = (d, s', s) with the sizes it was produced for."""

    n: int
    t: int
    d: int
    seeds: SeedPair

    def to_dict(self) -> dict:
        n, t, s = self.n, self.t, self.seeds
        return {
            "version": WIRE_VERSION,
            "n": n,
            "t": t,
            "d": hex_field(self.d, t),
            "s_prime": hex_field(s.s_prime(n), 2 * n),
            "s": hex_field((s.s2 << t) | s.s1, n),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolMessage":
        if d.get("version") != WIRE_VERSION:
            raise ValueError(f"unsupported message version {d.get('version')!r}")
        n, t = int(d["n"]), int(d["t"])
        widths = {"d": t, "s_prime": 2 * n, "s": n}
        vals = {}
        for k, w in widths.items():
            text = d[k]
            if len(text) != (w + 3) // 4:
                raise ValueError(f"field {k} has {len(text)} hex digits, expected {(w + 3) // 4}")
            vals[k] = int(text, 16) if text else 0
            if vals[k] >> w:
                raise ValueError(f"field {k} exceeds {w} bits")
        sp, s = vals["s_prime"], vals["s"]
        seeds = SeedPair(sp >> n, sp & ((1 << n) - 1), s >> t, s & ((1 << t) - 1))
        return cls(n, t, vals["d"], seeds)

    @classmethod
    def from_json(cls, text: str) -> "ProtocolMessage":
        return cls.from_dict(json.loads(text))

    def flip_bit(self, part: str, bit: int) -> "ProtocolMessage":
        if part == "d":
            return replace(self, d=self.d ^ (1 << bit))
        return replace(self, seeds=replace(self.seeds, **{part: getattr(self.seeds, part) ^ (1 << bit)}))


@dataclass(frozen=True)
class BobOutcome:
    key: int | None
    candidates_tested: int
    matches_found: int
    diagnostic: str = "ok"
    x_hat: int | None = None

    @property
    def rejected(self) -> bool:
        return self.key is None


# -- parameter solver -------------------------------------------------------


def theorem_nu(spec: JointSpec, n: int, eps: float) -> float:
    """Reconciliation threshold from the reliability theorem."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rn = math.sqrt(n)
    spread = rn * math.log2(spec.shape[0] + 3) * math.sqrt(math.log2(rn / ((rn - 1) * eps)))
    return n * shannon_cond_entropy(spec) + spread


def key_length(spec: JointSpec, n: int, sigma: float, t: int) -> int:
    return math.floor(n * avg_min_entropy(spec) + 2 * math.log2(sigma) + 2 - t)


def cost_distribution(spec: JointSpec, n: int, max_support: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of -log2 P(X^n|Y^n) as (sorted costs, probabilities).

    The law is tracked over how many coordinates take each distinct
    single-letter cost, so every total is one sum rather than a chain of
    rounded partial sums.  Totals within ``COST_TOL`` are then merged.
    """
    pxy = spec.pmf.sum(axis=2)
    costs = spec.costs()
    single: dict[float, float] = {}
    for (a, b), p in np.ndenumerate(pxy):
        if p > 0:
            key = round(float(costs[a, b]), 12)
            single[key] = single.get(key, 0.0) + float(p)
    values = sorted(single)
    dist = {(0,) * len(values): 1.0}
    for _ in range(n):
        nxt: dict[tuple, float] = {}
        for counts, p0 in dist.items():
            for j, c in enumerate(values):
                key = counts[:j] + (counts[j] + 1,) + counts[j + 1:]
                nxt[key] = nxt.get(key, 0.0) + p0 * single[c]
        if len(nxt) > max_support:
            raise BudgetExceeded(f"cost support exceeds {max_support}")
        dist = nxt
    totals = sorted((sum(k * c for k, c in zip(counts, values)), p) for counts, p in dist.items())
    keys, probs = [], []
    for c, p in totals:
        if keys and c - keys[-1] <= COST_TOL:
            probs[-1] += p
        else:
            keys.append(c)
            probs.append(p)
    return np.array(keys), np.array(probs)


def miss_probability(spec: JointSpec, n: int, nu: float) -> float:
    """Pr[-log2 P(X^n|Y^n) > nu], the chance x falls outside R."""
    costs, probs = cost_distribution(spec, n)
    return float(probs[costs > nu + COST_TOL].sum())


def calibrate_nu(spec: JointSpec, n: int, target: float, rng: np.random.Generator | None = None,
                 pilot_trials: int = 20_000) -> tuple[float, float, str]:
    """Smallest nu with Pr[x outside R] <= target.

    Returns (nu, achieved miss probability, method).  Uses the exact cost law
    when its support is small enough, else pilot samples.
    """
    try:
        costs, probs = cost_distribution(spec, n)
        tail = np.concatenate([np.cumsum(probs[::-1])[::-1][1:], [0.0]])
        i = int(np.argmax(tail <= target + 1e-15))
        return float(costs[i]), float(tail[i]), "exact"
    except BudgetExceeded:
        pass
    rng = rng or np.random.default_rng(0)
    table = spec.costs()
    samples = np.empty(pilot_trials)
    for k in range(pilot_trials):
        s = sample_iid(spec, n, rng)
        samples[k] = table[s.x, s.y].sum()
    samples.sort()
    idx = min(pilot_trials - 1, math.ceil((1 - target) * pilot_trials) - 1)
    nu = float(samples[max(idx, 0)])
    return nu, float((samples > nu + COST_TOL).mean()), "pilot"


def fuzzy_term(spec: JointSpec, n: int, nu: float, budget: int) -> tuple[float, str]:
    try:
        return fuzzy_min_entropy_exact(spec, n, nu, budget=budget), "exact"
    except BudgetExceeded:
        return fuzzy_min_entropy_lower_bound(spec, n, nu), "lower-bound"


def robustness_bound(n: int, t: int, r: int, h_min: float, h_fuzz: float) -> float:
    """3(r+2) * 2^-(t - n + min(n*H~inf(X|Z), H~fuzz(X^n|Z^n)))."""
    return 3 * (r + 2) * math.pow(2.0, -(t - n + min(n * h_min, h_fuzz)))


def derive_params(
    spec: JointSpec,
    n: int,
    eps: float,
    sigma: float,
    delta: float | None,
    mode: str = "theorem",
    nu: float | None = None,
    t: int | None = None,
    budget: int = 1 << 24,
    rng: np.random.Generator | None = None,
    field_overrides: dict[int, int] | None = None,
) -> ProtocolParams:
    """Solve for (nu, t, r, l).

    ``mode`` picks nu: the reliability theorem's formula, exact/pilot
    calibration against eps1, or the caller's ``nu``.  ``t`` overrides the
    tag length.  With ``delta=None`` only the passive-security constraints
    are imposed and the robustness bound is reported for information.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if spec.shape[0] != 2:
        raise ValueError("the protocol needs a binary X alphabet")
    if n < 4:
        raise ValueError("n must be >= 4")
    notes = []
    eps1 = (math.sqrt(n) - 1) * eps / math.sqrt(n)
    if mode == "theorem":
        nu_val = theorem_nu(spec, n, eps)
    elif mode == "calibrated":
        nu_val, miss, method = calibrate_nu(spec, n, eps1, rng)
        notes.append(f"nu calibrated ({method}): Pr[x not in R] = {miss:.6g} <= eps1 = {eps1:.6g}")
    else:
        if nu is None:
            raise ValueError("overridden mode needs nu")
        nu_val = float(nu)
    if nu_val >= n:
        notes.append(f"nu = {nu_val:.4g} >= n: the 2^nu bound on |R| exceeds the whole space")

    h_min = avg_min_entropy(spec)
    h_fuzz, fuzz_kind = fuzzy_term(spec, n, nu_val, budget)
    t1 = nu_val + math.log2(math.sqrt(n) / eps)

    def t2(r):
        return n + math.log2(3 * (r + 2) / delta) - min(n * h_min, h_fuzz)

    violations = []
    if t is not None:
        t_val, t_source = int(t), "override"
    else:
        t_val = max(1, math.ceil(t1 - 1e-12))
        t_source = "theorem1"
        if delta is not None:
            # r grows with t and the robustness constraint grows with r
            while True:
                r = min_odd_r(n, min(t_val, n // 2))
                need = max(math.ceil(t1 - 1e-12), math.ceil(t2(r) - 1e-12), 1)
                if need <= t_val or t_val > n // 2:
                    break
                t_val = need
                t_source = "theorem2"
    r = min_odd_r(n, min(max(t_val, 0), n // 2))
    l_val = key_length(spec, n, sigma, t_val)
    if l_val > n:
        notes.append(f"key length formula gives {l_val} > n; capped at n")
        l_val = n
    rb = robustness_bound(n, t_val, r, h_min, h_fuzz)
    if t_val > n // 2:
        violations.append(f"t = {t_val} > n/2 = {n // 2}")
    if l_val < 1:
        violations.append(f"l = {l_val} < 1")
    if t_source == "override":
        if t_val < t1 - 1e-9:
            notes.append(f"t override {t_val} below the reliability requirement {t1:.4g}")
        if delta is not None and t_val < t2(r) - 1e-9:
            notes.append(f"t override {t_val} below the robustness requirement {t2(r):.4g}")
    if delta is None:
        notes.append("robustness not imposed; bound reported for information")
    elif rb >= 1:
        notes.append(f"robustness bound {rb:.4g} is vacuous")
    partial = {
        "n": n, "t": t_val, "l": l_val, "nu": nu_val, "r": r, "eps": eps, "sigma": sigma,
        "delta": delta, "nu_source": mode, "t_source": t_source, "t_reliability": t1,
        "t_robustness": t2(r) if delta is not None else None, "robustness_bound": rb,
        "fuzzy_term": fuzz_kind, "h_fuzz": h_fuzz, "h_min_per_symbol": h_min, "notes": notes,
    }
    if violations:
        raise InfeasibleParams(violations, partial)
    return ProtocolParams(n, t_val, l_val, nu_val, r, eps, sigma, delta, nu_source=mode,
                          t_source=t_source, robustness_bound=rb, fuzzy_term=fuzz_kind,
                          notes=tuple(notes),
                          field_overrides=tuple(sorted((field_overrides or {}).items())))


# -- the protocol -----------------------------------------------------------


def as_bits_int(x, n: int) -> int:
    if isinstance(x, (int, np.integer)):
        x = int(x)
        if not 0 <= x < 1 << n:
            raise ValueError(f"x is not an {n}-bit value")
        return x
    x = list(x)
    if len(x) != n or any(b not in (0, 1) for b in x):
        raise ValueError(f"x must be {n} binary symbols")
    return vec_to_int(x)


def alice(x, params: ProtocolParams, rng: np.random.Generator) -> tuple[int, ProtocolMessage]:
    x = as_bits_int(x, params.n)
    seeds = sample_seed_pair(params.hash, rng)
    hasher = Hasher(seeds, params.hash)
    return hasher.h_prime(x), ProtocolMessage(params.n, params.t, hasher.h(x), seeds)


def enumerate_R(y: Sequence[int], nu: float, spec: JointSpec) -> Iterator[tuple[int, ...]]:
    """Yield every x with -log2 P(x|y) <= nu, cheapest first.

    Best-first search over per-coordinate rank vectors.  Each vector's
    parent decrements its first nonzero rank, so every vector is reached
    once and children never cost less than their parent.  Runs of equal
    cost (within ``COST_TOL``) are emitted in lexicographic order.
    """
    costs = spec.costs()
    orders, steps = [], []
    for yi in y:
        col = costs[:, yi]
        order = [a for a in sorted(range(len(col)), key=lambda a: (col[a], a)) if np.isfinite(col[a])]
        if not order:
            return
        orders.append(order)
        steps.append([float(col[a]) for a in order])
    n = len(orders)
    if n == 0:
        return
    limit = nu + COST_TOL
    start = sum(s[0] for s in steps)
    if start > limit:
        return
    heap = [(start, (0,) * n, n - 1)]
    batch: list[tuple[int, ...]] = []
    batch_cost = start
    while heap:
        cost, ranks, first = heapq.heappop(heap)
        if cost > batch_cost + COST_TOL:
            yield from sorted(batch)
            batch = []
            batch_cost = cost
        batch.append(tuple(orders[i][k] for i, k in enumerate(ranks)))
        for i in range(first + 1):
            k = ranks[i] + 1
            if k < len(orders[i]):
                c = cost + steps[i][k] - steps[i][k - 1]
                if c <= limit:
                    child = ranks[:i] + (k,) + ranks[i + 1:]
                    heapq.heappush(heap, (c, child, i))
    yield from sorted(batch)


def bob(y: Sequence[int], msg: ProtocolMessage, params: ProtocolParams, spec: JointSpec) -> BobOutcome:
    n, t = params.n, params.t
    if len(y) != n or msg.n != n or msg.t != t:
        return BobOutcome(None, 0, 0, "malformed")
    if not (msg.seeds.fits(params.hash) and 0 <= msg.d < 1 << t):
        return BobOutcome(None, 0, 0, "malformed")
    if not msg.seeds.valid:
        return BobOutcome(None, 0, 0, "invalid-s2")
    hasher = Hasher(msg.seeds, params.hash)
    tested = matches = 0
    found = None
    for cand in enumerate_R(y, params.nu, spec):
        tested += 1
        xc = vec_to_int(cand)
        if hasher.h(xc) == msg.d:
            matches += 1
            if matches == 2:
                return BobOutcome(None, tested, 2, "ambiguous")
            found = xc
    if matches == 0:
        return BobOutcome(None, tested, 0, "no-match")
    return BobOutcome(hasher.h_prime(found), tested, 1, "ok", found)
