"""Experiment harness: reliability, key secrecy, MAC forgery oracles, tampering.

Randomness comes from a ``numpy.random.SeedSequence``.  Trial i of an
experiment draws from the child with spawn key ``parent.spawn_key + (i,)``.
Totals therefore depend only on the master seed and never on evaluation
order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hashes import HashParams, SeedPair, hash_h_array, hash_h_grid, hash_h_prime_array, sample_seed_pair
from .mac import mac_bounds
from .protocol import (
    ProtocolMessage,
    ProtocolParams,
    alice,
    bob,
    enumerate_R,
    fuzzy_term,
    miss_probability,
    robustness_bound,
)
from .source import (
    COST_TOL,
    BudgetExceeded,
    JointSpec,
    avg_min_entropy,
    index_digits,
    product_table,
    sample_iid,
    vec_to_int,
)

Z95 = 1.959963984540054
PASS, FAIL, VACUOUS, SKIPPED = "PASS", "FAIL", "VACUOUS-BOUND", "SKIPPED"
ORACLE_BUDGET = 1 << 30


@dataclass
class ExperimentReport:
    name: str
    trials: int
    successes: int
    estimate: float
    ci_low: float
    ci_high: float
    bound: float | None
    verdict: str
    instance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.successes <= max(self.trials, 0):
            raise ValueError("successes must lie in [0, trials]")
        if self.verdict != SKIPPED and not self.ci_low - 1e-12 <= self.estimate <= self.ci_high + 1e-12:
            raise ValueError("interval does not contain the estimate")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def skipped(cls, name: str, reason: str, instance: dict | None = None) -> "ExperimentReport":
        return cls(name, 0, 0, 0.0, 0.0, 0.0, None, SKIPPED, instance or {}, {"reason": reason})


CSV_FIELDS = ["name", "trials", "successes", "estimate", "ci_low", "ci_high", "bound", "verdict"]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf" if v < 0 else "nan"
    return v


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    return np.random.SeedSequence(seed)


def child_seed(parent, *path: int) -> np.random.SeedSequence:
    parent = as_seed_sequence(parent)
    return np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + tuple(path))


def trial_rng(parent, i: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(parent, i))


def _instance(spec: JointSpec, params) -> dict:
    d = {"spec_shape": list(spec.shape)}
    d.update(params.to_dict())
    return d


def _bound_verdict(estimate: float, bound: float | None) -> str:
    if bound is None or bound >= 1:
        return VACUOUS
    return PASS if estimate <= bound else FAIL


# -- reliability ------------------------------------------------------------


def reliability_experiment(spec: JointSpec, params: ProtocolParams, trials: int, seed) -> ExperimentReport:
    """Honest runs; a failure is any trial where Bob's key differs from Alice's.

    Failures are split into E1 (x outside R) and E2 (x inside R but Bob
    rejected or decoded a different candidate).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ss = as_seed_sequence(seed)
    costs = spec.costs()
    failures = e1 = e2 = 0
    for i in range(trials):
        rng = trial_rng(ss, i)
        s = sample_iid(spec, params.n, rng)
        key, msg = alice(s.x, params, rng)
        out = bob(s.y, msg, params, spec)
        if out.key == key:
            continue
        failures += 1
        if costs[s.x, s.y].sum() > params.nu + COST_TOL:
            e1 += 1
        else:
            e2 += 1
    eps, eps1, eps2 = params.eps, params.eps1, params.eps2

    def slack(e):
        return e + 3 * math.sqrt(e / trials)

    rate = failures / trials
    lo, hi = wilson_interval(failures, trials)
    checks = {
        "total": rate <= slack(eps),
        "E1": e1 / trials <= slack(eps1),
        "E2": e2 / trials <= slack(eps2),
    }
    extras = {
        "event": "key disagreement or abort",
        "E1": e1, "E2": e2,
        "E1_rate": e1 / trials, "E2_rate": e2 / trials,
        "eps1": eps1, "eps2": eps2,
        "E1_ci": list(wilson_interval(e1, trials)),
        "E2_ci": list(wilson_interval(e2, trials)),
        "threshold": slack(eps),
        "checks": checks,
    }
    try:
        extras["E1_exact"] = miss_probability(spec, params.n, params.nu)
    except BudgetExceeded:
        pass
    verdict = PASS if all(checks.values()) else FAIL
    return ExperimentReport("reliability", trials, failures, rate, lo, hi, eps, verdict,
                            _instance(spec, params), extras)


# -- secrecy ----------------------------------------------------------------


def _cond_x_given_z_vectors(spec: JointSpec, z, digits: np.ndarray) -> np.ndarray:
    """P(x | z) for every binary-indexed x vector (rows of ``digits``)."""
    pxz = spec.pmf.sum(axis=1)
    pz = pxz.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pz > 0, pxz / pz, 0.0)
    post = np.ones(len(digits))
    for i, zi in enumerate(z):
        post *= cond[digits[:, i], zi]
    return post


def key_distance(post: np.ndarray, tags: np.ndarray, keys: np.ndarray, l: int, t: int) -> float:
    """1/2 sum_{d,k} |P(d,k) - P(d) 2^-l| for one (z, seeds) draw."""
    joint = np.bincount(tags * (1 << l) + keys, weights=post, minlength=(1 << t) * (1 << l))
    joint = joint.reshape(1 << t, 1 << l)
    pd = joint.sum(axis=1, keepdims=True)
    return 0.5 * float(np.abs(joint - pd / (1 << l)).sum())


def secrecy_distance(spec: JointSpec, params: ProtocolParams, trials: int, seed,
                     budget: int = 1 << 24) -> ExperimentReport:
    """Monte Carlo over (z, seeds) of the exact distance of K from uniform given (C, z)."""
    n = params.n
    if spec.shape[0] != 2:
        raise ValueError("binary X alphabet required")
    if (1 << n) > budget or n > 31:
        raise BudgetExceeded(f"2^n = {1 << n} exceeds the enumeration budget")
    ss = as_seed_sequence(seed)
    digits = index_digits(n, 2)
    xs = np.arange(1 << n)
    hp = params.hash
    dists = np.empty(trials)
    for i in range(trials):
        rng = trial_rng(ss, i)
        z = sample_iid(spec, n, rng).z
        seeds = sample_seed_pair(hp, rng)
        post = _cond_x_given_z_vectors(spec, z, digits)
        tags = hash_h_array(hp, xs, seeds.s2pp, seeds.s1pp, seeds.s2, seeds.s1)
        keys = hash_h_prime_array(hp, xs, seeds.s2pp, seeds.s1pp)
        dists[i] = key_distance(post, tags, keys, params.l, params.t)
    mean = float(dists.mean())
    half = Z95 * float(dists.std(ddof=1)) / math.sqrt(trials) if trials > 1 else math.inf
    lo, hi = max(0.0, mean - half), mean + half
    h_min = avg_min_entropy(spec)
    extras = {
        "interval": "normal",
        "max_distance": float(dists.max()),
        "hash_lemma_bound": 0.5 * math.sqrt(2.0 ** (params.l + params.t - n * h_min)),
    }
    verdict = PASS if hi < params.sigma else FAIL
    return ExperimentReport("secrecy", trials, 0, mean, lo, hi, params.sigma, verdict,
                            _instance(spec, params), extras)


# -- MAC forgery oracles ----------------------------------------------------


def _hash_params(params) -> HashParams:
    return params.hash if isinstance(params, ProtocolParams) else params


def all_messages(hp: HashParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Every valid seed pair (s2 odd) as four aligned arrays."""
    n, t = hp.n, hp.t
    s2pp, s1pp, s2h, s1 = np.meshgrid(
        np.arange(1 << n), np.arange(1 << n), np.arange(1 << (n - t - 1)), np.arange(1 << t),
        indexing="ij",
    )
    return s2pp.ravel(), s1pp.ravel(), (s2h.ravel() << 1) | 1, s1.ravel()


def tag_table(hp: HashParams, chunk: int = 1 << 14) -> np.ndarray:
    """T[m, x] = h(x, message m) over all valid messages and all x."""
    msgs = all_messages(hp)
    count = len(msgs[0])
    xs = np.arange(1 << hp.n)
    out = np.empty((count, 1 << hp.n), dtype=np.int32)
    for a in range(0, count, chunk):
        sl = slice(a, a + chunk)
        out[sl] = hash_h_grid(hp, xs, *(m[sl] for m in msgs))
    return out


def message_at(hp: HashParams, idx: int) -> SeedPair:
    return SeedPair(*(int(m[idx]) for m in all_messages(hp)))


def message_index(hp: HashParams, seeds: SeedPair) -> int:
    n, t = hp.n, hp.t
    return ((seeds.s2pp << n | seeds.s1pp) << (n - t - 1) | seeds.s2 >> 1) << t | seeds.s1


def _oracle_budget(hp: HashParams, budget: int) -> None:
    size = (1 << (3 * hp.n - 1)) * (1 << hp.t) * (1 << hp.n)
    if size > budget:
        raise BudgetExceeded(f"adversary space x key space = 2^{size.bit_length() - 1} exceeds budget")


def _xz_table(spec: JointSpec, n: int) -> np.ndarray:
    if spec.shape[0] != 2:
        raise ValueError("binary X alphabet required")
    return product_table(spec.pmf.sum(axis=1), n)


def impersonation_oracle(spec: JointSpec, params, budget: int = ORACLE_BUDGET,
                         table: np.ndarray | None = None) -> ExperimentReport:
    """Exact best impersonation: E_z max_{msg, tag} Pr[h(X, msg) = tag | z]."""
    hp = _hash_params(params)
    _oracle_budget(hp, budget)
    pxz = _xz_table(spec, hp.n)
    T = tag_table(hp) if table is None else table
    best_z = np.zeros(pxz.shape[1])
    best_avg = 0.0
    px = pxz.sum(axis=1)
    for tag in range(1 << hp.t):
        hit = (T == tag).astype(np.float64)
        best_z = np.maximum(best_z, (hit @ pxz).max(axis=0))
        best_avg = max(best_avg, float((hit @ px).max()))
    value = float(best_z.sum())
    bounds = mac_bounds(hp.n, hp.t, hp.r, avg_min_entropy(spec))
    extras = {"max_over_messages_of_average": best_avg, "bounds": bounds.to_dict(),
              "messages": int(T.shape[0])}
    return ExperimentReport("impersonation", 1, 0, value, value, value, bounds.delta_imp,
                            _bound_verdict(value, bounds.delta_imp), _instance(spec, hp), extras)


def substitution_value(pxz: np.ndarray, T: np.ndarray, observed: int, t: int,
                       forbid_same_message: bool = True) -> float:
    """E_{z, tag} of the best forgery after seeing message ``observed`` and its tag."""
    t0 = T[observed]
    ntags = 1 << t
    # columns (tag, z): joint mass P(x, z) restricted to h(x, observed) = tag
    W = np.concatenate([pxz * (t0 == d)[:, None] for d in range(ntags)], axis=1)
    best = np.zeros(W.shape[1])
    for tag in range(ntags):
        scores = (T == tag).astype(np.float64) @ W
        if forbid_same_message:
            scores[observed] = 0.0
        best = np.maximum(best, scores.max(axis=0))
    return float(best.sum())


def substitution_oracle(spec: JointSpec, params, observed: int | None = 16, seed=0,
                        budget: int = ORACLE_BUDGET, table: np.ndarray | None = None) -> ExperimentReport:
    """Exact best substitution, averaged over observed messages.

    ``observed=None`` averages over every message; an int samples that many
    uniformly.  The forger's pair must differ from the observed one.  With
    the observed message kept, only a different tag can be tried, and that
    tag never verifies.
    """
    hp = _hash_params(params)
    _oracle_budget(hp, budget)
    pxz = _xz_table(spec, hp.n)
    T = tag_table(hp) if table is None else table
    count = T.shape[0]
    if observed is None or observed >= count:
        picks = np.arange(count)
    else:
        picks = np.random.default_rng(as_seed_sequence(seed)).choice(count, size=observed, replace=False)
        picks.sort()
    values = np.array([substitution_value(pxz, T, int(m), hp.t) for m in picks])
    mean = float(values.mean())
    if len(picks) == count or len(values) < 2:
        lo = hi = mean
    else:
        half = Z95 * float(values.std(ddof=1)) / math.sqrt(len(values))
        lo, hi = max(0.0, mean - half), mean + half
    bounds = mac_bounds(hp.n, hp.t, hp.r, avg_min_entropy(spec))
    extras = {"observed_messages": [int(m) for m in picks], "per_message": values.tolist(),
              "max_per_message": float(values.max()), "bounds": bounds.to_dict(),
              "exhaustive": bool(len(picks) == count)}
    return ExperimentReport("substitution", len(picks), 0, mean, lo, hi, bounds.delta_sub,
                            _bound_verdict(mean, bounds.delta_sub), _instance(spec, hp), extras)


# -- tampering strategies ---------------------------------------------------


class AttackStrategy:
    """Maps (z, observed message) to a forged message that differs from it."""

    name = "abstract"

    def forge(self, z, msg: ProtocolMessage, rng: np.random.Generator) -> ProtocolMessage:
        raise NotImplementedError


class RandomTagFlip(AttackStrategy):
    name = "random-tag-flip"

    def forge(self, z, msg, rng):
        if msg.t == 0:
            raise ValueError("no tag bits to flip")
        return msg.flip_bit("d", int(rng.integers(msg.t)))


class RandomSeedFlip(AttackStrategy):
    """Flip one seed bit.  The low bit of s2 is left alone, since clearing it
    is always rejected."""

    name = "random-seed-flip"

    def forge(self, z, msg, rng):
        n, t = msg.n, msg.t
        slots = [("s2pp", i) for i in range(n)] + [("s1pp", i) for i in range(n)]
        slots += [("s2", i) for i in range(1, n - t)] + [("s1", i) for i in range(t)]
        part, bit = slots[int(rng.integers(len(slots)))]
        return msg.flip_bit(part, bit)


class ReplayWithNewSeeds(AttackStrategy):
    """Keep the tag, draw fresh valid seeds."""

    name = "replay-with-new-seeds"

    def __init__(self, params: ProtocolParams):
        self.hp = params.hash

    def forge(self, z, msg, rng):
        while True:
            seeds = sample_seed_pair(self.hp, rng)
            if seeds != msg.seeds:
                return replace(msg, seeds=seeds)


class BestExhaustive(AttackStrategy):
    """Exact best single forgery for tiny instances.

    Precomputes, for every y, which (message, tag) pairs Bob would accept.
    Then it picks the forgery with the largest acceptance probability under
    the posterior on y given (z, c).
    """

    name = "best-exhaustive"

    def __init__(self, spec: JointSpec, params: ProtocolParams, budget: int = 1 << 28):
        hp = params.hash
        n, t = hp.n, hp.t
        ny = spec.shape[1]
        self.spec, self.params, self.hp = spec, params, hp
        messages = 1 << (3 * n - 1)
        if messages * (1 << t) * ny**n > budget:
            raise BudgetExceeded("best-exhaustive forgery table exceeds budget")
        self.T = tag_table(hp)
        self.ny = ny
        rows = np.arange(messages)
        accept = np.empty((ny**n, messages * (1 << t)), dtype=np.uint8)
        for yi, y in enumerate(index_digits(n, ny)):
            counts = np.zeros((messages, 1 << t), dtype=np.uint8)
            for cand in enumerate_R(y, params.nu, spec):
                xc = vec_to_int(cand)
                counts[rows, self.T[:, xc]] = np.minimum(counts[rows, self.T[:, xc]] + 1, 2)
            accept[yi] = (counts == 1).ravel()
        self.accept = accept
        self.digits_x = index_digits(n, 2)
        self.digits_y = index_digits(n, ny)
        self.last_value = None

    def posterior_y(self, z, msg: ProtocolMessage) -> np.ndarray:
        pmf = self.spec.pmf
        w = np.ones((len(self.digits_x), len(self.digits_y)))
        for i, zi in enumerate(z):
            w *= pmf[self.digits_x[:, i][:, None], self.digits_y[:, i][None, :], zi]
        tags = self.T[message_index(self.hp, msg.seeds)]
        w = (w * (tags == msg.d)[:, None]).sum(axis=0)
        return w / w.sum()

    def forge(self, z, msg, rng):
        w = self.posterior_y(z, msg).astype(np.float32)
        width = self.accept.shape[1]
        scores = np.empty(width, dtype=np.float32)
        step = 1 << 17
        for a in range(0, width, step):
            scores[a:a + step] = w @ self.accept[:, a:a + step].astype(np.float32)
        own = message_index(self.hp, msg.seeds) * (1 << self.hp.t) + msg.d
        scores[own] = -1.0
        best = int(np.argmax(scores))
        self.last_value = float(scores[best])
        m, d = divmod(best, 1 << self.hp.t)
        return ProtocolMessage(msg.n, msg.t, d, message_at(self.hp, m))


STRATEGY_NAMES = ("random-tag-flip", "random-seed-flip", "replay-with-new-seeds", "best-exhaustive")


def make_strategy(name: str, spec: JointSpec, params: ProtocolParams) -> AttackStrategy:
    if name == "random-tag-flip":
        return RandomTagFlip()
    if name == "random-seed-flip":
        return RandomSeedFlip()
    if name == "replay-with-new-seeds":
        return ReplayWithNewSeeds(params)
    if name == "best-exhaustive":
        return BestExhaustive(spec, params)
    if name in ("null", "identity", "none"):
        raise ValueError("a tampering strategy must change the message")
    raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGY_NAMES}")


# -- robustness -------------------------------------------------------------


def theorem_robustness_bound(spec: JointSpec, params: ProtocolParams, budget: int = 1 << 24) -> float:
    if params.robustness_bound is not None:
        return params.robustness_bound
    h_fuzz, _ = fuzzy_term(spec, params.n, params.nu, budget)
    return robustness_bound(params.n, params.t, params.r, avg_min_entropy(spec), h_fuzz)


def robustness_experiment(spec: JointSpec, params: ProtocolParams, strategy: AttackStrategy,
                          trials: int, seed) -> ExperimentReport:
    """Adversary success rate: the forged message differs and Bob accepts it."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ss = as_seed_sequence(seed)
    successes = same_key = honest_rejects = 0
    predicted = []
    for i in range(trials):
        rng = trial_rng(ss, i)
        s = sample_iid(spec, params.n, rng)
        key, msg = alice(s.x, params, rng)
        forged = strategy.forge(s.z, msg, np.random.default_rng(child_seed(ss, i, 1)))
        if forged == msg:
            raise ValueError(f"strategy {strategy.name!r} returned the unmodified message")
        if getattr(strategy, "last_value", None) is not None:
            predicted.append(strategy.last_value)
        out = bob(s.y, forged, params, spec)
        if out.key is not None:
            successes += 1
            same_key += out.key == key
        else:
            honest_rejects += 1
    bound = theorem_robustness_bound(spec, params)
    rate = successes / trials
    lo, hi = wilson_interval(successes, trials)
    extras = {
        "strategy": strategy.name,
        "accepted_with_alice_key": same_key,
        "bob_rejected": honest_rejects,
        "reject_or_agree_rate": (honest_rejects + same_key) / trials,
    }
    if predicted:
        extras["predicted_success_mean"] = float(np.mean(predicted))
    return ExperimentReport(f"robustness/{strategy.name}", trials, successes, rate, lo, hi, bound,
                            _bound_verdict(rate, bound), _instance(spec, params), extras)
