"""One-time MAC keyed by the correlated sample itself.

The authenticated message is a seed pair; its tag is ``hash_h(x, seeds)``.
Verification also insists that s2 has its low bit set, since the tag
function's forgery analysis needs that.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .hashes import HashParams, SeedPair, hash_h, hash_h_grid

MacMessage = SeedPair


@dataclass(frozen=True)
class MacBounds:
    delta_imp: float
    delta_sub: float
    delta_mac: float
    vacuous: bool

    def to_dict(self) -> dict:
        return asdict(self)


def mac_tag(x: int, msg: MacMessage, params: HashParams) -> int:
    return hash_h(x, msg, params)


def mac_verify(key: int, msg: MacMessage, tag: int, params: HashParams) -> bool:
    """True (accept) iff s2's low bit is 1 and the tag recomputes."""
    if not 0 <= key < 1 << params.n:
        raise ValueError(f"key is not an {params.n}-bit value")
    if not 0 <= tag < 1 << params.t:
        raise ValueError(f"tag is not a {params.t}-bit value")
    if not msg.fits(params):
        raise ValueError("message widths do not match the hash parameters")
    if not msg.valid:
        return False
    return hash_h(key, msg, params) == tag


def mac_tag_grid(params: HashParams, keys, s2pp, s1pp, s2, s1) -> np.ndarray:
    """Tags for every (message, key) pair; messages are aligned 1-d arrays."""
    if not (np.asarray(s2) & 1).all():
        raise ValueError("every s2 must have its low bit set")
    return hash_h_grid(params, keys, s2pp, s1pp, s2, s1)


def mac_verify_grid(params: HashParams, keys, s2pp, s1pp, s2, s1, tags) -> np.ndarray:
    """Boolean (M, K) acceptance table, the batch form of ``mac_verify``."""
    valid = (np.asarray(s2) & 1).astype(bool)
    return valid[:, None] & (hash_h_grid(params, keys, s2pp, s1pp, s2, s1) == tags)


def forgery_bound(n: int, t: int, r: int, h_inf_bits: float) -> float:
    """3(r+2) * 2^-(t + n*h_inf - n)."""
    return 3 * (r + 2) * math.pow(2.0, -(t + n * h_inf_bits - n))


def mac_bounds(n: int, t: int, r: int, h_inf_bits: float) -> MacBounds:
    """Impersonation/substitution bounds given per-symbol H~_inf(X|Z)."""
    if n <= 0 or t < 0 or r <= 0 or h_inf_bits < 0:
        raise ValueError("n, r must be positive; t, h_inf non-negative")
    d = forgery_bound(n, t, r, h_inf_bits)
    return MacBounds(d, d, d, d >= 1.0)
