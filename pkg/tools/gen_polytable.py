"""Generate the default table of low-weight irreducible binary polynomials.

For each degree m the first irreducible trinomial x^m + x^k + 1 (smallest k)
is chosen; if none exists, the pentanomial x^m + x^a + x^b + x^c + 1 with
lexicographically smallest (a, b, c).  Irreducibility is decided by Rabin's
test after a cheap screen against all irreducibles of degree <= 12.

Usage: python tools/gen_polytable.py MAX_M OUT_FILE
"""

import sys


def _sq(a):
    return int("0".join(format(a, "b")), 2) if a else 0


def _reduce_sparse(v, m, low):
    mask = (1 << m) - 1
    while v >> m:
        hi = v >> m
        v &= mask
        for k in low:
            v ^= hi << k
    return v


def _gcd(a, b):
    while b:
        while a and a.bit_length() >= b.bit_length():
            a ^= b << (a.bit_length() - b.bit_length())
        a, b = b, a
    return a


def _prime_factors(m):
    out, p = [], 2
    while p * p <= m:
        if m % p == 0:
            out.append(p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        out.append(m)
    return out


def _small_irreducibles(max_deg):
    found = []
    for f in range(2, 1 << (max_deg + 1)):
        d = f.bit_length() - 1
        if d < 1:
            continue
        ok = True
        for g in found:
            if 2 * (g.bit_length() - 1) > d:
                break
            r = f
            while r and r.bit_length() >= g.bit_length():
                r ^= g << (r.bit_length() - g.bit_length())
            if r == 0:
                ok = False
                break
        if ok:
            found.append(f)
    return found


def _mulmod_small(a, b, g):
    dg = g.bit_length() - 1
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> dg & 1:
            a ^= g
    return r


class Screen:
    def __init__(self, max_deg=12):
        self.polys = _small_irreducibles(max_deg)

    def powers(self, m):
        # x^j mod g for j = 0..m, per small irreducible g
        table = []
        for g in self.polys:
            dg = g.bit_length() - 1
            row = [0] * (m + 1)
            cur = 1 if dg > 0 else 0
            for j in range(m + 1):
                row[j] = cur
                cur <<= 1
                if cur >> dg & 1:
                    cur ^= g
            table.append(row)
        return table

    @staticmethod
    def passes(table, polys, m, exps):
        for g, row in zip(polys, table):
            if 2 * (g.bit_length() - 1) > m:
                break
            acc = row[m] ^ 1
            for k in exps:
                acc ^= row[k]
            if acc == 0:
                return False
        return True


def rabin(m, low):
    f = (1 << m)
    for k in low:
        f |= 1 << k
    x = 2
    cur = x
    checkpoints = {m // q: q for q in _prime_factors(m)}
    for i in range(1, m + 1):
        cur = _reduce_sparse(_sq(cur), m, low)
        if i in checkpoints and i != m:
            if _gcd(f, cur ^ x) != 1:
                return False
    return cur == x


def find(m, screen):
    if m == 1:
        return (0,)
    table = screen.powers(m)
    # Swan: every trinomial of degree m = 0 (mod 8) is reducible
    trinomial_ks = range(1, m // 2 + 1) if m % 8 else ()
    for k in trinomial_ks:
        if Screen.passes(table, screen.polys, m, (k,)) and rabin(m, (k, 0)):
            return (k, 0)
    for a in range(3, m):
        for b in range(2, a):
            for c in range(1, b):
                if Screen.passes(table, screen.polys, m, (a, b, c)) and rabin(m, (a, b, c, 0)):
                    return (a, b, c, 0)
    raise RuntimeError(f"no low-weight irreducible found for m={m}")


def main():
    max_m = int(sys.argv[1])
    out = sys.argv[2]
    screen = Screen()
    done = set()
    try:
        with open(out) as fh:
            for line in fh:
                if line.strip():
                    done.add(int(line.split(":")[0]))
    except FileNotFoundError:
        pass
    with open(out, "a") as fh:
        for m in range(1, max_m + 1):
            if m in done:
                continue
            exps = find(m, screen)
            fh.write(f"{m}:{','.join(str(e) for e in exps[:-1]) if len(exps) > 1 else ''}\n")
            fh.flush()


if __name__ == "__main__":
    main()
