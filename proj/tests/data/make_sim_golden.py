"""Independent reference for the simulation p-value stream.

Implements std::seed_seq and std::mt19937_64 from their published
definitions, then applies the batch-Gaussian construction with scipy's
normal quantile and survival function. Output feeds tests/test_sim.cpp.
"""
import math
import sys

from scipy.stats import norm

M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF


def seed_seq_generate(v, n):
    s = len(v)
    out = [0x8B8B8B8B] * n
    t = 11 if n >= 623 else 7 if n >= 68 else 5 if n >= 39 else 3 if n >= 7 else (n - 1) // 2
    p = (n - t) // 2
    q = p + t
    m = max(s + 1, n)
    T = lambda x: (x ^ (x >> 27)) & M32
    for k in range(m):
        r1 = (1664525 * T(out[k % n] ^ out[(k + p) % n] ^ out[(k - 1) % n])) & M32
        if k == 0:
            r2 = (r1 + s) & M32
        elif k <= s:
            r2 = (r1 + k % n + v[k - 1]) & M32
        else:
            r2 = (r1 + k % n) & M32
        out[(k + p) % n] = (out[(k + p) % n] + r1) & M32
        out[(k + q) % n] = (out[(k + q) % n] + r2) & M32
        out[k % n] = r2
    for k in range(m, m + n):
        r3 = (1566083941 * T((out[k % n] + out[(k + p) % n] + out[(k - 1) % n]) & M32)) & M32
        r4 = (r3 - k % n) & M32
        out[(k + p) % n] ^= r3
        out[(k + q) % n] ^= r4
        out[k % n] = r4
    return out


class MT64:
    n, m = 312, 156
    a = 0xB5026F5AA96619E9
    upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF

    def __init__(self, words):
        self.x = [(words[2 * i] | (words[2 * i + 1] << 32)) & M64 for i in range(self.n)]
        if (self.x[0] & self.upper) == 0 and all(v == 0 for v in self.x[1:]):
            self.x[0] = 1 << 63
        self.i = self.n

    def twist(self):
        for k in range(self.n):
            y = (self.x[k] & self.upper) | (self.x[(k + 1) % self.n] & self.lower)
            self.x[k] = self.x[(k + self.m) % self.n] ^ (y >> 1) ^ (self.a if y & 1 else 0)
        self.i = 0

    def __call__(self):
        if self.i >= self.n:
            self.twist()
        z = self.x[self.i]
        self.i += 1
        z ^= (z >> 29) & 0x5555555555555555
        z ^= (z << 17) & 0x71D67FFFEDA60000
        z ^= (z << 37) & 0xFFF7EEE000000000
        z ^= z >> 43
        return z & M64


def trial(seed, t, n, b, rho, pi_a, mu_n, shift=3.0):
    words = seed_seq_generate([seed & M32, seed >> 32, t & M32, t >> 32, 0x5EED], 624)
    eng = MT64(words)
    unif = lambda: ((eng() >> 11) + 0.5) * 2.0**-53
    rows = []
    for _ in range(n // b):
        z0 = norm.ppf(unif())
        for _ in range(b):
            x = math.sqrt(rho) * z0 + math.sqrt(1 - rho) * norm.ppf(unif())
            alt = unif() < pi_a
            rows.append((int(alt), float(norm.sf(x + (shift if alt else mu_n)))))
    return rows


if __name__ == "__main__":
    cfg = dict(n=20, b=5, rho=0.5, pi_a=0.3, mu_n=-0.5)
    seed = 7
    out = sys.stdout
    out.write("# seed=7 n=20 b=5 rho=0.5 pi_A=0.3 mu_N=-0.5\n")
    for t in (0, 1, 2, 1000):
        for i, (alt, p) in enumerate(trial(seed, t, **cfg), start=1):
            out.write(f"{t} {i} {alt} {p:.17g}\n")
