"""Arithmetic and Gaussian elimination over GF(2^m) for 1 <= m <= 32.

Field elements are plain ints holding polynomial coefficient bits. The
modulus is found at first use by searching for the smallest irreducible
polynomial of the right degree and verifying it with Rabin's test, so no
hardcoded constant has to be trusted.
"""

from __future__ import annotations

from functools import lru_cache

MAX_DEGREE = 32


def _poly_degree(p: int) -> int:
    return p.bit_length() - 1


def _poly_mod(a: int, m: int) -> int:
    dm = _poly_degree(m)
    while a.bit_length() - 1 >= dm and a:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def _poly_mulmod(a: int, b: int, m: int) -> int:
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a.bit_length() > _poly_degree(m):
            a = _poly_mod(a, m)
    return _poly_mod(result, m)


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def _prime_factors(n: int) -> list[int]:
    factors = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            factors.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        factors.append(n)
    return factors


def is_irreducible(poly: int, m: int) -> bool:
    """Rabin's irreducibility test for a degree-m polynomial over GF(2)."""
    if _poly_degree(poly) != m:
        return False
    if m == 1:
        return True
    if not poly & 1:  # divisible by x
        return False
    x = 2
    h = x
    for _ in range(m):
        h = _poly_mulmod(h, h, poly)
    if h != x:  # x^(2^m) must equal x mod poly
        return False
    for q in _prime_factors(m):
        g = x
        for _ in range(m // q):
            g = _poly_mulmod(g, g, poly)
        if _poly_gcd(g ^ x, poly) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def find_irreducible(m: int) -> int:
    """Smallest irreducible polynomial of degree m (constant term 1)."""
    if not 1 <= m <= MAX_DEGREE:
        raise ValueError(f"extension degree {m} outside 1..{MAX_DEGREE}")
    for low in range(1, 1 << m, 2):
        candidate = (1 << m) | low
        if is_irreducible(candidate, m):
            return candidate
    raise RuntimeError(f"no irreducible polynomial of degree {m} found")


class GF2m:
    """The field GF(2^m); elements are ints in [0, 2^m)."""

    __slots__ = ("m", "q", "modulus")

    def __init__(self, m: int, modulus: int | None = None):
        if not 1 <= m <= MAX_DEGREE:
            raise ValueError(f"extension degree {m} outside 1..{MAX_DEGREE}")
        self.m = m
        self.q = 1 << m
        self.modulus = modulus if modulus is not None else find_irreducible(m)
        if not is_irreducible(self.modulus, m):
            raise ValueError(f"modulus {self.modulus:#x} is not irreducible of degree {m}")

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        result = 0
        top = self.q
        mod = self.modulus
        while b:
            if b & 1:
                result ^= a
            b >>= 1
            a <<= 1
            if a & top:
                a ^= mod
        return result

    def pow(self, a: int, e: int) -> int:
        result = 1
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("no inverse of 0 in GF(2^m)")
        return self.pow(a, self.q - 2)

    def rank(self, rows) -> int:
        """Rank of a matrix given as an iterable of coefficient rows."""
        work = [list(row) for row in rows]
        if not work:
            return 0
        ncols = len(work[0])
        rank = 0
        for col in range(ncols):
            pivot = next((i for i in range(rank, len(work)) if work[i][col]), None)
            if pivot is None:
                continue
            work[rank], work[pivot] = work[pivot], work[rank]
            inv = self.inv(work[rank][col])
            work[rank] = [self.mul(inv, v) for v in work[rank]]
            for i in range(len(work)):
                if i != rank and work[i][col]:
                    factor = work[i][col]
                    work[i] = [
                        self.add(v, self.mul(factor, p)) for v, p in zip(work[i], work[rank])
                    ]
            rank += 1
            if rank == len(work):
                break
        return rank
