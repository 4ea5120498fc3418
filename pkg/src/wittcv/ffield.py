"""Exact arithmetic in small finite fields, dense matrices, and affine-space
enumeration.

Fields F_{p^m} are deliberately small (p prime >= 5, 1 <= m <= 3).  Every
element is an integer code in [0, q), q = p^m, and all arithmetic goes
through q x q lookup tables built once at construction.  For extension
fields the code is the base-p digit expansion of the coefficient vector,
constant term in the least significant digit, reduced modulo a fixed monic
irreducible modulus.  The modulus is the lexicographically smallest monic
irreducible polynomial of its degree (coefficients compared from the
constant term upward), so a context is fully determined by (p, m) and all
downstream results are bit-reproducible.

Matrices are immutable tuples of row tuples of element codes.  Gaussian
elimination pivots on the leftmost nonzero entry; the fields are exact so
there are no tolerances anywhere.

Coordinate vectors of length n are enumerated in odometer order: the
enumeration index written in base q, most significant digit first, so the
last coordinate ticks fastest.  The order is part of the public contract
(parallel work splits into contiguous index ranges).
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

#: Refuse exhaustive enumerations projected to exceed this many items.
ENUM_BOUND = 10**9


class NotPrimeError(ValueError):
    """Characteristic is not a prime number."""


class CharTooSmallError(ValueError):
    """Characteristic below 5 (the algebra needs p > 3)."""


class DegreeUnsupportedError(ValueError):
    """Extension degree outside the supported range 1..3."""


class DivisionByZeroError(ZeroDivisionError):
    """Multiplicative inverse of zero requested."""


class NotSquareError(ValueError):
    """Matrix power of a non-square matrix requested."""


class SizeOverflowError(OverflowError):
    """Exhaustive enumeration would exceed the configured bound."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


# ---------------------------------------------------------------------------
# polynomial helpers over F_p (coefficient tuples, constant term first)
# ---------------------------------------------------------------------------

def _poly_trim(c: list[int]) -> tuple[int, ...]:
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_mul(a: Sequence[int], b: Sequence[int], p: int) -> tuple[int, ...]:
    out = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return _poly_trim(out)


def _poly_mod(a: Sequence[int], mod: Sequence[int], p: int) -> tuple[int, ...]:
    # mod is monic
    r = list(a)
    dm = len(mod) - 1
    while len(r) - 1 >= dm and r:
        lead = r[-1]
        if lead:
            shift = len(r) - 1 - dm
            for k in range(dm + 1):
                r[shift + k] = (r[shift + k] - lead * mod[k]) % p
        r.pop()
    return _poly_trim(r)


def _poly_divisible(a: Sequence[int], d: Sequence[int], p: int) -> bool:
    return not _poly_mod(a, d, p)


def _monic_polys(degree: int, p: int) -> Iterator[tuple[int, ...]]:
    """Monic polynomials of exactly the given degree, in lexicographic order
    of the coefficient sequence read from the constant term upward."""
    for lower in itertools.product(range(p), repeat=degree):
        yield lower + (1,)


def _smallest_irreducible(degree: int, p: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible of the given degree,
    certified by trial division against every monic polynomial of degree
    <= degree // 2."""
    divisors = [
        d
        for deg in range(1, degree // 2 + 1)
        for d in _monic_polys(deg, p)
    ]
    for cand in _monic_polys(degree, p):
        if all(not _poly_divisible(cand, d, p) for d in divisors):
            return cand
    raise AssertionError("no irreducible polynomial found")  # unreachable


# ---------------------------------------------------------------------------
# field context
# ---------------------------------------------------------------------------

class FieldCtx:
    """Arithmetic context for F_{p^m}, elements as integer codes in [0, q).

    Scalar operations index plain Python lists; the same tables are exposed
    as numpy arrays (``add_np``, ``mul_np``, ...) for vectorized kernels.
    """

    __slots__ = (
        "p", "m", "q", "modulus",
        "_add", "_mul", "_neg", "_inv",
        "add_np", "mul_np", "neg_np", "inv_np",
    )

    def __init__(self, p: int, m: int = 1):
        if not isinstance(p, int) or not is_prime(p):
            raise NotPrimeError(f"p = {p} is not prime")
        if p < 5:
            raise CharTooSmallError(f"p = {p} < 5 is not supported")
        if not isinstance(m, int) or not 1 <= m <= 3:
            raise DegreeUnsupportedError(f"extension degree m = {m} not in 1..3")
        self.p = p
        self.m = m
        self.q = p**m
        self.modulus = _smallest_irreducible(m, p) if m > 1 else None
        self._build_tables()

    def _build_tables(self) -> None:
        p, m, q = self.p, self.m, self.q
        if m == 1:
            idx = np.arange(q, dtype=np.int16)
            add = (idx[:, None] + idx[None, :]) % p
            mul = (idx[:, None].astype(np.int64) * idx[None, :]) % p
            neg = (-idx) % p
        else:
            polys = [self.decode(c) for c in range(q)]
            add = np.zeros((q, q), dtype=np.int16)
            mul = np.zeros((q, q), dtype=np.int16)
            for a in range(q):
                for b in range(a, q):
                    s = tuple((x + y) % p for x, y in zip(polys[a], polys[b]))
                    add[a, b] = add[b, a] = self.encode(s)
                    prod = _poly_mod(_poly_mul(polys[a], polys[b], p), self.modulus, p)
                    mul[a, b] = mul[b, a] = self.encode(prod)
            neg = np.array([self.encode(tuple((-x) % p for x in c)) for c in polys],
                           dtype=np.int16)
        inv = np.zeros(q, dtype=np.int16)
        mul16 = mul.astype(np.int16)
        for a in range(1, q):
            inv[a] = int(np.nonzero(mul16[a] == 1)[0][0])
        self.add_np = add.astype(np.int16)
        self.mul_np = mul16
        self.neg_np = neg.astype(np.int16)
        self.inv_np = inv
        self._add = self.add_np.tolist()
        self._mul = self.mul_np.tolist()
        self._neg = self.neg_np.tolist()
        self._inv = self.inv_np.tolist()

    # -- element codecs ----------------------------------------------------

    def decode(self, code: int) -> tuple[int, ...]:
        """Coefficient tuple (constant term first, length m) of a code."""
        out = []
        for _ in range(self.m):
            out.append(code % self.p)
            code //= self.p
        return tuple(out)

    def encode(self, coeffs: Sequence[int]) -> int:
        """Code of a coefficient sequence of length <= m (reduced mod p)."""
        code = 0
        for c in reversed(list(coeffs)):
            code = code * self.p + c % self.p
        return code

    def embed(self, k: int) -> int:
        """Image of the integer k under Z -> F_p -> F_q."""
        return k % self.p

    # -- scalar arithmetic ---------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return self._add[a][b]

    def sub(self, a: int, b: int) -> int:
        return self._add[a][self._neg[b]]

    def mul(self, a: int, b: int) -> int:
        return self._mul[a][b]

    def neg(self, a: int) -> int:
        return self._neg[a]

    def inv(self, a: int) -> int:
        if a == 0:
            raise DivisionByZeroError("inverse of zero")
        return self._inv[a]

    def div(self, a: int, b: int) -> int:
        return self._mul[a][self.inv(b)]

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(a), -e)
        r = 1
        base = a
        while e:
            if e & 1:
                r = self._mul[r][base]
            base = self._mul[base][base]
            e >>= 1
        return r

    def elements(self) -> range:
        return range(self.q)

    def nonzero(self) -> range:
        return range(1, self.q)

    # -- identity ------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FieldCtx) and (self.p, self.m) == (other.p, other.m)

    def __hash__(self) -> int:
        return hash((self.p, self.m))

    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, m={self.m})"


@lru_cache(maxsize=None)
def field(p: int, m: int = 1) -> FieldCtx:
    """Shared context for (p, m); identical calls return the same object."""
    return FieldCtx(p, m)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def rref(rows: Sequence[Sequence[int]], ctx: FieldCtx) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form.  Returns (nonzero rows, pivot columns)."""
    mat = [list(r) for r in rows]
    if not mat:
        return [], []
    ncols = len(mat[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        s = ctx.inv(mat[r][c])
        if s != 1:
            mul = ctx._mul[s]
            mat[r] = [mul[x] for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = mat[i][c]
                row_r = mat[r]
                row_i = mat[i]
                mulf = ctx._mul[f]
                addt = ctx._add
                negt = ctx._neg
                for j in range(c, ncols):
                    row_i[j] = addt[row_i[j]][negt[mulf[row_r[j]]]]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    return [row for row in mat[:r]], pivots


class Matrix:
    """Immutable dense matrix over a FieldCtx (entries are element codes)."""

    __slots__ = ("ctx", "rows", "cols", "entries")

    def __init__(self, ctx: FieldCtx, entries: Sequence[Sequence[int]]):
        ent = tuple(tuple(row) for row in entries)
        if ent and any(len(r) != len(ent[0]) for r in ent):
            raise ValueError("ragged rows")
        self.ctx = ctx
        self.rows = len(ent)
        self.cols = len(ent[0]) if ent else 0
        self.entries = ent

    @classmethod
    def zeros(cls, ctx: FieldCtx, rows: int, cols: int) -> "Matrix":
        return cls(ctx, [[0] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, ctx: FieldCtx, n: int) -> "Matrix":
        return cls(ctx, [[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Matrix) and self.ctx == other.ctx
                and self.entries == other.entries)

    def __hash__(self) -> int:
        return hash((self.ctx, self.entries))

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(e) for e in row) for row in self.entries)
        return f"Matrix({self.ctx.p}^{self.ctx.m}, [{body}])"

    def is_zero(self) -> bool:
        return all(all(e == 0 for e in row) for row in self.entries)

    def add(self, other: "Matrix") -> "Matrix":
        addt = self.ctx._add
        return Matrix(self.ctx, [
            [addt[a][b] for a, b in zip(ra, rb)]
            for ra, rb in zip(self.entries, other.entries)
        ])

    def sub(self, other: "Matrix") -> "Matrix":
        addt, negt = self.ctx._add, self.ctx._neg
        return Matrix(self.ctx, [
            [addt[a][negt[b]] for a, b in zip(ra, rb)]
            for ra, rb in zip(self.entries, other.entries)
        ])

    def scale(self, c: int) -> "Matrix":
        mul = self.ctx._mul[c]
        return Matrix(self.ctx, [[mul[x] for x in row] for row in self.entries])

    def mul(self, other: "Matrix") -> "Matrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        ctx = self.ctx
        addt, mult = ctx._add, ctx._mul
        bt = list(zip(*other.entries))  # columns of other
        out = []
        for row in self.entries:
            orow = []
            for col in bt:
                acc = 0
                for a, b in zip(row, col):
                    if a and b:
                        acc = addt[acc][mult[a][b]]
                orow.append(acc)
            out.append(orow)
        return Matrix(ctx, out)

    def pow(self, e: int) -> "Matrix":
        if self.rows != self.cols:
            raise NotSquareError("matrix power needs a square matrix")
        if e < 0:
            raise ValueError("negative matrix power not supported")
        result = Matrix.identity(self.ctx, self.rows)
        base = self
        while e:
            if e & 1:
                result = result.mul(base)
            base = base.mul(base)
            e >>= 1
        return result

    def transpose(self) -> "Matrix":
        return Matrix(self.ctx, list(zip(*self.entries)))

    def rank(self) -> int:
        return len(rref(self.entries, self.ctx)[0])

    def nullspace(self) -> list[tuple[int, ...]]:
        """Basis of the right kernel, canonicalized to reduced echelon form."""
        red, pivots = rref(self.entries, self.ctx)
        ctx = self.ctx
        free = [c for c in range(self.cols) if c not in pivots]
        vecs = []
        for f in free:
            v = [0] * self.cols
            v[f] = 1
            for r, pc in enumerate(pivots):
                v[pc] = ctx._neg[red[r][f]]
            vecs.append(v)
        basis, _ = rref(vecs, ctx)
        return [tuple(row) for row in basis]

    def to_numpy(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int16)


# ---------------------------------------------------------------------------
# vector enumeration
# ---------------------------------------------------------------------------

def vector_count(ctx: FieldCtx, n: int) -> int:
    return ctx.q**n


def code_to_vector(ctx: FieldCtx, code: int, n: int) -> tuple[int, ...]:
    """Vector at an enumeration index (position 0 is the most significant
    base-q digit; the last coordinate ticks fastest)."""
    out = [0] * n
    for t in range(n - 1, -1, -1):
        out[t] = code % ctx.q
        code //= ctx.q
    return tuple(out)


def vector_to_code(ctx: FieldCtx, vec: Sequence[int]) -> int:
    code = 0
    for v in vec:
        code = code * ctx.q + v
    return code


def enum_vectors(ctx: FieldCtx, n: int, start: int = 0, stop: int | None = None,
                 bound: int = ENUM_BOUND) -> Iterator[tuple[int, ...]]:
    """Yield coordinate vectors of F_q^n in odometer order.

    ``start``/``stop`` select a contiguous index range, so disjoint ranges
    partition the stream exactly; concatenating them in order reproduces
    the unsplit stream.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    total = vector_count(ctx, n)
    if total > bound:
        raise SizeOverflowError(f"q^n = {total} exceeds bound {bound}")
    if stop is None:
        stop = total
    start = max(0, start)
    stop = min(total, stop)
    if start >= stop:
        return
    vec = list(code_to_vector(ctx, start, n))
    q = ctx.q
    for _ in range(stop - start):
        yield tuple(vec)
        for t in range(n - 1, -1, -1):
            vec[t] += 1
            if vec[t] < q:
                break
            vec[t] = 0


def split_ranges(total: int, parts: int) -> list[tuple[int, int]]:
    """Split [0, total) into at most ``parts`` contiguous nonempty ranges."""
    parts = max(1, min(parts, total)) if total else 1
    step = math.ceil(total / parts) if total else 0
    out = []
    lo = 0
    while lo < total:
        hi = min(total, lo + step)
        out.append((lo, hi))
        lo = hi
    return out or [(0, 0)]
