"""The p-dimensional Witt algebra over a small finite field.

The algebra is the derivation algebra of the truncated polynomial ring
A = k[X]/(X^p).  Elements are written u(X)D with D the canonical
derivation DX^i = i X^{i-1}; the graded basis is e_i = X^{i+1} D for
i = -1, ..., p-2, so an element is held as its coefficient vector
(a_{-1}, ..., a_{p-2}).  Structure constants: [e_i, e_j] = (j - i) e_{i+j},
with e_k = 0 outside the index range.

The descending filtration g_i = span{e_i, ..., e_{p-2}} orders everything
here: the filtration level of x is the least i with a_i != 0 (+inf for 0).
The restricted p-power is computed through the matrix representation on A
(p-th matrix power of the derivation matrix), and nilpotence means that
power vanishes.

``centralizer`` computes ker(ad x) by exact Gaussian elimination;
``centralizer_prediction`` returns the closed-form answer it is expected to
match (k x for nilpotents with nonzero D-component, k x + g_{p-1-i} or
g_{p-1-i} by filtration level otherwise).  Keeping the two routes separate
is the point: the verification harness compares them element by element.

Structure constants live in a table on the algebra object so the self-test
harness can deliberately corrupt a single entry (``with_bracket_fault``)
and confirm the verifiers catch it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .ffield import FieldCtx, Matrix, field, rref, vector_to_code, code_to_vector


class ContextMismatchError(ValueError):
    """Operands belong to different algebras/contexts."""


class NotADerivationError(ValueError):
    """Matrix does not satisfy the derivation law on A."""


class OutOfLemmaScopeError(ValueError):
    """Element outside the scope of the closed-form centralizer law."""


class WittAlgebra:
    """W_1 over a FieldCtx, with cached structure constants."""

    def __init__(self, ctx: FieldCtx | int, m: int = 1, *,
                 _table: tuple[tuple[int, ...], ...] | None = None,
                 _fault: tuple[int, int, int] | None = None):
        self.ctx = ctx if isinstance(ctx, FieldCtx) else field(ctx, m)
        p = self.ctx.p
        self.p = p
        self.dim = p
        if _table is None:
            # ct[pi][pj]: coefficient of e_{i+j} in [e_i, e_j], positions pi = i+1.
            tab = [[0] * p for _ in range(p)]
            for pi in range(p):
                for pj in range(p):
                    if 0 <= pi + pj - 1 <= p - 1:
                        tab[pi][pj] = (pj - pi) % p
            _table = tuple(tuple(r) for r in tab)
        self._ct = _table
        self._fault = _fault
        self._mask = None  # lazy nilpotent-code mask (prime fields only)

    # -- identity ------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, WittAlgebra) and self.ctx == other.ctx
                and self._fault == other._fault)

    def __hash__(self) -> int:
        return hash((self.ctx, self._fault))

    def __repr__(self) -> str:
        tag = f", fault={self._fault}" if self._fault else ""
        return f"WittAlgebra(p={self.p}, m={self.ctx.m}{tag})"

    @property
    def fault(self) -> tuple[int, int, int] | None:
        return self._fault

    def with_bracket_fault(self, i: int, j: int, code: int) -> "WittAlgebra":
        """Copy of the algebra with the structure constant of [e_i, e_j]
        replaced by ``code``.  Self-test affordance; see the harness."""
        if not (-1 <= i <= self.p - 2 and -1 <= j <= self.p - 2):
            raise ValueError("basis levels out of range")
        tab = [list(r) for r in self._ct]
        tab[i + 1][j + 1] = code % self.ctx.q
        return WittAlgebra(self.ctx, _table=tuple(tuple(r) for r in tab),
                           _fault=(i, j, code % self.ctx.q))

    # -- element constructors --------------------------------------------------

    def element(self, coeffs: Sequence[int]) -> "WittElement":
        cs = tuple(int(c) for c in coeffs)
        if len(cs) != self.p:
            raise ValueError(f"need {self.p} coefficients, got {len(cs)}")
        if any(not 0 <= c < self.ctx.q for c in cs):
            raise ValueError("coefficient code out of range")
        return WittElement(self, cs)

    def zero(self) -> "WittElement":
        return WittElement(self, (0,) * self.p)

    def e(self, i: int) -> "WittElement":
        """Basis element of graded degree i (e_i = X^{i+1} D)."""
        if not -1 <= i <= self.p - 2:
            raise ValueError(f"basis degree {i} out of range")
        cs = [0] * self.p
        cs[i + 1] = 1
        return WittElement(self, tuple(cs))

    @property
    def D(self) -> "WittElement":
        return self.e(-1)

    @property
    def XD(self) -> "WittElement":
        return self.e(0)

    @property
    def basis(self) -> list["WittElement"]:
        return [self.e(i) for i in range(-1, self.p - 1)]

    def from_code(self, code: int) -> "WittElement":
        return WittElement(self, code_to_vector(self.ctx, code, self.p))

    def _check(self, *xs: "WittElement") -> None:
        for x in xs:
            if x.alg != self:
                raise ContextMismatchError("element from a different algebra")

    # -- core operations ---------------------------------------------------------

    def bracket(self, x: "WittElement", y: "WittElement") -> "WittElement":
        self._check(x, y)
        ctx = self.ctx
        addt, mult = ctx._add, ctx._mul
        ct = self._ct
        p = self.p
        out = [0] * p
        xc, yc = x.coeffs, y.coeffs
        for pi in range(p):
            a = xc[pi]
            if not a:
                continue
            row = ct[pi]
            for pj in range(p):
                b = yc[pj]
                if not b:
                    continue
                c = row[pj]
                if not c:
                    continue
                k = pi + pj - 1
                out[k] = addt[out[k]][mult[mult[c][a]][b]]
        return WittElement(self, tuple(out))

    def to_matrix(self, x: "WittElement") -> Matrix:
        """Matrix of x = u(X)D on A in the basis {1, X, ..., X^{p-1}}."""
        self._check(x)
        ctx, p = self.ctx, self.p
        u = x.coeffs  # u_k = a_{k-1} is exactly the stored coefficient vector
        rows = [[0] * p for _ in range(p)]
        for c in range(1, p):
            f = ctx.embed(c)
            if not f:
                continue
            mul = ctx._mul[f]
            for r in range(p):
                k = r - c + 1
                if 0 <= k < p and u[k]:
                    rows[r][c] = mul[u[k]]
        return Matrix(ctx, rows)

    def from_matrix(self, M: Matrix) -> "WittElement":
        """Inverse of ``to_matrix``; raises NotADerivationError when M does
        not act as u(X)D for any u."""
        ctx, p = self.ctx, self.p
        if M.rows != p or M.cols != p:
            raise NotADerivationError("wrong shape")
        u = [M.entries[r][1] for r in range(p)]
        for c in range(p):
            f = ctx.embed(c)
            mul = ctx._mul[f]
            for r in range(p):
                k = r - c + 1
                expect = mul[u[k]] if 0 <= k < p else 0
                if M.entries[r][c] != expect:
                    raise NotADerivationError(f"derivation law fails at column {c}")
        return WittElement(self, tuple(u))

    def p_power(self, x: "WittElement") -> "WittElement":
        self._check(x)
        Mp = self.to_matrix(x).pow(self.p)
        try:
            return self.from_matrix(Mp)
        except NotADerivationError as exc:  # pragma: no cover - internal bug guard
            raise AssertionError(f"p-th power is not a derivation: {exc}") from exc

    def is_nilpotent(self, x: "WittElement") -> bool:
        self._check(x)
        return self.to_matrix(x).pow(self.p).is_zero()

    def level(self, x: "WittElement") -> int | float:
        """Filtration level: least i with a_i != 0; +inf for the zero element."""
        self._check(x)
        for t, c in enumerate(x.coeffs):
            if c:
                return t - 1
        return math.inf

    def ad_matrix(self, x: "WittElement") -> Matrix:
        """Adjoint action in the e-basis; column j is [x, e_j]."""
        self._check(x)
        ctx, p = self.ctx, self.p
        mult = ctx._mul
        ct = self._ct
        xc = x.coeffs
        rows = [[0] * p for _ in range(p)]
        for pj in range(p):
            for k in range(p):
                pi = k - pj + 1
                if 0 <= pi < p and xc[pi]:
                    c = ct[pi][pj]
                    if c:
                        rows[k][pj] = mult[c][xc[pi]]
        return Matrix(ctx, rows)

    def centralizer(self, x: "WittElement") -> "Subspace":
        return Subspace.from_echelon(self, self.ad_matrix(x).nullspace())

    def centralizer_prediction(self, x: "WittElement") -> "Subspace":
        """Closed-form centralizer the computed one must match.

        Scope: nilpotent x with nonzero D-component, or filtration level >= 1
        (zero excluded).  Everything else raises OutOfLemmaScopeError.
        """
        self._check(x)
        lvl = self.level(x)
        if lvl is math.inf:
            raise OutOfLemmaScopeError("zero element")
        if lvl >= 1:
            half = (self.p - 1) / 2
            tail = [self.e(j).coeffs for j in range(self.p - 1 - lvl, self.p - 1)]
            if lvl < half:
                return Subspace.from_spanning(self, [x.coeffs, *tail])
            return Subspace.from_spanning(self, tail)
        if x.coeffs[0] != 0 and self.is_nilpotent(x):
            return Subspace.from_spanning(self, [x.coeffs])
        raise OutOfLemmaScopeError(f"level {lvl} element not covered by the law")

    def filtration_subspace(self, i: int) -> "Subspace":
        """g_i = span{e_i, ..., e_{p-2}} (g_{-1} is the whole algebra)."""
        if not -1 <= i <= self.p - 1:
            raise ValueError("filtration index out of range")
        return Subspace.from_echelon(
            self, [self.e(j).coeffs for j in range(i, self.p - 1)])

    # -- bulk support ----------------------------------------------------------

    def nilpotent_mask(self, workers: int = 1):
        """Boolean numpy array over all q^p element codes marking x^[p] = 0.

        Prime fields only; the array is cached on the algebra.  The matrix
        p-power is the same algorithm as ``is_nilpotent``, vectorized.
        """
        if self._mask is None:
            from . import bulk
            self._mask = bulk.nilpotent_mask_all(self.ctx, workers=workers)
        return self._mask


@lru_cache(maxsize=None)
def algebra(p: int, m: int = 1) -> WittAlgebra:
    """Shared uncorrupted algebra for (p, m)."""
    return WittAlgebra(field(p, m))


@dataclass(frozen=True)
class WittElement:
    """A vector field u(X)D, stored as coefficients in the e-basis."""

    alg: WittAlgebra
    coeffs: tuple[int, ...]

    def __add__(self, other: "WittElement") -> "WittElement":
        self.alg._check(other)
        add = self.alg.ctx._add
        return WittElement(self.alg, tuple(add[a][b] for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "WittElement") -> "WittElement":
        self.alg._check(other)
        ctx = self.alg.ctx
        add, neg = ctx._add, ctx._neg
        return WittElement(self.alg, tuple(add[a][neg[b]] for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "WittElement":
        neg = self.alg.ctx._neg
        return WittElement(self.alg, tuple(neg[a] for a in self.coeffs))

    def __rmul__(self, c: int) -> "WittElement":
        mul = self.alg.ctx._mul[c % self.alg.ctx.q]
        return WittElement(self.alg, tuple(mul[a] for a in self.coeffs))

    def scale(self, c: int) -> "WittElement":
        return c * self

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def level(self) -> int | float:
        return self.alg.level(self)

    def code(self) -> int:
        return vector_to_code(self.alg.ctx, self.coeffs)

    def __str__(self) -> str:
        return format_element(self)


class Subspace:
    """Subspace of the algebra held as a reduced-echelon basis (rows are
    coefficient vectors); equality of subspaces is equality of those rows."""

    __slots__ = ("alg", "basis", "_pivots")

    def __init__(self, alg: WittAlgebra, basis: tuple[tuple[int, ...], ...],
                 pivots: tuple[int, ...]):
        self.alg = alg
        self.basis = basis
        self._pivots = pivots

    @classmethod
    def from_spanning(cls, alg: WittAlgebra, rows: Sequence[Sequence[int]]) -> "Subspace":
        red, piv = rref(rows, alg.ctx)
        return cls(alg, tuple(tuple(r) for r in red), tuple(piv))

    @classmethod
    def from_echelon(cls, alg: WittAlgebra, rows: Sequence[Sequence[int]]) -> "Subspace":
        # rows are trusted to already be reduced echelon (e.g. nullspace output)
        piv = tuple(next(j for j, v in enumerate(r) if v) for r in rows)
        return cls(alg, tuple(tuple(r) for r in rows), piv)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Subspace) and self.alg == other.alg
                and self.basis == other.basis)

    def __hash__(self) -> int:
        return hash((self.alg, self.basis))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, basis={self.basis})"

    def contains(self, x: WittElement) -> bool:
        ctx = self.alg.ctx
        add, neg, mul = ctx._add, ctx._neg, ctx._mul
        v = list(x.coeffs)
        for row, pc in zip(self.basis, self._pivots):
            c = v[pc]
            if c:
                mc = mul[c]
                for j in range(pc, len(v)):
                    v[j] = add[v[j]][neg[mc[row[j]]]]
        return not any(v)

    def vectors(self) -> Iterator[WittElement]:
        """All q^dim elements of the span (odometer order of coefficients)."""
        ctx = self.alg.ctx
        add, mul = ctx._add, ctx._mul
        n = self.dim
        for code in range(ctx.q**n):
            cs = code_to_vector(ctx, code, n)
            acc = [0] * self.alg.p
            for c, row in zip(cs, self.basis):
                if c:
                    mc = mul[c]
                    for j, rj in enumerate(row):
                        if rj:
                            acc[j] = add[acc[j]][mc[rj]]
            yield WittElement(self.alg, tuple(acc))


# ---------------------------------------------------------------------------
# textual element format: p;m;[a_-1,...,a_{p-2}]
# ---------------------------------------------------------------------------

def _format_code(ctx: FieldCtx, code: int) -> str:
    if ctx.m == 1:
        return str(code)
    return "(" + ",".join(str(c) for c in ctx.decode(code)) + ")"


def _parse_codes(ctx: FieldCtx, body: str) -> list[int]:
    body = body.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"malformed coefficient list: {body!r}")
    inner = body[1:-1].strip()
    if not inner:
        return []
    if ctx.m == 1:
        return [_check_residue(ctx, int(tok)) for tok in inner.split(",")]
    toks, depth, cur = [], 0, ""
    for ch in inner:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            toks.append(cur)
            cur = ""
        else:
            cur += ch
    toks.append(cur)
    out = []
    for tok in toks:
        tok = tok.strip()
        if not (tok.startswith("(") and tok.endswith(")")):
            raise ValueError(f"malformed extension coefficient: {tok!r}")
        digits = [int(t) for t in tok[1:-1].split(",")]
        if len(digits) != ctx.m or any(not 0 <= d < ctx.p for d in digits):
            raise ValueError(f"bad coefficient tuple: {tok!r}")
        out.append(ctx.encode(digits))
    return out


def _check_residue(ctx: FieldCtx, v: int) -> int:
    if not 0 <= v < ctx.q:
        raise ValueError(f"coefficient {v} out of range for q={ctx.q}")
    return v


def format_element(x: WittElement) -> str:
    ctx = x.alg.ctx
    body = ",".join(_format_code(ctx, c) for c in x.coeffs)
    return f"{ctx.p};{ctx.m};[{body}]"


def parse_element(s: str, alg: WittAlgebra | None = None) -> WittElement:
    parts = s.strip().split(";")
    if len(parts) != 3:
        raise ValueError(f"malformed element string: {s!r}")
    p, m = int(parts[0]), int(parts[1])
    if alg is None:
        alg = algebra(p, m)
    elif (alg.ctx.p, alg.ctx.m) != (p, m):
        raise ContextMismatchError(f"element is over ({p},{m}), algebra over "
                                   f"({alg.ctx.p},{alg.ctx.m})")
    codes = _parse_codes(alg.ctx, parts[2])
    return alg.element(codes)
