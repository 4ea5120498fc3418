"""Vectorized kernels for the exhaustive scans (prime fields only).

Everything here is a numpy twin of a scalar operation defined elsewhere:
derivation matrices, batched matrix p-powers, series inversion, the
rectification check, and the certificate predicates.  The kernels exist
purely for throughput; the test suite pins each one against its scalar
counterpart (exhaustively at p = 5, sampled at larger p), and the dual
checks the verifier is built on (computed centralizer vs closed form,
enumerated counts vs closed form) never share a kernel.

Matrix products run in float64: entries are reduced mod p (< 13) before
every product, so each dot product is bounded by 13 * 12^2, far below the
2^53 integer-exactness limit of float64.

Element codes use the same odometer convention as ``ffield.enum_vectors``:
coordinate 0 is the most significant base-q digit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

from .ffield import FieldCtx, SizeOverflowError, ENUM_BOUND, split_ranges


def _require_prime_field(ctx: FieldCtx) -> int:
    if ctx.m != 1:
        raise ValueError("bulk kernels support prime fields only")
    return ctx.p


# ---------------------------------------------------------------------------
# codecs
# ---------------------------------------------------------------------------

def decode_codes(codes: np.ndarray, q: int, n: int) -> np.ndarray:
    """Element codes -> (N, n) coordinate arrays (coordinate 0 most significant)."""
    c = np.asarray(codes, dtype=np.int64).copy()
    out = np.empty((c.shape[0], n), dtype=np.int16)
    for t in range(n - 1, -1, -1):
        out[:, t] = c % q
        c //= q
    return out


def encode_vectors(arr: np.ndarray, q: int) -> np.ndarray:
    arr = np.asarray(arr)
    codes = np.zeros(arr.shape[0], dtype=np.int64)
    for t in range(arr.shape[1]):
        codes = codes * q + arr[:, t]
    return codes


@lru_cache(maxsize=32)
def _inv_table(p: int) -> np.ndarray:
    t = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        t[a] = pow(a, p - 2, p)
    return t


@lru_cache(maxsize=64)
def combo_matrix(q: int, r: int) -> np.ndarray:
    """All of F_q^r as an (q^r, r) array, odometer order."""
    return decode_codes(np.arange(q**r, dtype=np.int64), q, r)


def span_vectors(basis: np.ndarray, p: int) -> np.ndarray:
    """All F_p-combinations of the given basis rows, as (p^r, width) coords."""
    r = basis.shape[0]
    if r == 0:
        return np.zeros((1, basis.shape[1] if basis.ndim == 2 else 0), dtype=np.int16)
    combos = combo_matrix(p, r)
    return (combos.astype(np.int64) @ basis.astype(np.int64) % p).astype(np.int16)


# ---------------------------------------------------------------------------
# derivation matrices, p-powers, nilpotence
# ---------------------------------------------------------------------------

def der_matrices(coeffs: np.ndarray, p: int) -> np.ndarray:
    """Coefficient rows u -> matrices of u(X)D on the monomial basis of A."""
    n = coeffs.shape[0]
    M = np.zeros((n, p, p), dtype=np.int64)
    u = coeffs.astype(np.int64)
    for c in range(1, p):
        for r in range(p):
            k = r - c + 1
            if 0 <= k < p:
                M[:, r, c] = (c * u[:, k]) % p
    return M


def d_matrix(p: int) -> np.ndarray:
    """Matrix of the canonical derivation D (X^c -> c X^{c-1})."""
    M = np.zeros((p, p), dtype=np.int64)
    for c in range(1, p):
        M[c - 1, c] = c
    return M


def mat_pow_mod(mats: np.ndarray, e: int, p: int) -> np.ndarray:
    """Batched matrix power mod p by repeated squaring."""
    n = mats.shape[-1]
    result = np.broadcast_to(np.eye(n), mats.shape).astype(np.float64).copy()
    base = (mats % p).astype(np.float64)
    while e:
        if e & 1:
            result = np.matmul(result, base) % p
        e >>= 1
        if e:
            base = np.matmul(base, base) % p
    return result.astype(np.int64)


def nilpotent_flags(coeffs: np.ndarray, p: int, chunk: int = 1 << 15) -> np.ndarray:
    """Row-wise x^[p] == 0, chunked to bound the (N, p, p) intermediates."""
    n = coeffs.shape[0]
    out = np.empty(n, dtype=bool)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        Mp = mat_pow_mod(der_matrices(coeffs[lo:hi], p), p, p)
        out[lo:hi] = ~Mp.any(axis=(1, 2))
    return out


def nilpotent_mask_all(ctx: FieldCtx, workers: int = 1, chunk: int = 1 << 16,
                       bound: int = ENUM_BOUND) -> np.ndarray:
    """Nilpotence flag for every element code in [0, q^p)."""
    p = _require_prime_field(ctx)
    total = p**p
    if total > bound:
        raise SizeOverflowError(f"q^p = {total} exceeds bound {bound}")
    mask = np.zeros(total, dtype=bool)
    # fixed chunking (independent of worker count) keeps results identical
    ranges = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]

    def work(rg):
        lo, hi = rg
        codes = np.arange(lo, hi, dtype=np.int64)
        return lo, hi, nilpotent_flags(decode_codes(codes, p, p), p)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for lo, hi, flags in pool.map(work, ranges):
                mask[lo:hi] = flags
    else:
        for rg in ranges:
            lo, hi, flags = work(rg)
            mask[lo:hi] = flags
    return mask


def levels_of(coeffs: np.ndarray, p: int) -> np.ndarray:
    """Filtration level per row; the zero element gets sentinel level p."""
    nz = coeffs != 0
    has = nz.any(axis=1)
    first = nz.argmax(axis=1)
    return np.where(has, first - 1, p).astype(np.int16)


# ---------------------------------------------------------------------------
# series inversion and the rectification check
# ---------------------------------------------------------------------------

def series_inverse_bulk(u: np.ndarray, p: int) -> np.ndarray:
    """Row-wise inverse of u in F_p[X]/(X^p); rows must have u[:,0] != 0."""
    inv = _inv_table(p)
    n = u.shape[0]
    u = u.astype(np.int64)
    v = np.zeros((n, p), dtype=np.int64)
    v0 = inv[u[:, 0]]
    v[:, 0] = v0
    for k in range(1, p):
        acc = np.zeros(n, dtype=np.int64)
        for j in range(1, k + 1):
            acc += u[:, j] * v[:, k - j]
        v[:, k] = (-(v0 * (acc % p))) % p
    return v


def poly_mul_trunc_bulk(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """Row-wise product truncated to degree < p."""
    n, w = a.shape
    out = np.zeros((n, w), dtype=np.int64)
    for i in range(w):
        bi = b[:, i]
        if not bi.any():
            continue
        out[:, i:] += a[:, : w - i] * bi[:, None]
        out %= p
    return out % p


def rectifiability(u: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """(flags, psi): flags marks rows with u(0) != 0 whose 1/u integrates;
    psi holds the substitution polynomial coefficients (degree index) for
    flagged rows (undefined elsewhere)."""
    inv = _inv_table(p)
    nz0 = u[:, 0] != 0
    v = np.zeros((u.shape[0], p), dtype=np.int64)
    if nz0.any():
        v[nz0] = series_inverse_bulk(u[nz0].astype(np.int64), p)
    ok = nz0 & (v[:, p - 1] == 0)
    psi = np.zeros((u.shape[0], p), dtype=np.int64)
    for k in range(1, p):
        psi[:, k] = (v[:, k - 1] * inv[k % p]) % p
    return ok, psi


def rectified_to_d_flags(coeffs: np.ndarray, psi: np.ndarray, p: int) -> np.ndarray:
    """True where the substitution psi carries u(X)D onto D, checked as the
    exact matrix identity M(x) P = P M(D) (P invertible, so this is the
    conjugation postcondition without a batched inverse)."""
    n = coeffs.shape[0]
    P = np.zeros((n, p, p), dtype=np.int64)
    power = np.zeros((n, p), dtype=np.int64)
    power[:, 0] = 1
    for j in range(p):
        P[:, :, j] = power
        if j < p - 1:
            power = poly_mul_trunc_bulk(power, psi, p)
    M = der_matrices(coeffs, p)
    lhs = np.matmul(M.astype(np.float64), P.astype(np.float64)) % p
    rhs = np.matmul(P.astype(np.float64),
                    np.broadcast_to(d_matrix(p), (n, p, p)).astype(np.float64)) % p
    return (lhs == rhs).all(axis=(1, 2))


# ---------------------------------------------------------------------------
# certificate predicates
# ---------------------------------------------------------------------------

def _proportional_window(a: np.ndarray, b: np.ndarray, w: int, p: int) -> np.ndarray:
    """Row-wise: exists c in F_p with b[:, :w] == c * a[:, :w] (mod p)."""
    aw = a[:, :w].astype(np.int64)
    bw = b[:, :w].astype(np.int64)
    nz = aw != 0
    has = nz.any(axis=1)
    t0 = nz.argmax(axis=1)
    rows = np.arange(a.shape[0])
    c = (bw[rows, t0] * _inv_table(p)[aw[rows, t0]]) % p
    match = ((bw - c[:, None] * aw) % p == 0).all(axis=1)
    b_zero = (bw == 0).all(axis=1)
    return np.where(has, match, b_zero)


def cert_direct_flags(i: int, x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    """x in g_i and y - c x in g_{p-1-i} for some scalar c."""
    in_gi = (x[:, : i + 1] == 0).all(axis=1)
    return in_gi & _proportional_window(x, y, p - i, p)


def dependent_flags(x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    return _proportional_window(x, y, p, p) | _proportional_window(y, x, p, p)


def covered_flags(indices: list[int], x: np.ndarray, y: np.ndarray, p: int,
                  nil_x: np.ndarray | None = None,
                  nil_y: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the symmetrized certificates at the given indices.

    Returns (covered, first_index) where first_index is the smallest
    covering index per row (p as a sentinel where uncovered).
    """
    n = x.shape[0]
    covered = np.zeros(n, dtype=bool)
    first = np.full(n, p, dtype=np.int16)
    for i in indices:
        if i == 0:
            if nil_x is None or nil_y is None:
                raise ValueError("certificate 0 needs nilpotence flags")
            hit = nil_x & nil_y & dependent_flags(x, y, p)
        else:
            hit = cert_direct_flags(i, x, y, p) | cert_direct_flags(i, y, x, p)
        new = hit & ~covered
        first[new] = i
        covered |= hit
    return covered, first
