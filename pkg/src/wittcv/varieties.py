"""Verification tasks for the nilpotent commuting varieties.

The commuting nilpotent pairs of the algebra are covered by certified
subsets, one per component index i:

  * i = 0:  both members nilpotent and linearly dependent;
  * i >= 1: one member x lies in g_i and the other lies in k x + g_{p-1-i}
            (the condition is applied symmetrically in x and y).

For i >= 1 a certified pair commutes automatically ([g_i, g_{p-1-i}] = 0)
and both members lie in g_1, so the predicate is sound by construction;
soundness is nevertheless re-checked by enumeration in the test suite.
Valid indices are 0..(p-3)/2 for the full variety and 1..(p-3)/2 for the
standard Borel subalgebra (pairs from g_1 x g_1).

Tasks produce a ``VerificationReport``: named counts, an exhaustive or
seeded-sampled mode tag, counterexamples (never truncated silently:
``failures_total`` keeps the full count when the stored list is capped),
and distinguished witnesses.  Reports serialize to JSON with sorted keys;
two runs with the same configuration produce identical reports except for
the duration field.

Pair enumeration never walks N x N: the outer loop runs over first
coordinates and the inner loop over the centralizer of each, which is what
makes p = 7 exhaustively checkable.  The middle-square redundancy check
switches to an exact per-first-coordinate accounting when the raw pair
count is out of reach (p >= 11); see ``verify_middle_redundancy``.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__, bulk
from .autgrp import Automorphism
from .ffield import SizeOverflowError, ENUM_BOUND, rref, split_ranges
from .witt import WittAlgebra, WittElement, format_element

#: Most failures kept verbatim in a report; the rest are only counted.
FAILURE_CAP = 50

#: Refuse exhaustive tasks projected to exceed this many elementary steps.
EVAL_BOUND = ENUM_BOUND

SPACES = ("full", "borel", "borel-minus")


class BadIndexError(ValueError):
    """Certificate index outside the valid range."""


class SingularError(ValueError):
    """Non-invertible 2x2 matrix where an invertible one is required."""


def valid_indices(p: int, space: str) -> list[int]:
    if space == "full":
        return list(range(0, (p - 3) // 2 + 1))
    if space == "borel":
        return list(range(1, (p - 3) // 2 + 1))
    raise ValueError(f"no certificate indices for space {space!r}")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    task: str
    p: int
    m: int
    q: int
    mode: dict
    counts: dict[str, int]
    failures: list[dict]
    witnesses: list[dict] = dc_field(default_factory=list)
    failures_total: int = 0
    duration_ms: int = 0
    tool_version: str = __version__

    def __post_init__(self):
        self.failures_total = max(self.failures_total, len(self.failures))
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("negative count in report")

    @property
    def verified(self) -> bool:
        return self.failures_total == 0

    def to_dict(self, omit_duration: bool = False) -> dict:
        d = {
            "task": self.task,
            "p": self.p,
            "m": self.m,
            "q": self.q,
            "mode": self.mode,
            "counts": dict(sorted(self.counts.items())),
            "failures": self.failures,
            "failures_total": self.failures_total,
            "witnesses": self.witnesses,
            "verified": self.verified,
            "tool_version": self.tool_version,
        }
        if not omit_duration:
            d["duration_ms"] = self.duration_ms
        return d

    def to_json(self, omit_duration: bool = False) -> str:
        return json.dumps(self.to_dict(omit_duration), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        r = cls(
            task=d["task"], p=d["p"], m=d["m"], q=d["q"], mode=d["mode"],
            counts=dict(d["counts"]), failures=list(d["failures"]),
            witnesses=list(d["witnesses"]), failures_total=d["failures_total"],
            duration_ms=d.get("duration_ms", 0), tool_version=d["tool_version"],
        )
        if r.verified != d["verified"]:
            raise ValueError("inconsistent verified flag in serialized report")
        return r

    @classmethod
    def from_json(cls, s: str) -> "VerificationReport":
        return cls.from_dict(json.loads(s))


def _mode_exhaustive() -> dict:
    return {"kind": "exhaustive"}


def _mode_sampled(seed: int, samples: int) -> dict:
    return {"kind": "sampled", "seed": seed, "samples": samples}


class _Tally:
    """Mergeable partial result of a partitioned scan."""

    __slots__ = ("counts", "failures", "failures_total")

    def __init__(self):
        self.counts = Counter()
        self.failures: list[dict] = []
        self.failures_total = 0

    def fail(self, entry: dict) -> None:
        self.failures_total += 1
        if len(self.failures) < FAILURE_CAP:
            self.failures.append(entry)

    def merge(self, other: "_Tally") -> "_Tally":
        self.counts.update(other.counts)
        self.failures_total += other.failures_total
        for f in other.failures:
            if len(self.failures) < FAILURE_CAP:
                self.failures.append(f)
        return self


def _run_partitioned(total: int, workers: int, fn: Callable[[int, int], _Tally],
                     chunk: int = 1 << 16) -> _Tally:
    """Run fn over fixed-size contiguous index ranges and merge in range
    order.  The chunking is independent of the worker count, so the merged
    result is identical for any number of workers (and memory stays bounded)."""
    ranges = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)] or [(0, 0)]
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda rg: fn(rg[0], rg[1]), ranges))
    else:
        parts = [fn(lo, hi) for lo, hi in ranges]
    out = _Tally()
    for part in parts:
        out.merge(part)
    return out


def _guard(projected: int, force: bool, what: str) -> None:
    if projected > EVAL_BOUND and not force:
        raise SizeOverflowError(
            f"{what}: projected {projected} evaluations exceed {EVAL_BOUND} "
            f"(pass force to override)")


def _finish(report: VerificationReport, t0: float) -> VerificationReport:
    report.duration_ms = int((time.perf_counter() - t0) * 1000)
    return report


def _render_pair(alg: WittAlgebra, xc: Sequence[int], yc: Sequence[int],
                 detail: str) -> dict:
    return {
        "x": format_element(alg.element(list(xc))),
        "y": format_element(alg.element(list(yc))),
        "detail": detail,
    }


# ---------------------------------------------------------------------------
# scalar certificate predicate
# ---------------------------------------------------------------------------

def _proportional_window(ctx, a: Sequence[int], b: Sequence[int], w: int) -> bool:
    """Exists c with b[t] == c*a[t] for all t < w."""
    t0 = next((t for t in range(w) if a[t]), None)
    if t0 is None:
        return all(b[t] == 0 for t in range(w))
    c = ctx.mul(b[t0], ctx.inv(a[t0]))
    mul = ctx._mul[c]
    return all(b[t] == mul[a[t]] for t in range(w))


def _half_cert(alg: WittAlgebra, i: int, x: WittElement, y: WittElement) -> bool:
    if any(x.coeffs[t] for t in range(i + 1)):  # x must lie in g_i
        return False
    return _proportional_window(alg.ctx, x.coeffs, y.coeffs, alg.p - i)


def cert_membership(alg: WittAlgebra, i: int, x: WittElement, y: WittElement) -> bool:
    """Does (x, y) belong to the certified subset of component i?"""
    p = alg.p
    if not 0 <= i <= (p - 3) // 2:
        raise BadIndexError(f"certificate index {i} not in 0..{(p - 3) // 2}")
    alg._check(x, y)
    if i == 0:
        return (alg.is_nilpotent(x) and alg.is_nilpotent(y)
                and (_proportional_window(alg.ctx, x.coeffs, y.coeffs, p)
                     or _proportional_window(alg.ctx, y.coeffs, x.coeffs, p)))
    return _half_cert(alg, i, x, y) or _half_cert(alg, i, y, x)


def gl2_transform(A: Sequence[Sequence[int]],
                  pair: tuple[WittElement, WittElement]) -> tuple[WittElement, WittElement]:
    """Row action (x, y) -> (a x + b y, c x + d y) of an invertible 2x2 matrix."""
    x, y = pair
    alg = x.alg
    alg._check(y)
    ctx = alg.ctx
    (a, b), (c, d) = A
    det = ctx.sub(ctx.mul(a, d), ctx.mul(b, c))
    if det == 0:
        raise SingularError("2x2 matrix is singular")
    return (a * x + b * y, c * x + d * y)


# ---------------------------------------------------------------------------
# shared scan helpers (prime fields)
# ---------------------------------------------------------------------------

def _centralizer_rows(alg: WittAlgebra, x: WittElement) -> list[tuple[int, ...]]:
    return alg.ad_matrix(x).nullspace()


def _predicted_rows(alg: WittAlgebra, x: WittElement) -> list[tuple[int, ...]]:
    return list(alg.centralizer_prediction(x).basis)


def _scope_codes(alg: WittAlgebra, workers: int):
    """(orbit_codes, g1_codes): nilpotents with a_{-1} != 0, and g_1 \\ 0."""
    p, q = alg.p, alg.ctx.q
    mask = alg.nilpotent_mask(workers)
    codes = np.arange(q**p, dtype=np.int64)
    orbit = codes[mask & (codes >= q ** (p - 1))]
    g1 = codes[1:q ** (p - 2)]
    return orbit, g1, mask


def _projected_evals(alg: WittAlgebra) -> int:
    q, p = alg.ctx.q, alg.p
    base = q**p
    return base if alg.ctx.m == 1 else base * p**3


# ---------------------------------------------------------------------------
# task: centralizer law
# ---------------------------------------------------------------------------

def verify_centralizer_law(alg: WittAlgebra, mode: str = "exhaustive",
                           samples: int = 10**5, seed: int = 0,
                           workers: int = 1, force: bool = False) -> VerificationReport:
    """Computed centralizer == closed-form centralizer for every element in
    the law's scope (nilpotent with nonzero D-part, or inside g_1)."""
    t0 = time.perf_counter()
    p, q = alg.p, alg.ctx.q
    if mode == "exhaustive":
        _guard(_projected_evals(alg), force, "centralizer law")
        if alg.ctx.m != 1:
            return _finish(_centralizer_law_scalar(alg), t0)
        orbit, g1, _ = _scope_codes(alg, workers)
        scope = np.concatenate([g1, orbit])

        def work(lo: int, hi: int) -> _Tally:
            tl = _Tally()
            for code in scope[lo:hi]:
                x = alg.from_code(int(code))
                got = _centralizer_rows(alg, x)
                want = _predicted_rows(alg, x)
                tl.counts["in_scope"] += 1
                if got != want:
                    tl.fail({"x": format_element(x),
                             "detail": f"centralizer dim {len(got)} != predicted {len(want)}"})
            return tl

        tally = _run_partitioned(len(scope), workers, work)
        tally.counts["scope_g1"] = len(g1)
        tally.counts["scope_orbit"] = len(orbit)
        rep = VerificationReport("centralizers", p, alg.ctx.m, q,
                                 _mode_exhaustive(), dict(tally.counts),
                                 tally.failures, failures_total=tally.failures_total)
        return _finish(rep, t0)
    rng = np.random.Generator(np.random.PCG64(seed))
    import random as _random
    prng = _random.Random(seed)
    tl = _Tally()
    half = samples // 2
    xs: list[WittElement] = []
    g1_coords = rng.integers(0, q, size=(half, p - 2))
    for row in g1_coords:
        xs.append(alg.element([0, 0, *map(int, row)]))
    D = alg.D
    for _ in range(samples - half):
        xs.append(Automorphism.random(alg, prng).apply(D))
    for x in xs:
        if x.is_zero():
            continue
        tl.counts["in_scope"] += 1
        if _centralizer_rows(alg, x) != _predicted_rows(alg, x):
            tl.fail({"x": format_element(x), "detail": "centralizer mismatch"})
    rep = VerificationReport("centralizers", p, alg.ctx.m, q,
                             _mode_sampled(seed, samples), dict(tl.counts),
                             tl.failures, failures_total=tl.failures_total)
    return _finish(rep, t0)


def _centralizer_law_scalar(alg: WittAlgebra) -> VerificationReport:
    # extension-field fallback: plain loop over every element
    from .ffield import enum_vectors
    tl = _Tally()
    for vec in enum_vectors(alg.ctx, alg.p):
        x = alg.element(vec)
        lvl = alg.level(x)
        if lvl is math.inf or lvl == 0 or (lvl == -1 and not alg.is_nilpotent(x)):
            continue
        tl.counts["in_scope"] += 1
        if _centralizer_rows(alg, x) != _predicted_rows(alg, x):
            tl.fail({"x": format_element(x), "detail": "centralizer mismatch"})
    return VerificationReport("centralizers", alg.p, alg.ctx.m, alg.ctx.q,
                              _mode_exhaustive(), dict(tl.counts),
                              tl.failures, failures_total=tl.failures_total)


# ---------------------------------------------------------------------------
# task: nilpotent cone census
# ---------------------------------------------------------------------------

def cone_census(alg: WittAlgebra, mode: str = "exhaustive", samples: int = 10**6,
                seed: int = 0, workers: int = 1, force: bool = False) -> VerificationReport:
    """Census of the nilpotent cone: N splits into the rectifiable part
    (a_{-1} != 0, carried onto D) and g_1, disjointly; no nilpotent element
    sits at filtration level 0."""
    t0 = time.perf_counter()
    p, q = alg.p, alg.ctx.q
    if alg.ctx.m != 1:
        raise SizeOverflowError("cone census runs over the prime field")
    if mode == "exhaustive":
        _guard(_projected_evals(alg), force, "cone census")
        mask = alg.nilpotent_mask(workers)
        tl = _Tally()
        n_g1 = q ** (p - 2)
        tl.counts["nilpotent"] = int(mask.sum())
        tl.counts["g1"] = n_g1
        tl.counts["g1_expected"] = n_g1
        # g_1 is entirely nilpotent
        bad_g1 = np.nonzero(~mask[:n_g1])[0]
        for code in bad_g1[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(code))),
                     "detail": "element of g_1 not nilpotent"})
        tl.failures_total += max(0, len(bad_g1) - FAILURE_CAP)
        # no nilpotent element of level 0 (a_{-1} = 0, a_0 != 0)
        lvl0 = mask[n_g1:q ** (p - 1)]
        bad_lvl0 = np.nonzero(lvl0)[0] + n_g1
        tl.counts["level0_nilpotent"] = len(bad_lvl0)
        for code in bad_lvl0[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(code))),
                     "detail": "nilpotent element of filtration level 0"})
        tl.failures_total += max(0, len(bad_lvl0) - FAILURE_CAP)
        # rectifiable part: nilpotent with a_{-1} != 0, all carried onto D,
        # and rectifiability must agree with nilpotence there (iff check)
        codes = np.arange(q ** (p - 1), q**p, dtype=np.int64)
        nil_here = mask[q ** (p - 1):]
        coeffs = bulk.decode_codes(codes, q, p)
        ok, psi = bulk.rectifiability(coeffs, p)
        iff_bad = np.nonzero(ok != nil_here)[0]
        tl.counts["rectify_iff_violations"] = len(iff_bad)
        for k in iff_bad[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(codes[k]))),
                     "detail": "rectifiability disagrees with nilpotence"})
        tl.failures_total += max(0, len(iff_bad) - FAILURE_CAP)
        sel = np.nonzero(ok)[0]
        to_d = bulk.rectified_to_d_flags(coeffs[sel], psi[sel], p)
        bad_rect = sel[~to_d]
        tl.counts["rectifiable"] = int(ok.sum())
        tl.counts["rectified_to_D"] = int(to_d.sum())
        for k in bad_rect[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(codes[k]))),
                     "detail": "rectification does not reach D"})
        tl.failures_total += max(0, len(bad_rect) - FAILURE_CAP)
        if tl.counts["nilpotent"] != tl.counts["g1"] + tl.counts["rectifiable"]:
            tl.fail({"detail": "cone size != g_1 part + rectifiable part"})
        rep = VerificationReport("cone", p, alg.ctx.m, q, _mode_exhaustive(),
                                 dict(tl.counts), tl.failures,
                                 failures_total=tl.failures_total)
        return _finish(rep, t0)
    # sampled implication chain
    rng = np.random.Generator(np.random.PCG64(seed))
    tl = _Tally()
    done = 0
    while done < samples:
        n = min(1 << 16, samples - done)
        coeffs = rng.integers(0, q, size=(n, p)).astype(np.int16)
        nil = bulk.nilpotent_flags(coeffs, p)
        a0 = coeffs[:, 0] != 0
        ok, psi = bulk.rectifiability(coeffs, p)
        tl.counts["samples"] += n
        tl.counts["nilpotent_seen"] += int(nil.sum())
        iff_bad = np.nonzero((ok != (nil & a0)) & a0)[0]
        for k in iff_bad[:2]:
            tl.fail({"x": format_element(alg.element(map(int, coeffs[k]))),
                     "detail": "rectifiability disagrees with nilpotence"})
        tl.failures_total += max(0, len(iff_bad) - 2)
        sel = np.nonzero(ok)[0]
        if len(sel):
            to_d = bulk.rectified_to_d_flags(coeffs[sel], psi[sel], p)
            tl.counts["rectifiable_seen"] += len(sel)
            for k in sel[~to_d][:2]:
                tl.fail({"x": format_element(alg.element(map(int, coeffs[k]))),
                         "detail": "rectification does not reach D"})
            tl.failures_total += max(0, int((~to_d).sum()) - 2)
        # nilpotent with a_{-1} = 0 must lie in g_1
        stray = np.nonzero(nil & ~a0 & (coeffs[:, 1] != 0))[0]
        for k in stray[:2]:
            tl.fail({"x": format_element(alg.element(map(int, coeffs[k]))),
                     "detail": "nilpotent level-0 element"})
        tl.failures_total += max(0, len(stray) - 2)
        done += n
    rep = VerificationReport("cone", p, alg.ctx.m, q, _mode_sampled(seed, samples),
                             dict(tl.counts), tl.failures,
                             failures_total=tl.failures_total)
    return _finish(rep, t0)


# ---------------------------------------------------------------------------
# task: covering
# ---------------------------------------------------------------------------

def _span_rows(alg: WittAlgebra, basis: list[tuple[int, ...]]) -> np.ndarray:
    return bulk.span_vectors(np.array(basis, dtype=np.int64).reshape(len(basis), alg.p),
                             alg.ctx.q)


def verify_covering(alg: WittAlgebra, space: str = "full", mode: str = "exhaustive",
                    samples: int = 10**6, seed: int = 0, workers: int = 1,
                    force: bool = False) -> VerificationReport:
    """Every commuting nilpotent pair of the chosen space satisfies some
    certificate with a valid index."""
    t0 = time.perf_counter()
    if space not in SPACES:
        raise ValueError(f"unknown space {space!r}")
    if space == "borel-minus":
        return _finish(_borel_minus_scan(alg, task="covering"), t0)
    if alg.ctx.m != 1:
        raise SizeOverflowError("covering scans run over the prime field")
    p, q = alg.p, alg.ctx.q
    indices = valid_indices(p, space)
    if mode == "exhaustive":
        _guard(_projected_evals(alg), force, "covering")
        mask = alg.nilpotent_mask(workers)
        if space == "full":
            x_codes = np.nonzero(mask)[0]
        else:
            x_codes = np.arange(q ** (p - 2), dtype=np.int64)

        def work(lo: int, hi: int) -> _Tally:
            return _covering_block(alg, x_codes[lo:hi], space, indices, mask)

        tally = _run_partitioned(len(x_codes), workers, work)
        tally.counts["first_coordinates"] = len(x_codes)
        rep = VerificationReport(f"covering[{space}]", p, alg.ctx.m, q,
                                 _mode_exhaustive(), dict(tally.counts),
                                 tally.failures, failures_total=tally.failures_total)
        return _finish(rep, t0)
    return _finish(_covering_sampled(alg, space, indices, samples, seed), t0)


def _covering_block(alg: WittAlgebra, x_codes: np.ndarray, space: str,
                    indices: list[int], mask: np.ndarray) -> _Tally:
    p, q = alg.p, alg.ctx.q
    tl = _Tally()
    for code in x_codes:
        x = alg.from_code(int(code))
        rows = _centralizer_rows(alg, x)
        ys = _span_rows(alg, rows)
        y_codes = bulk.encode_vectors(ys, q)
        if space == "full":
            keep = mask[y_codes]
        else:
            keep = (ys[:, :2] == 0).all(axis=1)
        ys = ys[keep]
        xs = np.broadcast_to(np.array(x.coeffs, dtype=np.int16), ys.shape)
        nil = np.ones(len(ys), dtype=bool)  # both sides filtered into the cone
        covered, first = bulk.covered_flags(indices, xs, ys, p, nil, nil)
        tl.counts["pairs"] += len(ys)
        for i in indices:
            tl.counts[f"hits_i{i}"] += int((first == i).sum())
        bad = np.nonzero(~covered)[0]
        for k in bad[:FAILURE_CAP]:
            tl.fail(_render_pair(alg, x.coeffs, [int(v) for v in ys[k]],
                                 "pair not covered by any certificate"))
        tl.failures_total += max(0, len(bad) - FAILURE_CAP)
    return tl


def _covering_sampled(alg: WittAlgebra, space: str, indices: list[int],
                      samples: int, seed: int) -> VerificationReport:
    import random as _random
    p, q = alg.p, alg.ctx.q
    rng = np.random.Generator(np.random.PCG64(seed))
    prng = _random.Random(seed)
    tl = _Tally()
    per_x = 512
    n_x = (samples + per_x - 1) // per_x
    D = alg.D
    pair_x: list[np.ndarray] = []
    pair_y: list[np.ndarray] = []
    for j in range(n_x):
        if space == "full" and j % 2 == 0:
            x = Automorphism.random(alg, prng).apply(D)
            tl.counts["x_orbit"] += 1
        else:
            row = rng.integers(0, q, size=p - 2)
            x = alg.element([0, 0, *map(int, row)])
            tl.counts["x_g1"] += 1
        rows = _centralizer_rows(alg, x)
        basis = np.array(rows, dtype=np.int64).reshape(len(rows), p)
        combos = rng.integers(0, q, size=(per_x, len(rows)))
        ys = (combos @ basis % q).astype(np.int16)
        pair_x.append(np.broadcast_to(np.array(x.coeffs, dtype=np.int16),
                                      ys.shape).copy())
        pair_y.append(ys)
    X_all = np.concatenate(pair_x)
    Y_all = np.concatenate(pair_y)
    for lo in range(0, len(Y_all), 1 << 17):
        X = X_all[lo:lo + (1 << 17)]
        Y = Y_all[lo:lo + (1 << 17)]
        if space == "borel":
            keep = (Y[:, :2] == 0).all(axis=1)
        else:
            keep = bulk.nilpotent_flags(Y, p)
        X, Y = X[keep], Y[keep]
        nil = np.ones(len(Y), dtype=bool)
        covered, first = bulk.covered_flags(indices, X, Y, p, nil, nil)
        tl.counts["pairs"] += len(Y)
        for i in indices:
            tl.counts[f"hits_i{i}"] += int((first == i).sum())
        bad = np.nonzero(~covered)[0]
        for k in bad[:FAILURE_CAP]:
            tl.fail(_render_pair(alg, [int(v) for v in X[k]], [int(v) for v in Y[k]],
                                 "sampled pair not covered"))
        tl.failures_total += max(0, len(bad) - FAILURE_CAP)
    return VerificationReport(f"covering[{space}]", p, alg.ctx.m, q,
                              _mode_sampled(seed, samples), dict(tl.counts),
                              tl.failures, failures_total=tl.failures_total)


def _borel_minus_scan(alg: WittAlgebra, task: str) -> VerificationReport:
    """The lower Borel span{D, XD}: its nilpotent set must be exactly kD and
    its commuting nilpotent pairs exactly kD x kD."""
    p, q = alg.p, alg.ctx.q
    tl = _Tally()
    nil: list[WittElement] = []
    for a in range(q):
        for b in range(q):
            x = a * alg.D + b * alg.XD
            if alg.is_nilpotent(x):
                nil.append(x)
    tl.counts["span"] = q * q
    tl.counts["nilpotent"] = len(nil)
    kD = {(a * alg.D).coeffs for a in range(q)}
    for x in nil:
        if x.coeffs not in kD:
            tl.fail({"x": format_element(x), "detail": "nilpotent element outside kD"})
    if len(nil) != q:
        tl.fail({"detail": f"nilpotent set has {len(nil)} elements, expected {q}"})
    pairs = 0
    for x in nil:
        for y in nil:
            if alg.bracket(x, y).is_zero():
                pairs += 1
            else:
                tl.fail(_render_pair(alg, x.coeffs, y.coeffs,
                                     "nilpotent pair fails to commute"))
    tl.counts["pairs"] = pairs
    tl.counts["expected_pairs"] = q * q
    if pairs != q * q:
        tl.fail({"detail": "commuting square differs from kD x kD"})
    return VerificationReport(f"{task}[borel-minus]", p, alg.ctx.m, q,
                              _mode_exhaustive(), dict(tl.counts), tl.failures,
                              failures_total=tl.failures_total)


# ---------------------------------------------------------------------------
# task: middle-square redundancy
# ---------------------------------------------------------------------------

#: Largest raw pair count the per-pair strategy will take on.
MIDDLE_PAIR_LIMIT = 10**7


def verify_middle_redundancy(alg: WittAlgebra, workers: int = 1,
                             force: bool = False,
                             strategy: str = "auto") -> VerificationReport:
    """g_{(p-1)/2} x g_{(p-1)/2} is covered by certificates of index
    <= (p-3)/2, with each pair tagged by the case split (zero member /
    second member deeper than the middle / first member deeper / both
    exactly at the middle).

    Two strategies compute identical counts.  ``per-pair`` evaluates the
    predicate on every pair and is used while the pair count is small.
    ``factored`` walks every first coordinate x and accounts for the whole
    second-coordinate side at once: the y-set certified against x is a
    union of explicitly presented subspaces/cosets of the middle space, so
    its exact cardinality follows from echelon ranks, and any shortfall
    triggers a genuine per-y rescan for that x.  This keeps p = 13 (2.3e13
    raw pairs) exact without iterating pairs.
    """
    t0 = time.perf_counter()
    if alg.ctx.m != 1:
        raise SizeOverflowError("middle-square check runs over the prime field")
    p, q = alg.p, alg.ctx.q
    d = (p - 1) // 2
    side = q**d
    if strategy == "auto":
        strategy = "per-pair" if side * side <= MIDDLE_PAIR_LIMIT else "factored"
    if strategy == "per-pair":
        _guard(side * side, force, "middle redundancy (per-pair)")
        tally = _run_partitioned(side, workers,
                                 lambda lo, hi: _middle_pairs_block(alg, lo, hi))
    elif strategy == "factored":
        _guard(side * q, force, "middle redundancy (factored)")
        tally = _run_partitioned(side, workers,
                                 lambda lo, hi: _middle_factored_block(alg, lo, hi))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    tally.counts["side"] = side
    tally.counts["pairs"] = side * side
    tally.counts["factored"] = int(strategy == "factored")
    total = sum(tally.counts[f"case_{k}"] for k in range(1, 5))
    if total != side * side:
        tally.fail({"detail": f"case partition covers {total} of {side * side} pairs"})
    rep = VerificationReport("middle", p, alg.ctx.m, q, _mode_exhaustive(),
                             dict(tally.counts), tally.failures,
                             failures_total=tally.failures_total)
    return _finish(rep, t0)


def _middle_coords(alg: WittAlgebra, lo: int, hi: int) -> np.ndarray:
    """Rows of full coefficient vectors for middle-space codes in [lo, hi)."""
    p, q = alg.p, alg.ctx.q
    d = (p - 1) // 2
    mid = bulk.decode_codes(np.arange(lo, hi, dtype=np.int64), q, d)
    out = np.zeros((hi - lo, p), dtype=np.int16)
    out[:, p - d:] = mid
    return out


def _middle_case_tags(x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    lead = (p + 1) // 2
    x_zero = ~(x != 0).any(axis=1)
    y_zero = ~(y != 0).any(axis=1)
    case = np.full(len(x), 4, dtype=np.int8)
    case[(y[:, lead] == 0) & ~y_zero] = 2
    deeper_x = (x[:, lead] == 0) & ~x_zero & (y[:, lead] != 0)
    case[deeper_x] = 3
    case[x_zero | y_zero] = 1
    return case


def _middle_pairs_block(alg: WittAlgebra, lo: int, hi: int) -> _Tally:
    p, q = alg.p, alg.ctx.q
    d = (p - 1) // 2
    side = q**d
    indices = valid_indices(p, "full")
    X_side = _middle_coords(alg, lo, hi)
    Y_side = _middle_coords(alg, 0, side)
    nil_side = bulk.nilpotent_flags(Y_side, p)
    tl = _Tally()
    for r in range(hi - lo):
        X = np.broadcast_to(X_side[r], Y_side.shape)
        nil_x = np.broadcast_to(nil_side[lo + r], (side,))
        covered, _ = bulk.covered_flags(indices, X, Y_side, p, nil_x, nil_side)
        case = _middle_case_tags(X, Y_side, p)
        for k in range(1, 5):
            tl.counts[f"case_{k}"] += int((case == k).sum())
        bad = np.nonzero(~covered)[0]
        for k in bad[:FAILURE_CAP]:
            tl.fail(_render_pair(alg, [int(v) for v in X_side[r]],
                                 [int(v) for v in Y_side[k]],
                                 "middle pair not covered"))
        tl.failures_total += max(0, len(bad) - FAILURE_CAP)
    return tl


def _middle_factored_block(alg: WittAlgebra, lo: int, hi: int) -> _Tally:
    p, q = alg.p, alg.ctx.q
    d = (p - 1) // 2
    side = q**d
    lead = (p + 1) // 2
    X = _middle_coords(alg, lo, hi)
    n = hi - lo
    x0 = X[:, lead].astype(np.int64)
    x_zero = ~(X != 0).any(axis=1)
    tl = _Tally()
    # dim(k x + g_{(p+1)/2}) inside the middle space: eliminating the unit
    # vectors at the deeper positions leaves x0 * e_{(p-1)/2} as residual
    residual = X.astype(np.int64).copy()
    residual[:, lead + 1:] = 0
    dimA = (d - 1) + (residual != 0).any(axis=1).astype(np.int64)
    # the symmetric half certifies every y when x itself is deeper than the
    # middle (c = 0 exhibits x in g_{(p+1)/2})
    sym_all = x0 == 0
    full_cover = (dimA == d) | sym_all
    rescan = np.nonzero(~full_cover)[0]
    uncovered = 0
    for r in rescan:  # unreachable when the certificates behave; kept honest
        Y_side = _middle_coords(alg, 0, side)
        Xr = np.broadcast_to(X[r], Y_side.shape)
        nil_x = bulk.nilpotent_flags(X[r:r + 1], p)[0]
        nil_y = bulk.nilpotent_flags(Y_side, p)
        covered, _ = bulk.covered_flags(valid_indices(p, "full"), Xr, Y_side, p,
                                        np.broadcast_to(nil_x, (side,)), nil_y)
        bad = np.nonzero(~covered)[0]
        uncovered += len(bad)
        for k in bad[:FAILURE_CAP]:
            tl.fail(_render_pair(alg, [int(v) for v in X[r]],
                                 [int(v) for v in Y_side[k]],
                                 "middle pair not covered"))
    tl.failures_total += max(0, uncovered - len(tl.failures))
    # spot-check the real predicate on stratum representatives for every x:
    # y = 0, y = x, a y with leading 1, and one deeper y
    reps = []
    zero = np.zeros((n, p), dtype=np.int16)
    lead_unit = zero.copy()
    lead_unit[:, lead] = 1
    deep_unit = zero.copy()
    deep_unit[:, p - 1] = 1
    for Y in (zero, X, lead_unit, deep_unit):
        reps.append(Y)
    indices = valid_indices(p, "full")
    for Y in reps:
        nil_x = bulk.nilpotent_flags(X, p)
        nil_y = bulk.nilpotent_flags(Y, p)
        covered, _ = bulk.covered_flags(indices, X, Y, p, nil_x, nil_y)
        bad = np.nonzero(~covered)[0]
        for k in bad[:FAILURE_CAP]:
            tl.fail(_render_pair(alg, [int(v) for v in X[k]], [int(v) for v in Y[k]],
                                 "representative middle pair not covered"))
        tl.failures_total += max(0, len(bad) - len(tl.failures))
    # exact case accounting over the whole y side for each x
    deeper = q ** (d - 1)
    n_xzero = int(x_zero.sum())
    n_xdeep = int(((x0 == 0) & ~x_zero).sum())
    n_xlead = int((x0 != 0).sum())
    tl.counts["case_1"] += n_xzero * side + (n - n_xzero) * 1
    tl.counts["case_2"] += (n - n_xzero) * (deeper - 1)
    tl.counts["case_3"] += n_xdeep * (side - deeper)
    tl.counts["case_4"] += n_xlead * (side - deeper)
    return tl


# ---------------------------------------------------------------------------
# task: component witnesses
# ---------------------------------------------------------------------------

def component_witnesses(alg: WittAlgebra, space: str = "full") -> VerificationReport:
    """One pair per component index satisfying that certificate and no other:
    (D, D) for index 0, (e_i, e_{p-1-i}) for i >= 1."""
    t0 = time.perf_counter()
    if space not in ("full", "borel"):
        raise ValueError("witnesses exist for the full and Borel spaces")
    p = alg.p
    indices = valid_indices(p, space)
    tl = _Tally()
    witnesses = []
    for i in indices:
        if i == 0:
            x = y = alg.D
        else:
            x, y = alg.e(i), alg.e(p - 1 - i)
        hit = [j for j in indices if cert_membership(alg, j, x, y)]
        witnesses.append({"index": i, "x": format_element(x), "y": format_element(y)})
        if hit != [i]:
            tl.fail(_render_pair(alg, x.coeffs, y.coeffs,
                                 f"witness for {i} satisfies indices {hit}"))
    tl.counts["components"] = len(indices)
    tl.counts["expected_components"] = (p - 1) // 2 if space == "full" else (p - 3) // 2
    if tl.counts["components"] != tl.counts["expected_components"]:
        tl.fail({"detail": "component count mismatch"})
    rep = VerificationReport(f"witnesses[{space}]", p, alg.ctx.m, alg.ctx.q,
                             _mode_exhaustive(), dict(tl.counts), tl.failures,
                             witnesses=witnesses, failures_total=tl.failures_total)
    return _finish(rep, t0)


# ---------------------------------------------------------------------------
# task: component point counts
# ---------------------------------------------------------------------------

def count_component(alg: WittAlgebra, i: int, method: str,
                    force: bool = False) -> int:
    """Point count of the one-sided certified set S(i) = {(x, y): x in g_i,
    y in k x + g_{p-1-i}} for i >= 1 (closed form or honest enumeration), or
    of the symmetrized dependence set for i = 0 (enumeration only)."""
    p, q = alg.p, alg.ctx.q
    if not 0 <= i <= (p - 3) // 2:
        raise BadIndexError(f"index {i} not in 0..{(p - 3) // 2}")
    if method == "closed_form":
        if i == 0:
            raise BadIndexError("no closed form is offered for index 0")
        return q**p - q ** (2 * i + 1) + q ** (2 * i)
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    if i == 0:
        return _enumerate_s0(alg, force)
    _guard(q ** (p - 1 - i) * q ** (i + 1), force, "certified-set enumeration")
    return _enumerate_si(alg, i)


def _enumerate_si(alg: WittAlgebra, i: int) -> int:
    """Sum over x in g_i of |{c x + z : c in F_q, z in g_{p-1-i}}|, deduplicated
    per x with table arithmetic (works for extension fields)."""
    ctx = alg.ctx
    p, q = alg.p, ctx.q
    add_t = ctx.add_np.astype(np.int64)
    mul_t = ctx.mul_np.astype(np.int64)
    n_x = p - 1 - i   # free coordinates of g_i
    n_z = i           # free coordinates of g_{p-1-i}
    z_block = np.zeros((q**n_z, p), dtype=np.int64)
    if n_z:
        z_block[:, p - n_z:] = bulk.decode_codes(np.arange(q**n_z), q, n_z)
    scalars = np.arange(q, dtype=np.int64)
    powers = q ** np.arange(p - 1, -1, -1, dtype=np.int64)
    total = 0
    for x_code in range(q**n_x):
        xv = np.zeros(p, dtype=np.int64)
        xv[i + 1:] = bulk.decode_codes(np.array([x_code]), q, n_x)[0]
        cx = mul_t[scalars[:, None], xv[None, :]]              # (q, p)
        ys = add_t[cx[:, None, :], z_block[None, :, :]]        # (q, q^i, p)
        codes = (ys.reshape(-1, p) * powers).sum(axis=1)
        total += len(np.unique(codes))
    return total


def _enumerate_s0(alg: WittAlgebra, force: bool) -> int:
    p, q = alg.p, alg.ctx.q
    if alg.ctx.m != 1:
        raise SizeOverflowError("index-0 enumeration needs the prime-field cone scan")
    _guard(q**p, force, "dependence-set enumeration")
    mask = alg.nilpotent_mask()
    n_codes = np.nonzero(mask)[0]
    coeffs = bulk.decode_codes(n_codes, q, p)
    chunks = []
    base = np.int64(q) ** p
    for c in range(q):
        y = (coeffs.astype(np.int64) * c) % q
        y_codes = bulk.encode_vectors(y, q)
        chunks.append(n_codes * base + y_codes)
        chunks.append(y_codes * base + n_codes)
    return len(np.unique(np.concatenate(chunks)))


def count_report(alg: WittAlgebra, force: bool = False,
                 mode: str = "exhaustive") -> VerificationReport:
    """Closed form vs enumeration for every S(i), i >= 1, at the context's q;
    the symmetrized index-0 count is reported when the cone scan is in reach."""
    t0 = time.perf_counter()
    p, q = alg.p, alg.ctx.q
    tl = _Tally()
    for i in range(1, (p - 3) // 2 + 1):
        closed = count_component(alg, i, "closed_form")
        tl.counts[f"closed_i{i}"] = closed
        if mode == "exhaustive":
            enum = count_component(alg, i, "enumerate", force=force)
            tl.counts[f"enum_i{i}"] = enum
            if enum != closed:
                tl.fail({"detail": f"S({i}): enumerated {enum} != closed form {closed}"})
    if mode == "exhaustive" and alg.ctx.m == 1 and q**p <= EVAL_BOUND:
        tl.counts["enum_i0_sym"] = count_component(alg, 0, "enumerate", force=force)
    rep = VerificationReport("counts", p, alg.ctx.m, q,
                             _mode_exhaustive() if mode == "exhaustive"
                             else _mode_sampled(0, 0),
                             dict(tl.counts), tl.failures,
                             failures_total=tl.failures_total)
    return _finish(rep, t0)


# ---------------------------------------------------------------------------
# task: commuting-pair census
# ---------------------------------------------------------------------------

def commuting_census(alg: WittAlgebra, space: str = "full", mode: str = "exhaustive",
                     samples: int = 10**5, seed: int = 0, workers: int = 1,
                     force: bool = False) -> VerificationReport:
    """Count the commuting nilpotent pairs two independent ways: through
    centralizers, and as the union of the certificate sets; the counts must
    agree exactly (covering plus soundness pins the set equality)."""
    t0 = time.perf_counter()
    if space == "borel-minus":
        return _finish(_borel_minus_scan(alg, task="census"), t0)
    if alg.ctx.m != 1:
        raise SizeOverflowError("census runs over the prime field")
    p, q = alg.p, alg.ctx.q
    indices = valid_indices(p, space)
    if mode != "exhaustive":
        return _finish(_census_sampled(alg, space, indices, samples, seed), t0)
    _guard(_projected_evals(alg), force, "census")
    mask = alg.nilpotent_mask(workers)
    if space == "full":
        x_codes = np.nonzero(mask)[0]
    else:
        x_codes = np.arange(q ** (p - 2), dtype=np.int64)

    def work(lo: int, hi: int) -> _Tally:
        tl = _Tally()
        for code in x_codes[lo:hi]:
            x = alg.from_code(int(code))
            ys = _span_rows(alg, _centralizer_rows(alg, x))
            if space == "full":
                keep = mask[bulk.encode_vectors(ys, q)]
            else:
                keep = (ys[:, :2] == 0).all(axis=1)
            tl.counts["pairs_via_centralizers"] += int(keep.sum())
        return tl

    tally = _run_partitioned(len(x_codes), workers, work)
    union = _cert_union_size(alg, space, indices, mask)
    tally.counts["pairs_cert_union"] = union
    if tally.counts["pairs_via_centralizers"] != union:
        tally.fail({"detail": (f"centralizer count {tally.counts['pairs_via_centralizers']}"
                               f" != certificate-union count {union}")})
    rep = VerificationReport(f"census[{space}]", p, alg.ctx.m, q,
                             _mode_exhaustive(), dict(tally.counts),
                             tally.failures, failures_total=tally.failures_total)
    return _finish(rep, t0)


def _cert_union_size(alg: WittAlgebra, space: str, indices: list[int],
                     mask: np.ndarray) -> int:
    p, q = alg.p, alg.ctx.q
    base = np.int64(q) ** p
    chunks: list[np.ndarray] = []
    for i in indices:
        if i == 0:
            n_codes = np.nonzero(mask)[0]
            coeffs = bulk.decode_codes(n_codes, q, p)
            for c in range(q):
                y_codes = bulk.encode_vectors((coeffs.astype(np.int64) * c) % q, q)
                chunks.append(n_codes * base + y_codes)
                chunks.append(y_codes * base + n_codes)
            continue
        n_x = p - 1 - i
        x_codes = np.arange(q**n_x, dtype=np.int64)
        X = np.zeros((q**n_x, p), dtype=np.int64)
        X[:, i + 1:] = bulk.decode_codes(x_codes, q, n_x)
        Z = np.zeros((q**i, p), dtype=np.int64)
        if i:
            Z[:, p - i:] = bulk.decode_codes(np.arange(q**i, dtype=np.int64), q, i)
        for c in range(q):
            cX = (X * c) % q
            Y = (cX[:, None, :] + Z[None, :, :]) % q          # (q^n_x, q^i, p)
            y_codes = bulk.encode_vectors(Y.reshape(-1, p), q)
            x_rep = np.repeat(bulk.encode_vectors(X, q), q**i)
            chunks.append(x_rep * base + y_codes)
            chunks.append(y_codes * base + x_rep)
    return len(np.unique(np.concatenate(chunks)))


def _census_sampled(alg: WittAlgebra, space: str, indices: list[int],
                    samples: int, seed: int) -> VerificationReport:
    """Sampled consistency: pairs drawn through centralizers satisfy some
    certificate; pairs drawn from certificate sets commute and are nilpotent."""
    import random as _random
    p, q = alg.p, alg.ctx.q
    prng = _random.Random(seed)
    tl = _Tally()
    half = samples // 2
    rep_cov = _covering_sampled(alg, space, indices, half, seed)
    tl.counts["pairs_via_centralizers"] = rep_cov.counts["pairs"]
    tl.failures_total += rep_cov.failures_total
    tl.failures.extend(rep_cov.failures[:FAILURE_CAP])
    for _ in range(samples - half):
        i = prng.choice([j for j in indices if j >= 1] or indices)
        x_tail = [prng.randrange(q) for _ in range(p - 1 - i)]
        x = alg.element([0] * (i + 1) + x_tail)
        c = prng.randrange(q)
        z_tail = [prng.randrange(q) for _ in range(i)]
        z = alg.element([0] * (p - i) + z_tail)
        y = c * x + z
        tl.counts["cert_set_samples"] += 1
        if not (alg.is_nilpotent(x) and alg.is_nilpotent(y)
                and alg.bracket(x, y).is_zero()):
            tl.fail(_render_pair(alg, x.coeffs, y.coeffs,
                                 "certificate member is not a commuting nilpotent pair"))
    return VerificationReport(f"census[{space}]", p, alg.ctx.m, q,
                              _mode_sampled(seed, samples), dict(tl.counts),
                              tl.failures, failures_total=tl.failures_total)


# ---------------------------------------------------------------------------
# task: rectification totality
# ---------------------------------------------------------------------------

def verify_rectification(alg: WittAlgebra, mode: str = "exhaustive",
                         samples: int = 10**6, seed: int = 0, workers: int = 1,
                         force: bool = False) -> VerificationReport:
    """Rectification succeeds exactly on the nilpotents with a_{-1} != 0 and
    always lands on D; equivalently, failure means non-nilpotent or a_{-1} = 0."""
    t0 = time.perf_counter()
    if alg.ctx.m != 1:
        raise SizeOverflowError("rectification sweep runs over the prime field")
    p, q = alg.p, alg.ctx.q
    if mode == "exhaustive":
        _guard(_projected_evals(alg), force, "rectification sweep")
        mask = alg.nilpotent_mask(workers)
        codes = np.arange(q ** (p - 1), q**p, dtype=np.int64)
        coeffs = bulk.decode_codes(codes, q, p)
        ok, psi = bulk.rectifiability(coeffs, p)
        tl = _Tally()
        tl.counts["checked"] = len(codes)
        tl.counts["rectifiable"] = int(ok.sum())
        tl.counts["not_rectifiable"] = int((~ok).sum())
        iff_bad = np.nonzero(ok != mask[codes])[0]
        tl.counts["iff_violations"] = len(iff_bad)
        for k in iff_bad[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(codes[k]))),
                     "detail": "rectifiability disagrees with nilpotence"})
        tl.failures_total += max(0, len(iff_bad) - FAILURE_CAP)
        sel = np.nonzero(ok)[0]
        to_d = bulk.rectified_to_d_flags(coeffs[sel], psi[sel], p)
        bad = sel[~to_d]
        tl.counts["rectified_to_D"] = int(to_d.sum())
        for k in bad[:FAILURE_CAP]:
            tl.fail({"x": format_element(alg.from_code(int(codes[k]))),
                     "detail": "rectification does not reach D"})
        tl.failures_total += max(0, len(bad) - FAILURE_CAP)
        rep = VerificationReport("rectify", p, alg.ctx.m, q, _mode_exhaustive(),
                                 dict(tl.counts), tl.failures,
                                 failures_total=tl.failures_total)
        return _finish(rep, t0)
    rng = np.random.Generator(np.random.PCG64(seed))
    tl = _Tally()
    done = 0
    while done < samples:
        n = min(1 << 16, samples - done)
        coeffs = rng.integers(0, q, size=(n, p)).astype(np.int16)
        coeffs[:, 0] = rng.integers(1, q, size=n)  # keep a_{-1} != 0
        nil = bulk.nilpotent_flags(coeffs, p)
        ok, psi = bulk.rectifiability(coeffs, p)
        tl.counts["checked"] += n
        tl.counts["rectifiable"] += int(ok.sum())
        bad_iff = np.nonzero(ok != nil)[0]
        tl.counts["iff_violations"] += len(bad_iff)
        for k in bad_iff[:2]:
            tl.fail({"x": format_element(alg.element(map(int, coeffs[k]))),
                     "detail": "rectifiability disagrees with nilpotence"})
        sel = np.nonzero(ok)[0]
        if len(sel):
            to_d = bulk.rectified_to_d_flags(coeffs[sel], psi[sel], p)
            tl.counts["rectified_to_D"] += int(to_d.sum())
            for k in sel[~to_d][:2]:
                tl.fail({"x": format_element(alg.element(map(int, coeffs[k]))),
                         "detail": "rectification does not reach D"})
            tl.failures_total += max(0, int((~to_d).sum()) - 2)
        done += n
    rep = VerificationReport("rectify", p, alg.ctx.m, q, _mode_sampled(seed, samples),
                             dict(tl.counts), tl.failures,
                             failures_total=tl.failures_total)
    return _finish(rep, t0)
