"""Closed-form limit laws for cokernels and coranks of random matrix products."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from typing import Iterable, Sequence

from .bounded import Bounded, fraction_str, mp, to_mpf
from .errors import ConvergenceError, ValidationError
from .groups import GroupType, aut_count, chain_count_nk, sur_count
from .partitions import EMPTY, Partition, partitions_bounded, subpartitions


def qpoch(a, q, n: int | None = None, tol: float = 1e-30) -> Bounded:
    """(a;q)_n = prod_{i<n} (1 - a q^i); n=None means n = infinity.

    Finite products are exact.  For the infinite product the partial product
    P_N is returned together with |P_N| (exp(2s) - 1), s = |a||q|^N / (1-|q|),
    which bounds the omitted factors once s <= 1/2.
    """
    a, q = Fraction(a), Fraction(q)
    if n is not None:
        if n < 0:
            raise ValidationError("n must be >= 0")
        out = Fraction(1)
        for i in range(n):
            out *= 1 - a * q ** i
        return Bounded(out)
    if abs(q) >= 1:
        raise ConvergenceError(f"(a;q)_inf diverges for |q| = {abs(q)} >= 1")
    return _qpoch_inf(a, q, float(tol))


@lru_cache(maxsize=None)
def _qpoch_inf(a: Fraction, q: Fraction, tol: float) -> Bounded:
    am, qm = to_mpf(a), to_mpf(q)
    absq = abs(qm)
    val = mp.mpf(1)
    term = am
    N = 0
    while True:
        val *= 1 - term
        term *= qm
        N += 1
        s = abs(am) * absq ** N / (1 - absq)
        if s <= 0.5:
            err = abs(val) * (mp.exp(2 * s) - 1)
            if err <= tol or s == 0:
                return Bounded(val, err)
        if N > 100000:
            raise ConvergenceError("q-Pochhammer product did not converge")


def qinf(p: int, tol: float = 1e-30) -> Bounded:
    """(1/p; 1/p)_inf."""
    t = Fraction(1, p)
    return qpoch(t, t, None, tol)


def _tp(p: int, m: int) -> Fraction:
    t = Fraction(1, p)
    return qpoch(t, t, m).value


# ------------------------------------------------------------------ coranks

def corank_pattern_factor(p: int, pattern: Sequence[int]) -> Fraction:
    """prod_i p^{-r_i(r_1+...+r_i)} / ((1/p;1/p)_{r_i} (1/p;1/p)_{r_1+...+r_i}), exactly."""
    if any(r < 0 for r in pattern):
        raise ValidationError("corank pattern entries must be >= 0")
    out = Fraction(1)
    run = 0
    for r in pattern:
        run += r
        out *= Fraction(1, p ** (r * run)) / (_tp(p, r) * _tp(p, run))
    return out


def corank_joint_limit(p: int, pattern: Sequence[int], tol: float = 1e-30) -> Bounded:
    """Limiting probability that rank(M_1...M_i) = n - (r_1+...+r_i) for all i."""
    pattern = tuple(int(r) for r in pattern)
    if not pattern:
        raise ValidationError("pattern must have k >= 1 entries")
    return qinf(p, tol) ** len(pattern) * corank_pattern_factor(p, pattern)


def corank_single_limit(p: int, d: int, tol: float = 1e-30) -> Bounded:
    """One-matrix corank law p^{-d^2} prod_{i>d}(1-p^{-i}) / prod_{i<=d}(1-p^{-i})."""
    if d < 0:
        raise ValidationError("d must be >= 0")
    t = Fraction(1, p)
    tail = qpoch(t ** (d + 1), t, None, tol)
    return tail * (Fraction(1, p ** (d * d)) / _tp(p, d))


def rank_step(p: int, n: int, k0: int, d: int) -> Fraction:
    """P(rank(BA) = n - k0 - d) for fixed B of rank n - k0 and uniform A over F_p."""
    if n < 0 or not 0 <= k0 <= n or not 0 <= d <= n - k0:
        raise ValidationError(f"need 0 <= k0 <= n and 0 <= d <= n - k0 (n={n}, k0={k0}, d={d})")
    num = _tp(p, n - k0) * _tp(p, n)
    den = _tp(p, d) * _tp(p, k0 + d) * _tp(p, n - k0 - d)
    return num / den * Fraction(1, p ** (d * (k0 + d)))


def corank_patterns(k: int, max_total: int) -> list[tuple]:
    """All (r_1..r_k) with r_i >= 0 and sum <= max_total, in lexicographic order."""
    return [pat for pat in iproduct(range(max_total + 1), repeat=k) if sum(pat) <= max_total]


# ---------------------------------------------------------------- cokernels

def _check_support(P: Iterable[int], groups: Sequence[GroupType]) -> list[int]:
    P = sorted(set(int(p) for p in P))
    allowed = set(P)
    for G in groups:
        extra = G.primes() - allowed
        if extra:
            raise ValidationError(f"group {G.to_json()} has primes {sorted(extra)} outside P = {P}")
    return P


def cok_prod_limit(P: Iterable[int], k: int, B: GroupType, tol: float = 1e-30) -> Bounded:
    """prod_{p in P} (1/p;1/p)_inf^k n_k(B) / #Aut(B)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    B = GroupType(B)
    primes = _check_support(P, [B])
    out = Bounded(Fraction(1))
    for p in primes:
        lam = B.part(p)
        out = out * qinf(p, tol) ** k * Fraction(chain_count_nk(GroupType({p: lam}) if lam else GroupType(), k), aut_count(p, lam))
    return out


def cok_joint_factor(p: int, lams: Sequence[Partition]) -> Fraction:
    """prod_i #Sur(G_{lam_i}, G_{lam_{i-1}}) / #Aut(G_{lam_i}) with lam_0 = empty."""
    out = Fraction(1)
    prev = EMPTY
    for lam in lams:
        s = sur_count(p, lam, prev)
        if not s:
            return Fraction(0)
        out *= Fraction(s, aut_count(p, lam))
        prev = lam
    return out


def cok_joint_limit(P: Iterable[int], k: int, Bs: Sequence[GroupType], tol: float = 1e-30) -> Bounded:
    """prod_{p in P} (1/p;1/p)_inf^k prod_i #Sur(B_i, B_{i-1}) / #Aut(B_i), B_0 = 0."""
    Bs = [GroupType(B) for B in Bs]
    if len(Bs) != k or k < 1:
        raise ValidationError(f"need exactly k = {k} groups, got {len(Bs)}")
    primes = _check_support(P, Bs)
    out = Bounded(Fraction(1))
    for p in primes:
        out = out * qinf(p, tol) ** k * cok_joint_factor(p, [B.part(p) for B in Bs])
    return out


# ------------------------------------------------------------- theory table

MODES = ("cok_joint", "cok_single", "corank")


@dataclass
class TheoryTable:
    """Exact interior cells of a limit law plus one overflow bucket.

    For cokernel modes the interior cells are tuples of partitions with every
    part < L (so the truncation mod p^L loses nothing) and at most
    ``max_len`` parts.  For corank mode they are patterns of total corank
    <= ``max_total``.  ``overflow`` is 1 minus the interior mass.
    """

    p: int
    L: int
    k: int
    mode: str
    cells: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    overflow: object = 0
    deficit_bound: object = 0
    params: dict = field(default_factory=dict)

    def prob(self, key) -> float:
        return float(self.cells.get(key, 0))

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "L": self.L,
            "k": self.k,
            "mode": self.mode,
            "params": self.params,
            "cells": [
                {"key": key_to_json(self.mode, key), "prob": float(v), "bound": float(self.bounds[key])}
                for key, v in self.cells.items()
            ],
            "overflow": float(self.overflow),
            "deficit_bound": float(self.deficit_bound),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TheoryTable":
        mode = data["mode"]
        cells, bounds = {}, {}
        for c in data["cells"]:
            key = key_from_json(mode, c["key"])
            cells[key] = c["prob"]
            bounds[key] = c["bound"]
        return cls(data["p"], data["L"], data["k"], mode, cells, bounds, data["overflow"], data["deficit_bound"], data.get("params", {}))


def key_to_json(mode: str, key):
    """Corank keys are integer lists; cokernel keys are lists (one per step j)
    of lists of per-prime partition strings."""
    if mode == "corank":
        return list(key)
    return [[str(lam) for lam in step] for step in key]


def key_from_json(mode: str, data):
    if mode == "corank":
        return tuple(int(r) for r in data)
    return tuple(tuple(Partition.parse(s) for s in step) for step in data)


def _chains_below(top: Partition, k: int) -> Iterable[tuple]:
    """Sequences lam_1 <= ... <= lam_k = top under diagram containment."""
    if k == 1:
        yield (top,)
        return
    for mu in subpartitions(top):
        for rest in _chains_below(mu, k - 1):
            yield rest + (top,)


def theory_table(p: int, L: int, k: int, mode: str, max_len: int | None = None, max_total: int = 4,
                 tol: float = 1e-30) -> TheoryTable:
    """Interior cells of the limit law at prime p and level L, with overflow."""
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    if L < 1 or k < 1:
        raise ValidationError("need L >= 1 and k >= 1")
    q = qinf(p, tol) ** k
    cells, bounds = {}, {}
    if mode == "corank":
        for pat in corank_patterns(k, max_total):
            f = corank_pattern_factor(p, pat)
            cells[pat] = f
        params = {"max_total": max_total}
    else:
        if max_len is None:
            max_len = 6 if L > 1 else 0
        tops = [lam for lam in partitions_bounded((L - 1) * max_len, L - 1, max_len)]
        if mode == "cok_single":
            for lam in tops:
                f = Fraction(chain_count_nk(GroupType({p: lam}), k), aut_count(p, lam))
                cells[((lam,),)] = f
        else:
            for top in tops:
                for chain in _chains_below(top, k):
                    f = cok_joint_factor(p, chain)
                    if f:
                        cells[tuple((lam,) for lam in chain)] = f
        params = {"max_len": max_len}
    total_exact = sum(cells.values(), Fraction(0))
    probs = {}
    for key, f in cells.items():
        v = q * f
        probs[key] = v.mpf()
        bounds[key] = to_mpf(v.error_bound)
    mass = q * total_exact
    return TheoryTable(p, L, k, mode, probs, bounds, 1 - mass.mpf(), to_mpf(mass.error_bound), params)
