"""Hall-Littlewood polynomials at finite and geometric specializations.

Finite evaluations use the one-variable branching rule in exact rational
arithmetic.  Geometric ("principal") families t^a[k], t^{a+1}[k], ... are
self-similar: X = t^a[k] + t*X.  Peeling the k leading variables one at a
time gives a triangular linear recursion over partitions whose solution is
exact, so principal values come out as Fractions with error bound 0.  An
adaptive truncation route (append variables until the increments stall) is
kept as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Iterable, Sequence

from .bounded import Bounded, mp, to_mpf
from .errors import ConvergenceError, ValidationError
from .partitions import EMPTY, Partition, horizontal_strips_below, interlaces


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _check_t(t) -> Fraction:
    t = _frac(t)
    if abs(t) == 1:
        raise ValidationError(f"t = {t} makes the normalization v_(lambda,n)(t) vanish")
    return t


def tpoch(t, m: int):
    """(t;t)_m as an exact product in the type of t."""
    out = 1
    for i in range(1, m + 1):
        out = out * (1 - t ** i)
    return out


def b_coef(lam: Partition, t):
    """b_lambda(t) = prod_i (t;t)_{m_i(lambda)}, so that Q_lambda = b_lambda P_lambda."""
    out = 1
    for m in Partition(lam).multiplicities().values():
        out = out * tpoch(t, m)
    return out


def psi(lam: Partition, mu: Partition, t):
    """Branching coefficient of P for a horizontal strip mu < lam."""
    ml, mm = lam.multiplicities(), mu.multiplicities()
    out = 1
    for i, m in mm.items():
        if m == ml.get(i, 0) + 1:
            out = out * (1 - t ** m)
    return out


def phi(lam: Partition, mu: Partition, t):
    """Branching coefficient of Q for a horizontal strip mu < lam."""
    ml, mm = lam.multiplicities(), mu.multiplicities()
    out = 1
    for i, m in ml.items():
        if m == mm.get(i, 0) + 1:
            out = out * (1 - t ** m)
    return out


def _coef(kind: str):
    if kind == "P":
        return psi
    if kind == "Q":
        return phi
    raise ValidationError(f"kind must be P or Q, not {kind!r}")


def _interval(lam: Partition, mu: Partition) -> list[Partition]:
    """Partitions nu with mu <= nu <= lam, sorted by size."""
    from .partitions import subpartitions

    return sorted(subpartitions(lam, mu), key=lambda p: (p.size, tuple(p)))


def _add_variable(table: dict, shapes: Sequence[Partition], mu: Partition, x, t, coef) -> dict:
    """One branching step: new[nu] = sum_{kappa < nu} old[kappa] c_{nu/kappa} x^{|nu|-|kappa|}."""
    new = {}
    for nu in shapes:
        acc = 0
        for kappa in horizontal_strips_below(nu, mu):
            v = table.get(kappa)
            if v:
                acc = acc + v * coef(nu, kappa, t) * x ** (nu.size - kappa.size)
        new[nu] = acc
    return new


def eval_skew(kind: str, lam, mu, xs: Sequence, t) -> Fraction:
    """P_{lam/mu} or Q_{lam/mu} at finitely many exact rational variables."""
    lam, mu = Partition(lam), Partition(mu)
    t = _check_t(t)
    coef = _coef(kind)
    if not lam.contains(mu):
        return Fraction(0)
    xs = [_frac(x) for x in xs]
    shapes = _interval(lam, mu)
    table = {nu: Fraction(int(nu == mu)) for nu in shapes}
    for x in xs:
        table = _add_variable(table, shapes, mu, x, t, coef)
    return table[lam]


def eval_p(lam, xs: Sequence, t) -> Fraction:
    """P_lam(x_1, ..., x_n; t), zero when lam has more parts than variables."""
    return eval_skew("P", lam, EMPTY, xs, t)


def eval_q(lam, xs: Sequence, t) -> Fraction:
    return eval_skew("Q", lam, EMPTY, xs, t)


def symmetrize_p(lam, xs: Sequence, t) -> Fraction:
    """P_lam by brute symmetrization over S_n (the defining formula).

    Requires pairwise distinct variables; meant as an oracle for n <= 7.
    """
    lam = Partition(lam)
    t = _check_t(t)
    xs = [_frac(x) for x in xs]
    n = len(xs)
    if len(set(xs)) != n:
        raise ValidationError("symmetrization needs pairwise distinct variables")
    if len(lam) > n:
        return Fraction(0)
    parts = list(lam) + [0] * (n - len(lam))
    total = Fraction(0)
    for perm in permutations(xs):
        term = Fraction(1)
        for i, e in enumerate(parts):
            term *= perm[i] ** e
        for i in range(n):
            for j in range(i + 1, n):
                term *= (perm[i] - t * perm[j]) / (perm[i] - perm[j])
        total += term
    free = n - len(lam)
    v = tpoch(t, free) / (1 - t) ** free
    for m in lam.multiplicities().values():
        v *= tpoch(t, m) / (1 - t) ** m
    return total / v


@dataclass(frozen=True)
class SpecDescriptor:
    """A nonnegative specialization: finitely many values, or the geometric
    family t^a, t^{a+1}, ... with each value repeated k times."""

    kind: str
    values: tuple = ()
    a: int = 0
    k: int = 1

    @classmethod
    def finite(cls, values: Iterable) -> "SpecDescriptor":
        vals = tuple(_frac(v) for v in values)
        if any(v < 0 for v in vals):
            raise ValidationError("finite specialization values must be >= 0")
        return cls("finite", values=vals)

    @classmethod
    def geometric(cls, a: int = 0, k: int = 1) -> "SpecDescriptor":
        if a < 0 or k < 1:
            raise ValidationError("geometric family needs a >= 0 and k >= 1")
        return cls("geometric", a=int(a), k=int(k))

    def variables(self, t, count: int) -> list:
        """The first ``count`` variables of the family (all of them if finite)."""
        if self.kind == "finite":
            return list(self.values)
        return [t ** (self.a + i // self.k) for i in range(count)]

    def power_sum(self, ell: int, t) -> Fraction:
        if self.kind == "finite":
            return sum((v ** ell for v in self.values), Fraction(0))
        return self.k * t ** (ell * self.a) / (1 - t ** ell)

    def max_value(self, t) -> Fraction:
        if self.kind == "finite":
            return max(self.values, default=Fraction(0))
        return t ** self.a

    def label(self) -> str:
        if self.kind == "finite":
            return ",".join(str(v) for v in self.values)
        return f"t^{self.a}[{self.k}],t^{self.a + 1}[{self.k}],..."


# ---------------------------------------------------------------- geometric

def _upward_shapes(mu: Partition, max_size: int, max_len: int | None = None) -> list[list[Partition]]:
    """Partitions containing mu, grouped by size up to max_size."""
    levels = [[mu]]
    seen = {mu}
    for _ in range(mu.size, max_size):
        nxt = []
        for lam in levels[-1]:
            parts = list(lam)
            for i in range(len(parts) + 1):
                if max_len is not None and i >= max_len:
                    break
                prev = parts[i - 1] if i > 0 else None
                cur = parts[i] if i < len(parts) else 0
                if prev is None or cur < prev:
                    new = Partition(parts[:i] + [cur + 1] + parts[i + 1:])
                    if new not in seen:
                        seen.add(new)
                        nxt.append(new)
        levels.append(nxt)
    return levels


def _geometric_solve(kind: str, mu: Partition, levels: Sequence[Sequence[Partition]], a: int, k: int, t) -> dict:
    """Exact skew values f(lam) = X_{lam/mu}(t^a[k], t^{a+1}[k], ...) for every
    lam in ``levels`` (graded by size, closed under horizontal strips down to mu).

    With F_j = t^a[j] + t*X, F_k = X and F_0 = t*X:
        f_j(lam) = f_{j-1}(lam) + s_j(lam),
        s_j(lam) = sum_{nu < lam, nu != lam} c_{lam/nu} t^{a(|lam|-|nu|)} f_{j-1}(nu),
        f_0(lam) = t^{|lam|-|mu|} f_k(lam),
    which solves to f_k(lam) = sum_j s_j(lam) / (1 - t^{|lam|-|mu|}).
    """
    coef = _coef(kind)
    ta = t ** a
    # phase[j][lam] = value at F_j
    phase: list[dict] = [dict() for _ in range(k + 1)]
    for lvl in levels:
        for lam in lvl:
            if lam == mu:
                for j in range(k + 1):
                    phase[j][lam] = Fraction(1) if isinstance(t, Fraction) else 1
                continue
            d = lam.size - mu.size
            strips = [nu for nu in horizontal_strips_below(lam, mu) if nu != lam]
            s = []
            # s_j depends on f_{j-1}(nu) for smaller nu, all known already
            for j in range(1, k + 1):
                acc = 0
                for nu in strips:
                    v = phase[j - 1].get(nu)
                    if v:
                        acc = acc + v * coef(lam, nu, t) * ta ** (lam.size - nu.size)
                s.append(acc)
            top = sum(s) / (1 - t ** d)
            run = t ** d * top
            phase[0][lam] = run
            for j in range(1, k + 1):
                run = run + s[j - 1]
                phase[j][lam] = run
    return phase[k]


def principal_table(kind: str, mu, spec: SpecDescriptor, t, max_size: int, max_len: int | None = None) -> dict:
    """Exact skew values X_{lam/mu}(spec) for every lam >= mu with |lam| <= max_size."""
    mu = Partition(mu)
    t = _check_t(t)
    if spec.kind != "geometric":
        raise ValidationError("principal_table needs a geometric specialization")
    if not 0 < t < 1:
        raise ValidationError("geometric specializations need t in (0,1)")
    levels = _upward_shapes(mu, max_size, max_len)
    return _geometric_solve(kind, mu, levels, spec.a, spec.k, t)


def _principal_exact(kind: str, lam: Partition, mu: Partition, spec: SpecDescriptor, t: Fraction) -> Fraction:
    shapes = _interval(lam, mu)
    levels: dict[int, list] = {}
    for nu in shapes:
        levels.setdefault(nu.size, []).append(nu)
    ordered = [levels[s] for s in sorted(levels)]
    return _geometric_solve(kind, mu, ordered, spec.a, spec.k, t)[lam]


def _principal_truncated(kind: str, lam: Partition, mu: Partition, spec: SpecDescriptor, t: Fraction, tol: float, max_vars: int) -> Bounded:
    """Append variables of the family one at a time until the relative increment
    stays below tol/10 for two consecutive variables; the bound is 10x the last
    increment.  Partial values are nondecreasing."""
    coef = _coef(kind)
    shapes = _interval(lam, mu)
    tm = to_mpf(t)
    table = {nu: mp.mpf(int(nu == mu)) for nu in shapes}
    prev = table[lam]
    quiet = 0
    for i in range(max_vars):
        x = tm ** (spec.a + i // spec.k)
        table = _add_variable(table, shapes, mu, x, tm, coef)
        cur = table[lam]
        if cur < prev:
            raise ConvergenceError(f"partial values decreased for lambda={lam}, t={t}")
        inc = cur - prev
        prev = cur
        if cur > 0 and inc <= cur * tol / 10:
            quiet += 1
            if quiet >= 2 and i >= len(lam):
                return Bounded(cur, 10 * inc)
        else:
            quiet = 0
    raise ConvergenceError(f"no convergence for lambda={lam}, mu={mu}, t={t} within {max_vars} variables")


def principal(kind: str, lam, mu=EMPTY, spec: SpecDescriptor | None = None, t=Fraction(1, 2), tol: float = 1e-12,
              method: str = "exact", max_vars: int = 4000) -> Bounded:
    """Skew P or Q at a specialization.

    method "exact" solves the self-similar recursion (error bound 0);
    method "truncate" uses adaptive truncation with an increment-based bound.
    """
    lam, mu = Partition(lam), Partition(mu)
    t = _check_t(t)
    spec = spec or SpecDescriptor.geometric(0, 1)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if not lam.contains(mu):
        return Bounded(Fraction(0))
    if spec.kind == "finite":
        return Bounded(eval_skew(kind, lam, mu, spec.values, t))
    if not 0 < t < 1:
        raise ValidationError("geometric specializations need t in (0,1)")
    if method == "exact":
        return Bounded(_principal_exact(kind, lam, mu, spec, t))
    if method == "truncate":
        return _principal_truncated(kind, lam, mu, spec, t, tol, max_vars)
    raise ValidationError(f"unknown method {method!r}")


# ------------------------------------------------------------ Cauchy kernel

def cauchy_kernel(A: SpecDescriptor, B: SpecDescriptor, t, tol: float = 1e-30) -> Bounded:
    """Pi_t(A; B) = prod (1 - t x y)/(1 - x y).

    Two finite specializations give the exact finite product.  Otherwise the
    power-sum series exp(sum_l (1 - t^l)/l p_l(A) p_l(B)) is summed until the
    geometric tail bound p_1(A) p_1(B) r^L / ((L+1)(1-r)), r = max(A) max(B),
    is negligible.
    """
    t = _check_t(t)
    if not 0 <= t < 1:
        raise ValidationError("t must lie in [0,1)")
    if (A.kind == "finite" and not A.values) or (B.kind == "finite" and not B.values):
        return Bounded(Fraction(1))
    r = A.max_value(t) * B.max_value(t)
    if r >= 1:
        raise ConvergenceError(f"Cauchy kernel diverges: some x*y = {r} >= 1")
    if A.kind == "finite" and B.kind == "finite":
        out = Fraction(1)
        for x in A.values:
            for y in B.values:
                out *= (1 - t * x * y) / (1 - x * y)
        return Bounded(out)
    rm = to_mpf(r)
    scale = to_mpf(A.power_sum(1, t) * B.power_sum(1, t))
    S = mp.mpf(0)
    ell = 0
    while True:
        ell += 1
        S += to_mpf((1 - t ** ell) * A.power_sum(ell, t) * B.power_sum(ell, t)) / ell
        tail = scale * rm ** ell / ((ell + 1) * (1 - rm))
        if tail < mp.mpf(tol) / 4 or rm == 0:
            break
        if ell > 100000:
            raise ConvergenceError("Cauchy kernel series did not converge")
    value = mp.exp(S)
    return Bounded(value, value * (mp.exp(tail) - 1))


# ----------------------------------------------------------------- measures

def _normalizer(k: int, t: Fraction, tol: float) -> Bounded:
    return cauchy_kernel(SpecDescriptor.geometric(0, 1), SpecDescriptor.geometric(1, k), t, tol)


def measure_prod(lam, k: int, t, tol: float = 1e-30) -> Bounded:
    """Q_lam(1[k], t[k], ...) P_lam(t, t^2, ...) / Pi_t(1, t, ...; t[k], t^2[k], ...)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    lam, t = Partition(lam), _check_t(t)
    q = principal("Q", lam, EMPTY, SpecDescriptor.geometric(0, k), t).value
    p = principal("P", lam, EMPTY, SpecDescriptor.geometric(1, 1), t).value
    return Bounded(q * p) * _normalizer(k, t, tol).reciprocal()


def measure_joint(lams: Sequence, t, tol: float = 1e-30) -> Bounded:
    """Ascending process weight of (lam^(1), ..., lam^(k)):
    prod_i Q_{lam^(i)/lam^(i-1)}(1, t, ...) P_{lam^(k)}(t, t^2, ...) / Pi_t(1, t, ...; t[k], ...)."""
    lams = [Partition(l) for l in lams]
    if not lams:
        raise ValidationError("need at least one partition")
    t = _check_t(t)
    k = len(lams)
    num = Fraction(1)
    prev = EMPTY
    for lam in lams:
        if not lam.contains(prev):
            return Bounded(Fraction(0))
        num *= principal("Q", lam, prev, SpecDescriptor.geometric(0, 1), t).value
        prev = lam
    num *= principal("P", lams[-1], EMPTY, SpecDescriptor.geometric(1, 1), t).value
    return Bounded(num) * _normalizer(k, t, tol).reciprocal()


def measure_prod_partial(max_size: int, k: int, t, tol: float = 1e-30) -> tuple[Bounded, dict]:
    """Total mass of measure_prod over |lam| <= max_size, with the cell values."""
    t = _check_t(t)
    q = principal_table("Q", EMPTY, SpecDescriptor.geometric(0, k), t, max_size)
    p = principal_table("P", EMPTY, SpecDescriptor.geometric(1, 1), t, max_size)
    norm = _normalizer(k, t, tol).reciprocal()
    cells = {lam: q[lam] * p[lam] for lam in q}
    return Bounded(sum(cells.values(), Fraction(0))) * norm, cells


def skew_q_matrix(max_size: int, t) -> tuple[list[Partition], "np.ndarray"]:
    """Float matrix S[lam, mu] = Q_{lam/mu}(1, t, t^2, ...) over all |lam|, |mu| <= max_size.

    Peeling the leading variable 1 off X = (1, t, ...) = {1} + t*X gives, for
    every row at once,
    S[lam, mu] (1 - t^{|lam|-|mu|}) = t^{-|mu|} sum_{nu < lam, nu != lam} phi_{lam/nu} t^{|nu|} S[nu, mu].
    """
    import numpy as np

    t = _check_t(t)
    tf = float(t)
    shapes = [lam for lvl in _upward_shapes(EMPTY, max_size) for lam in lvl]
    index = {lam: i for i, lam in enumerate(shapes)}
    sizes = np.array([lam.size for lam in shapes])
    inv = tf ** (-sizes.astype(float))
    S = np.zeros((len(shapes), len(shapes)))
    for i, lam in enumerate(shapes):
        S[i, i] = 1.0
        if not lam:
            continue
        acc = np.zeros(len(shapes))
        for nu in horizontal_strips_below(lam):
            if nu != lam:
                acc += float(phi(lam, nu, t)) * tf ** nu.size * S[index[nu]]
        d = lam.size - sizes
        mask = d > 0
        S[i, mask] = acc[mask] * inv[mask] / (1 - tf ** d[mask])
    return shapes, S


def measure_joint_partial(max_size: int, k: int, t, tol: float = 1e-30) -> Bounded:
    """Total mass of measure_joint over chains with |lam^(k)| <= max_size.

    Chains are summed by the transfer recursion
    W_j(lam) = sum_{mu <= lam} Q_{lam/mu}(1, t, ...) W_{j-1}(mu), W_0 = [empty].
    Every term is positive, so float64 rounding is relative and small; a
    conservative 1e-10 relative allowance is folded into the bound.
    """
    import numpy as np

    t = _check_t(t)
    shapes, S = skew_q_matrix(max_size, t)
    W = np.zeros(len(shapes))
    W[0] = 1.0
    for _ in range(k):
        W = S @ W
    p = principal_table("P", EMPTY, SpecDescriptor.geometric(1, 1), t, max_size)
    total = math.fsum(W[i] * float(p[lam]) for i, lam in enumerate(shapes))
    return Bounded(mp.mpf(total), mp.mpf(total) * mp.mpf("1e-10")) * _normalizer(k, t, tol).reciprocal()
