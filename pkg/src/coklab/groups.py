"""Exact counts for finite abelian p-groups G_lam = (+)_i Z/p^{lam_i}.

All functions work in exact integers.  Multi-prime groups are handled by
``GroupType`` and every count factors over primes.
"""

from __future__ import annotations

import json
from functools import lru_cache
from typing import Mapping, Sequence

from sympy import isprime

from .errors import ValidationError
from .partitions import EMPTY, Partition, subpartitions


class GroupType(dict):
    """A finite abelian group as a mapping prime -> Partition.

    Only nonempty partitions are stored, so the trivial group is ``{}``.
    """

    def __init__(self, components: Mapping | None = None):
        super().__init__()
        for p, lam in (components or {}).items():
            p = int(p)
            if not isprime(p):
                raise ValidationError(f"{p} is not prime")
            lam = lam if isinstance(lam, Partition) else Partition.parse(lam) if isinstance(lam, str) else Partition(lam)
            if lam:
                self[p] = lam

    @classmethod
    def from_json(cls, data) -> "GroupType":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data)

    def to_json(self) -> dict:
        return {str(p): str(self[p]) for p in sorted(self)}

    @classmethod
    def cyclic(cls, m: int) -> "GroupType":
        """Z/m as a GroupType."""
        from sympy import factorint

        return cls({p: Partition((e,)) for p, e in factorint(m).items()})

    def part(self, p: int) -> Partition:
        return self.get(p, EMPTY)

    def order(self) -> int:
        out = 1
        for p, lam in self.items():
            out *= p ** lam.size
        return out

    def primes(self) -> set[int]:
        return set(self)

    def __hash__(self):
        return hash(tuple(sorted(self.items())))

    def __repr__(self):
        return f"GroupType({self.to_json()})"


def direct_sum(*lams: Partition) -> Partition:
    parts: list[int] = []
    for lam in lams:
        parts.extend(lam)
    return Partition(sorted(parts, reverse=True))


def gaussian_binomial(n: int, k: int, q: int) -> int:
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


@lru_cache(maxsize=None)
def aut_count(p: int, lam: Partition) -> int:
    """#Aut(G_lam) = p^{sum lam'_i^2} prod_i prod_{j<=m_i} (1 - p^{-j})."""
    lam = Partition(lam)
    conj = lam.conjugate()
    exponent = sum(x * x for x in conj)
    out = 1
    for m in lam.multiplicities().values():
        exponent -= m * (m + 1) // 2
        for j in range(1, m + 1):
            out *= p ** j - 1
    return out * p ** exponent


def hom_count(p: int, mu: Partition, lam: Partition) -> int:
    """#Hom(G_mu, G_lam) = p^{sum_i mu'_i lam'_i}."""
    a, b = Partition(mu).conjugate(), Partition(lam).conjugate()
    return p ** sum(x * y for x, y in zip(a, b))


@lru_cache(maxsize=None)
def subgroup_type_count(p: int, mu: Partition, lam: Partition) -> int:
    """Number of subgroups of G_lam isomorphic to G_mu.

    Closed form in Gaussian binomials over the columns of the diagrams:
    prod_i p^{mu'_{i+1}(lam'_i - mu'_i)} [lam'_i - mu'_{i+1} choose mu'_i - mu'_{i+1}]_p.
    """
    mu, lam = Partition(mu), Partition(lam)
    mc, lc = mu.conjugate(), lam.conjugate()
    if len(mc) > len(lc) or any(a > b for a, b in zip(mc, lc)):
        return 0
    out = 1
    for i in range(len(lc)):
        a = lc[i]
        b = mc[i] if i < len(mc) else 0
        b_next = mc[i + 1] if i + 1 < len(mc) else 0
        out *= p ** (b_next * (a - b)) * gaussian_binomial(a - b_next, b - b_next, p)
    return out


@lru_cache(maxsize=None)
def sur_count(p: int, lam: Partition, mu: Partition) -> int:
    """#Sur(G_lam, G_mu) by subtracting maps onto proper subgroups:

    #Sur(G_lam, G_mu) = #Hom(G_lam, G_mu) - sum_{nu != mu} |G_{nu,mu}| #Sur(G_lam, G_nu).
    """
    lam, mu = Partition(lam), Partition(mu)
    if len(mu) > len(lam) or any(b > a for a, b in zip(lam, mu)):
        return 0
    total = hom_count(p, lam, mu)
    for nu in subpartitions(mu):
        if nu == mu:
            continue
        c = subgroup_type_count(p, nu, mu)
        if c:
            total -= c * sur_count(p, lam, nu)
    return total


def inj_count(p: int, mu: Partition, lam: Partition) -> int:
    """#Inj(G_mu, G_lam), equal to #Sur(G_lam, G_mu) by duality."""
    return sur_count(p, lam, mu)


@lru_cache(maxsize=None)
def _nk_prime(p: int, lam: Partition, k: int) -> int:
    if k == 0:
        return 1 if not lam else 0
    if k == 1:
        return 1
    return sum(subgroup_type_count(p, mu, lam) * _nk_prime(p, mu, k - 1) for mu in subpartitions(lam))


def chain_count_nk_prime(p: int, lam: Partition, k: int) -> int:
    if k < 0:
        raise ValidationError("k must be >= 0")
    return _nk_prime(p, Partition(lam), k)


def chain_count_nk(G: GroupType, k: int) -> int:
    """Number of chains 0 = H_0 <= H_1 <= ... <= H_k = G."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    if k == 0:
        return 1 if not G else 0
    out = 1
    for p, lam in G.items():
        out *= _nk_prime(p, lam, k)
    return out


def joint_chain_count_mk(Gs: Sequence[GroupType], bound: int | None = None) -> int:
    """m_k(G_1, ..., G_k), by explicit enumeration per prime."""
    from .concrete import joint_chain_count_mk_prime

    if len(Gs) < 1:
        raise ValidationError("need at least one group")
    primes = set().union(*(G.primes() for G in Gs))
    out = 1
    for p in sorted(primes):
        out *= joint_chain_count_mk_prime(p, [G.part(p) for G in Gs], bound=bound)
    return out


def sur_count_groups(G: GroupType, H: GroupType) -> int:
    out = 1
    for p in set(G) | set(H):
        out *= sur_count(p, G.part(p), H.part(p))
    return out


def aut_count_group(G: GroupType) -> int:
    out = 1
    for p, lam in G.items():
        out *= aut_count(p, lam)
    return out
