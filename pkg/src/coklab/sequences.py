"""Sequences of surjections G_k ->> ... ->> G_1 between finite abelian p-groups,
their isomorphism classes, and the 1/#Aut measure on those classes.

A homomorphism G_mu -> G_lam is stored as a tuple of rows: row a lists the
a-th coordinate (mod p^{lam_a}) of the images of the generators of G_mu.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from typing import Iterator, Sequence

import numpy as np

from .bounded import Bounded, fraction_str
from .concrete import ConcreteGroup
from .errors import BoundExceeded, ValidationError, enum_bound
from .groups import aut_count, sur_count
from .limits import qinf
from .partitions import Partition

Hom = tuple  # tuple of rows, each a tuple of ints


# ------------------------------------------------------------ hom matrices

def _entry_choices(p: int, src: Partition, dst: Partition) -> list[list[range]]:
    """Allowed values for entry (a, j): multiples of p^{max(0, dst_a - src_j)} mod p^{dst_a}."""
    return [[range(0, p ** ea, p ** max(0, ea - ej)) for ej in src] for ea in dst]


def is_hom(p: int, src: Partition, dst: Partition, phi: Hom) -> bool:
    if len(phi) != len(dst) or any(len(row) != len(src) for row in phi):
        return False
    for a, ea in enumerate(dst):
        for j, ej in enumerate(src):
            x = phi[a][j]
            if not 0 <= x < p ** ea or x % p ** max(0, ea - ej):
                return False
    return True


def _rank_mod_p(rows: list[list[int]], p: int) -> int:
    A = [[x % p for x in r] for r in rows]
    rank, ncols = 0, len(A[0]) if A else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(A)) if A[i][c]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = pow(A[rank][c], -1, p)
        for i in range(len(A)):
            if i != rank and A[i][c]:
                f = A[i][c] * inv % p
                A[i] = [(x - f * y) % p for x, y in zip(A[i], A[rank])]
        rank += 1
    return rank


def is_surjective(p: int, phi: Hom, dst: Partition) -> bool:
    """A map of p-groups is onto iff it is onto after tensoring with F_p."""
    if not dst:
        return True
    return _rank_mod_p([list(r) for r in phi], p) == len(dst)


def compose(p: int, psi: Hom, phi: Hom, dst: Partition) -> Hom:
    """psi o phi, reduced in the target of psi (of type dst)."""
    ncols = len(phi[0]) if phi else 0
    return tuple(
        tuple(sum(psi[a][b] * phi[b][j] for b in range(len(phi))) % p ** ea for j in range(ncols))
        for a, ea in enumerate(dst)
    )


def _identity(lam: Partition) -> Hom:
    r = len(lam)
    return tuple(tuple(int(i == j) for j in range(r)) for i in range(r))


def homs(p: int, src: Partition, dst: Partition) -> Iterator[Hom]:
    choices = _entry_choices(p, src, dst)
    flat = [c for row in choices for c in row]
    ncols = len(src)
    for vals in iproduct(*flat):
        yield tuple(tuple(vals[a * ncols:(a + 1) * ncols]) for a in range(len(dst)))


def surjections(p: int, src: Partition, dst: Partition) -> Iterator[Hom]:
    if len(dst) > len(src) or any(d > s for d, s in zip(dst, src)):
        return
    for phi in homs(p, src, dst):
        if is_surjective(p, phi, dst):
            yield phi


@lru_cache(maxsize=None)
def automorphisms(p: int, lam: Partition) -> tuple:
    """Every automorphism of G_lam (bounded by the stabilizer limit)."""
    n = aut_count(p, lam)
    if n > enum_bound("stabilizer"):
        raise BoundExceeded(f"#Aut(G_{lam}) = {n} exceeds the stabilizer bound")
    return tuple(surjections(p, lam, lam))


def _unit_generators(p: int, e: int) -> list[int]:
    m = p ** e
    if p == 2:
        return [] if e == 1 else ([m - 1] if e == 2 else [m - 1, 5])
    g = next(g for g in range(2, p * p) if all(pow(g, (p - 1) * p // q, p * p) != 1 for q in _prime_divisors((p - 1) * p)))
    return [g % m] if m > 2 else []


def _prime_divisors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def aut_generators(p: int, lam: Partition) -> tuple:
    """(sigma, sigma^{-1}) pairs generating Aut(G_lam): elementary transvections
    and unit scalings of single coordinates."""
    r = len(lam)
    ident = [list(row) for row in _identity(lam)]
    gens = []
    for a in range(r):
        for j in range(r):
            if a == j:
                continue
            c = p ** max(0, lam[a] - lam[j])
            if c >= p ** lam[a]:
                continue
            fwd = [row[:] for row in ident]
            bwd = [row[:] for row in ident]
            fwd[a][j] = c % p ** lam[a]
            bwd[a][j] = -c % p ** lam[a]
            gens.append((tuple(map(tuple, fwd)), tuple(map(tuple, bwd))))
    for a in range(r):
        for u in _unit_generators(p, lam[a]):
            fwd = [row[:] for row in ident]
            bwd = [row[:] for row in ident]
            fwd[a][a] = u
            bwd[a][a] = pow(u, -1, p ** lam[a])
            gens.append((tuple(map(tuple, fwd)), tuple(map(tuple, bwd))))
    return tuple(gens)


def generated_group_size(p: int, lam: Partition, limit: int = 10**6) -> int:
    """Size of the group generated by aut_generators (for checking them)."""
    lam = Partition(lam)
    start = _identity(lam)
    seen = {start}
    queue = deque([start])
    gens = [g for g, _ in aut_generators(p, lam)]
    while queue:
        x = queue.popleft()
        for g in gens:
            y = compose(p, g, x, lam)
            if y not in seen:
                seen.add(y)
                if len(seen) > limit:
                    raise BoundExceeded("generated group exceeds limit")
                queue.append(y)
    return len(seen)


# ------------------------------------------------------------------ chains

def _parse_types(types) -> tuple:
    if isinstance(types, str):
        types = [t for t in types.split(";")]
    return tuple(Partition.parse(t) if isinstance(t, str) else Partition(t) for t in types)


@dataclass(frozen=True)
class SurjectionChain:
    """types = (lam_k, ..., lam_1); maps = (phi_{k-1}, ..., phi_1), phi_i: G_{i+1} ->> G_i."""

    p: int
    types: tuple
    maps: tuple

    def __post_init__(self):
        types = _parse_types(self.types)
        object.__setattr__(self, "types", types)
        maps = tuple(tuple(tuple(int(x) for x in row) for row in phi) for phi in self.maps)
        object.__setattr__(self, "maps", maps)
        if len(maps) != len(types) - 1:
            raise ValidationError(f"{len(types)} groups need {len(types) - 1} maps")
        for phi, src, dst in zip(maps, types, types[1:]):
            reduced = tuple(tuple(x % self.p ** ea for x in row) for row, ea in zip(phi, dst))
            if not is_hom(self.p, src, dst, reduced) or reduced != phi:
                raise ValidationError(f"map {phi} is not a reduced homomorphism G_{src} -> G_{dst}")
            if not is_surjective(self.p, phi, dst):
                raise ValidationError(f"map {phi} is not surjective onto G_{dst}")

    @property
    def k(self) -> int:
        return len(self.types)

    def to_json(self) -> dict:
        return {"p": self.p, "types": [str(t) for t in self.types], "maps": [[list(r) for r in phi] for phi in self.maps]}

    @classmethod
    def from_json(cls, data) -> "SurjectionChain":
        return cls(int(data["p"]), tuple(Partition.parse(t) for t in data["types"]), tuple(data["maps"]))


def chain_count(p: int, types) -> int:
    types = _parse_types(types)
    out = 1
    for src, dst in zip(types, types[1:]):
        out *= sur_count(p, src, dst)
    return out


def enumerate_chains(p: int, types, bound: int | None = None) -> Iterator[SurjectionChain]:
    """Every tuple of surjections, in lexicographic order of the map entries."""
    types = _parse_types(types)
    bound = enum_bound("chains") if bound is None else bound
    total = chain_count(p, types)
    if total > bound:
        raise BoundExceeded(f"{total} chains exceed the enumeration bound {bound}")
    pools = [list(surjections(p, src, dst)) for src, dst in zip(types, types[1:])]
    for maps in iproduct(*pools):
        yield SurjectionChain.__new__(SurjectionChain)._init_fast(p, types, maps)


def _init_fast(self, p, types, maps):
    object.__setattr__(self, "p", p)
    object.__setattr__(self, "types", types)
    object.__setattr__(self, "maps", tuple(maps))
    return self


SurjectionChain._init_fast = _init_fast


def _neighbours(p: int, types: tuple, maps: tuple) -> Iterator[tuple]:
    """Images of a chain under each generator of each Aut(G_i)."""
    k = len(types)
    for i in range(k):
        lam = types[i]
        for fwd, bwd in aut_generators(p, lam):
            new = list(maps)
            # maps[i] starts at G (index i) and maps[i-1] ends at G
            if i < k - 1:
                new[i] = compose(p, maps[i], bwd, types[i + 1])
            if i > 0:
                new[i - 1] = compose(p, fwd, maps[i - 1], lam)
            yield tuple(new)


def orbit(chain: SurjectionChain) -> set:
    start = chain.maps
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in _neighbours(chain.p, chain.types, x):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def chains_isomorphic(S: SurjectionChain, T: SurjectionChain) -> bool:
    """Is there a ladder of automorphisms sigma_i with sigma_i phi_i = psi_i sigma_{i+1}?"""
    if S.p != T.p or S.types != T.types:
        raise ValidationError("chains of different prime or group types")
    if S.maps == T.maps:
        return True
    return T.maps in orbit(S)


def stabilizer_count(chain: SurjectionChain) -> int:
    """#{(sigma_k, ..., sigma_1) : sigma_i phi_i = phi_i sigma_{i+1}} by direct search."""
    p, types = chain.p, chain.types
    total = 1
    for lam in types:
        total *= aut_count(p, lam)
    if total > enum_bound("stabilizer"):
        raise BoundExceeded(f"prod #Aut = {total} exceeds the stabilizer bound")
    auts = [automorphisms(p, lam) for lam in types]

    def extend(i: int, prev) -> int:
        # prev is sigma for types[i-1]; choose sigma_i compatible with maps[i-1]
        if i == len(types):
            return 1
        count = 0
        for s in auts[i]:
            if i > 0:
                phi = chain.maps[i - 1]
                if compose(p, s, phi, types[i]) != compose(p, phi, prev, types[i]):
                    continue
            count += extend(i + 1, s)
        return count

    return extend(0, None)


@dataclass
class SeqClass:
    representative: SurjectionChain
    size: int
    aut_count: int
    stabilizer_direct: int | None = None

    def measure(self, k: int | None = None) -> Bounded:
        return seq_measure(self, self.representative.p, k)

    def to_json(self) -> dict:
        m = self.measure()
        return {
            "size": self.size,
            "aut_count": self.aut_count,
            "measure": float(m.value),
            "error_bound": float(m.error_bound),
            "representative": self.representative.to_json(),
        }


def classify(p: int, types, bound: int | None = None, direct_stabilizers: bool = True) -> list[SeqClass]:
    """All isomorphism classes, in order of their first chain in enumeration order.

    Automorphism counts come from orbit-stabilizer; when prod #Aut is within
    the stabilizer bound they are also counted directly.
    """
    types = _parse_types(types)
    aut_prod = 1
    for lam in types:
        aut_prod *= aut_count(p, lam)
    chains = list(enumerate_chains(p, types, bound))
    seen: set = set()
    out = []
    direct = direct_stabilizers and aut_prod <= enum_bound("stabilizer")
    for ch in chains:
        if ch.maps in seen:
            continue
        orb = orbit(ch)
        seen |= orb
        if aut_prod % len(orb):
            raise ArithmeticError(f"orbit size {len(orb)} does not divide prod #Aut = {aut_prod}")
        cls = SeqClass(ch, len(orb), aut_prod // len(orb))
        if direct:
            cls.stabilizer_direct = stabilizer_count(ch)
        out.append(cls)
    return out


def seq_measure(cls: SeqClass, p: int, k: int | None = None, tol: float = 1e-30) -> Bounded:
    """(1/p; 1/p)_inf^k / #Aut of the class."""
    k = cls.representative.k if k is None else k
    return qinf(p, tol) ** k * Fraction(1, cls.aut_count)


@dataclass
class MarginalVerdict:
    lhs: Fraction
    rhs: Fraction

    @property
    def ok(self) -> bool:
        return self.lhs == self.rhs

    def to_json(self) -> dict:
        return {"lhs": fraction_str(self.lhs), "rhs": fraction_str(self.rhs), "pass": self.ok}


def marginal_check(p: int, types, bound: int | None = None) -> MarginalVerdict:
    """sum over classes of 1/#Aut against prod_i #Sur(G_{i+1}, G_i) / prod_i #Aut(G_i)."""
    types = _parse_types(types)
    classes = classify(p, types, bound, direct_stabilizers=False)
    lhs = sum((Fraction(1, c.aut_count) for c in classes), Fraction(0))
    rhs = Fraction(chain_count(p, types))
    for lam in types:
        rhs /= aut_count(p, lam)
    return MarginalVerdict(lhs, rhs)


# --------------------------------------------------- kernel invariants

def _kernel_codes(G: ConcreteGroup, H: ConcreteGroup, phi: Hom) -> np.ndarray:
    acc = np.zeros((G.order, H.rank), dtype=np.int64)
    for a in range(H.rank):
        for j in range(G.rank):
            acc[:, a] += G.coords[:, j] * phi[a][j]
    return np.flatnonzero(H.encode(acc) == 0)


def subset_type(G: ConcreteGroup, codes: np.ndarray) -> Partition:
    """Type of the subgroup with the given element codes, from its p^j-torsion sizes."""
    p = G.p
    sizes = []
    j = 1
    elems = G.coords[codes]
    while True:
        killed = int((G.encode(elems * p ** j) == 0).sum())
        sizes.append(killed)
        if killed == len(codes):
            break
        j += 1
    conj, prev = [], 1
    for s in sizes:
        r, q = 0, s // prev
        while q > 1:
            q //= p
            r += 1
        conj.append(r)
        prev = s
    return Partition(conj).conjugate() if conj and conj[0] else Partition()


def kernel_invariants(chain: SurjectionChain, i: int = 0) -> dict:
    """For phi = maps[i]: G ->> H, the kernel type and how p ker phi meets p^2 G."""
    p = chain.p
    G = ConcreteGroup.of_type(p, chain.types[i], bound=10**6)
    H = ConcreteGroup.of_type(p, chain.types[i + 1], bound=10**6)
    ker = _kernel_codes(G, H, chain.maps[i])
    p_ker = set(G.scale_codes(ker, p).tolist())
    p2G = set(G.scale_codes(np.arange(G.order), p * p).tolist())
    return {
        "kernel_type": str(subset_type(G, ker)),
        "p_ker_size": len(p_ker),
        "p2G_size": len(p2G),
        "p_ker_cap_p2G_size": len(p_ker & p2G),
        "p_ker_equals_p2G": p_ker == p2G,
    }
