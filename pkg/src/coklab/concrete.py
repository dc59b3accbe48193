"""Concrete finite abelian p-groups and brute-force enumeration over them.

Elements of Z/p^{e_1} + ... + Z/p^{e_r} are coded as integers in mixed
radix.  Subgroups are membership bitmasks over the element codes (Python ints),
so translating a subgroup by an element is a handful of shifts and masks.

Everything here is an oracle for the closed forms in ``groups``: nothing in
this module calls them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from .errors import BoundExceeded, enum_bound
from .partitions import Partition


class ConcreteGroup:
    """Z/p^{e_1} + ... + Z/p^{e_r} with explicit element arithmetic."""

    def __init__(self, p: int, exponents: Sequence[int], bound: int | None = None):
        self.p = int(p)
        self.exponents = tuple(int(e) for e in exponents if e > 0)
        self.moduli = tuple(self.p ** e for e in self.exponents)
        self.order = int(np.prod(self.moduli, dtype=object)) if self.moduli else 1
        limit = enum_bound("order") if bound is None else bound
        if self.order > limit:
            raise BoundExceeded(f"group of order {self.order} at p={self.p} exceeds enumeration bound {limit}")
        # mixed radix: the last coordinate varies fastest
        self._radix = np.ones(len(self.moduli), dtype=np.int64)
        for i in range(len(self.moduli) - 2, -1, -1):
            self._radix[i] = self._radix[i + 1] * self.moduli[i + 1]
        self.coords = self._all_coords()

    @classmethod
    def of_type(cls, p: int, lam: Partition, bound: int | None = None) -> "ConcreteGroup":
        return cls(p, tuple(lam), bound=bound)

    def _all_coords(self) -> np.ndarray:
        if not self.moduli:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*[np.arange(m) for m in self.moduli], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def encode(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64)
        if not self.moduli:
            return np.zeros(c.shape[:-1], dtype=np.int64)
        c = c % np.array(self.moduli, dtype=np.int64)
        return c @ self._radix

    def element(self, code: int) -> tuple:
        return tuple(int(x) for x in self.coords[code])

    @property
    def rank(self) -> int:
        return len(self.exponents)

    def type(self) -> Partition:
        return Partition(sorted(self.exponents, reverse=True))

    def add_codes(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.encode(self.coords[a] + self.coords[b])

    def scale_codes(self, a: np.ndarray, m: int) -> np.ndarray:
        return self.encode(self.coords[a] * m)

    def translation(self, g: int) -> np.ndarray:
        """Index array t with t[x] = code(x - g); row[t] is the translate row + g."""
        return self.encode(self.coords - self.coords[g])

    def killed_by(self, m: int) -> np.ndarray:
        """Membership row of the elements x with m*x = 0."""
        return self.scale_codes(np.arange(self.order), m) == 0

    def __repr__(self):
        return f"ConcreteGroup(p={self.p}, exponents={self.exponents})"


def mask_to_row(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def row_to_mask(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row.astype(bool), bitorder="little").tobytes(), "little")


def masks_to_rows(masks: Sequence[int], n: int) -> np.ndarray:
    if not len(masks):
        return np.zeros((0, n), dtype=bool)
    width = (n + 7) // 8
    raw = np.frombuffer(b"".join(m.to_bytes(width, "little") for m in masks), dtype=np.uint8)
    return np.unpackbits(raw.reshape(len(masks), width), axis=1, bitorder="little")[:, :n].astype(bool)


class _MaskOps:
    """Bit-level arithmetic on subsets of G encoded as Python ints (bit x = element x)."""

    def __init__(self, G: ConcreteGroup):
        self.G = G
        n = G.order
        codes = np.arange(n)
        # digit shift tables: adding c to coordinate i
        self.shift = {}
        for i, m in enumerate(G.moduli):
            r = int(G._radix[i])
            digit = G.coords[:, i]
            for c in range(1, m):
                low = row_to_mask(digit < m - c)
                high = row_to_mask(digit >= m - c)
                self.shift[i, c] = (low, c * r, high, (m - c) * r)
        self.mult_p = G.scale_codes(codes, G.p).tolist()
        # composition series G = M_0 > M_1 > ... > M_n = 0, each of index p
        flag = [row_to_mask(np.ones(n, dtype=bool))]
        for i, e in enumerate(G.exponents):
            earlier = np.all(G.coords[:, :i] == 0, axis=1)
            for s in range(1, e + 1):
                flag.append(row_to_mask(earlier & (G.coords[:, i] % G.p ** s == 0)))
        self.flag = flag

    def translate(self, mask: int, g: int) -> int:
        for i, c in enumerate(self.G.coords[g]):
            if c:
                low, up, high, down = self.shift[i, int(c)]
                mask = ((mask & low) << up) | ((mask & high) >> down)
        return mask


def subgroup_masks(G: ConcreteGroup) -> list[int]:
    """Every subgroup of G as a membership bitmask, each exactly once.

    With a fixed composition series G = M_0 > ... > M_n = 0, a subgroup K != 0
    has the canonical index-p parent K & M_j, where j is the first index with
    K not inside M_j.  Conversely K = H + <g> for g in M_{j-1} - M_j with
    p*g in H.  Growing each subgroup only through its canonical parent visits
    every subgroup once; g runs over coset representatives of H.
    """
    ops = _MaskOps(G)
    p, flag, mult_p = G.p, ops.flag, ops.mult_p
    out = [1]
    queue = [(1, len(flag) - 1)]
    while queue:
        H, depth = queue.pop()
        for j in range(1, depth + 1):
            cand = flag[j - 1] & ~flag[j]
            while cand:
                g = (cand & -cand).bit_length() - 1
                coset = ops.translate(H, g)
                if (H >> mult_p[g]) & 1:
                    K, cur = H | coset, coset
                    for _ in range(p - 2):
                        cur = ops.translate(cur, g)
                        K |= cur
                    out.append(K)
                    queue.append((K, j - 1))
                    cand &= ~K
                else:
                    cand &= ~coset
    return out


def subgroup_levels(G: ConcreteGroup) -> list[np.ndarray]:
    """All subgroups as membership rows, grouped by order: levels[m] has order p^m."""
    by_order: dict[int, list[int]] = {}
    for K in subgroup_masks(G):
        by_order.setdefault(K.bit_count(), []).append(K)
    total = sum(G.exponents)
    return [masks_to_rows(sorted(by_order.get(G.p ** m, [])), G.order) for m in range(total + 1)]


def mask_types(G: ConcreteGroup, masks: Sequence[int]) -> list[Partition]:
    """Isomorphism type of each subgroup mask, from the sizes |H[p^j]|."""
    emax = max(G.exponents, default=0)
    killed = [row_to_mask(G.killed_by(G.p ** j)) for j in range(1, emax + 1)]
    logs = {G.p ** a: a for a in range(sum(G.exponents) + 1)}
    out = []
    for H in masks:
        prev, conj = 0, []
        for km in killed:
            cur = logs[(H & km).bit_count()]
            conj.append(cur - prev)
            prev = cur
        out.append(Partition(conj).conjugate() if prev else Partition())
    return out


def row_types(G: ConcreteGroup, rows: np.ndarray) -> list[Partition]:
    """Isomorphism type of each subgroup row, read off from |H[p^j]|."""
    emax = max(G.exponents, default=0)
    if emax == 0:
        return [Partition()] * len(rows)
    counts = [np.ones(len(rows), dtype=np.int64)]
    for j in range(1, emax + 1):
        counts.append(rows[:, G.killed_by(G.p ** j)].sum(axis=1))
    out = []
    logs = [np.rint(np.log(c) / np.log(G.p)).astype(int) for c in counts]
    for r in range(len(rows)):
        conj = [int(logs[j][r] - logs[j - 1][r]) for j in range(1, emax + 1)]
        out.append(Partition(conj).conjugate() if any(conj) else Partition())
    return out


@dataclass
class Census:
    group: ConcreteGroup
    n_subgroups: int
    subgroup_counts: dict[Partition, int]
    aut_count: int
    aut_method: str
    sur_counts: dict[Partition, int] = field(default_factory=dict)
    subgroups: list[frozenset] | None = None

    def to_json(self, verbose: bool = False) -> dict:
        out = {
            "p": self.group.p,
            "type": str(self.group.type()),
            "order": self.group.order,
            "n_subgroups": self.n_subgroups,
            "subgroup_counts": {str(k): v for k, v in sorted(self.subgroup_counts.items())},
            "aut_count": self.aut_count,
            "aut_method": self.aut_method,
            "sur_counts": {str(k): v for k, v in sorted(self.sur_counts.items())},
        }
        if verbose and self.subgroups is not None:
            out["subgroups"] = [sorted(G_el for G_el in s) for s in self.subgroups]
        return out


@lru_cache(maxsize=None)
def _lattice_counts(p: int, lam: Partition, bound: int) -> tuple[int, tuple]:
    G = ConcreteGroup.of_type(p, lam, bound=bound)
    masks = subgroup_masks(G)
    counts: dict[Partition, int] = {}
    for t in mask_types(G, masks):
        counts[t] = counts.get(t, 0) + 1
    return len(masks), tuple(sorted(counts.items()))


def brute_subgroup_counts(p: int, lam: Partition, bound: int | None = None) -> dict[Partition, int]:
    bound = enum_bound("order") if bound is None else bound
    return dict(_lattice_counts(p, Partition(lam), bound)[1])


def brute_hom_count(G: ConcreteGroup, H: ConcreteGroup) -> int:
    """#Hom(G, H): each generator of G may go to any element of H it kills."""
    out = 1
    for m in G.moduli:
        out *= int(H.killed_by(m).sum())
    return out


@lru_cache(maxsize=None)
def _brute_sur(p: int, lam: Partition, mu: Partition, bound: int) -> int:
    """#Sur(G_lam, G_mu) = #Hom - sum over proper subgroups K of G_mu of #Sur(G_lam, K)."""
    G = ConcreteGroup.of_type(p, lam, bound=bound)
    H = ConcreteGroup.of_type(p, mu, bound=bound)
    total = brute_hom_count(G, H)
    for t, c in _lattice_counts(p, mu, bound)[1]:
        if t != mu:
            total -= c * _brute_sur(p, lam, t, bound)
    return total


def brute_sur_count(p: int, lam: Partition, mu: Partition, bound: int | None = None) -> int:
    bound = enum_bound("order") if bound is None else bound
    return _brute_sur(p, Partition(lam), Partition(mu), bound)


def hom_images(G: ConcreteGroup, H: ConcreteGroup, images: Sequence[int]) -> np.ndarray:
    """Codes in H of the images of every element of G under the hom sending
    the i-th generator of G to ``images[i]``."""
    acc = np.zeros((G.order, H.rank), dtype=np.int64)
    for i, g in enumerate(images):
        acc += G.coords[:, i : i + 1] * H.coords[g][None, :]
    return H.encode(acc)


def exhaustive_sur_count(G: ConcreteGroup, H: ConcreteGroup, limit: int = 50_000) -> int:
    """#Sur(G, H) by checking every assignment of generator images."""
    choices = [np.flatnonzero(H.killed_by(m)) for m in G.moduli]
    n_cand = int(np.prod([len(c) for c in choices], dtype=object)) if choices else 1
    if n_cand > limit:
        raise BoundExceeded(f"{n_cand} candidate homomorphisms exceed limit {limit}")
    count = 0
    for imgs in product(*choices):
        if len(np.unique(hom_images(G, H, imgs))) == H.order:
            count += 1
    return count


def brute_census(
    G: ConcreteGroup,
    targets: Sequence[Partition] = (),
    keep_subgroups: bool = False,
    exhaustive_limit: int = 20_000,
) -> Census:
    """Subgroup lattice census of G with #Aut(G) and #Sur(G, target)."""
    lam = G.type()
    masks = subgroup_masks(G)
    counts: dict[Partition, int] = {}
    for t in mask_types(G, masks):
        counts[t] = counts.get(t, 0) + 1
    subgroups = None
    if keep_subgroups:
        subgroups = [frozenset(np.flatnonzero(mask_to_row(m, G.order)).tolist()) for m in masks]
    try:
        aut = exhaustive_sur_count(G, G, limit=exhaustive_limit)
        method = "exhaustive"
    except BoundExceeded:
        aut = brute_sur_count(G.p, lam, lam, bound=max(G.order, enum_bound("order")))
        method = "lattice"
    surs = {Partition(t): brute_sur_count(G.p, lam, Partition(t), bound=max(G.order, enum_bound("order"))) for t in targets}
    return Census(
        group=G,
        n_subgroups=len(masks),
        subgroup_counts=counts,
        aut_count=aut,
        aut_method=method,
        sur_counts=surs,
        subgroups=subgroups,
    )


@lru_cache(maxsize=None)
def _brute_chains(p: int, lam: Partition, k: int, bound: int) -> int:
    if k == 0:
        return 1 if not lam else 0
    if k == 1:
        return 1
    return sum(c * _brute_chains(p, t, k - 1, bound) for t, c in _lattice_counts(p, lam, bound)[1])


def brute_chain_count(p: int, lam: Partition, k: int, bound: int | None = None) -> int:
    """n_k(G_lam) summed over the enumerated lattice: n_k(G) = sum_{H <= G} n_{k-1}(H)."""
    bound = enum_bound("order") if bound is None else bound
    return _brute_chains(p, Partition(lam), k, bound)


def _projection_rows(S: ConcreteGroup, rows: np.ndarray, block: slice, T: ConcreteGroup) -> np.ndarray:
    """Membership rows in T of the images of subgroups of S under projection
    onto the coordinates ``block``."""
    target = T.encode(S.coords[:, block]) if T.rank else np.zeros(S.order, dtype=np.int64)
    onehot = np.zeros((S.order, T.order), dtype=np.float64)
    onehot[np.arange(S.order), target] = 1.0
    return (rows.astype(np.float64) @ onehot) > 0


def joint_chain_count_mk_prime(p: int, lams: Sequence[Partition], bound: int | None = None) -> int:
    """m_k(G_1, ..., G_k) for p-groups, following the definition.

    Counts sequences (H_1, ..., H_k) with H_k = G_k and, for i < k,
    H_i <= G_i + ... + G_k, pi_i(H_i) = G_i and pi_{>i}(H_i) <= H_{i+1}.
    """
    lams = [Partition(l) for l in lams]
    k = len(lams)
    limit = enum_bound("order") if bound is None else bound
    total = sum(l.size for l in lams)
    if p ** total > limit:
        raise BoundExceeded(f"m_k enumeration at p={p}: order p^{total} = {p ** total} exceeds bound {limit}")
    if k == 1:
        return 1
    sums = [ConcreteGroup(p, [e for l in lams[i:] for e in l], bound=limit) for i in range(k)]
    # weights[j] aligns with cand[j]: subgroups H of S_i with full first projection
    # and weight = number of ways to continue the sequence from H.
    later_rows = None
    later_weights = None
    for i in range(k - 2, -1, -1):
        S, rest = sums[i], sums[i + 1]
        Gi = ConcreteGroup.of_type(p, lams[i], bound=limit)
        first = slice(0, len(lams[i]))
        tail = slice(len(lams[i]), None)
        rows = np.concatenate(subgroup_levels(S))
        full = _projection_rows(S, rows, first, Gi).sum(axis=1) == Gi.order
        rows = rows[full]
        proj = _projection_rows(S, rows, tail, rest)
        if later_rows is None:
            # H_k = G_k contains every projection
            weights = np.ones(len(rows), dtype=object)
        else:
            # H_{i+1} must contain pi_{>i}(H_i)
            missing = proj.astype(np.float64) @ (~later_rows).astype(np.float64).T
            contains = missing == 0
            weights = np.array([sum(later_weights[contains[r]]) for r in range(len(rows))], dtype=object)
        later_rows, later_weights = rows, weights
    return int(sum(later_weights))


def subgroups_with_full_projection(p: int, M: Partition, N: Partition, bound: int | None = None) -> list[Partition]:
    """Types of the subgroups H <= G_M + G_N with pi_1(H) = G_M, one entry per subgroup."""
    limit = enum_bound("order") if bound is None else bound
    S = ConcreteGroup(p, list(M) + list(N), bound=limit)
    Gm = ConcreteGroup.of_type(p, M, bound=limit)
    rows = np.concatenate(subgroup_levels(S))
    full = _projection_rows(S, rows, slice(0, len(M)), Gm).sum(axis=1) == Gm.order
    return row_types(S, rows[full])
