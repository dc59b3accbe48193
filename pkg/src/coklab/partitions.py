"""Integer partitions: the index set for abelian p-group types and
Hall-Littlewood polynomials."""

from __future__ import annotations

from typing import Iterable, Iterator


class Partition(tuple):
    """A weakly decreasing tuple of positive integers.

    Trailing zeros are stripped on construction, so ``Partition((2, 1, 0))``
    equals ``Partition((2, 1))``.  The empty partition prints as ``[]``.
    """

    def __new__(cls, parts: Iterable[int] = ()):
        parts = tuple(int(x) for x in parts)
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        for a, b in zip(parts, parts[1:]):
            if a < b:
                raise ValueError(f"parts must be nonincreasing: {parts}")
        if parts and parts[-1] < 0:
            raise ValueError(f"parts must be positive: {parts}")
        return super().__new__(cls, parts)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        text = text.strip()
        if text in ("", "[]", "0"):
            return cls()
        text = text.strip("[]()")
        return cls(int(x) for x in text.split(",") if x.strip())

    def __str__(self) -> str:
        return ",".join(map(str, self)) if self else "[]"

    def __repr__(self) -> str:
        return f"Partition({tuple(self)!r})"

    @property
    def size(self) -> int:
        return sum(self)

    @property
    def length(self) -> int:
        return len(self)

    def part(self, i: int) -> int:
        """The i-th part (1-based), zero past the end."""
        return self[i - 1] if 1 <= i <= len(self) else 0

    def conjugate(self) -> "Partition":
        if not self:
            return self
        return Partition(sum(1 for x in self if x >= i) for i in range(1, self[0] + 1))

    def multiplicity(self, i: int) -> int:
        return sum(1 for x in self if x == i)

    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for x in self:
            out[x] = out.get(x, 0) + 1
        return out

    def n(self) -> int:
        """The weighted sum sum_i (i-1) * lambda_i."""
        return sum(i * x for i, x in enumerate(self))

    def contains(self, other: "Partition") -> bool:
        """True when the diagram of ``other`` sits inside this one."""
        return len(other) <= len(self) and all(b <= a for a, b in zip(self, other))

    def clamp(self, level: int) -> "Partition":
        return Partition(min(x, level) for x in self)


EMPTY = Partition()


def conjugate(lam: Partition) -> Partition:
    return Partition(lam).conjugate()


def interlaces(mu: Partition, lam: Partition) -> bool:
    """mu < lam in the interlacing order: lam_1 >= mu_1 >= lam_2 >= mu_2 >= ..."""
    if len(mu) > len(lam) or len(lam) > len(mu) + 1:
        return False
    for i in range(len(lam)):
        m = mu[i] if i < len(mu) else 0
        nxt = lam[i + 1] if i + 1 < len(lam) else 0
        if not lam[i] >= m >= nxt:
            return False
    return True


def partitions_of(n: int, max_part: int | None = None, max_len: int | None = None) -> Iterator[Partition]:
    """Partitions of n in decreasing lexicographic order."""
    if max_part is None:
        max_part = n
    if max_len is None:
        max_len = n

    def rec(remaining: int, cap: int, slots: int, prefix: tuple):
        if remaining == 0:
            yield Partition(prefix)
            return
        if slots == 0:
            return
        for first in range(min(cap, remaining), 0, -1):
            if first * slots < remaining:
                break
            yield from rec(remaining - first, first, slots - 1, prefix + (first,))

    yield from rec(n, max_part, max_len, ())


def partitions_bounded(max_size: int, max_part: int, max_len: int) -> Iterator[Partition]:
    """Every partition with |lam| <= max_size, parts <= max_part and at most
    max_len parts, graded by size and decreasing lexicographic within a size."""
    for n in range(max_size + 1):
        yield from partitions_of(n, max_part, max_len)


def subpartitions(lam: Partition, lower: Partition = EMPTY) -> Iterator[Partition]:
    """All nu with lower <= nu <= lam (diagram containment)."""
    lam = Partition(lam)

    def rec(i: int, cap: int, prefix: tuple):
        if i == len(lam):
            yield Partition(prefix)
            return
        lo = lower[i] if i < len(lower) else 0
        for x in range(lo, min(cap, lam[i]) + 1):
            yield from rec(i + 1, x, prefix + (x,))

    if not lam.contains(lower):
        return
    yield from rec(0, lam[0] if lam else 0, ())


def horizontal_strips_below(lam: Partition, lower: Partition = EMPTY) -> Iterator[Partition]:
    """All mu with mu < lam (interlacing) and mu containing ``lower``."""
    lam = Partition(lam)

    def rec(i: int, prefix: tuple):
        if i == len(lam):
            yield Partition(prefix)
            return
        nxt = lam[i + 1] if i + 1 < len(lam) else 0
        lo = max(nxt, lower[i] if i < len(lower) else 0)
        for x in range(lam[i], lo - 1, -1):
            yield from rec(i + 1, prefix + (x,))

    yield from rec(0, ())
