"""Exact linear algebra over Z/p^L: Smith form valuations, cokernel chains, ranks.

Kernels are compiled with numba.  Over F_2 matrices are bit-packed into
uint64 words so products and ranks become XORs of rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import ValidationError
from .partitions import Partition


# ------------------------------------------------------------------ kernels

@numba.njit(cache=True)
def _inv_mod(a, m):
    # extended Euclid; a is a unit mod m
    r0, r1 = m, a % m
    s0, s1 = 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    return s0 % m


@numba.njit(cache=True)
def _snf_vals_inplace(A, p, L, out):
    """Valuations of the Smith form of A (n x n, entries in [0, p^L)), into out.

    Z/p^L is a chain ring, so an entry of minimal valuation divides its whole
    row and column.  Swap it to (s, s), clear column s below it with row
    operations and move on to the trailing block; row s needs no clearing
    since column operations there would not touch the trailing block.
    """
    n = A.shape[0]
    m = 1
    for _ in range(L):
        m *= p
    pow2 = p == 2
    mask = m - 1
    s = 0
    while s < n:
        best_v = L
        bi = -1
        bj = -1
        for i in range(s, n):
            for j in range(s, n):
                x = A[i, j]
                if x != 0:
                    v = 0
                    while x % p == 0:
                        x //= p
                        v += 1
                    if v < best_v:
                        best_v = v
                        bi = i
                        bj = j
                        if v == 0:
                            break
            if best_v == 0:
                break
        if bi < 0:
            break
        if bi != s:
            for c in range(s, n):
                tmp = A[s, c]
                A[s, c] = A[bi, c]
                A[bi, c] = tmp
        if bj != s:
            for r in range(s, n):
                tmp = A[r, s]
                A[r, s] = A[r, bj]
                A[r, bj] = tmp
        pv = 1
        for _ in range(best_v):
            pv *= p
        uinv = _inv_mod(A[s, s] // pv, m)
        for r in range(s + 1, n):
            x = A[r, s]
            if x != 0:
                f = ((x // pv) * uinv) % m
                if pow2:
                    for c in range(s + 1, n):
                        A[r, c] = (A[r, c] - f * A[s, c]) & mask
                else:
                    for c in range(s + 1, n):
                        A[r, c] = (A[r, c] - f * A[s, c]) % m
        out[s] = best_v
        s += 1
    while s < n:
        out[s] = L
        s += 1


@numba.njit(cache=True)
def _snf_batch(mats, p, L):
    S, n, _ = mats.shape
    out = np.zeros((S, n), dtype=np.int8)
    buf = np.empty(n, dtype=np.int64)
    for s in range(S):
        A = mats[s].copy()
        _snf_vals_inplace(A, p, L, buf)
        for i in range(n):
            out[s, i] = buf[i]
    return out


@numba.njit(cache=True)
def _matmul_mod(A, B, m):
    n = A.shape[0]
    C = np.zeros_like(A)
    for i in range(n):
        for k in range(n):
            a = A[i, k]
            if a != 0:
                for j in range(n):
                    C[i, j] += a * B[k, j]
        for j in range(n):
            C[i, j] %= m
    return C


@numba.njit(cache=True)
def _chain_snf_batch(mats, p, L):
    """mats (S, k, n, n) over Z/p^L -> Smith valuations of the partial products."""
    S, k, n, _ = mats.shape
    m = 1
    for _ in range(L):
        m *= p
    out = np.zeros((S, k, n), dtype=np.int8)
    buf = np.empty(n, dtype=np.int64)
    for s in range(S):
        P = mats[s, 0].copy()
        for j in range(k):
            if j > 0:
                P = _matmul_mod(P, mats[s, j], m)
            A = P.copy()
            _snf_vals_inplace(A, p, L, buf)
            for i in range(n):
                out[s, j, i] = buf[i]
    return out


@numba.njit(cache=True)
def _rank_mod_p(A, p):
    """Row-echelon rank over F_p; A is overwritten."""
    n, m = A.shape
    rank = 0
    for c in range(m):
        piv = -1
        for r in range(rank, n):
            if A[r, c] % p != 0:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for cc in range(m):
                tmp = A[rank, cc]
                A[rank, cc] = A[piv, cc]
                A[piv, cc] = tmp
        inv = _inv_mod(A[rank, c] % p, p)
        for r in range(rank + 1, n):
            x = A[r, c] % p
            if x != 0:
                f = (x * inv) % p
                for cc in range(c, m):
                    A[r, cc] = (A[r, cc] - f * A[rank, cc]) % p
        rank += 1
        if rank == n:
            break
    return rank


@numba.njit(cache=True)
def _rank_batch(mats, p):
    S = mats.shape[0]
    out = np.zeros(S, dtype=np.int64)
    for s in range(S):
        out[s] = _rank_mod_p(mats[s].copy(), p)
    return out


@numba.njit(cache=True)
def _f2_rank(rows, ncols):
    R = rows.copy()
    n, W = R.shape
    rank = 0
    for c in range(ncols):
        w = c >> 6
        bit = np.uint64(1) << np.uint64(c & 63)
        piv = -1
        for r in range(rank, n):
            if R[r, w] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for k in range(W):
                tmp = R[rank, k]
                R[rank, k] = R[piv, k]
                R[piv, k] = tmp
        for r in range(rank + 1, n):
            if R[r, w] & bit:
                for k in range(w, W):
                    R[r, k] ^= R[rank, k]
        rank += 1
        if rank == n:
            break
    return rank


@numba.njit(cache=True)
def _f2_mul(A, B, ncols):
    """Product over F_2 of packed n x n matrices: row i of AB is the XOR of the
    rows of B selected by the bits of row i of A."""
    n, W = A.shape
    C = np.zeros_like(B)
    for i in range(n):
        for c in range(ncols):
            if (A[i, c >> 6] >> np.uint64(c & 63)) & np.uint64(1):
                for k in range(W):
                    C[i, k] ^= B[c, k]
    return C


@numba.njit(cache=True)
def _f2_chain_ranks(packed, n):
    """packed: (S, k, n, W).  Returns ranks of the partial products, (S, k)."""
    S, k = packed.shape[0], packed.shape[1]
    out = np.zeros((S, k), dtype=np.int64)
    for s in range(S):
        P = packed[s, 0].copy()
        out[s, 0] = _f2_rank(P, n)
        for j in range(1, k):
            P = _f2_mul(P, packed[s, j], n)
            out[s, j] = _f2_rank(P, n)
    return out


# Bit-sliced Z/2^L: a matrix is (n, L, W) uint64, plane l of row i holds bit l
# of every entry of that row.  Row operations become ripple-carry word ops.

@numba.njit(cache=True)
def _bs_entry(R, r, c, L):
    w = c >> 6
    sh = np.uint64(c & 63)
    x = 0
    for l in range(L):
        x |= int((R[r, l, w] >> sh) & np.uint64(1)) << l
    return x


@numba.njit(cache=True, inline="always")
def _bs_addshift(D, d, S, r, e, L, W):
    """Row d of D += 2^e * row r of S (mod 2^L), rows stored as (L, W) planes."""
    for w in range(W):
        carry = np.uint64(0)
        for l in range(e, L):
            a = D[d, l, w]
            b = S[r, l - e, w]
            t = a ^ b
            D[d, l, w] = t ^ carry
            carry = (a & b) | (carry & t)


@numba.njit(cache=True, inline="always")
def _bs_addmul(D, d, S, r, g, L, W):
    for e in range(L):
        if (g >> e) & 1:
            _bs_addshift(D, d, S, r, e, L, W)


_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_DB_TABLE = np.zeros(64, dtype=np.int64)
for _i in range(64):
    _DB_TABLE[((1 << _i) * 0x03F79D71B4CB0A89 % 2 ** 64) >> 58] = _i


@numba.njit(cache=True, inline="always")
def _lowbit_index(x):
    return _DB_TABLE[((x & (~x + np.uint64(1))) * _DEBRUIJN) >> np.uint64(58)]


@numba.njit(cache=True)
def _bs_snf(R, n, L, out):
    """Smith valuations over Z/2^L of a bit-sliced matrix (overwritten)."""
    W = R.shape[2]
    m = 1 << L
    colmask = np.zeros(W, dtype=np.uint64)
    for c in range(n):
        colmask[c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    s = 0
    while s < n:
        # minimal valuation v: first plane with an active nonzero bit
        bi = -1
        bc = -1
        v = 0
        while v < L and bi < 0:
            for r in range(s, n):
                for w in range(W):
                    x = R[r, v, w] & colmask[w]
                    if x:
                        bi = r
                        bc = w * 64 + _lowbit_index(x)
                        break
                if bi >= 0:
                    break
            if bi < 0:
                v += 1
        if bi < 0:
            break
        if bi != s:
            for l in range(L):
                for w in range(W):
                    tmp = R[s, l, w]
                    R[s, l, w] = R[bi, l, w]
                    R[bi, l, w] = tmp
        uinv = _inv_mod(_bs_entry(R, s, bc, L) >> v, m)
        for r in range(s + 1, n):
            y = _bs_entry(R, r, bc, L)
            if y:
                f = ((y >> v) * uinv) % m
                _bs_addmul(R, r, R, s, (m - f) % m, L, W)
        colmask[bc >> 6] &= ~(np.uint64(1) << np.uint64(bc & 63))
        out[s] = v
        s += 1
    while s < n:
        out[s] = L
        s += 1


@numba.njit(cache=True)
def _bs_mul(A, B, n, L):
    """Product of bit-sliced matrices over Z/2^L: row i of AB = sum_c A[i,c] B[c]."""
    W = A.shape[2]
    C = np.zeros_like(A)
    for i in range(n):
        for l in range(L):
            for w in range(W):
                x = A[i, l, w]
                while x:
                    c = w * 64 + _lowbit_index(x)
                    x &= x - np.uint64(1)
                    _bs_addshift(C, i, B, c, l, L, W)
    return C


@numba.njit(cache=True)
def _bs_chain_vals(packed, n, L):
    """packed (S, k, n, L, W) -> Smith valuations (S, k, n) of the partial products."""
    S, k = packed.shape[0], packed.shape[1]
    out = np.zeros((S, k, n), dtype=np.int8)
    buf = np.empty(n, dtype=np.int64)
    for s in range(S):
        P = packed[s, 0].copy()
        for j in range(k):
            if j > 0:
                P = _bs_mul(P, packed[s, j], n, L)
            A = P.copy()
            _bs_snf(A, n, L, buf)
            for i in range(n):
                out[s, j, i] = buf[i]
    return out


# ------------------------------------------------------------------ helpers

def pack_f2(mats: np.ndarray) -> np.ndarray:
    """Pack (..., n, n) 0/1 arrays into (..., n, W) uint64 rows, bit c of row i = entry (i, c)."""
    mats = np.asarray(mats)
    n = mats.shape[-1]
    W = (n + 63) // 64
    pad = W * 64 - n
    bits = (mats & 1).astype(np.uint8)
    if pad:
        widths = [(0, 0)] * (bits.ndim - 1) + [(0, pad)]
        bits = np.pad(bits, widths)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64).reshape(mats.shape[:-1] + (W,))


def pack_bitsliced(mats: np.ndarray, L: int) -> np.ndarray:
    """(..., n, n) residues mod 2^L -> (..., n, L, W) uint64 bit planes."""
    mats = np.asarray(mats)
    planes = [pack_f2((mats >> l) & 1) for l in range(L)]
    return np.ascontiguousarray(np.stack(planes, axis=-2))


def batch_matmul_mod(A: np.ndarray, B: np.ndarray, m: int) -> np.ndarray:
    """(A @ B) mod m on stacked integer matrices, via float64 BLAS when exact."""
    n = A.shape[-1]
    if n * (m - 1) ** 2 < 2 ** 53:
        C = np.matmul(A.astype(np.float64), B.astype(np.float64))
        return np.remainder(C, m).astype(np.int64)
    return np.remainder(np.matmul(A.astype(object), B.astype(object)), m).astype(np.int64)


def _check_level(p: int, L: int) -> int:
    if L < 1:
        raise ValidationError("level L must be >= 1")
    m = p ** L
    if m >= 2 ** 31:
        raise ValidationError(f"modulus p^L = {m} too large for word arithmetic")
    return m


def vals_to_partition(vals: Sequence[int]) -> Partition:
    return Partition(sorted((int(v) for v in vals if v > 0), reverse=True))


def snf_vals_batch(mats: np.ndarray, p: int, L: int) -> np.ndarray:
    """Smith valuations of a stack (S, n, n); each row sorted nonincreasing."""
    _check_level(p, L)
    mats = np.ascontiguousarray(mats, dtype=np.int64)
    vals = _snf_batch(mats, p, L)
    return -np.sort(-vals, axis=1)


def rank_batch(mats: np.ndarray, p: int) -> np.ndarray:
    mats = np.ascontiguousarray(np.remainder(mats, p), dtype=np.int64)
    if p == 2:
        n = mats.shape[-1]
        packed = pack_f2(mats)
        return np.array([_f2_rank(packed[s], n) for s in range(len(packed))], dtype=np.int64)
    return _rank_batch(mats, p)


def chain_vals_batch(mats: np.ndarray, p: int, L: int) -> np.ndarray:
    """mats (S, k, n, n) mod p^L -> Smith valuations (S, k, n) of the partial products."""
    m = _check_level(p, L)
    S, k, n, _ = mats.shape
    if p == 2:
        vals = _bs_chain_vals(pack_bitsliced(np.remainder(mats, m), L), n, L)
        return -np.sort(-vals, axis=2)
    if m * m < 2 ** 62:
        vals = _chain_snf_batch(np.ascontiguousarray(np.remainder(mats, m), dtype=np.int64), p, L)
        return -np.sort(-vals, axis=2)
    out = np.empty((S, k, n), dtype=np.int8)
    P = np.remainder(mats[:, 0], m).astype(np.int64)
    out[:, 0] = snf_vals_batch(P, p, L)
    for j in range(1, k):
        P = batch_matmul_mod(P, mats[:, j], m)
        out[:, j] = snf_vals_batch(P, p, L)
    return out


def chain_ranks_batch(mats: np.ndarray, p: int) -> np.ndarray:
    """mats (S, k, n, n) -> ranks over F_p of the partial products, (S, k)."""
    S, k, n, _ = mats.shape
    red = np.remainder(mats, p)
    if p == 2:
        return _f2_chain_ranks(pack_f2(red), n)
    out = np.empty((S, k), dtype=np.int64)
    P = red[:, 0].astype(np.int64)
    out[:, 0] = _rank_batch(np.ascontiguousarray(P), p)
    for j in range(1, k):
        P = batch_matmul_mod(P, red[:, j], p)
        out[:, j] = _rank_batch(np.ascontiguousarray(P), p)
    return out


# --------------------------------------------------------------- public API

@dataclass(frozen=True)
class MatrixModPrimePower:
    """A square matrix over Z/p^L."""

    entries: np.ndarray
    p: int
    L: int

    def __post_init__(self):
        m = _check_level(self.p, self.L)
        a = np.asarray(self.entries, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"matrix must be square, got shape {a.shape}")
        a = np.remainder(a, m)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def modulus(self) -> int:
        return self.p ** self.L

    def _same_ring(self, other: "MatrixModPrimePower"):
        if (self.n, self.p, self.L) != (other.n, other.p, other.L):
            raise ValidationError("dimension or modulus mismatch")

    def __matmul__(self, other: "MatrixModPrimePower") -> "MatrixModPrimePower":
        self._same_ring(other)
        prod = batch_matmul_mod(self.entries[None], other.entries[None], self.modulus)[0]
        return MatrixModPrimePower(prod, self.p, self.L)

    def __eq__(self, other):
        return (
            isinstance(other, MatrixModPrimePower)
            and (self.p, self.L) == (other.p, other.L)
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash((self.p, self.L, self.entries.tobytes()))

    @classmethod
    def identity(cls, n: int, p: int, L: int) -> "MatrixModPrimePower":
        return cls(np.eye(n, dtype=np.int64), p, L)

    @classmethod
    def diag(cls, values: Sequence[int], p: int, L: int) -> "MatrixModPrimePower":
        return cls(np.diag(np.asarray(values, dtype=np.int64)), p, L)

    def to_json(self) -> dict:
        return {"p": self.p, "L": self.L, "rows": self.entries.tolist()}


def snf_type(M: MatrixModPrimePower) -> Partition:
    """Cokernel type of M over Z/p^L: nonzero Smith valuations, clamped at L."""
    return vals_to_partition(snf_vals_batch(M.entries[None], M.p, M.L)[0])


def cok_chain(Ms: Sequence[MatrixModPrimePower]) -> tuple[Partition, ...]:
    """Types of cok(M_1 ... M_j) mod p^L for j = 1..k."""
    if not Ms:
        raise ValidationError("need at least one matrix")
    first = Ms[0]
    for M in Ms[1:]:
        first._same_ring(M)
    stack = np.stack([M.entries for M in Ms])[None]
    vals = chain_vals_batch(stack, first.p, first.L)[0]
    return tuple(vals_to_partition(v) for v in vals)


def rank_fp(M, p: int | None = None) -> int:
    """Rank over F_p of a square matrix (entries reduced mod p first)."""
    if isinstance(M, MatrixModPrimePower):
        p, arr = M.p, M.entries
    else:
        if p is None:
            raise ValidationError("prime p required for a raw array")
        arr = np.asarray(M, dtype=np.int64)
    return int(rank_batch(arr[None], p)[0])
