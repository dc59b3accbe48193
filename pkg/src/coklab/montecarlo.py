"""Seeded simulation of random matrix products, exhaustive oracles, moments,
and comparison against theory tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy

from . import __version__
from .bounded import fraction_str
from .errors import BoundExceeded, ConfigMismatch, DegenerateDistribution, LevelTooSmall, ValidationError, enum_bound
from .groups import GroupType, chain_count_nk, joint_chain_count_mk, sur_count
from .limits import TheoryTable, key_from_json, key_to_json
from .matrices import chain_ranks_batch, chain_vals_batch, rank_batch, snf_vals_batch
from .partitions import EMPTY, Partition

SIM_MODES = ("cok_joint", "corank")

# Samples drawn per kernel call inside a chunk.  Part of the sampling
# contract: changing it changes the random streams.
_BATCH = 1000


# ------------------------------------------------------------- entry laws

def _weight(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class EntryDistribution:
    """Law of one matrix entry as exact weights on Z/a."""

    modulus: int
    weights: tuple  # ((residue, Fraction), ...) sorted by residue, zero weights dropped
    name: str = "custom"

    def __post_init__(self):
        if self.modulus < 1:
            raise ValidationError("modulus must be >= 1")
        total = sum((w for _, w in self.weights), Fraction(0))
        if any(w < 0 for _, w in self.weights):
            raise ValidationError("weights must be nonnegative")
        if total != 1:
            raise ValidationError(f"weights sum to {total}, not 1")

    @classmethod
    def from_weights(cls, modulus: int, weights: Mapping, name: str = "custom") -> "EntryDistribution":
        acc: dict[int, Fraction] = {}
        for r, w in weights.items():
            w = _weight(w)
            if w:
                r = int(r) % modulus
                acc[r] = acc.get(r, Fraction(0)) + w
        return cls(int(modulus), tuple(sorted(acc.items())), name)

    @classmethod
    def lifted(cls, base_modulus: int, weights: Mapping, modulus: int) -> "EntryDistribution":
        """Weights on Z/m spread uniformly over their preimages in Z/a (m | a)."""
        if modulus % base_modulus:
            raise ValidationError(f"base modulus {base_modulus} does not divide {modulus}")
        reps = modulus // base_modulus
        lifted = {}
        for r, w in weights.items():
            w = _weight(w) / reps
            for j in range(reps):
                lifted[int(r) % base_modulus + j * base_modulus] = w
        return cls.from_weights(modulus, lifted, "lifted")

    @classmethod
    def uniform(cls, modulus: int) -> "EntryDistribution":
        return cls.from_weights(modulus, {r: Fraction(1, modulus) for r in range(modulus)}, "uniform")

    @classmethod
    def bernoulli01(cls, q, modulus: int) -> "EntryDistribution":
        q = _weight(q)
        return cls.from_weights(modulus, {0: 1 - q, 1: q}, f"bernoulli01({q})")

    @classmethod
    def signed(cls, pm, p0, pp, modulus: int) -> "EntryDistribution":
        return cls.from_weights(modulus, {-1: _weight(pm), 0: _weight(p0), 1: _weight(pp)}, "signed")

    @classmethod
    def from_json(cls, data: Mapping, modulus: int) -> "EntryDistribution":
        """Accepts {"preset": "uniform"}, {"preset": "bernoulli01", "q": ...},
        {"preset": "signed", "probs": [P(-1), P(0), P(1)]} or
        {"weights": {residue: w}, "base_modulus": m}."""
        preset = data.get("preset")
        if preset == "uniform":
            return cls.uniform(modulus)
        if preset == "bernoulli01":
            return cls.bernoulli01(_parse_weight(data["q"]), modulus)
        if preset == "signed":
            pm, p0, pp = (_parse_weight(x) for x in data["probs"])
            return cls.signed(pm, p0, pp, modulus)
        if preset is not None:
            raise ValidationError(f"unknown entry preset {preset!r}")
        if "weights" not in data:
            raise ValidationError("entry spec needs a preset or a weights table")
        weights = {int(r): _parse_weight(w) for r, w in data["weights"].items()}
        base = int(data.get("base_modulus", modulus))
        if base == modulus:
            return cls.from_weights(modulus, weights)
        return cls.lifted(base, weights, modulus)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "modulus": self.modulus,
            "weights": {str(r): fraction_str(w) for r, w in self.weights},
        }

    def reduce(self, m: int) -> "EntryDistribution":
        """Push-forward to Z/m for m dividing the modulus."""
        if self.modulus % m:
            raise ValidationError(f"{m} does not divide modulus {self.modulus}")
        return EntryDistribution.from_weights(m, _accumulate((r % m, w) for r, w in self.weights), self.name)

    def residue_probs(self, m: int) -> dict[int, Fraction]:
        return dict(self.reduce(m).weights)

    # -- sampling

    def _table(self):
        den = math.lcm(*(w.denominator for _, w in self.weights))
        residues = np.array([r for r, _ in self.weights], dtype=np.int64)
        nums = np.array([int(w * den) for _, w in self.weights], dtype=object)
        return den, residues, nums

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        """iid residues in [0, a), exact in law.

        A uniform integer u in [0, D) (D the common weight denominator; numpy
        draws it without modulo bias) is mapped through the inverse CDF.
        """
        den, residues, nums = self._table()
        out_dtype = np.uint8 if self.modulus <= 256 else np.int64
        if den <= 1 << 16:
            table = np.repeat(residues, [int(x) for x in nums]).astype(out_dtype)
            draw_dtype = np.uint8 if den <= 256 else np.uint16
            u = rng.integers(0, den, size=shape, dtype=draw_dtype)
            return table[u]
        if den > 1 << 64:
            raise ValidationError(f"weight denominator {den} exceeds 2^64; round the weights")
        cum = np.cumsum(np.array([int(x) for x in nums], dtype=np.uint64))
        u = rng.integers(0, den, size=shape, dtype=np.uint64, endpoint=False)
        idx = np.searchsorted(cum, u, side="right")
        return residues[idx].astype(out_dtype)


def _parse_weight(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x.strip())
    return _weight(x)


def _accumulate(pairs: Iterable) -> dict:
    acc: dict = {}
    for r, w in pairs:
        acc[r] = acc.get(r, Fraction(0)) + w
    return acc


def validate_alpha(spec: EntryDistribution, primes: Iterable[int] | None = None) -> dict[int, Fraction]:
    """alpha_p = 1 - max_r P(xi = r mod p) for each prime p (default: primes of the modulus)."""
    if primes is None:
        primes = sympy.primefactors(spec.modulus)
    out = {}
    for p in sorted(set(int(q) for q in primes)):
        probs = spec.residue_probs(p)
        r, top = max(probs.items(), key=lambda kv: (kv[1], -kv[0]))
        if top == 1:
            raise DegenerateDistribution(p, r)
        out[p] = 1 - top
    return out


# ----------------------------------------------------------------- configs

@dataclass
class SimConfig:
    n: int
    k: int
    levels: dict  # prime -> L_p
    samples: int
    seed: int
    entry: EntryDistribution | None = None
    mode: str = "cok_joint"
    chunk: int = 10_000
    workers: int = 1

    def __post_init__(self):
        self.levels = {int(p): int(L) for p, L in dict(self.levels).items()}
        if self.n < 1 or self.k < 1 or self.samples < 1:
            raise ValidationError("need n >= 1, k >= 1 and samples >= 1")
        if self.chunk < 1 or self.workers < 1:
            raise ValidationError("chunk and workers must be >= 1")
        if not self.levels:
            raise ValidationError("levels must name at least one prime")
        for p, L in self.levels.items():
            if not sympy.isprime(p) or L < 1:
                raise ValidationError(f"bad level {p}: {L}")
        if self.mode not in SIM_MODES:
            raise ValidationError(f"mode must be one of {SIM_MODES}")
        if self.mode == "corank" and len(self.levels) != 1:
            raise ValidationError("corank mode takes a single prime")
        if self.entry is None:
            self.entry = EntryDistribution.uniform(self.modulus)
        elif self.entry.modulus != self.modulus:
            if self.entry.modulus % self.modulus == 0:
                self.entry = self.entry.reduce(self.modulus)
            else:
                raise ValidationError(f"entry modulus {self.entry.modulus} is not a multiple of {self.modulus}")

    @property
    def primes(self) -> list[int]:
        return sorted(self.levels)

    @property
    def modulus(self) -> int:
        return math.prod(p ** L for p, L in self.levels.items())

    def law_json(self) -> dict:
        """The fields that determine the sampled law (not the sample size or seed)."""
        return {
            "n": self.n,
            "k": self.k,
            "levels": {str(p): self.levels[p] for p in self.primes},
            "mode": self.mode,
            "entry": self.entry.to_json(),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.law_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        out = self.law_json()
        out.update(samples=self.samples, seed=self.seed, chunk=self.chunk, workers=self.workers)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "SimConfig":
        levels = {int(p): int(L) for p, L in data["levels"].items()}
        modulus = math.prod(p ** L for p, L in levels.items())
        entry_data = data.get("entry", {"preset": "uniform"})
        if "modulus" in entry_data and "preset" not in entry_data:
            entry = EntryDistribution.from_weights(
                int(entry_data["modulus"]), {int(r): _parse_weight(w) for r, w in entry_data["weights"].items()},
                entry_data.get("name", "custom"))
        else:
            entry = EntryDistribution.from_json(entry_data, modulus)
        return cls(
            n=int(data["n"]), k=int(data["k"]), levels=levels, samples=int(data["samples"]),
            seed=int(data["seed"]), entry=entry, mode=data.get("mode", "cok_joint"),
            chunk=int(data.get("chunk", 10_000)), workers=int(data.get("workers", 1)),
        )


# --------------------------------------------------------- distributions

@dataclass
class EmpiricalJointDistribution:
    """Counts of observed keys.

    cok_joint keys: one entry per step j, each a tuple over the primes (in
    increasing order) of truncated partitions.  corank keys: (r_1, ..., r_k).
    """

    mode: str
    primes: tuple
    levels: dict
    k: int
    n: int
    counts: Counter
    total: int
    config_hash: str
    seed: int | None = None

    def frequencies(self) -> dict:
        return {key: c / self.total for key, c in self.counts.items()}

    def merge(self, other: "EmpiricalJointDistribution") -> "EmpiricalJointDistribution":
        if self.config_hash != other.config_hash:
            raise ConfigMismatch(f"cannot merge runs with config hashes {self.config_hash} and {other.config_hash}")
        return EmpiricalJointDistribution(
            self.mode, self.primes, self.levels, self.k, self.n,
            self.counts + other.counts, self.total + other.total, self.config_hash,
            self.seed if self.seed == other.seed else None,
        )

    def to_json(self) -> dict:
        return {
            "kind": "empirical",
            "mode": self.mode,
            "primes": list(self.primes),
            "levels": {str(p): L for p, L in self.levels.items()},
            "k": self.k,
            "n": self.n,
            "total": self.total,
            "cells": [{"key": key_to_json(self.mode, key), "count": int(c)} for key, c in sorted(self.counts.items())],
            "provenance": {"tool": "coklab", "version": __version__, "config_hash": self.config_hash, "seed": self.seed},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "EmpiricalJointDistribution":
        mode = data["mode"]
        counts = Counter({key_from_json(mode, c["key"]): int(c["count"]) for c in data["cells"]})
        prov = data.get("provenance", {})
        return cls(mode, tuple(data["primes"]), {int(p): L for p, L in data["levels"].items()}, data["k"], data["n"],
                   counts, int(data["total"]), prov.get("config_hash", ""), prov.get("seed"))


@dataclass
class ExactJointDistribution:
    """Exact law of the same keys, from full enumeration."""

    mode: str
    p: int
    L: int
    k: int
    n: int
    probs: dict

    @property
    def primes(self) -> tuple:
        return (self.p,)

    @property
    def levels(self) -> dict:
        return {self.p: self.L}

    total = None

    def frequencies(self) -> dict:
        return dict(self.probs)

    def marginal(self, steps: Sequence[int]) -> dict:
        out: dict = {}
        for key, w in self.probs.items():
            sub = tuple(key[j] for j in steps)
            out[sub] = out.get(sub, Fraction(0)) + w
        return out

    def to_json(self) -> dict:
        return {
            "kind": "exact",
            "mode": self.mode,
            "p": self.p,
            "L": self.L,
            "k": self.k,
            "n": self.n,
            "cells": [{"key": key_to_json(self.mode, key), "prob": fraction_str(w)} for key, w in sorted(self.probs.items())],
        }


# -------------------------------------------------------------- simulation

def _rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunk_counts(cfg: SimConfig, chunk: int, size: int) -> Counter:
    rng = _rng(cfg.seed, chunk)
    counts: Counter = Counter()
    done = 0
    while done < size:
        b = min(_BATCH, size - done)
        mats = cfg.entry.sample(rng, (b, cfg.k, cfg.n, cfg.n))
        counts.update(_observe(cfg, mats))
        done += b
    return counts


def _observe(cfg: SimConfig, mats: np.ndarray) -> Counter:
    """Keys of a batch (S, k, n, n) of residues mod a."""
    if cfg.mode == "corank":
        p = cfg.primes[0]
        ranks = chain_ranks_batch(mats, p)
        prev = np.concatenate([np.full((ranks.shape[0], 1), cfg.n), ranks[:, :-1]], axis=1)
        pats = (prev - ranks).astype(np.int64)
        rows, cnt = np.unique(pats, axis=0, return_counts=True)
        return Counter({tuple(int(x) for x in r): int(c) for r, c in zip(rows, cnt)})
    blocks = []
    for p in cfg.primes:
        L = cfg.levels[p]
        m = p ** L
        red = mats & (m - 1) if p == 2 and mats.dtype == np.uint8 else np.remainder(mats, m)
        blocks.append(chain_vals_batch(red, p, L))  # (S, k, n)
    allv = np.stack(blocks, axis=2)  # (S, k, P, n)
    S = allv.shape[0]
    rows, cnt = np.unique(allv.reshape(S, -1), axis=0, return_counts=True)
    out = Counter()
    shape = allv.shape[1:]
    for r, c in zip(rows, cnt):
        r = r.reshape(shape)
        key = tuple(tuple(Partition(int(v) for v in r[j, i] if v > 0) for i in range(shape[1])) for j in range(shape[0]))
        out[key] += int(c)
    return out


def _chunk_job(args):
    cfg_json, chunk, size = args
    return _chunk_counts(SimConfig.from_json(cfg_json), chunk, size)


def _chunks(cfg: SimConfig) -> list[tuple[int, int]]:
    full, rest = divmod(cfg.samples, cfg.chunk)
    out = [(c, cfg.chunk) for c in range(full)]
    if rest:
        out.append((full, rest))
    return out


def simulate_joint(cfg: SimConfig) -> EmpiricalJointDistribution:
    """Draw cfg.samples k-tuples of matrices and count cokernel or corank keys.

    Chunk c always uses the stream seeded by (seed, c), so the result depends
    on (seed, chunk) but not on the number of workers.
    """
    validate_alpha(cfg.entry, cfg.primes)
    jobs = _chunks(cfg)
    total: Counter = Counter()
    if cfg.workers == 1 or len(jobs) == 1:
        for c, size in jobs:
            total.update(_chunk_counts(cfg, c, size))
    else:
        payload = cfg.to_json()
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_chunk_job, [(payload, c, size) for c, size in jobs]):
                total.update(part)
    return EmpiricalJointDistribution(
        cfg.mode, tuple(cfg.primes), dict(cfg.levels), cfg.k, cfg.n, total, cfg.samples, cfg.config_hash(), cfg.seed
    )


# -------------------------------------------------------------- exhaustive

def exhaustive_joint(n: int, p: int, k: int, spec: EntryDistribution | None = None, L: int = 1,
                     mode: str = "corank", bound: int | None = None) -> ExactJointDistribution:
    """Exact joint law by running over every k-tuple of n x n matrices mod p^L."""
    if mode not in SIM_MODES:
        raise ValidationError(f"mode must be one of {SIM_MODES}")
    if n < 1 or k < 1 or L < 1 or not sympy.isprime(p):
        raise ValidationError("need n, k, L >= 1 and p prime")
    m = p ** L
    bound = enum_bound("exhaustive") if bound is None else bound
    if m ** (k * n * n) > bound:
        raise BoundExceeded(f"{m}^{k * n * n} matrix tuples exceed the exhaustive bound {bound}")
    spec = EntryDistribution.uniform(m) if spec is None else spec
    validate_alpha(spec, [p])
    probs = spec.residue_probs(m)
    support = sorted(probs)
    mats = np.array(list(iproduct(support, repeat=n * n)), dtype=np.int64).reshape(-1, n, n)
    weights = [math.prod((probs[int(x)] for x in M.ravel()), start=Fraction(1)) for M in mats]

    def keys_of(prods: np.ndarray) -> list:
        if mode == "corank":
            return [int(n - r) for r in rank_batch(prods, p)]
        return [Partition(int(v) for v in row if v > 0) for row in snf_vals_batch(prods, p, L)]

    def code(M: np.ndarray) -> bytes:
        return M.astype(np.int64).tobytes()

    # state: product matrix -> {key prefix: weight}; corank prefixes carry the running total
    states: dict = {}
    first = keys_of(mats)
    for M, w, key in zip(mats, weights, first):
        entry = states.setdefault(code(M), (M, {}))[1]
        pre = ((key,), key) if mode == "corank" else ((key,),)
        entry[pre] = entry.get(pre, Fraction(0)) + w
    for _ in range(1, k):
        nxt: dict = {}
        for P, prefixes in states.values():
            prods = np.einsum("ab,sbc->sac", P, mats) % m
            ks = keys_of(prods)
            for Q, w, key in zip(prods, weights, ks):
                entry = nxt.setdefault(code(Q), (Q, {}))[1]
                for pre, pw in prefixes.items():
                    if mode == "corank":
                        new = (pre[0] + (key - pre[1],), key)
                    else:
                        new = (pre[0] + (key,),)
                    entry[new] = entry.get(new, Fraction(0)) + pw * w
        states = nxt
    out: dict = {}
    for _, prefixes in states.values():
        for pre, w in prefixes.items():
            key = pre[0] if mode == "corank" else tuple((lam,) for lam in pre[0])
            out[key] = out.get(key, Fraction(0)) + w
    return ExactJointDistribution(mode, p, L, k, n, out)


# ----------------------------------------------------------------- moments

@dataclass
class MomentEstimate:
    targets: tuple  # k GroupTypes
    mean: object  # Fraction when exact
    stderr: float
    samples: int | None
    limit: int | None = None

    @property
    def exact(self) -> bool:
        return self.samples is None

    def to_json(self) -> dict:
        out = {
            "targets": [G.to_json() for G in self.targets],
            "samples": self.samples,
            "limit": self.limit,
        }
        if self.exact:
            out.update(mean=fraction_str(self.mean), error_bound=0.0, stderr=0.0)
        else:
            out.update(mean=float(self.mean), stderr=float(self.stderr), error_bound=float(self.stderr))
        return out


def _check_levels(levels: Mapping[int, int], targets: Sequence[GroupType]) -> None:
    for G in targets:
        for p, lam in G.items():
            need = lam.part(1)
            have = levels.get(p, 0)
            if have < need:
                raise LevelTooSmall(p, need, have)


def _moment_value(key, primes: Sequence[int], targets: Sequence[GroupType]) -> int:
    out = 1
    for j, G in enumerate(targets):
        for i, p in enumerate(primes):
            mu = G.part(p)
            if mu:
                out *= sur_count(p, key[j][i], mu)
                if not out:
                    return 0
    return out


def _limit_value(targets: Sequence[GroupType]) -> int | None:
    k = len(targets)
    try:
        if all(not G for G in targets[:-1]):
            return chain_count_nk(targets[-1], k)
        return joint_chain_count_mk(targets)
    except BoundExceeded:
        return None


def estimate_moments(cfg: SimConfig, target_sets: Sequence[Sequence[GroupType]], exhaustive: bool = False,
                     emp: EmpiricalJointDistribution | None = None) -> list[MomentEstimate]:
    """Mean and standard error of prod_j #Sur(cok(M_1...M_j), G_j) for each target tuple.

    With ``exhaustive`` the expectation is exact (single prime only).  A
    previously simulated cok_joint run can be passed as ``emp``.
    """
    target_sets = [tuple(GroupType(G) for G in ts) for ts in target_sets]
    for ts in target_sets:
        if len(ts) != cfg.k:
            raise ValidationError(f"each target tuple needs k = {cfg.k} groups")
        _check_levels(cfg.levels, ts)
    primes = cfg.primes
    if exhaustive:
        if len(primes) != 1:
            raise ValidationError("exhaustive moments take a single prime")
        p = primes[0]
        dist = exhaustive_joint(cfg.n, p, cfg.k, cfg.entry, cfg.levels[p], mode="cok_joint")
        out = []
        for ts in target_sets:
            mean = sum((w * _moment_value(key, primes, ts) for key, w in dist.probs.items()), Fraction(0))
            out.append(MomentEstimate(ts, mean, 0.0, None, _limit_value(ts)))
        return out
    if emp is None:
        if cfg.mode != "cok_joint":
            cfg = SimConfig(**{**cfg.__dict__, "mode": "cok_joint"})
        emp = simulate_joint(cfg)
    elif emp.mode != "cok_joint" or tuple(emp.primes) != tuple(primes):
        raise ConfigMismatch("moments need a cok_joint run over the configured primes")
    out = []
    N = emp.total
    for ts in target_sets:
        s1 = s2 = 0
        for key, c in emp.counts.items():
            v = _moment_value(key, primes, ts)
            s1 += c * v
            s2 += c * v * v
        mean = Fraction(s1, N)
        var = (Fraction(s2, N) - mean ** 2) * Fraction(N, max(N - 1, 1))
        out.append(MomentEstimate(ts, float(mean), math.sqrt(float(var) / N), N, _limit_value(ts)))
    return out


# ----------------------------------------------------------------- compare

@dataclass
class Thresholds:
    tv: float = 0.01
    z: float = 5.0


@dataclass
class CellRow:
    key: tuple
    theory: float
    bound: float
    freq: float
    stderr: float
    z: float


@dataclass
class CompareReport:
    mode: str
    rows: list
    tv: float
    tv_interior: float
    overflow_theory: float
    overflow_emp: float
    max_abs_z: float
    thresholds: Thresholds
    samples: int | None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.tv <= self.thresholds.tv and self.max_abs_z <= self.thresholds.z)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "samples": self.samples,
            "tv": self.tv,
            "tv_interior": self.tv_interior,
            "overflow": {"theory": self.overflow_theory, "empirical": self.overflow_emp},
            "max_abs_z": self.max_abs_z,
            "thresholds": {"tv": self.thresholds.tv, "z": self.thresholds.z},
            "pass": self.passed,
            "cells": [
                {"key": key_to_json(self.mode, r.key), "theory": r.theory, "error_bound": r.bound,
                 "freq": r.freq, "stderr": r.stderr, "z": r.z}
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["key", "theory", "error_bound", "freq", "stderr", "z"])
        for r in self.rows:
            w.writerow([flat_key(self.mode, r.key), repr(r.theory), repr(r.bound), repr(r.freq), repr(r.stderr), repr(r.z)])
        w.writerow(["overflow", repr(self.overflow_theory), "", repr(self.overflow_emp), "", ""])
        return buf.getvalue()


def flat_key(mode: str, key) -> str:
    """Semicolon-joined key for CSV: one field per step (per-prime parts joined by '|')."""
    if mode == "corank":
        return ";".join(str(r) for r in key)
    return ";".join("|".join(str(lam) for lam in step) for step in key)


def _project(emp, table: TheoryTable) -> dict:
    freqs = emp.frequencies()
    if table.mode == "cok_single":
        out: dict = {}
        for key, f in freqs.items():
            sub = (key[-1],)
            out[sub] = out.get(sub, 0) + f
        return out
    return freqs


def compare(emp, table: TheoryTable, thresholds: Thresholds | None = None) -> CompareReport:
    """Cellwise z-scores and total variation (interior cells plus overflow bucket).

    The standard error of a cell is the binomial one under the theory value,
    sqrt(theta (1 - theta) / N); z divides by max(stderr, theory bound).
    """
    thresholds = thresholds or Thresholds()
    want_mode = "cok_joint" if table.mode == "cok_single" else table.mode
    if emp.mode != want_mode:
        raise ConfigMismatch(f"empirical mode {emp.mode} does not match theory mode {table.mode}")
    if tuple(emp.primes) != (table.p,) or emp.levels.get(table.p) != table.L:
        if not (table.mode == "corank" and tuple(emp.primes) == (table.p,)):
            raise ConfigMismatch(f"empirical run at {emp.levels} does not match theory p={table.p}, L={table.L}")
    if emp.k != table.k:
        raise ConfigMismatch(f"empirical k={emp.k} does not match theory k={table.k}")
    freqs = {key: float(f) for key, f in _project(emp, table).items()}
    N = emp.total
    rows = []
    interior = 0.0
    inside = 0.0
    zmax = 0.0
    for key, th in table.cells.items():
        th = float(th)
        bd = float(table.bounds.get(key, 0))
        f = freqs.get(key, 0.0)
        se = math.sqrt(th * (1 - th) / N) if N else 0.0
        denom = max(se, bd)
        diff = f - th
        z = diff / denom if denom > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        zmax = max(zmax, abs(z))
        interior += abs(diff)
        inside += f
        rows.append(CellRow(key, th, bd, f, se, z))
    over_th = float(table.overflow)
    over_emp = max(0.0, 1.0 - inside)
    tv_int = interior / 2
    tv = min(1.0, (interior + abs(over_emp - over_th)) / 2)
    return CompareReport(table.mode, rows, tv, min(1.0, tv_int), over_th, over_emp, zmax, thresholds, N)


def tv_between(a, b, interior: Iterable | None = None) -> float:
    """Total variation between two laws; keys outside ``interior`` share one bucket."""
    fa, fb = a.frequencies(), b.frequencies()
    if interior is None:
        keys = set(fa) | set(fb)
        return sum(abs(float(fa.get(x, 0)) - float(fb.get(x, 0))) for x in keys) / 2
    interior = set(interior)
    s = 0.0
    ia = ib = 0.0
    for x in interior:
        va, vb = float(fa.get(x, 0)), float(fb.get(x, 0))
        s += abs(va - vb)
        ia += va
        ib += vb
    return (s + abs((1 - ia) - (1 - ib))) / 2
