import json
import math
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest

from coklab.errors import ConfigMismatch, DegenerateDistribution, LevelTooSmall, ValidationError, BoundExceeded
from coklab.groups import GroupType
from coklab.limits import theory_table
from coklab.montecarlo import (
    EmpiricalJointDistribution, EntryDistribution as ED, ExactJointDistribution, SimConfig, Thresholds, _chunk_counts,
    compare, estimate_moments, exhaustive_joint, flat_key, simulate_joint, tv_between, validate_alpha,
)
from coklab.partitions import EMPTY, Partition

P = Partition
E1 = P((1,))


# ------------------------------------------------------------ entry laws

def test_validate_alpha_examples():
    assert validate_alpha(ED.uniform(2)) == {2: F(1, 2)}
    assert validate_alpha(ED.bernoulli01(F(1, 10), 2)) == {2: F(1, 10)}
    with pytest.raises(DegenerateDistribution) as info:
        validate_alpha(ED.from_weights(2, {0: 1}))
    assert info.value.prime == 2 and info.value.residue == 0


def test_alpha_multi_prime():
    # 0 or 6 mod 12: balanced at 2? no (both even); at 3? no (both 0 mod 3)
    with pytest.raises(DegenerateDistribution):
        validate_alpha(ED.from_weights(12, {0: F(1, 2), 6: F(1, 2)}))
    a = validate_alpha(ED.from_weights(12, {0: F(1, 2), 3: F(1, 4), 4: F(1, 4)}))
    assert a == {2: F(1, 4), 3: F(1, 4)}


def test_entry_constructors():
    s = ED.signed(F(1, 4), F(1, 2), F(1, 4), 4)
    assert dict(s.weights) == {0: F(1, 2), 1: F(1, 4), 3: F(1, 4)}
    lifted = ED.lifted(2, {0: F(9, 10), 1: F(1, 10)}, 8)
    assert lifted.residue_probs(2) == {0: F(9, 10), 1: F(1, 10)}
    assert lifted.residue_probs(8)[5] == F(1, 40)
    with pytest.raises(ValidationError):
        ED.from_weights(4, {0: F(1, 2)})
    with pytest.raises(ValidationError):
        ED.lifted(3, {0: 1}, 8)
    back = ED.from_json({"weights": {"0": "9/10", "1": "1/10"}, "base_modulus": 2}, 4)
    assert back.residue_probs(2) == {0: F(9, 10), 1: F(1, 10)}
    assert ED.from_json({"preset": "bernoulli01", "q": "1/10"}, 2) == ED.bernoulli01(F(1, 10), 2)


@pytest.mark.parametrize("law", [ED.uniform(8), ED.bernoulli01(F(1, 10), 2), ED.signed(F(1, 3), F(1, 3), F(1, 3), 9),
                                 ED.from_weights(5, {0: F(1, 7), 2: F(2, 7), 4: F(4, 7)}),
                                 ED.from_weights(3, {0: F(1, 100003), 1: F(100002, 100003)})])
def test_sampler_matches_weights(law):
    rng = np.random.default_rng(5)
    N = 400_000
    x = law.sample(rng, (N,)).astype(np.int64)
    got = Counter(x.tolist())
    for r, w in law.weights:
        se = math.sqrt(float(w) * (1 - float(w)) / N)
        assert abs(got[r] / N - float(w)) <= 5 * se + 1e-12
    assert set(got) <= {r for r, _ in law.weights}


# ----------------------------------------------------------- exhaustive

def test_exhaustive_examples():
    assert exhaustive_joint(1, 2, 2).probs == {(0, 0): F(1, 4), (0, 1): F(1, 4), (1, 0): F(1, 2)}
    assert exhaustive_joint(1, 2, 1).probs == {(0,): F(1, 2), (1,): F(1, 2)}
    assert exhaustive_joint(2, 2, 1).probs == {(0,): F(6, 16), (1,): F(9, 16), (2,): F(1, 16)}


def test_exhaustive_bound():
    with pytest.raises(BoundExceeded):
        exhaustive_joint(3, 2, 3, bound=1000)


def test_exhaustive_level_two_marginal():
    d = exhaustive_joint(2, 2, 2, L=2, mode="cok_joint")
    assert sum(d.probs.values()) == 1
    coranks: dict = {}
    for key, w in d.marginal([0]).items():
        r = len(key[0][0])
        coranks[r] = coranks.get(r, 0) + w
    assert coranks == {0: F(6, 16), 1: F(9, 16), 2: F(1, 16)}
    # monotone chains only
    assert all(key[1][0].contains(key[0][0]) for key in d.probs)


def test_exhaustive_brute_force_nonuniform():
    # direct sum over all 1x1 pairs of a skewed law mod 3
    law = ED.from_weights(3, {0: F(1, 2), 1: F(1, 3), 2: F(1, 6)})
    d = exhaustive_joint(1, 3, 2, law)
    z = F(1, 2)
    assert d.probs == {(1, 0): z, (0, 1): (1 - z) * z, (0, 0): (1 - z) ** 2}


# ------------------------------------------------------------ simulation

def cfg(**kw):
    base = dict(n=1, k=1, levels={2: 1}, samples=4, seed=1)
    base.update(kw)
    return SimConfig(**base)


def test_four_sample_contract():
    emp = simulate_joint(cfg())
    assert emp.total == 4 and sum(emp.counts.values()) == 4
    assert set(emp.counts) <= {((EMPTY,),), ((E1,),)}


def test_bernoulli_half():
    emp = simulate_joint(cfg(samples=1_000_000, chunk=250_000, seed=3))
    f = emp.counts[((E1,),)] / emp.total
    assert abs(f - 0.5) <= 3 * 0.0005


def test_replay_is_identical():
    c = cfg(n=6, k=2, levels={2: 2}, samples=5000, seed=42, chunk=1000)
    assert simulate_joint(c).counts == simulate_joint(c).counts
    assert simulate_joint(c).counts != simulate_joint(cfg(n=6, k=2, levels={2: 2}, samples=5000, seed=43, chunk=1000)).counts


@pytest.mark.parametrize("mode", ["corank", "cok_joint"])
def test_worker_count_independent(mode):
    results = [
        simulate_joint(cfg(n=8, k=2, levels={3: 1} if mode == "corank" else {2: 2, 3: 1}, samples=6000, seed=9,
                           chunk=700, workers=w, mode=mode)).counts
        for w in (1, 2, 8)
    ]
    assert results[0] == results[1] == results[2]


def test_chunk_partitions_merge_associatively():
    c = cfg(n=5, k=2, levels={2: 2}, samples=4000, seed=11, chunk=500)
    whole = simulate_joint(c).counts
    parts = [_chunk_counts(c, i, 500) for i in range(8)]
    rnd = np.random.default_rng(0)
    for _ in range(5):
        order = rnd.permutation(8)
        cuts = sorted(rnd.choice(range(1, 8), size=3, replace=False))
        groups = np.split(order, cuts)
        merged = Counter()
        for g in groups:
            sub = Counter()
            for i in g:
                sub.update(parts[i])
            merged.update(sub)
        assert merged == whole


def test_merge_and_hash():
    a = simulate_joint(cfg(n=3, k=2, samples=100, seed=1))
    b = simulate_joint(cfg(n=3, k=2, samples=50, seed=2))
    m = a.merge(b)
    assert m.total == 150 and m.counts == a.counts + b.counts and m.seed is None
    other = simulate_joint(cfg(n=4, k=2, samples=50, seed=2))
    with pytest.raises(ConfigMismatch):
        a.merge(other)
    back = EmpiricalJointDistribution.from_json(json.loads(json.dumps(m.to_json())))
    assert back.counts == m.counts and back.config_hash == m.config_hash


def test_config_validation_and_json():
    with pytest.raises(ValidationError):
        cfg(n=0)
    with pytest.raises(ValidationError):
        cfg(levels={4: 1})
    with pytest.raises(ValidationError):
        cfg(mode="corank", levels={2: 1, 3: 1})
    with pytest.raises(DegenerateDistribution):
        simulate_joint(cfg(entry=ED.from_weights(2, {1: 1})))
    c = cfg(n=3, k=2, levels={2: 2}, entry=ED.bernoulli01(F(1, 10), 4), samples=10, seed=5)
    again = SimConfig.from_json(json.loads(json.dumps(c.to_json())))
    assert again.config_hash() == c.config_hash() and again.entry == c.entry


@pytest.mark.slow
def test_simulation_matches_exhaustive():
    exact = exhaustive_joint(2, 2, 2, mode="corank")
    N = 1_000_000
    emp = simulate_joint(SimConfig(n=2, k=2, levels={2: 1}, samples=N, seed=2024, mode="corank", chunk=100_000))
    for key, w in exact.probs.items():
        th = float(w)
        se = math.sqrt(th * (1 - th) / N)
        assert abs(emp.counts[key] / N - th) <= 4 * se, key
    assert set(emp.counts) <= set(exact.probs)


def test_simulation_matches_exhaustive_cokernels():
    exact = exhaustive_joint(2, 2, 2, L=2, mode="cok_joint")
    N = 200_000
    emp = simulate_joint(SimConfig(n=2, k=2, levels={2: 2}, samples=N, seed=77, chunk=50_000))
    for key, w in exact.probs.items():
        th = float(w)
        se = math.sqrt(th * (1 - th) / N)
        assert abs(emp.counts[key] / N - th) <= 4 * se, key


# --------------------------------------------------------------- moments

def test_moment_examples():
    c = SimConfig(n=1, k=1, levels={2: 1}, samples=1, seed=0)
    (est,) = estimate_moments(c, [[GroupType({2: E1})]], exhaustive=True)
    assert est.mean == F(1, 2) and est.stderr == 0
    emp_c = SimConfig(n=4, k=2, levels={2: 1}, samples=500, seed=0)
    (triv,) = estimate_moments(emp_c, [[GroupType(), GroupType()]])
    assert triv.mean == 1 and triv.stderr == 0


def test_level_too_small():
    c = SimConfig(n=3, k=1, levels={2: 1}, samples=10, seed=0)
    with pytest.raises(LevelTooSmall) as info:
        estimate_moments(c, [[GroupType({2: P((2,))})]])
    assert "2" in str(info.value)


TARGETS_ORDER_4 = [P(()), P((1,)), P((2,)), P((1, 1))]


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_exhaustive_estimator_is_exact(n, k):
    # independent expectation: weight every tuple of matrices directly
    from itertools import product
    from coklab.groups import sur_count
    from coklab.matrices import MatrixModPrimePower as Mat, cok_chain

    L = 2
    c = SimConfig(n=n, k=k, levels={2: L}, samples=1, seed=0)
    mats = [Mat(np.array(e).reshape(n, n), 2, L) for e in product(range(4), repeat=n * n)]
    chains = Counter(cok_chain(list(t)) for t in product(mats, repeat=k))
    total = len(mats) ** k
    target_sets = [ts for ts in product(TARGETS_ORDER_4, repeat=k)]
    ests = estimate_moments(c, [[GroupType({2: lam}) if lam else GroupType() for lam in ts] for ts in target_sets],
                            exhaustive=True)
    for ts, est in zip(target_sets, ests):
        expect = F(0)
        for ch, cnt in chains.items():
            v = 1
            for lam, mu in zip(ch, ts):
                v *= sur_count(2, lam, mu)
            expect += F(cnt * v, total)
        assert est.mean == expect, ts


def test_moments_from_simulation_are_consistent():
    c = SimConfig(n=12, k=2, levels={2: 2}, samples=20_000, seed=8, chunk=5000)
    emp = simulate_joint(c)
    tz2 = [GroupType(), GroupType({2: E1})]
    (a,) = estimate_moments(c, [tz2], emp=emp)
    (b,) = estimate_moments(c, [tz2])
    assert a.mean == b.mean and a.limit == 2
    assert abs(a.mean - 2) < 5 * a.stderr


# --------------------------------------------------------------- compare

def test_compare_exact_theory_gives_zero():
    table = theory_table(2, 1, 2, "corank")
    probs = dict(table.cells)
    probs[(9, 9)] = table.overflow  # stand-in for everything outside
    fake = ExactJointDistribution("corank", 2, 1, 2, 64, probs)
    rep = compare(fake, table)
    assert rep.tv < 1e-15 and rep.passed


def test_compare_finite_n_is_informative():
    table = theory_table(2, 1, 2, "corank")
    rep = compare(exhaustive_joint(1, 2, 2), table)
    assert 0 < rep.tv <= 1
    assert math.isfinite(rep.max_abs_z) or rep.samples is None
    doc = rep.to_json()
    assert doc["tv"] == rep.tv and len(doc["cells"]) == len(table.cells)


def test_compare_mismatch():
    emp = simulate_joint(cfg(n=3, k=1, samples=100))
    with pytest.raises(ConfigMismatch):
        compare(emp, theory_table(2, 1, 2, "corank"))
    with pytest.raises(ConfigMismatch):
        compare(emp, theory_table(2, 2, 1, "cok_single"))


def test_compare_simulated_passes_and_csv():
    table = theory_table(2, 2, 1, "cok_single")
    emp = simulate_joint(cfg(n=32, k=1, levels={2: 2}, samples=20_000, seed=4, chunk=5000))
    rep = compare(emp, table, Thresholds(tv=0.03, z=5))
    assert rep.passed
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "key,theory,error_bound,freq,stderr,z"
    assert lines[-1].startswith("overflow,")
    assert len(lines) == len(table.cells) + 2


def test_flat_key_and_tv():
    assert flat_key("corank", (0, 1)) == "0;1"
    assert flat_key("cok_joint", ((P((1, 1)), E1), (P((2,)), EMPTY))) == "1,1|1;2|[]"
    a = ExactJointDistribution("corank", 2, 1, 1, 1, {(0,): F(1, 2), (1,): F(1, 2)})
    b = ExactJointDistribution("corank", 2, 1, 1, 1, {(0,): F(1, 4), (2,): F(3, 4)})
    assert tv_between(a, b) == pytest.approx(0.75)
    assert tv_between(a, b, interior=[(0,)]) == pytest.approx(0.25)
