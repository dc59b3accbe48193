import json
from fractions import Fraction as F
from itertools import product

import pytest

from coklab.errors import ConvergenceError, ValidationError
from coklab.groups import GroupType, aut_count, chain_count_nk_prime, sur_count
from coklab.limits import (
    TheoryTable, cok_joint_limit, cok_prod_limit, corank_joint_limit, corank_patterns, corank_single_limit,
    qinf, qpoch, rank_step, theory_table,
)
from coklab.partitions import EMPTY, Partition, partitions_of

P = Partition
Z2, Z4 = GroupType({2: P((1,))}), GroupType({2: P((2,))})
QINF2 = 0.28878809508660242  # (1/2;1/2)_inf, independent mpmath value


def close(b, x, tol=1e-12):
    return abs(float(b.value) - x) <= tol + float(b.error_bound)


def test_qinf_oracle():
    import mpmath
    with mpmath.workdps(40):
        for p in (2, 3, 5, 7):
            ref = mpmath.qp(mpmath.mpf(1) / p)
            b = qinf(p)
            assert abs(mpmath.mpf(b.mpf()) - ref) <= mpmath.mpf(b.error_bound) + mpmath.mpf(10) ** -35


def test_qpoch_examples():
    assert qpoch(F(1, 3), F(1, 5), 0).value == 1
    assert qpoch(F(1, 2), F(1, 2), 1).value == F(1, 2)
    assert close(qpoch(F(1, 2), F(1, 2)), QINF2)
    assert float(qpoch(F(1, 2), F(1, 2)).error_bound) < 1e-29
    with pytest.raises(ConvergenceError):
        qpoch(F(1, 2), 1)


def test_qpoch_partials_decrease():
    vals = [qpoch(F(1, 3), F(1, 3), n).value for n in range(12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > float(qinf(3).value)


# ----------------------------------------------------------------- coranks

def test_corank_examples():
    assert close(corank_joint_limit(2, (0,)), QINF2)
    assert close(corank_joint_limit(2, (0, 0)), QINF2 ** 2)
    one = float(corank_joint_limit(2, (0, 1)).value) + float(corank_joint_limit(2, (1, 0)).value)
    assert abs(one - 6 * QINF2 ** 2) < 1e-12
    assert abs(one - 0.500391) < 1e-6


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11])
def test_intro_identities(p):
    q = float(qinf(p).value)
    assert abs(float(corank_joint_limit(p, (0, 0)).value) - q * q) < 1e-14
    one = float(corank_joint_limit(p, (0, 1)).value) + float(corank_joint_limit(p, (1, 0)).value)
    assert abs(one - F(2 * p * p - p, (p - 1) ** 3) * q * q) < 1e-14


@pytest.mark.parametrize("p", [2, 3, 5])
def test_single_matrix_consistency(p):
    for d in range(7):
        a, b = corank_joint_limit(p, (d,)), corank_single_limit(p, d)
        assert abs(a.mpf() - b.mpf()) <= a.error_bound + b.error_bound + 1e-25


@pytest.mark.parametrize("p,k", list(product([2, 3], [1, 2, 3])))
def test_corank_normalization(p, k):
    mass = sum(float(corank_joint_limit(p, pat).value) for pat in corank_patterns(k, 20))
    assert 1 - 1e-6 <= mass <= 1 + 1e-12


def test_corank_invalid():
    with pytest.raises(ValidationError):
        corank_joint_limit(2, ())
    with pytest.raises(ValidationError):
        corank_joint_limit(2, (1, -1))


# --------------------------------------------------------------- rank step

def test_rank_step_examples():
    assert rank_step(2, 1, 0, 1) == F(1, 2)
    assert rank_step(2, 2, 0, 1) == F(9, 16)
    for p in (2, 3, 5):
        for n in range(8):
            prod = F(1)
            for i in range(1, n + 1):
                prod *= 1 - F(1, p ** i)
            assert rank_step(p, n, 0, 0) == prod


@pytest.mark.parametrize("p", [2, 3, 5])
def test_rank_step_rows_sum_to_one(p):
    for n in range(13):
        for k0 in range(n + 1):
            assert sum(rank_step(p, n, k0, d) for d in range(n - k0 + 1)) == 1


def test_rank_step_brute_force():
    # B = diag(1, 0) over F_2; count products BA by rank over all 16 matrices A
    import numpy as np
    from coklab.matrices import rank_fp
    B = np.array([[1, 0], [0, 0]])
    counts = [0, 0]
    for bits in range(16):
        A = np.array([[bits & 1, bits >> 1 & 1], [bits >> 2 & 1, bits >> 3 & 1]])
        counts[1 - rank_fp((B @ A) % 2, 2)] += 1
    assert [F(c, 16) for c in counts] == [rank_step(2, 2, 1, d) for d in (0, 1)]


def test_rank_step_invalid():
    for args in [(2, 2, 3, 0), (2, 2, 1, 2), (2, -1, 0, 0)]:
        with pytest.raises(ValidationError):
            rank_step(*args)


# --------------------------------------------------------------- cokernels

def test_cok_examples():
    assert close(cok_prod_limit([2], 1, Z2), QINF2)
    assert close(cok_prod_limit([2], 2, GroupType()), QINF2 ** 2)
    assert close(cok_prod_limit([2], 2, Z2), 2 * QINF2 ** 2)
    assert close(cok_joint_limit([2], 2, [GroupType(), Z2]), QINF2 ** 2)
    assert close(cok_joint_limit([2], 2, [Z2, Z2]), QINF2 ** 2)
    assert cok_joint_limit([2], 2, [Z4, Z2]).value == 0


def test_cok_prime_support():
    with pytest.raises(ValidationError):
        cok_prod_limit([2], 1, GroupType({3: P((1,))}))
    with pytest.raises(ValidationError):
        cok_joint_limit([2], 2, [Z2])


def test_multi_prime_factorization():
    G = GroupType({2: P((1,)), 3: P((1,))})
    both = float(cok_prod_limit([2, 3], 2, G).value)
    split = float(cok_prod_limit([2], 2, Z2).value) * float(cok_prod_limit([3], 2, GroupType({3: P((1,))})).value)
    assert abs(both - split) < 1e-14


def _quotient_chains(p, top, k):
    """Sequences (B_1, ..., B_k = top) with each B_{i-1} a quotient type of B_i."""
    if k == 1:
        yield (top,)
        return
    for n in range(sum(top) + 1):
        for mu in partitions_of(n):
            if sur_count(p, top, mu):
                for rest in _quotient_chains(p, mu, k - 1):
                    yield rest + (top,)


@pytest.mark.parametrize("p", [2, 3])
def test_prod_is_marginal_of_joint(p):
    for n in range(4 if p == 2 else 2):
        for lam in partitions_of(n):
            for k in (1, 2, 3):
                B = GroupType({p: lam}) if lam else GroupType()
                total = sum(
                    float(cok_joint_limit([p], k, [GroupType({p: m}) if m else GroupType() for m in ch]).value)
                    for ch in _quotient_chains(p, lam, k)
                )
                assert abs(total - float(cok_prod_limit([p], k, B).value)) < 1e-12


@pytest.fixture(scope="module")
def weights():
    lams = [lam for n in range(19) for lam in partitions_of(n)]
    out = {}
    for p in (2, 3):
        for k in (1, 2, 3):
            out[p, k] = {lam: F(chain_count_nk_prime(p, lam, k), aut_count(p, lam)) for lam in lams}
    return out


def _moment_error(weights, p, k):
    q = float(qinf(p).value) ** k
    worst = 0.0
    for n in range(4):
        for mu in partitions_of(n):
            s = q * sum(float(w) * sur_count(p, lam, mu) for lam, w in weights[p, k].items())
            target = chain_count_nk_prime(p, mu, k)
            assert s <= target
            worst = max(worst, (target - s) / target)
    return worst


@pytest.mark.parametrize("p,k", [
    pytest.param(2, k, marks=pytest.mark.xfail(strict=True, reason="truncation at size 18 leaves a 3e-5..3e-3 tail at p=2"))
    for k in (1, 2, 3)
] + [(3, k) for k in (1, 2, 3)])
def test_moment_identity_truncated(weights, p, k):
    assert _moment_error(weights, p, k) < 1e-5


def test_moment_identity_converges_at_two(weights):
    # the p=2 truncation error still shrinks geometrically with the cutoff
    q = float(qinf(2).value) ** 2
    mu = P((1,))
    errs = []
    for B in (12, 15, 18):
        s = q * sum(float(w) * sur_count(2, lam, mu) for lam, w in weights[2, 2].items() if sum(lam) <= B)
        errs.append(2 - s)
    assert errs[0] > errs[1] > errs[2] > 0
    assert errs[2] < errs[1] / 4 < errs[0] / 16


# ------------------------------------------------------------------ tables

def test_table_single_examples():
    t = theory_table(2, 2, 1, "cok_single")
    assert abs(t.prob(((EMPTY,),)) - QINF2) < 1e-12
    assert abs(t.prob(((P((1,)),),)) - QINF2) < 1e-12
    assert abs(sum(float(v) for v in t.cells.values()) + float(t.overflow) - 1) < 1e-12


def test_table_corank_level_one():
    t = theory_table(2, 1, 1, "corank", max_total=3)
    assert abs(t.prob((0,)) - QINF2) < 1e-12
    assert abs(t.prob((1,)) - float(corank_single_limit(2, 1).value)) < 1e-12
    assert abs(float(t.overflow) - sum(float(corank_single_limit(2, d).value) for d in range(4, 40))) < 1e-12


@pytest.mark.parametrize("mode,L,k", [("cok_joint", 2, 2), ("cok_joint", 3, 1), ("cok_single", 2, 3), ("corank", 1, 2)])
def test_table_normalization_and_json(mode, L, k):
    t = theory_table(2, L, k, mode)
    assert all(float(v) >= 0 for v in t.cells.values())
    assert 0 <= float(t.overflow) < 1
    doc = json.loads(json.dumps(t.to_json()))
    back = TheoryTable.from_json(doc)
    assert back.cells.keys() == t.cells.keys()
    assert all(abs(float(back.cells[c]) - float(t.cells[c])) < 1e-15 for c in t.cells)


def test_table_joint_cells_are_exact_limits():
    t = theory_table(2, 2, 2, "cok_joint")
    key = ((P((1,)),), (P((1, 1)),))
    expect = float(cok_joint_limit([2], 2, [Z2, GroupType({2: P((1, 1))})]).value)
    assert abs(t.prob(key) - expect) < 1e-15
    # every joint cell has parts < L
    assert all(all(max(lam, default=0) < 2 for step in key for lam in step) for key in t.cells)


def test_table_invalid():
    with pytest.raises(ValidationError):
        theory_table(2, 0, 1, "corank")
    with pytest.raises(ValidationError):
        theory_table(2, 1, 1, "bogus")


def test_joint_moment_identity_converges():
    from coklab.groups import joint_chain_count_mk
    from coklab.limits import cok_joint_factor

    p = 3
    q = float(qinf(p).value) ** 2
    lams = [lam for n in range(13) for lam in partitions_of(n)]
    quotients = {l: [m for m in lams if sum(m) <= sum(l) and sur_count(p, l, m)] for l in lams}
    for m1, m2 in [((1,), (1,)), ((), (1,)), ((1,), (1, 1)), ((1,), (2,)), ((1,), ())]:
        m1, m2 = P(m1), P(m2)
        errs = []
        target = joint_chain_count_mk([GroupType({p: m}) if m else GroupType() for m in (m1, m2)])
        for B in (8, 12):
            s = q * sum(
                float(cok_joint_factor(p, [l1, l2])) * sur_count(p, l1, m1) * sur_count(p, l2, m2)
                for l2 in lams if sum(l2) <= B for l1 in quotients[l2]
            )
            errs.append((target - s) / target)
        assert 0 < errs[1] < errs[0] / 20
        assert errs[1] < 2e-4
