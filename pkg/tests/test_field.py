import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ap3.field import (
    DirectSumSplitter,
    EnumerationCapError,
    FieldParams,
    ParameterError,
    Subspace,
    decompose,
    enumerate_subspaces,
    gaussian_binomial,
    inverse_mod_p,
    is_prime,
    matrix_rank,
    rref,
    sample_uniform_subspace,
)

SMALL_PARAMS = st.sampled_from([(3, 1), (3, 2), (3, 3), (5, 1), (5, 2), (7, 2)])


def test_params_validation():
    with pytest.raises(ValueError):
        FieldParams(2, 3)
    with pytest.raises(ValueError):
        FieldParams(9, 2)
    with pytest.raises(ValueError):
        FieldParams(3, 0)
    assert FieldParams(3, 4).F == 81


def test_is_prime_small():
    primes = [m for m in range(50) if is_prime(m)]
    assert primes == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]


@given(SMALL_PARAMS, st.integers(min_value=0, max_value=10**6))
@settings(max_examples=60, deadline=None)
def test_digit_round_trip(pn, raw):
    params = FieldParams(*pn)
    x = raw % params.F
    assert params.index_of(params.digits_of(x)) == x


@given(SMALL_PARAMS, st.integers(0, 10**6), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_group_ops(pn, ra, rb):
    params = FieldParams(*pn)
    a, b = ra % params.F, rb % params.F
    assert params.sub(params.add(a, b), b) == a
    assert params.add(a, params.neg(a)) == 0
    assert params.dot(a, b) == params.dot(b, a)
    assert params.dot(params.add(a, b), b) == (params.dot(a, b) + params.dot(b, b)) % params.p


def test_element_bounds(p33):
    with pytest.raises(ValueError):
        p33.digits_of(27)
    with pytest.raises(ParameterError):
        p33.same_as(FieldParams(3, 2))


def test_rref_idempotent_and_rank():
    M = [[1, 2, 0], [2, 4, 1], [0, 0, 2]]
    reduced, pivots = rref(M, 3)
    again, pivots2 = rref(reduced, 3)
    assert np.array_equal(reduced, again)
    assert pivots == pivots2
    assert matrix_rank(M, 3) == 2
    assert matrix_rank(np.zeros((2, 3)), 3) == 0


def test_inverse_mod_p(rng):
    p = 5
    for _ in range(20):
        M = rng.integers(0, p, size=(3, 3))
        if matrix_rank(M, p) < 3:
            continue
        inv = inverse_mod_p(M, p)
        assert np.array_equal((M @ inv) % p, np.eye(3, dtype=np.int64))
    with pytest.raises(ValueError):
        inverse_mod_p(np.zeros((2, 2), dtype=np.int64), 5)


def test_gaussian_binomial_known():
    assert gaussian_binomial(2, 1, 3) == 4
    assert gaussian_binomial(3, 1, 3) == 13
    assert gaussian_binomial(3, 2, 3) == 13
    assert gaussian_binomial(4, 2, 3) == 130
    assert gaussian_binomial(2, 1, 5) == 6
    assert gaussian_binomial(3, 3, 7) == 1
    assert gaussian_binomial(3, 4, 3) == 0


def test_subspace_canonical_form(p33):
    W1 = Subspace.from_rows(p33, [[1, 1, 0], [0, 0, 1]])
    W2 = Subspace.from_rows(p33, [[2, 2, 0], [1, 1, 2], [0, 0, 2]])
    assert W1 == W2
    assert W1.dim == 2
    assert W1.size == 9


def test_subspace_members_and_cosets(p33):
    W = Subspace.from_rows(p33, [[1, 0, 0]])
    assert W.members().tolist() == [0, 1, 2]
    assert W.coset(3).tolist() == [3, 4, 5]
    assert W.contains(2) and not W.contains(3)
    reps = W.coset_representatives()
    assert len(set(reps.tolist())) == p33.F // W.size
    for x in range(p33.F):
        assert reps[x] == reps[W.coset(x)[0]]


def test_zero_and_full(p33):
    Z = Subspace.zero(p33)
    assert Z.members().tolist() == [0]
    assert Z.coset(5).tolist() == [5]
    assert Subspace.full(p33).dim == 3
    assert Z.complement() == Subspace.full(p33)
    assert Subspace.full(p33).complement() == Z


def test_complement_orthogonality(p52, rng):
    for _ in range(10):
        W = sample_uniform_subspace(p52, 1, rng)
        V = W.complement()
        assert V.dim == p52.n - W.dim
        for w in W.members():
            for v in V.members():
                assert p52.dot(int(w), int(v)) == 0


def test_contains_any_nonzero(p33):
    W = Subspace.from_rows(p33, [[1, 0, 0]])
    assert W.contains_any_nonzero([0, 2, 9])
    assert not W.contains_any_nonzero([0, 9, 12])
    assert not W.contains_any_nonzero([0])


def test_enumerate_matches_gaussian_binomial():
    for p, n, d in [(3, 2, 1), (3, 3, 1), (3, 3, 2), (5, 2, 1), (3, 4, 2)]:
        params = FieldParams(p, n)
        spaces = enumerate_subspaces(params, d)
        assert len(spaces) == gaussian_binomial(n, d, p)
        assert len(set(spaces)) == len(spaces)
        for W in spaces[:10]:
            assert W.dim == d


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_subspaces(FieldParams(3, 4), 2, cap=100)


def test_sampling_covers_all_lines(rng):
    params = FieldParams(3, 2)
    seen = {sample_uniform_subspace(params, 1, rng) for _ in range(200)}
    assert len(seen) == 4
    counts = {}
    for _ in range(2000):
        W = sample_uniform_subspace(params, 1, rng)
        counts[W] = counts.get(W, 0) + 1
    assert min(counts.values()) > 2000 / 4 * 0.7


def test_direct_sum_splitter(p33, rng):
    for _ in range(10):
        W = sample_uniform_subspace(p33, 2, rng)
        V = W.complement()
        if not V.intersects_trivially(W):
            continue
        splitter = DirectSumSplitter.build(V, W)
        xs = np.arange(p33.F, dtype=np.int64)
        vs, ws = splitter.split_many(xs)
        for x, v, w in zip(xs, vs, ws):
            assert V.contains(int(v)) and W.contains(int(w))
            assert p33.add(int(v), int(w)) == int(x)


def test_direct_sum_rejects_overlap(p33):
    W = Subspace.from_rows(p33, [[1, 0, 0], [0, 1, 0]])
    V = Subspace.from_rows(p33, [[1, 0, 0]])
    with pytest.raises(ValueError):
        DirectSumSplitter.build(V, W)
    with pytest.raises(ValueError):
        decompose(1, V, W)


def test_subspace_json_round_trip(p33):
    W = Subspace.from_rows(p33, [[1, 2, 0], [0, 0, 1]])
    assert Subspace.from_json(W.to_json()) == W
