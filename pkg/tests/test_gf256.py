import itertools
import random

import numpy as np
import pytest

from contentcast import gf256


def slow_mul(a, b):
    """Carry-less multiply then reduce by x^8+x^4+x^3+x^2+1."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return r


def det_by_permutations(m):
    """Leibniz determinant; in characteristic 2 signs vanish."""
    n = len(m)
    total = 0
    for perm in itertools.permutations(range(n)):
        term = 1
        for i, j in enumerate(perm):
            term = slow_mul(term, int(m[i][j]))
            if term == 0:
                break
        total ^= term
    return total


def test_mul_table_matches_carryless_oracle():
    for a in range(256):
        for b in range(256):
            assert gf256.MUL[a, b] == slow_mul(a, b)


def test_inverse():
    for a in range(1, 256):
        assert slow_mul(a, gf256.inv(a)) == 1
    with pytest.raises(ZeroDivisionError):
        gf256.inv(0)


def test_mat_inv_round_trip():
    rnd = random.Random(3)
    for n in range(1, 7):
        g = gf256.systematic_generator(2 * n, n)
        rows = sorted(rnd.sample(range(2 * n), n))
        sub = g[rows]
        ident = gf256.matmul(gf256.mat_inv(sub), sub)
        assert np.array_equal(ident, np.eye(n, dtype=np.uint8))


def test_singular_matrix_rejected():
    with pytest.raises(ValueError):
        gf256.mat_inv(np.array([[1, 2], [1, 2]], dtype=np.uint8))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_every_k_subset_of_generator_rows_is_invertible(n):
    for k in range(1, n + 1):
        g = gf256.systematic_generator(n, k)
        assert np.array_equal(g[:k], np.eye(k, dtype=np.uint8))
        for rows in itertools.combinations(range(n), k):
            assert det_by_permutations(g[list(rows)]) != 0


def test_generator_limits():
    assert gf256.systematic_generator(255, 1).shape == (255, 1)
    with pytest.raises(ValueError):
        gf256.systematic_generator(256, 3)
    with pytest.raises(ValueError):
        gf256.systematic_generator(4, 5)
