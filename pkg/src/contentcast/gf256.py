"""Arithmetic over GF(2^8) and the systematic Cauchy generator used by PET.

Field polynomial is x^8 + x^4 + x^3 + x^2 + 1 (0x11d) with generator 2.
Tables are built once at import and never mutated.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PRIMITIVE_POLY = 0x11D

EXP = [0] * 512
LOG = [0] * 256


def _build_tables() -> None:
    x = 1
    for i in range(255):
        EXP[i] = x
        LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    for i in range(255, 512):
        EXP[i] = EXP[i - 255]


_build_tables()


def mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return EXP[255 - LOG[a]]


def _mul_table() -> np.ndarray:
    t = np.zeros((256, 256), dtype=np.uint8)
    for a in range(1, 256):
        for b in range(1, 256):
            t[a, b] = EXP[LOG[a] + LOG[b]]
    t.setflags(write=False)
    return t


MUL = _mul_table()


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(256); both operands are uint8 arrays."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    prods = MUL[a[:, :, None], b[None, :, :]]
    return np.bitwise_xor.reduce(prods, axis=1)


def mat_inv(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse over GF(256). Raises ValueError if singular."""
    n = len(m)
    a = [[int(v) for v in row] for row in m]
    out = [[int(i == j) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise ValueError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        out[col], out[piv] = out[piv], out[col]
        f = inv(a[col][col])
        a[col] = [mul(v, f) for v in a[col]]
        out[col] = [mul(v, f) for v in out[col]]
        for r in range(n):
            g = a[r][col]
            if r == col or g == 0:
                continue
            a[r] = [x ^ mul(g, y) for x, y in zip(a[r], a[col])]
            out[r] = [x ^ mul(g, y) for x, y in zip(out[r], out[col])]
    return np.array(out, dtype=np.uint8)


@lru_cache(maxsize=None)
def systematic_generator(n: int, k: int) -> np.ndarray:
    """N x k generator ``[I_k ; C]`` with C the Cauchy matrix 1/(x_i + y_j).

    Evaluation points are fixed: y_j = j for j < k and x_i = k + i for the
    n - k parity rows, so all points are the distinct field elements 0..n-1.
    Every k x k submatrix of ``[I ; C]`` is invertible, hence any k rows
    suffice to recover the source block (MDS).
    """
    if not 1 <= k <= n <= 255:
        raise ValueError(f"need 1 <= k <= n <= 255, got k={k} n={n}")
    g = np.zeros((n, k), dtype=np.uint8)
    for j in range(k):
        g[j, j] = 1
    for i in range(n - k):
        x = k + i
        for j in range(k):
            g[k + i, j] = inv(x ^ j)
    g.setflags(write=False)
    return g


@lru_cache(maxsize=4096)
def decoding_matrix(n: int, k: int, rows: tuple[int, ...]) -> np.ndarray:
    """Inverse of the generator rows ``rows`` (exactly k distinct indices)."""
    sub = systematic_generator(n, k)[list(rows)]
    res = mat_inv(sub)
    res.setflags(write=False)
    return res
