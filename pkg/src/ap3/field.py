"""Exact linear algebra over the group F_p^n of coordinate vectors mod p.

Group elements are encoded as integers in [0, p^n) via little-endian
base-p digits: digit i of the index is coordinate i.  Subspaces are
stored in reduced row echelon form over GF(p), so equal subspaces
compare (and hash) equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

DEFAULT_ENUMERATION_CAP = 200_000


class ParameterError(ValueError):
    """Operands built over different field parameters."""


class EnumerationCapError(RuntimeError):
    """A subspace enumeration would exceed the configured cap."""


class InfeasibleError(ValueError):
    """No admissible subspace dimension exists for the request."""


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    d = 3
    while d * d <= m:
        if m % d == 0:
            return False
        d += 2
    return True


@lru_cache(maxsize=64)
def _digit_table(p: int, n: int) -> np.ndarray:
    """All p^n digit vectors as an (F, n) int64 array, row m = digits of m."""
    powers = p ** np.arange(n, dtype=np.int64)
    table = (np.arange(p**n, dtype=np.int64)[:, None] // powers[None, :]) % p
    table.setflags(write=False)
    return table


@lru_cache(maxsize=64)
def _power_table(p: int, n: int) -> np.ndarray:
    powers = p ** np.arange(n, dtype=np.int64)
    powers.setflags(write=False)
    return powers


@dataclass(frozen=True)
class FieldParams:
    """Ambient group parameters: vectors of length n over GF(p), p an odd prime."""

    p: int
    n: int

    def __post_init__(self):
        if not is_prime(self.p) or self.p < 3:
            raise ValueError(f"p must be an odd prime >= 3, got {self.p}")
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.p**self.n > 2**62:
            raise ValueError("p^n exceeds the supported desk scale")

    @property
    def F(self) -> int:
        return self.p**self.n

    def digit_table(self) -> np.ndarray:
        return _digit_table(self.p, self.n)

    def powers(self) -> np.ndarray:
        return _power_table(self.p, self.n)

    def digits_of(self, x: int) -> np.ndarray:
        self._check_element(x)
        return self.digit_table()[x]

    def index_of(self, digits) -> int:
        d = np.asarray(digits, dtype=np.int64) % self.p
        if d.shape != (self.n,):
            raise ValueError(f"expected {self.n} digits, got shape {d.shape}")
        return int(d @ self.powers())

    def indices_of(self, digit_rows: np.ndarray) -> np.ndarray:
        """Vectorized index_of for an (m, n) array of digit vectors."""
        return (np.asarray(digit_rows, dtype=np.int64) % self.p) @ self.powers()

    def dot(self, a: int, b: int) -> int:
        """Coordinate dot product a.b mod p."""
        da, db = self.digits_of(a), self.digits_of(b)
        return int((da * db).sum() % self.p)

    def add(self, a: int, b: int) -> int:
        return self.index_of(self.digits_of(a) + self.digits_of(b))

    def sub(self, a: int, b: int) -> int:
        return self.index_of(self.digits_of(a) - self.digits_of(b))

    def neg(self, a: int) -> int:
        return self.index_of(-self.digits_of(a))

    def scale(self, c: int, a: int) -> int:
        return self.index_of(c * self.digits_of(a))

    def elements(self) -> range:
        return range(self.F)

    def _check_element(self, x: int) -> None:
        if not 0 <= x < self.F:
            raise ValueError(f"element index {x} outside [0, {self.F})")

    def same_as(self, other: "FieldParams") -> None:
        if self != other:
            raise ParameterError(f"mismatched field parameters {self} vs {other}")

    def to_json_dict(self) -> dict:
        return {"p": self.p, "n": self.n}


def check_same_params(*objs) -> FieldParams:
    params = objs[0].params
    for o in objs[1:]:
        params.same_as(o.params)
    return params


def _mod_inverse(a: int, p: int) -> int:
    return pow(int(a), -1, p)


def rref(matrix, p: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reduced row echelon form over GF(p).

    Returns (rows, pivots) where rows is an (r, n) int64 array of the
    nonzero rows and pivots the pivot column of each row.
    """
    M = np.array(matrix, dtype=np.int64) % p
    if M.ndim != 2:
        raise ValueError("rref expects a 2-d matrix")
    rows, cols = M.shape
    pivots = []
    r = 0
    for c in range(cols):
        pivot_row = None
        for i in range(r, rows):
            if M[i, c] % p != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        if pivot_row != r:
            M[[r, pivot_row]] = M[[pivot_row, r]]
        M[r] = (M[r] * _mod_inverse(M[r, c], p)) % p
        for i in range(rows):
            if i != r and M[i, c] % p != 0:
                M[i] = (M[i] - M[i, c] * M[r]) % p
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return M[:r], tuple(pivots)


def matrix_rank(matrix, p: int) -> int:
    rows, _ = rref(matrix, p)
    return rows.shape[0]


def inverse_mod_p(matrix: np.ndarray, p: int) -> np.ndarray:
    """Inverse of a square matrix over GF(p) by Gauss-Jordan elimination."""
    M = np.array(matrix, dtype=np.int64) % p
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("inverse_mod_p expects a square matrix")
    aug = np.concatenate([M, np.eye(n, dtype=np.int64)], axis=1)
    reduced, pivots = rref(aug, p)
    if reduced.shape[0] < n or pivots[:n] != tuple(range(n)):
        raise ValueError("matrix is singular mod p")
    return reduced[:, n:]


def gaussian_binomial(n: int, k: int, p: int) -> int:
    """Number of k-dimensional subspaces of an n-dimensional space over GF(p)."""
    if k < 0 or k > n:
        return 0
    num, den = 1, 1
    for i in range(k):
        num *= p ** (n - i) - 1
        den *= p ** (k - i) - 1
    assert num % den == 0
    return num // den


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of F_p^n, basis rows in reduced row echelon form."""

    params: FieldParams
    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def from_rows(cls, params: FieldParams, rows) -> "Subspace":
        arr = np.atleast_2d(np.array(rows, dtype=np.int64)) % params.p
        if arr.size == 0:
            return cls(params, ())
        if arr.shape[1] != params.n:
            raise ValueError(f"basis rows must have length {params.n}")
        reduced, _ = rref(arr, params.p)
        return cls(params, tuple(tuple(int(v) for v in row) for row in reduced))

    @classmethod
    def zero(cls, params: FieldParams) -> "Subspace":
        return cls(params, ())

    @classmethod
    def full(cls, params: FieldParams) -> "Subspace":
        return cls.from_rows(params, np.eye(params.n, dtype=np.int64))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def size(self) -> int:
        return self.params.p**self.dim

    @property
    def matrix(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, self.params.n), dtype=np.int64)
        return np.array(self.basis, dtype=np.int64)

    @property
    def pivots(self) -> tuple[int, ...]:
        _, piv = rref(self.matrix, self.params.p) if self.basis else (None, ())
        return piv

    def reduce_digit_rows(self, digit_rows: np.ndarray) -> np.ndarray:
        """Eliminate this subspace from each digit row: result is the canonical
        coset representative of each row modulo the subspace."""
        p = self.params.p
        R = np.array(digit_rows, dtype=np.int64) % p
        single = R.ndim == 1
        if single:
            R = R[None, :]
        if self.basis:
            mat = self.matrix
            for row, c in zip(mat, self.pivots):
                coef = R[:, c].copy()
                R = (R - coef[:, None] * row[None, :]) % p
        return R[0] if single else R

    def contains(self, x: int) -> bool:
        return not self.reduce_digit_rows(self.params.digits_of(x)).any()

    def contains_any_nonzero(self, indices) -> bool:
        """True when some nonzero element of `indices` lies in the subspace."""
        idx = np.asarray(indices, dtype=np.int64)
        idx = idx[idx != 0]
        if idx.size == 0:
            return False
        reduced = self.reduce_digit_rows(self.params.digit_table()[idx])
        return bool(np.any(~reduced.any(axis=1)))

    def members(self) -> np.ndarray:
        """All element indices of the subspace, ascending."""
        if self.dim == 0:
            return np.zeros(1, dtype=np.int64)
        coeffs = _digit_table(self.params.p, self.dim)
        digit_rows = (coeffs @ self.matrix) % self.params.p
        out = self.params.indices_of(digit_rows)
        out.sort()
        return out

    def coset(self, t: int) -> np.ndarray:
        """Element indices of t + subspace, ascending."""
        td = self.params.digits_of(t)
        if self.dim == 0:
            return np.array([t], dtype=np.int64)
        coeffs = _digit_table(self.params.p, self.dim)
        digit_rows = ((coeffs @ self.matrix) + td[None, :]) % self.params.p
        out = self.params.indices_of(digit_rows)
        out.sort()
        return out

    def coset_representatives(self) -> np.ndarray:
        """For every x in F, the index of the canonical representative of x + subspace."""
        reduced = self.reduce_digit_rows(self.params.digit_table())
        return self.params.indices_of(reduced)

    def complement(self) -> "Subspace":
        """The orthogonal complement under the coordinate dot product."""
        p, n = self.params.p, self.params.n
        if self.dim == 0:
            return Subspace.full(self.params)
        mat, piv = rref(self.matrix, p)
        free_cols = [c for c in range(n) if c not in piv]
        rows = []
        for c in free_cols:
            v = np.zeros(n, dtype=np.int64)
            v[c] = 1
            for i, pc in enumerate(piv):
                v[pc] = (-mat[i, c]) % p
            rows.append(v)
        if not rows:
            return Subspace.zero(self.params)
        return Subspace.from_rows(self.params, np.array(rows))

    def intersects_trivially(self, other: "Subspace") -> bool:
        """True when the two subspaces meet only in 0."""
        stacked = np.concatenate([self.matrix, other.matrix], axis=0)
        return matrix_rank(stacked, self.params.p) == self.dim + other.dim

    def to_json_dict(self) -> dict:
        return {
            "p": self.params.p,
            "n": self.params.n,
            "basis": [list(row) for row in self.basis],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "Subspace":
        params = FieldParams(int(data["p"]), int(data["n"]))
        return cls.from_rows(params, np.array(data["basis"], dtype=np.int64).reshape(-1, params.n))

    @classmethod
    def from_json(cls, text: str) -> "Subspace":
        return cls.from_json_dict(json.loads(text))


def sample_uniform_subspace(params: FieldParams, dim: int, rng: np.random.Generator) -> Subspace:
    """Uniformly random dim-dimensional subspace.

    Rejection sampling on uniform dim x n matrices until full rank; every
    subspace has the same number of ordered bases, so the canonicalized
    result is uniform over the dimension's subspaces.
    """
    if not 0 <= dim <= params.n:
        raise ValueError(f"dimension {dim} outside [0, {params.n}]")
    if dim == 0:
        return Subspace.zero(params)
    while True:
        M = rng.integers(0, params.p, size=(dim, params.n))
        rows, _ = rref(M, params.p)
        if rows.shape[0] == dim:
            return Subspace(params, tuple(tuple(int(v) for v in row) for row in rows))


def enumerate_subspaces(
    params: FieldParams, dim: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[Subspace]:
    """All dim-dimensional subspaces, via their unique echelon-form bases."""
    count = gaussian_binomial(params.n, dim, params.p)
    if count > cap:
        raise EnumerationCapError(
            f"enumeration of {count} subspaces exceeds the cap of {cap}"
        )
    p, n = params.p, params.n
    if dim == 0:
        return [Subspace.zero(params)]
    out = []
    for piv in combinations(range(n), dim):
        free_pos = [
            (i, c)
            for i in range(dim)
            for c in range(piv[i] + 1, n)
            if c not in piv
        ]
        base = np.zeros((dim, n), dtype=np.int64)
        for i, c in enumerate(piv):
            base[i, c] = 1
        for assignment in product(range(p), repeat=len(free_pos)):
            M = base.copy()
            for (i, c), v in zip(free_pos, assignment):
                M[i, c] = v
            out.append(Subspace(params, tuple(tuple(int(v) for v in row) for row in M)))
    assert len(out) == count
    return out


@dataclass(frozen=True)
class DirectSumSplitter:
    """Coordinate maps for F = V (+) W, precomputed for repeated decomposition."""

    V: Subspace
    W: Subspace
    _inverse: np.ndarray

    @classmethod
    def build(cls, V: Subspace, W: Subspace) -> "DirectSumSplitter":
        params = check_same_params(V, W)
        if V.dim + W.dim != params.n:
            raise ValueError("component dimensions must sum to n")
        stacked = np.concatenate([V.matrix, W.matrix], axis=0)
        if matrix_rank(stacked, params.p) != params.n:
            raise ValueError("subspaces do not form a direct sum")
        return cls(V, W, inverse_mod_p(stacked, params.p))

    def split(self, x: int) -> tuple[int, int]:
        """x -> (v, w) with x = v + w, v in V, w in W; unique by directness."""
        v_rows, w_rows = self.split_many(np.array([x], dtype=np.int64))
        return int(v_rows[0]), int(w_rows[0])

    def split_many(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        params = self.V.params
        p = params.p
        x_digits = params.digit_table()[np.asarray(indices, dtype=np.int64)]
        coeffs = (x_digits @ self._inverse) % p
        dv = self.V.dim
        v_digits = (coeffs[:, :dv] @ self.V.matrix) % p if dv else np.zeros_like(x_digits)
        w_digits = (coeffs[:, dv:] @ self.W.matrix) % p if self.W.dim else np.zeros_like(x_digits)
        return params.indices_of(v_digits), params.indices_of(w_digits)


def decompose(x: int, V: Subspace, W: Subspace) -> tuple[int, int]:
    """Split x = v + w across a verified direct sum V (+) W."""
    return DirectSumSplitter.build(V, W).split(x)
