"""Dense float64 helpers and splittable seeded random streams.

Matrices and vectors are plain C-contiguous ``float64`` numpy arrays. The
helpers here add the shape and finiteness checks the rest of the package
relies on, a pivoted inverse with an explicit singularity criterion, and a
constructive sampler for well-conditioned regular matrices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularMatrix

MASK64 = (1 << 64) - 1


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=np.float64, order="C")
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_vector(v) -> np.ndarray:
    x = np.array(v, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise DimensionMismatch("expected a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def lu_factor(m) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle LU with partial pivoting, packed in one array.

    Returns ``(lu, perm)`` such that ``m[perm] == L @ U`` where ``L`` is the
    unit-lower part of ``lu`` and ``U`` its upper part. Raises
    :class:`SingularMatrix` when a pivot falls below ``1e-12 * max|m|``.
    """
    lu = as_matrix(m).copy()
    n, k = lu.shape
    if n != k:
        raise DimensionMismatch(f"square matrix required, got {lu.shape}")
    scale = np.max(np.abs(lu))
    tol = 1e-12 * scale
    perm = np.arange(n)
    for j in range(n):
        p = j + int(np.argmax(np.abs(lu[j:, j])))
        if abs(lu[p, j]) <= tol or scale == 0.0:
            raise SingularMatrix(f"pivot {lu[p, j]:.3e} at column {j} below {tol:.3e}")
        if p != j:
            lu[[j, p]] = lu[[p, j]]
            perm[[j, p]] = perm[[p, j]]
        lu[j + 1:, j] /= lu[j, j]
        lu[j + 1:, j + 1:] -= np.outer(lu[j + 1:, j], lu[j, j + 1:])
    return lu, perm


def lu_solve(lu: np.ndarray, perm: np.ndarray, rhs) -> np.ndarray:
    b = np.array(rhs, dtype=np.float64)
    vec = b.ndim == 1
    y = b[perm].reshape(len(perm), -1).copy()
    n = lu.shape[0]
    for i in range(n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y[:, 0] if vec else y


def solve_or_invert(m) -> np.ndarray:
    """Inverse of a square matrix through a pivoted LU factorization."""
    lu, perm = lu_factor(m)
    return lu_solve(lu, perm, np.eye(lu.shape[0]))


def random_orthogonal(n: int, gen: np.random.Generator) -> np.ndarray:
    # QR of a Gaussian matrix with the sign fix gives a Haar-distributed factor.
    q, r = np.linalg.qr(gen.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_regular(n: int, rng: "SeededRng", min_singular: float = 0.1) -> np.ndarray:
    """Random ``n x n`` matrix with every singular value in ``[min_singular, 1]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < min_singular < 1.0:
        raise ValueError("min_singular must lie in (0, 1)")
    gen = rng.generator()
    q = random_orthogonal(n, gen)
    d = gen.uniform(min_singular, 1.0, size=n)
    # Q @ diag(d): the singular values are exactly d.
    return q * d


def stable_hash(*parts) -> int:
    """64-bit hash of a tuple of ints/strings, stable across processes."""
    h = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class SeededRng:
    """A named random stream: ``(master_seed, stream_id)`` fully determines it.

    Every call to :meth:`generator` restarts the stream, so an operation that
    takes a ``SeededRng`` is a pure function of it. Use :meth:`child` to derive
    independent sub-streams for separate purposes.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("master_seed and stream_id must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *purpose) -> "SeededRng":
        return SeededRng(self.master_seed, stable_hash(self.stream_id, *purpose))
