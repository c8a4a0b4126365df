"""Random instances: sparse inputs, blockwise correlation, sensing matrices."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import FactorizationError, ParameterError


def _tag(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def make_rng(seed: int, *keys) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a seed and a path of tags.

    Distinct key paths give independent streams without shared state, so
    trials can be generated in any order or in parallel.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_tag(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *keys) -> int:
    """Deterministic 64-bit child seed for ``(master_seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(_tag(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    rho: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


def sample_sparse_signal(N: int, rho: float, rng: np.random.Generator) -> SparseSignal:
    """Bernoulli-Gaussian input: each entry is 0 w.p. ``1 - rho``, else N(0, 1)."""
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N!r}")
    if not 0.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [0, 1], got {rho!r}")
    mask = rng.random(N) < rho
    gauss = rng.standard_normal(N)
    return SparseSignal(np.where(mask, gauss, 0.0), float(rho))


class BlockSqrtOperator:
    """Symmetric square root of ``[[1, r], [r, 1]] (x) I_{N/2}``.

    Acts on consecutive index pairs ``(2k, 2k+1)`` of the last axis with
    the block ``[[l+, l-], [l-, l+]]``.
    """

    def __init__(self, N: int, r: float):
        if not abs(r) < 1.0:
            raise ParameterError(f"|r| must be < 1, got {r!r}")
        if N < 1:
            raise ParameterError(f"N must be >= 1, got {N!r}")
        if r != 0.0 and N % 2:
            raise ParameterError(f"N must be even when r != 0, got N={N}")
        self.N = int(N)
        self.r = float(r)
        a, b = math.sqrt(1.0 + r), math.sqrt(1.0 - r)
        self.l_plus = 0.5 * (a + b)
        self.l_minus = 0.5 * (a - b)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.N:
            raise ParameterError(f"last axis must have length {self.N}, got {x.shape[-1]}")
        if self.r == 0.0:
            return x.copy()
        pairs = x.reshape(*x.shape[:-1], self.N // 2, 2)
        out = np.empty_like(pairs)
        out[..., 0] = self.l_plus * pairs[..., 0] + self.l_minus * pairs[..., 1]
        out[..., 1] = self.l_minus * pairs[..., 0] + self.l_plus * pairs[..., 1]
        return out.reshape(x.shape)

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.N))


def build_sqrt_rt_blockwise(N: int, r: float) -> BlockSqrtOperator:
    return BlockSqrtOperator(N, r)


def rt_blockwise(N: int, r: float) -> np.ndarray:
    """Dense ``[[1, r], [r, 1]] (x) I_{N/2}``."""
    if r != 0.0 and N % 2:
        raise ParameterError(f"N must be even when r != 0, got N={N}")
    if r == 0.0:
        return np.eye(N)
    return np.kron(np.eye(N // 2), np.array([[1.0, r], [r, 1.0]]))


def sample_sensing_matrix(P: int, N: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """``F = Xi @ sqrt(Rt)`` with ``Xi`` i.i.d. ``N(0, 1/N)``, drawn row by row.

    Row ``i`` of ``F`` depends only on row ``i`` of ``Xi``, so the first
    ``P`` rows of an ``N``-row draw equal a ``P``-row draw from the same
    stream.
    """
    if not 1 <= P <= N:
        raise ParameterError(f"need 1 <= P <= N, got P={P}, N={N}")
    op = BlockSqrtOperator(N, r)
    xi = rng.standard_normal((P, N)) / math.sqrt(N)
    return op.apply(xi)


def matrix_sqrt_sym(A: np.ndarray) -> np.ndarray:
    """A factor ``S`` with ``S.T @ S == A`` (the transposed Cholesky factor)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("A must be square")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise FactorizationError("A must be symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("A is not positive definite") from exc
    return L.T


@dataclass(frozen=True)
class SensingInstance:
    F: np.ndarray
    x0: SparseSignal
    y: np.ndarray
    r: float
    seed: int

    @property
    def P(self) -> int:
        return self.F.shape[0]

    @property
    def N(self) -> int:
        return self.F.shape[1]


def sample_instance(P: int, N: int, rho: float, r: float, seed: int) -> SensingInstance:
    """Instance ``(F, x0, y = F x0)`` from independent matrix and signal streams."""
    F = sample_sensing_matrix(P, N, r, make_rng(seed, "matrix"))
    x0 = sample_sparse_signal(N, rho, make_rng(seed, "signal"))
    return SensingInstance(F, x0, F @ x0.values, float(r), int(seed))
