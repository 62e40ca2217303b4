"""Hadamard matrices, Walsh transforms and temporal exposure codes.

Two index conventions coexist here:

* :func:`hadamard_matrix` is the Sylvester (Kronecker) construction, used for
  conditioning analysis.
* :func:`walsh_kernel`, :func:`forward_walsh` and :func:`inverse_walsh` use the
  bit-reversed pairing ``(-1)**sum_i b_i(x) b_{m-1-i}(u)``.  Its rows are the
  Sylvester rows permuted by bit reversal of the row index, so condition
  numbers, energies and round trips are identical under either convention.

Every exposure code in this package (and therefore every TMA code index ``u``)
refers to a row of the bit-reversed Walsh kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MAX_ORDER = 8


class CodeKind(str, Enum):
    ONE_HOT = "one-hot"
    PSEUDO_RANDOM = "pseudo-random"
    POSITIVE_HADAMARD = "positive-hadamard"
    NEGATIVE_HADAMARD = "negative-hadamard"
    SIGNED_HADAMARD = "signed-hadamard"


@dataclass(frozen=True)
class ExposureCode:
    """A bank of temporal exposure codes, one row per code index.

    ``rows[u, x]`` is the weight of time slot ``x`` for code ``u``; binary kinds
    hold 0/1 entries and the signed kind holds -1/+1.
    """

    kind: CodeKind
    m: int
    rows: np.ndarray
    seed: int | None = field(default=None)

    @property
    def length(self) -> int:
        return 1 << self.m

    @property
    def binary(self) -> bool:
        return self.kind is not CodeKind.SIGNED_HADAMARD


def _check_order(m: int) -> None:
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_ORDER:
        raise ValueError(f"order m must be an integer in [1, {MAX_ORDER}], got {m!r}")


def order_of(n: int) -> int:
    """Return ``m`` such that ``n == 2**m``; raise ``ValueError`` otherwise."""
    if n < 2 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two >= 2")
    return n.bit_length() - 1


def bit_reverse(u, m: int):
    """Reverse the lowest ``m`` bits of ``u`` (scalar or integer array)."""
    u = np.asarray(u, dtype=np.int64)
    out = np.zeros_like(u)
    for i in range(m):
        out |= ((u >> i) & 1) << (m - 1 - i)
    return out


def hadamard_matrix(m: int) -> np.ndarray:
    """Sylvester Hadamard matrix ``H_m = H_1 kron H_{m-1}`` of size ``2**m``."""
    _check_order(m)
    h1 = np.array([[1, 1], [1, -1]], dtype=np.int64)
    h = h1
    for _ in range(m - 1):
        h = np.kron(h1, h)
    return h


def walsh_kernel(m: int) -> np.ndarray:
    """Dense Walsh kernel ``K[u, x]`` with bit-reversed pairing of ``u`` and ``x``."""
    _check_order(m)
    return hadamard_matrix(m)[bit_reverse(np.arange(1 << m), m)]


def _butterfly(a: np.ndarray) -> np.ndarray:
    # in-place-style Sylvester-order FWHT along axis 0
    n = a.shape[0]
    rest = a.shape[1:]
    h = 1
    while h < n:
        a = a.reshape((n // (2 * h), 2, h) + rest)
        lo = a[:, 0] + a[:, 1]
        hi = a[:, 0] - a[:, 1]
        a = np.stack([lo, hi], axis=1).reshape((n,) + rest)
        h *= 2
    return a


def forward_walsh(f, axis: int = 0) -> np.ndarray:
    """Forward Walsh-Hadamard transform along ``axis``.

    Computes ``h(u) = sum_x f(x) K[u, x]`` with the bit-reversed kernel in
    ``O(N log N)`` per transformed vector.  Works on whole frame stacks, e.g. a
    ``(T, H, W)`` array transformed along time.
    """
    f = np.moveaxis(np.asarray(f, dtype=np.float64), axis, 0)
    m = order_of(f.shape[0])
    _check_order(m)
    h = _butterfly(f)[bit_reverse(np.arange(1 << m), m)]
    return np.moveaxis(h, 0, axis)


def inverse_walsh(h, axis: int = 0) -> np.ndarray:
    """Inverse of :func:`forward_walsh`: ``f(x) = 2**-m sum_u h(u) K[u, x]``."""
    h = np.moveaxis(np.asarray(h, dtype=np.float64), axis, 0)
    m = order_of(h.shape[0])
    _check_order(m)
    # K is symmetric, so K^-1 = K / 2**m and the same butterfly applies
    f = _butterfly(h[bit_reverse(np.arange(1 << m), m)]) / (1 << m)
    return np.moveaxis(f, 0, axis)


def make_code(kind: CodeKind | str, m: int, seed: int | None = None) -> ExposureCode:
    """Build the ``2**m`` exposure codes of the given kind.

    Args:
        kind: One of :class:`CodeKind` (or its string value).
        m: Order exponent; codes have ``2**m`` time slots.
        seed: Required for pseudo-random codes, rejected otherwise.

    Returns:
        ExposureCode with ``rows`` of shape ``(2**m, 2**m)``.
    """
    kind = CodeKind(kind)
    _check_order(m)
    n = 1 << m
    if kind is CodeKind.PSEUDO_RANDOM:
        if seed is None:
            raise ValueError("pseudo-random codes need an explicit seed")
        rows = random_binary_rows(np.random.default_rng(seed), n, n)
    elif seed is not None:
        raise ValueError(f"{kind.value} codes are deterministic; seed must be None")
    elif kind is CodeKind.ONE_HOT:
        rows = np.eye(n, dtype=np.int64)
    else:
        k = walsh_kernel(m)
        if kind is CodeKind.SIGNED_HADAMARD:
            rows = k
        elif kind is CodeKind.POSITIVE_HADAMARD:
            rows = (k + 1) // 2
        else:
            rows = (1 - k) // 2
    rows.setflags(write=False)
    return ExposureCode(kind=kind, m=m, rows=rows, seed=seed)


def random_binary_rows(rng: np.random.Generator, count: int, n: int, batch=()) -> np.ndarray:
    """Binary rows of length ``n`` with exactly ``n // 2`` ones each.

    Each row is an independent Fisher-Yates shuffle of a half-ones template.
    ``batch`` prepends extra axes, so ``batch=(B,)`` yields ``B`` matrices.
    """
    base = np.zeros(tuple(batch) + (count, n), dtype=np.int64)
    base[..., : n // 2] = 1
    return rng.permuted(base, axis=-1)
