"""Integer lattices for temporal modulation arrays (TMA).

Pixel coordinates are ``k = (row, col)``.  A generator ``M`` spans the sampling
lattice ``M Z^2``; its ``|det M|`` cosets carry one exposure code each, and the
dual lattice ``2 pi M^-T Z^2`` folded into ``[-pi, pi)^2`` gives the spatial
carrier frequencies at which the coded planes are modulated.

Carriers are stored exactly as integer numerators ``n`` with
``nu = 2 pi n / N`` so that folding, negation and de-duplication are exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_BOUND = 9

# the matrices reported for 7, 15 and 31 cosets
M3 = ((2, 3), (1, -2))
M4 = ((3, 4), (3, -1))
M5 = ((2, 7), (5, 2))


@dataclass(frozen=True)
class GeneratorMatrix:
    """2x2 integer lattice generator; columns are the lattice basis vectors."""

    entries: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        e = tuple(tuple(int(v) for v in row) for row in self.entries)
        if len(e) != 2 or any(len(r) != 2 for r in e):
            raise ValueError("generator must be 2x2")
        object.__setattr__(self, "entries", e)
        if self.det == 0:
            raise ValueError(f"singular generator {e}")

    @classmethod
    def of(cls, m) -> "GeneratorMatrix":
        if isinstance(m, GeneratorMatrix):
            return m
        a = np.asarray(m, dtype=np.int64).reshape(2, 2)
        return cls(tuple(map(tuple, a.tolist())))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    @property
    def n(self) -> int:
        return abs(self.det)

    @property
    def adjugate(self) -> np.ndarray:
        (a, b), (c, d) = self.entries
        return np.array([[d, -b], [-c, a]], dtype=np.int64)

    @property
    def transpose(self) -> "GeneratorMatrix":
        return GeneratorMatrix.of(self.array.T)

    def __str__(self):
        return "[" + "; ".join(" ".join(str(v) for v in r) for r in self.entries) + "]"


def _fundamental_points(gm: GeneratorMatrix) -> np.ndarray:
    """Integer points of ``M [0,1)^2`` as an (N, 2) array, unsorted."""
    m = gm.array
    corners = m @ np.array([[0, 1, 0, 1], [0, 0, 1, 1]])
    lo, hi = corners.min(axis=1), corners.max(axis=1)
    r, c = np.mgrid[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1]
    pts = np.stack([r.ravel(), c.ravel()], axis=1)
    # q = adj(M) k / det must lie in [0, 1)^2; compare numerators exactly
    num = pts @ gm.adjugate.T
    det = gm.det
    if det < 0:
        num, det = -num, -det
    keep = np.all((num >= 0) & (num < det), axis=1)
    out = pts[keep]
    assert len(out) == gm.n
    return out


def cosets(m) -> list[tuple[int, int]]:
    """Coset offsets ``l_u`` in ``M[0,1)^2 ∩ Z^2``, ordered lexicographically by (row, col)."""
    gm = GeneratorMatrix.of(m)
    pts = _fundamental_points(gm)
    return sorted(map(tuple, pts.tolist()))


def carrier_numerators(m) -> list[tuple[int, int]]:
    """Carriers as integer pairs ``n`` with ``nu = 2 pi n / N``, folded to ``[-N/2, N/2)``.

    Ordered zero first, then lexicographically by the folded (col, row)
    frequency components.
    """
    gm = GeneratorMatrix.of(m)
    n = gm.n
    # 2 pi M^-T q = 2 pi adj(M)^T q / det; q runs over Z^2 / M^T Z^2
    q = _fundamental_points(gm.transpose)
    num = q @ gm.adjugate  # (adj^T q)^T = q^T adj
    if gm.det < 0:
        num = -num
    folded = (num + n // 2) % n - n // 2
    pts = sorted(map(tuple, folded.tolist()), key=lambda p: (p != (0, 0), p[1], p[0]))
    assert len(set(pts)) == n
    return pts


def carriers(m) -> np.ndarray:
    """Modulation frequencies ``nu_r`` (radians/pixel) as an (N, 2) array of (row, col) components."""
    gm = GeneratorMatrix.of(m)
    return 2 * np.pi * np.array(carrier_numerators(gm), dtype=np.float64) / gm.n


def _wrapped_min_distance(nu: np.ndarray) -> float:
    d = nu[:, None, :] - nu[None, :, :]
    d = (d + np.pi) % (2 * np.pi) - np.pi
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())


def hexagonality_score(m) -> float:
    """Minimum wrap-around distance between distinct carriers (larger packs better).

    Equals the length of the shortest nonzero vector of ``2 pi M^-T Z^2``.
    """
    gm = GeneratorMatrix.of(m)
    if gm.n == 1:
        return 2 * np.pi
    return _wrapped_min_distance(carriers(gm))


def search_generator(n: int, bound: int = DEFAULT_BOUND) -> GeneratorMatrix:
    """Exhaustively find the best-packed generator with ``|det| = n``.

    Enumerates every integer 2x2 matrix with entries in ``[-bound, bound]``.
    Ties on the score (to 1e-12) resolve to the lexicographically smallest
    entry tuple ``(m00, m01, m10, m11)``.
    """
    if n < 2 or bound < 1:
        raise ValueError("need n >= 2 and bound >= 1")
    vals = np.arange(-bound, bound + 1)
    a, b, c, d = (g.ravel() for g in np.meshgrid(vals, vals, vals, vals, indexing="ij"))
    hit = np.abs(a * d - b * c) == n
    if not hit.any():
        raise ValueError(f"no generator with |det| = {n} within entry bound {bound}")
    best, best_score = None, -np.inf
    # candidates come out in lexicographic order, so strict improvement keeps the tie-break
    for cand in zip(a[hit], b[hit], c[hit], d[hit]):
        s = round(hexagonality_score(((cand[0], cand[1]), (cand[2], cand[3]))), 12)
        if s > best_score:
            best, best_score = cand, s
    return GeneratorMatrix.of(np.array(best).reshape(2, 2))


@dataclass(frozen=True, eq=False)
class TmaLattice:
    """A generator laid out over an ``height x width`` pixel grid.

    ``coset_of_pixel[k]`` is the canonical coset rank of pixel ``k`` and
    ``code_of_pixel[k] = coset_of_pixel[k] + first_code`` the exposure code it
    carries.  Two-camera designs use codes ``1..N`` (``first_code=1``) since the
    DC code is seen by every pixel; single-camera designs use ``0..N-1``.
    """

    generator: GeneratorMatrix
    height: int
    width: int
    first_code: int = 1

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array(cosets(self.generator), dtype=np.int64)

    @cached_property
    def carrier_numerators(self) -> np.ndarray:
        return np.array(carrier_numerators(self.generator), dtype=np.int64)

    @cached_property
    def carriers(self) -> np.ndarray:
        return 2 * np.pi * self.carrier_numerators / self.n

    @cached_property
    def coset_of_pixel(self) -> np.ndarray:
        rows, cols = np.mgrid[0 : self.height, 0 : self.width]
        return coset_index(self.generator, rows, cols)

    @property
    def code_of_pixel(self) -> np.ndarray:
        return self.coset_of_pixel + self.first_code

    @property
    def codes(self) -> np.ndarray:
        return np.arange(self.n) + self.first_code

    @cached_property
    def period(self) -> tuple[int, int]:
        """Smallest (row, col) translations that leave the coset map unchanged."""
        # t e_i is in the lattice iff adj(M) t e_i is divisible by det
        adj, det = self.generator.adjugate, self.generator.n
        out = []
        for col in adj.T:
            out.append(next(t for t in range(1, det + 1) if np.all((t * col) % det == 0)))
        return tuple(out)

    def mask(self, rank: int) -> np.ndarray:
        return self.coset_of_pixel == rank


def coset_index(m, rows, cols) -> np.ndarray:
    """Canonical coset rank of each pixel ``(rows, cols)`` (broadcasting integer arrays)."""
    gm = GeneratorMatrix.of(m)
    k = np.stack(np.broadcast_arrays(np.asarray(rows), np.asarray(cols)), axis=-1).astype(np.int64)
    det = gm.det
    # q = floor(M^-1 k) exactly, then l = k - M q lies in M[0,1)^2
    q = np.floor_divide(k @ gm.adjugate.T, det) if det > 0 else np.floor_divide(-(k @ gm.adjugate.T), -det)
    ell = k - q @ gm.array.T
    offs = np.array(cosets(gm), dtype=np.int64)
    lo = offs.min(axis=0)
    span = offs.max(axis=0) - lo + 1
    lut = np.full(tuple(span), -1, dtype=np.int64)
    lut[offs[:, 0] - lo[0], offs[:, 1] - lo[1]] = np.arange(len(offs))
    return lut[ell[..., 0] - lo[0], ell[..., 1] - lo[1]]


def build_tma(m, height: int, width: int, first_code: int = 1) -> TmaLattice:
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be positive")
    return TmaLattice(GeneratorMatrix.of(m), int(height), int(width), int(first_code))


def character_matrix(tma: TmaLattice) -> np.ndarray:
    """``E[r, u] = exp(-j nu_r . l_u)`` in canonical carrier/coset order."""
    phase = (tma.carrier_numerators @ tma.offsets.T) % tma.n
    return np.exp(-2j * np.pi * phase / tma.n)
