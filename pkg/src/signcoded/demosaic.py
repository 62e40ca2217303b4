"""Recover full-resolution coded planes from a TMA mosaic.

The mosaic (``residual``) holds, at pixel ``k``, the value of the plane whose
code the TMA assigns to ``k``.  Two demosaickers are provided:

* :func:`bilinear_demosaic`: piecewise-linear interpolation over a Delaunay
  triangulation of each coset's samples, linearly extrapolated at the border.
* :func:`freq_select_demosaic`: demodulate every carrier, lowpass, and undo the
  coset phase mixing with ``E^-1``.

Planes are returned in coset-rank order; plane ``r`` belongs to code
``r + tma.first_code``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay, QhullError

from .lattice import GeneratorMatrix, TmaLattice, character_matrix, coset_index, hexagonality_score

MAX_CONDITION = 1e6
TRANSITION = 0.1
DEFAULT_CUTOFF = 0.9
MIN_PAD = 16


@dataclass
class CoefficientPlanes:
    planes: np.ndarray  # (N, H, W)
    codes: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, code: int) -> np.ndarray:
        return self.planes[int(np.flatnonzero(self.codes == code)[0])]


@dataclass(eq=False)
class DemodulationSystem:
    """Carrier-phase matrix ``E`` and the radial raised-cosine lowpass.

    ``canvas`` is the lattice the FFTs run on.  It equals ``tma`` when the
    image size is a multiple of the lattice period; otherwise it is a larger
    period-aligned grid with ``pad`` pixels before the image on each axis.
    """

    tma: TmaLattice
    E: np.ndarray
    lowpass: np.ndarray
    cutoff: float
    passband: float
    canvas: TmaLattice
    pad: tuple[int, int] = (0, 0)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.E))

    @property
    def extended(self) -> bool:
        return self.canvas is not self.tma


def _check_residual(residual, tma: TmaLattice) -> np.ndarray:
    r = np.asarray(residual, dtype=np.float64)
    if r.shape != tma.shape:
        raise ValueError(f"residual is {r.shape}, TMA is {tma.shape}")
    return r


def raised_cosine(rho: np.ndarray, edge: float, transition: float = TRANSITION) -> np.ndarray:
    """1 up to ``edge``, cosine roll-off to 0 at ``edge * (1 + transition)``."""
    width = edge * transition
    t = np.clip((rho - edge) / width, 0.0, 1.0)
    return 0.5 * (1 + np.cos(np.pi * t))


def _canvas(tma: TmaLattice, min_pad: int, boundary: str) -> tuple[TmaLattice, tuple[int, int]]:
    ph, pw = tma.period
    aligned = tma.height % ph == 0 and tma.width % pw == 0
    if boundary == "periodic" and not aligned:
        raise ValueError(f"periodic boundary needs dimensions divisible by the lattice period {tma.period}")
    if boundary == "periodic" or (boundary == "auto" and aligned):
        return tma, (0, 0)
    # offsets that are whole periods keep the coset map aligned with the image
    p0 = ph * -(-min_pad // ph)
    p1 = pw * -(-min_pad // pw)
    h2 = ph * -(-(tma.height + 2 * p0) // ph)
    w2 = pw * -(-(tma.width + 2 * p1) // pw)
    return TmaLattice(tma.generator, h2, w2, tma.first_code), (p0, p1)


def build_demodulation(tma: TmaLattice, cutoff: float = DEFAULT_CUTOFF, min_pad: int = MIN_PAD, boundary: str = "auto") -> DemodulationSystem:
    """Set up frequency selection for ``tma``.

    The lowpass passband edge is ``cutoff`` times half the minimum
    wrap-around distance between carriers, with a 10% raised-cosine roll-off.

    ``boundary`` picks the FFT canvas: ``"periodic"`` wraps the image itself
    (its size must be a multiple of the lattice period), ``"extend"`` pads it
    by at least ``min_pad`` pixels per side, and ``"auto"`` wraps when the
    size allows and extends otherwise.
    """
    if not 0 < cutoff <= 1:
        raise ValueError(f"cutoff must lie in (0, 1], got {cutoff}")
    if boundary not in ("auto", "periodic", "extend"):
        raise ValueError(f"unknown boundary {boundary!r}")
    E = character_matrix(tma)
    cond = np.linalg.cond(E)
    if not cond < MAX_CONDITION:
        raise ValueError(f"carrier matrix is ill-conditioned (cond={cond:.3g})")
    edge = cutoff * hexagonality_score(tma.generator) / 2
    canvas, pad = _canvas(tma, min_pad, boundary)
    wr = 2 * np.pi * np.fft.fftfreq(canvas.height)
    wc = 2 * np.pi * np.fft.fftfreq(canvas.width)
    rho = np.hypot(wr[:, None], wc[None, :])
    return DemodulationSystem(tma, E, raised_cosine(rho, edge), cutoff, edge, canvas, pad)


def _negation_partner(tma: TmaLattice) -> np.ndarray:
    num = tma.carrier_numerators
    n = tma.n
    neg = (-num + n // 2) % n - n // 2
    lut = {tuple(p): i for i, p in enumerate(num.tolist())}
    return np.array([lut[tuple(p)] for p in neg.tolist()])


def _select(r: np.ndarray, tma: TmaLattice, E: np.ndarray, lowpass: np.ndarray) -> np.ndarray:
    n = tma.n
    rows, cols = np.mgrid[0 : tma.height, 0 : tma.width]
    d = np.empty((n,) + tma.shape, dtype=np.complex128)
    for i, (a, b) in enumerate(tma.carrier_numerators):
        phase = (a * rows + b * cols) % n
        d[i] = np.fft.ifft2(np.fft.fft2(r * np.exp(-2j * np.pi * phase / n)) * lowpass)
    d = 0.5 * (d + np.conj(d[_negation_partner(tma)]))
    return n * np.einsum("ur,rhw->uhw", np.linalg.inv(E), d)


def freq_select_demosaic(residual, sys: DemodulationSystem) -> CoefficientPlanes:
    """Frequency-selection demosaicking.

    For each carrier ``nu_r`` the mosaic is shifted to baseband by
    ``exp(-j nu_r . k)`` and lowpassed, giving
    ``d_r = (1/N) sum_u E[r, u] h_u``.  Conjugate carrier pairs are
    symmetrized and ``h = N E^-1 d`` solved per pixel.

    On an extended canvas the margin is filled by re-mosaicking reflected
    bilinear estimates of the planes before filtering.
    """
    tma = sys.tma
    r = _check_residual(residual, tma)
    if sys.extended:
        c = sys.canvas
        p0, p1 = sys.pad
        rough = bilinear_demosaic(r, tma).planes
        pads = ((0, 0), (p0, c.height - tma.height - p0), (p1, c.width - tma.width - p1))
        big = multiplex(np.pad(rough, pads, mode="symmetric"), c)
        big[p0 : p0 + tma.height, p1 : p1 + tma.width] = r
        h = _select(big, c, sys.E, sys.lowpass)[:, p0 : p0 + tma.height, p1 : p1 + tma.width]
    else:
        h = _select(r, tma, sys.E, sys.lowpass)
    imag = float(np.abs(h.imag).max()) if h.size else 0.0
    diag = {"method": "fs", "cond_E": sys.condition, "max_imag": imag, "extended": sys.extended}
    return CoefficientPlanes(np.ascontiguousarray(h.real), tma.codes, diag)


def _barycentric_rows(tri: Delaunay, pts: np.ndarray, simplex: np.ndarray):
    t = tri.transform[simplex]
    b = np.einsum("nij,nj->ni", t[:, :2], pts - t[:, 2])
    return np.column_stack([b, 1 - b.sum(axis=1)])


@lru_cache(maxsize=64)
def _interp_operator(gm: GeneratorMatrix, height: int, width: int, rank: int) -> tuple[np.ndarray, sparse.csr_matrix]:
    rows, cols = np.mgrid[0:height, 0:width]
    owner = coset_index(gm, rows, cols).ravel()
    sample_idx = np.flatnonzero(owner == rank)
    if sample_idx.size == 0:
        raise ValueError(f"coset {rank} has no pixels in a {height}x{width} image")
    pix = np.column_stack([rows.ravel(), cols.ravel()]).astype(np.float64)
    samples = pix[sample_idx]
    npix = pix.shape[0]

    tri = None
    if samples.shape[0] >= 3:
        try:
            tri = Delaunay(samples)
        except QhullError:  # collinear samples
            pass
    if tri is None:
        # too few samples for triangles: inverse-distance weights over all of them
        d = np.hypot(*(pix[:, None, :] - samples[None, :, :]).transpose(2, 0, 1))
        w = 1.0 / np.maximum(d, 1e-12) ** 2
        w[d == 0] = 1e24
        w /= w.sum(axis=1, keepdims=True)
        return sample_idx, sparse.csr_matrix(w)

    simplex = tri.find_simplex(pix)
    outside = np.flatnonzero(simplex < 0)
    if outside.size:
        # extrapolate with the triangle at the nearest sample that is least negative
        touching = [[] for _ in range(samples.shape[0])]
        for s, verts in enumerate(tri.simplices):
            for v in verts:
                touching[v].append(s)
        nearest = np.argmin(((pix[outside, None, :] - samples[None]) ** 2).sum(-1), axis=1)
        for j, p in zip(outside, nearest):
            cand = np.array(touching[p])
            bary = _barycentric_rows(tri, np.repeat(pix[j : j + 1], len(cand), 0), cand)
            simplex[j] = cand[np.argmax(bary.min(axis=1))]
    bary = _barycentric_rows(tri, pix, simplex)
    r = np.repeat(np.arange(npix), 3)
    c = tri.simplices[simplex].ravel()
    op = sparse.csr_matrix((bary.ravel(), (r, c)), shape=(npix, samples.shape[0]))
    return sample_idx, op


def interpolation_operator(tma: TmaLattice, rank: int):
    """``(sample_pixels, A)`` with ``A @ residual.ravel()[sample_pixels]`` the filled plane."""
    return _interp_operator(tma.generator, tma.height, tma.width, int(rank))


def bilinear_demosaic(residual, tma: TmaLattice) -> CoefficientPlanes:
    """Interpolate each coset's samples to the full grid.

    Rows of every interpolation operator sum to one, so constants are
    reproduced exactly; linear ramps are reproduced exactly too, including the
    border where the triangle nearest the pixel is extrapolated.
    """
    r = _check_residual(residual, tma).ravel()
    planes = np.empty((tma.n,) + tma.shape)
    for rank in range(tma.n):
        idx, op = interpolation_operator(tma, rank)
        planes[rank] = (op @ r[idx]).reshape(tma.shape)
    return CoefficientPlanes(planes, tma.codes, {"method": "bilinear"})


def multiplex(planes, tma: TmaLattice) -> np.ndarray:
    """Inverse of demosaicking on the sampled pixels: pick plane ``coset(k)`` at each ``k``."""
    p = np.asarray(planes)
    if p.shape != (tma.n,) + tma.shape:
        raise ValueError(f"expected planes of shape {(tma.n,) + tma.shape}, got {p.shape}")
    return np.take_along_axis(p, tma.coset_of_pixel[None], axis=0)[0]


def demosaic(residual, tma: TmaLattice, method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto") -> CoefficientPlanes:
    if method == "fs":
        return freq_select_demosaic(residual, build_demodulation(tma, cutoff, boundary=boundary))
    if method == "bilinear":
        return bilinear_demosaic(residual, tma)
    raise ValueError(f"unknown demosaic method {method!r}")
