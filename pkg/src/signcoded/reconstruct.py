"""Frame reconstruction for every coding scheme.

All pipelines divide out the analog gain first; no offset calibration is
attempted.  Two-camera designs recover Walsh coefficients ``h(k, u)`` and
invert them per pixel; one-hot demosaicks frames directly; the pseudo-random
baseline solves a ridge-regularized least-squares problem per patch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capture import CodedCapture, Design, TiledPattern
from .demosaic import DEFAULT_CUTOFF, demosaic
from .hadamard import CodeKind, inverse_walsh
from .lattice import TmaLattice


@dataclass
class ReconstructionResult:
    frames: np.ndarray  # (T, H, W)
    method: str
    diagnostics: dict = field(default_factory=dict)


def _require(capture: CodedCapture, design: Design, kind: CodeKind | None = None) -> None:
    if capture.design is not design:
        raise ValueError(f"expected a {design.value} capture, got {capture.design.value}")
    if kind is not None and (capture.code is None or capture.code.kind is not kind):
        raise ValueError(f"expected {kind.value} codes")


def _tma(capture: CodedCapture, tma: TmaLattice | None) -> TmaLattice | None:
    tma = capture.layout if tma is None else tma
    if tma is not None and tuple(tma.shape) != tuple(capture.shape):
        raise ValueError("TMA does not match the capture size")
    return tma


def _scatter_planes(h: np.ndarray, residual, tma: TmaLattice, method: str, cutoff: float, boundary: str, diag: dict) -> None:
    """Demosaick ``residual`` and write each plane into ``h[code]``."""
    planes = demosaic(residual, tma, method, cutoff, boundary)
    t = h.shape[0]
    for code, plane in zip(planes.codes, planes.planes):
        if 0 <= code < t:
            h[code] = plane
    diag.update(planes.diagnostics)
    missing = sorted(set(range(1, t)) - set(int(c) for c in planes.codes))
    if missing:
        diag["missing_codes"] = missing


def _signed_pipeline(h0, residual, capture, tma, method, cutoff, boundary, name) -> ReconstructionResult:
    t = 1 << capture.m
    diag = {"design": capture.design.value, "demosaic": method if tma is not None else "none"}
    if tma is None:
        h = residual.copy()
        h[0] = h0
    else:
        h = np.zeros((t,) + h0.shape)
        _scatter_planes(h, residual, tma, method, cutoff, boundary, diag)
        h[0] = h0
    frames = inverse_walsh(h)
    if capture.offset_eta:
        diag["frame0_offset_uncalibrated"] = True
    return ReconstructionResult(frames, name, diag)


def recon_design1(capture: CodedCapture, tma: TmaLattice | None = None, demosaic_method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto") -> ReconstructionResult:
    """``h(0) = pos + neg`` everywhere, ``h(u) = pos - neg`` demosaicked, then inverse Walsh."""
    _require(capture, Design.DESIGN1)
    tma = _tma(capture, tma)
    pos = capture.images["pos"] / capture.gain
    neg = capture.images["neg"] / capture.gain
    if tma is None:
        h0 = pos[0] + neg[0]
    else:
        h0 = pos + neg
    return _signed_pipeline(h0, pos - neg, capture, tma, demosaic_method, cutoff, boundary, "design1")


def recon_design2(capture: CodedCapture, tma: TmaLattice | None = None, demosaic_method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto") -> ReconstructionResult:
    """Normalize the beam split, form ``2 AC - DC``, demosaick, set ``h(0) = DC``.

    A constant offset common to both cameras lands in every coefficient
    equally (exactly so for a 50/50 split) and therefore only in frame 0.
    """
    _require(capture, Design.DESIGN2)
    tma = _tma(capture, tma)
    dc = capture.images["dc"] / (capture.gain * capture.split)
    ac = capture.images["ac"] / (capture.gain * (1 - capture.split))
    return _signed_pipeline(dc, 2 * ac - dc, capture, tma, demosaic_method, cutoff, boundary, "design2")


def recon_onehot(capture: CodedCapture, tma: TmaLattice | None = None, demosaic_method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto") -> ReconstructionResult:
    """Each coset sees one frame; demosaicking the mosaic yields the frames directly."""
    _require(capture, Design.SINGLE, CodeKind.ONE_HOT)
    tma = _tma(capture, tma)
    t = 1 << capture.m
    if tma is None or sorted(tma.codes.tolist()) != list(range(t)):
        raise ValueError(f"one-hot reconstruction needs a TMA carrying codes 0..{t - 1}")
    v = capture.images["coded"] / capture.gain
    planes = demosaic(v, tma, demosaic_method, cutoff, boundary)
    frames = np.empty((t,) + v.shape)
    frames[planes.codes] = planes.planes
    return ReconstructionResult(frames, "one-hot", dict(planes.diagnostics))


def recon_positive(capture: CodedCapture, tma: TmaLattice | None = None, demosaic_method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto") -> ReconstructionResult:
    """Single positive-Hadamard camera: code 0 is the DC plane, ``h(u) = 2 p_u - p_0``."""
    _require(capture, Design.SINGLE, CodeKind.POSITIVE_HADAMARD)
    tma = _tma(capture, tma)
    t = 1 << capture.m
    if tma is None or sorted(tma.codes.tolist()) != list(range(t)):
        raise ValueError(f"positive-Hadamard reconstruction needs a TMA carrying codes 0..{t - 1}")
    v = capture.images["coded"] / capture.gain
    planes = demosaic(v, tma, demosaic_method, cutoff, boundary)
    p = np.empty((t,) + v.shape)
    p[planes.codes] = planes.planes
    h = 2 * p - p[0]
    h[0] = p[0]
    return ReconstructionResult(inverse_walsh(h), "positive-hadamard", dict(planes.diagnostics))


def default_ridge(gram: np.ndarray) -> float:
    return 1e-3 * np.trace(gram) / gram.shape[0]


def _box_sums(a: np.ndarray, size: int) -> np.ndarray:
    """Sums over every ``size x size`` window (valid positions) of the last two axes."""
    c = np.cumsum(np.cumsum(a, axis=-2), axis=-1)
    c = np.pad(c, [(0, 0)] * (a.ndim - 2) + [(1, 0), (1, 0)])
    return c[..., size:, size:] - c[..., :-size, size:] - c[..., size:, :-size] + c[..., :-size, :-size]


def recon_random_ls(capture: CodedCapture, lam: float | None = None, mode: str = "tile") -> ReconstructionResult:
    """Ridge least-squares baseline for the tiled pseudo-random code.

    The scene is assumed constant over a patch for each frame, and
    ``(A^T A + lam I) f = A^T v`` is solved with ``A`` holding the patch's
    binary code rows.  ``mode="tile"`` solves once per tile and paints the
    tile; ``mode="sliding"`` solves for a tile-sized window around every pixel
    (clamped inside the image).  This is a conditioning baseline, not a
    sparsity-regularized compressive-sensing solver.
    """
    _require(capture, Design.SINGLE, None)
    pat = capture.layout
    if not isinstance(pat, TiledPattern):
        raise ValueError("pseudo-random reconstruction needs a tiled pattern layout")
    v = capture.images["coded"] / capture.gain
    hgt, wid = v.shape
    t = 1 << capture.m
    codes = pat.codes.astype(np.float64)  # (tile, tile, T)
    a_full = codes.reshape(-1, t)
    gram_full = a_full.T @ a_full
    lam = default_ridge(gram_full) if lam is None else float(lam)
    diag = {"lambda": lam, "mode": mode, "cond_A": float(np.linalg.cond(a_full))}
    frames = np.empty((t, hgt, wid))
    if mode == "tile":
        tile = pat.tile
        for y0 in range(0, hgt, tile):
            for x0 in range(0, wid, tile):
                blk = v[y0 : y0 + tile, x0 : x0 + tile]
                a = codes[: blk.shape[0], : blk.shape[1]].reshape(-1, t)
                g = a.T @ a + lam * np.eye(t)
                f = np.linalg.solve(g, a.T @ blk.ravel())
                frames[:, y0 : y0 + tile, x0 : x0 + tile] = f[:, None, None]
    elif mode == "sliding":
        tile = pat.tile
        if hgt < tile or wid < tile:
            raise ValueError("sliding mode needs an image at least one tile in size")
        # every full window holds each tile code exactly once, so A^T A is shared
        w = pat.weights(hgt, wid).astype(np.float64)
        rhs = _box_sums(w * v, tile)  # (T, H-tile+1, W-tile+1)
        y0 = np.clip(np.arange(hgt) - tile // 2, 0, hgt - tile)
        x0 = np.clip(np.arange(wid) - tile // 2, 0, wid - tile)
        b = rhs[:, y0[:, None], x0[None, :]]
        ginv = np.linalg.inv(gram_full + lam * np.eye(t))
        frames = np.einsum("ij,jhw->ihw", ginv, b)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ReconstructionResult(frames, "pseudo-random", diag)


def reconstruct(capture: CodedCapture, demosaic_method: str = "fs", cutoff: float = DEFAULT_CUTOFF, boundary: str = "auto", **kw) -> ReconstructionResult:
    """Dispatch on the capture's design and code kind.

    Extra keywords go to :func:`recon_random_ls` for tiled pseudo-random captures.
    """
    if capture.design is Design.DESIGN1:
        return recon_design1(capture, demosaic_method=demosaic_method, cutoff=cutoff, boundary=boundary)
    if capture.design is Design.DESIGN2:
        return recon_design2(capture, demosaic_method=demosaic_method, cutoff=cutoff, boundary=boundary)
    if isinstance(capture.layout, TiledPattern):
        return recon_random_ls(capture, **kw)
    kind = capture.code.kind if capture.code is not None else None
    if kind is CodeKind.ONE_HOT:
        return recon_onehot(capture, demosaic_method=demosaic_method, cutoff=cutoff, boundary=boundary)
    if kind is CodeKind.POSITIVE_HADAMARD:
        return recon_positive(capture, demosaic_method=demosaic_method, cutoff=cutoff, boundary=boundary)
    raise ValueError("no reconstruction for this capture")
