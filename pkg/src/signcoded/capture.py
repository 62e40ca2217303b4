"""Coded-exposure image formation.

A frame stack ``f`` has shape ``(T, H, W)`` with ``T = 2**m`` and values in
``[0, 1]``.  Captured images are raw sums over the exposure window (not
averages) and the sensor is linear: no saturation, no photon noise.

``layout=None`` selects *full-code* mode, where every pixel is observed under
every code (as if ``T`` sub-captures were taken); images then gain a leading
code axis.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .hadamard import CodeKind, ExposureCode, order_of, random_binary_rows, walsh_kernel
from .lattice import TmaLattice

TILE = 16


class Design(str, Enum):
    DESIGN1 = "design1"
    DESIGN2 = "design2"
    SINGLE = "single"


@dataclass(frozen=True, eq=False)
class TiledPattern:
    """Per-pixel pseudo-random binary codes on a ``tile x tile`` patch repeated over the image."""

    m: int
    seed: int
    tile: int = TILE

    @property
    def codes(self) -> np.ndarray:
        """Binary codes of shape ``(tile, tile, T)``, exactly ``T/2`` ones each."""
        rng = np.random.default_rng(self.seed)
        n = self.tile * self.tile
        return random_binary_rows(rng, n, 1 << self.m).reshape(self.tile, self.tile, -1)

    def weights(self, height: int, width: int) -> np.ndarray:
        c = self.codes
        r = np.arange(height) % self.tile
        q = np.arange(width) % self.tile
        return np.moveaxis(c[r[:, None], q[None, :]], -1, 0)


@dataclass(frozen=True, eq=False)
class CodedCapture:
    """Simulated sensor images plus the acquisition parameters needed to decode them.

    ``images`` keys: ``pos``/``neg`` (design 1), ``ac``/``dc`` (design 2) or
    ``coded`` (single binary camera).
    """

    design: Design
    images: dict
    m: int
    layout: TmaLattice | TiledPattern | None
    code: ExposureCode | None = None
    split: float = 0.5
    noise_sigma: float = 0.0
    offset_eta: float = 0.0
    gain: float = 1.0
    seed: int | None = field(default=None)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.images.values())).shape[-2:]

    @property
    def full_code(self) -> bool:
        return self.layout is None


def as_stack(stack) -> np.ndarray:
    f = np.asarray(stack, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"frame stack must be (T, H, W), got shape {f.shape}")
    order_of(f.shape[0])
    if not np.all(np.isfinite(f)):
        raise ValueError("frame stack has non-finite values")
    return f


def _check_layout(f: np.ndarray, layout) -> None:
    if layout is not None and tuple(layout.shape) != f.shape[1:]:
        raise ValueError(f"layout is {layout.shape}, stack frames are {f.shape[1:]}")


def code_weights(rows: np.ndarray, tma: TmaLattice) -> np.ndarray:
    """Per-pixel temporal weights ``w[x, k] = rows[code(k), x]`` as a ``(T, H, W)`` array."""
    codes = tma.code_of_pixel
    if codes.min() < 0 or codes.max() >= rows.shape[0]:
        raise ValueError(f"TMA codes {tma.first_code}..{tma.first_code + tma.n - 1} exceed the {rows.shape[0]} available codes")
    return np.moveaxis(rows[codes], -1, 0)


def _walsh_weights(f: np.ndarray, tma: TmaLattice | None) -> np.ndarray:
    k = walsh_kernel(order_of(f.shape[0]))
    return k if tma is None else code_weights(k, tma)


def _integrate(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    if w.ndim == 2:  # full-code: one image per code row
        return np.einsum("ux,xhw->uhw", w, f)
    return np.einsum("xhw,xhw->hw", w, f)


def encode_design1(stack, tma: TmaLattice | None) -> CodedCapture:
    """Positive and negative coded cameras sharing one DMD.

    ``pos = sum_x f (1 + w_u) / 2`` and ``neg = sum_x f (1 - w_u) / 2`` where
    ``w_u`` is the signed Walsh code of the pixel's TMA code ``u``.
    """
    f = as_stack(stack)
    _check_layout(f, tma)
    w = _walsh_weights(f, tma)
    pos = _integrate(f, (1 + w) / 2)
    neg = _integrate(f, (1 - w) / 2)
    return CodedCapture(Design.DESIGN1, {"pos": pos, "neg": neg}, order_of(f.shape[0]), tma)


def encode_design2(stack, tma: TmaLattice | None, split: float = 0.5) -> CodedCapture:
    """Unmodulated DC camera plus positive-Hadamard AC camera behind a beamsplitter.

    ``split`` is the fraction of light sent to the DC camera.
    """
    if not 0 < split < 1:
        raise ValueError(f"beam split must lie in (0, 1), got {split}")
    f = as_stack(stack)
    _check_layout(f, tma)
    w = _walsh_weights(f, tma)
    dc = split * f.sum(axis=0)
    ac = (1 - split) * _integrate(f, (1 + w) / 2)
    return CodedCapture(Design.DESIGN2, {"ac": ac, "dc": dc}, order_of(f.shape[0]), tma, split=split)


def encode_single_binary(stack, code: ExposureCode | None, layout) -> CodedCapture:
    """One binary-coded camera.

    ``layout`` is either a :class:`TmaLattice` (the pixel's code indexes
    ``code.rows``) or a :class:`TiledPattern` carrying its own per-pixel
    pseudo-random codes (``code`` must then be ``None`` or pseudo-random).
    """
    f = as_stack(stack)
    m = order_of(f.shape[0])
    if isinstance(layout, TiledPattern):
        if code is not None and code.kind is not CodeKind.PSEUDO_RANDOM:
            raise ValueError("a tiled layout only carries pseudo-random codes")
        if layout.m != m:
            raise ValueError("tiled pattern length does not match the stack")
        w = layout.weights(*f.shape[1:])
    elif isinstance(layout, TmaLattice):
        if code is None or not code.binary or code.m != m:
            raise ValueError("a TMA layout needs a binary code bank of matching length")
        _check_layout(f, layout)
        w = code_weights(code.rows, layout)
    else:
        raise TypeError(f"unsupported layout {type(layout).__name__}")
    coded = np.einsum("xhw,xhw->hw", w, f)
    return CodedCapture(Design.SINGLE, {"coded": coded}, m, layout, code=code)


def degrade(capture: CodedCapture, sigma: float = 0.0, eta: float = 0.0, gain: float = 1.0, seed: int | None = 0) -> CodedCapture:
    """Apply sensor offset, analog gain and additive Gaussian noise to every image.

    Each image ``v`` becomes ``gain * (v + eta + n)`` with ``n ~ N(0, sigma^2)``
    i.i.d. per pixel, so the recorded noise has standard deviation
    ``gain * sigma``.  Images draw from independent streams spawned from
    ``seed`` in sorted key order, so results depend on the seed alone.
    """
    if sigma < 0:
        raise ValueError("noise sigma must be nonnegative")
    if gain <= 0:
        raise ValueError("gain must be positive")
    names = sorted(capture.images)
    streams = np.random.SeedSequence(seed).spawn(len(names))
    out = {}
    for name, ss in zip(names, streams):
        v = capture.images[name]
        noisy = v + eta
        if sigma > 0:
            noisy = noisy + sigma * np.random.default_rng(ss).standard_normal(v.shape)
        out[name] = gain * noisy
    return dataclasses.replace(capture, images=out, noise_sigma=sigma, offset_eta=eta, gain=gain, seed=seed)
