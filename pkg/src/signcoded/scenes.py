"""Synthetic high-speed video for simulation studies.

Scenes are a static smooth background with a few soft-edged rectangles and
blobs moving across it, all in ``[0, 1]``.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def _soft_rect(rows, cols, cy, cx, hh, hw, edge):
    # product of two logistic ramps gives a rectangle with blurred edges
    sy = 1 / (1 + np.exp((np.abs(rows - cy) - hh) / edge))
    sx = 1 / (1 + np.exp((np.abs(cols - cx) - hw) / edge))
    return sy * sx


def _blob(rows, cols, cy, cx, radius):
    return np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2 * radius**2))


def smooth_background(rng: np.random.Generator, height: int, width: int, scale: float = 8.0) -> np.ndarray:
    bg = gaussian_filter(rng.standard_normal((height, width)), scale, mode="wrap")
    bg = (bg - bg.min()) / max(np.ptp(bg), 1e-12)
    return 0.15 + 0.35 * bg


def moving_scene(
    rng: np.random.Generator,
    frames: int = 16,
    height: int = 64,
    width: int = 64,
    objects: int = 3,
    speed: tuple[float, float] = (0.5, 1.5),
    edge: float = 1.5,
) -> np.ndarray:
    """One ``(frames, height, width)`` clip of soft objects moving in straight lines."""
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    bg = smooth_background(rng, height, width)
    video = np.repeat(bg[None], frames, axis=0)
    for _ in range(objects):
        amp = rng.uniform(0.25, 0.45) * rng.choice([-1, 1])
        cy, cx = rng.uniform(0.2, 0.8) * height, rng.uniform(0.2, 0.8) * width
        ang = rng.uniform(0, 2 * np.pi)
        v = rng.uniform(*speed)
        vy, vx = v * np.sin(ang), v * np.cos(ang)
        rect = rng.random() < 0.5
        hh, hw = rng.uniform(4, 10), rng.uniform(4, 10)
        radius = rng.uniform(3, 7)
        for t in range(frames):
            y, x = cy + vy * (t - frames / 2), cx + vx * (t - frames / 2)
            shape = _soft_rect(rows, cols, y, x, hh, hw, edge) if rect else _blob(rows, cols, y, x, radius)
            video[t] += amp * shape
    return np.clip(video, 0.0, 1.0)


def corpus(seed: int, count: int, frames: int = 16, height: int = 64, width: int = 64, **kw) -> list[np.ndarray]:
    """``count`` independent clips, deterministic per seed."""
    streams = np.random.SeedSequence(seed).spawn(count)
    return [moving_scene(np.random.default_rng(s), frames, height, width, **kw) for s in streams]


def moving_square_video(frames: int = 48, height: int = 128, width: int = 128, size: int = 12, region=(32, 32, 64, 64)) -> np.ndarray:
    """Static gray field with one square oscillating inside ``region = (y0, x0, h, w)``."""
    video = np.full((frames, height, width), 0.3)
    y0, x0, rh, rw = region
    for t in range(frames):
        off = int(round((rw - size) * (0.5 + 0.5 * np.sin(2 * np.pi * t / 8))))
        video[t, y0 + (rh - size) // 2 : y0 + (rh - size) // 2 + size, x0 + off : x0 + off + size] = 0.9
    return video


def bandlimited_planes(rng: np.random.Generator, count: int, height: int, width: int, radius: float) -> np.ndarray:
    """Real random planes whose spectra vanish outside ``|omega| < radius`` on the FFT grid."""
    wr = 2 * np.pi * np.fft.fftfreq(height)
    wc = 2 * np.pi * np.fft.fftfreq(width)
    mask = np.hypot(wr[:, None], wc[None, :]) < radius
    noise = rng.standard_normal((count, height, width))
    return np.fft.ifft2(np.fft.fft2(noise) * mask).real
