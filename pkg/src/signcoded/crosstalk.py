"""Optical crosstalk between modulator mirrors and camera pixels.

Each mirror's light lands on the camera as a small Gaussian spot, so the
camera image is ``v = A u`` with ``A`` sparse (camera pixels x mirrors).  With
the camera oversampling the mirror grid the system is overdetermined and
``u`` is recovered by least squares.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, eigsh, splu

TRUNCATE = 3.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500


class ConvergenceError(RuntimeError):
    """CG stopped before reaching the requested tolerance."""

    def __init__(self, residual: float, iterations: int, tol: float):
        super().__init__(f"CG did not reach tol={tol:g} in {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class OpticalMap:
    """Mirror grid imaged onto a camera through a Gaussian PSF.

    Mirror ``(i, j)`` sits at mirror coordinates ``(i, j + shift_i)`` where
    ``shift_i`` is 1/2 on odd rows for the quincunx layout and 0 otherwise.
    The map to camera pixel coordinates scales pixel-center positions by
    ``camera / mirror`` per axis.
    """

    mirror_dims: tuple[int, int]
    camera_dims: tuple[int, int]
    sigma_psf: float
    layout: str = "square"

    @property
    def scale(self) -> tuple[float, float]:
        return (self.camera_dims[0] / self.mirror_dims[0], self.camera_dims[1] / self.mirror_dims[1])

    @property
    def n_mirrors(self) -> int:
        return self.mirror_dims[0] * self.mirror_dims[1]

    @property
    def n_pixels(self) -> int:
        return self.camera_dims[0] * self.camera_dims[1]

    def mirror_centers(self) -> np.ndarray:
        """(n_mirrors, 2) camera-pixel coordinates of each mirror's spot center."""
        mh, mw = self.mirror_dims
        i, j = np.mgrid[0:mh, 0:mw].astype(np.float64)
        if self.layout == "quincunx":
            j = j + 0.5 * (i.astype(int) % 2)
        sy, sx = self.scale
        return np.column_stack([((i + 0.5) * sy - 0.5).ravel(), ((j + 0.5) * sx - 0.5).ravel()])

    @cached_property
    def matrix(self) -> sparse.csc_matrix:
        return _assemble(self)


def build_optical_map(mirror_dims, camera_dims, sigma_psf: float, layout: str = "square") -> OpticalMap:
    mirror_dims = tuple(int(v) for v in mirror_dims)
    camera_dims = tuple(int(v) for v in camera_dims)
    if len(mirror_dims) != 2 or len(camera_dims) != 2 or min(mirror_dims) < 1:
        raise ValueError("dims must be two positive integers")
    if any(c < m for c, m in zip(camera_dims, mirror_dims)):
        raise ValueError("camera must have at least as many pixels as mirrors along each axis")
    if not sigma_psf >= 0:
        raise ValueError("sigma_psf must be nonnegative")
    if layout not in ("square", "quincunx"):
        raise ValueError(f"unknown layout {layout!r}")
    return OpticalMap(mirror_dims, camera_dims, float(sigma_psf), layout)


def _assemble(om: OpticalMap) -> sparse.csc_matrix:
    ch, cw = om.camera_dims
    centers = om.mirror_centers()
    sig = om.sigma_psf
    rad = int(np.ceil(TRUNCATE * sig)) + 1
    offs = np.arange(-rad, rad + 1)
    # candidate footprint around the nearest pixel of every center
    near = np.rint(centers).astype(np.int64)
    pr = near[:, 0, None, None] + offs[None, :, None]
    pc = near[:, 1, None, None] + offs[None, None, :]
    pr, pc = np.broadcast_arrays(pr, pc)
    dy = pr - centers[:, 0, None, None]
    dx = pc - centers[:, 1, None, None]
    d2 = dy**2 + dx**2
    inside = (pr >= 0) & (pr < ch) & (pc >= 0) & (pc < cw)
    if sig > 0:
        w = np.exp(-d2 / (2 * sig**2)) * (d2 <= (TRUNCATE * sig) ** 2) * inside
    else:
        w = np.zeros(d2.shape)
    # spots narrower than a pixel (or cut off by the border) go to the nearest pixel
    empty = w.reshape(len(centers), -1).sum(axis=1) <= 0
    if empty.any():
        d2m = np.where(inside, d2, np.inf)[empty].reshape(int(empty.sum()), -1)
        hit = np.argmin(d2m, axis=1)
        sub = np.zeros_like(d2m)
        sub[np.arange(len(hit)), hit] = 1.0
        w[empty] = sub.reshape((-1,) + w.shape[1:])
    w = w / w.reshape(len(centers), -1).sum(axis=1)[:, None, None]
    keep = w > 0
    cols = np.broadcast_to(np.arange(len(centers))[:, None, None], w.shape)[keep]
    rows = (pr * cw + pc)[keep]
    a = sparse.csc_matrix((w[keep], (rows, cols)), shape=(om.n_pixels, om.n_mirrors))
    a.sum_duplicates()
    return a


def forward_capture(om: OpticalMap, u) -> np.ndarray:
    """Camera image ``A u`` for mirror intensities ``u`` of shape ``mirror_dims``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != om.mirror_dims:
        raise ValueError(f"mirror image is {u.shape}, map expects {om.mirror_dims}")
    return (om.matrix @ u.ravel()).reshape(om.camera_dims)


@dataclass
class CrosstalkSolution:
    u: np.ndarray
    residual: float  # ||A^T (v - A u)|| / ||A^T v||
    data_residual: float  # ||v - A u|| / ||v||
    iterations: int


def correct_crosstalk(om: OpticalMap, v, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> CrosstalkSolution:
    """Least-squares mirror intensities from a camera image.

    Runs Jacobi-preconditioned conjugate gradients on ``A^T A u = A^T v``
    until the normal-equation residual falls to ``tol`` relative to
    ``||A^T v||``.

    Raises:
        ConvergenceError: if ``max_iter`` iterations are not enough.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != om.camera_dims:
        raise ValueError(f"camera image is {v.shape}, map expects {om.camera_dims}")
    a = om.matrix
    b = a.T @ v.ravel()
    shape = om.mirror_dims
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return CrosstalkSolution(np.zeros(shape), 0.0, 0.0, 0)
    normal = (a.T @ a).tocsr()
    precond = sparse.diags(1.0 / normal.diagonal())
    count = [0]

    def tick(_):
        count[0] += 1

    u, _ = cg(normal, b, rtol=tol, atol=0.0, maxiter=max_iter, M=precond, callback=tick)
    res = float(np.linalg.norm(b - normal @ u) / bnorm)
    if res > tol:
        raise ConvergenceError(res, count[0], tol)
    vn = np.linalg.norm(v)
    data = float(np.linalg.norm(v.ravel() - a @ u) / vn) if vn > 0 else 0.0
    return CrosstalkSolution(u.reshape(shape), res, data, count[0])


def system_condition(om: OpticalMap) -> float:
    """``cond(A) = sqrt(cond(A^T A))`` from the extreme eigenvalues of the normal matrix."""
    normal = (om.matrix.T @ om.matrix).tocsc()
    if normal.shape[0] <= 64:
        ev = np.linalg.eigvalsh(normal.toarray())
        hi, lo = ev[-1], ev[0]
    else:
        hi = eigsh(normal, k=1, which="LA", return_eigenvectors=False)[0]
        # smallest eigenvalue of A^T A is the largest of its inverse
        lu = splu(normal)
        inv = sparse.linalg.LinearOperator(normal.shape, matvec=lu.solve, dtype=np.float64)
        lo = 1.0 / eigsh(inv, k=1, which="LA", return_eigenvectors=False)[0]
    if lo <= 0:
        return float("inf")
    return float(np.sqrt(hi / lo))
