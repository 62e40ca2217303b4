import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import signcoded.demosaic as dm
from signcoded.capture import encode_design1
from signcoded.demosaic import bilinear_demosaic, build_demodulation, demosaic, freq_select_demosaic, interpolation_operator, multiplex
from signcoded.lattice import M3, M4, M5, build_tma, hexagonality_score
from signcoded.scenes import bandlimited_planes


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("m", [M3, M4])
def test_bilinear_constants_exact(m):
    tma = build_tma(m, 30, 33)
    vals = np.arange(1, tma.n + 1, dtype=float)
    planes = np.broadcast_to(vals[:, None, None], (tma.n,) + tma.shape)
    out = bilinear_demosaic(multiplex(planes, tma), tma)
    assert np.allclose(out.planes, planes, atol=1e-12)
    assert out.codes.tolist() == tma.codes.tolist()


def test_partition_of_unity():
    tma = build_tma(M5, 20, 20)
    for r in range(tma.n):
        idx, op = interpolation_operator(tma, r)
        assert np.allclose(np.asarray(op.sum(axis=1)).ravel(), 1.0)
        assert np.all(tma.coset_of_pixel.ravel()[idx] == r)


def test_bilinear_single_sample():
    # a lone sample of one coset spreads with unit weights everywhere
    tma = build_tma([[5, 0], [0, 5]], 5, 5)
    r = np.zeros((5, 5))
    r[0, 0] = 1.0
    out = bilinear_demosaic(r, tma)
    assert np.allclose(out.planes[0], 1.0)


def test_bilinear_ramp_m3():
    tma = build_tma(M3, 64, 64)
    rows, cols = np.mgrid[0:64, 0:64].astype(float)
    planes = np.stack([0.5 + 0.01 * (u + 1) * rows - 0.004 * cols for u in range(7)])
    out = bilinear_demosaic(multiplex(planes, tma), tma).planes
    rng_ = planes.max() - planes.min()
    assert np.abs(out - planes).max() < 0.02 * rng_
    # exact in fact, border included
    assert np.abs(out - planes).max() < 1e-9


def test_empty_coset():
    with pytest.raises(ValueError):
        bilinear_demosaic(np.zeros((2, 2)), build_tma(M5, 2, 2))


def test_demodulation_square():
    sys = build_demodulation(build_tma([[2, 0], [0, 2]], 8, 8))
    e = sys.E
    assert abs(np.linalg.det(e)) == pytest.approx(16)
    assert np.allclose(e @ e.conj().T, 4 * np.eye(4))
    assert np.allclose(e.real, np.round(e.real)) and np.allclose(e.imag, 0)


def test_demodulation_properties():
    sys = build_demodulation(build_tma(M3, 28, 28))
    assert sys.condition < 10
    assert sys.lowpass[0, 0] == 1.0
    assert sys.passband == pytest.approx(0.9 * hexagonality_score(M3) / 2)
    assert not sys.extended
    for bad in (0.0, -0.5, 1.01):
        with pytest.raises(ValueError):
            build_demodulation(build_tma(M3, 28, 28), bad)


def test_condition_guard(monkeypatch):
    monkeypatch.setattr(dm, "character_matrix", lambda tma: np.ones((tma.n, tma.n), dtype=complex))
    with pytest.raises(ValueError, match="ill-conditioned"):
        build_demodulation(build_tma(M3, 14, 14))


@pytest.mark.parametrize("m,size", [(M3, 56), (M4, 60)])
def test_fs_constant_planes(m, size):
    tma = build_tma(m, size, size)
    planes = np.broadcast_to(np.linspace(-1, 1, tma.n)[:, None, None], (tma.n,) + tma.shape)
    out = freq_select_demosaic(multiplex(planes, tma), build_demodulation(tma))
    assert np.allclose(out.planes, planes, atol=1e-12)


@pytest.mark.parametrize("m,size", [(M3, 70), (M4, 60), (M4, 90)])
def test_fs_bandlimited_exact(m, size):
    tma = build_tma(m, size, size)
    sys = build_demodulation(tma)
    planes = bandlimited_planes(np.random.default_rng(1), tma.n, size, size, 0.95 * sys.passband)
    out = freq_select_demosaic(multiplex(planes, tma), sys)
    for u in range(tma.n):
        assert rel(out.planes[u], planes[u]) < 1e-6
    assert out.diagnostics["max_imag"] < 1e-9


@pytest.mark.parametrize("size,boundary", [(60, "extend"), (64, "auto")])
def test_fs_vs_bilinear_on_smooth_scene(size, boundary):
    # travelling low-frequency waves: smooth in space and time, not periodic on the grid
    r, c = np.mgrid[0:size, 0:size] / 60.0
    t = np.arange(16)[:, None, None] / 16
    video = 0.5 + 0.2 * np.sin(2 * np.pi * (r + 0.3 * c + t)) + 0.1 * np.cos(2 * np.pi * (c - 0.5 * r - 2 * t))
    tma = build_tma(M4, size, size)
    cap = encode_design1(video, tma)
    resid = cap.images["pos"] - cap.images["neg"]
    fs = demosaic(resid, tma, "fs", boundary=boundary).planes
    bl = demosaic(resid, tma, "bilinear").planes
    assert rel(fs, bl) < 0.05


def test_boundary_modes():
    tma = build_tma(M4, 60, 60)
    assert build_demodulation(tma, boundary="extend").extended
    assert not build_demodulation(tma, boundary="periodic").extended
    with pytest.raises(ValueError):
        build_demodulation(build_tma(M4, 64, 64), boundary="periodic")
    with pytest.raises(ValueError):
        build_demodulation(tma, boundary="mirror")


def test_extended_canvas_smooth():
    # sizes that are not multiples of the period run on a padded canvas
    tma = build_tma(M4, 64, 64)
    sys = build_demodulation(tma)
    assert sys.extended and sys.canvas.height % 15 == 0
    rows, cols = np.mgrid[0:64, 0:64] / 64.0
    planes = np.stack([np.sin(2 + u + 2 * rows) * np.cos(1 + 3 * cols) for u in range(15)])
    out = freq_select_demosaic(multiplex(planes, tma), sys)
    assert rel(out.planes, planes) < 0.02


@given(st.integers(0, 2**31))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    tma = build_tma(M3, 21, 19)
    a, b = rng.standard_normal((2, 21, 19))
    for method in ("fs", "bilinear"):
        lhs = demosaic(2 * a - 3 * b, tma, method).planes
        rhs = 2 * demosaic(a, tma, method).planes - 3 * demosaic(b, tma, method).planes
        assert np.allclose(lhs, rhs, atol=1e-10)


def test_multiplex_round_trip(rng):
    tma = build_tma(M4, 17, 23)
    r = rng.standard_normal(tma.shape)
    for method in ("fs", "bilinear"):
        planes = demosaic(r, tma, method).planes
        if method == "bilinear":
            assert np.allclose(multiplex(planes, tma), r)
        assert np.all(np.isfinite(planes))
    with pytest.raises(ValueError):
        multiplex(np.zeros((3, 17, 23)), tma)
    with pytest.raises(ValueError):
        demosaic(r, tma, "cnn")
    with pytest.raises(ValueError):
        demosaic(r[:5], tma)


def test_coefficient_lookup():
    tma = build_tma(M3, 14, 14)
    planes = np.stack([np.full(tma.shape, float(u)) for u in range(7)])
    out = demosaic(multiplex(planes, tma), tma, "bilinear")
    assert np.allclose(out[3], 2.0)
