"""End-to-end acceptance checks, one test per criterion (6 is split in two)."""
import json
import time

import numpy as np
import pytest

from signcoded.analysis import condition_number, light_efficiency, random_condition_survey, sensing_matrix
from signcoded.capture import degrade, encode_design2
from signcoded.cli import main
from signcoded.crosstalk import build_optical_map, correct_crosstalk, forward_capture
from signcoded.demosaic import build_demodulation, freq_select_demosaic, multiplex
from signcoded.eval import SweepConfig, run_noise_sweep, synthetic_chips
from signcoded.hadamard import forward_walsh, inverse_walsh
from signcoded.io import read_stack, write_stack
from signcoded.lattice import M3, M4, M5, build_tma, hexagonality_score, search_generator
from signcoded.reconstruct import recon_design2
from signcoded.scenes import bandlimited_planes, corpus

from conftest import walsh_oracle

SIGMAS = (0.0, 2 / 255, 5 / 255, 10 / 255, 20 / 255)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_c1_condition_numbers(criterion):
    t0 = time.perf_counter()
    oh = condition_number(sensing_matrix("one-hot", 4))
    d1 = condition_number(sensing_matrix("hadamard-design1", 4))
    ph = condition_number(sensing_matrix("positive-hadamard", 4))
    d2 = condition_number(sensing_matrix("hadamard-design2", 4))
    survey = random_condition_survey(4, 100_000, seed=1)
    secs = time.perf_counter() - t0
    ok = (
        oh == 1.0 and d1 == 1.0 and abs(ph - 9.90) <= 0.01 and abs(d2 - 2.6180) <= 0.001
        and 100 <= survey["median"] <= 127 and survey["fraction_singular"] > 0 and secs < 120
    )
    criterion("1 sensing-matrix condition numbers", ok,
              f"one-hot {oh}, design1 {d1}, positive {ph:.4f}, design2 {d2:.4f}, "
              f"random median {survey['median']:.2f} singular {survey['fraction_singular']:.4f}, {secs:.1f}s")
    assert ok


def test_c2_light_efficiency(criterion):
    got = [light_efficiency(s, 4) for s in ("one-hot", "pseudo-random", "positive-hadamard", "hadamard-design1", "hadamard-design2")]
    ok = got == [1 / 16, 1 / 2, 1 / 2, 1.0, 3 / 4]
    criterion("2 light efficiencies", ok, ", ".join(repr(g) for g in got))
    assert ok


def test_c3_walsh_transform(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for m in range(1, 9):
        f = rng.standard_normal((1 << m, 1000))
        worst = max(worst, rel(inverse_walsh(forward_walsh(f)), f))
    oracle_ok = all(np.array_equal(forward_walsh(np.eye(1 << m)), walsh_oracle(m)) for m in range(1, 6))
    ok = worst < 1e-12 and oracle_ok
    criterion("3 Walsh round trip and dense oracle", ok, f"worst round-trip {worst:.2e}, oracle match {oracle_ok}")
    assert ok


def test_c4_offset_confinement(criterion):
    f = corpus(7, 1)[0]
    tma = build_tma(M4, 64, 64)
    cap = encode_design2(f, tma)
    clean = recon_design2(cap).frames
    worst_rest, worst_f0 = 0.0, 0.0
    for eta in (0.02, -0.1, 0.5):
        out = recon_design2(degrade(cap, 0.0, eta)).frames
        worst_rest = max(worst_rest, np.abs(out[1:] - clean[1:]).max())
        worst_f0 = max(worst_f0, np.abs(out[0] - clean[0] - eta / 0.5).max())
    ok = worst_rest < 1e-9 and worst_f0 < 1e-9
    criterion("4 offset confined to frame 0", ok, f"max change in frames 1.. {worst_rest:.1e}, frame-0 shift error {worst_f0:.1e}")
    assert ok


def test_c5_exact_recovery(criterion):
    plane_err = 0.0
    for gm, size in ((M3, 70), (M4, 60)):
        tma = build_tma(gm, size, size)
        sys = build_demodulation(tma)
        planes = bandlimited_planes(np.random.default_rng(5), tma.n, size, size, 0.95 * sys.passband)
        out = freq_select_demosaic(multiplex(planes, tma), sys)
        plane_err = max(plane_err, max(rel(out.planes[u], planes[u]) for u in range(tma.n)))
    h = bandlimited_planes(np.random.default_rng(6), 16, 60, 60, 0.6)
    h *= 0.5 / np.abs(h).max()
    h[0] += 8.0
    video = inverse_walsh(h)
    frames = recon_design2(encode_design2(video, build_tma(M4, 60, 60)), demosaic_method="fs").frames
    frame_err = max(rel(frames[x], video[x]) for x in range(16))
    ok = plane_err < 1e-6 and frame_err < 1e-3
    criterion("5 bandlimited exact recovery", ok, f"plane error {plane_err:.1e}, design-2 frame error {frame_err:.1e}")
    assert ok


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    chips = synthetic_chips(100, seed=2024)
    res = run_noise_sweep(chips, ["fc", "one-hot", "pseudo-random"], SIGMAS, SweepConfig(seed=7))
    return res, time.perf_counter() - t0


def _means(res, sigma, key="mse"):
    return res.mean("fc", sigma, "fs", key), res.mean("one-hot", sigma, "fs", key), res.mean("pseudo-random", sigma, "none", key)


def test_c6_noise_ordering(sweep, criterion):
    res, secs = sweep
    ok, parts = not res.errors and secs < 600, []
    for s in SIGMAS[1:]:
        fc, oh, pr = _means(res, s)
        sfc, soh, spr = _means(res, s, "ssim")
        cell = fc < oh and fc < pr and sfc > soh and sfc > spr
        ok &= cell
        parts.append(f"{s * 255:g}/255: mse {fc:.2e}/{oh:.2e}/{pr:.2e} ssim {sfc:.3f}/{soh:.3f}/{spr:.3f}")
    criterion("6a FC best at every sigma > 0 (fc/one-hot/pseudo-random)", ok, "; ".join(parts) + f"; {secs:.0f}s")
    assert ok


def test_c6_noise_free_parity(sweep, criterion):
    # linear decoders at sigma = 0: FC keeps a full-resolution DC plane, the
    # tile ridge baseline is limited to one value per 16x16 tile
    res, _ = sweep
    fc, oh, pr = _means(res, 0.0)
    spread = max(fc, oh, pr) / min(fc, oh, pr)
    ok = spread <= 2
    criterion("6b near-equal MSE at sigma = 0 (within 2x)", ok, f"fc {fc:.2e}, one-hot {oh:.2e}, pseudo-random {pr:.2e}, spread {spread:.1f}x")
    assert ok


def test_c7_lattice_search(criterion):
    parts, ok = [], True
    for n, ref in ((7, M3), (15, M4), (31, M5)):
        gm = search_generator(n, 9)
        s, r = hexagonality_score(gm), hexagonality_score(ref)
        ok &= abs(gm.det) == n and s >= r - 1e-12
        parts.append(f"N={n}: {s:.4f} vs {r:.4f}")
    criterion("7 lattice search scores", ok, ", ".join(parts))
    assert ok


def test_c8_crosstalk(criterion):
    om = build_optical_map((64, 64), (160, 160), 1.0, "quincunx")
    u = np.random.default_rng(8).random((64, 64))
    sol = correct_crosstalk(om, forward_capture(om, u), max_iter=500)
    err = rel(sol.u, u)
    ok = err < 1e-6 and sol.iterations <= 500
    criterion("8 crosstalk round trip", ok, f"relative error {err:.1e} in {sol.iterations} iterations")
    assert ok


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c9_determinism(tmp_path, capsys, criterion):
    src = tmp_path / "video.fstk"
    write_stack(src, corpus(11, 1, height=48, width=48)[0])
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"schemes": ["fc", "fc-design2", "one-hot", "positive-hadamard", "pseudo-random"],
                               "sigmas": [0, 0.02], "demosaic": ["fs", "bilinear"], "corpus": {"synthetic": 3}}))
    runs = []
    for i, threads in enumerate(("1", "2", "4", "1")):
        out = tmp_path / f"run{i}"
        out.mkdir()
        g = ["--seed", "5", "--threads", threads]
        rcs = [
            main(g + ["encode", "--input", str(src), "--output", str(out / "cap"), "--scheme", "design2", "--sigma", "0.01"]),
            main(g + ["decode", "--input", str(out / "cap"), "--output", str(out / "frames.fstk")]),
            main(g + ["encode", "--input", str(src), "--output", str(out / "pr"), "--scheme", "pseudo-random", "--sigma", "0.01"]),
            main(g + ["decode", "--input", str(out / "pr"), "--output", str(out / "pr_frames.fstk")]),
            main(g + ["experiment", "--config", str(cfg), "--out", str(out / "exp")]),
            main(g + ["crosstalk", "--mirrors", "32", "32", "--noise", "0.01", "--output", str(out / "xt.json")]),
            main(g + ["lattice", "--n", "15", "--out", str(out / "lat")]),
        ]
        runs.append((rcs, _tree_bytes(out)))
    capsys.readouterr()
    ok = all(rcs == [0] * 7 for rcs, _ in runs) and all(files == runs[0][1] for _, files in runs[1:])
    ok &= read_stack(tmp_path / "run0" / "frames.fstk").shape == (16, 48, 48)
    criterion("9 byte-identical outputs across runs and thread counts", ok, f"{len(runs[0][1])} files x {len(runs)} runs")
    assert ok
