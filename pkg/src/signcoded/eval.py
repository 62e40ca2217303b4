"""Quality metrics and the noise-sweep experiment harness.

A sweep runs every (chip, scheme, sigma) cell through encode, degrade,
reconstruct and score.  Each cell draws its noise from a seed derived from
``(seed, chip_id, scheme, sigma index)`` so results do not depend on the
order or concurrency of execution.
"""
from __future__ import annotations

import csv
import io as _io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .capture import TiledPattern, degrade, encode_design1, encode_design2, encode_single_binary
from .demosaic import DEFAULT_CUTOFF
from .hadamard import CodeKind, make_code
from .io import atomic_write_text, dump_json, read_stack
from .lattice import M4, GeneratorMatrix, build_tma, search_generator
from .reconstruct import recon_design1, recon_design2, recon_onehot, recon_positive, recon_random_ls
from .scenes import corpus

SSIM_K1, SSIM_K2 = 0.01, 0.03
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5, an 11-tap window
ACTIVITY_THRESHOLD = 1e-4
DEFAULT_SIGMAS = (0.0, 2 / 255, 5 / 255, 10 / 255, 20 / 255)
CHIP_FRAMES, CHIP_SIZE = 16, 64

# fixed order used to derive per-cell seeds; never reorder
SCHEMES = ("fc", "fc-design2", "one-hot", "positive-hadamard", "pseudo-random")
CSV_HEADER = ("scheme", "sigma", "demosaic", "chip_id", "mse", "ssim")


def mse(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def _ssim2d(a: np.ndarray, b: np.ndarray, data_range: float) -> float:
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def blur(x):
        return gaussian_filter(x, SSIM_SIGMA, truncate=SSIM_TRUNCATE)

    mu_a, mu_b = blur(a), blur(b)
    va = blur(a * a) - mu_a**2
    vb = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
    # drop the border where the window hangs over the edge
    r = int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5)
    return float(s[r:-r, r:-r].mean()) if min(s.shape) > 2 * r else float(s.mean())


def ssim(a, b, data_range: float = 1.0) -> float:
    """Gaussian-windowed SSIM; a ``(T, H, W)`` stack scores the mean over frames."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        return _ssim2d(a, b, data_range)
    if a.ndim == 3:
        return float(np.mean([_ssim2d(x, y, data_range) for x, y in zip(a, b)]))
    raise ValueError("ssim takes a frame or a frame stack")


@dataclass
class Chip:
    frames: np.ndarray  # (T, H, W)
    origin: tuple[int, int, int]  # (t, y, x) in the source
    activity: float
    source: int = 0


def temporal_activity(frames) -> float:
    """Mean over pixels of the temporal variance."""
    return float(np.var(np.asarray(frames, dtype=np.float64), axis=0).mean())


def extract_chips(video, count: int, seed: int, activity_threshold: float = ACTIVITY_THRESHOLD, frames: int = CHIP_FRAMES, size: int = CHIP_SIZE, max_tries: int | None = None, source: int = 0) -> list[Chip]:
    """Random ``frames x size x size`` crops whose temporal activity passes the threshold.

    Origins are uniform; a crop below the threshold is rejected and redrawn.
    After ``max_tries`` draws (default ``50 * count``) the chips found so far
    are returned with a warning.
    """
    v = np.asarray(video, dtype=np.float64)
    t, h, w = v.shape
    if t < frames or h < size or w < size:
        raise ValueError(f"source {v.shape} is smaller than one {frames}x{size}x{size} chip")
    rng = np.random.default_rng(seed)
    tries = 50 * count if max_tries is None else max_tries
    out = []
    for _ in range(tries):
        if len(out) == count:
            break
        o = (int(rng.integers(t - frames + 1)), int(rng.integers(h - size + 1)), int(rng.integers(w - size + 1)))
        crop = v[o[0] : o[0] + frames, o[1] : o[1] + size, o[2] : o[2] + size]
        act = temporal_activity(crop)
        if act >= activity_threshold:
            out.append(Chip(crop.copy(), o, act, source))
    if len(out) < count:
        warnings.warn(f"found {len(out)} of {count} chips above activity {activity_threshold:g}", RuntimeWarning, stacklevel=2)
    return out


def synthetic_chips(count: int, seed: int, frames: int = CHIP_FRAMES, size: int = CHIP_SIZE) -> list[Chip]:
    """Chips straight from the bundled moving-object generator."""
    return [Chip(c, (0, 0, 0), temporal_activity(c), i) for i, c in enumerate(corpus(seed, count, frames, size, size))]


def _generator(spec) -> GeneratorMatrix:
    if isinstance(spec, int):
        return search_generator(spec)
    return GeneratorMatrix.of(spec)


@dataclass
class SweepConfig:
    """Settings for :func:`run_noise_sweep`.

    ``fc_lattice`` and ``single_lattice`` are generator matrices or a coset
    count to search for.  The two-camera schemes carry codes ``1..N`` and the
    single-camera TMA schemes codes ``0..N-1``.
    """

    demosaic: tuple[str, ...] = ("fs",)
    cutoff: float = DEFAULT_CUTOFF
    seed: int = 0
    fc_lattice: object = M4
    single_lattice: object = 16
    pattern_seed: int = 123
    ridge_mode: str = "tile"
    ridge_lambda: float | None = None
    split: float = 0.5
    threads: int = 1


@dataclass
class SweepResult:
    records: list[dict]
    errors: list[dict] = field(default_factory=list)

    def aggregates(self) -> list[dict]:
        cells: dict[tuple, list] = {}
        for r in self.records:
            cells.setdefault((r["scheme"], r["sigma"], r["demosaic"]), []).append(r)
        out = []
        for (scheme, sigma, dm), rs in sorted(cells.items(), key=lambda kv: (SCHEMES.index(kv[0][0]), kv[0][1], kv[0][2])):
            ok = [r for r in rs if math.isfinite(r["mse"])]
            out.append({
                "scheme": scheme,
                "sigma": sigma,
                "demosaic": dm,
                "count": len(ok),
                "failed": len(rs) - len(ok),
                "mean_mse": float(np.mean([r["mse"] for r in ok])) if ok else None,
                "mean_ssim": float(np.mean([r["ssim"] for r in ok])) if ok else None,
            })
        return out

    def mean(self, scheme: str, sigma: float, demosaic: str, key: str = "mse") -> float:
        vals = [r[key] for r in self.records if r["scheme"] == scheme and r["sigma"] == sigma and r["demosaic"] == demosaic]
        return float(np.mean(vals))

    def to_csv(self) -> str:
        buf = _io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in self.records:
            wr.writerow([r["scheme"], repr(r["sigma"]), r["demosaic"], r["chip_id"], repr(r["mse"]), repr(r["ssim"])])
        return buf.getvalue()


def cell_seed(seed: int, chip_id: int, scheme: str, sigma_index: int) -> int:
    ss = np.random.SeedSequence([seed, chip_id, SCHEMES.index(scheme), sigma_index])
    return int(ss.generate_state(1, np.uint64)[0])


class _Pipelines:
    """Lattices and code banks shared by every cell of one sweep."""

    def __init__(self, cfg: SweepConfig, shape: tuple[int, int], m: int):
        h, w = shape
        self.cfg = cfg
        self.fc_tma = build_tma(_generator(cfg.fc_lattice), h, w, first_code=1)
        self.single_tma = build_tma(_generator(cfg.single_lattice), h, w, first_code=0)
        self.onehot = make_code(CodeKind.ONE_HOT, m)
        self.positive = make_code(CodeKind.POSITIVE_HADAMARD, m)
        self.pattern = TiledPattern(m, cfg.pattern_seed)

    def demosaics(self, scheme: str) -> tuple[str, ...]:
        return ("none",) if scheme == "pseudo-random" else self.cfg.demosaic

    def run(self, frames, scheme: str, sigma: float, seed: int) -> dict[str, np.ndarray]:
        """Reconstructed stacks keyed by demosaic method (one noise draw shared by all)."""
        cfg = self.cfg
        if scheme == "fc":
            cap, rec = encode_design1(frames, self.fc_tma), recon_design1
        elif scheme == "fc-design2":
            cap, rec = encode_design2(frames, self.fc_tma, cfg.split), recon_design2
        elif scheme == "one-hot":
            cap, rec = encode_single_binary(frames, self.onehot, self.single_tma), recon_onehot
        elif scheme == "positive-hadamard":
            cap, rec = encode_single_binary(frames, self.positive, self.single_tma), recon_positive
        elif scheme == "pseudo-random":
            cap = degrade(encode_single_binary(frames, None, self.pattern), sigma, seed=seed)
            return {"none": recon_random_ls(cap, cfg.ridge_lambda, cfg.ridge_mode).frames}
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        cap = degrade(cap, sigma, seed=seed)
        return {dm: rec(cap, demosaic_method=dm, cutoff=cfg.cutoff).frames for dm in cfg.demosaic}


def run_noise_sweep(chips: list[Chip], schemes, sigmas=DEFAULT_SIGMAS, config: SweepConfig | None = None) -> SweepResult:
    """Score every scheme at every noise level on every chip.

    A failing cell is recorded with NaN scores and listed in ``errors``; the
    sweep carries on.
    """
    cfg = config or SweepConfig()
    schemes = list(schemes)
    sigmas = [float(s) for s in sigmas]
    if not chips or not schemes or not sigmas:
        raise ValueError("need at least one chip, scheme and sigma")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
    if any(s < 0 for s in sigmas):
        raise ValueError("sigmas must be nonnegative")
    t = chips[0].frames.shape[0]
    m = t.bit_length() - 1
    shapes = {c.frames.shape for c in chips}
    if len(shapes) != 1 or t != 1 << m:
        raise ValueError("chips must share one (2**m, H, W) shape")
    pipes = _Pipelines(cfg, chips[0].frames.shape[1:], m)

    def one_chip(cid: int):
        chip = chips[cid].frames
        recs, errs = [], []
        for scheme in schemes:
            for si, sigma in enumerate(sigmas):
                try:
                    outs = pipes.run(chip, scheme, sigma, cell_seed(cfg.seed, cid, scheme, si))
                    scores = {dm: (mse(f, chip), ssim(f, chip)) for dm, f in outs.items()}
                except Exception as exc:  # noqa: BLE001  recorded per cell
                    scores = {dm: (math.nan, math.nan) for dm in pipes.demosaics(scheme)}
                    errs.append({"scheme": scheme, "sigma": sigma, "chip_id": cid, "error": f"{type(exc).__name__}: {exc}"})
                for dm, (e, s) in scores.items():
                    recs.append({"scheme": scheme, "sigma": sigma, "demosaic": dm, "chip_id": cid, "mse": e, "ssim": s})
        return recs, errs

    ids = range(len(chips))
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(one_chip, ids))
    else:
        parts = [one_chip(i) for i in ids]
    records = [r for recs, _ in parts for r in recs]
    errors = [e for _, errs in parts for e in errs]
    order = {s: i for i, s in enumerate(SCHEMES)}
    records.sort(key=lambda r: (order[r["scheme"]], r["sigma"], r["demosaic"], r["chip_id"]))
    return SweepResult(records, errors)


EXPERIMENT_KEYS = {"schemes", "sigmas", "demosaic", "cutoff", "lattice", "seeds", "corpus", "ridge", "split", "m"}
CORPUS_KEYS = {"synthetic", "paths", "chips_per_video", "activity_threshold"}


@dataclass
class ExperimentConfig:
    schemes: tuple[str, ...] = ("fc", "one-hot", "pseudo-random")
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    sweep: SweepConfig = field(default_factory=SweepConfig)
    m: int = 4
    synthetic: int = 100
    paths: tuple[str, ...] = ()
    chips_per_video: int = 150
    activity_threshold: float = ACTIVITY_THRESHOLD
    corpus_seed: int = 0


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ValueError(f"{where} must be an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ValueError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _lattice_spec(v, name):
    if isinstance(v, bool):
        raise ValueError(f"lattice.{name} must be a coset count or a 2x2 matrix")
    if isinstance(v, int):
        if v < 2:
            raise ValueError(f"lattice.{name} needs at least 2 cosets")
        return v
    a = np.asarray(v)
    if a.shape != (2, 2) or not np.issubdtype(a.dtype, np.integer):
        raise ValueError(f"lattice.{name} must be a coset count or a 2x2 integer matrix")
    return GeneratorMatrix.of(a)


def parse_experiment_config(d: dict, threads: int = 1) -> ExperimentConfig:
    """Validate a JSON experiment config before any compute.

    Keys: ``schemes``, ``sigmas``, ``demosaic`` (list), ``cutoff``, ``m``,
    ``split``, ``lattice: {fc, single}`` (matrix or coset count),
    ``seeds: {sweep, corpus, pattern}``, ``ridge: {mode, lambda}`` and
    ``corpus: {synthetic | paths, chips_per_video, activity_threshold}``.
    """
    _reject_unknown(d, EXPERIMENT_KEYS, "config")
    cfg = ExperimentConfig()
    sw = SweepConfig(threads=threads)
    if "schemes" in d:
        bad = [s for s in d["schemes"] if s not in SCHEMES]
        if bad or not d["schemes"]:
            raise ValueError(f"schemes must be a nonempty subset of {SCHEMES}")
        cfg.schemes = tuple(d["schemes"])
    if "sigmas" in d:
        sig = tuple(float(s) for s in d["sigmas"])
        if not sig or min(sig) < 0:
            raise ValueError("sigmas must be a nonempty list of nonnegative numbers")
        cfg.sigmas = sig
    if "demosaic" in d:
        dm = d["demosaic"]
        dm = (dm,) if isinstance(dm, str) else tuple(dm)
        if not dm or any(x not in ("fs", "bilinear") for x in dm):
            raise ValueError("demosaic must be 'fs', 'bilinear' or a list of them")
        sw.demosaic = dm
    if "cutoff" in d:
        sw.cutoff = float(d["cutoff"])
        if not 0 < sw.cutoff <= 1:
            raise ValueError("cutoff must lie in (0, 1]")
    if "split" in d:
        sw.split = float(d["split"])
        if not 0 < sw.split < 1:
            raise ValueError("split must lie in (0, 1)")
    if "m" in d:
        cfg.m = int(d["m"])
        if not 1 <= cfg.m <= 8:
            raise ValueError("m must lie in 1..8")
    lat = d.get("lattice", {})
    _reject_unknown(lat, {"fc", "single"}, "lattice")
    if "fc" in lat:
        sw.fc_lattice = _lattice_spec(lat["fc"], "fc")
    if "single" in lat:
        sw.single_lattice = _lattice_spec(lat["single"], "single")
    seeds = d.get("seeds", {})
    _reject_unknown(seeds, {"sweep", "corpus", "pattern"}, "seeds")
    sw.seed = int(seeds.get("sweep", sw.seed))
    sw.pattern_seed = int(seeds.get("pattern", sw.pattern_seed))
    cfg.corpus_seed = int(seeds.get("corpus", cfg.corpus_seed))
    ridge = d.get("ridge", {})
    _reject_unknown(ridge, {"mode", "lambda"}, "ridge")
    sw.ridge_mode = ridge.get("mode", sw.ridge_mode)
    if sw.ridge_mode not in ("tile", "sliding"):
        raise ValueError("ridge.mode must be 'tile' or 'sliding'")
    sw.ridge_lambda = None if ridge.get("lambda") is None else float(ridge["lambda"])
    corp = d.get("corpus", {})
    _reject_unknown(corp, CORPUS_KEYS, "corpus")
    if "synthetic" in corp and "paths" in corp:
        raise ValueError("corpus takes either synthetic or paths, not both")
    cfg.synthetic = int(corp.get("synthetic", cfg.synthetic))
    cfg.paths = tuple(str(p) for p in corp.get("paths", ()))
    cfg.chips_per_video = int(corp.get("chips_per_video", cfg.chips_per_video))
    cfg.activity_threshold = float(corp.get("activity_threshold", cfg.activity_threshold))
    if cfg.synthetic < 1 and not cfg.paths:
        raise ValueError("corpus is empty")
    cfg.sweep = sw
    return cfg


def load_chips(cfg: ExperimentConfig) -> list[Chip]:
    t = 1 << cfg.m
    if not cfg.paths:
        return synthetic_chips(cfg.synthetic, cfg.corpus_seed, frames=t)
    chips = []
    seeds = np.random.SeedSequence(cfg.corpus_seed).spawn(len(cfg.paths))
    for i, (path, ss) in enumerate(zip(cfg.paths, seeds)):
        video = read_stack(path)
        seed = int(ss.generate_state(1, np.uint64)[0])
        chips += extract_chips(video, cfg.chips_per_video, seed, cfg.activity_threshold, frames=t, source=i)
    if not chips:
        raise ValueError("no chip passed the activity threshold")
    return chips


def run_experiment(cfg: ExperimentConfig, out_dir) -> SweepResult:
    """Run the sweep and write ``results.csv`` and ``aggregate.json`` into ``out_dir``."""
    chips = load_chips(cfg)
    res = run_noise_sweep(chips, cfg.schemes, cfg.sigmas, cfg.sweep)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "results.csv", res.to_csv())
    atomic_write_text(out / "aggregate.json", dump_json({"cells": res.aggregates(), "errors": res.errors, "chips": len(chips)}))
    return res
