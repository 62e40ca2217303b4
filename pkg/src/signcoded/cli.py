"""Command-line interface.

Subcommands: ``codes``, ``lattice``, ``encode``, ``decode``, ``experiment``,
``crosstalk`` and ``import``.  Global flags ``--seed``, ``--threads`` and
``--config`` may appear before or after the subcommand.  ``--config`` names a
JSON file: for ``experiment`` it is the experiment definition, for the other
subcommands it supplies option defaults keyed by option name.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, io
from .capture import CodedCapture, Design, TiledPattern, degrade, encode_design1, encode_design2, encode_single_binary
from .crosstalk import build_optical_map, correct_crosstalk, forward_capture, system_condition
from .demosaic import DEFAULT_CUTOFF, raised_cosine
from .eval import load_chips, parse_experiment_config, run_noise_sweep
from .hadamard import CodeKind, ExposureCode, make_code, order_of
from .lattice import DEFAULT_BOUND, M3, M4, M5, GeneratorMatrix, TmaLattice, build_tma, carrier_numerators, cosets, hexagonality_score, search_generator
from .reconstruct import reconstruct

KNOWN_GENERATORS = {7: M3, 15: M4, 31: M5}
ENCODE_SCHEMES = ("design1", "design2", "one-hot", "positive-hadamard", "pseudo-random")


class CliError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------- codes


def cmd_codes(args) -> int:
    reports = analysis.scheme_report(args.m, survey_trials=args.survey, seed=args.seed, split=args.split)
    print("scheme,condition,light_efficiency")
    for r in reports:
        print(f"{r.scheme},{r.condition!r},{r.efficiency!r}")
        if r.stats:
            print(f"# {r.scheme}: median over {r.stats['trials']} draws, fraction singular {r.stats['fraction_singular']!r}", file=sys.stderr)
    print("# hadamard-design2 condition is that of the per-pixel rows [1; (1 + w_u)/2]; stacked variants:", file=sys.stderr)
    for key, c in analysis.design2_candidates(args.m).items():
        print(f"#   {key}: {c:.6f}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- lattice


def _generator_from_args(args, default_n: int | None = None) -> GeneratorMatrix:
    if getattr(args, "generator", None):
        return GeneratorMatrix.of(np.array(args.generator).reshape(2, 2))
    n = getattr(args, "n", None) or default_n
    if n is None:
        raise CliError("give --n or --generator")
    if n in KNOWN_GENERATORS and not getattr(args, "search", False):
        return GeneratorMatrix.of(KNOWN_GENERATORS[n])
    return search_generator(n, getattr(args, "bound", DEFAULT_BOUND))


def frequency_plan(gm: GeneratorMatrix, size: int = 256, cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """Graymap of ``[-pi, pi)^2`` with each carrier's passband disk drawn in."""
    w = 2 * np.pi * (np.arange(size) / size - 0.5)
    wr, wc = np.meshgrid(w, w, indexing="ij")
    edge = cutoff * hexagonality_score(gm) / 2
    img = np.zeros((size, size))
    for nr, nc in carrier_numerators(gm):
        nu = 2 * np.pi * np.array([nr, nc]) / gm.n
        dr = (wr - nu[0] + np.pi) % (2 * np.pi) - np.pi
        dc = (wc - nu[1] + np.pi) % (2 * np.pi) - np.pi
        rho = np.hypot(dr, dc)
        img = np.maximum(img, 0.6 * raised_cosine(rho, edge))
        img[rho < 2 * np.pi / size * 1.5] = 1.0
    return img


def cmd_lattice(args) -> int:
    gm = _generator_from_args(args)
    score = hexagonality_score(gm)
    print(f"generator,{gm}")
    print(f"det,{gm.det}")
    print(f"cosets,{gm.n}")
    print(f"score,{score!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["rank,code,row,col"] + [f"{r},{r + 1},{a},{b}" for r, (a, b) in enumerate(cosets(gm))]
        io.atomic_write_text(out / "cosets.csv", "\n".join(lines) + "\n")
        lines = ["index,num_row,num_col,nu_row,nu_col"]
        for i, (a, b) in enumerate(carrier_numerators(gm)):
            lines.append(f"{i},{a},{b},{2 * np.pi * a / gm.n!r},{2 * np.pi * b / gm.n!r}")
        io.atomic_write_text(out / "carriers.csv", "\n".join(lines) + "\n")
        io.write_pgm(out / "plan.pgm", frequency_plan(gm, args.size))
    return 0


# ---------------------------------------------------------------- encode / decode


def _layout_meta(layout) -> dict | None:
    if layout is None:
        return None
    if isinstance(layout, TiledPattern):
        return {"type": "tiled", "m": layout.m, "seed": layout.seed, "tile": layout.tile}
    return {"type": "tma", "generator": [list(r) for r in layout.generator.entries], "height": layout.height, "width": layout.width, "first_code": layout.first_code}


def _layout_from_meta(meta):
    if meta is None:
        return None
    if meta["type"] == "tiled":
        return TiledPattern(meta["m"], meta["seed"], meta["tile"])
    if meta["type"] == "tma":
        return build_tma(meta["generator"], meta["height"], meta["width"], meta["first_code"])
    raise CliError(f"unknown layout type {meta['type']!r}")


def capture_meta(cap: CodedCapture) -> dict:
    code = None if cap.code is None else {"kind": cap.code.kind.value, "m": cap.code.m, "seed": cap.code.seed}
    return {
        "design": cap.design.value,
        "m": cap.m,
        "layout": _layout_meta(cap.layout),
        "code": code,
        "split": cap.split,
        "noise_sigma": cap.noise_sigma,
        "offset_eta": cap.offset_eta,
        "gain": cap.gain,
        "seed": cap.seed,
    }


def capture_from(images: dict, meta: dict) -> CodedCapture:
    c = meta["code"]
    code: ExposureCode | None = None if c is None else make_code(c["kind"], c["m"], c["seed"])
    return CodedCapture(
        Design(meta["design"]), images, meta["m"], _layout_from_meta(meta["layout"]), code,
        meta["split"], meta["noise_sigma"], meta["offset_eta"], meta["gain"], meta["seed"],
    )


def encode_stack(stack: np.ndarray, args) -> CodedCapture:
    t, h, w = stack.shape
    m = order_of(t)
    scheme = args.scheme
    if args.full_code and scheme not in ("design1", "design2"):
        raise CliError("--full-code applies to the two-camera designs only")
    if scheme in ("design1", "design2"):
        tma = None if args.full_code else build_tma(_generator_from_args(args, default_n=t - 1), h, w, first_code=1)
        cap = encode_design1(stack, tma) if scheme == "design1" else encode_design2(stack, tma, args.split)
    elif scheme == "pseudo-random":
        seed = args.seed if args.pattern_seed is None else args.pattern_seed
        cap = encode_single_binary(stack, None, TiledPattern(m, seed))
    else:
        tma = build_tma(_generator_from_args(args, default_n=t), h, w, first_code=0)
        cap = encode_single_binary(stack, make_code(CodeKind(scheme), m), tma)
    return degrade(cap, args.sigma, args.eta, args.gain, seed=args.seed)


def cmd_encode(args) -> int:
    stack = io.read_stack(args.input)
    cap = encode_stack(stack, args)
    io.write_bundle(args.output, cap.images, capture_meta(cap))
    return 0


def cmd_decode(args) -> int:
    images, meta = io.read_bundle(args.input)
    cap = capture_from(images, meta)
    kw = {}
    if isinstance(cap.layout, TiledPattern):
        kw = {"lam": args.ridge_lambda, "mode": args.ridge_mode}
    res = reconstruct(cap, demosaic_method=args.demosaic, cutoff=args.cutoff, **kw)
    out = Path(args.output)
    io.write_stack(out, res.frames)
    diag = {"method": res.method, "diagnostics": res.diagnostics}
    io.atomic_write_text(out.with_suffix(".json"), io.dump_json(_jsonable(diag)))
    return 0


# ---------------------------------------------------------------- experiment


def cmd_experiment(args) -> int:
    if not args.config:
        raise CliError("experiment needs --config")
    with open(args.config, encoding="utf-8") as fh:
        cfg = parse_experiment_config(json.load(fh), threads=args.threads)
    chips = load_chips(cfg)
    res = run_noise_sweep(chips, cfg.schemes, cfg.sigmas, cfg.sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.atomic_write_text(out / "results.csv", res.to_csv())
    summary = {"chips": len(chips), "cells": res.aggregates(), "errors": res.errors}
    io.atomic_write_text(out / "aggregate.json", io.dump_json(_jsonable(summary)))
    for e in res.errors:
        print(f"warning: {e['scheme']} sigma={e['sigma']} chip {e['chip_id']}: {e['error']}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- crosstalk


def _read_image(path) -> np.ndarray:
    p = Path(path)
    if p.suffix.lower() in (".pgm", ".pnm"):
        return io.read_pgm(p)
    return io.read_stack(p)[0]


def cmd_crosstalk(args) -> int:
    mh, mw = args.mirrors
    cam = (int(round(mh * args.oversample)), int(round(mw * args.oversample)))
    om = build_optical_map((mh, mw), cam, args.sigma_psf, args.layout)
    if args.input:
        u = _read_image(args.input)
        if u.shape != (mh, mw):
            raise CliError(f"input image is {u.shape}, mirrors are {(mh, mw)}")
    else:
        u = np.random.default_rng(args.seed).random((mh, mw))
    v = forward_capture(om, u)
    if args.noise > 0:
        v = v + args.noise * np.random.default_rng([args.seed, 1]).standard_normal(v.shape)
    sol = correct_crosstalk(om, v, args.tol, args.max_iter)
    report = {
        "mirrors": [mh, mw],
        "camera": list(cam),
        "sigma_psf": args.sigma_psf,
        "layout": args.layout,
        "noise": args.noise,
        "iterations": sol.iterations,
        "normal_residual": sol.residual,
        "data_residual": sol.data_residual,
        "relative_error": float(np.linalg.norm(sol.u - u) / max(np.linalg.norm(u), 1e-300)),
    }
    if args.condition:
        report["condition"] = system_condition(om)
    text = io.dump_json(_jsonable(report))
    if args.output:
        io.atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- import


def cmd_import(args) -> int:
    stack = io.import_graymaps(args.input, args.pattern)
    io.write_stack(args.output, stack)
    print(f"{stack.shape[0]} frames of {stack.shape[1]}x{stack.shape[2]}")
    return 0


# ---------------------------------------------------------------- parser


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d if suppress else 0, help="seed for all randomness (default 0)")
    p.add_argument("--threads", type=int, default=d if suppress else (os.cpu_count() or 1), help="worker threads (results do not depend on it)")
    p.add_argument("--config", default=d, help="JSON config file")
    return p


def _lattice_flags(p):
    p.add_argument("--generator", type=int, nargs=4, metavar=("M00", "M01", "M10", "M11"))
    p.add_argument("--n", type=int, help="coset count (known matrices for 7/15/31, else searched)")
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    p.add_argument("--search", action="store_true", help="search even when a known matrix exists")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signcoded", description="Sign-coded exposure simulation and reconstruction.", parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)
    g = [_global_flags(True)]

    p = sub.add_parser("codes", parents=g, help="condition numbers and light efficiencies")
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--survey", type=int, default=1000, help="random draws for the pseudo-random median")
    p.add_argument("--split", type=float, default=0.5)
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("lattice", parents=g, help="generator, cosets, carriers and frequency plan")
    _lattice_flags(p)
    p.add_argument("--out", help="directory for cosets.csv, carriers.csv and plan.pgm")
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("encode", parents=g, help="simulate a coded capture of a frame stack")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output prefix (.fstk and .json are written)")
    p.add_argument("--scheme", choices=ENCODE_SCHEMES, default="design1")
    _lattice_flags(p)
    p.add_argument("--full-code", action="store_true", help="every pixel sees every code")
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--pattern-seed", type=int)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=g, help="reconstruct frames from a capture")
    p.add_argument("--input", required=True, help="capture prefix written by encode")
    p.add_argument("--output", required=True, help="frame-stack file; diagnostics go next to it as .json")
    p.add_argument("--demosaic", choices=("bilinear", "fs"), default="fs")
    p.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    p.add_argument("--ridge-mode", choices=("tile", "sliding"), default="tile")
    p.add_argument("--ridge-lambda", type=float)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("experiment", parents=g, help="noise sweep over a chip corpus")
    p.add_argument("--out", default=".", help="directory for results.csv and aggregate.json")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("crosstalk", parents=g, help="round-trip an image through the crosstalk model")
    p.add_argument("--mirrors", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    p.add_argument("--oversample", type=float, default=2.5)
    p.add_argument("--sigma-psf", type=float, default=1.0)
    p.add_argument("--layout", choices=("square", "quincunx"), default="quincunx")
    p.add_argument("--input", help="mirror image (.pgm or frame stack); random if omitted")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--condition", action="store_true", help="also report cond(A)")
    p.add_argument("--output", help="JSON report path (stdout if omitted)")
    p.set_defaults(func=cmd_crosstalk)

    p = sub.add_parser("import", parents=g, help="stack a directory of graymaps into a frame-stack file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--pattern", default="*.pgm")
    p.set_defaults(func=cmd_import)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv, args):
    """Re-parse with option defaults taken from the JSON config."""
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        parser.error("config must be a JSON object")
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    dests = {a.dest for a in sp._actions} - {"help", "config", "func"}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        parser.error(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    try:
        if args.config and args.command != "experiment":
            args = _apply_config(parser, argv, args)
        return args.func(args)
    except (CliError, ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"signcoded {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
