"""Sensing-matrix conditioning and light-efficiency analytics.

A sensing matrix maps the ``T = 2**m`` sub-frame intensities seen by a pixel
to the values its camera(s) record.  Its condition number bounds how much
measurement noise a linear reconstruction can amplify.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .hadamard import CodeKind, hadamard_matrix, make_code, random_binary_rows, walsh_kernel

SURVEY_CHUNK = 4096
DC_SCALES = (1.0, 0.5, 2.0)


class Scheme(str, Enum):
    ONE_HOT = "one-hot"
    PSEUDO_RANDOM = "pseudo-random"
    POSITIVE_HADAMARD = "positive-hadamard"
    DESIGN1 = "hadamard-design1"
    DESIGN2 = "hadamard-design2"


def _scheme(scheme) -> Scheme:
    try:
        return Scheme(scheme)
    except ValueError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {[s.value for s in Scheme]}") from None


def design2_pixel_matrix(m: int, code: int = 1, split: float | None = None) -> np.ndarray:
    """The two rows one Design #2 pixel records: DC and the positive-coded AC.

    ``[1^T; (1 + w_u)^T / 2]`` for the signed Walsh row ``w_u``.  With
    ``split`` given the rows are attenuated by the beam fractions.  The
    condition number over the row space is the golden ratio squared for every
    ``u >= 1`` and every ``m``.
    """
    k = walsh_kernel(m).astype(np.float64)
    if not 1 <= code < k.shape[0]:
        raise ValueError(f"AC code must lie in 1..{k.shape[0] - 1}")
    a = np.vstack([np.ones(k.shape[0]), (1 + k[code]) / 2])
    if split is not None:
        a *= np.array([[split], [1 - split]])
    return a


def design2_stacked_matrix(m: int, dc_scale: float = 1.0, drop_first: bool = False) -> np.ndarray:
    """``[dc_scale * 1^T; H_pos]`` (optionally without the all-ones row of ``H_pos``)."""
    hp = (hadamard_matrix(m) + 1) / 2
    if drop_first:
        hp = hp[1:]
    return np.vstack([dc_scale * np.ones(hp.shape[1]), hp])


def sensing_matrix(scheme, m: int, seed: int | None = None, code: int = 1) -> np.ndarray:
    """Per-pixel sensing matrix for a scheme.

    One-hot is the identity, pseudo-random draws binary rows with exactly
    ``2**(m-1)`` ones, positive Hadamard is ``(H + J)/2`` and Design #1 is the
    signed ``H``.  Design #2 returns :func:`design2_pixel_matrix`.
    """
    s = _scheme(scheme)
    if m < 1:
        raise ValueError("m must be at least 1")
    if s is Scheme.ONE_HOT:
        return make_code(CodeKind.ONE_HOT, m).rows.astype(np.float64)
    if s is Scheme.PSEUDO_RANDOM:
        if seed is None:
            raise ValueError("pseudo-random sensing matrices need a seed")
        return make_code(CodeKind.PSEUDO_RANDOM, m, seed).rows.astype(np.float64)
    if s is Scheme.POSITIVE_HADAMARD:
        return (hadamard_matrix(m) + 1) / 2
    if s is Scheme.DESIGN1:
        return hadamard_matrix(m).astype(np.float64)
    return design2_pixel_matrix(m, code)


def condition_number(a) -> float:
    """``sigma_max / sigma_min`` over ``min(rows, cols)`` singular values.

    Returns ``inf`` when the smallest singular value is zero to working
    precision, and exactly 1.0 when the spread is below rounding error.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or not np.any(a):
        raise ValueError("need a nonzero 2-D matrix")
    s = np.linalg.svd(a, compute_uv=False)
    return float(_cond_from_singular(s[None], max(a.shape))[0])


def _cond_from_singular(s: np.ndarray, dim: int) -> np.ndarray:
    # s is (batch, k) in descending order
    hi, lo = s[:, 0], s[:, -1]
    tol = hi * dim * np.finfo(np.float64).eps
    with np.errstate(divide="ignore"):
        c = np.where(lo <= tol, np.inf, hi / np.where(lo > 0, lo, 1.0))
    return np.where(np.abs(c - 1) <= tol / np.maximum(hi, 1e-300) * 4, 1.0, c)


def median_condition(conds) -> float:
    """Lower median (an exact order statistic); infinities sort last."""
    c = np.sort(np.asarray(conds, dtype=np.float64))
    if c.size == 0:
        raise ValueError("no values")
    return float(c[(c.size - 1) // 2])


def random_condition_survey(m: int, trials: int, seed: int, chunk: int = SURVEY_CHUNK) -> dict:
    """Condition numbers of ``trials`` random half-ones binary ``2**m``-square matrices.

    Trials are drawn in fixed-size chunks, each from its own stream spawned
    from ``seed``, so the result depends only on ``(m, trials, seed)``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = 1 << m
    nchunks = -(-trials // chunk)
    streams = np.random.SeedSequence(seed).spawn(nchunks)
    conds = np.empty(trials)
    for i, ss in enumerate(streams):
        lo = i * chunk
        size = min(chunk, trials - lo)
        mats = random_binary_rows(np.random.default_rng(ss), n, n, batch=(size,)).astype(np.float64)
        conds[lo : lo + size] = _cond_from_singular(np.linalg.svd(mats, compute_uv=False), n)
    return {
        "median": median_condition(conds),
        "fraction_singular": float(np.mean(np.isinf(conds))),
        "trials": trials,
    }


def light_efficiency(scheme, m: int, split: float = 0.5) -> float:
    """Fraction of the exposure window's light that reaches a sensor.

    Single-camera schemes give the mean active fraction of their codes (the AC
    codes ``u >= 1`` for positive Hadamard).  Design #1's complementary
    cameras collect everything; Design #2 collects ``split`` on the DC camera
    plus ``(1 - split) / 2`` on the AC camera.
    """
    s = _scheme(scheme)
    t = 1 << m
    if s is Scheme.ONE_HOT:
        eff = Fraction(1, t)
    elif s in (Scheme.PSEUDO_RANDOM, Scheme.POSITIVE_HADAMARD):
        eff = Fraction(1, 2)
    elif s is Scheme.DESIGN1:
        eff = Fraction(1)
    else:
        if not 0 < split < 1:
            raise ValueError("split must lie in (0, 1)")
        sp = Fraction(split).limit_denominator(1 << 20)
        eff = sp + (1 - sp) * Fraction(1, 2)
    return float(eff)


@dataclass
class SensingMatrixReport:
    scheme: str
    shape: tuple[int, int]
    condition: float
    efficiency: float
    stats: dict = field(default_factory=dict)
    note: str = ""


def design2_candidates(m: int) -> dict[str, float]:
    """Condition numbers of the stacked Design #2 variants, keyed by description."""
    out = {}
    for drop in (False, True):
        for s in DC_SCALES:
            key = f"[{s:g}*1; H_pos{'[1:]' if drop else ''}]"
            out[key] = condition_number(design2_stacked_matrix(m, s, drop))
    out["per-pixel [1; (1+w_u)/2]"] = condition_number(design2_pixel_matrix(m))
    return out


def scheme_report(m: int = 4, survey_trials: int = 0, seed: int = 0, split: float = 0.5) -> list[SensingMatrixReport]:
    """Condition numbers and light efficiencies for every scheme.

    The pseudo-random row reports the survey median when ``survey_trials > 0``
    and the condition of one seeded draw otherwise.
    """
    rows = []
    for s in Scheme:
        if s is Scheme.PSEUDO_RANDOM and survey_trials > 0:
            stats = random_condition_survey(m, survey_trials, seed)
            cond, note = stats["median"], "median over random draws"
            shape = (1 << m, 1 << m)
        else:
            a = sensing_matrix(s, m, seed=seed)
            cond, stats, shape, note = condition_number(a), {}, a.shape, ""
            if s is Scheme.DESIGN2:
                note = "per-pixel DC and AC rows"
        rows.append(SensingMatrixReport(s.value, tuple(shape), cond, light_efficiency(s, m, split), stats, note))
    return rows
