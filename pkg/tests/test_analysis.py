import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from signcoded.analysis import (
    Scheme, condition_number, design2_candidates, design2_pixel_matrix, design2_stacked_matrix,
    light_efficiency, median_condition, random_condition_survey, sensing_matrix, scheme_report,
)
from signcoded.hadamard import hadamard_matrix

GOLDEN2 = (3 + np.sqrt(5)) / 2


def test_sensing_matrices_m4():
    assert np.array_equal(sensing_matrix("one-hot", 4), np.eye(16))
    assert condition_number(sensing_matrix("one-hot", 4)) == 1.0
    assert condition_number(sensing_matrix(Scheme.DESIGN1, 4)) == 1.0
    assert condition_number(sensing_matrix("positive-hadamard", 4)) == pytest.approx(9.90, abs=0.01)
    pr = sensing_matrix("pseudo-random", 4, seed=3)
    assert set(np.unique(pr)) <= {0.0, 1.0}
    assert np.all(pr.sum(axis=1) == 8)


def test_sensing_matrix_errors():
    with pytest.raises(ValueError):
        sensing_matrix("pseudo-random", 4)
    with pytest.raises(ValueError):
        sensing_matrix("bogus", 4)
    with pytest.raises(ValueError):
        sensing_matrix("one-hot", 0)


@pytest.mark.parametrize("m", range(1, 9))
def test_signed_hadamard_cond_one(m):
    assert condition_number(hadamard_matrix(m)) == 1.0


@pytest.mark.parametrize("m", [1, 2, 3, 4, 6])
def test_design2_pixel_golden_ratio(m):
    for u in range(1, 1 << m):
        assert condition_number(design2_pixel_matrix(m, u)) == pytest.approx(GOLDEN2, abs=1e-12)


def test_design2_m4_value():
    assert condition_number(sensing_matrix(Scheme.DESIGN2, 4)) == pytest.approx(2.6180, abs=1e-3)


def test_design2_split_attenuation():
    a = design2_pixel_matrix(4, 3, split=0.5)
    assert np.allclose(a, 0.5 * design2_pixel_matrix(4, 3))
    assert condition_number(a) == pytest.approx(GOLDEN2)
    with pytest.raises(ValueError):
        design2_pixel_matrix(4, 0)


def test_design2_candidates():
    c = design2_candidates(4)
    assert len(c) == 7
    assert c["per-pixel [1; (1+w_u)/2]"] == pytest.approx(GOLDEN2)
    # none of the stacked variants lands on the golden-ratio value
    stacked = [v for k, v in c.items() if k.startswith("[")]
    assert all(abs(v - GOLDEN2) > 1 for v in stacked)
    assert design2_stacked_matrix(4).shape == (17, 16)
    assert design2_stacked_matrix(4, drop_first=True).shape == (16, 16)


def test_condition_number_edges():
    assert condition_number(np.eye(5)) == 1.0
    assert condition_number([[1, 1], [1, 1]]) == np.inf
    assert condition_number([[1, 0], [0, 0]]) == np.inf
    assert condition_number(np.diag([4.0, 2.0])) == 2.0
    with pytest.raises(ValueError):
        condition_number(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        condition_number(np.ones(3))


@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.floats(0.01, 100))
def test_condition_invariances(seed, n, scale):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    c = condition_number(a)
    p, q = rng.permutation(n), rng.permutation(n)
    assert condition_number(a[p][:, q]) == pytest.approx(c, rel=1e-7)
    assert condition_number(scale * a) == pytest.approx(c, rel=1e-7)
    assert c >= 1


def test_median_condition():
    assert median_condition([3, 1, 2]) == 2
    assert median_condition([1, 2, 3, 4]) == 2
    assert median_condition([np.inf, 1, np.inf]) == np.inf
    assert median_condition([5, np.inf, 1, 2]) == 2
    with pytest.raises(ValueError):
        median_condition([])


def test_survey_m1_exhaustive():
    # m = 1: each row has one 1, so the matrix is a permutation (cond 1) or singular
    mats = [np.array(r, dtype=float) for r in itertools.product([[1, 0], [0, 1]], repeat=2)]
    conds = sorted(condition_number(a) for a in mats)
    assert conds == [1.0, 1.0, np.inf, np.inf]
    assert median_condition(conds) == 1.0
    # a sampled survey sits right at the 50% singular boundary, so only check the fraction
    s = random_condition_survey(1, 4000, seed=0)
    assert s["fraction_singular"] == pytest.approx(0.5, abs=0.05)


def test_survey_deterministic():
    a = random_condition_survey(4, 3000, seed=5, chunk=1000)
    b = random_condition_survey(4, 3000, seed=5, chunk=1000)
    assert a == b
    assert a["trials"] == 3000


def test_survey_errors():
    with pytest.raises(ValueError):
        random_condition_survey(4, 0, 1)


@pytest.mark.slow
def test_survey_stable_across_seeds():
    meds = [random_condition_survey(4, 100_000, seed=s)["median"] for s in (1, 2)]
    assert 100 <= min(meds) and max(meds) <= 127
    assert max(meds) / min(meds) < 1.1


def test_light_efficiency():
    assert light_efficiency("one-hot", 4) == 1 / 16
    assert light_efficiency("pseudo-random", 4) == 0.5
    assert light_efficiency("positive-hadamard", 4) == 0.5
    assert light_efficiency("hadamard-design1", 4) == 1.0
    assert light_efficiency("hadamard-design2", 4) == 0.75
    assert light_efficiency("hadamard-design2", 4, split=0.2) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        light_efficiency("hadamard-design2", 4, split=1.0)


def test_scheme_report():
    rows = {r.scheme: r for r in scheme_report(4, survey_trials=2000, seed=1)}
    assert set(rows) == {s.value for s in Scheme}
    assert rows["pseudo-random"].stats["trials"] == 2000
    assert rows["hadamard-design2"].shape == (2, 16)
    for r in rows.values():
        assert r.condition >= 1
        assert 0 < r.efficiency <= 1
