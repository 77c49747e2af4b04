import math

import numpy as np
import pytest

from conftest import random_dataset
from mbauc.errors import ConfigError
from mbauc.model import RegularizationSpec
from mbauc.theory import (BoundInputs, bernstein_tail, measure_concentration, required_samples,
                          ridge_weight_bound, sample_bound_terms, spectral_norm_psd, symmetric_norm,
                          tail_check)

FIXED = dict(d=100, R_x=1.0, R_w=4.0, sigma_norm=0.5, epsilon=0.1, p=0.05)


def test_required_samples_fixed_instance():
    # Independent recomputation of both branches.
    quad = math.log(4 * 100 / 0.05) * (48 * 4.0 ** 2 * 0.5 + 16 * 0.1 * 4.0) * 1.0 / (3 * 0.1 ** 2)
    lin = math.log(4 / 0.05) * (48 * 4.0 * 0.5 + 16 * 0.1 * math.sqrt(1.0 * 4.0)) / (3 * 0.1 ** 2)
    assert quad > lin
    assert required_samples(BoundInputs(**FIXED)) == math.ceil(quad) == 116954


def test_required_samples_log_d_growth():
    b100 = BoundInputs(**FIXED)
    b1000 = BoundInputs(**{**FIXED, "d": 1000})
    diff = sample_bound_terms(b1000)[0] - sample_bound_terms(b100)[0]
    expected = math.log(10) * (48 * 16 * 0.5 + 16 * 0.1 * 4) * 1.0 / (3 * 0.01)
    assert diff == pytest.approx(expected, rel=1e-12)


def test_doubling_epsilon_reduces_samples_between_2x_and_4x():
    small = required_samples(BoundInputs(**FIXED))
    big = required_samples(BoundInputs(**{**FIXED, "epsilon": 0.2}))
    assert 2 < small / big < 4


@pytest.mark.parametrize("bad", [dict(d=0), dict(epsilon=0.0), dict(p=1.0), dict(R_w=float("inf"))])
def test_bound_inputs_validated(bad):
    with pytest.raises(ConfigError):
        BoundInputs(**{**FIXED, **bad})


def test_bernstein_fixed_value():
    b = BoundInputs(d=50, R_x=1.0, R_w=1.0, sigma_norm=0.5, epsilon=1.0, p=0.5)
    expected = 2 * 50 * math.exp(-1e4 * 0.1 ** 2 / (4 * 1.0 * 0.5 + (8 / 3) * 0.1 * 1.0))
    assert abs(bernstein_tail(0.1, 10_000, b) - expected) <= 1e-12 * expected


def test_bernstein_d1_reduction_and_scalar_form():
    b = BoundInputs(d=1, R_x=2.0, R_w=3.0, sigma_norm=0.7, epsilon=1.0, p=0.5)
    g, S = 0.3, 500
    assert bernstein_tail(g, S, b) == pytest.approx(
        2 * math.exp(-S * g * g / (4 * 2.0 * 0.7 + (8 / 3) * g * 2.0)), rel=1e-14)
    assert bernstein_tail(g, S, b, "scalar") == pytest.approx(
        2 * math.exp(-S * g * g / (4 * 3.0 * 0.7 + (8 / 3) * g * math.sqrt(6.0))), rel=1e-14)


def test_bernstein_monotone_and_clipped():
    b = BoundInputs(**FIXED)
    vals_S = [bernstein_tail(0.1, S, b) for S in (1, 10, 100, 1000, 10_000, 100_000)]
    vals_g = [bernstein_tail(g, 1000, b) for g in (0.01, 0.05, 0.1, 0.5, 1.0)]
    for vals in (vals_S, vals_g):
        assert all(y <= x for x, y in zip(vals, vals[1:]))
        assert all(0 <= v <= 1 for v in vals)
    with pytest.raises(ConfigError):
        bernstein_tail(0.0, 10, b)


def test_norm_helpers():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    P = A @ A.T
    assert spectral_norm_psd(P) == pytest.approx(np.linalg.eigvalsh(P)[-1], rel=1e-7)
    M = np.diag([1.0, -3.0, 2.0])
    assert symmetric_norm(M) == 3.0
    assert ridge_weight_bound(np.array([3.0, 4.0]), 2.0) == 6.25
    assert ridge_weight_bound(np.ones(2), 0.0) == math.inf


@pytest.fixture(scope="module")
def small_report():
    ds = random_dataset(np.random.default_rng(1), 30, 40, 5)
    return measure_concentration(ds, RegularizationSpec(0.0, 0.05), [20, 200, "all"], trials=12, seed=3)


def test_concentration_report_properties(small_report):
    for s in small_report.samples:
        assert s.objective_gap >= -1e-12
        assert s.objective_gap <= s.sandwich + 1e-10
        assert s.w_sq_norm <= s.R_w * (1 + 1e-9)
    exact = small_report.by_S(1200)
    assert len(exact) == 1 and exact[0].w_gap <= 1e-8
    assert len(small_report.by_S(20)) == 12


def test_concentration_summary_and_tails(small_report):
    csv = small_report.summary_csv().splitlines()
    assert csv[0] == "S,median_w_gap,p90_w_gap,median_delta_sigma"
    assert [int(line.split(",")[0]) for line in csv[1:]] == [20, 200, 1200]
    rows = tail_check(small_report, [0.5, 1.0], R_x=1.0, d=5)
    assert len(rows) == 6
    assert all(0 <= r["empirical"] <= 1 and 0 <= r["bound"] <= 1 for r in rows)


def test_concentration_deterministic():
    ds = random_dataset(np.random.default_rng(2), 10, 10, 3)
    a = measure_concentration(ds, RegularizationSpec(0, 0.1), [50], trials=3, seed=9)
    b = measure_concentration(ds, RegularizationSpec(0, 0.1), [50], trials=3, seed=9)
    assert a.records() == b.records()


def test_concentration_requires_ridge():
    ds = random_dataset(np.random.default_rng(2), 4, 4, 2)
    with pytest.raises(ConfigError):
        measure_concentration(ds, RegularizationSpec(0.1, 0.0), [10], trials=1)
