"""Bit schedules: cosine annealing, rounding, importance weighting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqdp.schedule import (
    ImportanceInputs,
    ScheduleConfig,
    client_importance,
    cosine_bits,
    normalized_entropy,
    round_bits,
    schedule_bits,
)


def test_schedule_config_validation():
    with pytest.raises(ValueError):
        ScheduleConfig(mode="linear")
    with pytest.raises(ValueError):
        ScheduleConfig(mode="cosine", b_min=16, b_max=8)
    with pytest.raises(ValueError):
        ScheduleConfig(mode="cosine", b_min=1)
    with pytest.raises(ValueError):
        ScheduleConfig(mode="cosine", lambda_h=1.5)
    with pytest.raises(ValueError):
        ScheduleConfig(mode="static", bits=33)
    with pytest.raises(ValueError):
        ScheduleConfig(mode="cosine", total_rounds=0)


def test_cosine_bits_endpoints_exact():
    assert cosine_bits(0, 999, 32, 8, 1.0) == 32.0
    assert cosine_bits(999, 999, 32, 8, 1.0) == 8.0
    assert cosine_bits(0, 1, 32, 2, 1.0) == 32.0
    assert cosine_bits(1, 1, 32, 2, 1.0) == 2.0


def test_cosine_bits_midpoint():
    # halfway the annealed width sits at the mean of the endpoints
    assert abs(cosine_bits(500, 1000, 32, 2, 1.0) - 17.0) < 1e-12


def test_cosine_bits_monotone_in_nu():
    widths = [cosine_bits(100, 999, 32, 8, nu) for nu in (0.0, 0.3, 0.7, 1.0)]
    assert widths[0] == 8.0
    assert all(a < b for a, b in zip(widths, widths[1:]))


def test_cosine_bits_validation():
    with pytest.raises(ValueError):
        cosine_bits(-1, 10, 32, 8, 1.0)
    with pytest.raises(ValueError):
        cosine_bits(11, 10, 32, 8, 1.0)
    with pytest.raises(ValueError):
        cosine_bits(5, 10, 32, 8, 1.5)
    with pytest.raises(ValueError):
        cosine_bits(5, 10, 8, 32, 1.0)


def test_round_bits_half_up_and_clamp():
    assert round_bits(8.5, 2, 32) == 9
    assert round_bits(31.99, 2, 32) == 32
    assert round_bits(8.49, 2, 32) == 8
    assert round_bits(1.2, 2, 32) == 2
    assert round_bits(40.0, 2, 32) == 32
    assert round_bits(9.5, 2, 32) == 10  # half always rounds up, never to even


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 64.0), st.integers(2, 16), st.integers(16, 32))
def test_round_bits_always_in_range(b, lo, hi):
    out = round_bits(b, lo, hi)
    assert lo <= out <= hi


def test_normalized_entropy_examples():
    assert normalized_entropy(np.array([10, 10, 10, 10]), 4) == 1.0
    assert normalized_entropy(np.array([7, 0, 0]), 3) == 0.0
    assert abs(normalized_entropy(np.array([1, 1, 0, 0]), 4) - 0.5) < 1e-12


def test_normalized_entropy_validation():
    with pytest.raises(ValueError):
        normalized_entropy(np.array([0, 0]), 2)
    with pytest.raises(ValueError):
        normalized_entropy(np.array([1, -1]), 2)
    with pytest.raises(ValueError):
        normalized_entropy(np.array([1, 1, 1]), 2)


def _inputs(counts, n_max):
    counts = np.asarray(counts)
    return ImportanceInputs(counts, int(counts.sum()), n_max, len(counts))


def test_client_importance_pure_entropy_and_pure_size():
    uniform = _inputs([5, 5], 20)
    assert client_importance(uniform, 1.0) == 1.0
    assert client_importance(uniform, 0.0) == 0.5  # 10 of 20
    single = _inputs([8, 0], 8)
    assert client_importance(single, 1.0) == 0.0
    assert client_importance(single, 0.0) == 1.0


def test_client_importance_is_convex_mix():
    inputs = _inputs([6, 2], 16)
    h = normalized_entropy(np.array([6, 2]), 2)
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        expected = lam * h + (1 - lam) * 0.5
        assert abs(client_importance(inputs, lam) - expected) < 1e-15


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 100), min_size=2, max_size=6),
    st.floats(0.0, 1.0),
    st.integers(1, 50),
)
def test_client_importance_in_unit_interval(counts, lam, extra):
    if sum(counts) == 0:
        counts[0] = 1
    n = sum(counts)
    nu = client_importance(_inputs(counts, n + extra), lam)
    assert 0.0 <= nu <= 1.0


def test_importance_inputs_validation():
    with pytest.raises(ValueError):
        ImportanceInputs(np.array([1, 2]), 4, 10, 2)  # sum mismatch
    with pytest.raises(ValueError):
        ImportanceInputs(np.array([5, 5]), 10, 4, 2)  # exceeds max
    with pytest.raises(ValueError):
        ImportanceInputs(np.array([1]), 1, 4, 1)  # one class


def test_schedule_bits_static():
    cfg = ScheduleConfig(mode="static", bits=8, total_rounds=100)
    assert [schedule_bits(cfg, t) for t in (0, 50, 99)] == [8, 8, 8]


def test_schedule_bits_cosine_endpoints():
    for total in (2, 10, 1000):
        cfg = ScheduleConfig(mode="cosine", b_max=32, b_min=8, total_rounds=total)
        assert schedule_bits(cfg, 0) == 32
        assert schedule_bits(cfg, total - 1) == 8


def test_schedule_bits_single_round_uses_b_max():
    cfg = ScheduleConfig(mode="cosine", b_max=32, b_min=8, total_rounds=1)
    assert schedule_bits(cfg, 0) == 32


def test_schedule_bits_cosine_nonincreasing():
    cfg = ScheduleConfig(mode="cosine", b_max=32, b_min=2, total_rounds=200)
    widths = [schedule_bits(cfg, t) for t in range(200)]
    assert all(a >= b for a, b in zip(widths, widths[1:]))
    assert len(set(widths)) > 10


def test_schedule_bits_dynamic_never_exceeds_cosine():
    dyn = ScheduleConfig(mode="dynamic", b_max=32, b_min=8, lambda_h=0.75, total_rounds=50)
    cos = ScheduleConfig(mode="cosine", b_max=32, b_min=8, total_rounds=50)
    imp = _inputs([20, 5, 0], 100)
    for t in range(50):
        assert schedule_bits(dyn, t, imp) <= schedule_bits(cos, t)
        assert schedule_bits(dyn, t, imp) >= 8


def test_schedule_bits_dynamic_requires_importance():
    cfg = ScheduleConfig(mode="dynamic", b_max=32, b_min=8, total_rounds=10)
    with pytest.raises(ValueError):
        schedule_bits(cfg, 0)


def test_schedule_bits_round_out_of_range():
    cfg = ScheduleConfig(mode="cosine", b_max=32, b_min=8, total_rounds=10)
    with pytest.raises(ValueError):
        schedule_bits(cfg, 10)
    with pytest.raises(ValueError):
        schedule_bits(cfg, -1)
