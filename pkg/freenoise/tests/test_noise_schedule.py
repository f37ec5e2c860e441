import numpy as np
import pytest

from freenoise.errors import ConfigError, ShapeError
from freenoise.noise_schedule import (build_shuffle_plan, draw_noise,
                                      materialize_noise,
                                      verify_window_coverage)


def test_shuffle_plan_default():
    plan = build_shuffle_plan(16, 4, 64, seed=3)
    np.testing.assert_array_equal(plan.mapping[:16], np.arange(16))
    np.testing.assert_array_equal(np.sort(plan.mapping[16:20]), [0, 1, 2, 3])
    np.testing.assert_array_equal(np.sort(plan.mapping[20:24]), [4, 5, 6, 7])
    assert plan.n_units == 12


def test_shuffle_plan_identity():
    plan = build_shuffle_plan(16, 4, 16, seed=5)
    np.testing.assert_array_equal(plan.mapping, np.arange(16))
    assert plan.n_units == 0


@pytest.mark.parametrize('seed', range(5))
def test_shuffle_plan_small(seed):
    plan = build_shuffle_plan(4, 2, 8, seed)
    np.testing.assert_array_equal(np.sort(plan.mapping[4:6]), [0, 1])
    np.testing.assert_array_equal(np.sort(plan.mapping[6:8]), [2, 3])
    for start in range(0, 8 - 4 + 1, 2):
        np.testing.assert_array_equal(np.sort(plan.mapping[start:start + 4]),
                                      np.arange(4))


def test_shuffle_plan_units():
    n_train, unit = 8, 4
    plan = build_shuffle_plan(n_train, unit, 40, seed=1)
    for start in range(n_train, 40, unit):
        block = np.arange(start, start + unit) % n_train
        np.testing.assert_array_equal(
            np.sort(plan.mapping[start:start + unit]), np.sort(block))


def test_shuffle_plan_partial_unit():
    plan = build_shuffle_plan(8, 4, 14, seed=2)
    np.testing.assert_array_equal(np.sort(plan.mapping[12:14]), [4, 5])


def test_shuffle_plan_deterministic():
    plan_1 = build_shuffle_plan(16, 4, 64, seed=9)
    plan_2 = build_shuffle_plan(16, 4, 64, seed=9)
    np.testing.assert_array_equal(plan_1.mapping, plan_2.mapping)

    other = [build_shuffle_plan(16, 4, 64, seed=ss).mapping
             for ss in range(10, 15)]
    assert any(not np.array_equal(plan_1.mapping, mm) for mm in other)


def test_shuffle_plan_extension_is_suffix():
    short = build_shuffle_plan(16, 4, 32, seed=4)
    long = build_shuffle_plan(16, 4, 64, seed=4)
    np.testing.assert_array_equal(long.mapping[:32], short.mapping)


@pytest.mark.parametrize('n_train, unit, total, key', [
    (16, 3, 64, "unit"),
    (16, 0, 64, "unit"),
    (16, 4, 8, "frames"),
    (0, 1, 8, "n_train"),
])
def test_shuffle_plan_errors(n_train, unit, total, key):
    with pytest.raises(ConfigError) as excinfo:
        build_shuffle_plan(n_train, unit, total, seed=0)
    assert excinfo.value.key == key


def test_window_coverage_sweep():
    for n_train in (4, 8, 16):
        for unit in (2, 4, 8):
            if n_train % unit:
                continue
            for total in range(n_train, 129, unit):
                for seed in range(20):
                    plan = build_shuffle_plan(n_train, unit, total, seed)
                    assert verify_window_coverage(plan, n_train, unit)


def test_frequency_balance():
    plan = build_shuffle_plan(16, 4, 60, seed=0)
    counts = np.bincount(plan.mapping, minlength=16)
    assert set(counts) <= {60 // 16, -(-60 // 16)}


def test_window_coverage_mutation():
    plan = build_shuffle_plan(16, 4, 64, seed=0)
    assert verify_window_coverage(plan, 16, 4)
    mapping = plan.mapping.copy()
    mapping[20] = 0 if mapping[20] != 0 else 1
    assert not verify_window_coverage(plan.with_mapping(mapping), 16, 4)
    assert not verify_window_coverage(plan, 8, 4)


def test_window_coverage_identity():
    plan = build_shuffle_plan(16, 4, 16, seed=0)
    assert verify_window_coverage(plan, 16, 16)


def test_draw_noise_prefix():
    long = draw_noise(8, 3, 2, 2, seed=1)
    short = draw_noise(4, 3, 2, 2, seed=1)
    assert long.shape == (3, 8, 2, 2)
    np.testing.assert_array_equal(long[:, :4], short)


def test_materialize_noise():
    base = draw_noise(16, 2, 3, 3, seed=0)
    identity = build_shuffle_plan(16, 4, 16, seed=0)
    np.testing.assert_array_equal(materialize_noise(identity, base), base)

    plan = build_shuffle_plan(16, 4, 64, seed=0)
    noise = materialize_noise(plan, base)
    assert noise.shape == (2, 64, 3, 3)
    for frame in range(64):
        np.testing.assert_array_equal(noise[:, frame],
                                      base[:, plan.mapping[frame]])
    assert any(np.array_equal(noise[:, 17], base[:, kk]) for kk in range(4))

    with pytest.raises(ShapeError):
        materialize_noise(plan, base[:, :8])


def test_plan_text():
    plan = build_shuffle_plan(4, 2, 6, seed=0)
    lines = plan.to_text().splitlines()
    assert len(lines) == 6
    assert lines[0] == "0 -> 0"
