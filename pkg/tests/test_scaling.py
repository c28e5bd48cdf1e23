import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ropelab.errors import ValidationError
from ropelab.scaling import (RE_ROPE_FLOOR, ScalingKind, ScalingPolicy, logit_scale,
                             logit_scale_row, scale_table, yarn_temperature)

EA = ScalingPolicy(ScalingKind.ENTROPY_AWARE, c=4096)


def test_none_is_one():
    p = ScalingPolicy()
    assert logit_scale(p, 7, 10**6) == 1.0


def test_constant():
    p = ScalingPolicy(ScalingKind.CONSTANT, value=2.5)
    assert logit_scale(p, 0, 0) == 2.5
    assert logit_scale(p, 3, 999) == 2.5


def test_yarn_s4():
    p = ScalingPolicy(ScalingKind.YARN, s=4)
    assert logit_scale(p, 0, 0) == pytest.approx(0.1 * math.log(4) + 1, abs=1e-15)
    assert logit_scale(p, 0, 0) == pytest.approx(1.138629, abs=1e-6)
    assert yarn_temperature(1) == 1.0


def test_chiang():
    p = ScalingPolicy(ScalingKind.CHIANG_LOG_N, n_train=512)
    assert logit_scale(p, 2, 3) == math.log(512)


def test_rerope():
    p = ScalingPolicy(ScalingKind.RE_ROPE, c=4096)
    assert logit_scale(p, 0, 0) == RE_ROPE_FLOOR
    assert logit_scale(p, 0, 4095) == 1.0
    assert logit_scale(p, 0, 63) == pytest.approx(0.5, abs=1e-15)
    assert logit_scale(p, 5, 16383) == pytest.approx(7 / 6, abs=1e-15)


class TestEntropyAware:
    def test_exempt_layer(self):
        assert logit_scale(EA, 0, 100000) == 1.0
        assert logit_scale(EA, 1, 100000) == 1.0

    def test_boundary(self):
        assert logit_scale(EA, 5, 4095) == 1.0

    def test_beyond_window(self):
        assert logit_scale(EA, 5, 16383) == pytest.approx(7 / 6, abs=1e-12)

    def test_inside_window_clamped(self):
        assert logit_scale(EA, 5, 99) == 1.0

    def test_custom_exemption(self):
        p = ScalingPolicy(ScalingKind.ENTROPY_AWARE, c=16, exempt_layers={3})
        assert logit_scale(p, 3, 1000) == 1.0
        assert logit_scale(p, 0, 255) == pytest.approx(2.0, abs=1e-15)

    def test_window_neutral_everywhere(self):
        p = ScalingPolicy(ScalingKind.ENTROPY_AWARE, c=64)
        for layer in range(6):
            assert np.all(logit_scale_row(p, layer, 64) == 1.0)

    @given(layer=st.integers(2, 50), a=st.integers(0, 10**7), b=st.integers(0, 10**7))
    def test_monotone_and_bounded(self, layer, a, b):
        lo, hi = sorted((a, b))
        assert 1.0 <= logit_scale(EA, layer, lo) <= logit_scale(EA, layer, hi)


@pytest.mark.parametrize("policy", [
    ScalingPolicy(),
    ScalingPolicy(ScalingKind.CONSTANT, value=3.0),
    ScalingPolicy(ScalingKind.YARN, s=8),
    ScalingPolicy(ScalingKind.CHIANG_LOG_N, n_train=100),
    ScalingPolicy(ScalingKind.RE_ROPE, c=32),
    ScalingPolicy(ScalingKind.ENTROPY_AWARE, c=32),
])
@pytest.mark.parametrize("layer", [0, 1, 4])
def test_row_matches_scalar(policy, layer):
    row = logit_scale_row(policy, layer, 300)
    expected = [logit_scale(policy, layer, p) for p in range(300)]
    np.testing.assert_array_equal(row, expected)


@given(p1=st.integers(0, 10**6), p2=st.integers(0, 10**6), layer=st.integers(0, 10))
def test_static_policies_position_invariant(p1, p2, layer):
    for policy in (ScalingPolicy(ScalingKind.YARN, s=4), ScalingPolicy(ScalingKind.CONSTANT, value=2)):
        assert logit_scale(policy, layer, p1) == logit_scale(policy, layer, p2)


def test_scale_table_shape():
    grid = scale_table(EA, [0, 1, 5], [0, 4095, 16383])
    assert grid.shape == (3, 3)
    np.testing.assert_array_equal(grid[:2], 1.0)
    assert grid[2, 2] == pytest.approx(7 / 6, abs=1e-12)


@pytest.mark.parametrize("kwargs", [dict(c=1), dict(c=0), dict(s=0), dict(n_train=0),
                                    dict(kind="Constant", value=0), dict(kind="bogus"),
                                    dict(exempt_layers={-1})])
def test_rejects(kwargs):
    with pytest.raises(ValidationError):
        ScalingPolicy(**kwargs)


def test_rejects_negative_inputs():
    with pytest.raises(ValidationError):
        logit_scale(EA, -1, 0)
    with pytest.raises(ValidationError):
        logit_scale(EA, 0, -1)


def test_kind_parsing():
    assert ScalingPolicy(kind="entropy-aware").kind is ScalingKind.ENTROPY_AWARE
    assert ScalingPolicy(kind="chiang_log_n").kind is ScalingKind.CHIANG_LOG_N
