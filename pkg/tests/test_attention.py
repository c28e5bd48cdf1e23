import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ropelab.attention import (TraceMode, attend, attention_entropy, causal_logits,
                               softmax_entropy)
from ropelab.errors import ValidationError
from ropelab.rope import Method, RopeConfig
from ropelab.scaling import ScalingKind, ScalingPolicy, logit_scale

from oracles import brute_force_attention

ROPE = RopeConfig(d=16, c=64)
NONE = ScalingPolicy(c=64)


class TestEntropy:
    def test_one_hot(self):
        assert attention_entropy([0.0, 1.0, 0.0]) == 0.0

    @pytest.mark.parametrize("n", [2, 10, 1024])
    def test_uniform(self, n):
        assert attention_entropy(np.full(n, 1.0 / n)) == pytest.approx(math.log(n), abs=1e-12)

    def test_uniform_two(self):
        assert attention_entropy([0.5, 0.5]) == pytest.approx(0.693147, abs=1e-6)

    def test_three_quarters(self):
        assert attention_entropy([0.75, 0.25]) == pytest.approx(0.5623351446188083, abs=1e-15)

    @pytest.mark.parametrize("p", [[0.5, 0.6], [1.2, -0.2], [np.nan, 1.0], []])
    def test_rejects(self, p):
        with pytest.raises(ValidationError):
            attention_entropy(p)

    @given(arrays(np.float64, st.integers(1, 64), elements=st.floats(0, 1)))
    def test_bounds(self, w):
        if w.sum() <= 0:
            return
        p = w / w.sum()
        h = attention_entropy(p)
        assert 0 <= h <= math.log(len(p)) + 1e-12

    def test_softmax_entropy_matches_direct(self, rng):
        z = rng.standard_normal(50) * 3
        p, h = softmax_entropy(z, 1.7)
        assert h == pytest.approx(attention_entropy(p), abs=1e-13)


class TestTemperature:
    @settings(max_examples=200)
    @given(z=arrays(np.float64, st.integers(2, 64), elements=st.floats(-20, 20)),
           t1=st.floats(0, 8), t2=st.floats(0, 8))
    def test_monotone(self, z, t1, t2):
        lo, hi = sorted((t1, t2))
        assert softmax_entropy(z, hi)[1] <= softmax_entropy(z, lo)[1] + 1e-12

    def test_strict_for_nonconstant(self, rng):
        for _ in range(100):
            z = rng.standard_normal(rng.integers(2, 100))
            hs = [softmax_entropy(z, t)[1] for t in (0.5, 1, 2, 4)]
            assert all(b < a for a, b in zip(hs, hs[1:]))

    def test_constant_row_is_flat(self):
        z = np.full(7, 3.0)
        assert softmax_entropy(z, 1)[1] == pytest.approx(softmax_entropy(z, 4)[1], abs=1e-12)

    def test_shift_invariance(self, rng):
        z = rng.standard_normal(40)
        np.testing.assert_allclose(softmax_entropy(z)[0], softmax_entropy(z + 123.0)[0],
                                   rtol=0, atol=1e-12)


class TestAttend:
    def test_single_token(self, backend, rng):
        q, k, v = rng.standard_normal((3, 1, 16))
        out, tr = attend(q, k, v, 0, ROPE, NONE, trace="full")
        assert tr.probs.shape == (1, 1, 1)
        assert tr.probs[0, 0, 0] == 1.0
        assert tr.entropy[0, 0] == 0.0
        np.testing.assert_array_equal(out, v)

    def test_zero_queries_uniform(self, backend, rng):
        n = 30
        k, v = rng.standard_normal((2, n, 16))
        _, tr = attend(np.zeros((n, 16)), k, v, 3, ROPE, NONE, trace="full")
        for m in range(n):
            np.testing.assert_allclose(tr.probs[0, m, : m + 1], 1 / (m + 1), rtol=1e-15)
        np.testing.assert_allclose(tr.entropy[0], np.log(np.arange(1, n + 1)), atol=1e-12)

    @pytest.mark.parametrize("method", [Method.ROPE, Method.PI, Method.YARN, Method.ABF])
    @pytest.mark.parametrize("kind", [ScalingKind.NONE, ScalingKind.ENTROPY_AWARE,
                                      ScalingKind.RE_ROPE])
    def test_matches_brute_force(self, backend, rng, method, kind):
        rope = RopeConfig(method=method, d=8, c=8, c_target=32)
        policy = ScalingPolicy(kind, c=8, exempt_layers={0})
        n = 24
        q, k, v = rng.standard_normal((3, n, 8))
        out, tr = attend(q, k, v, 2, rope, policy, trace="full")
        want_out, want_p = brute_force_attention(q, k, v, rope,
                                                 [logit_scale(policy, 2, m) for m in range(n)])
        np.testing.assert_allclose(out, want_out, atol=1e-12)
        np.testing.assert_allclose(tr.probs[0], want_p, atol=1e-12)

    def test_trace_invariants(self, backend, rng):
        n, heads = 40, 3
        q, k, v = rng.standard_normal((3, heads, n, 16)) * 3
        _, tr = attend(q, k, v, 0, ROPE, NONE, trace="full")
        np.testing.assert_allclose(tr.probs.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(np.triu(tr.probs, k=1) == 0)
        bound = np.log(np.arange(1, n + 1))
        assert np.all(tr.entropy >= 0) and np.all(tr.entropy <= bound + 1e-12)
        for h in range(heads):
            for m in (0, 5, 39):
                assert tr.entropy[h, m] == pytest.approx(
                    attention_entropy(tr.probs[h, m, : m + 1]), abs=1e-12)

    def test_entropy_mode_matches_full(self, backend, rng):
        q, k, v = rng.standard_normal((3, 2, 20, 16))
        out_f, full = attend(q, k, v, 0, ROPE, NONE, trace="full")
        out_e, ent = attend(q, k, v, 0, ROPE, NONE, trace=TraceMode.ENTROPY)
        out_n, none = attend(q, k, v, 0, ROPE, NONE)
        assert none is None and ent.probs is None
        np.testing.assert_array_equal(full.entropy, ent.entropy)
        np.testing.assert_array_equal(out_f, out_e)
        np.testing.assert_array_equal(out_f, out_n)

    def test_doubling_t_lowers_entropy(self, backend):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            q, k, v = rng.standard_normal((3, 50, 16))
            _, t1 = attend(q, k, v, 0, ROPE, ScalingPolicy(ScalingKind.CONSTANT, value=1.0), "entropy")
            _, t2 = attend(q, k, v, 0, ROPE, ScalingPolicy(ScalingKind.CONSTANT, value=2.0), "entropy")
            # row 0 has one entry and is always 0
            assert t1.entropy[0, 0] == t2.entropy[0, 0] == 0
            assert np.all(t2.entropy[0, 1:] < t1.entropy[0, 1:])

    def test_static_policy_equivalence(self, rng):
        q, k = rng.standard_normal((2, 2, 25, 16))
        t = 2.7
        scaled = causal_logits(q, k, 4, ROPE, ScalingPolicy(ScalingKind.CONSTANT, value=t))
        factored = causal_logits(q * math.sqrt(t), k * math.sqrt(t), 4, ROPE, NONE)
        lower = np.tril(np.ones((25, 25), dtype=bool))
        np.testing.assert_allclose(scaled[:, lower], factored[:, lower], rtol=0, atol=1e-9)

    def test_head_layout(self, backend, rng):
        q, k, v = rng.standard_normal((3, 4, 10, 16))
        out, _ = attend(q, k, v, 0, ROPE, NONE)
        assert out.shape == (4, 10, 16)
        single, _ = attend(q[2], k[2], v[2], 0, ROPE, NONE)
        np.testing.assert_array_equal(out[2], single)

    def test_rejects_nan(self):
        q = np.zeros((3, 16))
        q[1, 2] = np.nan
        with pytest.raises(ValidationError):
            attend(q, np.zeros((3, 16)), np.zeros((3, 16)), 0, ROPE, NONE)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValidationError):
            attend(np.zeros((3, 16)), np.zeros((4, 16)), np.zeros((3, 16)), 0, ROPE, NONE)
        with pytest.raises(ValidationError):
            attend(np.zeros((3, 8)), np.zeros((3, 8)), np.zeros((3, 8)), 0, ROPE, NONE)
