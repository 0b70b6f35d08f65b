import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, rel_err
from spikescope.numerics import ShapeError, softmax_rows
from spikescope.tier34 import (
    AttentionParams,
    attention_backward,
    attention_forward,
    relevance,
    scaled_dot_product_attention,
    transpose_snapshots,
)


def params(h_in, d, seed=0, **kw):
    return AttentionParams.init(h_in, d, np.random.default_rng(seed), **kw)


def test_transpose_examples():
    assert transpose_snapshots(np.array([[1.0]])).tolist() == [[1.0]]
    Z = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert transpose_snapshots(Z).tolist() == [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]
    assert np.array_equal(transpose_snapshots(transpose_snapshots(Z)), Z)
    with pytest.raises(ShapeError):
        transpose_snapshots(np.zeros((0, 3)))


@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31))
def test_transpose_involution(h, t, seed):
    Z = (np.random.default_rng(seed).random((h, t)) < 0.5).astype(float)
    assert np.array_equal(transpose_snapshots(transpose_snapshots(Z)), Z)


def test_hand_sdpa_instance():
    q = np.array([[1.0], [0.0]])
    k = np.array([[1.0], [0.0]])
    v = np.array([[2.0], [4.0]])
    a, w = scaled_dot_product_attention(q, k, v)
    e = np.e / (np.e + 1.0)
    np.testing.assert_allclose(w[0], [e, 1 - e], atol=1e-15)
    assert w[0, 0] == pytest.approx(0.7310585786, abs=1e-10)
    assert a[0, 0] == pytest.approx(2 * e + 4 * (1 - e), abs=1e-12)
    assert a[0, 0] == pytest.approx(2.537882842739990, abs=1e-12)


def test_zero_query_key_gives_uniform_attention(rng):
    p = params(6, 4)
    p.wq[0][:] = 0.0
    p.wk[0][:] = 0.0
    zt = rng.random((5, 6))
    _, trace = attention_forward(zt, p)
    np.testing.assert_allclose(trace.attention_weights, 1 / 6, atol=1e-15)
    np.testing.assert_allclose(trace.A, np.tile(trace.V.mean(axis=0), (6, 1)), atol=1e-12)
    np.testing.assert_allclose(relevance(trace), 1 / 5, atol=1e-15)


def test_requires_an_episode_row():
    with pytest.raises(ShapeError):
        attention_forward(np.zeros((0, 3)), params(3, 4))
    with pytest.raises(ShapeError):
        attention_forward(np.zeros((2, 5)), params(3, 4))


def test_single_episode_relevance_is_one(rng):
    _, trace = attention_forward(rng.random((1, 3)), params(3, 4))
    assert relevance(trace).tolist() == [1.0]


def test_trace_shapes(rng):
    logits, trace = attention_forward(rng.random((7, 3)), params(3, 8))
    assert logits.shape == (5,)
    assert trace.Q.shape == trace.K.shape == trace.V.shape == trace.A.shape == (8, 8)
    assert trace.attention_weights.shape == (8, 8)


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 5), st.floats(0.1, 20.0))
def test_attention_rows_stochastic(seed, t, h, scale):
    r = np.random.default_rng(seed)
    p = params(h, 4, seed)
    for w in (p.wq[0], p.wk[0]):
        w *= scale
    _, trace = attention_forward(r.normal(size=(t, h)) * scale, p)
    w = trace.blocks[0].weights
    assert np.all(w >= 0)
    assert np.max(np.abs(w.sum(axis=-1) - 1.0)) < 1e-9


@pytest.mark.parametrize("c", [-30.0, 0.5, 100.0])
def test_score_shift_invariance(c, rng):
    p = params(3, 4)
    logits, trace = attention_forward(rng.random((5, 3)), p)
    scores = trace.Q @ trace.K.T / np.sqrt(4)
    shifted = softmax_rows(scores + c)
    assert np.max(np.abs(shifted - trace.attention_weights)) < 1e-12
    shifted_logits = (shifted @ trace.V)[0] @ p.head + p.head_bias
    assert np.max(np.abs(shifted_logits - logits)) < 1e-9


def _check_grads(p, zt, g, tol=1e-5):
    def loss():
        return float(np.sum(g * attention_forward(zt, p)[0]))

    _, trace = attention_forward(zt, p)
    grads = attention_backward(g, trace, p)
    for name, arr in p.named_arrays().items():
        fd = central_diff(loss, arr)
        assert rel_err(grads.arrays[name], fd) < tol, name
    assert rel_err(grads.zt, central_diff(loss, zt)) < tol


@pytest.mark.parametrize("seed", range(20))
def test_backward_matches_finite_differences(seed):
    r = np.random.default_rng(seed)
    t, d, h = int(r.integers(1, 5)), int(r.integers(1, 5)), int(r.integers(1, 5))
    p = params(h, d, seed)
    _check_grads(p, r.normal(size=(t, h)), r.normal(size=5))


def test_backward_t2_d3():
    r = np.random.default_rng(99)
    _check_grads(params(3, 3, 99), r.normal(size=(2, 3)), r.normal(size=5))


@pytest.mark.parametrize("seed", range(4))
def test_backward_multihead_multiblock_positional(seed):
    r = np.random.default_rng(seed)
    p = params(3, 4, seed, n_blocks=2, n_heads=2, positional=True)
    _check_grads(p, r.normal(size=(3, 3)), r.normal(size=5))


def test_backward_batched_sums(rng):
    p = params(3, 4)
    zt = rng.normal(size=(3, 2, 3))
    g = rng.normal(size=(3, 5))
    _, trace = attention_forward(zt, p)
    total = attention_backward(g, trace, p)
    for b in range(3):
        _, tb = attention_forward(zt[b], p)
        gb = attention_backward(g[b], tb, p)
        np.testing.assert_allclose(total.zt[b], gb.zt, atol=1e-12)
    summed = {k: sum(attention_backward(g[b], attention_forward(zt[b], p)[1], p).arrays[k] for b in range(3))
              for k in total.arrays}
    for k in total.arrays:
        np.testing.assert_allclose(total.arrays[k], summed[k], atol=1e-12)


def test_zero_grad_and_class_token_flow():
    p = params(3, 4)
    _, trace = attention_forward(np.zeros((2, 3)), p)
    zero = attention_backward(np.zeros(5), trace, p)
    assert all(not v.any() for v in zero.arrays.values())
    g = attention_backward(np.ones(5) - 5 * np.eye(5)[0], trace, p)
    assert np.abs(g.arrays["attn.class_token"]).sum() > 0
    with pytest.raises(ValueError):
        attention_backward(np.ones(5), None, p)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8))
def test_relevance_sums_to_one(seed, t):
    r = np.random.default_rng(seed)
    _, trace = attention_forward(r.random((t, 4)), params(4, 6, seed))
    rel = relevance(trace)
    assert rel.shape == (t,)
    assert abs(rel.sum() - 1.0) < 1e-9 and np.all(rel >= 0)
