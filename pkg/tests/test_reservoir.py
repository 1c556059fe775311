import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deeprscn.reservoir import (
    Activation,
    LayerParams,
    NilpotentMatrixError,
    ShapeError,
    rollout_candidates,
    rollout_layer,
    rollout_new_node,
    sparse_uniform_matrix,
    spectral_radius,
    spectral_rescale,
)


def random_layer(rng, n, k, triangular=True, scale=1.0):
    w_r = rng.uniform(-scale, scale, (n, n))
    if triangular:
        w_r = np.tril(w_r)
    return LayerParams(rng.uniform(-1, 1, (n, k)), w_r, rng.uniform(-1, 1, n), triangular=triangular)


def test_single_node_matches_hand_recursion():
    p = LayerParams([[0.5]], [[0.3]], [0.1])
    u = np.array([[1.0, -1.0, 0.5]])
    x = rollout_layer(p, u).states[0]
    x1 = np.tanh(0.5 + 0.1)
    x2 = np.tanh(-0.5 + 0.1 + 0.3 * x1)
    x3 = np.tanh(0.25 + 0.1 + 0.3 * x2)
    np.testing.assert_allclose(x, [x1, x2, x3], rtol=0, atol=1e-15)


def test_initial_state_is_used(rng):
    p = random_layer(rng, 3, 2)
    u = rng.uniform(-1, 1, (2, 10))
    x0 = np.array([0.2, -0.1, 0.4])
    tr = rollout_layer(p, u, initial_state=x0)
    np.testing.assert_allclose(tr.states[:, 0], np.tanh(p.w_in @ u[:, 0] + p.bias + p.w_r @ x0))
    np.testing.assert_array_equal(tr.initial_state, x0)


def test_sigmoid_activation():
    p = LayerParams([[1.0]], [[0.0]], [0.0], activation="sigmoid")
    x = rollout_layer(p, [[0.0, 2.0]]).states[0]
    np.testing.assert_allclose(x, [0.5, 1 / (1 + np.exp(-2.0))])
    assert p.activation is Activation.SIGMOID


def test_triangular_layer_rejects_upper_entries():
    with pytest.raises(ValueError, match="above the diagonal"):
        LayerParams(np.ones((2, 1)), [[0.1, 0.2], [0.3, 0.4]], np.zeros(2))
    # dense recurrent weights are fine when the layer is not triangular
    LayerParams(np.ones((2, 1)), [[0.1, 0.2], [0.3, 0.4]], np.zeros(2), triangular=False)


def test_layer_weights_are_read_only(rng):
    p = random_layer(rng, 4, 2)
    for arr in (p.w_in, p.w_r, p.bias):
        with pytest.raises(ValueError):
            arr[0] = 1.0


@pytest.mark.parametrize(
    "w_in,w_r,bias",
    [
        (np.ones((2, 1)), np.zeros((3, 3)), np.zeros(2)),
        (np.ones((2, 1)), np.zeros((2, 2)), np.zeros(3)),
        (np.zeros((0, 1)), np.zeros((0, 0)), np.zeros(0)),
    ],
)
def test_layer_shape_errors(w_in, w_r, bias):
    with pytest.raises(ShapeError):
        LayerParams(w_in, w_r, bias)


def test_non_finite_weights_rejected():
    with pytest.raises(ValueError, match="finite"):
        LayerParams([[np.nan]], [[0.0]], [0.0])


def test_rollout_input_mismatch(rng):
    with pytest.raises(ShapeError):
        rollout_layer(random_layer(rng, 3, 2), np.zeros((3, 5)))


def test_truncated_layer_reproduces_leading_states(rng):
    p = random_layer(rng, 6, 2)
    u = rng.uniform(-1, 1, (2, 30))
    full = rollout_layer(p, u).states
    np.testing.assert_allclose(rollout_layer(p.truncated(4), u).states, full[:4], rtol=0, atol=0)


@settings(max_examples=1000)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(0, 6),
    k=st.integers(1, 3),
    steps=st.integers(1, 25),
    scale=st.sampled_from([0.5, 1.0, 5.0]),
)
def test_incremental_rollout_equals_full_rollout(seed, n, k, steps, scale):
    # a node appended to a lower-triangular layer leaves the old states unchanged
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, (k, steps))
    new_in = rng.uniform(-scale, scale, k)
    new_r = rng.uniform(-scale, scale, n + 1)
    new_b = rng.uniform(-scale, scale)
    if n:
        base = random_layer(rng, n, k, scale=scale)
        existing = rollout_layer(base, u).states
        w_r = np.zeros((n + 1, n + 1))
        w_r[:n, :n] = base.w_r
        w_r[n] = new_r
        full = LayerParams(np.vstack([base.w_in, new_in]), w_r, np.append(base.bias, new_b))
    else:
        existing = None
        full = LayerParams(new_in[None, :], new_r[None, :], [new_b])
    trace = rollout_new_node(existing, u, new_in, new_r, new_b)
    ref = rollout_layer(full, u).states
    np.testing.assert_allclose(trace, ref[-1], rtol=0, atol=1e-12)
    if n:
        np.testing.assert_allclose(existing, ref[:-1], rtol=0, atol=1e-12)


def test_batch_rollout_matches_single_rollouts(rng):
    base = random_layer(rng, 4, 2)
    u = rng.uniform(-1, 1, (2, 40))
    states = rollout_layer(base, u).states
    w_in, w_r, b = rng.uniform(-1, 1, (5, 2)), rng.uniform(-1, 1, (5, 5)), rng.uniform(-1, 1, 5)
    batch = rollout_candidates(states, u, w_in, w_r, b)
    for c in range(5):
        np.testing.assert_allclose(batch[c], rollout_new_node(states, u, w_in[c], w_r[c], b[c]), rtol=0, atol=1e-14)


def test_candidate_shape_checks(rng):
    u = np.zeros((2, 5))
    with pytest.raises(ShapeError):
        rollout_candidates(None, u, np.zeros((1, 3)), np.zeros((1, 1)), [0.0])
    with pytest.raises(ShapeError):
        rollout_candidates(np.zeros((2, 5)), u, np.zeros((1, 2)), np.zeros((1, 2)), [0.0])
    with pytest.raises(ShapeError):
        rollout_candidates(np.zeros((2, 4)), u, np.zeros((1, 2)), np.zeros((1, 3)), [0.0])


def test_spectral_rescale_hits_target(rng):
    w = rng.uniform(-1, 1, (20, 20))
    np.testing.assert_allclose(spectral_radius(spectral_rescale(w, 0.9)), 0.9, rtol=1e-10)


def test_spectral_rescale_nilpotent():
    with pytest.raises(NilpotentMatrixError):
        spectral_rescale(np.tril(np.ones((4, 4)), k=-1), 0.9)
    with pytest.raises(ValueError):
        spectral_rescale(np.eye(2), 0.0)


@pytest.mark.parametrize("rows,cols,density", [(50, 50, 0.02), (10, 7, 0.3), (4, 4, 1.0), (100, 1, 0.01)])
def test_sparse_matrix_entry_count_and_range(rows, cols, density, rng):
    w = sparse_uniform_matrix(rows, cols, density, 2.0, rng)
    assert np.count_nonzero(w) == int(np.ceil(density * rows * cols))
    assert np.all(np.abs(w) <= 2.0)


def test_sparse_matrix_rejects_bad_args(rng):
    with pytest.raises(ValueError):
        sparse_uniform_matrix(5, 5, 0.0, 1.0, rng)
    with pytest.raises(ValueError):
        sparse_uniform_matrix(5, 5, 0.5, -1.0, rng)
