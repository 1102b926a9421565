import io
import math

import numpy as np
import pytest

from glycocc.errors import CheckpointError, DegenerateBatch, InvalidProbability, ShapeMismatch
from glycocc.services.checkpoint import load_checkpoint, read_tensors, save_checkpoint, write_tensors
from glycocc.services.tensorcore import (
    Adam,
    BatchNorm,
    Dropout,
    Linear,
    Parameter,
    PReLU,
    Tensor,
    adam_step,
    batchnorm,
    bce_with_logits,
    concat,
    cross_entropy,
    dropout,
    finite_diff_check,
    gather_rows,
    linear,
    mse,
    prelu,
    scatter_rows,
    segment_softmax,
    sigmoid,
    softmax,
)

TOLERANCE = 1e-5


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return (out * Tensor(weights)).sum()


def test_linear_identity_input():
    W = Tensor([[3.0, 1.0], [1.0, 4.0]])
    y = linear(Tensor(np.eye(2)), W, Tensor([0.0, 0.0]))
    np.testing.assert_allclose(y.data, [[3.0, 1.0], [1.0, 4.0]])


def test_linear_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        linear(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))
    with pytest.raises(ShapeMismatch):
        linear(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))), Tensor(np.ones(3)))


def test_prelu_values():
    out = prelu(Tensor([-4.0, 2.0]), Tensor(0.25))
    np.testing.assert_allclose(out.data, [-1.0, 2.0])


def test_dropout_identity_cases():
    x = Tensor(np.ones((3, 4)))
    assert dropout(x, 0.0, True, 1) is x
    assert dropout(x, 0.5, False, 1) is x


def test_dropout_mask_is_seeded():
    x = Tensor(np.ones((50, 8)))
    a = dropout(x, 0.5, True, [0, 1, 2]).data
    b = dropout(x, 0.5, True, [0, 1, 2]).data
    c = dropout(x, 0.5, True, [0, 1, 3]).data
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert set(np.unique(a)) <= {0.0, 2.0}


@pytest.mark.parametrize("p", [-0.1, 1.0])
def test_dropout_probability_range(p):
    with pytest.raises(InvalidProbability):
        dropout(Tensor(np.ones(2)), p, True, 0)
    with pytest.raises(InvalidProbability):
        Dropout(p)


def test_dropout_module_follows_train_mode():
    layer = Dropout(0.5, layer_id=3, seed=1)
    x = Tensor(np.ones((20, 5)))
    assert not np.array_equal(layer(x, step=0).data, x.data)
    layer.eval()
    assert layer(x, step=0) is x


def test_batchnorm_training_normalizes():
    layer = BatchNorm(1)
    out = layer(Tensor([[1.0], [3.0]]))
    np.testing.assert_allclose(out.data.ravel(), [-1.0, 1.0], atol=1e-5)
    np.testing.assert_allclose(layer.buffers["running_mean"], [0.2])
    np.testing.assert_allclose(layer.buffers["running_var"], [0.9 + 0.1 * 2.0])


def test_batchnorm_eval_uses_running_stats():
    layer = BatchNorm(2).eval()
    x = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(layer(Tensor(x)).data, x / math.sqrt(1.0 + 1e-5))


def test_batchnorm_single_row_training():
    with pytest.raises(DegenerateBatch):
        BatchNorm(3)(Tensor(np.ones((1, 3))))


def test_bce_at_zero_logit():
    assert bce_with_logits(Tensor([0.0]), [1.0]).item() == pytest.approx(math.log(2.0))


def test_bce_is_stable_for_large_logits():
    loss = bce_with_logits(Tensor([800.0, -800.0]), [1.0, 0.0]).item()
    assert loss == pytest.approx(0.0)


def test_bce_rejects_bad_targets():
    with pytest.raises(InvalidProbability):
        bce_with_logits(Tensor([0.0]), [2.0])
    with pytest.raises(ShapeMismatch):
        bce_with_logits(Tensor([0.0, 1.0]), [1.0, 0.0, 1.0])


@pytest.mark.parametrize("k", [2, 4, 7])
def test_cross_entropy_uniform(k):
    loss = cross_entropy(Tensor(np.zeros((3, k))), [0, 1, k - 1])
    assert loss.item() == pytest.approx(math.log(k))


def test_cross_entropy_bad_class():
    with pytest.raises(ShapeMismatch):
        cross_entropy(Tensor(np.zeros((1, 3))), [3])


def test_mse_value():
    assert mse(Tensor([1.0, 3.0]), [0.0, 0.0]).item() == pytest.approx(5.0)


def test_sigmoid_and_softmax():
    assert sigmoid(0.0) == pytest.approx(0.5)
    np.testing.assert_allclose(softmax(np.array([[1000.0, 1000.0]])), [[0.5, 0.5]])


def test_adam_first_step_moves_by_lr():
    w = Parameter(1.0)
    adam_step([w], [np.array(1.0)], lr=0.1)
    assert w.item() == pytest.approx(0.9)


def test_adam_minimizes_quadratic():
    w = Parameter(1.0)
    optimizer = Adam([w], lr=0.1)
    for _ in range(500):
        optimizer.zero_grad()
        (w * w).backward()
        optimizer.step()
    assert abs(w.item()) < 1e-3


def test_backward_accumulates_shared_inputs():
    x = Parameter([2.0])
    ((x * x) + x).sum().backward()
    np.testing.assert_allclose(x.grad, [5.0])


def test_gradcheck_linear_prelu(rng):
    x = Parameter(rng.normal(size=(5, 3)))
    layer = Linear(3, 4, rng)
    act = PReLU(4)
    weights = rng.normal(size=(5, 4))
    f = lambda: weighted(act(layer(x)), weights)
    assert finite_diff_check(f, [x, layer.weight, layer.bias, act.slope]) < TOLERANCE


def test_gradcheck_batchnorm(rng):
    x = Parameter(rng.normal(size=(6, 3)))
    layer = BatchNorm(3)
    weights = rng.normal(size=(6, 3))
    f = lambda: weighted(layer(x), weights)
    assert finite_diff_check(f, [x, layer.gamma, layer.beta]) < TOLERANCE


def test_gradcheck_losses(rng):
    z = Parameter(rng.normal(size=(6, 3)))
    targets = (rng.random((6, 3)) > 0.5).astype(float)
    classes = rng.integers(0, 3, size=6)
    values = rng.normal(size=(6, 3))
    assert finite_diff_check(lambda: bce_with_logits(z, targets), [z]) < TOLERANCE
    assert finite_diff_check(lambda: cross_entropy(z, classes), [z]) < TOLERANCE
    assert finite_diff_check(lambda: mse(z, values), [z]) < TOLERANCE


def test_gradcheck_structural_ops(rng):
    x = Parameter(rng.normal(size=(4, 2)))
    y = Parameter(rng.normal(size=(3, 2)))
    index = np.array([0, 2, 2, 3, 1])
    segments = np.array([0, 0, 1, 1, 1, 2, 2])
    weights = rng.normal(size=(7, 2))

    def f():
        stacked = concat([gather_rows(x, index), scatter_rows(y, np.array([1, 0, 1]), 2)])
        scores = stacked.sum(axis=1).reshape(7, 1)
        attention = segment_softmax(scores, segments, 3)
        return weighted(stacked * attention, weights)
    assert finite_diff_check(f, [x, y]) < TOLERANCE


def test_segment_softmax_sums_to_one():
    scores = Tensor(np.array([[1.0], [2.0], [3.0], [-1.0]]))
    out = segment_softmax(scores, np.array([0, 0, 1, 1]), 2).data.ravel()
    assert out[:2].sum() == pytest.approx(1.0)
    assert out[2:].sum() == pytest.approx(1.0)


def test_scatter_sums_rows():
    out = scatter_rows(Tensor([[1.0], [2.0], [4.0]]), np.array([1, 1, 0]), 3)
    np.testing.assert_allclose(out.data.ravel(), [4.0, 3.0, 0.0])


def test_checkpoint_stream_round_trip(rng):
    tensors = {"layer.weight": rng.normal(size=(3, 2)), "scalar": np.array(1.5), "empty": np.zeros((0, 4))}
    buffer = io.BytesIO()
    write_tensors(buffer, tensors)
    buffer.seek(0)
    loaded = read_tensors(buffer)
    assert list(loaded) == list(tensors)
    for name, array in tensors.items():
        np.testing.assert_array_equal(loaded[name], array)
        assert loaded[name].shape == array.shape


def test_module_state_survives_checkpoint(tmp_path, rng):
    source = BatchNorm(3)
    source(Tensor(rng.normal(size=(4, 3))))
    path = tmp_path / "bn.gcck"
    save_checkpoint(path, source.state_dict())
    target = BatchNorm(3)
    target.load_state_dict(load_checkpoint(path))
    for name, array in source.state_dict().items():
        np.testing.assert_array_equal(target.state_dict()[name], array)


def test_state_mismatch_rejected(rng):
    with pytest.raises(CheckpointError):
        Linear(3, 2, rng).load_state_dict(Linear(2, 2, rng).state_dict())
    with pytest.raises(CheckpointError):
        Linear(3, 2, rng).load_state_dict({"weight": np.zeros((3, 2))})


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.gcck"
    path.write_bytes(b"NOPE" + b"\x00" * 8)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncated_checkpoint():
    buffer = io.BytesIO()
    write_tensors(buffer, {"w": np.ones(4)})
    with pytest.raises(CheckpointError, match="Truncated"):
        read_tensors(io.BytesIO(buffer.getvalue()[:-3]))
