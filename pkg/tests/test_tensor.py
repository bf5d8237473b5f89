import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from twsforecast import tensor as T
from twsforecast.gradcheck import check, numeric_grad, relative_error
from twsforecast.tensor import Tape, Tensor, backward

GRAD_TOL = 1e-4


def leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_matmul_identity_and_hand_case():
    x = np.arange(12.0).reshape(3, 4)
    assert np.array_equal((Tensor(np.eye(3)) @ Tensor(x)).data, x)
    out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[0.0], [1.0]]))
    assert np.array_equal(out.data, [[2.0], [4.0]])


def test_affine_matches_matmul_plus_bias():
    rng = np.random.default_rng(12)
    x, w, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
    assert np.allclose(T.affine(Tensor(x), Tensor(w), Tensor(b)).data, x @ w + b, atol=1e-14)
    with pytest.raises(T.ShapeError):
        T.affine(Tensor(x), Tensor(w), Tensor(np.ones(4)))


def test_matmul_shape_error():
    with pytest.raises(T.ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a, b = leaf(rng, 4, 5), leaf(rng, 5, 3)
    w = rng.normal(size=(4, 3))
    errs = check(lambda: (T.matmul(a, b) * w).sum(), [a, b])
    assert max(errs) < GRAD_TOL


def test_batched_matmul_broadcast_gradient():
    rng = np.random.default_rng(1)
    a, b = leaf(rng, 2, 3, 4, 5), leaf(rng, 5, 2)
    w = rng.normal(size=(2, 3, 4, 2))
    assert max(check(lambda: (a @ b * w).sum(), [a, b])) < GRAD_TOL


def test_softmax_examples():
    assert np.allclose(T.softmax(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3, atol=1e-15)
    out = T.softmax(Tensor([1000.0, 0.0, 0.0])).data
    assert np.all(np.isfinite(out))
    assert abs(out[0] - 1.0) < 1e-12 and out[1:].max() < 1e-12


def test_softmax_rows_and_gradient():
    rng = np.random.default_rng(2)
    x = leaf(rng, 3, 4)
    assert np.allclose(T.softmax(x, axis=1).data.sum(axis=1), 1.0, atol=1e-9)
    w = rng.normal(size=(3, 4))
    assert max(check(lambda: (T.softmax(x, axis=1) * w).sum(), [x])) < GRAD_TOL


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)))
def test_softmax_is_a_distribution(x):
    y = T.softmax(Tensor(x), axis=-1).data
    assert (y >= 0).all()
    assert np.allclose(y.sum(axis=-1), 1.0, atol=1e-9)


def _ln(x, eps=1e-5):
    d = x.shape[-1]
    return T.layer_norm(x, Tensor(np.ones(d)), Tensor(np.zeros(d)), eps)


def test_layer_norm_constant_slice_is_zero():
    assert np.array_equal(_ln(Tensor(np.full((2, 5), 3.0))).data, np.zeros((2, 5)))


def test_layer_norm_hand_computed():
    # mean 2, population std sqrt(2/3)
    out = _ln(Tensor([1.0, 2.0, 3.0]), eps=1e-12).data
    assert np.allclose(out, [-1.2247, 0.0, 1.2247], atol=1e-3)


def test_layer_norm_moments():
    rng = np.random.default_rng(3)
    out = _ln(Tensor(rng.normal(3.0, 2.0, size=(6, 32)))).data
    assert np.abs(out.mean(axis=-1)).max() < 1e-6
    assert np.allclose(out.var(axis=-1), 1.0, atol=1e-5)


def test_layer_norm_gradient():
    rng = np.random.default_rng(4)
    x, g, b = leaf(rng, 2, 5), leaf(rng, 5), leaf(rng, 5)
    w = rng.normal(size=(2, 5))
    assert max(check(lambda: (T.layer_norm(x, g, b, 1e-5) * w).sum(), [x, g, b])) < GRAD_TOL


def test_backward_linear_and_quadratic():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = x.sum()
    backward(tape, loss)
    assert np.array_equal(x.grad, np.ones((2, 2)))

    y = Tensor([1.0, -2.0], requires_grad=True)
    with Tape() as tape:
        loss = (y * y).sum()
    backward(tape, loss)
    assert np.array_equal(y.grad, [2.0, -4.0])


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(T.ShapeError):
        backward(tape, y)


def test_unused_leaf_gets_zero_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    unused = Tensor([5.0], requires_grad=True)
    with Tape() as tape:
        loss = (x * x).sum()
    backward(tape, loss, [x, unused])
    assert np.array_equal(unused.grad, [0.0])


def test_no_tape_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    y = x * 3.0
    assert not y.requires_grad


def test_tape_is_topologically_ordered():
    rng = np.random.default_rng(5)
    a, b = leaf(rng, 3), leaf(rng, 3)
    with Tape() as tape:
        c = a * b
        d = T.gelu(c) + a
        loss = d.sum()
    seen = {id(a), id(b)}
    for entry in tape.entries:
        assert all(id(t) in seen or not t.requires_grad for t in entry.inputs)
        seen.add(id(entry.output))
    assert tape.entries[-1].output is loss


def test_attention_block_gradient():
    rng = np.random.default_rng(6)
    x, wq, wk, wv = leaf(rng, 2, 4, 6), leaf(rng, 6, 6), leaf(rng, 6, 6), leaf(rng, 6, 6)
    target = rng.normal(size=(2, 4, 6))

    def loss():
        q, k, v = x @ wq, x @ wk, x @ wv
        att = T.softmax(T.scale(q @ k.transpose(0, 2, 1), 1 / np.sqrt(6)), axis=-1)
        out = att @ v
        return T.reduce_mean(T.square(out - target))

    assert max(check(loss, [x, wq, wk, wv])) < GRAD_TOL


@pytest.mark.parametrize("name,fn,shapes", [
    ("add", lambda a, b: a + b, [(3, 4), (4,)]),
    ("sub", lambda a, b: a - b, [(3, 4), (3, 1)]),
    ("mul", lambda a, b: a * b, [(3, 4), (1, 4)]),
    ("scale", lambda a: T.scale(a, -2.5), [(3, 4)]),
    ("transpose", lambda a: a.transpose(1, 0, 2), [(2, 3, 4)]),
    ("reshape", lambda a: a.reshape(4, 6), [(2, 3, 4)]),
    ("concat", lambda a, b: T.concat([a, b], axis=1), [(2, 3), (2, 5)]),
    ("slice", lambda a: a[:, 1:3], [(3, 5)]),
    ("sum_axis", lambda a: a.sum(axis=1), [(3, 5)]),
    ("mean_axis", lambda a: a.mean(axis=0, keepdims=True), [(3, 5)]),
    ("gelu", T.gelu, [(3, 5)]),
    ("affine", T.affine, [(2, 3, 4), (4, 5), (5,)]),
    ("square", T.square, [(3, 5)]),
    ("broadcast", lambda a: T.broadcast_to(a, (4, 2, 3)), [(1, 3)]),
])
def test_operation_gradients(name, fn, shapes):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    leaves = [leaf(rng, *s) for s in shapes]
    out_shape = fn(*[Tensor(l.data) for l in leaves]).shape
    w = rng.normal(size=out_shape)
    assert max(check(lambda: (fn(*leaves) * w).sum(), leaves)) < GRAD_TOL


def test_dropout_is_seeded_and_identity_in_eval():
    x = Tensor(np.ones((4, 8)))
    assert T.dropout(x, 0.5, None, training=False) is x
    a = T.dropout(x, 0.5, np.random.Generator(np.random.Philox(key=7)), training=True).data
    b = T.dropout(x, 0.5, np.random.Generator(np.random.Philox(key=7)), training=True).data
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 2.0}


def test_dropout_gradient_uses_same_mask():
    rng = np.random.default_rng(8)
    x = leaf(rng, 3, 4)
    w = rng.normal(size=(3, 4))
    # fresh generator per evaluation so every call draws the same mask
    fn = lambda: (T.dropout(x, 0.3, np.random.Generator(np.random.Philox(key=1)), True) * w).sum()
    assert max(check(fn, [x])) < GRAD_TOL


def test_non_finite_forward_raises():
    with pytest.raises(T.NumericError):
        Tensor([1.0]) * Tensor([np.inf])


def test_forward_is_deterministic():
    rng = np.random.default_rng(9)
    a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
    out1 = T.softmax(T.gelu(Tensor(a) @ Tensor(b))).data
    out2 = T.softmax(T.gelu(Tensor(a) @ Tensor(b))).data
    assert out1.tobytes() == out2.tobytes()


def test_relative_error_floor():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.0 + 1e-6])) < 1e-5


def test_numeric_grad_restores_input():
    x = np.array([1.0, 2.0, 3.0])
    g = numeric_grad(lambda: float((x ** 2).sum()), x)
    assert np.allclose(g, 2 * x, atol=1e-8)
    assert np.array_equal(x, [1.0, 2.0, 3.0])
