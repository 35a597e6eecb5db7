import math

import numpy as np
import pytest

from ponziwarn.nn import Tensor, concat, gather_rows, nll_loss, scatter_add_rows, segment_softmax
from testutil import gradcheck

RNG = np.random.Generator(np.random.Philox(100))


def param(shape):
    return Tensor(RNG.normal(size=shape) + 0.5, requires_grad=True)


def test_add_sub_mul_div_gradients():
    a, b = param((3, 4)), param((3, 4))
    gradcheck(lambda: ((a + b) * (a - b) / (b * b + 2.0)).sum(), {"a": a, "b": b})


def test_broadcast_bias_gradient():
    x, b = param((4, 3)), param((3,))
    gradcheck(lambda: ((x + b) * (x + b)).sum(), {"x": x, "b": b})


def test_scalar_broadcast():
    a = param((2, 2))
    out = (2.0 * a + 1.0).sum()
    out.backward()
    assert np.allclose(a.grad, 2.0)


def test_matmul_gradients():
    a, b = param((3, 5)), param((5, 2))
    gradcheck(lambda: ((a @ b) * (a @ b)).sum(), {"a": a, "b": b})


def test_relu_and_leaky_relu_gradients():
    # keep inputs away from the kink where the derivative jumps
    a = Tensor(np.array([[-2.0, -0.5, 0.3, 1.7]]), requires_grad=True)
    gradcheck(lambda: (a.relu() * 3.0).sum(), {"a": a})
    gradcheck(lambda: (a.leaky_relu(0.2) * 3.0).sum(), {"a": a})
    assert np.allclose(a.leaky_relu(0.2).data, [[-0.4, -0.1, 0.3, 1.7]])


def test_exp_log_gradients():
    a = param((2, 3))
    gradcheck(lambda: (a.exp() + (a * a + 1.0).log()).sum(), {"a": a})


def test_sum_mean_axes():
    a = param((3, 4))
    gradcheck(lambda: a.sum(axis=0, keepdims=True).sum(), {"a": a})
    gradcheck(lambda: (a.mean(axis=1) * a.mean(axis=1)).sum(), {"a": a})
    assert a.mean().data == pytest.approx(a.data.mean())


def test_max_gradient_routes_to_argmax():
    a = Tensor(np.array([[1.0, 5.0], [3.0, 2.0]]), requires_grad=True)
    a.max(axis=0).sum().backward()
    assert np.array_equal(a.grad, [[0.0, 1.0], [1.0, 0.0]])


def test_max_tie_goes_to_first_row():
    a = Tensor(np.array([[2.0], [2.0]]), requires_grad=True)
    a.max(axis=0).sum().backward()
    assert np.array_equal(a.grad, [[1.0], [0.0]])


def test_reshape_gradient():
    a = param((2, 6))
    gradcheck(lambda: (a.reshape(3, 4) * a.reshape(3, 4)).sum(), {"a": a})


def test_concat_gradients():
    a, b = param((2, 3)), param((2, 2))
    gradcheck(lambda: (concat([a, b], axis=1) * concat([a, b], axis=1)).sum(),
              {"a": a, "b": b})


def test_gather_scatter_gradients():
    a = param((4, 3))
    idx = np.array([0, 2, 2, 3, 1])
    gradcheck(lambda: (gather_rows(a, idx) * gather_rows(a, idx)).sum(), {"a": a})
    gradcheck(lambda: (scatter_add_rows(gather_rows(a, idx), idx, 4) * a).sum(), {"a": a})


def test_segment_softmax_sums_to_one_per_segment():
    scores = Tensor(RNG.normal(size=(7, 1)), requires_grad=True)
    segments = np.array([0, 0, 1, 1, 1, 2, 2])
    alpha = segment_softmax(scores, segments, 3)
    sums = np.zeros(3)
    np.add.at(sums, segments, alpha.data[:, 0])
    assert np.allclose(sums, 1.0, atol=1e-12)
    gradcheck(lambda: (segment_softmax(scores, segments, 3)
                       * Tensor(np.arange(7.0)[:, None])).sum(), {"s": scores})


def test_log_softmax_invariants():
    x = Tensor(RNG.normal(size=(5, 3)) * 10.0)
    out = x.log_softmax()
    # log-domain rows normalize exactly; probability rows sum to one
    logsum = np.log(np.exp(out.data).sum(axis=1))
    assert np.abs(logsum).max() < 1e-9
    assert np.abs(np.exp(out.data).sum(axis=1) - 1.0).max() < 1e-12


def test_log_softmax_gradient():
    x = param((3, 4))
    weights = Tensor(RNG.normal(size=(3, 4)))
    gradcheck(lambda: (x.log_softmax() * weights).sum(), {"x": x})


def test_log_softmax_shift_invariance():
    x = RNG.normal(size=(2, 3))
    a = Tensor(x).log_softmax().data
    b = Tensor(x + 7.5).log_softmax().data
    assert np.allclose(a, b, atol=1e-12)


def test_nll_loss_perfect_prediction_is_zero():
    log_probs = Tensor(np.log(np.array([[1.0 - 1e-12, 1e-12]])))
    assert nll_loss(log_probs, [0]).data == pytest.approx(0.0, abs=1e-9)


def test_nll_loss_uniform_binary_is_ln2():
    log_probs = Tensor(np.full((4, 2), math.log(0.5)))
    assert float(nll_loss(log_probs, [0, 1, 0, 1]).data) == pytest.approx(math.log(2))


def test_nll_loss_rejects_unnormalized_rows():
    with pytest.raises(ValueError, match="normalized"):
        nll_loss(Tensor(np.array([[math.log(0.5), math.log(0.6)]])), [0])


def test_nll_loss_gradient_through_log_softmax():
    logits = param((4, 2))
    labels = [0, 1, 1, 0]
    gradcheck(lambda: nll_loss(logits.log_softmax(), labels), {"logits": logits})


def test_backward_accumulates_across_calls():
    a = param((2, 2))
    loss = (a * a).sum()
    loss.backward()
    first = a.grad.copy()
    (a * a).sum().backward()
    assert np.allclose(a.grad, 2.0 * first)


def test_backward_with_seed_gradient():
    a = param((2, 2))
    (a * 3.0).sum().backward(np.asarray(0.5))
    assert np.allclose(a.grad, 1.5)


def test_constants_do_not_track_gradients():
    a = Tensor(np.ones((2, 2)))
    out = (a * 2.0).sum()
    assert out._vjp is None
    out.backward()
    assert a.grad is None


def test_shared_subexpression_gradient():
    a = param((2, 2))
    b = a * 2.0
    (b + b * b).sum().backward()
    assert np.allclose(a.grad, 2.0 + 8.0 * a.data)
