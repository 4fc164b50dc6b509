import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import numeric_grad, rel_error
from cssfn.optim import AdamState, adam_step, xavier_bound, xavier_init
from cssfn.resize import bicubic_resize, downscale, keys_kernel, resize_matrix, upscale
from cssfn.tensor import (
    ConfigurationError,
    ConvParams,
    Tensor,
    add,
    concat_channels,
    conv2d,
    conv2d_backward,
    conv2d_forward,
    l1_loss,
    l1_loss_backward,
    mean,
    parameter,
    pixel_shuffle,
    pixel_shuffle_forward,
    pixel_unshuffle_forward,
    relu,
    relu_backward,
    relu_forward,
    split_channels,
    split_widths,
)


# ---------------------------------------------------------------------------
# conv2d


def test_conv_all_ones_3x3():
    out = conv2d_forward(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), np.zeros(1))
    np.testing.assert_array_equal(out[0, 0], [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


def test_conv_1x1_identity(rng):
    x = rng.standard_normal((2, 1, 5, 4))
    np.testing.assert_array_equal(conv2d_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1)), x)


def test_conv_zero_params_give_zero(rng):
    x = rng.standard_normal((2, 3, 5, 5))
    assert not conv2d_forward(x, np.zeros((4, 3, 3, 3)), np.zeros(4)).any()


def test_conv_matches_direct_summation(rng):
    x = rng.standard_normal((2, 3, 5, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 4, 5, 6))
    for o in range(4):
        for y in range(5):
            for xx in range(6):
                ref[:, o, y, xx] = b[o] + np.einsum("nikl,ikl->n", xp[:, :, y : y + 3, xx : xx + 3], w[o])
    np.testing.assert_allclose(conv2d_forward(x, w, b), ref, atol=1e-12)


def test_conv_channel_mismatch():
    with pytest.raises(ConfigurationError, match="Cin=2"):
        conv2d_forward(np.zeros((1, 3, 4, 4)), np.zeros((1, 2, 3, 3)), np.zeros(1))


def test_conv_backward_zero_grad(rng):
    x = rng.standard_normal((1, 2, 4, 4))
    gx, gw, gb = conv2d_backward(x, rng.standard_normal((3, 2, 3, 3)), np.zeros((1, 3, 4, 4)))
    assert not gx.any() and not gw.any() and not gb.any()


def test_conv_backward_identity_kernel(rng):
    g = rng.standard_normal((2, 1, 4, 5))
    gx, _, _ = conv2d_backward(rng.standard_normal((2, 1, 4, 5)), np.ones((1, 1, 1, 1)), g)
    np.testing.assert_array_equal(gx, g)


def test_conv_backward_shape_mismatch(rng):
    with pytest.raises(ConfigurationError):
        conv2d_backward(np.zeros((1, 2, 4, 4)), np.zeros((3, 2, 3, 3)), np.zeros((1, 3, 4, 5)))


@pytest.mark.parametrize("k", [1, 3])
def test_conv_backward_finite_differences(rng, k):
    x = rng.uniform(-1, 1, (1, 2, 2, 2))
    w = rng.uniform(-1, 1, (3, 2, k, k))
    b = rng.uniform(-1, 1, 3)
    proj = rng.standard_normal((1, 3, 2, 2))

    def f():
        return float((conv2d_forward(x, w, b) * proj).sum())

    gx, gw, gb = conv2d_backward(x, w, proj)
    assert rel_error(gx, numeric_grad(f, x)) < 1e-6
    assert rel_error(gw, numeric_grad(f, w)) < 1e-6
    assert rel_error(gb, numeric_grad(f, b)) < 1e-6
    np.testing.assert_allclose(gb, proj.sum(axis=(0, 2, 3)))


def test_conv_params_validation():
    with pytest.raises(ConfigurationError):
        ConvParams.from_arrays(np.zeros((2, 1, 5, 5)), np.zeros(2))
    with pytest.raises(ConfigurationError):
        ConvParams.from_arrays(np.zeros((2, 1, 3, 3)), np.zeros(3))
    p = ConvParams.from_arrays(np.zeros((4, 2, 1, 1)), np.zeros(4))
    assert (p.in_channels, p.out_channels, p.kernel_size) == (2, 4, 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-3, 3), k=st.sampled_from([1, 3]))
def test_conv_is_linear(seed, alpha, k):
    r = np.random.default_rng(seed)
    x1, x2 = r.standard_normal((2, 1, 2, 4, 4))
    w1, w2 = r.standard_normal((2, 3, 2, k, k))
    b1, b2 = r.standard_normal((2, 3))
    zero = np.zeros(3)
    np.testing.assert_allclose(
        conv2d_forward(x1 + alpha * x2, w1, zero),
        conv2d_forward(x1, w1, zero) + alpha * conv2d_forward(x2, w1, zero),
        atol=1e-10,
    )
    np.testing.assert_allclose(
        conv2d_forward(x1, w1 + alpha * w2, b1 + alpha * b2),
        conv2d_forward(x1, w1, b1) + alpha * conv2d_forward(x1, w2, b2),
        atol=1e-10,
    )


def test_conv_deterministic(rng):
    x = rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    assert conv2d_forward(x, w, b).tobytes() == conv2d_forward(x.copy(), w.copy(), b.copy()).tobytes()


# ---------------------------------------------------------------------------
# relu, add, mean


def test_relu_values_and_kink():
    x = np.array([-1.0, 0.0, 2.0]).reshape(1, 1, 1, 3)
    np.testing.assert_array_equal(relu_forward(x).ravel(), [0, 0, 2])
    np.testing.assert_array_equal(relu_backward(x, np.ones_like(x)).ravel(), [0, 0, 1])


def test_relu_all_negative(rng):
    x = Tensor(-rng.uniform(0.1, 1, (1, 2, 3, 3)), requires_grad=True)
    y = relu(x)
    assert not y.data.any()
    y.backward()
    assert not x.grad.any()


def test_relu_finite_differences(rng):
    x = rng.uniform(-1, 1, (1, 2, 3, 3))
    x[np.abs(x) < 0.05] = 0.5
    proj = rng.standard_normal(x.shape)
    g = relu_backward(x, proj)
    assert rel_error(g, numeric_grad(lambda: float((relu_forward(x) * proj).sum()), x)) < 1e-6


def test_add_and_mean_backward(rng):
    a, b = (Tensor(rng.standard_normal((1, 2, 2, 2)), requires_grad=True) for _ in range(2))
    g = rng.standard_normal((1, 2, 2, 2))
    mean([a, b, add(a, b)]).backward(g)
    np.testing.assert_allclose(a.grad, 2 * g / 3)
    np.testing.assert_allclose(b.grad, 2 * g / 3)


def test_add_shape_mismatch():
    with pytest.raises(ConfigurationError):
        add(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 2, 2, 2))))


def test_tensor_rank_enforced():
    with pytest.raises(ConfigurationError):
        Tensor(np.zeros((2, 2)))


def test_repeated_backward_is_identical(rng):
    x = Tensor(rng.standard_normal((1, 2, 4, 4)))
    p = ConvParams(parameter(rng.standard_normal((2, 2, 3, 3))), parameter(np.zeros(2)))
    y = relu(conv2d(x, p))
    g = rng.standard_normal(y.shape)
    y.backward(g)
    first = p.weight.grad.copy()
    p.weight.zero_grad()
    y.backward(g)
    np.testing.assert_array_equal(p.weight.grad, first)


# ---------------------------------------------------------------------------
# concat / split


def test_concat_single_is_identity(rng):
    a = Tensor(rng.standard_normal((1, 3, 2, 2)))
    assert concat_channels([a]) is a


def test_concat_widths(rng):
    parts = [Tensor(rng.standard_normal((2, c, 3, 3))) for c in (4, 8, 4)]
    out = concat_channels(parts)
    assert out.shape == (2, 16, 3, 3)
    np.testing.assert_array_equal(out.data[:, 4:12], parts[1].data)
    for got, want in zip(split_widths(out, [4, 8, 4]), parts):
        np.testing.assert_array_equal(got.data, want.data)


def test_concat_spatial_mismatch():
    with pytest.raises(ConfigurationError):
        concat_channels([Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 2, 3)))])


def test_concat_backward_splits_in_order(rng):
    parts = [Tensor(rng.standard_normal((1, c, 2, 2)), requires_grad=True) for c in (1, 2)]
    g = rng.standard_normal((1, 3, 2, 2))
    concat_channels(parts).backward(g)
    np.testing.assert_array_equal(parts[0].grad, g[:, :1])
    np.testing.assert_array_equal(parts[1].grad, g[:, 1:])


def test_split_paper_width():
    parts = split_channels(Tensor(np.zeros((1, 256, 2, 2))), 4)
    assert [p.channels for p in parts] == [64] * 4


def test_split_q1_and_error():
    x = Tensor(np.zeros((1, 256, 2, 2)))
    assert split_channels(x, 1) == [x]
    with pytest.raises(ConfigurationError, match="C=256.*q=3"):
        split_channels(x, 3)


@settings(max_examples=30, deadline=None)
@given(q=st.integers(1, 6), width=st.integers(1, 4), seed=st.integers(0, 1000))
def test_split_concat_round_trip(q, width, seed):
    x = Tensor(np.random.default_rng(seed).standard_normal((2, q * width, 3, 2)))
    np.testing.assert_array_equal(concat_channels(split_channels(x, q)).data, x.data)


def test_split_backward(rng):
    x = Tensor(rng.standard_normal((1, 4, 2, 2)), requires_grad=True)
    parts = split_channels(x, 2)
    g = rng.standard_normal((1, 2, 2, 2))
    add(parts[1], parts[1]).backward(g)
    np.testing.assert_array_equal(x.grad[:, :2], 0)
    np.testing.assert_array_equal(x.grad[:, 2:], 2 * g)


# ---------------------------------------------------------------------------
# pixel shuffle


def test_pixel_shuffle_convention():
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)
    np.testing.assert_array_equal(pixel_shuffle_forward(x, 2)[0, 0], [[1, 2], [3, 4]])


def test_pixel_shuffle_r4_brute_force_inverse(rng):
    x = rng.standard_normal((1, 16, 2, 2))
    out = pixel_shuffle_forward(x, 4)
    assert out.shape == (1, 1, 8, 8)
    back = np.empty_like(x)
    for c in range(16):
        dy, dx = divmod(c, 4)
        for y in range(2):
            for xx in range(2):
                back[0, c, y, xx] = out[0, 0, 4 * y + dy, 4 * xx + dx]
    np.testing.assert_array_equal(back, x)
    np.testing.assert_array_equal(pixel_unshuffle_forward(out, 4), x)


def test_pixel_shuffle_channel_error():
    with pytest.raises(ConfigurationError):
        pixel_shuffle_forward(np.zeros((1, 6, 2, 2)), 2)


@settings(max_examples=30, deadline=None)
@given(r=st.integers(2, 4), c=st.integers(1, 3), h=st.integers(1, 4), seed=st.integers(0, 1000))
def test_pixel_shuffle_bijection(r, c, h, seed):
    x = np.random.default_rng(seed).standard_normal((1, c * r * r, h, h + 1))
    out = pixel_shuffle_forward(x, r)
    np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(x.ravel()))
    np.testing.assert_array_equal(pixel_unshuffle_forward(out, r), x)


def test_pixel_shuffle_backward(rng):
    x = Tensor(rng.standard_normal((1, 8, 2, 3)), requires_grad=True)
    proj = rng.standard_normal((1, 2, 4, 6))
    pixel_shuffle(x, 2).backward(proj)
    data = x.data
    num = numeric_grad(lambda: float((pixel_shuffle_forward(data, 2) * proj).sum()), data)
    assert rel_error(x.grad, num) < 1e-6


# ---------------------------------------------------------------------------
# l1 loss


def test_l1_values():
    assert l1_loss(np.ones((1, 1, 2, 2)), np.ones((1, 1, 2, 2))) == 0.0
    assert l1_loss(np.full((1, 1, 1, 1), 0.5), np.full((1, 1, 1, 1), 0.2)) == pytest.approx(0.3)


def test_l1_shape_mismatch():
    with pytest.raises(ConfigurationError):
        l1_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))


def test_l1_gradient(rng):
    pred = rng.uniform(-1, 1, (1, 2, 3, 3))
    target = pred + rng.choice([-1, 1], pred.shape) * rng.uniform(0.05, 0.5, pred.shape)
    g = l1_loss_backward(pred, target)
    assert rel_error(g, numeric_grad(lambda: l1_loss(pred, target), pred)) < 1e-6
    assert l1_loss_backward(target, target).sum() == 0.0


# ---------------------------------------------------------------------------
# xavier and adam


def test_xavier_deterministic():
    a = xavier_init((64, 64, 3, 3), np.random.default_rng(7))
    b = xavier_init((64, 64, 3, 3), np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_xavier_bound():
    bound = xavier_bound((64, 64, 3, 3))
    assert bound == pytest.approx(np.sqrt(6 / 1152))
    assert bound == pytest.approx(0.0722, abs=1e-4)
    w = xavier_init((64, 64, 3, 3), np.random.default_rng(0))
    assert np.abs(w).max() <= bound


def test_xavier_mean_statistics():
    shape = (1000, 1000)
    w = xavier_init(shape, np.random.default_rng(3))
    bound = xavier_bound(shape)
    sigma = bound / np.sqrt(3) / np.sqrt(w.size)
    assert abs(w.mean()) < 3 * sigma


def test_adam_zero_gradient_keeps_params():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState(), 1e-4)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_adam_first_step():
    p = {"w": np.zeros(1)}
    state = AdamState()
    adam_step(p, {"w": np.array([2.0])}, state, 1e-4)
    assert state.t == 1
    assert p["w"][0] == pytest.approx(-1e-4, rel=1e-6)


def test_adam_per_tensor_state(rng):
    g1, g2 = rng.standard_normal(3), rng.standard_normal((2, 2))

    def run(order):
        params = {"a": np.ones(3), "b": np.ones((2, 2))}
        state = AdamState()
        for _ in range(3):
            adam_step({k: params[k] for k in order}, {"a": g1, "b": g2}, state, 1e-2)
        return params

    x, y = run("ab"), run("ba")
    np.testing.assert_array_equal(x["a"], y["a"])
    np.testing.assert_array_equal(x["b"], y["b"])


def test_adam_updates_tensor_leaves():
    w = parameter(np.zeros((1, 1, 1, 1)))
    state = AdamState()
    adam_step({"w": w}, {"w": np.ones((1, 1, 1, 1))}, state, 0.1)
    assert w.data[0, 0, 0, 0] == pytest.approx(-0.1, rel=1e-6)
    assert state.m["w"].shape == w.data.shape


# ---------------------------------------------------------------------------
# bicubic


def test_keys_kernel_interpolates():
    np.testing.assert_allclose(keys_kernel([0, 1, 2, -1, 2.5]), [1, 0, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("scale", [2, 3, 4, 0.5])
def test_bicubic_constant(scale):
    x = np.full((6, 12), 0.37)
    out = bicubic_resize(x, scale)
    np.testing.assert_allclose(out, 0.37, atol=1e-12)


@pytest.mark.parametrize("r", [2, 3, 4])
def test_bicubic_upscale_ramp(r):
    n = 16
    ramp = 0.3 * np.arange(n) - 1.0
    out = upscale(np.tile(ramp, (n, 1)), r)[0]
    centres = (np.arange(n * r) + 0.5) / r - 0.5
    interior = (centres >= 2) & (centres <= n - 3)
    np.testing.assert_allclose(out[interior], 0.3 * centres[interior] - 1.0, atol=1e-9)


def test_bicubic_downscale_shape_and_error():
    assert downscale(np.zeros((240, 240)), 3).shape == (80, 80)
    with pytest.raises(ConfigurationError):
        downscale(np.zeros((10, 10)), 3)


def test_resize_matrix_rows_normalised():
    for n_in, n_out in [(8, 16), (12, 4), (9, 27)]:
        np.testing.assert_allclose(resize_matrix(n_in, n_out).sum(axis=1), 1.0, atol=1e-14)
