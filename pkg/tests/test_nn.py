import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.autodiff.ops import apply_op
from src.autodiff.tensor import Tensor
from src.config import BlockSpec, Conv1dSpec, RFGroupSpec
from src.errors import CheckpointError, ShapeError
from src.nn import functional as F
from src.nn.blocks import Block, DepthToSpace, SpaceToDepth
from src.nn.layers import BatchNorm, Conv1d, ConvBNAct, RFGroupDepthwise


def _conv(x, W, b=None, stride=1):
    b = np.zeros(W.shape[0]) if b is None else b
    return F.conv1d(Tensor(x), Tensor(W), Tensor(b), stride=stride).data


# ── convolutions ──────────────────────────────────────────────────────────────

def test_conv_sums_three_neighbours_with_zero_padding():
    y = _conv(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1), np.ones((1, 3, 1)))
    assert_array_equal(y.reshape(-1), [3.0, 6.0, 9.0, 7.0])


def test_strided_conv_length_and_values():
    x = np.arange(9, dtype=np.float64).reshape(1, 9, 1)
    y = _conv(x, np.ones((1, 3, 1)), stride=3)
    assert y.shape == (1, 3, 1)
    assert_array_equal(y.reshape(-1), [1.0, 9.0, 18.0])


def test_strided_conv_pads_remainder():
    y = _conv(np.ones((2, 10, 1)), np.ones((1, 3, 1)), stride=3)
    assert y.shape == (2, 4, 1)


def test_pointwise_identity_kernel():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 5, 3)).astype(np.float32)
    W = np.eye(3).reshape(3, 1, 3)
    assert_allclose(_conv(x, W), x, atol=1e-7)


def test_pointwise_conv_is_per_step_affine_map():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 7, 4))
    W = rng.standard_normal((3, 1, 4))
    b = rng.standard_normal(3)
    expected = x @ W[:, 0, :].T + b
    assert_allclose(_conv(x, W, b), expected, rtol=1e-5, atol=1e-5)


def test_even_kernel_is_rejected():
    with pytest.raises(ValueError):
        Conv1dSpec(c_in=1, c_out=1, kernel=4)
    with pytest.raises(ShapeError):
        _conv(np.ones((1, 5, 1)), np.ones((1, 2, 1)))


def test_depthwise_channels_are_independent():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 12, 3))
    W, b = Tensor(rng.standard_normal((3, 5))), Tensor(np.zeros(3))
    base = F.depthwise_conv1d(Tensor(x), W, b).data
    bumped = x.copy()
    bumped[:, :, 0] += 10.0
    moved = F.depthwise_conv1d(Tensor(bumped), W, b).data
    assert_array_equal(moved[..., 1:], base[..., 1:])
    assert not np.allclose(moved[..., 0], base[..., 0])


def test_bias_free_convolution_has_no_bias_parameter():
    spec = Conv1dSpec(c_in=2, c_out=3, kernel=3, bias=False)
    layer = Conv1d(spec, np.random.default_rng(4))
    assert [name for name, _ in layer.named_parameters()] == ["weight"]
    x = np.random.default_rng(5).standard_normal((1, 6, 2))
    assert_array_equal(layer(Tensor(x)).data, _conv(x, layer.weight.value.data))

    biased = Conv1d(spec.model_copy(update={"bias": True}), np.random.default_rng(4))
    assert sorted(name for name, _ in biased.named_parameters()) == ["bias", "weight"]


# ── batch norm ────────────────────────────────────────────────────────────────

def test_batch_norm_normalizes_each_channel():
    rng = np.random.default_rng(4)
    x = 3.0 + 2.0 * rng.standard_normal((4, 50, 3))
    y, (mu, var) = apply_op("batch_norm", Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=1e-5)
    assert_allclose(y.data.mean(axis=(0, 1)), 0.0, atol=1e-5)
    assert_allclose(y.data.var(axis=(0, 1)), 1.0, rtol=1e-4)
    assert_allclose(mu, x.mean(axis=(0, 1)), rtol=1e-5)
    assert_allclose(var, x.var(axis=(0, 1)), rtol=1e-4)


def test_batch_norm_constant_channel_returns_beta():
    x = np.zeros((2, 6, 2))
    x[..., 0] = 5.0
    x[..., 1] = np.arange(12).reshape(2, 6)
    beta = np.array([0.25, 0.0])
    y, _ = apply_op("batch_norm", Tensor(x), Tensor(np.ones(2)), Tensor(beta), eps=1e-5)
    assert_array_equal(y.data[..., 0], 0.25)


def test_batch_norm_running_statistics():
    rng = np.random.default_rng(5)
    bn = BatchNorm(2, momentum=0.1)
    x = rng.standard_normal((3, 10, 2)) + 1.0
    bn(Tensor(x))
    assert_allclose(bn.buffer("running_mean"), 0.1 * x.mean(axis=(0, 1)), rtol=1e-5)
    assert_allclose(bn.buffer("running_var"), 0.9 + 0.1 * x.var(axis=(0, 1)), rtol=1e-5)
    bn.eval()
    y = bn(Tensor(x)).data
    expected = (x - bn.buffer("running_mean")) / np.sqrt(bn.buffer("running_var") + 1e-5)
    assert_allclose(y, expected, rtol=1e-4, atol=1e-5)


def test_batch_norm_needs_two_values_per_channel():
    with pytest.raises(ShapeError):
        apply_op("batch_norm", Tensor(np.ones((1, 1, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)))


# ── activations ───────────────────────────────────────────────────────────────

def test_glu_with_equal_halves_is_swish():
    rng = np.random.default_rng(6)
    h = rng.standard_normal((2, 5, 3)).astype(np.float32)
    glu = F.glu(Tensor(np.concatenate([h, h], axis=-1))).data
    assert_array_equal(glu, F.swish(Tensor(h)).data)


def test_glu_with_zero_gate_halves_input():
    x1 = np.array([[[2.0, -4.0]]])
    y = F.glu(Tensor(np.concatenate([x1, np.zeros_like(x1)], axis=-1))).data
    assert_array_equal(y, 0.5 * x1)


def test_glu_needs_even_channels():
    with pytest.raises(ShapeError):
        F.glu(Tensor(np.ones((1, 2, 3))))


def test_swish_limits():
    y = F.swish(Tensor([0.0, 30.0, -30.0])).data
    assert y[0] == 0.0
    assert_allclose(y[1], 30.0, rtol=1e-6)
    assert abs(y[2]) < 1e-9


def test_glu_init_duplicates_output_halves():
    rng = np.random.default_rng(7)
    W = F.glu_init(rng.standard_normal((6, 3, 2)))
    assert_array_equal(W[3:], W[:3])
    with pytest.raises(ShapeError):
        F.glu_init(np.ones((3, 1, 1)))


def test_glu_layer_at_init_matches_swish_half_layer():
    # ten random inputs; the two layers differ only in the duplicated gate half
    spec = Conv1dSpec(c_in=2, c_out=3, kernel=5)
    glu_layer = ConvBNAct(spec, np.random.default_rng(8), activation="glu")
    swish_layer = ConvBNAct(spec, np.random.default_rng(9), activation="swish")
    W = glu_layer.conv.weight.value.data
    swish_layer.conv.weight.assign(W[:3])
    rng = np.random.default_rng(10)
    for _ in range(10):
        x = Tensor(rng.standard_normal((2, 16, 2)))
        assert_allclose(glu_layer(x).data, swish_layer(x).data, rtol=1e-5, atol=1e-6)


def test_glu_halves_diverge_after_an_asymmetric_step():
    from src.autodiff.ops import project
    from src.autodiff.tape import Tape, backward

    spec = Conv1dSpec(c_in=2, c_out=2, kernel=3)
    layer = ConvBNAct(spec, np.random.default_rng(11), activation="glu")
    rng = np.random.default_rng(12)
    with Tape() as tape:
        loss = project(layer(Tensor(rng.standard_normal((2, 8, 2)))), rng.standard_normal((2, 8, 2)))
    backward(loss, tape)
    grad = layer.conv.weight.grad
    assert not np.allclose(grad[:2], grad[2:])


def test_glu_init_differs_between_seeds():
    spec = Conv1dSpec(c_in=2, c_out=2, kernel=3)
    a = ConvBNAct(spec, np.random.default_rng(0), activation="glu").conv.weight.value.data
    b = ConvBNAct(spec, np.random.default_rng(1), activation="glu").conv.weight.value.data
    assert not np.allclose(a[:2], b[:2])


# ── rearrangements ────────────────────────────────────────────────────────────

def test_cross_shift_example():
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])[None]
    y = F.cross_shift(Tensor(x)).data[0]
    assert_array_equal(y, [[0.0, 4.0], [1.0, 6.0], [3.0, 0.0]])


def test_cross_shift_twice_moves_halves_by_two():
    x = np.arange(1.0, 11.0).reshape(1, 5, 2)
    y = F.cross_shift(F.cross_shift(Tensor(x))).data[0]
    assert_array_equal(y[:, 0], [0.0, 0.0, 1.0, 3.0, 5.0])
    assert_array_equal(y[:, 1], [6.0, 8.0, 10.0, 0.0, 0.0])


def test_cross_shift_preserves_mass_except_dropped_cells():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((2, 6, 4))
    y = F.cross_shift(Tensor(x)).data
    dropped = x[:, -1, :2].sum() + x[:, 0, 2:].sum()
    assert_allclose(y.sum(), x.sum() - dropped, rtol=1e-5, atol=1e-5)


def test_cross_shift_needs_even_channels():
    with pytest.raises(ShapeError):
        F.cross_shift(Tensor(np.ones((1, 3, 3))))


@pytest.mark.parametrize("style", ["heron", "osprey"])
def test_space_to_depth_shapes(style):
    rng = np.random.default_rng(14)
    x = Tensor(rng.standard_normal((2, 10, 4)))
    compress = SpaceToDepth(style, 4, 8, rng)
    h = compress(x)
    assert h.shape == (2, 4, 8)
    restored = DepthToSpace(style, 8, 4, rng)(h, 10)
    assert restored.shape == x.shape


def test_osprey_compression_with_identity_is_mean_pooling():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((2, 11, 3)).astype(np.float32)
    compress = SpaceToDepth("osprey", 3, 3, rng)
    compress.proj.weight.assign(np.eye(3).reshape(3, 1, 3))
    y = compress(Tensor(x)).data
    assert_allclose(y, F.mean_pool(Tensor(x), 3).data, rtol=1e-6, atol=1e-7)
    assert_allclose(y[:, 0], x[:, :3].mean(axis=1), rtol=1e-5, atol=1e-6)


def test_osprey_decompression_needs_channels_divisible_by_four():
    with pytest.raises(ValueError):
        DepthToSpace("osprey", 6, 3, np.random.default_rng(0))


# ── receptive-field groups ────────────────────────────────────────────────────

def test_rf_group_sizes():
    assert RFGroupSpec(channels=24).group_sizes() == [8, 8, 4, 4]
    assert RFGroupSpec(channels=6).group_sizes() == [2, 2, 1, 1]
    assert sum(RFGroupSpec(channels=13).group_sizes()) == 13
    with pytest.raises(ValueError):
        RFGroupSpec(channels=5)


def test_rf_groups_with_averaging_kernels_are_moving_averages():
    rng = np.random.default_rng(16)
    layer = RFGroupDepthwise(RFGroupSpec(channels=6), rng)
    params = dict(layer.named_parameters())
    kernels = {}
    for g, (lo, hi) in enumerate(layer.bounds):
        k = layer.spec.kernels[g]
        params[f"group{g}.weight"].assign(np.full((hi - lo, k), 1.0 / k))
        for c in range(lo, hi):
            kernels[c] = k
    x = rng.standard_normal((1, 40, 6))
    y = layer(Tensor(x)).data[0]
    for c, k in kernels.items():
        expected = np.convolve(x[0, :, c], np.full(k, 1.0 / k), mode="same")
        assert_allclose(y[:, c], expected, rtol=1e-5, atol=1e-6)


# ── blocks and modules ────────────────────────────────────────────────────────

def test_block_with_zeroed_main_branch_reduces_to_skip():
    rng = np.random.default_rng(17)
    spec = BlockSpec(repeats=2, channels=6, kernel=5)
    block = Block(spec, 4, rng)
    params = dict(block.named_parameters())
    params["pw1.weight"].assign(np.zeros(params["pw1.weight"].shape))
    params["pw1.bias"].assign(np.zeros(params["pw1.bias"].shape))
    x = Tensor(rng.standard_normal((2, 9, 4)))
    y = block(x).data

    skip = F.conv1d(x, params["skip.weight"].value, params["skip.bias"].value)
    skip, _ = apply_op("batch_norm", skip, params["skip_bn.gamma"].value, params["skip_bn.beta"].value, eps=1e-5)
    assert_allclose(y, F.swish(skip).data, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("style,activation", [("heron", "glu"), ("osprey", "swish")])
def test_compressed_block_keeps_time_length(style, activation):
    rng = np.random.default_rng(18)
    spec = BlockSpec(repeats=1, channels=8, kernel=5, activation=activation, s2d=style,
                     cross_shift=style == "heron", rf_groups=style == "osprey")
    block = Block(spec, 8, rng)
    y = block(Tensor(rng.standard_normal((2, 14, 8))))
    assert y.shape == (2, 14, 8)


def test_state_dict_round_trip_and_mismatch():
    rng = np.random.default_rng(19)
    block = Block(BlockSpec(repeats=1, channels=4, kernel=3), 4, rng)
    state = {k: np.array(v) for k, v in block.state_dict().items()}
    assert "skip_bn.running_mean" in state
    other = Block(BlockSpec(repeats=1, channels=4, kernel=3), 4, np.random.default_rng(20))
    other.load_state_dict(state)
    for name, value in other.state_dict().items():
        assert_array_equal(value, state[name])

    del state["skip.weight"]
    with pytest.raises(CheckpointError) as info:
        other.load_state_dict(state)
    assert info.value.missing == ["skip.weight"]
