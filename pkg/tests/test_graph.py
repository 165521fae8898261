"""Tests for layer graphs: execution, gradients and summaries."""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import numpy as np
import pytest

from core.errors import DimensionError, ParameterError
from engine.tensor import Tensor
from network.architecture import ArchitectureSpec, build_architecture, preset
from network.summary import CSV_HEADER, summarize, to_csv, to_text, total_params
from training.init import initialize
from training.loss import cross_entropy_loss, one_hot
from tests.helpers import numeric_grad, rel_error

MICRO_ROWS = ["input", "fm 1", "fm 2~4", "mp 1", "fm 5", "fm 6~8", "mp 2", "fm 9", "fm 10~12",
              "dfm 9~7", "dec 1", "add 1", "dfm 6~4", "dec 2", "add 2", "dfm 3~1", "conv"]


def tiny_spec(**overrides):
    """Two encoder sequences, one pool, add skip: small enough for finite differences."""
    fields = dict(base_e=4, num_pools=1, modules_per_encoder_sequence=2,
                  encoder_rate_schedule=((1, 2), (1, 2)), decoder_modules_per_sequence=1)
    fields.update(overrides)
    return ArchitectureSpec(**fields)


def _initialized(spec, seed=0, dtype="float64"):
    graph = build_architecture(spec)
    initialize(graph, np.random.default_rng(seed), dtype)
    return graph


def test_micro_forward_shape_and_normalization():
    """Test MICRO on (1,3,64,64) -> (1,2,64,64) with channel sums 1."""
    graph = _initialized(preset("micro"), dtype="float32")
    x = Tensor(np.random.default_rng(1).uniform(size=(1, 3, 64, 64)).astype(np.float32))
    out = graph.forward(x)
    assert out.shape == (1, 2, 64, 64)
    assert np.max(np.abs(out.data.sum(axis=1) - 1)) < 1e-6
    assert out.is_finite()


@pytest.mark.skipif(os.getenv("MICRONET_SLOW") != "1", reason="set MICRONET_SLOW=1 for full-size inputs")
def test_micro_forward_full_size():
    """Test MICRO on a (1,3,500,500) patch returns a same-size probability map."""
    graph = _initialized(preset("micro"), dtype="float32")
    out = graph.forward(Tensor(np.random.default_rng(2).uniform(size=(1, 3, 500, 500)).astype(np.float32)))
    assert out.shape == (1, 2, 500, 500)
    assert np.max(np.abs(out.data.sum(axis=1) - 1)) < 1e-6


def test_zero_weights_give_uniform_output():
    """Test that an all-zero graph predicts 0.5 for both classes everywhere."""
    graph = build_architecture(tiny_spec())
    graph.zero_params()
    out = graph.forward(Tensor(np.random.default_rng(3).uniform(size=(2, 3, 8, 8))))
    assert np.allclose(out.data, 0.5)


def test_indivisible_input_rejected_before_compute():
    """Test that a height not divisible by 2^num_pools raises before any layer runs."""
    graph = build_architecture(preset("micro"))
    graph.zero_params(np.float32)
    with pytest.raises(DimensionError) as info:
        graph.forward(Tensor(np.zeros((1, 3, 62, 64), dtype=np.float32)))
    assert info.value.axis == "height"
    assert graph.logits is None


def test_wrong_channel_count_rejected():
    """Test that a graph built for 3 channels rejects a 4-channel input."""
    graph = build_architecture(tiny_spec())
    graph.zero_params()
    with pytest.raises(DimensionError):
        graph.forward(Tensor(np.zeros((1, 4, 8, 8))))


def test_uninitialized_graph_refuses_to_run():
    """Test that forward without parameters is a parameter error."""
    with pytest.raises(ParameterError):
        build_architecture(tiny_spec()).forward(Tensor(np.zeros((1, 3, 8, 8))))


def test_set_params_checks_shapes():
    """Test that set_params rejects a wrongly shaped kernel."""
    graph = build_architecture(tiny_spec())
    graph.zero_params()
    params = dict(graph.params)
    params["conv.kernel"] = np.zeros((2, 5, 1, 1))
    with pytest.raises(DimensionError):
        graph.set_params(params)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("skip_mode,upsample", [("add", "deconv"), ("concat", "fire")])
def test_end_to_end_gradients(seed, skip_mode, upsample):
    """Test every kernel gradient of a tiny 8x8 variant against central differences.

    Errors are measured against the largest gradient in the whole network: some kernels
    carry gradients near 1e-8, where finite-difference round-off dominates.
    """
    graph = _initialized(tiny_spec(skip_mode=skip_mode, upsample=upsample), seed)
    rng = np.random.default_rng(100 + seed)
    x = Tensor(rng.uniform(size=(2, 3, 8, 8)))
    labels = one_hot(rng.integers(0, 2, size=(2, 8, 8)), 2)

    def loss():
        return cross_entropy_loss(graph.forward(x), labels)[0]

    _, grad = cross_entropy_loss(graph.forward(x), labels)
    analytic = graph.backward(grad)
    numeric = {name: numeric_grad(loss, value) for name, value in graph.params.items()}
    scale = max(float(np.max(np.abs(g))) for g in analytic.values())
    for name in graph.params:
        assert rel_error(analytic[name], numeric[name], scale) < 1e-4, name


def test_gradient_check_scale_covers_small_kernels():
    """Test that a kernel with a tiny gradient is judged against the network-wide scale."""
    analytic = np.array([2e-8, -1e-8])
    numeric = analytic + 5e-12
    assert rel_error(analytic, numeric) > 1e-4
    assert rel_error(analytic, numeric, scale=1e-2) < 1e-4


def test_backward_returns_every_parameter():
    """Test that backward yields one gradient per kernel with matching shapes."""
    graph = _initialized(tiny_spec())
    probs = graph.forward(Tensor(np.random.default_rng(5).uniform(size=(1, 3, 8, 8))))
    _, grad = cross_entropy_loss(probs, one_hot(np.zeros((1, 8, 8), dtype=int), 2))
    grads = graph.backward(grad)
    assert set(grads) == set(graph.params)
    for name in grads:
        assert grads[name].shape == graph.params[name].shape


# -- summaries ---------------------------------------------------------------------

def test_micro_summary_rows():
    """Test the 17 Micro-Net rows, their map sizes and per-module counts."""
    rows = summarize(build_architecture(preset("micro")))
    assert [r.layer for r in rows] == MICRO_ROWS
    by_name = {r.layer: r for r in rows}
    fm9 = by_name["fm 9"]
    assert (fm9.map, fm9.s1x1, fm9.e1x1, fm9.e3x3, fm9.param) == ("125x125x256", 64, 128, 128, 90112)
    assert by_name["dec 2"].param == 32768
    assert by_name["dec 1"].param == 131072
    assert by_name["add 1"].map == "250x250x128"
    assert by_name["fm 2~4"].count == 3
    assert by_name["conv"].map == "500x500x2"
    assert by_name["input"].param == 0
    assert total_params(rows) == 1_055_920


def test_summary_csv_and_text():
    """Test the CSV header and that the text rendering ends with the total."""
    rows = summarize(build_architecture(preset("bm2")))
    csv_text = to_csv(rows)
    assert csv_text.splitlines()[0] == ",".join(CSV_HEADER)
    assert csv_text.splitlines()[1].startswith("input,500x500x3")
    assert to_text(rows).splitlines()[-1] == "total params: 926,896"
