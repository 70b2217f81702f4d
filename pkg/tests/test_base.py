import math

import numpy as np
import pytest
import torch
from torch import nn

from pgcan.base import (CallableModel, CoordinateModel, count_parameters,
                        derivatives, flatten_parameters, unflatten_parameters)
from pgcan.architectures import build_model
from pgcan.errors import NonFiniteParameterError, UnsupportedOrderError

BOUNDS = ((-1.0, 1.0), (0.0, 1.0))


class LinearModel(CoordinateModel):
    def __init__(self, bounds, dtype=torch.float64):
        super().__init__(bounds, 1, dtype)
        self.layer = nn.Linear(len(bounds), 1, dtype=dtype)

    def evaluate(self, unit_points):
        return self.layer(unit_points)


def product_model():
    return CallableModel(lambda p: p[:, 0] * p[:, 1], BOUNDS)


def sine_model():
    return CallableModel(lambda p: torch.sin(p[:, 0]), BOUNDS)


def test_zero_weight_model_returns_bias():
    model = LinearModel(BOUNDS)
    with torch.no_grad():
        model.layer.weight.zero_()
        model.layer.bias.fill_(0.75)
    pts = torch.tensor([[0.3, 0.4], [-0.9, 0.99]], dtype=torch.float64)
    assert torch.equal(model(pts), torch.full((2, 1), 0.75, dtype=torch.float64))


def test_pgcan_zero_features_and_biases_outputs_zero():
    model = build_model("pgcan", BOUNDS)
    with torch.no_grad():
        for p in model.parameters():
            if p.ndim == 1:  # biases
                p.zero_()
        model.grid.features.zero_()
    pts = torch.rand(7, 2, dtype=torch.float64) * torch.tensor([2.0, 1.0]) - torch.tensor([1.0, 0.0])
    assert torch.all(model(pts) == 0.0)


def test_one_hidden_layer_forward_matches_hand_computation():
    # width-2 tanh network with fixed small weights, evaluated by hand
    model = LinearModel(((0.0, 1.0), (0.0, 1.0)))
    model.hidden = nn.Linear(2, 2, dtype=torch.float64)
    w1 = torch.tensor([[0.1, -0.2], [0.3, 0.4]], dtype=torch.float64)
    b1 = torch.tensor([0.05, -0.1], dtype=torch.float64)
    w2 = torch.tensor([[0.7, -0.6]], dtype=torch.float64)
    b2 = torch.tensor([0.25], dtype=torch.float64)
    with torch.no_grad():
        model.hidden.weight.copy_(w1)
        model.hidden.bias.copy_(b1)
        model.layer.weight.copy_(w2)
        model.layer.bias.copy_(b2)
    model.evaluate = lambda u: model.layer(torch.tanh(model.hidden(u)))

    x, y = 0.3, 0.8
    h1 = math.tanh(0.1 * x - 0.2 * y + 0.05)
    h2 = math.tanh(0.3 * x + 0.4 * y - 0.1)
    expected = 0.7 * h1 - 0.6 * h2 + 0.25
    with torch.no_grad():
        got = float(model(torch.tensor([[x, y]], dtype=torch.float64)))
    assert got == pytest.approx(expected, abs=1e-15)


def test_forward_deterministic():
    model = build_model("m4", BOUNDS)
    pts = torch.rand(20, 2, dtype=torch.float64) * torch.tensor([2.0, 1.0]) - torch.tensor([1.0, 0.0])
    assert torch.equal(model(pts), model(pts))


def test_derivatives_of_product_model():
    bundle = derivatives(product_model(), [[0.3, 0.7], [-0.5, 0.2]], order=2)
    np.testing.assert_allclose(bundle.first[:, 0, 0], [0.7, 0.2], atol=1e-14)
    np.testing.assert_allclose(bundle.first[:, 0, 1], [0.3, -0.5], atol=1e-14)
    np.testing.assert_allclose(bundle.second[:, 0, 0], 0.0, atol=1e-14)
    np.testing.assert_allclose(bundle.second[:, 0, 1], 0.0, atol=1e-14)


def test_derivatives_of_sine_model():
    xs = np.array([[0.2, 0.5], [-0.8, 0.1]])
    bundle = derivatives(sine_model(), xs, order=2)
    np.testing.assert_allclose(bundle.first[:, 0, 0], np.cos(xs[:, 0]), atol=1e-12)
    np.testing.assert_allclose(bundle.second[:, 0, 0], -np.sin(xs[:, 0]), atol=1e-12)


def test_mixed_second_derivatives_on_request():
    bundle = derivatives(product_model(), [[0.3, 0.7]], order=2, mixed=True)
    assert bundle.mixed.shape == (1, 1, 2, 2)
    assert float(bundle.mixed[0, 0, 0, 1]) == pytest.approx(1.0, abs=1e-14)
    assert float(bundle.mixed[0, 0, 1, 0]) == pytest.approx(1.0, abs=1e-14)


def finite_difference_check(model, pts, step=1e-4, rel_tol=1e-4):
    bundle = derivatives(model, pts, order=2)
    pts = torch.as_tensor(pts, dtype=torch.float64)

    def f(shift):
        with torch.no_grad():
            return model(pts + shift)[:, :, None]

    for axis in range(pts.shape[1]):
        e = torch.zeros(pts.shape[1], dtype=torch.float64)
        e[axis] = step
        fd_first = ((f(e) - f(-e)) / (2 * step))[:, :, 0]
        fd_second = ((f(e) - 2 * f(torch.zeros_like(e)) + f(-e)) / step ** 2)[:, :, 0]
        scale1 = fd_first.abs().max().clamp_min(1e-3)
        scale2 = fd_second.abs().max().clamp_min(1e-3)
        err1 = (bundle.first[:, :, axis] - fd_first).abs().max() / scale1
        err2 = (bundle.second[:, :, axis] - fd_second).abs().max() / scale2
        assert float(err1) < rel_tol, f"first derivative axis {axis}: {float(err1)}"
        assert float(err2) < rel_tol, f"second derivative axis {axis}: {float(err2)}"


def test_pgcan_derivatives_match_finite_differences(rng):
    model = build_model("pgcan", BOUNDS)
    pts = rng.uniform([-0.9, 0.05], [0.9, 0.95], (50, 2))
    finite_difference_check(model, pts)


def test_derivative_order_limit():
    with pytest.raises(UnsupportedOrderError):
        derivatives(product_model(), [[0.1, 0.1]], order=3)


def test_flatten_unflatten_round_trip():
    model = build_model("pgcan", BOUNDS)
    flat = flatten_parameters(model)
    assert flat.numel() == count_parameters(model)
    # perturb, restore, compare bitwise
    unflatten_parameters(model, torch.zeros_like(flat))
    assert float(flatten_parameters(model).abs().max()) == 0.0
    unflatten_parameters(model, flat)
    assert torch.equal(flatten_parameters(model), flat)


def test_flatten_ordering_encoder_first():
    model = build_model("pgcan", BOUNDS)
    names = [name for name, _ in model.named_parameters()]
    assert names[0] == "grid.features"
    assert names[1] == "grid.kernels"
    assert all("decoder" in n for n in names[2:])


def test_unflatten_length_mismatch():
    model = build_model("vpinn", BOUNDS)
    with pytest.raises(ValueError, match="entries"):
        unflatten_parameters(model, torch.zeros(3))


def test_non_finite_parameter_detected_with_block_name():
    model = build_model("vpinn", BOUNDS)
    with torch.no_grad():
        model.hidden[2].weight[0, 0] = float("nan")
    with pytest.raises(NonFiniteParameterError, match="hidden.2.weight"):
        model(torch.zeros(1, 2, dtype=torch.float64))


@pytest.mark.parametrize("name,target", [
    ("pgcan", 35_000), ("vpinn", 12_000), ("m4", 7_000), ("pixel", 98_000)])
def test_parameter_counts_near_published_sizes(name, target):
    model = build_model(name, BOUNDS)
    assert abs(count_parameters(model) - target) <= 0.15 * target
