import numpy as np
import pytest
import torch

from conftest import smooth_interior_points
from hypothesis import given, settings
from hypothesis import strategies as st

from pgcan.architectures import (ARCHITECTURES, AttentionDecoder, M4Model,
                                 PgcanModel, PixelModel, build_model,
                                 gated_blend)
from pgcan.base import count_parameters, derivatives
from pgcan.errors import ConfigurationError

BOUNDS = ((0.0, 1.0), (0.0, 1.0))


class TestGatedBlend:
    def test_gate_closed_selects_first(self):
        phi1 = torch.tensor([1.0, 2.0])
        phi2 = torch.tensor([-3.0, 4.0])
        assert torch.equal(gated_blend(phi1, phi2, torch.zeros(2)), phi1)

    def test_gate_open_selects_second(self):
        phi1 = torch.tensor([1.0, 2.0])
        phi2 = torch.tensor([-3.0, 4.0])
        assert torch.equal(gated_blend(phi1, phi2, torch.ones(2)), phi2)

    @given(st.floats(-1.0, 1.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_algebraic_identity(self, z, a, b):
        phi1 = torch.tensor([a], dtype=torch.float64)
        phi2 = torch.tensor([b], dtype=torch.float64)
        gate = torch.tensor([z], dtype=torch.float64)
        lhs = gated_blend(phi1, phi2, gate)
        rhs = phi1 + gate * (phi2 - phi1)
        assert float((lhs - rhs).abs()) < 1e-15


class TestAttentionDecoder:
    def test_zero_gate_parameters_pass_first_projection(self):
        dec = AttentionDecoder(2, 4, n_layers=3, n_outputs=1)
        with torch.no_grad():
            for layer in dec.gate_layers:
                layer.weight.zero_()
                layer.bias.zero_()
        phi1 = torch.rand(5, 4, dtype=torch.float64)
        phi2 = torch.rand(5, 4, dtype=torch.float64)
        x = torch.rand(5, 2, dtype=torch.float64)
        expected = dec.output_layer(phi1)
        assert torch.allclose(dec(phi1, phi2, x), expected, atol=1e-15)

    def test_hand_computed_tiny_chain(self):
        # width 2, one gate layer, every weight pinned; chain expanded by hand
        dec = AttentionDecoder(2, 2, n_layers=2, n_outputs=1)
        with torch.no_grad():
            def pin(t, values):
                t.copy_(torch.tensor(values, dtype=torch.float64))
            pin(dec.input_layer.weight, [[0.1, 0.2], [-0.3, 0.4]])
            pin(dec.input_layer.bias, [0.05, -0.05])
            pin(dec.gate_layers[0].weight, [[0.5, -0.1], [0.2, 0.3]])
            pin(dec.gate_layers[0].bias, [0.0, 0.1])
            pin(dec.output_layer.weight, [[1.5, -2.0]])
            pin(dec.output_layer.bias, [0.25])
        phi1 = torch.tensor([[0.6, -0.2]], dtype=torch.float64)
        phi2 = torch.tensor([[-0.4, 0.8]], dtype=torch.float64)
        x = torch.tensor([[0.3, 0.7]], dtype=torch.float64)

        h = np.tanh([0.1 * 0.3 + 0.2 * 0.7 + 0.05, -0.3 * 0.3 + 0.4 * 0.7 - 0.05])
        z = np.tanh([0.5 * h[0] - 0.1 * h[1], 0.2 * h[0] + 0.3 * h[1] + 0.1])
        blended = (1 - z) * np.array([0.6, -0.2]) + z * np.array([-0.4, 0.8])
        expected = 1.5 * blended[0] - 2.0 * blended[1] + 0.25
        with torch.no_grad():
            got = float(dec(phi1, phi2, x))
        assert got == pytest.approx(expected, abs=1e-12)

    def test_width_mismatch_rejected(self):
        dec = AttentionDecoder(2, 4, n_layers=2, n_outputs=1)
        with pytest.raises(ConfigurationError, match="width"):
            dec(torch.zeros(1, 3, dtype=torch.float64),
                torch.zeros(1, 3, dtype=torch.float64),
                torch.zeros(1, 2, dtype=torch.float64))

    def test_needs_at_least_one_layer(self):
        with pytest.raises(ConfigurationError):
            AttentionDecoder(2, 4, n_layers=0, n_outputs=1)


class TestBuilders:
    @pytest.mark.parametrize("name,target", [
        ("pgcan", 35_000), ("vpinn", 12_000), ("m4", 7_000), ("pixel", 98_000)])
    def test_default_parameter_counts(self, name, target):
        count = count_parameters(build_model(name, BOUNDS))
        assert abs(count - target) <= 0.15 * target, count

    def test_multi_output_shares_trunk(self):
        single = count_parameters(build_model("pgcan", BOUNDS, n_outputs=1))
        triple = count_parameters(build_model("pgcan", BOUNDS, n_outputs=3))
        # only the output layer widens: 2 extra rows of (width + 1)
        assert triple - single == 2 * (64 + 1)

    def test_unknown_architecture_lists_registry(self):
        with pytest.raises(ConfigurationError, match="pixel"):
            build_model("resnet", BOUNDS)

    def test_odd_feature_count_rejected(self):
        with pytest.raises(ConfigurationError, match="even"):
            build_model("pgcan", BOUNDS, n_features=13)

    @pytest.mark.parametrize("name", sorted(ARCHITECTURES))
    def test_derivative_contract(self, name, rng):
        model = build_model(name, BOUNDS)
        pts = smooth_interior_points(model, 20, rng, step=1e-4)
        bundle = derivatives(model, pts, order=2)
        step = 1e-4
        tpts = torch.as_tensor(pts, dtype=torch.float64)
        for axis in range(2):
            e = torch.zeros(2, dtype=torch.float64)
            e[axis] = step
            with torch.no_grad():
                fd1 = (model(tpts + e) - model(tpts - e)) / (2 * step)
                fd2 = (model(tpts + e) - 2 * model(tpts) + model(tpts - e)) / step ** 2
            scale1 = fd1.abs().max().clamp_min(1e-3)
            scale2 = fd2.abs().max().clamp_min(1e-3)
            assert float((bundle.first[:, :, axis] - fd1).abs().max() / scale1) < 1e-4
            assert float((bundle.second[:, :, axis] - fd2).abs().max() / scale2) < 1e-4


class TestPgcanModel:
    def test_adapters_only_when_widths_differ(self):
        assert build_model("pgcan", BOUNDS).adapters is None
        with_adapters = build_model("pgcan", BOUNDS, n_features=32)
        assert with_adapters.adapters is not None and len(with_adapters.adapters) == 2

    def test_adapter_variant_forward_and_derivatives(self, rng):
        model = build_model("pgcan", BOUNDS, n_features=32, width=16, n_layers=2)
        pts = rng.uniform(0.05, 0.95, (10, 2))
        bundle = derivatives(model, pts, order=2)
        assert torch.isfinite(bundle.second).all()

    def test_output_gradient_is_local_in_vertex_features(self):
        model = build_model("pgcan", BOUNDS)
        query = torch.tensor([[0.95, 0.95]], dtype=torch.float64)
        out = model(query).sum()
        (grad,) = torch.autograd.grad(out, model.grid.features)
        # far corner vertex is beyond the query's cells and its convolution halo
        assert torch.all(grad[:, :, 0, 0] == 0.0)
        assert float(grad.abs().sum()) > 0.0


class TestM4Model:
    def test_gate_closed_reduces_to_first_projection(self):
        model = M4Model(BOUNDS, width=8, n_layers=2)
        with torch.no_grad():
            for layer in model.decoder.gate_layers:
                layer.weight.zero_()
                layer.bias.zero_()
        pts = torch.rand(4, 2, dtype=torch.float64)
        unit = model.normalize(pts)
        phi1 = torch.tanh(model.proj1(unit))
        expected = model.decoder.output_layer(phi1)
        assert torch.allclose(model(pts), expected, atol=1e-15)

    def test_tiny_width_hand_computation(self):
        model = M4Model(((0.0, 1.0),), width=1, n_layers=1, n_outputs=1)
        with torch.no_grad():
            for layer in (model.proj1, model.proj2, model.decoder.input_layer,
                          model.decoder.gate_layers[0], model.decoder.output_layer):
                layer.weight.fill_(0.5)
                layer.bias.fill_(0.1)
        x = 0.4
        phi1 = phi2 = np.tanh(0.5 * x + 0.1)
        h1 = np.tanh(0.5 * x + 0.1)
        z1 = np.tanh(0.5 * h1 + 0.1)
        h2 = (1 - z1) * phi1 + z1 * phi2
        expected = 0.5 * h2 + 0.1
        with torch.no_grad():
            got = float(model(torch.tensor([[x]], dtype=torch.float64)))
        assert got == pytest.approx(expected, abs=1e-12)


class TestPixelModel:
    def test_single_repetition_is_plain_interpolation_plus_mlp(self):
        model = PixelModel(BOUNDS, n_rep=1, vertices_per_axis=4, n_features=2)
        pts = torch.rand(6, 2, dtype=torch.float64)
        feats = model.grid.interpolate(model.grid.features,
                                       model.grid.locate(model.normalize(pts)))
        expected = model.output_layer(torch.tanh(model.hidden(feats)))
        assert torch.allclose(model(pts), expected, atol=1e-15)

    def test_vertex_value_reproduction(self):
        model = PixelModel(BOUNDS, n_rep=1, vertices_per_axis=5, n_features=2)
        vertex = torch.tensor([[0.25, 0.75]], dtype=torch.float64)
        feats = model.grid.features.detach()[0, :, 1, 3].unsqueeze(0)
        expected = model.output_layer(torch.tanh(model.hidden(feats)))
        assert torch.allclose(model(vertex), expected, atol=1e-15)

    def test_no_convolution_kernels(self):
        model = build_model("pixel", BOUNDS)
        assert not hasattr(model.grid, "kernels")
