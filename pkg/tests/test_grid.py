import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pgcan.errors import ConfigurationError, OutOfDomainError
from pgcan.grid import (GridSpec, LocalCoords, ParametricGrid, cosine_warp,
                        cosine_warp_derivative)

UNIT = ((0.0, 1.0), (0.0, 1.0))


def make_grid(vertices=9, n_features=4, n_rep=1, convolution=True, bounds=UNIT):
    spec = GridSpec(bounds=bounds, vertices_per_axis=vertices,
                    n_features=n_features, n_rep=n_rep)
    return ParametricGrid(spec, convolution=convolution)


def pts(*rows):
    return torch.tensor(rows, dtype=torch.float64)


class TestLocate:
    def test_domain_min_is_first_cell(self):
        lc = make_grid().locate(pts((0.0, 0.0)))
        assert lc.cell_index.tolist() == [[0, 0]]
        assert lc.local.tolist() == [[0.0, 0.0]]

    def test_domain_max_clamps_to_last_cell(self):
        lc = make_grid().locate(pts((1.0, 1.0)))
        assert lc.cell_index.tolist() == [[7, 7]]
        assert lc.local.tolist() == [[1.0, 1.0]]

    def test_center_lands_on_cell_face(self):
        # 0.5 * 8 cells = 4.0 exactly: cell (4, 4) with local coordinate 0
        lc = make_grid().locate(pts((0.5, 0.5)))
        assert lc.cell_index.tolist() == [[4, 4]]
        assert lc.local.tolist() == [[0.0, 0.0]]

    def test_point_outside_tolerance_rejected(self):
        with pytest.raises(OutOfDomainError):
            make_grid().locate(pts((1.0 + 1e-9, 0.5)))

    def test_point_within_tolerance_clamped(self):
        lc = make_grid().locate(pts((1.0 + 1e-13, 0.5)))
        assert lc.cell_index.tolist() == [[7, 4]]

    def test_shifted_repetition_offsets_cell(self):
        grid = make_grid(n_rep=2)
        lc0 = grid.locate(pts((0.5, 0.5)), rep=0)
        lc1 = grid.locate(pts((0.5, 0.5)), rep=1)
        assert lc0.cell_index.tolist() == [[4, 4]]
        assert lc1.cell_index.tolist() == [[4, 4]]
        assert lc1.local.tolist() == [[0.5, 0.5]]

    def test_physical_bounds(self):
        grid = make_grid(bounds=((-1.0, 1.0), (0.0, 2.0)))
        lc = grid.locate(pts((0.0, 1.0)))
        assert lc.cell_index.tolist() == [[4, 4]]


class TestCosineWarp:
    def test_fixed_points(self):
        x = torch.tensor([0.0, 0.5, 1.0], dtype=torch.float64)
        np.testing.assert_allclose(cosine_warp(x), [0.0, 0.5, 1.0], atol=1e-15)

    def test_quarter_point_closed_form(self):
        got = float(cosine_warp(torch.tensor(0.25, dtype=torch.float64)))
        assert got == pytest.approx((1 - math.cos(math.pi / 4)) / 2, abs=1e-15)
        assert got == pytest.approx(0.146447, abs=1e-6)

    def test_derivative_vanishes_at_vertices(self):
        d = cosine_warp_derivative(torch.tensor([0.0, 1.0], dtype=torch.float64))
        np.testing.assert_allclose(d, [0.0, 0.0], atol=1e-15)

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_derivative_matches_autograd(self, value):
        x = torch.tensor(value, dtype=torch.float64, requires_grad=True)
        warped = cosine_warp(x)
        (grad,) = torch.autograd.grad(warped, x)
        assert float(grad) == pytest.approx(float(cosine_warp_derivative(x)), abs=1e-12)

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_warp_stays_in_unit_interval(self, value):
        warped = float(cosine_warp(torch.tensor(value, dtype=torch.float64)))
        assert 0.0 <= warped <= 1.0


class TestConvolve:
    def test_center_one_kernel_is_identity_before_tanh(self):
        grid = make_grid(vertices=5, n_features=2)
        with torch.no_grad():
            grid.features.fill_(0.3)
            grid.kernels.zero_()
            grid.kernels[:, 0, 1, 1] = 1.0
        expected = math.tanh(0.3)
        np.testing.assert_allclose(grid.convolve().detach(), expected, atol=1e-15)

    def test_zero_kernel_gives_zero(self):
        grid = make_grid(vertices=5)
        with torch.no_grad():
            grid.kernels.zero_()
        assert torch.all(grid.convolve().detach() == 0.0)

    def test_three_by_three_hand_computed_sums(self):
        grid = make_grid(vertices=3, n_features=2)
        with torch.no_grad():
            grid.features[0, 0] = torch.tensor(
                [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
            grid.kernels.zero_()
            grid.kernels[0, 0] = torch.ones(3, 3)
        maps = grid.convolve().detach()[0, 0]
        assert float(maps[1, 1]) == pytest.approx(math.tanh(45.0), abs=1e-15)
        assert float(maps[0, 0]) == pytest.approx(math.tanh(1 + 2 + 4 + 5), abs=1e-15)
        assert float(maps[0, 2]) == pytest.approx(math.tanh(2 + 3 + 5 + 6), abs=1e-15)
        assert float(maps[2, 2]) == pytest.approx(math.tanh(5 + 6 + 8 + 9), abs=1e-15)


class TestInterpolate:
    def test_vertex_reproduces_feature_exactly(self):
        grid = make_grid(vertices=5, n_features=6)
        maps = grid.features.detach()
        vertex = pts((0.25, 0.75))  # vertex (1, 3) on the 5-vertex lattice
        coords = grid.locate(vertex)
        got = grid.interpolate(maps, coords)
        assert torch.equal(got[0], maps[0, :, 1, 3])

    def test_equal_corners_partition_of_unity(self):
        grid = make_grid(vertices=5, n_features=4)
        with torch.no_grad():
            grid.features.fill_(1.0)
        query = pts((0.13, 0.77), (0.5, 0.2), (0.999, 0.001))
        got = grid.interpolate(grid.features.detach(), grid.locate(query))
        np.testing.assert_allclose(got, 1.0, atol=1e-12)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_partition_of_unity_property(self, x, y):
        grid = make_grid(vertices=4, n_features=2)
        with torch.no_grad():
            grid.features.fill_(1.0)
        got = grid.interpolate(grid.features.detach(), grid.locate(pts((x, y))))
        np.testing.assert_allclose(got, 1.0, atol=1e-12)

    def test_midpoint_averages_four_corners(self):
        grid = make_grid(vertices=2, n_features=2)
        with torch.no_grad():
            grid.features[0, 0] = torch.tensor([[1.0, 2.0], [3.0, 4.0]])
        got = grid.interpolate(grid.features.detach(), grid.locate(pts((0.5, 0.5))))
        assert float(got[0, 0]) == pytest.approx((1 + 2 + 3 + 4) / 4, abs=1e-14)


class TestEncode:
    def test_single_repetition_equals_interpolate_of_convolved(self):
        grid = make_grid(vertices=6, n_features=4, n_rep=1)
        query = pts((0.31, 0.64), (0.0, 1.0))
        direct = grid.interpolate(grid.convolve(), grid.locate(query))
        np.testing.assert_allclose(grid.encode(query).detach(), direct.detach(),
                                   atol=1e-15)

    def test_zero_second_repetition_is_additive_identity(self):
        grid = make_grid(vertices=6, n_features=4, n_rep=2, convolution=False)
        with torch.no_grad():
            grid.features[1].zero_()
        query = pts((0.31, 0.64))
        got = grid.encode(query)
        alone = grid.interpolate(grid.features, grid.locate(query, rep=0), rep=0)
        np.testing.assert_allclose(got.detach(), alone.detach(), atol=1e-15)

    def test_constant_features_hand_computation(self):
        # constant features collapse interpolation; away from the lattice
        # border every vertex sees the full kernel sum
        grid = make_grid(vertices=9, n_features=2, n_rep=2)
        c1, c2, k = 0.05, -0.03, 0.11
        with torch.no_grad():
            grid.features[0].fill_(c1)
            grid.features[1].fill_(c2)
            grid.kernels.fill_(k)
        expected = math.tanh(9 * k * c1) + math.tanh(9 * k * c2)
        got = grid.encode(pts((0.5, 0.5)))
        np.testing.assert_allclose(got.detach(), expected, atol=1e-14)

    def test_out_of_domain_propagates(self):
        with pytest.raises(OutOfDomainError):
            make_grid().encode(pts((1.5, 0.5)))

    def test_c1_continuity_across_interior_cell_boundary(self):
        # second-order one-sided slopes from each side of a cell face
        grid = make_grid(vertices=9, n_features=8, n_rep=2)
        step = 1e-6
        boundary_x = 3.0 / 8.0

        def enc(x, y):
            return grid.encode(pts((x, y))).detach()

        for y in (0.271, 0.654):
            at = enc(boundary_x, y)
            slope_left = (3 * at - 4 * enc(boundary_x - step, y)
                          + enc(boundary_x - 2 * step, y)) / (2 * step)
            slope_right = (-3 * at + 4 * enc(boundary_x + step, y)
                           - enc(boundary_x + 2 * step, y)) / (2 * step)
            scale = torch.maximum(slope_left.abs(), slope_right.abs()).clamp_min(1e-3)
            rel = ((slope_right - slope_left).abs() / scale).max()
            assert float(rel) < 1e-6

    def test_locality_of_vertex_perturbation(self):
        grid = make_grid(vertices=9, n_features=2, n_rep=2)
        far_query = pts((0.95, 0.95))
        before = grid.encode(far_query).detach().clone()
        with torch.no_grad():
            grid.features[0, :, 0, 0] += 10.0  # far-corner vertex
        after = grid.encode(far_query).detach()
        assert torch.equal(before, after)

    def test_perturbation_is_visible_nearby(self):
        grid = make_grid(vertices=9, n_features=2, n_rep=1)
        near_query = pts((0.05, 0.05))
        before = grid.encode(near_query).detach().clone()
        with torch.no_grad():
            grid.features[0, :, 0, 0] += 10.0
        after = grid.encode(near_query).detach()
        assert not torch.equal(before, after)

    def test_query_gradient_matches_finite_differences(self):
        grid = make_grid(vertices=9, n_features=4, n_rep=2)
        q = pts((0.41, 0.59)).requires_grad_(True)
        out = grid.encode(q).sum()
        (grad,) = torch.autograd.grad(out, q)
        step = 1e-6
        for axis in range(2):
            e = torch.zeros(1, 2, dtype=torch.float64)
            e[0, axis] = step
            with torch.no_grad():
                fd = (grid.encode(q.detach() + e).sum()
                      - grid.encode(q.detach() - e).sum()) / (2 * step)
            assert float(grad[0, axis]) == pytest.approx(float(fd), rel=1e-4)

    def test_split_halves(self):
        grid = make_grid(n_features=6)
        encoded = grid.encode(pts((0.2, 0.3)))
        first, second = grid.split(encoded)
        assert first.shape[1] == 3 and second.shape[1] == 3
        assert torch.equal(torch.cat([first, second], dim=1), encoded)


class TestThreeDimensional:
    def test_encode_and_gradient(self):
        spec = GridSpec(bounds=((0.0, 1.0),) * 3, vertices_per_axis=4,
                        n_features=4, n_rep=2)
        grid = ParametricGrid(spec)
        q = torch.tensor([[0.3, 0.6, 0.2]], dtype=torch.float64, requires_grad=True)
        out = grid.encode(q)
        assert out.shape == (1, 4)
        (grad,) = torch.autograd.grad(out.sum(), q)
        assert torch.isfinite(grad).all()

    def test_vertex_reproduction_without_convolution(self):
        spec = GridSpec(bounds=((0.0, 1.0),) * 3, vertices_per_axis=3,
                        n_features=2, n_rep=1)
        grid = ParametricGrid(spec, convolution=False)
        got = grid.encode(torch.tensor([[0.5, 0.0, 1.0]], dtype=torch.float64))
        assert torch.equal(got[0], grid.features.detach()[0, :, 1, 0, 2])


class TestSpecValidation:
    def test_odd_feature_count_rejected(self):
        with pytest.raises(ConfigurationError, match="even"):
            GridSpec(bounds=UNIT, n_features=5)

    def test_multi_resolution_rejected(self):
        with pytest.raises(ConfigurationError, match="resolution"):
            GridSpec(bounds=UNIT, n_resolutions=2)

    def test_too_few_vertices_rejected(self):
        with pytest.raises(ConfigurationError, match="vertices"):
            GridSpec(bounds=UNIT, vertices_per_axis=1)

    def test_convolve_without_kernels_rejected(self):
        grid = make_grid(convolution=False)
        with pytest.raises(ConfigurationError, match="convolution"):
            grid.convolve()
