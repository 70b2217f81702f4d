"""Parametric grid encoder: trainable vertex features, feature-wise
convolution, cosine-warped multilinear interpolation, and diagonally
shifted grid repetitions.

The encoder holds one mother resolution. Each of the ``n_rep`` repetitions
is the same lattice shifted diagonally by a fraction of a cell; repetition
features are interpolated independently and summed. Feature maps can be
convolved (3x3 depthwise kernel per feature, shared across repetitions,
zero padding, tanh) before interpolation; interpolating the raw features
instead reproduces the plain multi-grid encoder.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError, OutOfDomainError

DOMAIN_TOL = 1e-12  # in unit coordinates

FEATURE_INIT_SCALE = 0.1  # vertex features start i.i.d. uniform in +-this


@dataclass(frozen=True)
class GridSpec:
    """Geometry and size of the encoder lattice.

    ``bounds`` is one (low, high) pair per axis; ``vertices_per_axis`` may be
    a single int applied to every axis. ``n_resolutions`` is fixed at one
    mother resolution; multi-resolution stacks are out of scope.
    """

    bounds: tuple = field(default=((0.0, 1.0), (0.0, 1.0)))
    vertices_per_axis: int | tuple = 9
    n_features: int = 128
    n_rep: int = 2
    n_resolutions: int = 1

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ConfigurationError(f"grid supports 2 or 3 axes, got {self.dims}")
        if any(v < 2 for v in self.vertices):
            raise ConfigurationError("need at least 2 vertices per axis")
        if self.n_features % 2 != 0:
            raise ConfigurationError("n_features must be even (features split into two halves)")
        if self.n_rep < 1:
            raise ConfigurationError("n_rep must be >= 1")
        if self.n_resolutions != 1:
            raise ConfigurationError("only a single mother resolution is supported")
        if any(hi <= lo for lo, hi in self.bounds):
            raise ConfigurationError("each axis needs high > low")

    @property
    def dims(self):
        return len(self.bounds)

    @property
    def vertices(self):
        v = self.vertices_per_axis
        return tuple(v) if isinstance(v, (tuple, list)) else (v,) * self.dims

    @property
    def cells(self):
        return tuple(v - 1 for v in self.vertices)


@dataclass
class LocalCoords:
    """Cell assignment of query points within one grid repetition."""

    cell_index: torch.Tensor  # (n, d) long
    local: torch.Tensor       # (n, d) in [0, 1]
    warped: torch.Tensor      # (n, d) in [0, 1]


def cosine_warp(local):
    """Warp local cell coordinates so interpolation is C1 at vertices."""
    return 0.5 * (1.0 - torch.cos(math.pi * local))


def cosine_warp_derivative(local):
    """d(warped)/d(local); vanishes at 0 and 1, which gives the C1 joins."""
    return 0.5 * math.pi * torch.sin(math.pi * local)


class ParametricGrid(nn.Module):
    """Trainable vertex-feature store with interpolation-based encoding.

    Parameters are registered encoder-first: vertex features, then (when
    convolution is enabled) the per-feature kernels. ``encode`` is pure in
    the parameters and the query points, so it can be evaluated concurrently;
    parameter updates must not overlap encoding.
    """

    def __init__(self, spec: GridSpec, convolution=True, dtype=torch.float64):
        super().__init__()
        self.spec = spec
        self.convolution = convolution
        shape = (spec.n_rep, spec.n_features, *spec.vertices)
        init = (torch.rand(shape, dtype=dtype) * 2 - 1) * FEATURE_INIT_SCALE
        self.features = nn.Parameter(init)
        if convolution:
            ksize = (3,) * spec.dims
            fan_in = math.prod(ksize)
            kern = torch.empty(spec.n_features, 1, *ksize, dtype=dtype)
            nn.init.uniform_(kern, -1.0 / math.sqrt(fan_in), 1.0 / math.sqrt(fan_in))
            self.kernels = nn.Parameter(kern)
        lo = torch.tensor([b[0] for b in spec.bounds], dtype=dtype)
        hi = torch.tensor([b[1] for b in spec.bounds], dtype=dtype)
        self.register_buffer("_lower", lo)
        self.register_buffer("_span", hi - lo)
        # repetition p is shifted by p/n_rep of a cell along every axis
        self.register_buffer("shift_offsets",
                             torch.arange(spec.n_rep, dtype=dtype) / spec.n_rep)
        self.register_buffer("_cells",
                             torch.tensor(spec.cells, dtype=dtype))
        self._corner_offsets = list(itertools.product((0, 1), repeat=spec.dims))

    def convolve(self):
        """Per-feature convolution of the vertex features, tanh-activated.

        The kernel is shared across repetitions; zero padding keeps the
        lattice size unchanged.
        """
        if not self.convolution:
            raise ConfigurationError("grid was built without convolution kernels")
        conv = F.conv2d if self.spec.dims == 2 else F.conv3d
        return torch.tanh(conv(self.features, self.kernels, padding=1,
                               groups=self.spec.n_features))

    def _unit(self, points):
        unit = (points - self._lower) / self._span
        off = unit.detach()
        if ((off < -DOMAIN_TOL) | (off > 1.0 + DOMAIN_TOL)).any():
            worst = (off - off.clamp(0.0, 1.0)).abs().max().item()
            raise OutOfDomainError(
                f"query point outside grid bounds by {worst:.3e} (unit coordinates)")
        return unit.clamp(0.0, 1.0)

    def _index_coords(self, unit, rep):
        """Continuous lattice index under repetition ``rep``.

        Shifted repetitions clamp at the domain boundary: the outer partial
        cells are truncated onto the last full cell.
        """
        scaled = unit * self._cells + self.shift_offsets[rep]
        max_cell = (self._cells - 1).to(torch.long)
        cell = scaled.detach().floor().long().clamp(min=torch.zeros_like(max_cell),
                                                    max=max_cell)
        local = (scaled - cell).clamp(0.0, 1.0)
        return cell, local

    def locate(self, points, rep=0):
        """Containing cell plus local and warped coordinates for each point.

        Points exactly on an interior cell face land in the cell whose lower
        face they sit on; the domain maximum clamps to the last cell with
        local coordinate 1.
        """
        cell, local = self._index_coords(self._unit(points), rep)
        return LocalCoords(cell, local, cosine_warp(local))

    def interpolate(self, feature_maps, coords: LocalCoords, rep=0):
        """Multilinear blend of the 2^d corner features of each cell.

        ``feature_maps`` has shape (n_rep, n_features, *vertices); blending
        weights are products of the warped coordinates and sum to one.
        """
        maps_r = feature_maps[rep]
        cell, warped = coords.cell_index, coords.warped
        out = None
        for offsets in self._corner_offsets:
            weight = None
            for axis, bit in enumerate(offsets):
                w = warped[:, axis] if bit else 1.0 - warped[:, axis]
                weight = w if weight is None else weight * w
            idx = tuple(cell[:, axis] + bit for axis, bit in enumerate(offsets))
            corner = maps_r[(slice(None), *idx)]  # (n_features, n)
            term = corner * weight
            out = term if out is None else out + term
        return out.transpose(0, 1)

    def encode(self, points):
        """Feature vector of each query point: per-repetition interpolation
        of the (convolved) feature maps, summed over repetitions."""
        maps = self.convolve() if self.convolution else self.features
        unit = self._unit(points)
        total = None
        for rep in range(self.spec.n_rep):
            cell, local = self._index_coords(unit, rep)
            coords = LocalCoords(cell, local, cosine_warp(local))
            part = self.interpolate(maps, coords, rep)
            total = part if total is None else total + part
        return total

    def split(self, encoded):
        """Halves of the encoded feature vector, first block then remainder."""
        half = self.spec.n_features // 2
        return encoded[:, :half], encoded[:, half:]
