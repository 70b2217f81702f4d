"""The four comparable model families behind one interface.

* ``pgcan``  -- convolved parametric grid encoder feeding a gated attention
  decoder; the two halves of the encoded feature vector act as the blend
  features.
* ``m4``     -- the gated-attention network applied directly to coordinates.
* ``vpinn``  -- plain fully-connected tanh network.
* ``pixel``  -- raw (non-convolved) multi-grid encoder with a single-layer
  fully-connected decoder.

Defaults reproduce the published layer counts; parameter totals land within
a few percent of 35k / 7k / 12k / 98k for a single-output problem in 2D.
"""

from __future__ import annotations

import torch
from torch import nn

from .base import CoordinateModel
from .errors import ConfigurationError
from .grid import GridSpec, ParametricGrid

ACTIVATIONS = {"tanh": torch.tanh, "sigmoid": torch.sigmoid}


def gated_blend(phi1, phi2, gate):
    """Elementwise attention blend of two feature vectors.

    Algebraically ``phi1 + gate * (phi2 - phi1)``: the gate slides the hidden
    state between the two projections.
    """
    return (1.0 - gate) * phi1 + gate * phi2


class AttentionDecoder(nn.Module):
    """Gated decoder: a hidden chain that repeatedly blends two projections.

    ``h = act(input_layer(x))``, then for each gate layer
    ``z = act(gate(h)); h = (1 - z) * phi1 + z * phi2``, and finally a linear
    output map. ``n_layers`` counts the width-sized weight layers in the
    hidden chain (the input layer plus the gate layers).
    """

    def __init__(self, in_features, width, n_layers, n_outputs,
                 activation="tanh", gate_activation=None, dtype=torch.float64):
        super().__init__()
        if n_layers < 1:
            raise ConfigurationError("decoder needs at least one hidden layer")
        self.act = ACTIVATIONS[activation]
        self.gate_act = ACTIVATIONS[gate_activation or activation]
        self.width = width
        self.input_layer = nn.Linear(in_features, width, dtype=dtype)
        self.gate_layers = nn.ModuleList(
            nn.Linear(width, width, dtype=dtype) for _ in range(n_layers - 1))
        self.output_layer = nn.Linear(width, n_outputs, dtype=dtype)

    def forward(self, phi1, phi2, x):
        if phi1.shape[-1] != self.width or phi2.shape[-1] != self.width:
            raise ConfigurationError(
                f"blend features of width {phi1.shape[-1]}/{phi2.shape[-1]} "
                f"do not match decoder width {self.width}")
        h = self.act(self.input_layer(x))
        for gate in self.gate_layers:
            z = self.gate_act(gate(h))
            h = gated_blend(phi1, phi2, z)
        return self.output_layer(h)


class PgcanModel(CoordinateModel):
    """Parametric grid encoder + attention decoder.

    The encoded feature vector is split into halves that serve as the
    decoder's blend features; the full vector drives the hidden chain. When
    half the feature count differs from the decoder width, one linear+tanh
    adapter per half maps it to the decoder width.
    """

    registry_name = "pgcan"

    def __init__(self, bounds, n_outputs=1, vertices_per_axis=9, n_features=128,
                 n_rep=2, width=64, n_layers=3, activation="tanh",
                 gate_activation=None, dtype=torch.float64):
        super().__init__(bounds, n_outputs, dtype)
        spec = GridSpec(bounds=tuple((0.0, 1.0) for _ in bounds),
                        vertices_per_axis=vertices_per_axis,
                        n_features=n_features, n_rep=n_rep)
        self.grid = ParametricGrid(spec, convolution=True, dtype=dtype)
        half = n_features // 2
        self.act = ACTIVATIONS[activation]
        if half != width:
            self.adapters = nn.ModuleList(
                nn.Linear(half, width, dtype=dtype) for _ in range(2))
        else:
            self.adapters = None
        self.decoder = AttentionDecoder(n_features, width, n_layers, n_outputs,
                                        activation=activation,
                                        gate_activation=gate_activation,
                                        dtype=dtype)

    def encode(self, points):
        """Encoder features at physical coordinates, before the decoder."""
        return self.grid.encode(self.normalize(points))

    def evaluate(self, unit_points):
        feats = self.grid.encode(unit_points)
        phi1, phi2 = self.grid.split(feats)
        if self.adapters is not None:
            phi1 = self.act(self.adapters[0](phi1))
            phi2 = self.act(self.adapters[1](phi2))
        return self.decoder(phi1, phi2, feats)


class M4Model(CoordinateModel):
    """Gated-attention network whose blend features come straight from the
    coordinates through one linear+activation projection each."""

    registry_name = "m4"

    def __init__(self, bounds, n_outputs=1, width=40, n_layers=4,
                 activation="tanh", gate_activation=None, dtype=torch.float64):
        super().__init__(bounds, n_outputs, dtype)
        d = len(bounds)
        self.act = ACTIVATIONS[activation]
        self.proj1 = nn.Linear(d, width, dtype=dtype)
        self.proj2 = nn.Linear(d, width, dtype=dtype)
        # n_layers counts gate layers here; the input layer is extra
        self.decoder = AttentionDecoder(d, width, n_layers + 1, n_outputs,
                                        activation=activation,
                                        gate_activation=gate_activation,
                                        dtype=dtype)

    def evaluate(self, unit_points):
        phi1 = self.act(self.proj1(unit_points))
        phi2 = self.act(self.proj2(unit_points))
        return self.decoder(phi1, phi2, unit_points)


class MlpModel(CoordinateModel):
    """Plain fully-connected feed-forward network (the vanilla baseline)."""

    registry_name = "vpinn"

    def __init__(self, bounds, n_outputs=1, width=40, n_layers=8,
                 activation="tanh", dtype=torch.float64):
        super().__init__(bounds, n_outputs, dtype)
        self.act = ACTIVATIONS[activation]
        dims = [len(bounds)] + [width] * n_layers
        self.hidden = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1], dtype=dtype) for i in range(n_layers))
        self.output_layer = nn.Linear(width, n_outputs, dtype=dtype)

    def evaluate(self, unit_points):
        h = unit_points
        for layer in self.hidden:
            h = self.act(layer(h))
        return self.output_layer(h)


class PixelModel(CoordinateModel):
    """Raw multi-grid encoder (no convolution) + shallow dense decoder."""

    registry_name = "pixel"

    def __init__(self, bounds, n_outputs=1, vertices_per_axis=16, n_features=4,
                 n_rep=96, width=16, activation="tanh", dtype=torch.float64):
        super().__init__(bounds, n_outputs, dtype)
        spec = GridSpec(bounds=tuple((0.0, 1.0) for _ in bounds),
                        vertices_per_axis=vertices_per_axis,
                        n_features=n_features, n_rep=n_rep)
        self.grid = ParametricGrid(spec, convolution=False, dtype=dtype)
        self.act = ACTIVATIONS[activation]
        self.hidden = nn.Linear(n_features, width, dtype=dtype)
        self.output_layer = nn.Linear(width, n_outputs, dtype=dtype)

    def encode(self, points):
        return self.grid.encode(self.normalize(points))

    def evaluate(self, unit_points):
        feats = self.grid.encode(unit_points)
        return self.output_layer(self.act(self.hidden(feats)))


def build_pgcan(bounds, n_outputs=1, dtype=torch.float64, **overrides):
    return PgcanModel(bounds, n_outputs, dtype=dtype, **overrides)


def build_m4(bounds, n_outputs=1, dtype=torch.float64, **overrides):
    return M4Model(bounds, n_outputs, dtype=dtype, **overrides)


def build_vpinn(bounds, n_outputs=1, dtype=torch.float64, **overrides):
    return MlpModel(bounds, n_outputs, dtype=dtype, **overrides)


def build_pixel(bounds, n_outputs=1, dtype=torch.float64, **overrides):
    return PixelModel(bounds, n_outputs, dtype=dtype, **overrides)


ARCHITECTURES = {
    "pgcan": build_pgcan,
    "m4": build_m4,
    "vpinn": build_vpinn,
    "pixel": build_pixel,
}

# architectures that pair with dynamic loss-weight balancing by default
DYNAMIC_WEIGHT_DEFAULT = {"pgcan": True, "m4": True, "vpinn": False, "pixel": False}


def build_model(name, bounds, n_outputs=1, dtype=torch.float64, **overrides):
    if name not in ARCHITECTURES:
        raise ConfigurationError(
            f"unknown architecture '{name}'; available: {sorted(ARCHITECTURES)}")
    return ARCHITECTURES[name](bounds, n_outputs=n_outputs, dtype=dtype, **overrides)
