"""Ground-truth solutions: closed forms, quadrature oracles, file loaders.

Every analytic/manufactured evaluator is written with torch ops so it can be
wrapped as a differentiable model and pushed through the residual operators;
``evaluate`` gives the plain numpy interface.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .base import CallableModel
from .errors import ConfigurationError, CorruptReferenceError

MIN_FILE_LATTICE = 16


@dataclass
class ReferenceSolution:
    """Evaluator for the true solution over the closed problem domain.

    ``kind`` is one of analytic / oracle / file. ``torch_fn`` is present for
    analytic and oracle references and enables wrapping as a model.
    """

    kind: str
    provenance: str
    n_outputs: int = 1
    output_names: tuple = ("u",)
    torch_fn: object = None
    numpy_fn: object = None
    lattice_n: int | None = None
    axes: tuple | None = None  # (xs, ys) lattice axes for file references

    def evaluate(self, points):
        points = np.asarray(points, dtype=np.float64)
        if self.numpy_fn is not None:
            return self.numpy_fn(points)
        with torch.no_grad():
            out = self.torch_fn(torch.as_tensor(points, dtype=torch.float64))
        out = out.numpy()
        return out if out.ndim == 2 else out[:, None]

    def as_model(self, bounds):
        if self.torch_fn is None:
            raise ConfigurationError(f"{self.kind} reference has no differentiable form")
        return CallableModel(self.torch_fn, bounds, n_outputs=self.n_outputs)


def convection_exact(beta):
    """Travelling wave sin(x - beta*t): satisfies the advection equation,
    the sine initial profile, and 2*pi periodicity exactly."""

    def fn(pts):
        return torch.sin(pts[:, 0] - beta * pts[:, 1])

    return ReferenceSolution("analytic", f"sin(x - {beta}*t)", torch_fn=fn)


def helmholtz_exact(a2, a1=1.0):
    """Separable sine product vanishing on the boundary of [-1, 1]^2."""

    def fn(pts):
        return torch.sin(a1 * math.pi * pts[:, 0]) * torch.sin(a2 * math.pi * pts[:, 1])

    return ReferenceSolution("analytic", f"sin({a1}*pi*x)*sin({a2}*pi*y)", torch_fn=fn)


def helmholtz_forcing(a2, a1=1.0, wavenumber=1.0):
    """Source term manufactured so helmholtz_exact solves the equation."""
    factor = wavenumber ** 2 - math.pi ** 2 * (a1 ** 2 + a2 ** 2)

    def fn(pts):
        return factor * torch.sin(a1 * math.pi * pts[:, 0]) * torch.sin(a2 * math.pi * pts[:, 1])

    return fn


class _ColeHopfQuadrature:
    """Closed-form viscous Burgers solution as a ratio of integrals,
    evaluated with Gauss-Hermite quadrature.

    Initial profile -sin(pi*x) on [-1, 1] with periodic continuation. The
    integrand exponent is shifted by its maximum before exponentiation so
    small viscosities stay within floating-point range.
    """

    def __init__(self, nu, n_nodes=160):
        nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
        self.nu = nu
        self.n_nodes = n_nodes
        self._nodes = torch.as_tensor(nodes, dtype=torch.float64)
        self._weights = torch.as_tensor(weights, dtype=torch.float64)

    def __call__(self, pts):
        x = pts[:, 0:1]
        t = pts[:, 1:2].clamp_min(0.0)
        y = x - 2.0 * torch.sqrt(self.nu * t) * self._nodes
        log_f = -torch.cos(math.pi * y) / (2.0 * math.pi * self.nu)
        log_f = log_f - log_f.max(dim=1, keepdim=True).values
        scaled = self._weights * torch.exp(log_f)
        return -(scaled * torch.sin(math.pi * y)).sum(1) / scaled.sum(1)


def burgers_cole_hopf(nu, n_nodes=160, check=True):
    """Quadrature oracle for the viscous Burgers benchmark.

    ``check=True`` probes self-consistency by doubling the node count on a
    coarse grid away from the shock layer; a gap above the accuracy target
    raises an oracle-precision warning.
    """
    if nu <= 0:
        raise ConfigurationError("viscosity must be positive")
    oracle = _ColeHopfQuadrature(nu, n_nodes)
    ref = ReferenceSolution("oracle",
                            f"Cole-Hopf Gauss-Hermite quadrature, {n_nodes} nodes",
                            torch_fn=oracle)
    ref.quadrature_gap = lambda pts: _quadrature_gap(oracle, pts)
    if check:
        xs = np.linspace(-0.95, 0.95, 21)
        xs = xs[np.abs(xs) >= 0.05]  # stay out of the shock layer
        ts = np.linspace(0.05, 1.0, 11)
        probe = np.array([(x, t) for x in xs for t in ts])
        gap = _quadrature_gap(oracle, probe)
        target = 1e-6 if nu >= 0.05 else 1e-4
        if gap > target:
            warnings.warn(f"Burgers oracle precision {gap:.2e} above target "
                          f"{target:.0e}; consider more quadrature nodes")
    return ref


def _quadrature_gap(oracle, points):
    finer = _ColeHopfQuadrature(oracle.nu, 2 * oracle.n_nodes)
    pts = torch.as_tensor(np.asarray(points, dtype=np.float64))
    with torch.no_grad():
        return float((oracle(pts) - finer(pts)).abs().max())


def torus_solution():
    """Separable product sin(pi*x*y*z); matches the torus boundary values."""

    def fn(pts):
        return torch.sin(math.pi * pts[:, 0] * pts[:, 1] * pts[:, 2])

    return ReferenceSolution("analytic", "sin(pi*x*y*z)", torch_fn=fn)


def torus_manufactured_forcing():
    """Laplacian of sin(pi*x*y*z); pairing it with torus_solution makes the
    product an exact interior solution for the 3D Poisson problem."""

    def fn(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return (-math.pi ** 2 * ((y * z) ** 2 + (x * z) ** 2 + (x * y) ** 2)
                * torch.sin(math.pi * x * y * z))

    return fn


def poisson_torus_manufactured():
    """Exact solution plus matching forcing for the torus Poisson problem."""
    return torus_solution(), torus_manufactured_forcing()


class _BilinearLattice:
    """Bilinear interpolation over a complete rectangular lattice.

    Exact at lattice nodes; queries clamp to the lattice hull.
    """

    def __init__(self, xs, ys, channels):
        self.xs = xs
        self.ys = ys
        self.channels = channels  # (Nx, Ny, m)

    def __call__(self, points):
        points = np.asarray(points, dtype=np.float64)
        ix = np.clip(np.searchsorted(self.xs, points[:, 0], side="right") - 1,
                     0, len(self.xs) - 2)
        iy = np.clip(np.searchsorted(self.ys, points[:, 1], side="right") - 1,
                     0, len(self.ys) - 2)
        wx = (points[:, 0] - self.xs[ix]) / (self.xs[ix + 1] - self.xs[ix])
        wy = (points[:, 1] - self.ys[iy]) / (self.ys[iy + 1] - self.ys[iy])
        wx = np.clip(wx, 0.0, 1.0)[:, None]
        wy = np.clip(wy, 0.0, 1.0)[:, None]
        c = self.channels
        return ((1 - wx) * (1 - wy) * c[ix, iy]
                + (1 - wx) * wy * c[ix, iy + 1]
                + wx * (1 - wy) * c[ix + 1, iy]
                + wx * wy * c[ix + 1, iy + 1])


def save_reference(path, xs, ys, channels):
    """Writes the lattice CSV format: header x,y,<channels>; one row per node.

    ``channels`` maps channel name to an (Nx, Ny) array.
    """
    names = list(channels)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", *names])
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                writer.writerow([repr(float(x)), repr(float(y)),
                                 *(repr(float(channels[k][i, j])) for k in names)])


def load_reference(path):
    """Reads the lattice CSV format written by :func:`save_reference`.

    Requires a complete lattice (every x-y combination present exactly once)
    of at least 16 nodes per axis; interpolates bilinearly between nodes.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorruptReferenceError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "x" or header[1] != "y":
            raise CorruptReferenceError(f"{path}: expected header x,y,<channels>")
        names = tuple(header[2:])
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CorruptReferenceError(f"{path}: malformed row at line {line_no}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CorruptReferenceError(f"{path}: non-numeric value at line {line_no}") from None
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        raise CorruptReferenceError(f"{path}: no data rows")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if min(len(xs), len(ys)) < MIN_FILE_LATTICE:
        raise CorruptReferenceError(
            f"{path}: lattice {len(xs)}x{len(ys)} below minimum {MIN_FILE_LATTICE}")
    if len(data) != len(xs) * len(ys):
        raise CorruptReferenceError(
            f"{path}: {len(data)} rows do not fill the {len(xs)}x{len(ys)} lattice")
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    expect_x = np.repeat(xs, len(ys))
    expect_y = np.tile(ys, len(xs))
    if not (np.array_equal(data[:, 0], expect_x) and np.array_equal(data[:, 1], expect_y)):
        raise CorruptReferenceError(f"{path}: duplicate or missing lattice points")
    channels = data[:, 2:].reshape(len(xs), len(ys), len(names))
    return ReferenceSolution("file", f"lattice file {path}",
                             n_outputs=len(names), output_names=names,
                             numpy_fn=_BilinearLattice(xs, ys, channels),
                             lattice_n=len(xs), axes=(xs, ys))
