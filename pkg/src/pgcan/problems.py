"""Benchmark PDE systems: residual operators, boundary/initial conditions,
domain geometry, and collocation samplers.

Residuals are written against physical coordinates; models normalize inputs
internally, so autodiff already returns physical derivatives and no manual
chain-rule factor appears here. Samplers draw from a caller-owned numpy
generator, so identical seeds give identical batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigurationError, GeometryError
from . import reference as refs


def _grad(scalar_field, pts):
    # constant fields (no path back to pts) have identically zero derivatives
    if not scalar_field.requires_grad:
        return torch.zeros_like(pts)
    (g,) = torch.autograd.grad(scalar_field.sum(), pts, create_graph=True,
                               allow_unused=True, materialize_grads=True)
    return g


def _needs_grad(pts):
    return pts if pts.requires_grad else pts.detach().clone().requires_grad_(True)


@dataclass
class DirichletSpec:
    """Pointwise value constraint on a boundary set or initial slice."""

    name: str
    sample: object            # (n, rng) -> (n, d) points
    target: object            # torch (n, d) -> (n, len(channels)) values
    role: str = "bc"          # "bc" or "ic"
    channels: tuple = (0,)


@dataclass
class PeriodicSpec:
    """Matching constraint between two parameterized boundary sets.

    ``order`` 0 matches values, 1 matches the derivative along ``axis``.
    """

    name: str
    sample: object            # (n, rng) -> ((n, d) low side, (n, d) high side)
    role: str = "bc"
    channels: tuple = (0,)
    order: int = 0
    axis: int = 0


class PDEProblem:
    """Base class bundling residual operator, conditions, and geometry."""

    name = "problem"
    n_outputs = 1
    output_names = ("u",)
    time_axis = None
    default_interior = 20_000
    default_reweight_every = 100

    def __init__(self):
        self.bounds = ()
        self.params = {}

    @property
    def dims(self):
        return len(self.bounds)

    def residual(self, model, pts):
        raise NotImplementedError

    def boundary_specs(self):
        raise NotImplementedError

    def reference(self):
        return None

    def contains(self, pts):
        pts = np.asarray(pts)
        ok = np.ones(len(pts), dtype=bool)
        for axis, (lo, hi) in enumerate(self.bounds):
            ok &= (pts[:, axis] >= lo) & (pts[:, axis] <= hi)
        return ok

    def sample_interior(self, n, rng):
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return rng.uniform(lo, hi, size=(n, self.dims))

    def evaluation_points(self, n_per_axis=100):
        """Deterministic lattice used for the relative-L2 metric."""
        axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def _box_edge_sampler(self, fixed_axis, fixed_value):
        def sample(n, rng):
            pts = self.sample_interior(n, rng)
            pts[:, fixed_axis] = fixed_value
            return pts
        return sample


class ConvectionProblem(PDEProblem):
    """u_t + beta * u_x = 0 on [0, 2*pi] x [0, T], sine initial profile,
    periodic in x."""

    name = "convection"
    time_axis = 1

    def __init__(self, beta=5.0, horizon=1.0):
        super().__init__()
        self.beta = float(beta)
        self.bounds = ((0.0, 2.0 * math.pi), (0.0, float(horizon)))
        self.params = {"beta": self.beta}

    def residual(self, model, pts):
        pts = _needs_grad(pts)
        u = model(pts)[:, 0]
        du = _grad(u, pts)
        return (du[:, 1] + self.beta * du[:, 0]).unsqueeze(-1)

    def boundary_specs(self):
        two_pi = 2.0 * math.pi

        def sample_initial(n, rng):
            pts = self.sample_interior(n, rng)
            pts[:, 1] = 0.0
            return pts

        def sample_periodic(n, rng):
            t = rng.uniform(0.0, self.bounds[1][1], size=n)
            lo = np.column_stack([np.zeros(n), t])
            hi = np.column_stack([np.full(n, two_pi), t])
            return lo, hi

        return [
            DirichletSpec("initial", sample_initial,
                          lambda p: torch.sin(p[:, 0:1]), role="ic"),
            PeriodicSpec("periodic_value", sample_periodic),
        ]

    def reference(self):
        return refs.convection_exact(self.beta)


class BurgersProblem(PDEProblem):
    """u_t + u*u_x - nu*u_xx = 0 on [-1, 1] x [0, T]; -sin(pi x) initial
    profile; periodic value and derivative conditions in x."""

    name = "burgers"
    time_axis = 1

    def __init__(self, nu=1.0 / math.pi, horizon=1.0):
        super().__init__()
        if nu <= 0:
            raise ConfigurationError("viscosity nu must be positive")
        self.nu = float(nu)
        self.bounds = ((-1.0, 1.0), (0.0, float(horizon)))
        self.params = {"nu": self.nu}

    def residual(self, model, pts):
        pts = _needs_grad(pts)
        u = model(pts)[:, 0]
        du = _grad(u, pts)
        u_xx = _grad(du[:, 0], pts)[:, 0]
        return (du[:, 1] + u * du[:, 0] - self.nu * u_xx).unsqueeze(-1)

    def boundary_specs(self):
        def sample_initial(n, rng):
            pts = self.sample_interior(n, rng)
            pts[:, 1] = 0.0
            return pts

        def sample_periodic(n, rng):
            t = rng.uniform(0.0, self.bounds[1][1], size=n)
            lo = np.column_stack([np.full(n, -1.0), t])
            hi = np.column_stack([np.full(n, 1.0), t])
            return lo, hi

        return [
            DirichletSpec("initial", sample_initial,
                          lambda p: -torch.sin(math.pi * p[:, 0:1]), role="ic"),
            PeriodicSpec("periodic_value", sample_periodic),
            PeriodicSpec("periodic_slope", sample_periodic, order=1, axis=0),
        ]

    def reference(self):
        return refs.burgers_cole_hopf(self.nu, check=False)


class HelmholtzProblem(PDEProblem):
    """laplacian(u) + k^2 u = q on [-1, 1]^2 with zero boundary values.

    The source q is manufactured from the separable sine product, so the
    exact solution is available; a2 controls the y-frequency.
    """

    name = "helmholtz"
    default_reweight_every = 1

    def __init__(self, a2=1.0, a1=1.0, wavenumber=1.0):
        super().__init__()
        self.a1, self.a2 = float(a1), float(a2)
        self.wavenumber = float(wavenumber)
        self.bounds = ((-1.0, 1.0), (-1.0, 1.0))
        self.params = {"a2": self.a2, "a1": self.a1, "wavenumber": self.wavenumber}
        self._forcing = refs.helmholtz_forcing(self.a2, self.a1, self.wavenumber)

    def residual(self, model, pts):
        pts = _needs_grad(pts)
        u = model(pts)[:, 0]
        du = _grad(u, pts)
        u_xx = _grad(du[:, 0], pts)[:, 0]
        u_yy = _grad(du[:, 1], pts)[:, 1]
        lap = u_xx + u_yy
        return (lap + self.wavenumber ** 2 * u - self._forcing(pts)).unsqueeze(-1)

    def boundary_specs(self):
        def sample_edges(n, rng):
            pts = self.sample_interior(n, rng)
            edge = rng.integers(0, 4, size=n)
            pts[edge == 0, 0] = -1.0
            pts[edge == 1, 0] = 1.0
            pts[edge == 2, 1] = -1.0
            pts[edge == 3, 1] = 1.0
            return pts

        return [DirichletSpec("walls", sample_edges,
                              lambda p: torch.zeros(len(p), 1, dtype=p.dtype))]

    def reference(self):
        return refs.helmholtz_exact(self.a2, self.a1)


class LidDrivenCavityProblem(PDEProblem):
    """Steady incompressible Navier-Stokes in the unit box: no-slip walls,
    a sinusoidally driven lid, and a pressure gauge pinned at the origin.

    Outputs are (u, v, p). Fluid constants default to rho=1, mu=0.01; these
    and the reference field are reconstructions, not published values.
    """

    name = "ldc"
    n_outputs = 3
    output_names = ("u", "v", "p")
    default_interior = 5_000

    def __init__(self, lid_amplitude=1.0, rho=1.0, mu=0.01, reference_path=None):
        super().__init__()
        if rho <= 0 or mu <= 0:
            raise ConfigurationError("rho and mu must be positive")
        self.lid_amplitude = float(lid_amplitude)
        self.rho, self.mu = float(rho), float(mu)
        self.reference_path = reference_path
        self.bounds = ((0.0, 1.0), (0.0, 1.0))
        self.params = {"lid_amplitude": self.lid_amplitude, "rho": self.rho, "mu": self.mu}

    def residual(self, model, pts):
        pts = _needs_grad(pts)
        out = model(pts)
        u, v, p = out[:, 0], out[:, 1], out[:, 2]
        du, dv, dp = _grad(u, pts), _grad(v, pts), _grad(p, pts)
        u_lap = _grad(du[:, 0], pts)[:, 0] + _grad(du[:, 1], pts)[:, 1]
        v_lap = _grad(dv[:, 0], pts)[:, 0] + _grad(dv[:, 1], pts)[:, 1]
        mass = du[:, 0] + dv[:, 1]
        mom_x = self.rho * (u * du[:, 0] + v * du[:, 1]) + dp[:, 0] - self.mu * u_lap
        mom_y = self.rho * (u * dv[:, 0] + v * dv[:, 1]) + dp[:, 1] - self.mu * v_lap
        return torch.stack([mass, mom_x, mom_y], dim=-1)

    def boundary_specs(self):
        amp = self.lid_amplitude

        def lid_target(p):
            return torch.stack([amp * torch.sin(math.pi * p[:, 0]),
                                torch.zeros_like(p[:, 0])], dim=-1)

        def sample_walls(n, rng):
            pts = self.sample_interior(n, rng)
            wall = rng.integers(0, 3, size=n)
            pts[wall == 0, 0] = 0.0
            pts[wall == 1, 0] = 1.0
            pts[wall == 2, 1] = 0.0
            return pts

        def sample_gauge(n, rng):
            return np.zeros((1, 2))

        return [
            DirichletSpec("lid", self._box_edge_sampler(1, 1.0), lid_target,
                          channels=(0, 1)),
            DirichletSpec("walls", sample_walls,
                          lambda p: torch.zeros(len(p), 2, dtype=p.dtype),
                          channels=(0, 1)),
            DirichletSpec("pressure_gauge", sample_gauge,
                          lambda p: torch.zeros(len(p), 1, dtype=p.dtype),
                          channels=(2,)),
        ]

    def reference(self):
        if self.reference_path is None:
            return None
        return refs.load_reference(self.reference_path)


TORUS_MAJOR = 1.0
TORUS_MINOR = 0.5


class TorusPoissonProblem(PDEProblem):
    """Poisson equation on a torus-shaped domain embedded in a box grid.

    Default forcing is -exp(x+y+z) with sin(pi*x*y*z) boundary values; with
    ``manufactured=True`` the forcing becomes the Laplacian of sin(pi*x*y*z),
    which turns the boundary function into the exact interior solution.
    """

    name = "poisson3d"
    default_interior = 20_000

    def __init__(self, manufactured=False):
        super().__init__()
        self.manufactured = bool(manufactured)
        self.bounds = ((-1.5, 1.5), (-1.5, 1.5), (-0.5, 0.5))
        self.params = {"manufactured": self.manufactured}
        if self.manufactured:
            self._forcing = refs.torus_manufactured_forcing()
        else:
            self._forcing = lambda p: -torch.exp(p[:, 0] + p[:, 1] + p[:, 2])

    def residual(self, model, pts):
        pts = _needs_grad(pts)
        u = model(pts)[:, 0]
        du = _grad(u, pts)
        lap = sum(_grad(du[:, i], pts)[:, i] for i in range(3))
        return (lap - self._forcing(pts)).unsqueeze(-1)

    def level_set(self, pts):
        """Implicit torus function; non-positive inside the domain."""
        pts = np.asarray(pts, dtype=np.float64)
        ring = 1.0 - np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2)
        return ring ** 2 + pts[:, 2] ** 2 - TORUS_MINOR ** 2

    def contains(self, pts):
        return self.level_set(pts) <= 0.0

    def sample_interior(self, n, rng):
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        collected = []
        total_drawn = 0
        total_kept = 0
        while total_kept < n:
            draw = rng.uniform(lo, hi, size=(max(2 * (n - total_kept), 64), 3))
            keep = draw[self.contains(draw)]
            collected.append(keep)
            total_drawn += len(draw)
            total_kept += len(keep)
            if total_drawn >= 10_000 and total_kept < 0.01 * total_drawn:
                raise GeometryError(
                    f"rejection sampling acceptance {total_kept / total_drawn:.4f} below 1%")
        return np.concatenate(collected)[:n]

    def evaluation_points(self, n_per_axis=100):
        # fixed stream, independent of the training seed, so runs compare
        # against the same interior sample
        rng = np.random.default_rng(7042)
        return self.sample_interior(4096, rng)

    def boundary_specs(self):
        def sample_surface(n, rng):
            theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
            phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
            ring = TORUS_MAJOR + TORUS_MINOR * np.cos(phi)
            return np.column_stack([ring * np.cos(theta),
                                    ring * np.sin(theta),
                                    TORUS_MINOR * np.sin(phi)])

        def target(p):
            return torch.sin(math.pi * p[:, 0] * p[:, 1] * p[:, 2]).unsqueeze(-1)

        return [DirichletSpec("surface", sample_surface, target)]

    def reference(self):
        if self.manufactured:
            return refs.torus_solution()
        return None


PROBLEMS = {
    "burgers": BurgersProblem,
    "convection": ConvectionProblem,
    "helmholtz": HelmholtzProblem,
    "ldc": LidDrivenCavityProblem,
    "poisson3d": TorusPoissonProblem,
}


def build_problem(name, **params):
    if name not in PROBLEMS:
        raise ConfigurationError(
            f"unknown problem '{name}'; available: {sorted(PROBLEMS)}")
    return PROBLEMS[name](**params)
