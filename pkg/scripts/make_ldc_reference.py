"""Generates the small shipped lid-driven-cavity reference lattice.

Steady solve via streamfunction-vorticity pseudo-time iteration on a fine
uniform grid, followed by a pressure Poisson solve gauged at the origin,
then sampled onto the shipped 64x64 lattice. The artifact is a format and
integration fixture, NOT a validated CFD benchmark; headline cavity
acceptance is property-based.

Run:  python3 scripts/make_ldc_reference.py [out.csv]
"""

import math
import sys
from pathlib import Path

import numpy as np

from pgcan.reference import save_reference

LID_AMPLITUDE = 1.0
RHO = 1.0
MU = 0.01
N_SOLVE = 129          # solver nodes per axis
N_OUT = 64             # shipped lattice nodes per axis


def solve_cavity(n=N_SOLVE, steps=40_000, dt=2e-4):
    h = 1.0 / (n - 1)
    x = np.linspace(0.0, 1.0, n)
    psi = np.zeros((n, n))   # [i, j] = (x_i, y_j)
    omega = np.zeros((n, n))
    lid = LID_AMPLITUDE * np.sin(math.pi * x)
    nu = MU / RHO

    for step in range(steps):
        # Poisson solve for psi (SOR sweeps, psi = 0 on all walls)
        for _ in range(60 if step == 0 else 4):
            psi[1:-1, 1:-1] = 0.25 * (psi[2:, 1:-1] + psi[:-2, 1:-1]
                                      + psi[1:-1, 2:] + psi[1:-1, :-2]
                                      + h * h * omega[1:-1, 1:-1])
        # wall vorticity (first-order Thom), lid moves with u = lid(x)
        omega[0, :] = -2.0 * psi[1, :] / h ** 2
        omega[-1, :] = -2.0 * psi[-2, :] / h ** 2
        omega[:, 0] = -2.0 * psi[:, 1] / h ** 2
        omega[:, -1] = -2.0 * psi[:, -2] / h ** 2 - 2.0 * lid / h
        # interior transport: d(omega)/dt = -u omega_x - v omega_y + nu lap(omega)
        u = (psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * h)
        v = -(psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * h)
        omega_x = (omega[2:, 1:-1] - omega[:-2, 1:-1]) / (2 * h)
        omega_y = (omega[1:-1, 2:] - omega[1:-1, :-2]) / (2 * h)
        lap = (omega[2:, 1:-1] + omega[:-2, 1:-1] + omega[1:-1, 2:]
               + omega[1:-1, :-2] - 4 * omega[1:-1, 1:-1]) / h ** 2
        omega[1:-1, 1:-1] += dt * (-u * omega_x - v * omega_y + nu * lap)

    u_full = np.zeros((n, n))
    v_full = np.zeros((n, n))
    u_full[1:-1, 1:-1] = (psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * h)
    v_full[1:-1, 1:-1] = -(psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * h)
    u_full[:, -1] = lid
    return x, u_full, v_full


def solve_pressure(x, u, v, sweeps=60_000):
    n = len(x)
    h = x[1] - x[0]
    u_x = np.gradient(u, h, axis=0)
    u_y = np.gradient(u, h, axis=1)
    v_x = np.gradient(v, h, axis=0)
    v_y = np.gradient(v, h, axis=1)
    rhs = 2.0 * RHO * (u_x * v_y - u_y * v_x)
    p = np.zeros((n, n))
    for _ in range(sweeps):
        p[1:-1, 1:-1] = 0.25 * (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:]
                                + p[1:-1, :-2] - h * h * rhs[1:-1, 1:-1])
        # homogeneous Neumann walls, then pin the gauge at the origin
        p[0, :] = p[1, :]
        p[-1, :] = p[-2, :]
        p[:, 0] = p[:, 1]
        p[:, -1] = p[:, -2]
        p -= p[0, 0]
    return p


def resample(x_src, field, x_dst):
    from pgcan.reference import _BilinearLattice
    lat = _BilinearLattice(x_src, x_src, field[:, :, None])
    mesh = np.meshgrid(x_dst, x_dst, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return lat(pts)[:, 0].reshape(len(x_dst), len(x_dst))


def main(out_path):
    x, u, v = solve_cavity()
    p = solve_pressure(x, u, v)
    x_out = np.linspace(0.0, 1.0, N_OUT)
    channels = {"u": resample(x, u, x_out),
                "v": resample(x, v, x_out),
                "p": resample(x, p, x_out)}
    save_reference(out_path, x_out, x_out, channels)
    div = (np.gradient(u, x[1] - x[0], axis=0) + np.gradient(v, x[1] - x[0], axis=1))
    print(f"wrote {out_path}")
    print(f"max |u| {np.abs(u).max():.4f}  max |v| {np.abs(v).max():.4f}")
    print(f"interior max |div u| {np.abs(div[2:-2, 2:-2]).max():.4f}")
    print(f"lid u(0.5, 1) = {u[len(x)//2, -1]:.4f} (target {LID_AMPLITUDE:.1f})")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else \
        Path(__file__).resolve().parents[1] / "src" / "pgcan" / "data" / "ldc_A1_n64.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    main(out)
