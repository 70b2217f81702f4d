"""Independent Crank-Nicolson oracle for the viscous Burgers benchmark.

Full Crank-Nicolson in time with Picard iterations on the advection
coefficient; second-order periodic central differences in space. Used once
to freeze cross-check values for the quadrature oracle tests.

Run:  python3 scripts/burgers_crank_nicolson.py
"""

import math

import numpy as np
import scipy.sparse
import scipy.sparse.linalg


def solve(nu, t_end, m=2048, dt=1.0 / 4096, picard_tol=1e-13, max_picard=50):
    dx = 2.0 / m
    x = -1.0 + dx * np.arange(m)
    u = -np.sin(math.pi * x)

    main = np.full(m, -2.0)
    off = np.ones(m - 1)
    lap = scipy.sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    lap[0, -1] = 1.0
    lap[-1, 0] = 1.0
    lap = (lap / dx ** 2).tocsr()

    grad = scipy.sparse.diags([-off, off], [-1, 1], format="lil")
    grad[0, -1] = -1.0
    grad[-1, 0] = 1.0
    grad = (grad / (2.0 * dx)).tocsr()

    eye = scipy.sparse.identity(m, format="csr")
    steps = round(t_end / dt)
    assert abs(steps * dt - t_end) < 1e-12

    for _ in range(steps):
        rhs_op = nu * (lap @ u) - u * (grad @ u)
        new = u.copy()
        for _ in range(max_picard):
            coeff = scipy.sparse.diags(new) @ grad
            lhs = eye - 0.5 * dt * (nu * lap - coeff)
            candidate = scipy.sparse.linalg.spsolve(lhs.tocsc(), u + 0.5 * dt * rhs_op)
            gap = np.abs(candidate - new).max()
            new = candidate
            if gap < picard_tol:
                break
        u = new
    return x, u


def value_at(x_query, nu, t_end, **kw):
    x, u = solve(nu, t_end, **kw)
    return float(np.interp(x_query, x, u))


if __name__ == "__main__":
    nu = 1.0 / math.pi
    for m, dt in [(1024, 1.0 / 2048), (2048, 1.0 / 4096)]:
        v = value_at(0.5, nu, 0.5, m=m, dt=dt)
        print(f"m={m} dt=1/{round(1/dt)}: u(0.5, 0.5) = {v:.10f}")
