import numpy as np
import pytest
import torch

UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))


@pytest.fixture(autouse=True)
def _seeded():
    torch.manual_seed(0)
    np.random.seed(0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def smooth_interior_points(model, n, rng, step, shrink=0.02):
    """Random interior points whose finite-difference stencil stays inside
    one smooth piece of the model.

    Grid encoders are C1 but not C2 across (shifted) cell faces, and their
    derivative contract presumes smoothness at the query point; points whose
    +-step stencil would straddle a face are rejected. Dense models accept
    every draw.
    """
    lo = np.array([b[0] for b in model.bounds])
    hi = np.array([b[1] for b in model.bounds])
    span = hi - lo
    grid = getattr(model, "grid", None)
    margins = None
    if grid is not None:
        cells = np.array(grid.spec.cells, dtype=float)
        offsets = grid.shift_offsets.detach().cpu().numpy()
        margins = 3.0 * step / span * cells  # stencil half-width in index units

    out = []
    while len(out) < n:
        draw = rng.uniform(lo + shrink * span, hi - shrink * span,
                           (4 * n, len(lo)))
        if margins is None:
            out.extend(draw)
            continue
        index = (draw - lo) / span * cells
        ok = np.ones(len(draw), dtype=bool)
        for off in offsets:
            frac = np.modf(index + off)[0]
            ok &= ((frac > margins) & (frac < 1.0 - margins)).all(axis=1)
        out.extend(draw[ok])
    return np.asarray(out[:n])
