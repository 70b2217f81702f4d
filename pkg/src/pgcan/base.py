"""Differentiable-model abstraction shared by all architectures.

Every model maps physical coordinates to one or more solution channels and
guarantees exact (autodiff) input-derivatives up to second order, which the
PDE residual operators rely on. Inputs are affinely normalized to the unit
box inside ``forward``, so derivatives returned by :func:`derivatives` are
already with respect to the physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import NonFiniteParameterError, UnsupportedOrderError

DTYPES = {"fp32": torch.float32, "fp64": torch.float64}


def as_tensor(points, dtype=torch.float64):
    if isinstance(points, torch.Tensor):
        return points.to(dtype)
    return torch.as_tensor(points, dtype=dtype)


class CoordinateModel(nn.Module):
    """Base class: deterministic map from coordinates to solution values.

    Subclasses implement :meth:`evaluate` on unit-box coordinates. ``bounds``
    holds one ``(low, high)`` pair per input axis (space and, if present,
    time are treated identically).
    """

    def __init__(self, bounds, n_outputs=1, dtype=torch.float64):
        super().__init__()
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        self.n_inputs = len(self.bounds)
        self.n_outputs = n_outputs
        lo = torch.tensor([b[0] for b in self.bounds], dtype=dtype)
        hi = torch.tensor([b[1] for b in self.bounds], dtype=dtype)
        self.register_buffer("_lower", lo)
        self.register_buffer("_span", hi - lo)

    def normalize(self, points):
        return (points - self._lower) / self._span

    def evaluate(self, unit_points):
        raise NotImplementedError

    def check_parameters_finite(self):
        for name, param in self.named_parameters():
            if not torch.isfinite(param).all():
                raise NonFiniteParameterError(name)

    def forward(self, points):
        self.check_parameters_finite()
        out = self.evaluate(self.normalize(points))
        if out.ndim == 1:
            out = out.unsqueeze(-1)
        return out


class CallableModel(CoordinateModel):
    """Wraps a closed-form function of physical coordinates as a model.

    Used to push reference solutions through residual operators; ``fn`` must
    be written with torch ops so that autodiff sees through it.
    """

    def __init__(self, fn, bounds, n_outputs=1, dtype=torch.float64):
        super().__init__(bounds, n_outputs=n_outputs, dtype=dtype)
        self.fn = fn

    def forward(self, points):
        out = self.fn(points)
        if out.ndim == 1:
            out = out.unsqueeze(-1)
        return out


@dataclass
class DerivativeBundle:
    """Model output with its exact input-derivatives at a batch of points.

    ``value``  -- (n, m) outputs
    ``first``  -- (n, m, d) first derivatives per input axis
    ``second`` -- (n, m, d) pure second derivatives, or None for order 1
    ``mixed``  -- (n, m, d, d) full Hessian rows when requested
    """

    value: torch.Tensor
    first: torch.Tensor
    second: torch.Tensor | None = None
    mixed: torch.Tensor | None = None


def model_dtype(model):
    for p in model.parameters():
        return p.dtype
    for b in model.buffers():
        return b.dtype
    return torch.float64


def derivatives(model, points, order=2, mixed=False, create_graph=False):
    """Exact derivatives of ``model`` with respect to its physical inputs.

    ``points`` is (n, d). Raises :class:`UnsupportedOrderError` for order > 2.
    With ``create_graph=True`` the returned tensors stay differentiable.
    """
    if order not in (1, 2):
        raise UnsupportedOrderError(f"order {order} not supported (max 2)")
    pts = as_tensor(points, dtype=model_dtype(model))
    pts = pts.detach().clone().requires_grad_(True)
    value = model(pts)
    d = pts.shape[1]
    keep = order == 2 or create_graph
    maybe_detach = (lambda t: t) if create_graph else (lambda t: t.detach())

    first_cols, second_cols, hessian_cols = [], [], []
    for c in range(value.shape[1]):
        grad_c = torch.autograd.grad(value[:, c].sum(), pts, create_graph=keep)[0]
        first_cols.append(maybe_detach(grad_c))
        if order == 2:
            rows = [torch.autograd.grad(grad_c[:, i].sum(), pts,
                                        create_graph=create_graph,
                                        retain_graph=True)[0]
                    for i in range(d)]
            second_cols.append(torch.stack([maybe_detach(rows[i][:, i]) for i in range(d)], -1))
            if mixed:
                hessian_cols.append(torch.stack([maybe_detach(r) for r in rows], -2))
    first = torch.stack(first_cols, 1)
    second = torch.stack(second_cols, 1) if order == 2 else None
    hessian = torch.stack(hessian_cols, 1) if (order == 2 and mixed) else None
    return DerivativeBundle(maybe_detach(value), first, second, hessian)


def flatten_parameters(model):
    """All trainable parameters as one flat vector, in definition order.

    Ordering is deterministic: encoder features first, then convolution
    kernels, then decoder layers (modules are registered in that order).
    """
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()])


def unflatten_parameters(model, flat):
    """Writes ``flat`` back into the model; inverse of flatten_parameters."""
    flat = as_tensor(flat, dtype=next(model.parameters()).dtype)
    expected = sum(p.numel() for p in model.parameters())
    if flat.numel() != expected:
        raise ValueError(f"parameter vector has {flat.numel()} entries, model has {expected}")
    offset = 0
    with torch.no_grad():
        for p in model.parameters():
            k = p.numel()
            p.copy_(flat[offset:offset + k].view_as(p))
            offset += k


def count_parameters(model):
    return sum(p.numel() for p in model.parameters())
