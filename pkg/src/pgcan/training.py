"""Composite loss assembly, gradient-balanced loss weights, and the Adam
training loop with periodic resampling, evaluation, and checkpoints.

The loop is a single logical thread: sample (if due), assemble loss terms,
update the dynamic weights (if due), take an optimizer step, then evaluate
and log at the evaluation cadence. Identical (seed, config, problem,
architecture) reproduce identical logs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from .base import DTYPES
from .errors import ConfigurationError, TrainingDivergedError
from .problems import DirichletSpec, PeriodicSpec

DEGENERATE_GRAD = 1e-12


@dataclass
class TrainConfig:
    """Optimization protocol. ``None`` fields resolve per problem or
    architecture: interior count (5k for the cavity flow, 20k otherwise),
    reweight cadence (every epoch for Helmholtz, every 100 otherwise), and
    dynamic weighting (on for pgcan/m4)."""

    epochs: int = 50_000
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 10_000
    resample_every: int = 100
    reweight_every: int | None = None
    ema_alpha: float = 0.1
    eval_every: int = 5_000
    eval_lattice: int = 100
    n_interior: int | None = None
    n_boundary: int = 256
    n_initial: int = 256
    dynamic_weights: bool | None = None
    lambda_bc: float = 1.0
    lambda_ic: float = 1.0
    precision: str = "fp64"
    seed: int = 0
    torch_threads: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        for name in ("resample_every", "eval_every", "lr_decay_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.reweight_every is not None and self.reweight_every < 1:
            raise ConfigurationError("reweight_every must be >= 1")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ConfigurationError("ema_alpha must be in (0, 1]")
        if self.precision not in DTYPES:
            raise ConfigurationError(f"precision must be one of {sorted(DTYPES)}")

    def resolved(self, problem, architecture=None):
        from .architectures import DYNAMIC_WEIGHT_DEFAULT
        out = TrainConfig(**asdict(self))
        if out.n_interior is None:
            out.n_interior = problem.default_interior
        if out.reweight_every is None:
            out.reweight_every = problem.default_reweight_every
        if out.dynamic_weights is None:
            out.dynamic_weights = DYNAMIC_WEIGHT_DEFAULT.get(architecture, False)
        return out


@dataclass
class LossBreakdown:
    """Loss terms of one epoch; total = pde + lambda_bc*bc + lambda_ic*ic."""

    pde: float
    bc: float
    ic: float | None
    lambda_bc: float
    lambda_ic: float | None
    total: float


@dataclass
class SampleBatch:
    interior: torch.Tensor
    dirichlet: list  # (spec, points, targets)
    periodic: list   # (spec, low points, high points)


def make_batch(problem, n_interior, n_boundary, n_initial, rng, dtype):
    interior = torch.as_tensor(problem.sample_interior(n_interior, rng), dtype=dtype)
    dirichlet, periodic = [], []
    for spec in problem.boundary_specs():
        n = n_initial if spec.role == "ic" else n_boundary
        if isinstance(spec, DirichletSpec):
            pts = torch.as_tensor(spec.sample(n, rng), dtype=dtype)
            dirichlet.append((spec, pts, spec.target(pts)))
        elif isinstance(spec, PeriodicSpec):
            lo, hi = spec.sample(n, rng)
            periodic.append((spec, torch.as_tensor(lo, dtype=dtype),
                             torch.as_tensor(hi, dtype=dtype)))
        else:
            raise ConfigurationError(f"unknown boundary spec type {type(spec)!r}")
    return SampleBatch(interior, dirichlet, periodic)


def _axis_derivative(model, pts, axis, channels):
    pts = pts.detach().clone().requires_grad_(True)
    out = model(pts)
    cols = [torch.autograd.grad(out[:, c].sum(), pts, create_graph=True)[0][:, axis]
            for c in channels]
    return torch.stack(cols, dim=-1)


def loss_term_tensors(model, batch, problem):
    """PDE, boundary, and initial loss terms with their autograd graphs.

    Each term is the mean over its points of the squared residual/error
    (summed over constrained channels); multiple specs of one role add up.
    """
    if batch.interior.numel() == 0:
        raise ConfigurationError("interior batch is empty")
    residual = problem.residual(model, batch.interior)
    terms = {"pde": (residual ** 2).sum(-1).mean(), "bc": None, "ic": None}

    def add(role, value):
        terms[role] = value if terms[role] is None else terms[role] + value

    for spec, pts, targets in batch.dirichlet:
        pred = model(pts)[:, list(spec.channels)]
        add(spec.role, ((pred - targets) ** 2).sum(-1).mean())
    for spec, lo, hi in batch.periodic:
        if spec.order == 0:
            gap = model(lo)[:, list(spec.channels)] - model(hi)[:, list(spec.channels)]
        else:
            gap = (_axis_derivative(model, lo, spec.axis, spec.channels)
                   - _axis_derivative(model, hi, spec.axis, spec.channels))
        add(spec.role, (gap ** 2).sum(-1).mean())
    return terms


def compute_loss(model, batch, problem, lambda_bc=1.0, lambda_ic=1.0):
    """Weighted composite loss; problems without a time axis drop the
    initial-condition term."""
    terms = loss_term_tensors(model, batch, problem)
    total = terms["pde"]
    if terms["bc"] is not None:
        total = total + lambda_bc * terms["bc"]
    if terms["ic"] is not None:
        total = total + lambda_ic * terms["ic"]
    return LossBreakdown(
        pde=float(terms["pde"].detach()),
        bc=float(terms["bc"].detach()) if terms["bc"] is not None else 0.0,
        ic=float(terms["ic"].detach()) if terms["ic"] is not None else None,
        lambda_bc=lambda_bc,
        lambda_ic=lambda_ic if terms["ic"] is not None else None,
        total=float(total.detach()),
    )


def dynamic_weights(grad_pde, grad_term, prev, alpha):
    """Gradient-balancing update for one data-loss weight.

    The balanced value is max|grad of the residual loss| over the mean
    |grad of the data loss|, smoothed by an exponential moving average.
    Degenerate data gradients keep the previous weight.
    """
    grad_pde = torch.as_tensor(grad_pde, dtype=torch.float64).reshape(-1)
    grad_term = torch.as_tensor(grad_term, dtype=torch.float64).reshape(-1)
    if grad_pde.numel() != grad_term.numel():
        raise ConfigurationError("gradient vectors must have equal length")
    mean_term = float(grad_term.abs().mean())
    if mean_term < DEGENERATE_GRAD:
        warnings.warn("degenerate data-loss gradient; keeping previous weight")
        return float(prev)
    balanced = float(grad_pde.abs().max()) / mean_term
    return (1.0 - alpha) * float(prev) + alpha * balanced


@dataclass
class TrainState:
    """Everything needed to continue or reproduce a run from this point."""

    epoch: int = 0
    lambda_bc: float = 1.0
    lambda_ic: float = 1.0
    rng: np.random.Generator = None
    optimizer: torch.optim.Optimizer = None
    batch: SampleBatch = None
    log: list = field(default_factory=list)
    last_checkpoint: str | None = None


def init_state(model, config):
    state = TrainState(lambda_bc=config.lambda_bc, lambda_ic=config.lambda_ic)
    state.rng = np.random.default_rng(config.seed)
    state.optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    return state


def learning_rate_at(config, epoch):
    return config.learning_rate * config.lr_decay_factor ** (epoch // config.lr_decay_every)


def _flat_grads(term, params):
    grads = torch.autograd.grad(term, params, retain_graph=True, allow_unused=True)
    return [g if g is not None else torch.zeros_like(p)
            for g, p in zip(grads, params)]


def _grad_absmax(grads):
    return max(float(g.abs().max()) for g in grads)


def _grad_absmean(grads):
    total = sum(float(g.abs().sum()) for g in grads)
    count = sum(g.numel() for g in grads)
    return total / count


def evaluate_l2(model, problem, config):
    """Relative L2 against the problem reference, empty if none exists.

    The cavity flow reports velocity magnitude as the headline value plus
    per-channel errors; other problems report a single value.
    """
    ref = problem.reference()
    if ref is None:
        return {}
    from .evaluation import l2_relative
    if ref.axes is not None:
        xs, ys = ref.axes
        mesh = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        pts = problem.evaluation_points(config.eval_lattice)
    truth = ref.evaluate(pts)
    with torch.no_grad():
        pred = model(torch.as_tensor(pts, dtype=next(model.parameters()).dtype)).numpy()
    if problem.n_outputs == 1:
        return {"l2rel": l2_relative(pred[:, 0], truth[:, 0])}
    speed_pred = np.hypot(pred[:, 0], pred[:, 1])
    speed_true = np.hypot(truth[:, 0], truth[:, 1])
    out = {"l2rel": l2_relative(speed_pred, speed_true)}
    for k, name in enumerate(problem.output_names):
        out[f"l2rel_{name}"] = l2_relative(pred[:, k], truth[:, k])
    return out


def save_checkpoint(path, model, state, run_config=None):
    """Serializes model parameters, optimizer moments, loss weights, epoch
    counter, sampler RNG state, and metric log; written atomically."""
    import os
    payload = {
        "model_state": model.state_dict(),
        "optimizer_state": state.optimizer.state_dict() if state.optimizer else None,
        "lambda_bc": state.lambda_bc,
        "lambda_ic": state.lambda_ic,
        "epoch": state.epoch,
        "rng_state": state.rng.bit_generator.state if state.rng is not None else None,
        "log": state.log,
        "run_config": run_config,
    }
    tmp = f"{path}.tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)
    state.last_checkpoint = str(path)
    return payload


def load_checkpoint(path):
    return torch.load(path, weights_only=False)


def restore_state(payload, model, config):
    """Rebuilds a TrainState (and the model parameters) from a checkpoint."""
    model.load_state_dict(payload["model_state"])
    state = TrainState(epoch=payload["epoch"],
                       lambda_bc=payload["lambda_bc"],
                       lambda_ic=payload["lambda_ic"],
                       log=list(payload["log"]))
    state.rng = np.random.default_rng()
    if payload["rng_state"] is not None:
        state.rng.bit_generator.state = payload["rng_state"]
    state.optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    if payload["optimizer_state"] is not None:
        state.optimizer.load_state_dict(payload["optimizer_state"])
    return state


def train(model, problem, config, state=None, on_eval=None):
    """Runs (or continues) the optimization loop; returns the final state.

    ``on_eval(state, row)`` fires after each logged evaluation, letting the
    run orchestrator append metrics and write checkpoints.
    """
    config = config.resolved(problem, getattr(model, "registry_name", None))
    torch.set_num_threads(config.torch_threads)
    dtype = DTYPES[config.precision]
    model.to(dtype)
    if state is None:
        state = init_state(model, config)
    params = [p for p in model.parameters()]
    use_dynamic = bool(config.dynamic_weights)

    for epoch in range(state.epoch, config.epochs):
        if state.batch is None or epoch % config.resample_every == 0:
            state.batch = make_batch(problem, config.n_interior, config.n_boundary,
                                     config.n_initial, state.rng, dtype)
        lr = learning_rate_at(config, epoch)
        for group in state.optimizer.param_groups:
            group["lr"] = lr

        terms = loss_term_tensors(model, state.batch, problem)
        data_terms = [(role, t) for role, t in (("bc", terms["bc"]), ("ic", terms["ic"]))
                      if t is not None]
        reweight = use_dynamic and epoch % config.reweight_every == 0 and data_terms
        if reweight:
            grads_pde = _flat_grads(terms["pde"], params)
            absmax_pde = _grad_absmax(grads_pde)
            combined = [g.clone() for g in grads_pde]
            for role, term in data_terms:
                grads_term = _flat_grads(term, params)
                prev = state.lambda_bc if role == "bc" else state.lambda_ic
                mean_term = _grad_absmean(grads_term)
                if mean_term < DEGENERATE_GRAD:
                    warnings.warn(f"degenerate {role} gradient at epoch {epoch}; "
                                  "keeping previous weight")
                    lam = prev
                else:
                    lam = (1.0 - config.ema_alpha) * prev \
                        + config.ema_alpha * (absmax_pde / mean_term)
                if role == "bc":
                    state.lambda_bc = lam
                else:
                    state.lambda_ic = lam
                for acc, g in zip(combined, grads_term):
                    acc.add_(g, alpha=lam)

        total = terms["pde"] + sum(
            (state.lambda_bc if role == "bc" else state.lambda_ic) * term
            for role, term in data_terms)
        if not np.isfinite(float(total.detach())):
            raise TrainingDivergedError(epoch, state.last_checkpoint)

        state.optimizer.zero_grad(set_to_none=True)
        if reweight:
            for p, g in zip(params, combined):
                p.grad = g
        else:
            total.backward()
        state.optimizer.step()

        state.epoch = epoch + 1
        if state.epoch % config.eval_every == 0 or state.epoch == config.epochs:
            row = {
                "epoch": state.epoch,
                "loss_pde": float(terms["pde"].detach()),
                "loss_bc": float(terms["bc"].detach()) if terms["bc"] is not None else 0.0,
                "loss_ic": float(terms["ic"].detach()) if terms["ic"] is not None else None,
                "lambda_bc": state.lambda_bc,
                "lambda_ic": state.lambda_ic if terms["ic"] is not None else None,
                "lr": lr,
            }
            row.update(evaluate_l2(model, problem, config))
            state.log.append(row)
            if on_eval is not None:
                on_eval(state, row)
    return state
