"""Solution-quality analysis: relative-L2 metric, dense error maps,
directional power-spectral-density curves for spectral-bias assessment,
resolution studies, and encoder feature-map export.

Spectra are taken of the signed error field. Directional PSD values are
stored in raw power; write_psd_csv and flatness_score work in log10 units,
matching the usual plotting convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigurationError, UndefinedMetricError


def l2_relative(pred, truth):
    """||pred - truth||_2 / ||truth||_2 over flattened values."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ConfigurationError(f"shape mismatch {pred.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise UndefinedMetricError("reference vector has zero norm")
    return float(np.linalg.norm(pred - truth) / denom)


@dataclass
class ErrorField:
    """Signed error on a uniform evaluation lattice; NaN where masked out."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(xs), len(ys))

    @property
    def n(self):
        return len(self.xs)


def _lattice(bounds, n):
    xs = np.linspace(bounds[0][0], bounds[0][1], n)
    ys = np.linspace(bounds[1][0], bounds[1][1], n)
    mesh = np.meshgrid(xs, ys, indexing="ij")
    return xs, ys, np.stack([m.ravel() for m in mesh], axis=-1)


def _model_values(model, pts):
    dtype = next(model.parameters()).dtype if any(True for _ in model.parameters()) \
        else torch.float64
    with torch.no_grad():
        return model(torch.as_tensor(pts, dtype=dtype)).numpy()


def error_map(model, reference, bounds, n=256, channel=0, magnitude=False):
    """Signed prediction error on an n x n lattice over a 2D domain.

    ``magnitude=True`` compares velocity magnitudes (first two channels),
    the headline quantity for the cavity flow.
    """
    if n < 8:
        raise ConfigurationError("error-map lattice needs n >= 8")
    xs, ys, pts = _lattice(bounds, n)
    pred = _model_values(model, pts)
    truth = reference.evaluate(pts)
    if magnitude:
        err = np.hypot(pred[:, 0], pred[:, 1]) - np.hypot(truth[:, 0], truth[:, 1])
    else:
        err = pred[:, channel] - truth[:, channel]
    return ErrorField(xs, ys, err.reshape(n, n))


def slice_error_map(model, reference, bounds_2d, held_axis, held_value, n=256,
                    mask=None, channel=0):
    """Error on a 2D cross-section of a 3D domain, NaN outside ``mask``."""
    xs, ys, flat = _lattice(bounds_2d, n)
    pts = np.insert(flat, held_axis, held_value, axis=1)
    values = np.full(len(pts), np.nan)
    keep = mask(pts) if mask is not None else np.ones(len(pts), dtype=bool)
    if keep.any():
        pred = _model_values(model, pts[keep])
        truth = reference.evaluate(pts[keep])
        values[keep] = pred[:, channel] - truth[:, channel]
    return ErrorField(xs, ys, values.reshape(n, n))


def power_spectrum(field):
    """Zero-centered 2D DFT power of a square field.

    Returns (power, u, v) where u, v are the integer frequency indices of
    the rows and columns after centering.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2 or field.shape[0] != field.shape[1]:
        raise ConfigurationError(f"expected a square field, got {field.shape}")
    n = field.shape[0]
    transform = np.fft.fftshift(np.fft.fft2(field))
    power = np.abs(transform) ** 2
    freqs = np.fft.fftshift(np.fft.fftfreq(n) * n).astype(int)
    return power, freqs, freqs.copy()


def directional_psd(power, freqs_u, freqs_v, direction="x"):
    """Per-axis binned spectrum: bins [s-0.5, s+0.5) for s = 1..N//2.

    Each bin averages the power over the orthogonal axis (divided by N) and
    over the frequency indices it contains. For even N the Nyquist index
    -N/2 carries frequency N/2 and fills the last bin.
    """
    if direction not in ("x", "y"):
        raise ConfigurationError("direction must be 'x' or 'y'")
    if direction == "y":
        power, freqs_u = power.T, freqs_v
    n = power.shape[0]
    magnitudes = np.abs(freqs_u)
    # rows with positive index s, plus the self-conjugate Nyquist row
    bins = np.arange(1, n // 2 + 1)
    values = np.empty(len(bins))
    for i, s in enumerate(bins):
        members = (freqs_u == s) | ((s == n // 2) & (magnitudes == n // 2))
        values[i] = power[members].sum(axis=1).mean() / n
    return bins, values


def psd_curves(field):
    """Directional PSD of one field along both axes: {'x': (bins, values),
    'y': (bins, values)}."""
    power, fu, fv = power_spectrum(field)
    return {"x": directional_psd(power, fu, fv, "x"),
            "y": directional_psd(power, fu, fv, "y")}


def align_psd_curves(curves):
    """Shifts every curve so all start at the highest first-bin value.

    Removes the overall-power offset between models, leaving only the shape
    of the spectrum; the shift is additive, so shapes are preserved.
    """
    curves = [np.asarray(c, dtype=np.float64) for c in curves]
    if not curves:
        return []
    top = max(c[0] for c in curves)
    return [c + (top - c[0]) for c in curves]


def flatness_score(values):
    """Maximum deviation of log10 power from its own mean; 0 means flat.

    Flat curves indicate no frequency band dominates the error field.
    """
    values = np.asarray(values, dtype=np.float64)
    if (values <= 0).any():
        raise UndefinedMetricError(
            "PSD values must be positive for a flatness score (zero field?)")
    logs = np.log10(values)
    return float(np.abs(logs - logs.mean()).max())


def parseval_gap(field):
    """Relative gap in the DFT energy identity sum(P) = N^2 * sum(field^2)."""
    field = np.asarray(field, dtype=np.float64)
    power, _, _ = power_spectrum(field)
    lhs = power.sum()
    rhs = field.size * (field ** 2).sum()
    scale = max(abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def resolution_study(model, references, magnitude=False):
    """Relative L2 of a fixed model against successively finer references.

    ``references`` is a sequence of (n, ReferenceSolution, bounds); file
    references must match the requested lattice size.
    """
    out = []
    for n, ref, bounds in references:
        if ref.lattice_n is not None and ref.lattice_n != n:
            raise ConfigurationError(
                f"reference lattice {ref.lattice_n} does not match requested {n}")
        _, _, pts = _lattice(bounds, n)
        pred = _model_values(model, pts)
        truth = ref.evaluate(pts)
        if magnitude:
            value = l2_relative(np.hypot(pred[:, 0], pred[:, 1]),
                                np.hypot(truth[:, 0], truth[:, 1]))
        else:
            value = l2_relative(pred[:, 0], truth[:, 0])
        out.append((n, value))
    return out


def export_feature_maps(model, n=256):
    """Channel-averaged encoder features over the model's domain.

    Returns two ErrorField-shaped maps, one per feature half. Only models
    exposing ``encode`` (grid-based encoders) support this.
    """
    if not hasattr(model, "encode"):
        raise ConfigurationError("model has no feature encoder to export")
    xs, ys, pts = _lattice(model.bounds[:2], n)
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        feats = model.encode(torch.as_tensor(pts, dtype=dtype)).numpy()
    half = feats.shape[1] // 2
    first = feats[:, :half].mean(axis=1).reshape(n, n)
    second = feats[:, half:].mean(axis=1).reshape(n, n)
    return ErrorField(xs, ys, first), ErrorField(xs, ys, second)
