"""Coarse disparity initialization, iterative refinement and convex
upsampling to full resolution.

The handcrafted update rule fits a parabola to the correlation at
disparities d-1, d, d+1 and takes a damped Newton step toward the peak
(falling back to a small gradient step where the curvature is not
concave); a flat volume yields a zero step. The loadable-weights backend
substitutes a small convolutional GRU whose tensors come from a weights
bundle. Every iterate is clamped to the valid disparity range and
recorded in the trace.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, WeightLoadError
from .cost_volume import CostVolume, lookup_cost
from .weights_io import WeightsBundle, conv2d

UPDATE_DAMPING = 0.7
MAX_STEP = 1.0
CONFIDENCE_WINDOW = 2


@dataclass
class DisparityField:
    """Disparities in pixels (left-reference: match at column u - d)."""

    values: np.ndarray
    validity: np.ndarray
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.validity = np.asarray(self.validity, dtype=bool)
        if self.values.shape != self.validity.shape:
            raise InvalidInputError("disparity values and validity shapes differ")


def init_from_volume(volume: CostVolume, softmax_temperature: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
    """Argmax disparity with parabolic sub-pixel fit, plus confidence.

    Only k <= j is a geometrically valid match column (disparity >= 0).
    Confidence is the softmax mass within +/-2 taps of the per-pixel peak,
    which collapses toward 1/W for flat (textureless) cost rows. The
    temperature suits L2-normalized features whose correlations live in
    [-1, 1].
    """
    data = volume.data
    h, w, k = data.shape
    cols = np.arange(w)[:, None]
    ks = np.arange(k)[None, :]
    invalid = ks > cols  # negative disparity
    masked = np.where(invalid[None, :, :], -np.inf, data)

    kmax = np.argmax(masked, axis=2)
    c0 = np.take_along_axis(data, kmax[:, :, None], axis=2)[:, :, 0]
    km = np.maximum(kmax - 1, 0)
    kp = np.minimum(kmax + 1, k - 1)
    cm = np.take_along_axis(data, km[:, :, None], axis=2)[:, :, 0]
    cp = np.take_along_axis(data, kp[:, :, None], axis=2)[:, :, 0]
    denom = cm - 2.0 * c0 + cp
    interior = (kmax > 0) & (kmax < np.minimum(cols.T, k - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(
            interior & (denom < -1e-12), 0.5 * (cm - cp) / denom, 0.0
        )
    delta = np.clip(delta, -0.5, 0.5)
    disparity = np.arange(w)[None, :] - (kmax + delta)
    disparity = np.clip(disparity, 0.0, w - 1.0)

    # softmax peak mass within the confidence window, chance-corrected so a
    # flat (textureless) row scores 0 at any volume width
    stable = (masked - np.max(masked, axis=2, keepdims=True)) * softmax_temperature
    expv = np.exp(stable, where=np.isfinite(stable), out=np.zeros_like(stable))
    expv_sum = expv.sum(axis=2)
    near = np.abs(ks[None, :, :] - kmax[:, :, None]) <= CONFIDENCE_WINDOW
    peak_mass = (expv * near).sum(axis=2)
    mass = np.divide(peak_mass, expv_sum, out=np.zeros_like(peak_mass), where=expv_sum > 0)
    n_valid = np.minimum(np.arange(w), k - 1) + 1.0
    window = np.minimum(2.0 * CONFIDENCE_WINDOW + 1.0, n_valid)
    chance = (window / n_valid)[None, :]
    confidence = np.clip(
        np.divide(mass - chance, 1.0 - chance, out=np.zeros_like(mass), where=chance < 1.0),
        0.0,
        1.0,
    )
    return disparity, confidence


def _handcrafted_step(volume: CostVolume, disparity: np.ndarray) -> np.ndarray:
    """Step toward the vertex of the parabola through the three integer
    cost taps bracketing the current estimate.

    Taps snap to integer match columns: interpolated taps would make the
    curvature estimate piecewise-linear garbage. Where the bracket is not
    concave (flat or ridge-free cost) the step is zero.
    """
    data = volume.data
    h, w, k = data.shape
    cols = np.arange(w)[None, :]
    kc = np.clip(np.rint(cols - disparity).astype(np.int64), 1, k - 2)
    ii = np.arange(h)[:, None]
    cm = data[ii, cols, kc - 1]
    c0 = data[ii, cols, kc]
    cp = data[ii, cols, kc + 1]
    denom = cm - 2.0 * c0 + cp
    concave = denom < -1e-12
    delta = np.where(concave, 0.5 * (cm - cp) / np.where(concave, denom, -1.0), 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    target = cols - (kc + delta)
    return np.clip(np.where(concave, target - disparity, 0.0), -MAX_STEP, MAX_STEP)


class MaskUpsampler:
    """Convex-upsampling mask predictor executed from loaded weights.

    A small conv stack maps the context features to 9 * factor^2 logits
    per coarse cell; a softmax over the 9 neighbors makes every fine
    pixel's combination convex regardless of the weights.
    """

    def __init__(self, bundle: WeightsBundle, factor: int):
        self.bundle = bundle
        self.factor = factor
        w2 = bundle.tensor("mask.conv2.weight")
        expect = 9 * factor * factor
        if w2.shape[0] != expect:
            raise WeightLoadError(
                f"mask head emits {w2.shape[0]} channels, needs {expect} for factor {factor}"
            )

    def __call__(self, context: np.ndarray) -> np.ndarray:
        """(H_c, W_c, D) context -> (H_c*factor, W_c*factor, 9) weights."""
        x = conv2d(context, self.bundle.tensor("mask.conv1.weight"), self.bundle.tensors.get("mask.conv1.bias"))
        x = np.maximum(x, 0.0)
        logits = conv2d(x, self.bundle.tensor("mask.conv2.weight"), self.bundle.tensors.get("mask.conv2.bias"))
        hc, wc, _ = logits.shape
        f = self.factor
        logits = logits.reshape(hc, wc, 9, f, f)
        logits -= logits.max(axis=2, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=2, keepdims=True)
        # (hc, wc, 9, f, f) -> (hc*f, wc*f, 9)
        return weights.transpose(0, 3, 1, 4, 2).reshape(hc * f, wc * f, 9)


class GruUpdater:
    """Convolutional GRU update operator executed from loaded weights.

    Expects tensors gru.convz/convr/convq (+.bias) taking the channel
    concat [hidden, lookup features, context, disparity] and a delta head
    head.weight/bias mapping hidden -> 1 channel.
    """

    def __init__(self, bundle: WeightsBundle, hidden_channels: int):
        self.bundle = bundle
        self.hidden = hidden_channels
        for name in ("gru.convz.weight", "gru.convr.weight", "gru.convq.weight", "head.weight"):
            if name not in bundle.tensors:
                raise WeightLoadError(f"update weights missing {name!r}")

    def __call__(self, h: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        hx = np.concatenate([h, x], axis=-1)
        z = 1.0 / (1.0 + np.exp(-conv2d(hx, self.bundle.tensor("gru.convz.weight"), self.bundle.tensors.get("gru.convz.bias"))))
        r = 1.0 / (1.0 + np.exp(-conv2d(hx, self.bundle.tensor("gru.convr.weight"), self.bundle.tensors.get("gru.convr.bias"))))
        rhx = np.concatenate([r * h, x], axis=-1)
        q = np.tanh(conv2d(rhx, self.bundle.tensor("gru.convq.weight"), self.bundle.tensors.get("gru.convq.bias")))
        h_new = (1.0 - z) * h + z * q
        delta = conv2d(h_new, self.bundle.tensor("head.weight"), self.bundle.tensors.get("head.bias"))[:, :, 0]
        return h_new, np.clip(delta, -MAX_STEP, MAX_STEP)


def iterative_update(
    volume: CostVolume,
    context: np.ndarray,
    iterations: int,
    lookup_radius: int = 4,
    updater: GruUpdater | None = None,
    init: tuple | None = None,
) -> tuple[DisparityField, np.ndarray]:
    """Refine a coarse disparity field for a fixed number of iterations.

    Returns the coarse field (trace included, one entry per iteration)
    and the per-pixel confidence from initialization.
    """
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    h, w, _ = volume.data.shape
    if init is None:
        disparity, confidence = init_from_volume(volume)
    else:
        disparity, confidence = init
        disparity = np.asarray(disparity, dtype=np.float64).copy()
    trace = []
    hidden = None
    for _ in range(iterations):
        if updater is None:
            delta = UPDATE_DAMPING * _handcrafted_step(volume, disparity)
        else:
            feats = lookup_cost(volume, disparity, lookup_radius)
            x = np.concatenate([feats, context, disparity[:, :, None]], axis=-1)
            if hidden is None:
                hidden = np.zeros((h, w, updater.hidden))
            hidden, delta = updater(hidden, x)
        disparity = np.clip(disparity + delta, 0.0, w - 1.0)
        trace.append(disparity.copy())
    field_ = DisparityField(values=disparity, validity=np.ones((h, w), dtype=bool), trace=trace)
    return field_, confidence


def _bilateral_weights(guidance: np.ndarray, factor: int, coarse_shape: tuple,
                       sigma_spatial: float = 0.75, sigma_range: float = 0.1) -> np.ndarray:
    """Convex 3x3 combination weights from guidance similarity."""
    hc, wc = coarse_shape
    hf, wf = hc * factor, wc * factor
    gray = guidance if guidance.ndim == 2 else guidance @ np.array([0.299, 0.587, 0.114])
    if gray.shape != (hf, wf):
        raise InvalidInputError(f"guidance shape {gray.shape} != {(hf, wf)}")
    coarse_gray = gray.reshape(hc, factor, wc, factor).mean(axis=(1, 3))

    iy = np.arange(hf)
    ix = np.arange(wf)
    cy = (iy + 0.5) / factor - 0.5
    cx = (ix + 0.5) / factor - 0.5
    base_y = iy // factor
    base_x = ix // factor
    weights = np.empty((hf, wf, 9))
    for n, (oy, ox) in enumerate([(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]):
        ny = np.clip(base_y + oy, 0, hc - 1)
        nx = np.clip(base_x + ox, 0, wc - 1)
        dsp = ((cy - ny)[:, None] ** 2 + ((cx - nx)[None, :]) ** 2)
        w_s = np.exp(-dsp / (2.0 * sigma_spatial**2))
        dg = gray - coarse_gray[ny[:, None], nx[None, :]]
        w_r = np.exp(-(dg**2) / (2.0 * sigma_range**2))
        weights[:, :, n] = w_s * w_r
    return weights


def convex_upsample(
    coarse: DisparityField,
    factor: int,
    guidance: np.ndarray | None = None,
    weights: np.ndarray | None = None,
) -> DisparityField:
    """Upsample by `factor`, each fine pixel a convex combination of a 3x3
    coarse neighborhood, with disparity magnitudes scaled by `factor`.

    Explicit `weights` (H_f, W_f, 9, neighborhood in row-major dy,dx order)
    override the guidance-driven bilateral weights; any weights are
    clamped non-negative and renormalized so convexity holds regardless of
    the source. Invalid coarse neighbors get zero weight; fine pixels with
    no valid neighbor are invalid.
    """
    hc, wc = coarse.values.shape
    hf, wf = hc * factor, wc * factor
    if weights is None:
        if guidance is None:
            weights = np.ones((hf, wf, 9))
        else:
            weights = _bilateral_weights(np.asarray(guidance, dtype=np.float64), factor, (hc, wc))
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (hf, wf, 9):
            raise InvalidInputError(f"weights shape {weights.shape} != {(hf, wf, 9)}")
    weights = np.maximum(weights, 0.0)

    base_y = np.arange(hf) // factor
    base_x = np.arange(wf) // factor
    values = np.zeros((hf, wf))
    wsum = np.zeros((hf, wf))
    for n, (oy, ox) in enumerate([(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]):
        ny = np.clip(base_y + oy, 0, hc - 1)
        nx = np.clip(base_x + ox, 0, wc - 1)
        v = coarse.values[ny[:, None], nx[None, :]]
        ok = coarse.validity[ny[:, None], nx[None, :]]
        w = weights[:, :, n] * ok
        values += w * v
        wsum += w
    valid = wsum > 1e-12
    values = np.divide(values, wsum, out=np.zeros_like(values), where=valid)
    return DisparityField(values=values * factor, validity=valid, trace=list(coarse.trace))
