"""Cross-view attention along rectified epipolar lines.

Matching pixels of a rectified pair share a row, so information exchange
between the two views only needs to mix features within each row. For
every row, multi-head scaled dot-product attention queries one view
against the other's keys/values and the result is added residually:

    f_hat_i = f_i + Att(Q_i, K_j, V_j),   {i, j} = {left, right} both ways

followed by an optional depthwise output convolution. A zero value
projection therefore leaves the features exactly unchanged.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class EpipolarAttentionWeights:
    """Projection matrices (D x D), head count and output convolution.

    output_conv is an optional depthwise 3x3 kernel of shape (D, 3, 3)
    with bias (D,); None means identity.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    head_count: int = 1
    output_conv: tuple | None = None

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidInputError(f"{name} must be square, got {m.shape}")
            object.__setattr__(self, name, m)
        if self.w_q.shape != self.w_k.shape or self.w_q.shape != self.w_v.shape:
            raise InvalidInputError("attention projections must share one shape")
        if self.head_count < 1 or self.w_q.shape[0] % self.head_count:
            raise InvalidInputError(
                f"feature dim {self.w_q.shape[0]} not divisible by {self.head_count} heads"
            )

    @classmethod
    def passthrough(cls, dim: int, head_count: int = 1) -> "EpipolarAttentionWeights":
        """Structural no-op: identity Q/K, zero V, no output conv."""
        eye = np.eye(dim)
        return cls(w_q=eye, w_k=eye, w_v=np.zeros((dim, dim)), head_count=head_count)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    h, w, d = x.shape
    return x.reshape(h, w, heads, d // heads)


def attention_term(f_query: np.ndarray, f_keyval: np.ndarray, weights: EpipolarAttentionWeights) -> np.ndarray:
    """Row-wise multi-head attention output before residual and conv."""
    q = _split_heads(f_query @ weights.w_q, weights.head_count)
    k = _split_heads(f_keyval @ weights.w_k, weights.head_count)
    v = _split_heads(f_keyval @ weights.w_v, weights.head_count)
    scale = 1.0 / np.sqrt(q.shape[-1])
    logits = np.einsum("hqnd,hknd->hnqk", q, k) * scale
    logits -= logits.max(axis=-1, keepdims=True)
    att = np.exp(logits)
    att /= att.sum(axis=-1, keepdims=True)
    out = np.einsum("hnqk,hknd->hqnd", att, v)
    h, w, n, dh = out.shape
    return out.reshape(h, w, n * dh)


def _depthwise3x3(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    h, w, d = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            out += xp[dy : dy + h, dx : dx + w] * kernel[:, dy, dx]
    return out + bias


def epipolar_attention(
    f_left: np.ndarray,
    f_right: np.ndarray,
    weights: EpipolarAttentionWeights,
) -> tuple[np.ndarray, np.ndarray]:
    """Exchange features between both views along matching rows.

    Returns the residually updated (left, right) maps, each processed by
    the output convolution when one is configured.
    """
    fl = np.asarray(f_left, dtype=np.float64)
    fr = np.asarray(f_right, dtype=np.float64)
    if fl.shape != fr.shape:
        raise InvalidInputError(f"feature shapes differ: {fl.shape} vs {fr.shape}")
    if fl.ndim != 3 or fl.shape[2] != weights.w_q.shape[0]:
        raise InvalidInputError(
            f"features must be HxWx{weights.w_q.shape[0]}, got {fl.shape}"
        )
    out_l = fl + attention_term(fl, fr, weights)
    out_r = fr + attention_term(fr, fl, weights)
    if weights.output_conv is not None:
        kernel, bias = weights.output_conv
        out_l = _depthwise3x3(out_l, kernel, bias)
        out_r = _depthwise3x3(out_r, kernel, bias)
    return out_l, out_r
