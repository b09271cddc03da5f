"""Joint node representation: latent codes plus reconstruction-error features."""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError

EPS_DIV = 1e-12
SEGMENTS = ("z_x", "z_g", "x_error", "g_error")


def reconstruction_features(X, X_hat):
    """Per-node ``[relative euclidean error, cosine similarity]`` as an ``n x 2`` tensor.

    Column 0 is ``|x - x_hat| / (|x| + eps)``; column 1 is
    ``<x, x_hat> / ((|x| + eps)(|x_hat| + eps))``.
    """
    X, X_hat = T.tensor(X), T.tensor(X_hat)
    if X.shape != X_hat.shape:
        raise DimensionError(f"reconstruction_features: {X.shape} vs {X_hat.shape}")
    norm_x = T.row_norm(X) + EPS_DIV
    norm_hat = T.row_norm(X_hat) + EPS_DIV
    relative = T.row_norm(X - X_hat) / norm_x
    cosine = T.reduce_sum(X * X_hat, axis=1) / (norm_x * norm_hat)
    return T.concat([relative, cosine], axis=1)


@dataclass
class JointEmbedding:
    """Concatenated representation ``[Z_X | Z_G | Z_Xerror | Z_Gerror]``.

    ``layout`` maps each segment name to its column width (0 when the
    segment is absent, as in the ablation variants).
    """

    Z: T.Tensor
    layout: dict

    @property
    def width(self):
        return self.Z.cols

    def segment(self, name):
        start = 0
        for key in SEGMENTS:
            if key == name:
                return T.take_cols(self.Z, np.arange(start, start + self.layout[key]))
            start += self.layout[key]
        raise KeyError(name)


def assemble(z_x=None, z_g=None, x_error=None, g_error=None):
    """Concatenate the available segments column-wise in the fixed order."""
    parts = dict(zip(SEGMENTS, (z_x, z_g, x_error, g_error)))
    present = [T.tensor(p) for p in parts.values() if p is not None]
    if not present:
        raise DimensionError("assemble needs at least one segment")
    n = present[0].rows
    if any(p.rows != n for p in present):
        raise DimensionError(f"assemble: row counts {[p.rows for p in present]}")
    layout = {k: (0 if v is None else T.tensor(v).cols) for k, v in parts.items()}
    return JointEmbedding(T.concat(present, axis=1), layout)
