"""Trainable layers: dense autoencoder, smoothing convolution, sharpening deconvolution.

Graph layers follow the literal propagation rules

    Conv(H)   = act((1 - alpha) H + alpha S H) W
    Deconv(Z) = act((1 + alpha) Z - alpha S Z) W

with ``S`` the normalised self-looped adjacency.  The activation wraps the
mixed features and the weight is applied afterwards.  Passing
``weights_inside_activation=True`` gives the conventional ``act(mixed W)``.
"""

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .graph import propagate

LOGSIGMA_CLAMP = 10.0
DEFAULT_ALPHA = 0.7


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1], got {alpha}")
    return float(alpha)


def smooth(S, H, alpha):
    """Laplacian smoothing ``(1 - alpha) H + alpha S H``."""
    return T.add(T.scale(H, 1.0 - alpha), T.scale(propagate(S, H), alpha))


def sharpen(S, H, alpha):
    """Laplacian sharpening ``(1 + alpha) H - alpha S H``."""
    return T.sub(T.scale(H, 1.0 + alpha), T.scale(propagate(S, H), alpha))


class Dense:
    """``act(b + X W)``."""

    def __init__(self, W, b=None, activation="identity", name="dense"):
        self.W = T.tensor(W, requires_grad=True)
        self.b = None if b is None else T.tensor(b, requires_grad=True)
        if self.b is not None and self.b.shape != (1, self.W.cols):
            raise DimensionError(f"bias shape {self.b.shape} does not match weight {self.W.shape}")
        self.activation = activation
        self.name = name
        T.activation(activation)

    @classmethod
    def init(cls, fan_in, fan_out, rng, activation="identity", name="dense", bias=True):
        W = T.glorot_uniform(fan_in, fan_out, rng)
        b = T.zeros(1, fan_out, requires_grad=True) if bias else None
        return cls(W, b, activation, name)

    @property
    def in_features(self):
        return self.W.rows

    @property
    def out_features(self):
        return self.W.cols

    def __call__(self, X):
        if X.cols != self.W.rows:
            raise DimensionError(f"{self.name}: input width {X.cols}, weight {self.W.shape}")
        out = X @ self.W
        if self.b is not None:
            out = out + self.b
        return T.activation(self.activation)(out)

    def parameters(self):
        params = {f"{self.name}.W": self.W}
        if self.b is not None:
            params[f"{self.name}.b"] = self.b
        return params


class DenseAutoencoder:
    """Attribute autoencoder: a stack of dense encoder layers and decoder layers."""

    def __init__(self, encoder, decoder):
        self.encoder = list(encoder)
        self.decoder = list(decoder)
        if self.encoder[-1].out_features != self.decoder[0].in_features:
            raise DimensionError("encoder output width differs from decoder input width")

    @classmethod
    def build(cls, m, hidden, code, rng, name="ae"):
        """m -> hidden -> code -> hidden -> m with relu hidden layers and linear heads."""
        encoder = [
            Dense.init(m, hidden, rng, "relu", f"{name}.enc0"),
            Dense.init(hidden, code, rng, "identity", f"{name}.enc1"),
        ]
        decoder = [
            Dense.init(code, hidden, rng, "relu", f"{name}.dec0"),
            Dense.init(hidden, m, rng, "identity", f"{name}.dec1"),
        ]
        return cls(encoder, decoder)

    @property
    def code_width(self):
        return self.encoder[-1].out_features

    def encode(self, X):
        for layer in self.encoder:
            X = layer(X)
        return X

    def decode(self, Z):
        for layer in self.decoder:
            Z = layer(Z)
        return Z

    def parameters(self):
        params = {}
        for layer in self.encoder + self.decoder:
            params.update(layer.parameters())
        return params


def ae_encode(ae, X):
    return ae.encode(T.tensor(X))


def ae_decode(ae, Z):
    return ae.decode(T.tensor(Z))


class _GraphLayer:
    def __init__(self, W, alpha=DEFAULT_ALPHA, activation="relu", weights_inside_activation=False,
                 name="graph"):
        self.W = T.tensor(W, requires_grad=True)
        self.alpha = _check_alpha(alpha)
        self.activation = activation
        self.weights_inside_activation = weights_inside_activation
        self.name = name
        T.activation(activation)

    @classmethod
    def init(cls, fan_in, fan_out, rng, **kwargs):
        return cls(T.glorot_uniform(fan_in, fan_out, rng), **kwargs)

    @property
    def in_features(self):
        return self.W.rows

    @property
    def out_features(self):
        return self.W.cols

    def _mix(self, S, H):
        raise NotImplementedError

    def __call__(self, S, H):
        H = T.tensor(H)
        if H.rows != S.n:
            raise DimensionError(f"{self.name}: {H.rows} rows for a {S.n}-node graph")
        if H.cols != self.W.rows:
            raise DimensionError(f"{self.name}: input width {H.cols}, weight {self.W.shape}")
        act = T.activation(self.activation)
        mixed = self._mix(S, H)
        if self.weights_inside_activation:
            return act(mixed @ self.W)
        return act(mixed) @ self.W

    def parameters(self):
        return {f"{self.name}.W": self.W}


class ConvLayer(_GraphLayer):
    """Smoothing graph convolution; ``alpha`` weights the neighbourhood average."""

    def _mix(self, S, H):
        return smooth(S, H, self.alpha)


class DeconvLayer(_GraphLayer):
    """Sharpening graph deconvolution; ``alpha`` weights the neighbourhood difference."""

    def _mix(self, S, H):
        return sharpen(S, H, self.alpha)


def conv_forward(layer, S, H):
    return layer(S, H)


def deconv_forward(layer, S, Z):
    return layer(S, Z)


def _graph_activations(weights_inside_activation):
    # With the literal ordering the activation acts on the layer *input*, so
    # layers fed raw attributes or latent samples stay linear.
    return ("relu", "identity") if weights_inside_activation else ("identity", "relu")


class VariationalGraphEncoder:
    """Shared convolutions followed by mean and log-std convolution heads."""

    def __init__(self, shared, mu_head, logsigma_head):
        self.shared = list(shared)
        self.mu_head = mu_head
        self.logsigma_head = logsigma_head
        if mu_head.W.shape != logsigma_head.W.shape:
            raise DimensionError("mean and log-std heads must have identical shapes")

    @classmethod
    def build(cls, m, hidden, latent, rng, alpha=DEFAULT_ALPHA, weights_inside_activation=False,
              name="genc"):
        first, rest = _graph_activations(weights_inside_activation)
        kw = dict(alpha=alpha, weights_inside_activation=weights_inside_activation)
        shared = [ConvLayer.init(m, hidden, rng, activation=first, name=f"{name}.conv0", **kw)]
        mu = ConvLayer.init(hidden, latent, rng, activation=rest, name=f"{name}.mu", **kw)
        ls = ConvLayer.init(hidden, latent, rng, activation=rest, name=f"{name}.logsigma", **kw)
        return cls(shared, mu, ls)

    @property
    def latent_width(self):
        return self.mu_head.out_features

    def moments(self, S, X):
        """Return ``(mu, logsigma)`` with ``logsigma`` clamped to +-LOGSIGMA_CLAMP."""
        H = T.tensor(X)
        for layer in self.shared:
            H = layer(S, H)
        mu = self.mu_head(S, H)
        logsigma = T.clamp(self.logsigma_head(S, H), -LOGSIGMA_CLAMP, LOGSIGMA_CLAMP)
        return mu, logsigma

    def parameters(self):
        params = {}
        for layer in self.shared + [self.mu_head, self.logsigma_head]:
            params.update(layer.parameters())
        return params


def reparameterize(mu, logsigma, rng=None, train_mode=True, noise=None):
    """``mu + exp(logsigma) * eps`` in train mode, ``mu`` in eval mode.

    ``noise`` overrides the standard-normal draw from ``rng``.
    """
    if not train_mode:
        return mu
    if noise is None:
        noise = rng.standard_normal(mu.shape)
    noise = np.broadcast_to(np.asarray(noise, dtype=np.float64), mu.shape)
    return mu + T.exp(T.clamp(logsigma, -LOGSIGMA_CLAMP, LOGSIGMA_CLAMP)) * T.Tensor(noise)


def variational_encode(enc, S, X, rng=None, train_mode=True, noise=None):
    """Return ``(Z_G, mu, logsigma)`` for the variational graph encoder."""
    mu, logsigma = enc.moments(S, X)
    return reparameterize(mu, logsigma, rng, train_mode, noise), mu, logsigma


def kl_to_standard_normal(mu, logsigma):
    """KL(N(mu, diag(sigma^2)) || N(0, I)) summed over latent dims, averaged over rows."""
    mu, logsigma = T.tensor(mu), T.tensor(logsigma)
    if mu.shape != logsigma.shape:
        raise DimensionError(f"KL: mu {mu.shape} vs logsigma {logsigma.shape}")
    per_entry = T.square(mu) + T.exp(T.scale(logsigma, 2.0)) - 1.0 - T.scale(logsigma, 2.0)
    return T.scale(T.reduce_sum(per_entry), 0.5 / mu.rows)


class GraphDecoder:
    """Stack of deconvolution layers reconstructing node attributes."""

    def __init__(self, layers):
        self.layers = list(layers)

    @classmethod
    def build(cls, latent, hidden, m, rng, alpha=DEFAULT_ALPHA, weights_inside_activation=False,
              name="gdec"):
        first, rest = _graph_activations(weights_inside_activation)
        kw = dict(alpha=alpha, weights_inside_activation=weights_inside_activation)
        return cls([
            DeconvLayer.init(latent, hidden, rng, activation=first, name=f"{name}.deconv0", **kw),
            DeconvLayer.init(hidden, m, rng, activation=rest, name=f"{name}.deconv1", **kw),
        ])

    def __call__(self, S, Z):
        for layer in self.layers:
            Z = layer(S, Z)
        return Z

    def parameters(self):
        params = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params
