"""The full SpecAE network: both branches, the joint embedding and the estimator.

Checkpoint format (plain text, UTF-8)::

    specae-checkpoint 1
    config <key>=<value>        one line per TrainConfig field
    tensor <name> <rows> <cols>
    <row 0 values, space separated>
    ...

Values are written with ``repr`` so a load reproduces every float exactly.
GMM parameters are stored as ``gmm.phi``, ``gmm.mu`` and ``gmm.cov.<k>``.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .embedding import JointEmbedding, assemble, reconstruction_features
from .errors import ParseError
from .gmm import EstimationNetwork, GmmParams
from .layers import DenseAutoencoder, GraphDecoder, VariationalGraphEncoder, reparameterize
from .util import atomic_write

CHECKPOINT_MAGIC = "specae-checkpoint"
CHECKPOINT_VERSION = 1


def branches(ablation):
    """Which branches are active and which embedding segments are kept."""
    return {
        "full": dict(attr=True, graph=True, errors=True),
        "S": dict(attr=True, graph=False, errors=True),
        "N": dict(attr=False, graph=True, errors=True),
        "nr": dict(attr=True, graph=True, errors=False),
    }[ablation]


def embedding_width(cfg):
    b = branches(cfg.ablation)
    width = 0
    if b["attr"]:
        width += cfg.d1 + (2 if b["errors"] else 0)
    if b["graph"]:
        width += cfg.d2 + (2 if b["errors"] else 0)
    return width


@dataclass
class ForwardPass:
    embedding: JointEmbedding
    X_hat: T.Tensor = None
    X_tilde: T.Tensor = None
    mu: T.Tensor = None
    logsigma: T.Tensor = None


class SpecAEModel:
    def __init__(self, cfg, ae=None, encoder=None, decoder=None, estimator=None):
        self.cfg = cfg
        self.ae = ae
        self.encoder = encoder
        self.decoder = decoder
        self.estimator = estimator

    @classmethod
    def build(cls, m, cfg, rng):
        b = branches(cfg.ablation)
        kw = dict(alpha=cfg.alpha, weights_inside_activation=cfg.weights_inside_activation)
        ae = DenseAutoencoder.build(m, cfg.hidden, cfg.d1, rng) if b["attr"] else None
        enc = dec = None
        if b["graph"]:
            enc = VariationalGraphEncoder.build(m, cfg.hidden, cfg.d2, rng, **kw)
            dec = GraphDecoder.build(cfg.d2, cfg.hidden, m, rng, **kw)
        est = EstimationNetwork.build(embedding_width(cfg), cfg.k_components, rng)
        return cls(cfg, ae, enc, dec, est)

    def parameters(self):
        params = {}
        for part in (self.ae, self.encoder, self.decoder, self.estimator):
            if part is not None:
                params.update(part.parameters())
        return params

    def forward(self, X, S, rng=None, train_mode=True, noise=None):
        """Full-graph pass producing the joint embedding and both reconstructions."""
        X = T.tensor(X)
        keep_errors = branches(self.cfg.ablation)["errors"]
        out = ForwardPass(embedding=None)
        segs = {}
        if self.ae is not None:
            segs["z_x"] = self.ae.encode(X)
            out.X_hat = self.ae.decode(segs["z_x"])
            if keep_errors:
                segs["x_error"] = reconstruction_features(X, out.X_hat)
        if self.encoder is not None:
            out.mu, out.logsigma = self.encoder.moments(S, X)
            segs["z_g"] = reparameterize(out.mu, out.logsigma, rng, train_mode, noise)
            out.X_tilde = self.decoder(S, segs["z_g"])
            if keep_errors:
                segs["g_error"] = reconstruction_features(X, out.X_tilde)
        out.embedding = assemble(**segs)
        return out


# -- checkpoints -----------------------------------------------------------------


def _tensor_block(name, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    lines = [f"tensor {name} {arr.shape[0]} {arr.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in arr]
    return lines


def checkpoint_text(model, params=None):
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"]
    lines += [f"config {line}" for line in model.cfg.to_lines()]
    for name, t in model.parameters().items():
        lines += _tensor_block(name, t.data)
    if params is not None:
        lines += _tensor_block("gmm.phi", params.phi.data)
        lines += _tensor_block("gmm.mu", params.mu.data)
        for k, c in enumerate(params.cov):
            lines += _tensor_block(f"gmm.cov.{k}", c.data)
    return "\n".join(lines) + "\n"


def save_checkpoint(path, model, params=None):
    atomic_write(path, checkpoint_text(model, params))


def load_checkpoint(path, m):
    """Rebuild ``(model, params)`` from a checkpoint for attribute width ``m``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ParseError("not a version-1 specae checkpoint", path, 1)
    config_lines, tensors = [], {}
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if head and head[0] == "config":
            config_lines.append(lines[i][len("config "):])
            i += 1
        elif head and head[0] == "tensor" and len(head) == 4:
            name, rows, cols = head[1], int(head[2]), int(head[3])
            block = lines[i + 1:i + 1 + rows]
            try:
                arr = np.array([[float(v) for v in row.split()] for row in block]).reshape(rows, cols)
            except ValueError:
                raise ParseError(f"malformed tensor {name}", path, i + 1) from None
            tensors[name] = arr
            i += 1 + rows
        else:
            raise ParseError("unexpected line", path, i + 1)
    cfg = TrainConfig.from_lines(config_lines)
    model = SpecAEModel.build(m, cfg, np.random.default_rng(0))
    for name, t in model.parameters().items():
        if name not in tensors or tensors[name].shape != t.shape:
            raise ParseError(f"missing or misshapen tensor {name}", path)
        t.data = tensors[name]
    params = None
    if "gmm.phi" in tensors:
        k = tensors["gmm.phi"].shape[1]
        params = GmmParams.from_arrays(
            tensors["gmm.phi"], tensors["gmm.mu"], [tensors[f"gmm.cov.{j}"] for j in range(k)]
        )
    return model, params
