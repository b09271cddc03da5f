"""Joint objective, training loop and energy-based scoring."""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .errors import ContractError, DimensionError, NumericalError
from .gmm import covariance_penalty, estimate_params, membership, sample_energy
from .graph import normalize_propagation
from .layers import kl_to_standard_normal
from .model import SpecAEModel
from .optim import Adam

log = logging.getLogger(__name__)

LOSS_TERMS = ("total", "recon_attr", "recon_graph", "energy", "cov_penalty", "kl")


@dataclass
class ScoredNodes:
    """Per-node energies and the descending ranking of evaluation nodes.

    Ties in energy are broken by ascending node index.
    """

    energy: np.ndarray
    ranking: np.ndarray
    train_mask: np.ndarray
    eval_mask: np.ndarray

    @property
    def eval_nodes(self):
        return np.flatnonzero(self.eval_mask)


@dataclass
class TrainResult:
    model: SpecAEModel
    params: object
    scored: ScoredNodes
    history: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.model, self.params, self.scored))


def _mse(X, X_rec):
    """Squared reconstruction error per node, averaged over nodes."""
    return T.scale(T.reduce_sum(T.square(X - X_rec)), 1.0 / X.rows)


def loss(model, X, S, train_nodes, cfg, rng=None, train_mode=True, noise=None):
    """Joint objective on the training nodes.

    Returns ``(J, terms, fwd, params)`` where ``terms`` maps each loss term to
    its float value and ``params`` are the mixture parameters estimated from
    the training nodes' memberships in this pass.
    """
    X = T.tensor(X)
    if X.rows != S.n:
        raise DimensionError(f"{X.rows} attribute rows for a {S.n}-node graph")
    train_nodes = np.asarray(train_nodes)
    fwd = model.forward(X, S, rng, train_mode, noise)
    X_train = T.take_rows(X, train_nodes)
    Z_train = T.take_rows(fwd.embedding.Z, train_nodes)
    gamma = membership(model.estimator, Z_train, rng, train_mode)
    params = estimate_params(Z_train, gamma)

    terms = {}
    J = T.zeros(1, 1)
    if fwd.X_hat is not None:
        terms["recon_attr"] = _mse(X_train, T.take_rows(fwd.X_hat, train_nodes))
        J = J + terms["recon_attr"]
    if fwd.X_tilde is not None:
        terms["recon_graph"] = _mse(X_train, T.take_rows(fwd.X_tilde, train_nodes))
        J = J + terms["recon_graph"]
    terms["energy"] = T.reduce_mean(sample_energy(Z_train, params))
    terms["cov_penalty"] = covariance_penalty(params)
    J = J + T.scale(terms["energy"], cfg.lambda1) + T.scale(terms["cov_penalty"], cfg.lambda2)
    if fwd.mu is not None:
        terms["kl"] = kl_to_standard_normal(
            T.take_rows(fwd.mu, train_nodes), T.take_rows(fwd.logsigma, train_nodes)
        )
        J = J + T.scale(terms["kl"], cfg.lambda_kl)
    values = {name: 0.0 for name in LOSS_TERMS}
    values.update({k: v.item() for k, v in terms.items()})
    values["total"] = J.item()
    return J, values, fwd, params


def select_training_nodes(n, cfg, rng, truth=None):
    """Boolean training mask.

    In ``semi`` mode the mask is drawn from nodes with ``truth == 0`` only;
    in ``unsup`` mode uniformly from all nodes.
    """
    if cfg.mode == "semi":
        if truth is None:
            raise ContractError("semi-supervised mode needs ground-truth anomaly flags")
        pool = np.flatnonzero(np.asarray(truth) == 0)
    else:
        pool = np.arange(n)
    k = min(len(pool), max(1, int(round(cfg.train_fraction * len(pool)))))
    chosen = rng.choice(pool, size=k, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    return mask


def rank_nodes(energy, nodes):
    """Order ``nodes`` by descending energy, ties by ascending index."""
    nodes = np.asarray(nodes)
    order = np.lexsort((nodes, -energy[nodes]))
    return nodes[order]


def score(model, params, graph, S=None, train_mask=None):
    """Eval-mode energies for every node and the ranking of non-training nodes."""
    if S is None:
        S = normalize_propagation(graph)
    with T.no_grad():
        fwd = model.forward(graph.X, S, train_mode=False)
        energy = sample_energy(fwd.embedding.Z, params).data.ravel()
    if not np.all(np.isfinite(energy)):
        raise NumericalError("non-finite energy while scoring")
    if train_mask is None:
        train_mask = np.zeros(graph.n, dtype=bool)
    eval_mask = ~train_mask
    if not eval_mask.any():
        eval_mask = np.ones(graph.n, dtype=bool)
    return ScoredNodes(energy, rank_nodes(energy, np.flatnonzero(eval_mask)), train_mask, eval_mask)


def frozen_params(model, graph, S, train_nodes):
    """Mixture parameters from an eval-mode pass over the training nodes."""
    with T.no_grad():
        fwd = model.forward(graph.X, S, train_mode=False)
        Z = T.take_rows(fwd.embedding.Z, train_nodes)
        return estimate_params(Z, membership(model.estimator, Z)).detach()


def train(graph, cfg=None, truth=None, S=None, callback=None):
    """Fit SpecAE on ``graph`` and score every node.

    ``truth`` (1 = anomaly) is only used in ``semi`` mode to keep anomalies
    out of the training mask.  Returns a :class:`TrainResult`, which also
    unpacks as ``(model, params, scored)``.
    """
    cfg = cfg or TrainConfig()
    if S is None:
        S = normalize_propagation(graph)
    mask_rng, init_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3)
    )
    train_mask = select_training_nodes(graph.n, cfg, mask_rng, truth)
    train_nodes = np.flatnonzero(train_mask)
    model = SpecAEModel.build(graph.m, cfg, init_rng)
    opt = Adam(model.parameters(), lr=cfg.lr)
    X = T.Tensor(graph.X)
    history = []
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        J, terms, _, _ = loss(model, X, S, train_nodes, cfg, noise_rng, train_mode=True)
        if not np.isfinite(terms["total"]):
            raise NumericalError(f"training diverged at epoch {epoch}: {terms}")
        J.backward()
        opt.step()
        history.append(terms)
        if callback is not None:
            callback(epoch, terms)
        log.debug("epoch %d %s", epoch, terms)
    params = frozen_params(model, graph, S, train_nodes)
    scored = score(model, params, graph, S, train_mask)
    return TrainResult(model, params, scored, history)
