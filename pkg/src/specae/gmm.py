"""Mixture membership network, GMM parameter estimation and sample energy."""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError
from .layers import Dense

EPS_COV = 1e-6
DEFAULT_K = 3
ESTIMATOR_HIDDEN = 10
ESTIMATOR_DROPOUT = 0.5
_INERT = 1e-12


class EstimationNetwork:
    """Dense(d -> 10, tanh) -> dropout -> Dense(10 -> K) -> softmax."""

    def __init__(self, hidden, output, dropout=ESTIMATOR_DROPOUT):
        self.hidden = hidden
        self.output = output
        self.dropout = dropout

    @classmethod
    def build(cls, d, k, rng, hidden=ESTIMATOR_HIDDEN, dropout=ESTIMATOR_DROPOUT, name="est"):
        return cls(
            Dense.init(d, hidden, rng, "tanh", f"{name}.hidden"),
            Dense.init(hidden, k, rng, "identity", f"{name}.out"),
            dropout,
        )

    @property
    def k(self):
        return self.output.out_features

    def logits(self, Z, rng=None, train_mode=False):
        H = self.hidden(T.tensor(Z))
        if train_mode and self.dropout > 0:
            keep = 1.0 - self.dropout
            mask = (rng.random(H.shape) < keep) / keep
            H = H * T.Tensor(mask)
        return self.output(H)

    def parameters(self):
        return {**self.hidden.parameters(), **self.output.parameters()}


def membership(net, Z, rng=None, train_mode=False):
    """Soft component memberships, one simplex row per node."""
    return T.softmax(net.logits(Z, rng, train_mode))


@dataclass
class GmmParams:
    """Mixture weights ``phi`` (1 x K), means ``mu`` (K x d), covariances (K of d x d).

    Components whose weight is exactly zero are inert and ignored by the energy.
    """

    phi: T.Tensor
    mu: T.Tensor
    cov: list

    @property
    def k(self):
        return self.phi.cols

    @property
    def d(self):
        return self.mu.cols

    def active(self):
        return [k for k in range(self.k) if self.phi.data[0, k] > 0]

    def detach(self):
        return GmmParams(self.phi.detach(), self.mu.detach(), [c.detach() for c in self.cov])

    def as_arrays(self):
        return {
            "phi": self.phi.data.ravel().copy(),
            "mu": self.mu.data.copy(),
            "cov": np.stack([c.data for c in self.cov]),
        }

    @classmethod
    def from_arrays(cls, phi, mu, cov):
        cov = np.asarray(cov, dtype=np.float64)
        return cls(T.Tensor(np.asarray(phi).reshape(1, -1)), T.Tensor(mu), [T.Tensor(c) for c in cov])


def estimate_params(Z, gamma, eps_cov=EPS_COV):
    """Responsibility-weighted mixture weights, means and covariances.

    Each covariance gets ``eps_cov * I`` added.  A component with zero total
    responsibility becomes inert: weight 0, mean 0, covariance ``I``.
    """
    Z, gamma = T.tensor(Z), T.tensor(gamma)
    if Z.rows != gamma.rows:
        raise DimensionError(f"estimate_params: {Z.rows} embeddings, {gamma.rows} memberships")
    n, d = Z.shape
    totals = T.reduce_sum(gamma, axis=0)
    ridge = T.Tensor(eps_cov * np.eye(d))
    phis, mus, covs = [], [], []
    for k in range(gamma.cols):
        total = T.take_cols(totals, [k])
        if total.data[0, 0] <= _INERT:
            phis.append(T.zeros(1, 1))
            mus.append(T.zeros(1, d))
            covs.append(T.eye(d))
            continue
        g_k = T.take_cols(gamma, [k])
        phis.append(T.scale(total, 1.0 / n))
        mu_k = (g_k.T @ Z) / total
        diff = Z - mu_k
        raw = ((diff * g_k).T @ diff) / total
        covs.append(T.scale(raw + raw.T, 0.5) + ridge)
        mus.append(mu_k)
    return GmmParams(T.concat(phis, axis=1), T.concat(mus, axis=0), covs)


def component_log_densities(Z, params):
    """``log phi_k + log N(z | mu_k, cov_k)`` for every row and active component."""
    Z = T.tensor(Z)
    if Z.cols != params.d:
        raise DimensionError(f"energy: embedding width {Z.cols}, mixture dimension {params.d}")
    const = params.d * math.log(2.0 * math.pi)
    columns = []
    for k in params.active():
        diff = Z - T.take_rows(params.mu, [k])
        solved = T.solve_spd(params.cov[k], diff.T, label=f"component {k}")
        mahal = T.reduce_sum(diff * solved.T, axis=1)
        logdet = T.logdet_spd(params.cov[k], label=f"component {k}")
        log_phi = T.log(T.take_cols(params.phi, [k]))
        columns.append(log_phi - T.scale(mahal, 0.5) - T.scale(logdet + const, 0.5))
    return T.concat(columns, axis=1)


def sample_energy(Z, params):
    """Negative log mixture density of each row of ``Z`` (``n x 1``)."""
    return -T.logsumexp(component_log_densities(Z, params))


def covariance_penalty(params):
    """Sum over components of the reciprocal covariance diagonals."""
    total = None
    for cov in params.cov:
        diag = T.reduce_sum(cov * T.eye(cov.rows), axis=0)
        term = T.reduce_sum(T.div(1.0, diag))
        total = term if total is None else total + term
    return total
