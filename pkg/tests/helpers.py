"""Independent oracles and small fixtures shared by the test modules.

Nothing here calls into the code paths it is used to check: the oracles use
explicit loops, dense matrices and direct formulas.
"""

import math

import numpy as np

from specae.graph import AttributedGraph

# (criterion, passed, detail) lines collected by test_acceptance and printed
# by the terminal-summary hook in conftest.py
ACCEPTANCE = []


def record(criterion, passed, detail):
    """Log one acceptance line; ``passed=None`` marks a skipped criterion."""
    ACCEPTANCE.append((criterion, None if passed is None else bool(passed), detail))
    return passed


def numeric_grad(f, t, entries=None, step=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. entries of tensor ``t``."""
    if entries is None:
        entries = list(np.ndindex(t.shape))
    out = []
    for idx in entries:
        orig = t.data[idx]
        data = t.data.copy()
        data[idx] = orig + step
        t.data = data
        up = f()
        data = data.copy()
        data[idx] = orig - step
        t.data = data
        down = f()
        data = data.copy()
        data[idx] = orig
        t.data = data
        out.append((up - down) / (2 * step))
    return np.array(out)


def rel_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps gradients that are zero up to rounding from producing
    meaningless ratios.
    """
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def dense_propagation(n, edges):
    """``D^-1/2 (A + I) D^-1/2`` built entry by entry."""
    A = np.eye(n)
    for i, j in edges:
        if i != j:
            A[i, j] = A[j, i] = 1.0
    deg = [sum(A[i]) for i in range(n)]
    S = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = A[i, j] / math.sqrt(deg[i] * deg[j])
    return S


def gmm_oracle(Z, gamma, eps_cov=1e-6):
    """Mixture parameters by explicit loops over nodes and components."""
    n, d = Z.shape
    K = gamma.shape[1]
    phi = np.zeros(K)
    mu = np.zeros((K, d))
    cov = np.zeros((K, d, d))
    for k in range(K):
        total = 0.0
        for i in range(n):
            total += gamma[i, k]
        phi[k] = total / n
        for i in range(n):
            mu[k] += gamma[i, k] * Z[i]
        mu[k] /= total
        for i in range(n):
            diff = Z[i] - mu[k]
            for a in range(d):
                for b in range(d):
                    cov[k, a, b] += gamma[i, k] * diff[a] * diff[b]
        cov[k] /= total
        cov[k] += eps_cov * np.eye(d)
    return phi, mu, cov


def energy_oracle(z, phi, mu, cov):
    """Direct evaluation of ``-log sum_k phi_k N(z | mu_k, cov_k)``."""
    total = 0.0
    for k in range(len(phi)):
        diff = z - mu[k]
        quad = diff @ np.linalg.inv(cov[k]) @ diff
        total += phi[k] * math.exp(-0.5 * quad) / math.sqrt(np.linalg.det(2 * math.pi * cov[k]))
    return -math.log(total)


def random_spd(d, rng, low=0.1, high=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return q @ np.diag(rng.uniform(low, high, size=d)) @ q.T


def pairwise_auc(scores, truth):
    """AUC by counting every positive/negative pair; ties count one half."""
    wins = 0.0
    pos = [s for s, t in zip(scores, truth) if t]
    neg = [s for s, t in zip(scores, truth) if not t]
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def confusion_accuracy(ranking, truth, n_flag):
    tp = fp = fn = tn = 0
    for pos, node in enumerate(ranking):
        flagged = pos < n_flag
        if flagged and truth[node]:
            tp += 1
        elif flagged:
            fp += 1
        elif truth[node]:
            fn += 1
        else:
            tn += 1
    return (tp + tn) / (tp + fp + fn + tn)


def random_graph(n, m, rng, p=0.3, labels=None):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return AttributedGraph(
        X=rng.standard_normal((n, m)),
        edges=np.stack([iu[keep], ju[keep]], axis=1),
        labels=labels,
    )


def path_graph(n, m=1, X=None):
    X = np.zeros((n, m)) if X is None else X
    return AttributedGraph(X=X, edges=[(i, i + 1) for i in range(n - 1)])
