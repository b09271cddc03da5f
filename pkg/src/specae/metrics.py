"""Ranking metrics: Accuracy@K, ROC/AUC and precision/recall at a flag budget."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError

K_PERCENTS = (5, 10, 15, 20)


def n_flagged(n_eval, k_percent):
    return min(n_eval, math.ceil(k_percent * n_eval / 100 - 1e-9))


def accuracy_at_k(ranking, truth, k_percent):
    """Classification accuracy when the top ``k_percent`` of ``ranking`` is flagged.

    ``ranking`` lists evaluation node indices, most anomalous first; ``truth``
    is indexed by node (1 = anomaly).
    """
    ranking = np.asarray(ranking)
    if ranking.size == 0:
        raise ContractError("empty ranking")
    if not 0 < k_percent <= 100:
        raise ContractError(f"k_percent must lie in (0, 100], got {k_percent}")
    truth = np.asarray(truth)[ranking].astype(bool)
    flagged = np.zeros(ranking.size, dtype=bool)
    flagged[:n_flagged(ranking.size, k_percent)] = True
    return float(np.count_nonzero(flagged == truth) / ranking.size)


def roc_auc(scores, truth):
    """ROC points at every distinct threshold and the Mann-Whitney AUC.

    Tied positive/negative pairs count one half.  Points run from (0, 0) to
    (1, 1) as ``(false positive rate, true positive rate)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("roc_auc needs at least one positive and one negative")
    ranks = rankdata(scores)
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2
    auc = float(u / (n_pos * n_neg))

    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], truth[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(t)[last]
    fp = np.cumsum(~t)[last]
    points = [(0.0, 0.0)] + [(float(f / n_neg), float(p / n_pos)) for f, p in zip(fp, tp)]
    return points, auc


def precision_recall_f1(ranking, truth, n_flag=None):
    """Precision, recall, F1 and accuracy when the top ``n_flag`` nodes are flagged.

    ``n_flag`` defaults to the number of true anomalies among the ranked
    nodes, which makes precision equal recall.
    """
    ranking = np.asarray(ranking)
    t = np.asarray(truth)[ranking].astype(bool)
    if n_flag is None:
        n_flag = int(t.sum())
    flagged = np.zeros(ranking.size, dtype=bool)
    flagged[:n_flag] = True
    tp = int(np.count_nonzero(flagged & t))
    positives = int(t.sum())
    precision = tp / n_flag if n_flag else 0.0
    recall = tp / positives if positives else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(np.count_nonzero(flagged == t) / ranking.size)
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


@dataclass
class MetricReport:
    accuracy_at_k: dict
    roc_points: list
    auc: float
    extra: dict = field(default_factory=dict)

    def to_text(self):
        lines = ["# specae metric report v1"]
        lines += [f"accuracy@{k}={v!r}" for k, v in self.accuracy_at_k.items()]
        lines.append(f"auc={self.auc!r}")
        lines.append(f"roc_points={len(self.roc_points)}")
        return "\n".join(lines) + "\n"

    def roc_csv(self):
        rows = ["fpr,tpr"] + [f"{f!r},{t!r}" for f, t in self.roc_points]
        return "\n".join(rows) + "\n"


def evaluate(scored, truth, k_percents=K_PERCENTS):
    """Metric report over the evaluation nodes of a :class:`ScoredNodes`."""
    nodes = scored.eval_nodes
    truth = np.asarray(truth)
    acc = {k: accuracy_at_k(scored.ranking, truth, k) for k in k_percents}
    points, auc = roc_auc(scored.energy[nodes], truth[nodes])
    return MetricReport(acc, points, auc)
