"""Command-line experiment runner.

Usage::

    specae run --synthetic --seed 7 --out runs/demo
    specae run --dataset cora --inject-ratio 0.05 --out runs/cora
    specae ablate --synthetic --seed 7 --out runs/ablation

Settings come from the built-in defaults, then ``--config FILE`` (flat
``key=value`` lines), then command-line flags.  ``SPECAE_DATA_DIR`` is the
fallback root for dataset names.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bench import generate_sbm, inject_anomalies
from .config import TrainConfig, coerce, parse_key_values
from .errors import ContractError, SpecAEError
from .graph import find_dataset_files, load_citation_dataset, normalize_propagation
from .metrics import K_PERCENTS, evaluate, precision_recall_f1
from .model import embedding_width, save_checkpoint
from .trainer import train
from .util import atomic_write

log = logging.getLogger("specae")


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str = None
    synthetic: bool = False
    communities: int = 3
    nodes_per: int = 100
    p_in: float = 0.1
    p_out: float = 0.01
    attr_dim: int = 50
    inject_ratio: float = 0.05
    out: str = "specae-out"
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if (self.dataset is None) == (not self.synthetic):
            raise ContractError("set exactly one dataset source: --dataset or --synthetic")
        if not 0.0 <= self.inject_ratio < 1.0:
            raise ContractError("inject_ratio must lie in [0, 1)")

    def describe(self):
        d = asdict(self)
        d.pop("train")
        d.pop("out")
        return d


_SPEC_FIELDS = {f.name: f.type for f in fields(ExperimentSpec) if f.name != "train"}
_TRAIN_FIELDS = {f.name: f.type for f in fields(TrainConfig)}


def build_spec(settings):
    """ExperimentSpec from a flat ``{key: value}`` mapping of strings or values."""
    spec_kw, train_kw = {}, {}
    for key, value in settings.items():
        if key in _TRAIN_FIELDS:
            kind = _TRAIN_FIELDS[key]
            train_kw[key] = coerce(key, value, kind) if isinstance(value, str) else value
        elif key in _SPEC_FIELDS:
            kind = _SPEC_FIELDS[key]
            if key == "dataset":
                spec_kw[key] = value
            elif isinstance(value, str):
                spec_kw[key] = coerce(key, value, kind)
            else:
                spec_kw[key] = value
        else:
            raise ContractError(f"unknown setting {key!r}")
    return ExperimentSpec(train=TrainConfig(**train_kw), **spec_kw)


# -- experiment ------------------------------------------------------------------


def prepare_data(spec):
    """Load or generate the graph and inject anomalies; returns ``(graph, record)``."""
    data_rng, inject_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence([spec.train.seed, 1]).spawn(2)
    )
    if spec.synthetic:
        graph = generate_sbm(spec.communities, spec.nodes_per, spec.p_in, spec.p_out,
                             spec.attr_dim, data_rng)
    else:
        graph = load_citation_dataset(*find_dataset_files(spec.dataset))
    return inject_anomalies(graph, spec.inject_ratio, inject_rng, seed=spec.train.seed)


def _ranking_csv(graph, scored, truth):
    lines = ["node_id,energy,rank,truth"]
    for rank, i in enumerate(scored.ranking, 1):
        lines.append(f"{graph.node_ids[i]},{float(scored.energy[i])!r},{rank},{int(truth[i])}")
    return "\n".join(lines) + "\n"


def execute(spec, graph, record, out_dir):
    """Train on a prepared graph, evaluate, and write every report into ``out_dir``."""
    cfg = spec.train
    truth = record.truth(graph.n)
    S = normalize_propagation(graph)
    result = train(graph, cfg, truth if cfg.mode == "semi" else None, S=S)
    scored = result.scored
    report = evaluate(scored, truth)
    prf = precision_recall_f1(scored.ranking, truth)
    eval_truth = truth[scored.eval_nodes]
    metrics = {
        "ablation": cfg.ablation,
        "embedding_width": embedding_width(cfg),
        "config": asdict(cfg),
        "experiment": spec.describe(),
        "graph": {"n": graph.n, "m": graph.m, "edges": graph.num_edges},
        "n_eval": int(eval_truth.size),
        "n_eval_anomalies": int(eval_truth.sum()),
        "accuracy_at_k": {str(k): report.accuracy_at_k[k] for k in K_PERCENTS},
        "auc": report.auc,
        **prf,
        "loss_trace": {k: [h[k] for h in result.history] for k in result.history[0]}
        if result.history else {},
    }
    os.makedirs(out_dir, exist_ok=True)
    atomic_write(os.path.join(out_dir, "metrics.json"),
                 json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    atomic_write(os.path.join(out_dir, "ranking.csv"), _ranking_csv(graph, scored, truth))
    atomic_write(os.path.join(out_dir, "roc.csv"), report.roc_csv())
    atomic_write(os.path.join(out_dir, "metrics.txt"), report.to_text())
    atomic_write(os.path.join(out_dir, "injection.txt"), record.to_text(graph.node_ids))
    save_checkpoint(os.path.join(out_dir, "checkpoint.txt"), result.model, result.params)
    return metrics


def run_experiment(spec):
    graph, record = prepare_data(spec)
    return execute(spec, graph, record, spec.out)


ABLATION_VARIANTS = (
    ("full_alpha0.7", dict(ablation="full", alpha=0.7)),
    ("full_alpha1", dict(ablation="full", alpha=1.0)),
    ("S", dict(ablation="S")),
    ("N", dict(ablation="N")),
    ("nr", dict(ablation="nr")),
)
_TABLE_COLUMNS = ("accuracy", "precision", "recall", "f1", "auc")


def run_ablation_suite(spec):
    """Train every ablation variant on one injected graph; returns the table rows."""
    graph, record = prepare_data(spec)
    rows = []
    for name, changes in ABLATION_VARIANTS:
        sub = ExperimentSpec(**{**spec.__dict__, "train": spec.train.replace(**changes),
                                "out": os.path.join(spec.out, name)})
        m = execute(sub, graph, record, sub.out)
        rows.append({"variant": name, **{c: m[c] for c in _TABLE_COLUMNS}})
    lines = ["variant," + ",".join(_TABLE_COLUMNS)]
    lines += [r["variant"] + "," + ",".join(repr(float(r[c])) for c in _TABLE_COLUMNS) for r in rows]
    atomic_write(os.path.join(spec.out, "ablation.csv"), "\n".join(lines) + "\n")
    atomic_write(os.path.join(spec.out, "ablation.json"),
                 json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return rows


# -- argument parsing ----------------------------------------------------------------


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("data")
    src.add_argument("--dataset", help="dataset name (under $SPECAE_DATA_DIR) or path")
    src.add_argument("--synthetic", action="store_const", const=True,
                     help="use the stochastic block model fixture")
    src.add_argument("--communities", type=int)
    src.add_argument("--nodes-per", type=int)
    src.add_argument("--p-in", type=float)
    src.add_argument("--p-out", type=float)
    src.add_argument("--attr-dim", type=int)
    src.add_argument("--inject-ratio", type=float)
    mdl = common.add_argument_group("model")
    mdl.add_argument("--alpha", type=float)
    mdl.add_argument("--lambda1", type=float)
    mdl.add_argument("--lambda2", type=float)
    mdl.add_argument("--lambda-kl", type=float)
    mdl.add_argument("--k-components", type=int)
    mdl.add_argument("--d1", type=int)
    mdl.add_argument("--d2", type=int)
    mdl.add_argument("--hidden", type=int)
    mdl.add_argument("--epochs", type=int)
    mdl.add_argument("--lr", type=float)
    mdl.add_argument("--seed", type=int)
    mdl.add_argument("--ablation", choices=["full", "S", "N", "nr"])
    mdl.add_argument("--train-fraction", type=float)
    mdl.add_argument("--mode", choices=["semi", "unsup"])
    mdl.add_argument("--weights-inside-activation", action="store_const", const=True)
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="key=value settings file (flags override it)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="specae", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("ablate", parents=[common], help="run the ablation suite")
    return parser


def settings_from_args(args):
    settings = {}
    if args.config:
        with open(args.config) as fh:
            settings.update(parse_key_values(fh.read().splitlines(), path=args.config))
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        settings[key] = value
    # a data source given on the command line replaces the one from the file
    if args.dataset is not None:
        settings.pop("synthetic", None)
    if args.synthetic:
        settings.pop("dataset", None)
    return settings


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = build_spec(settings_from_args(args))
        if args.command == "run":
            metrics = run_experiment(spec)
            print(f"auc={metrics['auc']:.4f} out={spec.out}")
        else:
            for row in run_ablation_suite(spec):
                print(f"{row['variant']}: auc={row['auc']:.4f} f1={row['f1']:.4f}")
    except (SpecAEError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
