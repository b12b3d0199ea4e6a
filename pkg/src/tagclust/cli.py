"""Command-line pipeline: train / explain / evaluate / ontology / synth.

The train command reads a YAML config (any key overridable by a flag),
runs the full loop, and drops its artifacts into the output directory:
model.npz, assignments.txt, explanation.json, train_report.json, and,
when ground truth is supplied, metrics.json.  Every command is a
deterministic function of its inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from .data import (
    FeatureMatrix,
    LoadError,
    SyntheticSpec,
    generate_synthetic,
    impute_tags,
    load_features,
    load_tags,
    standardize_features,
)
from .explain import (
    CoverageMatrix,
    ExplanationResult,
    compute_coverage,
    explanation_report,
    solve_with_beta_search,
)
from .metrics import MetricReport, clustering_accuracy, explanation_quality, nmi
from .net import save_model
from .ontology import build_ontology, export_dot, majority_name
from .trainer import TrainConfig, train

__all__ = ["RunConfig", "main"]


@dataclass
class RunConfig:
    """TrainConfig plus file locations; see docs/README for the YAML keys."""

    features_path: str = ""
    tags_path: str = ""
    labels_path: str | None = None
    output_dir: str = ""
    ontology_q: int = 3
    standardize: bool = True
    k: int = 0
    alpha: float = 8.0
    gamma: float = 100.0
    lambda_: float = 1.0
    l: int = 1
    batch_size: int = 256
    learning_rate: float = 1e-3
    pretrain_epochs: int = 20
    epochs_per_outer_iter: int = 10
    max_outer_iters: int = 20
    convergence_tol: float = 1e-4
    seed: int = 0
    hidden_widths: tuple[int, ...] = (1200, 1200)
    use_mask: bool = True
    verbose: bool = False

    def validate(self) -> None:
        for name in ("features_path", "tags_path", "output_dir"):
            if not getattr(self, name):
                raise ValueError(f"config is missing required key {name!r}")
        if self.ontology_q < 1:
            raise ValueError("ontology_q must be at least 1")
        self.train_config().validate()

    def train_config(self) -> TrainConfig:
        keep = {f.name for f in fields(TrainConfig)}
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.name in keep}
        return TrainConfig(**values)


def _load_run_config(path: str | None, overrides: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config must be a key/value mapping")
        for key, value in doc.items():
            if key not in known:
                raise ValueError(f"{path}: unknown config key {key!r}")
            merged[key] = value
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    if "hidden_widths" in merged:
        widths = merged["hidden_widths"]
        if isinstance(widths, str):
            widths = [int(w) for w in widths.split(",") if w.strip()]
        merged["hidden_widths"] = tuple(int(w) for w in widths)
    return RunConfig(**merged)


def _read_label_lines(path) -> list[str]:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    labels = [ln for ln in lines if ln]
    if not labels:
        raise LoadError(f"{path}: no labels found")
    return labels


def _read_int_labels(path) -> np.ndarray:
    out = []
    for i, token in enumerate(_read_label_lines(path), start=1):
        try:
            out.append(int(token))
        except ValueError:
            raise LoadError(f"{path}: line {i} is not an integer label: {token!r}") from None
    return np.asarray(out, dtype=np.int64)


def _factorize(labels: list[str]) -> np.ndarray:
    _, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return inverse.astype(np.int64)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_labels(path: Path, labels) -> None:
    path.write_text("".join(f"{int(x)}\n" for x in labels))


def _cluster_names(assignment: np.ndarray, class_lines: list[str] | None, k: int) -> list[str]:
    names = []
    for i in range(k):
        if class_lines is not None and np.any(assignment == i):
            names.append(majority_name(assignment, class_lines, i))
        else:
            names.append(f"cluster-{i}")
    return names


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "features_path", "tags_path", "labels_path", "output_dir",
            "ontology_q", "standardize", "k", "alpha", "gamma", "lambda_",
            "l", "batch_size", "learning_rate", "pretrain_epochs",
            "epochs_per_outer_iter", "max_outer_iters", "convergence_tol",
            "seed", "hidden_widths", "use_mask", "verbose",
        )
    }
    cfg = _load_run_config(args.config, overrides)
    cfg.validate()

    features = load_features(cfg.features_path)
    tags = load_tags(cfg.tags_path)
    if features.n != tags.n:
        raise ValueError(
            f"features ({features.n} rows) and tags ({tags.n} rows) disagree"
        )
    class_lines = _read_label_lines(cfg.labels_path) if cfg.labels_path else None
    if class_lines is not None and len(class_lines) != features.n:
        raise ValueError("ground-truth label count does not match features")

    if cfg.standardize:
        features = standardize_features(features)

    model, result, report = train(features, tags, cfg.train_config())

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.npz")
    _write_labels(out / "assignments.txt", report.final_assignment)

    last = report.outer_iterations[-1]
    coverage = CoverageMatrix(
        q=np.asarray(last.coverage), cluster_sizes=np.asarray(last.cluster_sizes)
    )
    names = _cluster_names(report.final_assignment, class_lines, cfg.k)
    _write_json(
        out / "explanation.json",
        explanation_report(result, coverage, tags.tag_names, cfg.alpha, names),
    )
    _write_json(out / "train_report.json", report.to_dict())

    if class_lines is not None:
        truth = _factorize(class_lines)
        metrics = MetricReport(
            nmi=nmi(report.final_assignment, truth),
            acc=clustering_accuracy(report.final_assignment, truth),
        )
        try:
            metrics.tc, metrics.itf = explanation_quality(
                tags.entries, report.final_assignment, result.descriptors
            )
        except ValueError as exc:
            print(f"warning: skipping tc/itf: {exc}", file=sys.stderr)
        _write_json(out / "metrics.json", metrics.to_dict())
    return 0


def cmd_explain(args) -> int:
    if args.alpha is None or args.alpha <= 0:
        raise ValueError("alpha must be positive")
    labels = _read_int_labels(args.assignments)
    tags = load_tags(args.tags)
    if labels.shape[0] != tags.n:
        raise ValueError(
            f"assignments ({labels.shape[0]} rows) and tags ({tags.n} rows) disagree"
        )
    if labels.min() < 0:
        raise ValueError("cluster labels must be non-negative")
    k = int(labels.max()) + 1
    coverage = compute_coverage(impute_tags(tags), labels, k)
    result = solve_with_beta_search(coverage, args.alpha)
    payload = explanation_report(result, coverage, tags.tag_names, args.alpha)
    _write_json(Path(args.out), payload)
    return 0


def cmd_evaluate(args) -> int:
    pred = _read_int_labels(args.assignments)
    truth = _factorize(_read_label_lines(args.truth))
    if pred.shape[0] != truth.shape[0]:
        raise ValueError("assignments and truth labels disagree on length")
    metrics = MetricReport(nmi=nmi(pred, truth), acc=clustering_accuracy(pred, truth))
    if args.explanation is not None:
        if args.tags is None:
            raise ValueError("tc/itf need --tags alongside --explanation")
        with open(args.explanation) as fh:
            explanation = json.load(fh)
        tags = load_tags(args.tags)
        if tags.n != pred.shape[0]:
            raise ValueError("tags and assignments disagree on length")
        descriptor_sets = [c["descriptor_indices"] for c in explanation["clusters"]]
        metrics.tc, metrics.itf = explanation_quality(tags.entries, pred, descriptor_sets)
    _write_json(Path(args.out), metrics.to_dict())
    return 0


def cmd_ontology(args) -> int:
    with open(args.explanation) as fh:
        explanation = json.load(fh)
    clusters = explanation["clusters"]
    descriptor_sets = [set(c["descriptor_indices"]) for c in clusters]
    names = [c.get("name", f"cluster-{c['index']}") for c in clusters]
    graph = build_ontology(descriptor_sets, args.q, names)
    Path(args.out).write_text(export_dot(graph))
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        k_true=args.k,
        n_per_cluster=args.n_per_cluster,
        d=args.d,
        m=args.m,
        informative_tags=args.informative_tags,
        tag_flip_noise=args.tag_flip_noise,
        cluster_spread=args.cluster_spread,
        annotation_ratio=args.annotation_ratio,
        seed=args.seed,
    )
    features, tags, truth = generate_synthetic(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    header = ",".join(f"f{j}" for j in range(features.d))
    rows = [header] + [",".join(repr(v) for v in row) for row in features.values]
    (out / "features.csv").write_text("\n".join(rows) + "\n")

    def tag_cell(v):
        return "?" if np.isnan(v) else str(int(v))

    rows = [",".join(tags.tag_names)]
    rows += [",".join(tag_cell(v) for v in row) for row in tags.entries]
    (out / "tags.csv").write_text("\n".join(rows) + "\n")

    _write_labels(out / "truth.txt", truth)
    return 0


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagclust",
        description="Cluster feature vectors and describe each cluster with tags.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the full clustering + explanation loop")
    p.add_argument("--config", help="YAML config file; flags override its keys")
    p.add_argument("--features", dest="features_path")
    p.add_argument("--tags", dest="tags_path")
    p.add_argument("--labels", dest="labels_path", help="optional ground-truth classes")
    p.add_argument("--out-dir", dest="output_dir")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--l", type=int, help="together-pairs per anchor")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--epochs-per-outer-iter", type=int)
    p.add_argument("--max-outer-iters", type=int)
    p.add_argument("--convergence-tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden-widths", help="comma-separated, e.g. 64,64")
    p.add_argument("--ontology-q", type=int)
    p.add_argument("--no-mask", dest="use_mask", action="store_const", const=False,
                   help="keep the tag mask at identity (ablation)")
    p.add_argument("--no-standardize", dest="standardize", action="store_const", const=False)
    p.add_argument("--verbose", action="store_const", const=True)
    p.set_defaults(func=cmd_train, use_mask=None, standardize=None, verbose=None)

    p = sub.add_parser("explain", help="describe an existing clustering")
    p.add_argument("--assignments", required=True, help="one cluster label per line")
    p.add_argument("--tags", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="score a clustering (and its explanation)")
    p.add_argument("--assignments", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--explanation", help="explanation JSON for tc/itf")
    p.add_argument("--tags", help="tag CSV for tc/itf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ontology", help="emit the shared-tag cluster graph as .dot")
    p.add_argument("--explanation", required=True)
    p.add_argument("--q", type=int, default=3, help="minimum shared tags per edge")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ontology)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--n-per-cluster", type=int, default=100)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--informative-tags", type=int, default=8)
    p.add_argument("--tag-flip-noise", type=float, default=0.05)
    p.add_argument("--cluster-spread", type=float, default=1.0)
    p.add_argument("--annotation-ratio", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, LoadError, OSError, RuntimeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
