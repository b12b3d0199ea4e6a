"""End-to-end training loop: pre-train the clustering network, then
alternate between solving the cluster-description ILP (which refreshes the
tag mask) and further network epochs driven by mined together-pairs.

The run is a deterministic function of (data, config, seed): model init,
per-epoch shuffles, and the ILP search all derive from the master seed.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import FeatureMatrix, TagMatrix, impute_tags
from .explain import (
    CoverageMatrix,
    ExplanationResult,
    apply_mask,
    compute_coverage,
    solve_with_beta_search,
)
from .losses import overall_loss
from .net import MlpModel, adam_step, backward, forward, init_adam, init_model
from .pairing import generate_pairs

__all__ = [
    "TrainConfig",
    "OuterIteration",
    "TrainReport",
    "pretrain",
    "train",
    "assign_clusters",
]


@dataclass
class TrainConfig:
    k: int
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
    use_mask: bool = True   # False replays the run with the mask pinned to identity
    verbose: bool = False

    def validate(self) -> None:
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda must be non-negative")
        if self.l < 1:
            raise ValueError("l must be at least 1")
        for name in ("batch_size", "epochs_per_outer_iter", "max_outer_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden_widths must be positive")


@dataclass
class OuterIteration:
    iteration: int
    beta_star: int
    objective: int
    descriptors: list[list[int]]
    coverage: list[list[float]]       # Q actually used for this iteration's ILP
    cluster_sizes: list[int]
    allocation: list[list[int]]       # W*
    epoch_losses: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    loss_per_epoch: list[float] = field(default_factory=list)
    pretrain_epochs: int = 0
    outer_iterations: list[OuterIteration] = field(default_factory=list)
    final_assignment: np.ndarray | None = None
    convergence_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "loss_per_epoch": self.loss_per_epoch,
            "pretrain_epochs": self.pretrain_epochs,
            "outer_iterations": [o.to_dict() for o in self.outer_iterations],
            "final_assignment": (
                None if self.final_assignment is None
                else [int(x) for x in self.final_assignment]
            ),
            "convergence_reason": self.convergence_reason,
        }


def _epoch_rng(seed: int, epoch_index: int) -> np.random.Generator:
    # Fresh stream per epoch keeps shuffles reproducible regardless of how
    # many optimizer steps preceded them.
    return np.random.default_rng([seed, 1, epoch_index])


def _run_epoch(model, state, features, masked_tags, config, epoch_index) -> float:
    """One shuffled pass; returns the sample-weighted mean overall loss."""
    n = features.shape[0]
    perm = _epoch_rng(config.seed, epoch_index).permutation(n)
    total = 0.0
    for start in range(0, n, config.batch_size):
        idx = perm[start:start + config.batch_size]
        batch = features[idx]
        probs, cache = forward(model, batch)
        pairs = generate_pairs(masked_tags[idx], probs, config.gamma, config.l) \
            if idx.size >= 2 else []
        loss = overall_loss(probs, pairs, config.lambda_)
        grads = backward(model, cache, loss.grad)
        adam_step(model, grads, state)
        total += loss.value * idx.size
    return total / n


def pretrain(model: MlpModel, features: FeatureMatrix, tags: TagMatrix,
             config: TrainConfig, state=None, report: TrainReport | None = None) -> MlpModel:
    """Train for pretrain_epochs with the mask at identity (all tags active)."""
    config.validate()
    imputed = impute_tags(tags)
    if state is None:
        state = init_adam(model, learning_rate=config.learning_rate)
    x = features.values
    for epoch in range(config.pretrain_epochs):
        loss = _run_epoch(model, state, x, imputed.values, config, epoch)
        if report is not None:
            report.loss_per_epoch.append(loss)
        if config.verbose:
            print(f"pretrain epoch {epoch}: loss {loss:.6f}", file=sys.stderr)
    if report is not None:
        report.pretrain_epochs = config.pretrain_epochs
    return model


def assign_clusters(model: MlpModel, features: FeatureMatrix) -> np.ndarray:
    """argmax cluster per instance; ties resolve to the lowest index."""
    values = getattr(features, "values", features)
    probs, _ = forward(model, values)
    return probs.argmax(axis=1)


def _repair_empty_clusters(labels: np.ndarray, probs: np.ndarray, k: int) -> np.ndarray:
    """Give every empty cluster its highest-probability instance.

    Donor instances are never taken from singleton clusters, so one pass
    fixes all gaps; if a gap survives, abort loudly rather than skip.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    taken: set[int] = set()
    for cluster in np.flatnonzero(counts == 0):
        order = np.argsort(-probs[:, cluster], kind="stable")
        donor = next(
            (int(i) for i in order if i not in taken and counts[labels[i]] > 1),
            None,
        )
        if donor is None:
            raise RuntimeError(
                f"cannot repair empty cluster {cluster}: no donor instance available"
            )
        counts[labels[donor]] -= 1
        labels[donor] = cluster
        counts[cluster] += 1
        taken.add(donor)
    if (np.bincount(labels, minlength=k) == 0).any():
        raise RuntimeError("empty cluster survived repair")
    return labels


def train(features: FeatureMatrix, tags: TagMatrix, config: TrainConfig):
    """Full run; returns (model, final ExplanationResult, TrainReport).

    Stops when the allocation matrix repeats across consecutive outer
    iterations while the epoch-mean loss has stabilized, or at the
    iteration cap.
    """
    config.validate()
    if features.n < config.k:
        raise ValueError("need at least k instances")
    if features.n != tags.n:
        raise ValueError("features and tags disagree on instance count")

    imputed = impute_tags(tags)
    x = features.values
    model = init_model(features.d, config.k, config.seed, config.hidden_widths)
    state = init_adam(model, learning_rate=config.learning_rate)
    report = TrainReport()

    identity_mask = np.ones(tags.m, dtype=np.int64)
    for epoch in range(config.pretrain_epochs):
        loss = _run_epoch(model, state, x, imputed.values, config, epoch)
        report.loss_per_epoch.append(loss)
        if config.verbose:
            print(f"pretrain epoch {epoch}: loss {loss:.6f}", file=sys.stderr)
    report.pretrain_epochs = config.pretrain_epochs

    epoch_index = config.pretrain_epochs
    prev_allocation = None
    prev_loss = None
    result = None
    report.convergence_reason = f"max_outer_iters ({config.max_outer_iters}) reached"

    for outer in range(1, config.max_outer_iters + 1):
        probs, _ = forward(model, x)
        labels = _repair_empty_clusters(probs.argmax(axis=1), probs, config.k)
        coverage = compute_coverage(imputed, labels, config.k)
        result = solve_with_beta_search(coverage, config.alpha)
        mask = result.mask_diagonal if config.use_mask else identity_mask
        masked = apply_mask(imputed.values, mask)

        epoch_losses = []
        for _ in range(config.epochs_per_outer_iter):
            loss = _run_epoch(model, state, x, masked, config, epoch_index)
            report.loss_per_epoch.append(loss)
            epoch_losses.append(loss)
            epoch_index += 1
        if config.verbose:
            print(
                f"outer {outer}: beta*={result.beta_star} |W*|={result.objective} "
                f"loss {epoch_losses[-1]:.6f}",
                file=sys.stderr,
            )

        report.outer_iterations.append(OuterIteration(
            iteration=outer,
            beta_star=result.beta_star,
            objective=result.objective,
            descriptors=result.descriptors,
            coverage=coverage.q.tolist(),
            cluster_sizes=[int(s) for s in coverage.cluster_sizes],
            allocation=result.w.tolist(),
            epoch_losses=epoch_losses,
        ))

        current_loss = epoch_losses[-1]
        if prev_allocation is not None and np.array_equal(result.w, prev_allocation):
            rel = abs(current_loss - prev_loss) / max(abs(prev_loss), 1e-12)
            if rel < config.convergence_tol:
                report.convergence_reason = (
                    f"converged at outer iteration {outer}: allocation stable, "
                    f"relative loss change {rel:.2e}"
                )
                break
        prev_allocation = result.w
        prev_loss = current_loss

    report.final_assignment = assign_clusters(model, features)
    return model, result, report
