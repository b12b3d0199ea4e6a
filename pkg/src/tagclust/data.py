"""Loading, validation, imputation, and synthesis of feature/tag datasets.

Features are numeric CSV with a header row, one instance per row.  Tags are
ternary CSV over {0, 1, ?} where "?" marks a missing annotation.  Missing
entries are filled by per-tag mean imputation over the observed entries of
the whole dataset, computed once up front.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LoadError",
    "FeatureMatrix",
    "TagMatrix",
    "ImputedTagMatrix",
    "SyntheticSpec",
    "load_features",
    "load_tags",
    "impute_tags",
    "generate_synthetic",
    "standardize_features",
]

MISSING_TOKEN = "?"

# Centers of synthetic clusters are laid out on coordinate axes with this
# pairwise separation, so blob overlap is controlled purely by cluster_spread.
_CENTER_SEPARATION = 10.0


class LoadError(ValueError):
    """A data file could not be parsed into a valid matrix."""


@dataclass
class FeatureMatrix:
    """N x D real-valued feature embeddings, validated finite."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("feature matrix needs at least one row and one column")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains NaN or Inf entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class TagMatrix:
    """N x M ternary tag annotations: 1.0 present, 0.0 absent, NaN missing."""

    entries: np.ndarray
    tag_names: list[str]

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2:
            raise ValueError(f"tag matrix must be 2-D, got shape {self.entries.shape}")
        observed = ~np.isnan(self.entries)
        valid = np.isin(self.entries[observed], (0.0, 1.0))
        if not np.all(valid):
            raise ValueError("tag entries must be 0, 1, or missing (NaN)")
        if len(self.tag_names) != self.entries.shape[1]:
            raise ValueError(
                f"{len(self.tag_names)} tag names for {self.entries.shape[1]} columns"
            )

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]

    @property
    def annotation_ratio(self) -> float:
        """Fraction of entries that are observed (non-missing)."""
        return float(np.count_nonzero(~np.isnan(self.entries))) / self.entries.size


@dataclass
class ImputedTagMatrix:
    """Tag matrix with missing entries replaced by per-column observed means."""

    values: np.ndarray
    source: TagMatrix
    column_means: np.ndarray


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded Gaussian-blob dataset with cluster-indicator tags."""

    k_true: int
    n_per_cluster: int
    d: int
    m: int
    informative_tags: int
    tag_flip_noise: float
    cluster_spread: float
    annotation_ratio: float
    seed: int

    def __post_init__(self):
        for name in ("k_true", "n_per_cluster", "d", "m", "informative_tags"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.informative_tags > self.m:
            raise ValueError("informative_tags cannot exceed total tag count")
        for name in ("tag_flip_noise", "annotation_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.cluster_spread < 0.0:
            raise ValueError("cluster_spread must be non-negative")


def load_features(path) -> FeatureMatrix:
    """Parse a numeric CSV (header + numeric body) into a FeatureMatrix.

    Raises LoadError naming the offending row/column on parse failure,
    ragged rows, non-finite values, or an empty body.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        width = len(header)
        rows = []
        for idx, cells in enumerate(reader, start=1):
            if len(cells) != width:
                raise LoadError(
                    f"{path}: ragged row {idx} has {len(cells)} cells, expected {width}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                col = next(i for i, c in enumerate(cells) if not _is_float(c))
                raise LoadError(
                    f"{path}: non-numeric value {cells[col]!r} at row {idx}, "
                    f"column {header[col]!r}"
                ) from None
    if not rows:
        raise LoadError(f"{path}: no instances (header only)")
    values = np.asarray(rows, dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise LoadError(f"{path}: non-finite value at row {r + 1}, column {header[c]!r}")
    return FeatureMatrix(values)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_tags(path) -> TagMatrix:
    """Parse a ternary CSV whose header names the tags and whose cells are 0/1/?."""
    mapping = {"0": 0.0, "1": 1.0, MISSING_TOKEN: np.nan}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        width = len(header)
        rows = []
        for idx, cells in enumerate(reader, start=1):
            if len(cells) != width:
                raise LoadError(
                    f"{path}: ragged row {idx} has {len(cells)} cells, expected {width}"
                )
            try:
                rows.append([mapping[c.strip()] for c in cells])
            except KeyError as exc:
                col = next(i for i, c in enumerate(cells) if c.strip() not in mapping)
                raise LoadError(
                    f"{path}: tag cell must be 0, 1, or '?', got {exc.args[0]!r} "
                    f"at row {idx}, column {header[col]!r}"
                ) from None
    if not rows:
        raise LoadError(f"{path}: no instances (header only)")
    tags = TagMatrix(np.asarray(rows, dtype=np.float64), list(header))
    if tags.annotation_ratio == 0.0:
        warnings.warn(f"{path}: every tag entry is missing", stacklevel=2)
    return tags


def impute_tags(tags: TagMatrix) -> ImputedTagMatrix:
    """Replace missing entries with the per-tag mean over observed entries.

    A tag with no observed entries imputes to 0 and triggers a warning.
    Observed positions keep their original 0/1 values.
    """
    observed = ~np.isnan(tags.entries)
    counts = observed.sum(axis=0)
    sums = np.where(observed, tags.entries, 0.0).sum(axis=0)
    means = np.divide(sums, counts, out=np.zeros(tags.m), where=counts > 0)
    empty = counts == 0
    if empty.any():
        names = [tags.tag_names[j] for j in np.flatnonzero(empty)]
        warnings.warn(
            f"tags with no observed entries imputed as 0: {names}", stacklevel=2
        )
    values = np.where(observed, tags.entries, means[None, :])
    return ImputedTagMatrix(values=values, source=tags, column_means=means)


def generate_synthetic(spec: SyntheticSpec):
    """Build a seeded blob dataset: (FeatureMatrix, TagMatrix, true labels).

    Features are isotropic Gaussian blobs (std = cluster_spread) at distinct
    axis-aligned centers.  The first ``informative_tags`` tags indicate the
    true cluster (tag j marks cluster j mod k_true), each bit flipped with
    probability ``tag_flip_noise``; remaining tags are fair coin flips.
    Every entry is then masked missing with probability 1 - annotation_ratio.
    """
    k, n_per, d, m = spec.k_true, spec.n_per_cluster, spec.d, spec.m
    n = k * n_per
    rng = np.random.default_rng(spec.seed)

    centers = np.zeros((k, d))
    for i in range(k):
        centers[i, i % d] = _CENTER_SEPARATION * (1 + i // d)
    labels = np.repeat(np.arange(k), n_per)
    noise = rng.normal(0.0, 1.0, size=(n, d))
    features = centers[labels] + spec.cluster_spread * noise

    indicators = (labels[:, None] == (np.arange(spec.informative_tags) % k)[None, :])
    flips = rng.random((n, spec.informative_tags)) < spec.tag_flip_noise
    informative = np.logical_xor(indicators, flips).astype(np.float64)
    coins = rng.integers(0, 2, size=(n, m - spec.informative_tags)).astype(np.float64)
    tags = np.concatenate([informative, coins], axis=1)

    missing = rng.random((n, m)) >= spec.annotation_ratio
    tags[missing] = np.nan

    names = [f"tag{j}" for j in range(m)]
    return FeatureMatrix(features), TagMatrix(tags, names), labels


def standardize_features(features: FeatureMatrix) -> FeatureMatrix:
    """Per-column zero mean, unit variance; zero-variance columns map to 0."""
    if features.n < 2:
        raise ValueError("standardization needs at least 2 instances")
    values = features.values
    centered = values - values.mean(axis=0)
    std = values.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    return FeatureMatrix(centered / scale)
