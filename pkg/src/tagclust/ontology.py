"""Cluster-level ontology graph: nodes are clusters, edges join clusters
whose descriptor sets share at least q tags."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

__all__ = ["OntologyNode", "OntologyGraph", "build_ontology", "export_dot", "majority_name"]


@dataclass(frozen=True)
class OntologyNode:
    index: int
    name: str
    descriptors: tuple


@dataclass
class OntologyGraph:
    nodes: list[OntologyNode]
    edges: set[tuple[int, int]]   # unordered pairs stored as (i, j) with i < j
    q_threshold: int


def build_ontology(descriptor_sets, q: int, names) -> OntologyGraph:
    """Edge (i, j) iff the two descriptor sets share at least q tags."""
    if q < 1:
        raise ValueError("q must be at least 1")
    sets = [set(s) for s in descriptor_sets]
    names = list(names)
    if len(names) != len(sets):
        raise ValueError("one display name per cluster required")
    nodes = [
        OntologyNode(index=i, name=names[i], descriptors=tuple(sorted(sets[i], key=str)))
        for i in range(len(sets))
    ]
    edges = {
        (i, j)
        for i in range(len(sets))
        for j in range(i + 1, len(sets))
        if len(sets[i] & sets[j]) >= q
    }
    return OntologyGraph(nodes=nodes, edges=edges, q_threshold=q)


def export_dot(graph: OntologyGraph) -> str:
    """Deterministic undirected .dot text: nodes by index, edges sorted."""
    lines = ["graph clusters {"]
    for node in sorted(graph.nodes, key=lambda n: n.index):
        label = node.name.replace('"', r"\"")
        lines.append(f'  c{node.index} [label="{label}"];')
    for i, j in sorted(graph.edges):
        lines.append(f"  c{i} -- c{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def majority_name(assignment, class_labels, cluster_index: int) -> str:
    """Most frequent class label among members; ties go lexicographically.

    Without class labels, falls back to "cluster-<index>".
    """
    labels = np.asarray(assignment, dtype=np.int64)
    members = np.flatnonzero(labels == cluster_index)
    if members.size == 0:
        raise ValueError(f"cluster {cluster_index} has no members")
    if class_labels is None:
        return f"cluster-{cluster_index}"
    counts = Counter(str(class_labels[i]) for i in members)
    top = max(counts.values())
    return min(name for name, c in counts.items() if c == top)
