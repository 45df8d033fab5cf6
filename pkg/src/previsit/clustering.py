"""Stage 2b: cluster personal networks into disease knowledge.

Networks are grouped by agglomerative clustering with average linkage over
``1 - similarity`` distances, stopping at a fixed distance cutoff. Each
cluster is summarized by its medoid network and weighted by its share of the
networks.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from .errors import EmptyCluster, InvalidCutoff, NoUsableNetworks
from .models import CausalNetwork, ClusterResult, DiseaseKnowledge, KnowledgeEntry, SimilarityMatrix
from .similarity import similarity_matrix

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF = 0.5


def _as_array(matrix) -> np.ndarray:
    values = matrix.values if isinstance(matrix, SimilarityMatrix) else matrix
    return np.asarray(values, dtype=float)


def agglomerate(sim, cutoff: float) -> list[list[int]]:
    """Average-linkage agglomeration on a similarity matrix.

    Starts from singletons and repeatedly merges the closest pair of clusters
    while their distance is at most ``cutoff``. Ties go to the pair whose
    smallest members sort first. Returns clusters ordered by smallest member,
    each sorted ascending. The diagonal is never read.
    """
    if not (0.0 <= cutoff <= 2.0):
        raise InvalidCutoff(f"cutoff must lie in [0, 2], got {cutoff}")
    dist = 1.0 - _as_array(sim)
    k = dist.shape[0]
    clusters: dict[int, list[int]] = {i: [i] for i in range(k)}  # keyed by smallest member
    link: dict[tuple[int, int], float] = {}

    def linkage(a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        d = link.get(key)
        if d is None:
            ca, cb = clusters[a], clusters[b]
            d = math.fsum(dist[np.ix_(ca, cb)].ravel().tolist()) / (len(ca) * len(cb))
            link[key] = d
        return d

    while len(clusters) > 1:
        keys = sorted(clusters)
        best: tuple[float, int, int] | None = None
        for x, a in enumerate(keys):
            for b in keys[x + 1 :]:
                d = linkage(a, b)
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        if d > cutoff:
            break
        merged = sorted(clusters.pop(a) + clusters.pop(b))
        link = {key: v for key, v in link.items() if a not in key and b not in key}
        clusters[merged[0]] = merged
    return [clusters[key] for key in sorted(clusters)]


def cluster_networks(matrix: SimilarityMatrix, cutoff: float = DEFAULT_CUTOFF) -> ClusterResult:
    if len(matrix) < 1:
        raise ValueError("cannot cluster an empty similarity matrix")
    groups = agglomerate(matrix, cutoff)
    assignments = {}
    for c, members in enumerate(groups):
        for i in members:
            assignments[matrix.network_ids[i]] = c
    # keep the matrix's network order
    assignments = {nid: assignments[nid] for nid in matrix.network_ids}
    return ClusterResult(assignments, len(groups), float(cutoff))


def medoid(cluster_members: Sequence[int], matrix) -> int:
    """Member with the smallest summed distance to the other members.

    The member's distance to itself is left out of the sum. Ties go to the
    lowest index.
    """
    if len(cluster_members) == 0:
        raise EmptyCluster("cannot take the medoid of an empty cluster")
    sim = _as_array(matrix)
    best: tuple[float, int] | None = None
    for k in cluster_members:
        s = math.fsum(1.0 - sim[k, j] for j in cluster_members if j != k)
        if best is None or (s, k) < best:
            best = (s, k)
    return best[1]


def cluster_weights(result: ClusterResult) -> list[float]:
    sizes = result.sizes()
    total = sum(sizes)
    return [n / total for n in sizes]


def knowledge_from_matrix(
    disease_code: str,
    nets: Sequence[CausalNetwork],
    matrix: SimilarityMatrix,
    cutoff: float = DEFAULT_CUTOFF,
) -> DiseaseKnowledge:
    """Cluster, pick medoids and weight clusters for networks already compared."""
    result = cluster_networks(matrix, cutoff)
    index = {nid: i for i, nid in enumerate(matrix.network_ids)}
    by_id = {n.emr_id: n for n in nets}
    weights = cluster_weights(result)
    entries = []
    for members, w in zip(result.members(), weights):
        center = medoid([index[m] for m in members], matrix)
        entries.append(KnowledgeEntry(by_id[matrix.network_ids[center]], w, len(members)))
    entries.sort(key=lambda e: (-e.weight, e.medoid.emr_id))
    return DiseaseKnowledge(disease_code, tuple(entries), float(cutoff))


def build_disease_knowledge(
    disease_code: str,
    nets: Sequence[CausalNetwork],
    embedder,
    cutoff: float = DEFAULT_CUTOFF,
) -> DiseaseKnowledge:
    if not (0.0 <= cutoff <= 2.0):
        raise InvalidCutoff(f"cutoff must lie in [0, 2], got {cutoff}")
    usable = usable_networks(nets, disease_code)
    return knowledge_from_matrix(disease_code, usable, similarity_matrix(usable, embedder), cutoff)


def usable_networks(nets: Sequence[CausalNetwork], disease_code: str = "") -> list[CausalNetwork]:
    usable = [n for n in nets if n.edges]
    dropped = len(nets) - len(usable)
    if dropped:
        logger.warning("%s: dropping %d network(s) without edges", disease_code or "corpus", dropped)
    if not usable:
        raise NoUsableNetworks(f"{disease_code or 'corpus'}: no networks with edges to cluster")
    return usable
