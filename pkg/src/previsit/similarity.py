"""Edge embeddings and embedding-based similarity between causal networks.

An edge is embedded as the concatenation of its source and target node
embeddings. Two networks are compared by averaging the cosine similarity over
every (edge of one, edge of the other) pair.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyEdgeSet, ZeroVector
from .models import AtomicAssertion, CausalNetwork, SimilarityMatrix
from .providers import CachedEmbedder, Embedder


@dataclass(frozen=True)
class EdgeEmbedding:
    vector: tuple[float, ...]

    def array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)

    def __len__(self) -> int:
        return len(self.vector)


def node_text(a: AtomicAssertion, embed_timing: bool = True) -> str:
    return a.text(with_timing=embed_timing)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cannot compare vectors of shape {u.shape} and {v.shape}")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    if np.array_equal(u, v):
        return 1.0
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


class EdgeEmbedder:
    """Turns network edges into concatenated node embeddings, with caching.

    Node texts go through a :class:`CachedEmbedder`, so a text shared by
    several networks is embedded once. Per-network edge matrices are cached
    by network value (networks are immutable and hashable).
    """

    def __init__(self, embedder: Embedder, embed_timing: bool = True, normalize_nodes: bool = True):
        self.embedder = embedder if isinstance(embedder, CachedEmbedder) else CachedEmbedder(embedder)
        self.embed_timing = embed_timing
        self.normalize_nodes = normalize_nodes
        self._nets: dict[CausalNetwork, np.ndarray] = {}
        self._lock = threading.Lock()

    def _node_vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        vecs = [v.array() for v in self.embedder.embed_batch(list(texts))]
        if self.normalize_nodes:
            out = []
            for t, v in zip(texts, vecs):
                n = np.linalg.norm(v)
                if n == 0.0:
                    raise ZeroVector(f"zero embedding for {t!r}")
                out.append(v / n)
            return out
        return vecs

    def edge(self, net: CausalNetwork, edge: tuple[int, int]) -> EdgeEmbedding:
        s, d = edge
        n = len(net.nodes)
        if not (0 <= s < n and 0 <= d < n) or s == d:
            raise ValueError(f"edge {edge} is not valid in network {net.emr_id}")
        a, b = self._node_vectors([node_text(net.nodes[s], self.embed_timing), node_text(net.nodes[d], self.embed_timing)])
        return EdgeEmbedding(tuple(float(x) for x in np.concatenate([a, b])))

    def matrix(self, net: CausalNetwork) -> np.ndarray:
        """Edge embeddings of ``net`` stacked into an (edges, 2*dim) array."""
        with self._lock:
            cached = self._nets.get(net)
        if cached is not None:
            return cached
        if not net.edges:
            raise EmptyEdgeSet(f"network {net.emr_id} has no edges", net.emr_id)
        texts = [node_text(a, self.embed_timing) for a in net.nodes]
        used = sorted({i for e in net.edges for i in e})
        vecs = dict(zip(used, self._node_vectors([texts[i] for i in used])))
        m = np.stack([np.concatenate([vecs[s], vecs[d]]) for s, d in net.edges])
        m.setflags(write=False)
        with self._lock:
            m = self._nets.setdefault(net, m)
        return m

    def prefetch(self, nets: Sequence[CausalNetwork]) -> None:
        """Embed every node text of ``nets`` in one batch."""
        texts = {node_text(net.nodes[i], self.embed_timing) for net in nets for e in net.edges for i in e}
        if texts:
            self.embedder.embed_batch(sorted(texts))


def edge_embedding(net: CausalNetwork, edge: tuple[int, int], embedder, **kw) -> EdgeEmbedding:
    ee = embedder if isinstance(embedder, EdgeEmbedder) else EdgeEmbedder(embedder, **kw)
    return ee.edge(net, edge)


def _mean_pair_cosine(a: np.ndarray, b: np.ndarray) -> float:
    # Products are formed elementwise and reduced along the same axis for
    # (a, b) and (b, a), and fsum is order independent, so the result is
    # bit-identical when the arguments are swapped.
    na = np.sqrt((a * a).sum(-1))
    nb = np.sqrt((b * b).sum(-1))
    if not (na > 0).all() or not (nb > 0).all():
        raise ZeroVector("edge embedding with zero norm")
    dots = (a[:, None, :] * b[None, :, :]).sum(-1)
    cos = dots / (na[:, None] * nb[None, :])
    same = (a[:, None, :] == b[None, :, :]).all(-1)
    cos = np.where(same, 1.0, np.clip(cos, -1.0, 1.0))
    return math.fsum(cos.ravel().tolist()) / (a.shape[0] * b.shape[0])


def network_similarity(gk: CausalNetwork, gl: CausalNetwork, edge_embeds) -> float:
    """Mean cosine similarity over all cross-network edge pairs."""
    for g in (gk, gl):
        if not g.edges:
            raise EmptyEdgeSet(f"network {g.emr_id} has no edges", g.emr_id)
    ee = edge_embeds if isinstance(edge_embeds, EdgeEmbedder) else EdgeEmbedder(edge_embeds)
    return _mean_pair_cosine(ee.matrix(gk), ee.matrix(gl))


def similarity_matrix(nets: Sequence[CausalNetwork], embedder) -> SimilarityMatrix:
    """All pairwise network similarities; each unordered pair computed once."""
    for g in nets:
        if not g.edges:
            raise EmptyEdgeSet(f"network {g.emr_id} has no edges", g.emr_id)
    ee = embedder if isinstance(embedder, EdgeEmbedder) else EdgeEmbedder(embedder)
    ee.prefetch(nets)
    mats = [ee.matrix(g) for g in nets]
    k = len(nets)
    vals = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            s = _mean_pair_cosine(mats[i], mats[j])
            vals[i][j] = s
            vals[j][i] = s
    return SimilarityMatrix(tuple(g.emr_id for g in nets), tuple(tuple(r) for r in vals))
