"""Reference computations written independently of the package internals.

Pure Python, no numpy: plain loops over lists, exact rationals where ties
matter.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

from previsit.models import AtomicAssertion, CausalNetwork

VOCAB = [
    "patient", "has", "reports", "cough", "fever", "welder", "dust", "exposure", "nodule",
    "chest", "ct", "shows", "dyspnea", "wheezing", "smoking", "history", "pneumoconiosis",
    "stage", "ii", "copd", "sputum", "blood", "pressure", "high", "dizziness", "glucose",
    "thirst", "fatigue", "hypertension", "diabetes", "no", "left", "lower", "lobe",
]
TIMES = ["", "", "3 days ago", "over 20 years ago", "4.5 years ago", "2 months ago"]


def py_cosine(u, v) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def py_edge_vector(net: CausalNetwork, edge, embed) -> list[float]:
    def node(i):
        a = net.nodes[i]
        text = f"{a.assert_}, {a.relative_time}" if a.relative_time else a.assert_
        v = list(embed(text).values)
        n = math.sqrt(sum(x * x for x in v))
        return [x / n for x in v]

    s, d = edge
    return node(s) + node(d)


def py_network_similarity(gk: CausalNetwork, gl: CausalNetwork, embed) -> float:
    total = 0.0
    for e in gk.edges:
        for f in gl.edges:
            total += py_cosine(py_edge_vector(gk, e, embed), py_edge_vector(gl, f, embed))
    return total / (len(gk.edges) * len(gl.edges))


def random_network(rng: random.Random, emr_id: str, max_nodes: int = 5, max_edges: int = 4, min_edges: int = 1) -> CausalNetwork:
    n = rng.randint(2, max_nodes)
    nodes = tuple(
        AtomicAssertion(i, " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 4))), rng.choice(TIMES))
        for i in range(n)
    )
    possible = [(s, d) for s in range(n) for d in range(n) if s != d]
    k = rng.randint(min_edges, min(max_edges, len(possible)))
    return CausalNetwork(emr_id, nodes, tuple(rng.sample(possible, k)))


def random_similarity(rng: random.Random, k: int, distinct: bool = True) -> list[list[float]]:
    vals = [[1.0] * k for _ in range(k)]
    used: set[float] = set()
    for i in range(k):
        for j in range(i + 1, k):
            while True:
                x = rng.uniform(-1.0, 1.0)
                if not distinct or x not in used:
                    break
            used.add(x)
            vals[i][j] = vals[j][i] = x
    return vals


def brute_agglomerate(sim, cutoff) -> list[list[int]]:
    """Average linkage from scratch each round, in exact rational arithmetic."""
    k = len(sim)
    dist = [[Fraction(1) - Fraction(sim[i][j]) for j in range(k)] for i in range(k)]
    cut = Fraction(cutoff)
    clusters = [[i] for i in range(k)]
    while len(clusters) > 1:
        candidates = []
        for a in range(len(clusters)):
            for b in range(len(clusters)):
                if a == b:
                    continue
                A, B = clusters[a], clusters[b]
                d = sum((dist[i][j] for i in A for j in B), Fraction(0)) / (len(A) * len(B))
                lo, hi = sorted((min(A), min(B)))
                candidates.append((d, lo, hi, a, b))
        d, _, _, a, b = min(candidates)
        if d > cut:
            break
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for x, c in enumerate(clusters) if x not in (a, b)] + [merged]
    return sorted(clusters)


def brute_medoid(members, sim) -> int:
    scores = []
    for k in members:
        s = sum((Fraction(1) - Fraction(sim[k][j]) for j in members if j != k), Fraction(0))
        scores.append((s, k))
    return min(scores)[1]


def respects_edges(order, edges) -> bool:
    pos = {v: i for i, v in enumerate(order)}
    return all(pos[s] < pos[d] for s, d in edges)
