"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's numerical code paths; each function
recomputes its quantity from first principles with plain loops.
"""

import itertools
import math

import numpy as np


def naive_energy(q, x, k=None, w=1.0):
    """Double-loop ``sum_ij Q_ij x_i x_j + w (sum x - k)^2``."""
    n = len(x)
    y = 0.0
    for i in range(n):
        for j in range(n):
            y += q[i][j] * x[i] * x[j]
    if k is not None:
        y += w * (sum(x) - k) ** 2
    return y


def brute_force_minimum(q, k=None, w=1.0):
    """Minimum energy and lexicographically smallest minimizer (bit 0 first)."""
    n = len(q)
    best, best_x = math.inf, None
    for bits in itertools.product((0, 1), repeat=n):
        e = naive_energy(q, bits, k, w)
        if e < best:
            best, best_x = e, bits
    return best, np.array(best_x)


def naive_cosine(dense):
    n = len(dense)
    sim = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            shared = any(dense[a][f] != 0 and dense[b][f] != 0 for f in range(len(dense[a])))
            if not shared:
                continue
            dot = sum(dense[a][f] * dense[b][f] for f in range(len(dense[a])))
            na = math.sqrt(sum(v * v for v in dense[a]))
            nb = math.sqrt(sum(v * v for v in dense[b]))
            sim[a, b] = dot / (na * nb)
    return sim


def naive_recommendations(dense, train_profiles, n_neighbors, cutoff):
    """Item-KNN top-N lists from the definitions, one user at a time.

    Neighbors of an item are the ``n_neighbors`` most similar items among
    those sharing a nonzero feature (ties to the lower index). A candidate's
    score sums its similarity within the neighbor lists of the user's items.
    """
    sim = naive_cosine(dense)
    n = len(dense)
    neighbors = []
    for a in range(n):
        cands = [b for b in range(n) if b != a and any(
            dense[a][f] != 0 and dense[b][f] != 0 for f in range(len(dense[a])))]
        cands.sort(key=lambda b: (-sim[a, b], b))
        neighbors.append(set(cands[:n_neighbors]))
    out = []
    for items in train_profiles:
        scores = {}
        for a in items:
            for b in neighbors[a]:
                scores[b] = scores.get(b, 0.0) + sim[a, b]
        ranked = sorted(
            (b for b, s in scores.items() if b not in items and s != 0.0),
            key=lambda b: (-scores[b], b),
        )
        out.append(ranked[:cutoff])
    return out


def naive_ndcg(ranked, relevant, cutoff):
    relevant = set(relevant)
    dcg = sum(1.0 / math.log2(r + 2) for r, item in enumerate(ranked[:cutoff]) if item in relevant)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(cutoff, len(relevant))))
    return dcg / idcg


def naive_recall(ranked, relevant, cutoff):
    return len(set(ranked[:cutoff]) & set(relevant)) / len(relevant)


def naive_metric(dense, train_profiles, heldout_profiles, n_neighbors, cutoff, kind="ndcg"):
    recs = naive_recommendations(dense, train_profiles, n_neighbors, cutoff)
    fn = naive_ndcg if kind == "ndcg" else naive_recall
    vals = [fn(r, h, cutoff) for r, h in zip(recs, heldout_profiles) if h]
    return sum(vals) / len(vals)


def plugin_entropy(*columns):
    """Plug-in joint entropy in nats of discrete columns."""
    rows = list(zip(*columns))
    n = len(rows)
    counts = {}
    for r in rows:
        counts[r] = counts.get(r, 0) + 1
    return -sum(c / n * math.log(c / n) for c in counts.values())


def plugin_mi(x, y):
    return plugin_entropy(x) + plugin_entropy(y) - plugin_entropy(x, y)


def plugin_cmi(x, y, z):
    """``I(x; y | z) = H(x,z) + H(y,z) - H(x,y,z) - H(z)``."""
    return plugin_entropy(x, z) + plugin_entropy(y, z) - plugin_entropy(x, y, z) - plugin_entropy(z)


def finite_difference_gradient(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g
