"""Item-KNN base model, ranking metrics, and the masked-evaluator contract."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dataset import InteractionMatrix, ItemFeatureMatrix
from .errors import ConfigError, NoEvaluableUsersError

DEFAULT_NEIGHBORS = 100


class MetricKind(str, enum.Enum):
    NDCG = "ndcg"
    RECALL = "recall"


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind = MetricKind.NDCG
    cutoff: int = 10

    def __post_init__(self):
        if not isinstance(self.kind, MetricKind):
            object.__setattr__(self, "kind", MetricKind(str(self.kind).lower()))
        if self.cutoff < 1:
            raise ConfigError("metric cutoff must be >= 1")

    def __str__(self):
        return f"{self.kind.value}@{self.cutoff}"


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Row ``i`` of ``similarity`` holds item ``i``'s retained neighbors."""

    similarity: sp.csr_matrix
    n_neighbors: int
    features: ItemFeatureMatrix = field(repr=False)


@dataclass(frozen=True)
class EvalResult:
    metric_value: float
    per_user_values: np.ndarray
    users_evaluated: int
    users: np.ndarray

    def to_dict(self):
        return {
            "metric_value": self.metric_value,
            "users_evaluated": self.users_evaluated,
            "per_user_values": self.per_user_values.tolist(),
        }


def cosine_similarity(dense: np.ndarray):
    """Full item x item cosine and shared-support pattern, diagonal excluded.

    Returns ``(sim, support)``; ``sim`` is exactly symmetric. Products are
    accumulated over nonzeros only, so all-zero feature columns (masked or
    physically removed) leave every value bit-identical.
    """
    mat = sp.csr_matrix(np.asarray(dense, dtype=np.float64))
    gram = (mat @ mat.T).toarray()
    gram = np.triu(gram) + np.triu(gram, 1).T
    norms = np.sqrt(np.diag(gram))
    denom = np.outer(norms, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, gram / denom, 0.0)
    pattern = mat.copy()
    pattern.data = np.ones_like(pattern.data)
    support = (pattern @ pattern.T).toarray() > 0
    np.fill_diagonal(support, False)
    sim = np.clip(sim, -1.0, 1.0)
    sim[~support] = 0.0
    return sim, support


def train_item_knn(features: ItemFeatureMatrix, n_neighbors: int = DEFAULT_NEIGHBORS) -> TrainedModel:
    """Cosine Item-KNN over feature vectors, truncated to top-``n_neighbors`` per row.

    Only item pairs sharing at least one nonzero feature are candidates.
    Ties in similarity keep the lower item index.
    """
    if n_neighbors < 1:
        raise ConfigError("n_neighbors must be >= 1")
    n = features.num_items
    sim, support = cosine_similarity(features.dense)
    keyed = np.where(support, sim, -np.inf)
    # stable sort on the negated key keeps ascending item index among ties
    order = np.argsort(-keyed, axis=1, kind="stable")[:, :n_neighbors]
    rows = np.repeat(np.arange(n), order.shape[1])
    cols = order.reshape(-1)
    keep = support[rows, cols]
    rows, cols = rows[keep], cols[keep]
    similarity = sp.csr_matrix((sim[rows, cols], (rows, cols)), shape=(n, n))
    similarity.sort_indices()
    return TrainedModel(similarity, n_neighbors, features)


def score_users(model: TrainedModel, train: InteractionMatrix) -> sp.csr_matrix:
    """Aggregate neighbor similarity for every user; row-independent arithmetic."""
    return train.csr @ model.similarity


def _rank_row(scores_row, exclude, cutoff):
    cand = scores_row.indices
    vals = scores_row.data
    if exclude.size:
        keep = ~np.isin(cand, exclude)
        cand, vals = cand[keep], vals[keep]
    order = np.lexsort((cand, -vals))[:cutoff]
    return cand[order]


def recommend(model: TrainedModel, train: InteractionMatrix, user: int, cutoff: int) -> np.ndarray:
    """Top-``cutoff`` unseen items for ``user``.

    ``score(j)`` sums the similarity of ``j`` within the neighbor lists of
    the user's train items. Items with zero aggregate score are never
    recommended; ties go to the lower item index.
    """
    if not 0 <= user < train.num_users:
        raise IndexError(f"user {user} out of range")
    row = train.csr[user] @ model.similarity
    return _rank_row(row.tocsr(), train.profile(user), cutoff)


def ndcg_at(ranked: np.ndarray, relevant: np.ndarray, cutoff: int) -> float:
    hits = np.isin(ranked[:cutoff], relevant)
    if not hits.any():
        return 0.0
    ranks = np.nonzero(hits)[0] + 1
    dcg = np.sum(1.0 / np.log2(ranks + 1))
    ideal = np.arange(1, min(cutoff, relevant.size) + 1)
    idcg = np.sum(1.0 / np.log2(ideal + 1))
    return float(dcg / idcg)


def recall_at(ranked: np.ndarray, relevant: np.ndarray, cutoff: int) -> float:
    hits = np.isin(ranked[:cutoff], relevant).sum()
    return float(hits / relevant.size)


def evaluate(
    model: TrainedModel,
    train: InteractionMatrix,
    heldout: InteractionMatrix,
    metric: MetricSpec = MetricSpec(),
) -> EvalResult:
    """Mean per-user nDCG@N or Recall@N over users with held-out items."""
    counts = heldout.user_counts()
    users = np.nonzero(counts)[0]
    if users.size == 0:
        raise NoEvaluableUsersError("no evaluable users: held-out split is empty")
    scores = score_users(model, train)
    fn = ndcg_at if metric.kind is MetricKind.NDCG else recall_at
    values = np.empty(users.size)
    for k, u in enumerate(users):
        lo, hi = scores.indptr[u], scores.indptr[u + 1]
        row = sp.csr_matrix(
            (scores.data[lo:hi], scores.indices[lo:hi], [0, hi - lo]),
            shape=(1, scores.shape[1]),
        )
        ranked = _rank_row(row, train.profile(u), metric.cutoff)
        values[k] = fn(ranked, heldout.profile(u), metric.cutoff)
    return EvalResult(float(values.mean()), values, int(users.size), users)


def mask_features(features: ItemFeatureMatrix, mask) -> ItemFeatureMatrix:
    mask = list(mask)
    if not mask:
        return features
    bad = [m for m in mask if not 0 <= m < features.num_features]
    if bad:
        raise IndexError(f"mask indices out of range: {bad}")
    return features.without_features(mask)


def evaluate_with_mask(
    features: ItemFeatureMatrix,
    mask,
    train: InteractionMatrix,
    heldout: InteractionMatrix,
    metric: MetricSpec = MetricSpec(),
    n_neighbors: int = DEFAULT_NEIGHBORS,
) -> float:
    """Metric of the model rebuilt with the masked feature columns zeroed."""
    model = train_item_knn(mask_features(features, mask), n_neighbors)
    return evaluate(model, train, heldout, metric).metric_value


@dataclass(frozen=True, eq=False)
class ItemKNNEvaluator:
    """Evaluator contract: ``evaluator(mask) -> metric value``.

    Any base model plugs into the counterfactual engine by exposing the
    same call signature plus ``num_features``, ``split`` and ``fingerprint``.
    """

    features: ItemFeatureMatrix
    train: InteractionMatrix
    heldout: InteractionMatrix
    metric: MetricSpec = MetricSpec()
    n_neighbors: int = DEFAULT_NEIGHBORS
    split: str = "validation"

    @property
    def num_features(self) -> int:
        return self.features.num_features

    def __call__(self, mask=()) -> float:
        return evaluate_with_mask(
            self.features, mask, self.train, self.heldout, self.metric, self.n_neighbors
        )

    def with_features(self, features: ItemFeatureMatrix) -> "ItemKNNEvaluator":
        return ItemKNNEvaluator(
            features, self.train, self.heldout, self.metric, self.n_neighbors, self.split
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        f = self.features
        for arr in (f.items, f.features, f.values, self.train.users, self.train.items,
                    self.heldout.users, self.heldout.items):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(f"{f.num_items},{f.num_features},{self.metric},{self.n_neighbors},{self.split}".encode())
        return h.hexdigest()


def single_feature_scores(
    features: ItemFeatureMatrix,
    train: InteractionMatrix,
    users: np.ndarray,
    items: np.ndarray,
    n_neighbors: int = DEFAULT_NEIGHBORS,
) -> np.ndarray:
    """Item-KNN score of each (user, item) sample using one feature at a time.

    Returns an ``(N, num_features)`` array.
    """
    out = np.zeros((len(users), features.num_features))
    for d in range(features.num_features):
        keep = features.features == d
        single = ItemFeatureMatrix(
            features.num_items, features.num_features,
            features.items[keep], features.features[keep], features.values[keep],
        )
        scores = score_users(train_item_knn(single, n_neighbors), train)
        out[:, d] = np.asarray(scores[users, items]).reshape(-1)
    return out
