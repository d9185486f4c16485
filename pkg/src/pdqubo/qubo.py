"""QUBO problems with a cardinality penalty, and coefficient-matrix builders.

Energy convention::

    Y(x) = x^T Q x + w * (sum(x) - k)^2

with ``Q`` symmetric, so an off-diagonal pair ``(i, j)`` contributes
``Q_ij + Q_ji = 2 Q_ij`` when both bits are set. ``k=None`` drops the
penalty term; ``w=inf`` turns the penalty into a hard constraint.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counterfactual import CounterfactualProfile
from .dataset import InteractionMatrix, ItemFeatureMatrix
from .errors import ConfigError, DataError, QMatrixError
from .recsys import DEFAULT_NEIGHBORS, single_feature_scores

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """Coefficient matrix plus optional cardinality target.

    ``penalty_weight`` accepts a number, ``math.inf`` (hard constraint) or
    ``"auto"`` (see :func:`auto_penalty_weight`). ``count_pairs_once``
    halves off-diagonal entries so each selected pair counts ``Q_ij`` once.
    """

    q: np.ndarray
    k: int | None = None
    penalty_weight: float = 1.0
    count_pairs_once: bool = False

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise QMatrixError(f"coefficient matrix must be square, got shape {q.shape}")
        validate(q)
        q = (q + q.T) / 2.0  # exact for already-symmetric input
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.k is not None:
            if not 0 <= self.k <= q.shape[0]:
                raise ConfigError(f"k={self.k} outside [0, {q.shape[0]}]")
            object.__setattr__(self, "k", int(self.k))
        if isinstance(self.penalty_weight, str):
            if self.penalty_weight != "auto":
                raise ConfigError(f"unknown penalty weight {self.penalty_weight!r}")
            object.__setattr__(self, "penalty_weight", auto_penalty_weight(q))
        object.__setattr__(self, "penalty_weight", float(self.penalty_weight))
        if not self.penalty_weight >= 0:
            raise ConfigError("penalty_weight must be nonnegative")

    @property
    def size(self) -> int:
        return self.q.shape[0]

    @property
    def hard(self) -> bool:
        """Cardinality enforced as a constraint rather than a penalty."""
        return self.k is not None and math.isinf(self.penalty_weight)

    def coupling(self) -> np.ndarray:
        """Symmetric matrix ``M`` with ``x^T M x`` the unpenalized objective."""
        if not self.count_pairs_once:
            return self.q
        diag = np.diag(np.diag(self.q))
        return diag + (self.q - diag) / 2.0

    def expanded(self):
        """``(A, offset)`` with ``Y(x) = x^T A x + offset`` for binary ``x``.

        Uses ``sum(x)^2 = x^T 1 1^T x`` and ``x_i^2 = x_i``. For hard
        problems the penalty is left out (it is zero on the feasible set).
        """
        m = self.coupling()
        if self.k is None or self.hard or self.penalty_weight == 0:
            return m.copy(), 0.0
        w, k, n = self.penalty_weight, self.k, self.size
        a = m + w * (np.ones((n, n)) - 2.0 * k * np.eye(n))
        return a, w * k * k

    def with_penalty(self, weight) -> "QuboProblem":
        return QuboProblem(self.q, self.k, weight, self.count_pairs_once)

    def with_k(self, k) -> "QuboProblem":
        return QuboProblem(self.q, k, self.penalty_weight, self.count_pairs_once)


def auto_penalty_weight(q) -> float:
    """``max(1, max|Q| * size)``; large enough to dominate any single coupling."""
    q = np.asarray(q)
    w = max(1.0, float(np.abs(q).max(initial=0.0)) * q.shape[0])
    logger.info("auto-scaled penalty weight %.6g for size %d", w, q.shape[0])
    return w


def energy(problem: QuboProblem, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != problem.size:
        raise ValueError(f"solution length {x.size} does not match problem size {problem.size}")
    y = float(x @ problem.coupling() @ x)
    if problem.k is None:
        return y
    dev = float(x.sum()) - problem.k
    if problem.hard:
        return y if dev == 0 else math.inf
    return y + problem.penalty_weight * dev * dev


def energies(problem: QuboProblem, xs) -> np.ndarray:
    """Row-wise energy of a batch of solutions."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    y = np.einsum("si,ij,sj->s", xs, problem.coupling(), xs)
    if problem.k is None:
        return y
    dev = xs.sum(axis=1) - problem.k
    if problem.hard:
        return np.where(dev == 0, y, np.inf)
    return y + problem.penalty_weight * dev * dev


# --- builders ----------------------------------------------------------------


def build_pdqubo(profile: CounterfactualProfile) -> np.ndarray:
    """Diagonal ``-E_i``, off-diagonal ``-E_ij``."""
    pairs = np.asarray(profile.pairs, dtype=np.float64)
    if not np.array_equal(pairs, pairs.T):
        raise QMatrixError("profile pair matrix is not symmetric")
    q = -pairs.copy()
    np.fill_diagonal(q, -np.asarray(profile.singles, dtype=np.float64))
    return q


def _labels01(samples) -> np.ndarray:
    y = np.asarray(samples)[:, 2].astype(np.int64)
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return y


def _plogp_ratio(joint, num, den):
    """Elementwise ``joint * log(joint * num / den)``, zero where ``joint`` is 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint * num / den), 0.0)
    return terms


def mutual_information(x, y) -> np.ndarray:
    """Plug-in MI in nats between each binary column of ``x`` and binary ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    xs = (1.0 - x, x)
    ys = (1.0 - y, y)
    total = np.zeros(x.shape[1])
    for a in (0, 1):
        pa = xs[a].sum(axis=0) / n
        for c in (0, 1):
            pc = ys[c].sum() / n
            pac = ys[c] @ xs[a] / n
            total += _plogp_ratio(pac, 1.0, pa * pc)
    return total


def conditional_mutual_information(x, y) -> np.ndarray:
    """``C[i, j] = I(x_i; y | x_j)`` in nats, plug-in estimate."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    xs = (1.0 - x, x)
    ys = (1.0 - y, y)
    total = np.zeros((x.shape[1], x.shape[1]))
    for b in (0, 1):
        pb = xs[b].sum(axis=0) / n                        # p(x_j = b), indexed by j
        for a in (0, 1):
            pab = xs[a].T @ xs[b] / n                     # p(x_i = a, x_j = b)
            for c in (0, 1):
                pbc = ys[c] @ xs[b] / n                   # p(x_j = b, y = c)
                pabc = (xs[a] * ys[c][:, None]).T @ xs[b] / n
                total += _plogp_ratio(pabc, pb[None, :], pab * pbc[None, :])
    return total


def build_miqubo(features: ItemFeatureMatrix, samples) -> np.ndarray:
    """Relevance/conditional-relevance matrix from labeled samples.

    Features are binarized (nonzero -> 1) at each sample's item. Diagonal is
    ``-I(f_i; y)``; off-diagonal is ``-(I(f_i; y | f_j) + I(f_j; y | f_i)) / 2``.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise DataError("no labeled samples")
    y = _labels01(samples)
    if y.min() == y.max():
        raise DataError("uninformative labels: all samples share one label")
    x = (features.dense[samples[:, 1]] != 0).astype(np.float64)
    cmi = conditional_mutual_information(x, y)
    q = -(cmi + cmi.T) / 2.0
    np.fill_diagonal(q, -mutual_information(x, y))
    return q


def _pearson_columns(a, b):
    """Pearson correlation between columns of ``a`` and ``b``; constant columns give 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    na = np.sqrt((ac * ac).sum(axis=0))
    nb = np.sqrt((bc * bc).sum(axis=0))
    const_a = np.ptp(a, axis=0) == 0
    const_b = np.ptp(b, axis=0) == 0
    denom = np.outer(na, nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, (ac.T @ bc) / denom, 0.0)
    r[const_a, :] = 0.0
    r[:, const_b] = 0.0
    return np.clip(r, -1.0, 1.0)


def build_coqubo(features: ItemFeatureMatrix, samples) -> np.ndarray:
    """``Q_ii = -|rho(f_i, y)|`` and ``Q_ij = +|rho(f_i, f_j)|`` on raw values."""
    samples = np.asarray(samples)
    if samples.shape[0] < 2:
        raise DataError("correlation needs at least 2 samples")
    y = _labels01(samples).astype(np.float64)
    x = features.dense[samples[:, 1]]
    q = np.abs(_pearson_columns(x, x))
    q = np.triu(q) + np.triu(q, 1).T
    np.fill_diagonal(q, -np.abs(_pearson_columns(x, y[:, None])[:, 0]))
    return q


def median_threshold_predictions(scores) -> np.ndarray:
    """+1 where a column's score exceeds that column's median, else -1."""
    scores = np.asarray(scores, dtype=np.float64)
    med = np.median(scores, axis=0)
    return np.where(scores > med, 1.0, -1.0)


def boosting_predictions(
    features: ItemFeatureMatrix,
    train: InteractionMatrix,
    samples,
    n_neighbors: int = DEFAULT_NEIGHBORS,
) -> np.ndarray:
    """Single-feature Item-KNN weak predictions in {-1, +1}, shape ``(N, n)``."""
    samples = np.asarray(samples)
    scores = single_feature_scores(features, train, samples[:, 0], samples[:, 1], n_neighbors)
    return median_threshold_predictions(scores)


def build_boosting(predictions, labels, regularizer: float = 0.0) -> np.ndarray:
    """QBoost-style matrix from weak predictions ``s`` and labels ``y``.

    ``Q_ii = regularizer - (2/N) sum_t s_i(t) y(t)`` and
    ``Q_ij = (1/N) sum_t s_i(t) s_j(t)``. Labels in {0, 1} are mapped to {-1, +1}.
    """
    s = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if np.isin(y, (0.0, 1.0)).all():
        y = 2.0 * y - 1.0
    if s.shape[0] != y.size:
        raise DataError("predictions and labels differ in sample count")
    n_samples = y.size
    q = (s.T @ s) / n_samples
    q = np.triu(q) + np.triu(q, 1).T
    np.fill_diagonal(q, regularizer - 2.0 * (s.T @ y) / n_samples)
    return q


# --- validation and file formats --------------------------------------------


def validate(q) -> dict:
    """Check symmetry and finiteness; return summary statistics."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise QMatrixError(f"coefficient matrix must be square, got shape {q.shape}")
    bad = np.argwhere(~np.isfinite(q))
    if bad.size:
        i, j = bad[0]
        raise QMatrixError(f"non-finite entry at ({i}, {j}): {q[i, j]}")
    diff = np.abs(q - q.T)
    if diff.size and diff.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        i, j = sorted((int(i), int(j)))
        raise QMatrixError(f"asymmetric pair ({i}, {j}): {q[i, j]!r} vs {q[j, i]!r}")
    n = q.shape[0]
    diag = np.abs(np.diag(q))
    off = np.abs(q).sum(axis=1) - diag
    return {
        "size": n,
        "min": float(q.min()) if n else 0.0,
        "max": float(q.max()) if n else 0.0,
        "mean_abs_diagonal": float(diag.mean()) if n else 0.0,
        "mean_abs_offdiagonal": float(off.sum() / (n * (n - 1))) if n > 1 else 0.0,
        "diagonally_dominant_rows": int((diag >= off).sum()),
    }


def q_to_dict(q) -> dict:
    q = np.asarray(q, dtype=np.float64)
    il = np.tril_indices(q.shape[0])
    return {"size": q.shape[0], "format": "dense-sym", "values": q[il].tolist()}


def q_from_dict(data: dict) -> np.ndarray:
    if data.get("format") != "dense-sym":
        raise DataError(f"unsupported Q format {data.get('format')!r}")
    n = int(data["size"])
    vals = np.asarray(data["values"], dtype=np.float64)
    if vals.size != n * (n + 1) // 2:
        raise DataError(f"expected {n * (n + 1) // 2} values for size {n}, got {vals.size}")
    q = np.zeros((n, n))
    il = np.tril_indices(n)
    q[il] = vals
    q[(il[1], il[0])] = vals
    return q


def save_q(q, path) -> None:
    Path(path).write_text(json.dumps(q_to_dict(q)) + "\n")


def load_q(path) -> np.ndarray:
    return q_from_dict(json.loads(Path(path).read_text()))


def to_triplets(problem: QuboProblem) -> str:
    """Sampler wire format.

    Header ``qubo n=<size> k=<k|*> w=<weight>`` then ``i j value`` lines
    (``i <= j``, nonzero only). Values are polynomial coefficients: the
    off-diagonal line carries ``M_ij + M_ji`` so that
    ``Y = sum(value * x_i * x_j) + w * (sum(x) - k)^2``.
    """
    m = problem.coupling()
    k = "*" if problem.k is None else str(problem.k)
    lines = [f"qubo n={problem.size} k={k} w={problem.penalty_weight!r}"]
    for i in range(problem.size):
        if m[i, i] != 0.0:
            lines.append(f"{i} {i} {float(m[i, i])!r}")
        for j in range(i + 1, problem.size):
            if m[i, j] != 0.0:
                lines.append(f"{i} {j} {float(2.0 * m[i, j])!r}")
    return "\n".join(lines) + "\n"


def from_triplets(text: str) -> QuboProblem:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("qubo "):
        raise DataError("missing 'qubo' header line")
    try:
        head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        n = int(head["n"])
        k = None if head["k"] == "*" else int(head["k"])
        w = float(head["w"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"bad header {lines[0]!r}") from exc
    q = np.zeros((n, n))
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 'i j value', got {line!r}")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not 0 <= i <= j < n:
            raise DataError(f"line {lineno}: indices ({i}, {j}) invalid for n={n}")
        if i == j:
            q[i, i] += v
        else:
            q[i, j] += v / 2.0
            q[j, i] = q[i, j]
    return QuboProblem(q, k, w)
