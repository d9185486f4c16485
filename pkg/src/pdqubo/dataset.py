"""Interaction and item-feature data: loading, splitting, sampling, synthesis.

Interactions are implicit-feedback pairs stored as sorted index arrays.
Item features are real-valued sparse triplets; zeros are implicit.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, EmptyDatasetError, ParseError

logger = logging.getLogger(__name__)

INTERACTIONS_HEADER = ["user_id", "item_id"]
FEATURES_HEADER = ["item_id", "feature_id", "value"]


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user x item matrix held as sorted (user, item) index pairs."""

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray
    user_ids: tuple = ()
    item_ids: tuple = ()
    duplicates_dropped: int = 0

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64).reshape(-1)
        items = np.asarray(self.items, dtype=np.int64).reshape(-1)
        if users.shape != items.shape:
            raise DataError("users and items arrays differ in length")
        if users.size:
            if users.min() < 0 or users.max() >= self.num_users:
                raise DataError("user index out of bounds")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of bounds")
        keys = users * max(self.num_items, 1) + items
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise DataError("duplicate (user, item) pair")
        object.__setattr__(self, "users", _frozen(users[order], np.int64))
        object.__setattr__(self, "items", _frozen(items[order], np.int64))

    @classmethod
    def from_pairs(cls, num_users, num_items, pairs, **kwargs):
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(num_users, num_items, pairs[:, 0], pairs[:, 1], **kwargs)

    def __len__(self):
        return int(self.users.size)

    @property
    def entries(self) -> set:
        return set(zip(self.users.tolist(), self.items.tolist()))

    @cached_property
    def csr(self) -> sp.csr_matrix:
        data = np.ones(len(self), dtype=np.float64)
        return sp.csr_matrix(
            (data, (self.users, self.items)), shape=(self.num_users, self.num_items)
        )

    @cached_property
    def _offsets(self):
        return np.searchsorted(self.users, np.arange(self.num_users + 1))

    def profile(self, user: int) -> np.ndarray:
        lo, hi = self._offsets[user], self._offsets[user + 1]
        return self.items[lo:hi]

    def user_counts(self) -> np.ndarray:
        return np.diff(self._offsets)

    def with_entries(self, users, items) -> "InteractionMatrix":
        """Same index space and id maps, different entries."""
        return InteractionMatrix(
            self.num_users, self.num_items, users, items, self.user_ids, self.item_ids
        )

    def union(self, other: "InteractionMatrix") -> "InteractionMatrix":
        return self.with_entries(
            np.concatenate([self.users, other.users]),
            np.concatenate([self.items, other.items]),
        )


@dataclass(frozen=True, eq=False)
class ItemFeatureMatrix:
    """Sparse item x feature values kept as (item, feature, value) triplets."""

    num_items: int
    num_features: int
    items: np.ndarray
    features: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        items = np.asarray(self.items, dtype=np.int64).reshape(-1)
        feats = np.asarray(self.features, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not (items.shape == feats.shape == vals.shape):
            raise DataError("triplet arrays differ in length")
        if items.size:
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of bounds")
            if feats.min() < 0 or feats.max() >= self.num_features:
                raise DataError("feature index out of bounds")
        if not np.all(np.isfinite(vals)):
            raise DataError("feature values must be finite")
        keep = vals != 0.0
        items, feats, vals = items[keep], feats[keep], vals[keep]
        keys = items * max(self.num_features, 1) + feats
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise DataError("duplicate (item, feature) cell")
        object.__setattr__(self, "items", _frozen(items[order], np.int64))
        object.__setattr__(self, "features", _frozen(feats[order], np.int64))
        object.__setattr__(self, "values", _frozen(vals[order], np.float64))

    @classmethod
    def from_dense(cls, dense) -> "ItemFeatureMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    def __len__(self):
        return int(self.values.size)

    @property
    def sparsity(self) -> float:
        cells = self.num_items * self.num_features
        if cells == 0:
            return 1.0
        return 1.0 - len(self) / cells

    @cached_property
    def dense(self) -> np.ndarray:
        out = np.zeros((self.num_items, self.num_features), dtype=np.float64)
        out[self.items, self.features] = self.values
        out.setflags(write=False)
        return out

    def without_features(self, masked: Sequence[int]) -> "ItemFeatureMatrix":
        """Copy with every value of the masked feature columns removed."""
        drop = np.isin(self.features, np.asarray(list(masked), dtype=np.int64))
        keep = ~drop
        return ItemFeatureMatrix(
            self.num_items,
            self.num_features,
            self.items[keep],
            self.features[keep],
            self.values[keep],
        )

    def column_nnz(self) -> np.ndarray:
        return np.bincount(self.features, minlength=self.num_features)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DataError(f"{name} must lie strictly between 0 and 1, got {value}")


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    features: ItemFeatureMatrix | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def interactions(self) -> InteractionMatrix:
        return self.train.union(self.validation).union(self.test)

    @property
    def train_and_validation(self) -> InteractionMatrix:
        return self.train.union(self.validation)

    def with_features(self, features: ItemFeatureMatrix) -> "DatasetBundle":
        return DatasetBundle(
            self.train, self.validation, self.test, features, dict(self.metadata)
        )


# --- loading -----------------------------------------------------------------


def _read_rows(path, header):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            return
        if [h.strip() for h in first] != header:
            raise ParseError(
                f"expected header {','.join(header)!r}, got {','.join(first)!r}",
                line=1,
                path=path,
            )
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}",
                    line=reader.line_num,
                    path=path,
                )
            yield reader.line_num, [c.strip() for c in row]


def load_interactions(path) -> InteractionMatrix:
    """Read a ``user_id,item_id`` CSV and reindex ids to contiguous integers.

    Ids are numbered in order of first appearance. Duplicate rows are
    dropped and counted in ``duplicates_dropped``.
    """
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    seen = set()
    users, items = [], []
    duplicates = 0
    for line, (uid, iid) in _read_rows(path, INTERACTIONS_HEADER):
        if not uid or not iid:
            raise ParseError("empty identifier", line=line, path=path)
        u = user_index.setdefault(uid, len(user_index))
        i = item_index.setdefault(iid, len(item_index))
        if (u, i) in seen:
            duplicates += 1
            continue
        seen.add((u, i))
        users.append(u)
        items.append(i)
    if not users:
        raise EmptyDatasetError(f"empty dataset: {path}")
    if duplicates:
        logger.info("dropped %d duplicate interactions from %s", duplicates, path)
    return InteractionMatrix(
        len(user_index),
        len(item_index),
        users,
        items,
        tuple(user_index),
        tuple(item_index),
        duplicates,
    )


_FEATURE_ID = re.compile(r"(\d+)$")


def _feature_index(fid: str, line, path) -> int:
    m = _FEATURE_ID.search(fid)
    if m is None:
        raise ParseError(f"feature id {fid!r} has no integer index", line=line, path=path)
    return int(m.group(1))


def load_features(path, item_ids, num_features: int | None = None) -> ItemFeatureMatrix:
    """Read an ``item_id,feature_id,value`` CSV.

    Parameters
    ----------
    path : path-like
    item_ids : sequence of str or InteractionMatrix
        Item id map from the interaction file; row ``k`` belongs to item
        ``item_ids[k]``. Items without rows get all-zero features.
    num_features : int, optional
        Width of the feature axis. Defaults to one past the largest
        feature index found (feature ids carry a trailing integer, e.g. ``f12``).
    """
    if isinstance(item_ids, InteractionMatrix):
        item_ids = item_ids.item_ids
    index = {iid: k for k, iid in enumerate(item_ids)}
    items, feats, vals = [], [], []
    seen = set()
    for line, (iid, fid, raw) in _read_rows(path, FEATURES_HEADER):
        if iid not in index:
            raise DataError(f"unknown item id {iid!r} at {path}:{line}")
        f = _feature_index(fid, line, path)
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"bad value {raw!r}", line=line, path=path) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {raw!r}", line=line, path=path)
        key = (index[iid], f)
        if key in seen:
            raise ParseError(f"duplicate cell {iid},{fid}", line=line, path=path)
        seen.add(key)
        items.append(index[iid])
        feats.append(f)
        vals.append(value)
    width = (max(feats) + 1 if feats else 0) if num_features is None else num_features
    if feats and max(feats) >= width:
        raise DataError(f"feature index {max(feats)} exceeds declared width {width}")
    return ItemFeatureMatrix(len(index), width, items, feats, vals)


# --- splitting and sampling --------------------------------------------------


def _holdout_count(fraction: float, n: int) -> int:
    if n <= 1:
        return 0
    # tolerance guards products like 0.2 * 15 = 3.0000000000000004
    return min(n - 1, math.ceil(fraction * n - 1e-9))


def split(interactions: InteractionMatrix, spec: SplitSpec) -> DatasetBundle:
    """Per-user stratified train/validation/test holdout.

    For every user, ``ceil(test_fraction * n)`` interactions go to test,
    then ``ceil(validation_fraction * r)`` of the remaining ``r`` go to
    validation. Users with a single interaction (at either stage) keep it
    in train, and train is never emptied.
    """
    rng = np.random.default_rng(spec.seed)
    parts = {"train": ([], []), "validation": ([], []), "test": ([], [])}
    for u in range(interactions.num_users):
        items = interactions.profile(u)
        if items.size == 0:
            continue
        items = items[rng.permutation(items.size)]
        n_test = _holdout_count(spec.test_fraction, items.size)
        test, rest = items[:n_test], items[n_test:]
        n_val = _holdout_count(spec.validation_fraction, rest.size)
        val, train = rest[:n_val], rest[n_val:]
        for name, chunk in (("train", train), ("validation", val), ("test", test)):
            parts[name][0].append(np.full(chunk.size, u, dtype=np.int64))
            parts[name][1].append(chunk)

    def build(name):
        us, its = parts[name]
        if not us:
            return interactions.with_entries([], [])
        return interactions.with_entries(np.concatenate(us), np.concatenate(its))

    return DatasetBundle(
        build("train"),
        build("validation"),
        build("test"),
        metadata={"split": {"test_fraction": spec.test_fraction,
                            "validation_fraction": spec.validation_fraction,
                            "seed": spec.seed}},
    )


def negative_sample(interactions: InteractionMatrix, ratio: int, seed: int) -> np.ndarray:
    """Label every positive pair 1 and draw ``ratio`` unseen items per positive.

    Returns an ``(N, 3)`` int64 array of ``(user, item, label)`` rows,
    grouped by user with positives first. Negatives for a user are drawn
    without replacement across all of that user's positives when enough
    unseen items exist, otherwise without replacement per positive.
    """
    if ratio < 1:
        raise DataError("ratio must be >= 1")
    rng = np.random.default_rng(seed)
    all_items = np.arange(interactions.num_items)
    rows = []
    for u in range(interactions.num_users):
        pos = interactions.profile(u)
        if pos.size == 0:
            continue
        rows.append(np.column_stack([np.full(pos.size, u), pos, np.ones(pos.size)]))
        candidates = np.setdiff1d(all_items, pos, assume_unique=True)
        if candidates.size == 0:
            logger.warning("user %d interacted with every item; no negatives drawn", u)
            continue
        need = pos.size * ratio
        if candidates.size >= need:
            neg = rng.choice(candidates, size=need, replace=False)
        else:
            per = min(ratio, candidates.size)
            neg = np.concatenate(
                [rng.choice(candidates, size=per, replace=False) for _ in range(pos.size)]
            )
        rows.append(np.column_stack([np.full(neg.size, u), neg, np.zeros(neg.size)]))
    if not rows:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(rows).astype(np.int64)


def drop_feature_values(
    features: ItemFeatureMatrix, fraction: float, seed: int
) -> ItemFeatureMatrix:
    """Zero a random ``fraction`` of the stored nonzero values."""
    if not 0.0 <= fraction < 1.0:
        raise DataError(f"drop fraction must lie in [0, 1), got {fraction}")
    if fraction == 0.0:
        return features
    rng = np.random.default_rng(seed)
    n_drop = int(round(fraction * len(features)))
    drop = rng.choice(len(features), size=n_drop, replace=False)
    keep = np.ones(len(features), dtype=bool)
    keep[drop] = False
    return ItemFeatureMatrix(
        features.num_items,
        features.num_features,
        features.items[keep],
        features.features[keep],
        features.values[keep],
    )


# --- synthetic corpora -------------------------------------------------------


def synthesize_corpus(
    num_users: int,
    num_items: int,
    num_features: int,
    num_informative: int,
    sparsity: float,
    seed: int,
    split_spec: SplitSpec | None = None,
    interactions_per_user: tuple[int, int] = (10, 30),
    background: float = 0.1,
) -> DatasetBundle:
    """Generate a corpus with a planted set of informative features.

    Every feature column holds exactly ``round((1 - sparsity) * num_items)``
    nonzero values drawn from U(0.5, 1.5), so informative and noise
    columns are indistinguishable marginally. Each user has a primary
    informative feature (assigned so every informative feature covers an
    equal share of users) and, with probability 1/2, a second one. Users
    sample items with probability proportional to the summed values of
    those features, mixed with a ``background`` share of uniform mass.
    With ``num_informative == 0`` item choice is uniform and independent
    of the features.

    The informative indices are stored in ``bundle.metadata["informative"]``.
    """
    if not 0 <= num_informative <= num_features:
        raise DataError("num_informative must lie in [0, num_features]")
    if not 0.0 <= sparsity < 1.0:
        raise DataError("sparsity must lie in [0, 1)")
    per_column = int(round((1.0 - sparsity) * num_items))
    if num_informative > 0 and per_column < 1:
        raise DataError(
            f"sparsity {sparsity} leaves informative features empty at {num_items} items"
        )
    rng = np.random.default_rng(seed)

    dense = np.zeros((num_items, num_features))
    for d in range(num_features):
        rows = rng.choice(num_items, size=per_column, replace=False)
        dense[rows, d] = rng.uniform(0.5, 1.5, size=per_column)
    informative = np.sort(rng.choice(num_features, size=num_informative, replace=False))

    lo, hi = interactions_per_user
    hi = min(hi, num_items - 1)
    lo = min(lo, hi)
    users, items = [], []
    uniform = np.full(num_items, 1.0 / num_items)
    primary = rng.permutation(np.resize(informative, num_users)) if num_informative else None
    for u in range(num_users):
        if num_informative:
            prefs = [primary[u]]
            if num_informative > 1 and rng.random() < 0.5:
                others = informative[informative != primary[u]]
                prefs.append(rng.choice(others))
            affinity = dense[:, prefs].sum(axis=1)
            total = affinity.sum()
            p = uniform if total == 0 else (1 - background) * affinity / total + background * uniform
        else:
            p = uniform
        n_u = int(rng.integers(lo, hi + 1))
        chosen = rng.choice(num_items, size=n_u, replace=False, p=p)
        users.append(np.full(n_u, u))
        items.append(np.sort(chosen))

    inter = InteractionMatrix(
        num_users,
        num_items,
        np.concatenate(users),
        np.concatenate(items),
        tuple(f"u{u}" for u in range(num_users)),
        tuple(f"i{i}" for i in range(num_items)),
    )
    spec = split_spec or SplitSpec(seed=seed)
    bundle = split(inter, spec)
    params = {
        "num_users": num_users,
        "num_items": num_items,
        "num_features": num_features,
        "num_informative": num_informative,
        "sparsity": sparsity,
        "seed": seed,
        "interactions_per_user": list(interactions_per_user),
        "background": background,
    }
    metadata = dict(bundle.metadata)
    metadata.update({"generator": params, "informative": informative.tolist()})
    return DatasetBundle(
        bundle.train,
        bundle.validation,
        bundle.test,
        ItemFeatureMatrix.from_dense(dense),
        metadata,
    )


def write_corpus(bundle: DatasetBundle, directory) -> dict:
    """Write ``interactions.csv``, ``features.csv`` and ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    inter = bundle.interactions
    user_ids = inter.user_ids or tuple(f"u{u}" for u in range(inter.num_users))
    item_ids = inter.item_ids or tuple(f"i{i}" for i in range(inter.num_items))
    paths = {
        "interactions": directory / "interactions.csv",
        "features": directory / "features.csv",
        "manifest": directory / "manifest.json",
    }
    with paths["interactions"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERACTIONS_HEADER)
        for u, i in zip(inter.users.tolist(), inter.items.tolist()):
            w.writerow([user_ids[u], item_ids[i]])
    with paths["features"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURES_HEADER)
        feats = bundle.features
        for i, f, v in zip(feats.items.tolist(), feats.features.tolist(), feats.values.tolist()):
            w.writerow([item_ids[i], f"f{f}", repr(v)])
    manifest = {
        "num_features": bundle.features.num_features,
        # items without interactions still carry features; keep the full id map
        "item_ids": list(item_ids),
        **{k: v for k, v in bundle.metadata.items()},
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()}


def load_corpus(directory, split_spec: SplitSpec | None = None) -> DatasetBundle:
    """Load a corpus written by :func:`write_corpus` and re-split it.

    Items listed in the manifest but absent from the interactions are
    appended to the item id map after the interacted ones.
    """
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    inter = load_interactions(directory / "interactions.csv")
    known = set(inter.item_ids)
    extra = tuple(i for i in manifest.get("item_ids", ()) if i not in known)
    if extra:
        inter = InteractionMatrix(
            inter.num_users, inter.num_items + len(extra), inter.users, inter.items,
            inter.user_ids, inter.item_ids + extra, inter.duplicates_dropped,
        )
    feats = load_features(directory / "features.csv", inter, manifest.get("num_features"))
    if split_spec is None:
        split_spec = SplitSpec(**manifest["split"]) if "split" in manifest else SplitSpec()
    bundle = split(inter, split_spec)
    metadata = {**manifest, **bundle.metadata}
    return DatasetBundle(bundle.train, bundle.validation, bundle.test, feats, metadata)
