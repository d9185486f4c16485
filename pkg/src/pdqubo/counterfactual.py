"""Counterfactual performance deltas for single features and feature pairs.

``E_i`` is the drop in the evaluator's metric when feature ``i`` is zeroed
for every item; ``E_ij`` is the drop when both ``i`` and ``j`` are zeroed.
Positive values mean the feature(s) helped.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .recsys import MetricSpec

logger = logging.getLogger(__name__)


class PairMode(str, enum.Enum):
    COMB = "comb"
    INDIV = "indiv"


@dataclass(frozen=True, eq=False)
class CounterfactualProfile:
    baseline: float
    singles: np.ndarray
    pairs: np.ndarray
    metric: MetricSpec
    split: str = "validation"
    mode: PairMode = PairMode.COMB
    checksum: str = ""

    @property
    def num_features(self) -> int:
        return int(self.singles.size)

    def to_dict(self) -> dict:
        iu = np.triu_indices(self.num_features, k=1)
        return {
            "baseline": self.baseline,
            "metric": self.metric.kind.value,
            "cutoff": self.metric.cutoff,
            "split": self.split,
            "mode": self.mode.value,
            "num_features": self.num_features,
            "singles": self.singles.tolist(),
            "pairs": self.pairs[iu].tolist(),
            "checksum": self.checksum,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CounterfactualProfile":
        n = int(data["num_features"])
        singles = np.asarray(data["singles"], dtype=np.float64)
        upper = np.asarray(data["pairs"], dtype=np.float64)
        if singles.size != n or upper.size != n * (n - 1) // 2:
            raise DataError("profile arrays do not match num_features")
        pairs = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        pairs[iu] = upper
        pairs[(iu[1], iu[0])] = upper
        return cls(
            float(data["baseline"]),
            singles,
            pairs,
            MetricSpec(data["metric"], int(data["cutoff"])),
            data.get("split", "validation"),
            PairMode(data.get("mode", "comb")),
            data.get("checksum", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "CounterfactualProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _Checkpoint:
    """Append-only JSON-lines store of completed mask evaluations."""

    def __init__(self, path, fingerprint):
        self.path = Path(path) if path is not None else None
        self.done: dict[tuple, float] = {}
        if self.path is None:
            return
        if self.path.exists():
            lines = self.path.read_text().splitlines()
            if lines:
                head = json.loads(lines[0])
                if head.get("fingerprint") != fingerprint:
                    raise DataError(f"checkpoint {self.path} belongs to different inputs")
                valid = 1
                for line in lines[1:]:
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        break  # truncated tail from an interrupted write
                    self.done[tuple(rec["mask"])] = float(rec["value"])
                    valid += 1
                if valid < len(lines) or not self.path.read_text().endswith("\n"):
                    self.path.write_text("\n".join(lines[:valid]) + "\n")
                logger.info("resuming from %d checkpointed evaluations", len(self.done))
                return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps({"fingerprint": fingerprint}) + "\n")

    def record(self, results):
        if self.path is None:
            return
        with self.path.open("a") as fh:
            for mask, value in results:
                fh.write(json.dumps({"mask": list(mask), "value": value}) + "\n")


def _run_chunk(evaluator, masks):
    return [(m, evaluator(m)) for m in masks]


def evaluate_masks(evaluator, masks, workers: int = 1, checkpoint=None, chunk_size: int = 64):
    """Evaluate every mask once; returns ``{mask: value}``.

    Work is split into index-addressed chunks, so the result does not
    depend on worker count or completion order.
    """
    masks = [tuple(m) for m in masks]
    fp = evaluator.fingerprint() if checkpoint is not None else ""
    store = _Checkpoint(checkpoint, fp)
    results = {m: store.done[m] for m in masks if m in store.done}
    todo = [m for m in masks if m not in results]
    chunks = [todo[i:i + chunk_size] for i in range(0, len(todo), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for out in pool.map(_run_chunk, itertools.repeat(evaluator), chunks):
                store.record(out)
                results.update(out)
    else:
        for chunk in chunks:
            out = _run_chunk(evaluator, chunk)
            store.record(out)
            results.update(out)
            logger.debug("evaluated %d/%d masks", len(results), len(masks))
    return results


def compute_baseline(evaluator) -> float:
    """Metric with no feature masked."""
    return float(evaluator(()))


def compute_singles(evaluator, baseline: float | None = None, **kwargs) -> np.ndarray:
    if baseline is None:
        baseline = compute_baseline(evaluator)
    n = evaluator.num_features
    values = evaluate_masks(evaluator, [(i,) for i in range(n)], **kwargs)
    return np.array([baseline - values[(i,)] for i in range(n)])


def compute_pairs(evaluator, baseline: float | None = None, **kwargs) -> np.ndarray:
    if baseline is None:
        baseline = compute_baseline(evaluator)
    n = evaluator.num_features
    masks = list(itertools.combinations(range(n), 2))
    values = evaluate_masks(evaluator, masks, **kwargs)
    pairs = np.zeros((n, n))
    for i, j in masks:
        pairs[i, j] = pairs[j, i] = baseline - values[(i, j)]
    return pairs


def compute_profile(
    evaluator,
    mode: PairMode | str = PairMode.COMB,
    workers: int = 1,
    checkpoint=None,
) -> CounterfactualProfile:
    """Baseline, singles and (in comb mode) pairs against ``evaluator``.

    Indiv mode leaves the pair matrix at zero. Comb mode costs
    ``n + n(n-1)/2`` masked evaluations beyond the baseline.
    """
    mode = PairMode(mode)
    n = evaluator.num_features
    masks = [(i,) for i in range(n)]
    if mode is PairMode.COMB:
        masks += list(itertools.combinations(range(n), 2))
    baseline = compute_baseline(evaluator)
    values = evaluate_masks(evaluator, masks, workers=workers, checkpoint=checkpoint)
    singles = np.array([baseline - values[(i,)] for i in range(n)])
    pairs = np.zeros((n, n))
    if mode is PairMode.COMB:
        for i, j in itertools.combinations(range(n), 2):
            pairs[i, j] = pairs[j, i] = baseline - values[(i, j)]
    return CounterfactualProfile(
        baseline,
        singles,
        pairs,
        evaluator.metric,
        getattr(evaluator, "split", "validation"),
        mode,
        evaluator.fingerprint(),
    )
