"""Feature selection on a planted synthetic corpus, step by step.

Run with ``python demos/planted_selection.py``. Takes about ten seconds.
"""

import numpy as np

from pdqubo import (
    ItemKNNEvaluator,
    MetricSpec,
    QuboProblem,
    SolverConfig,
    build_pdqubo,
    compute_profile,
    solve,
    synthesize_corpus,
)

# %% A corpus where 8 of 30 item features drive what users pick
bundle = synthesize_corpus(100, 200, 30, 8, sparsity=0.9, seed=0)
planted = bundle.metadata["informative"]
print("planted features:", planted)
print("feature sparsity: %.2f" % bundle.features.sparsity)

# %% Counterfactuals are measured on validation, never on test
metric = MetricSpec("ndcg", 10)
val = ItemKNNEvaluator(bundle.features, bundle.train, bundle.validation, metric)
test = ItemKNNEvaluator(bundle.features, bundle.train_and_validation, bundle.test, metric,
                        split="test")
profile = compute_profile(val)  # 1 + 30 + 435 masked retrains
print("validation nDCG@10 with all features: %.4f" % profile.baseline)

# Largest single-feature drops; the planted ones should dominate
top = np.argsort(-profile.singles)[:8]
print("largest E_i:", sorted(top.tolist()))

# %% Coefficient matrix and a cardinality-constrained solve
q = build_pdqubo(profile)
problem = QuboProblem(q, k=8)
result = solve(problem, SolverConfig(kind="sa", seed=0, num_samples=200))
print("selected:", result.selected, "energy %.4f" % result.best_energy)
print("recovered %d of 8 planted" % len(set(result.selected) & set(planted)))

# %% Retrain on the selection and score on test
dropped = [i for i in range(30) if i not in result.selected]
print("test nDCG@10, all features: %.4f" % test(()))
print("test nDCG@10, selected 8:   %.4f" % test(dropped))

rng = np.random.default_rng(1)
random_scores = [test(np.setdiff1d(np.arange(30), rng.choice(30, 8, replace=False)))
                 for _ in range(20)]
print("test nDCG@10, random 8 (mean of 20): %.4f" % np.mean(random_scores))
