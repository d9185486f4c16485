"""Performance-driven QUBO feature selection for recommender systems."""

from .counterfactual import CounterfactualProfile, PairMode, compute_profile
from .dataset import (
    DatasetBundle,
    InteractionMatrix,
    ItemFeatureMatrix,
    SplitSpec,
    load_corpus,
    load_features,
    load_interactions,
    split,
    synthesize_corpus,
)
from .errors import (
    ConfigError,
    DataError,
    PdquboError,
    ProtocolError,
    QMatrixError,
    SolverError,
    TransportError,
)
from .experiments import ExperimentConfig, run_pipeline
from .qubo import (
    QuboProblem,
    build_boosting,
    build_coqubo,
    build_miqubo,
    build_pdqubo,
    energy,
)
from .recsys import ItemKNNEvaluator, MetricSpec, evaluate, train_item_knn
from .solvers import SolverConfig, SolveResult, solve

__version__ = "0.1.0"
