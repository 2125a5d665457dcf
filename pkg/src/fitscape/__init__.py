"""Fitness maps, fitness clouds and ELA features for benchmark landscapes."""

from fitscape.dataset import DatasetConfig, DatasetManifest, ProblemKey, assign_split, build_dataset
from fitscape.elafeat import FEATURE_NAMES, FeatureVector, feature_vector
from fitscape.evalharness import BRModel, MetricsReport, evaluate_protocol, macro_f1, predict, train_br
from fitscape.fitcloud import CloudConfig, CloudEmbedding, embed_cloud, knn_graph
from fitscape.fitmap import FitnessMap, MapMethod, build_map, map_mc, map_rmc
from fitscape.problems import PropertyLabels, ProblemInstance, evaluate, labels, make_problem
from fitscape.sampling import Sample, draw_sample, lhs_sample, normalize_design, normalize_fitness

__version__ = "0.1.0"

__all__ = [
    "BRModel", "CloudConfig", "CloudEmbedding", "DatasetConfig", "DatasetManifest",
    "FEATURE_NAMES", "FeatureVector", "FitnessMap", "MapMethod", "MetricsReport",
    "ProblemInstance", "ProblemKey", "PropertyLabels", "Sample", "assign_split",
    "build_dataset", "build_map", "draw_sample", "embed_cloud", "evaluate",
    "evaluate_protocol", "feature_vector", "knn_graph", "labels", "lhs_sample",
    "macro_f1", "make_problem", "map_mc", "map_rmc", "normalize_design",
    "normalize_fitness", "predict", "train_br",
]
