"""Causal discovery in linear non-Gaussian models with latent confounders,
driven by higher-order cumulants and kernel independence tests."""
__version__ = "0.1.0"

from .config import Config
from .cumulants import Dataset, center, cum_ab, joint_cumulant, kstat
from .discovery import discover
from .evaluate import MetricsReport, edge_metrics, evaluate, nonadjacency_metrics, rmse
from .graph import CausalGraph
from .independence import IndependenceResult, test_independence
from .mixing import (LatentConfounder, MixingMatrix, ObservedNoise, estimate_pair,
                     estimate_pair_general, null_weight, surrogate_residual)
from .simulate import ModelSpec, build_case, random_model, sample

__all__ = [
    "CausalGraph", "Config", "Dataset", "IndependenceResult", "LatentConfounder",
    "MetricsReport", "MixingMatrix", "ModelSpec", "ObservedNoise", "build_case", "center",
    "cum_ab", "discover", "edge_metrics", "estimate_pair", "estimate_pair_general",
    "evaluate", "joint_cumulant", "kstat", "nonadjacency_metrics", "null_weight",
    "random_model", "rmse", "sample", "surrogate_residual", "test_independence",
]
