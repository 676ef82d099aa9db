"""cavityfrac: volume-fraction estimation of two-phase dielectric mixtures
from broadband two-port S-parameters, using a from-scratch 1D CNN trained
on synthetic resonant-cavity data."""

__version__ = "0.1.0"

from .cavity_sim import CavityGeometry, SimConfig, generate_dataset, synth_sparams
from .dataset import LabeledSample, load_dataset, save_dataset
from .estimator import CnnRegressor
from .mixture import MixtureSpec, bruggeman_eff, complement_fraction
from .preprocess import (FixturePair, SavGolParams, augment_linear, deembed,
                         embed_fixture, savgol_filter, savgol_optimize)
from .sparams import (FeatureTensor, SParameterMatrix, SParameterRecord,
                      parse_touchstone, resample_uniform, to_feature_tensor,
                      write_touchstone)
from .training import TrainConfig, TrainingReport, compute_metrics, kfold_split, train_model

__all__ = [
    "CavityGeometry", "SimConfig", "generate_dataset", "synth_sparams",
    "LabeledSample", "load_dataset", "save_dataset",
    "CnnRegressor",
    "MixtureSpec", "bruggeman_eff", "complement_fraction",
    "FixturePair", "SavGolParams", "augment_linear", "deembed", "embed_fixture",
    "savgol_filter", "savgol_optimize",
    "FeatureTensor", "SParameterMatrix", "SParameterRecord", "parse_touchstone",
    "resample_uniform", "to_feature_tensor", "write_touchstone",
    "TrainConfig", "TrainingReport", "compute_metrics", "kfold_split", "train_model",
]
