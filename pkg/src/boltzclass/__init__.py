"""Restricted Boltzmann Machines and Deep Belief Networks for imbalanced
image-vector classification, with generator-based oversampling and the
ACC / BAC / kappa / Wilcoxon evaluation protocol."""
from .core import Prng, bernoulli_sample, matvec, sigmoid
from .rbm import Rbm, TrainConfig, EpochTrace
from .dbn import DbnClassifier, FineTuneConfig
from .data import Dataset
from .augment import AugmentationPlan, Autoencoder, GenConfig
from .metrics import ConfusionMatrix, EvalReport

__version__ = "0.1.0"
