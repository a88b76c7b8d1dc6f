"""Self-supervised hypergraph representation learning with node-, group- and
membership-level contrast."""

from .augment import AugmentConfig, make_view, make_views
from .dataio import load_dataset, save_dataset
from .errors import (ConfigurationError, DatasetFormatError, DegenerateInputError,
                     HyperclError, NumericalError, ShapeError)
from .evalkit import ProbeConfig, evaluate_classification, evaluate_clustering, kmeans
from .hgraph import Hypergraph, LabeledDataset, Split, add_self_loops, random_split
from .loss import LossConfig
from .model import Model, encode
from .trainer import TrainConfig, TrainedModel, embed, random_init, train

__version__ = "0.1.0"
