"""gclab: a desk-scale graph contrastive learning laboratory.

GCN encoder + InfoNCE training with three augmentation families (random
masking, gradient-importance-guided masking, eigenvalue smoothing) and a
diagnostic suite covering center distances, augmentation distance,
generalization-bound terms, and spectral identities.
"""

from .config import RunConfig, load_config
from .graph import Graph, Split, load_dataset, make_split, sbm_generate, save_dataset, sym_normalize
from .runner import TrainResult, report, sweep_depth, sweep_droprate, train, train_many

__all__ = [
    "Graph",
    "RunConfig",
    "Split",
    "TrainResult",
    "load_config",
    "load_dataset",
    "make_split",
    "report",
    "save_dataset",
    "sbm_generate",
    "sweep_depth",
    "sweep_droprate",
    "sym_normalize",
    "train",
    "train_many",
]

__version__ = "0.1.0"
