"""Multiple clusterings from multi-view data by deep semi-NMF."""

from .clustering import Clustering, extract_clusterings, kmeans
from .core import (ConfigError, DivergenceError, FactorState, FitResult, ObjectiveBreakdown,
                   SolverConfig, fit, objective, pretrain, redundancy_balanced,
                   redundancy_gradient, redundancy_overlap, update_alpha, update_H, update_Z)
from .dataset import (DatasetError, MultiViewDataset, PlantedTruth, StructureSpec,
                      add_noise_view, generate_synthetic, load_dataset, load_truth,
                      save_dataset, zscore)
from .dmf import DmfState, concat_views, dmf_fit
from .metrics import EvaluationReport, dunn_index, evaluate, jaccard, nmi, silhouette
from .seminmf import SemiNmfResult, seminmf_fit

__version__ = "0.1.0"
