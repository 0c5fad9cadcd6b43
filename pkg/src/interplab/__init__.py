"""Sample-complexity experiments for teacher-student networks.

Modules: ``linalg`` (dense helpers, seeded streams), ``models`` (networks and
gradients), ``data`` (teachers and datasets), ``samplers`` (near-interpolator
search), ``theory`` (bounds and embeddings), ``dimest`` (local-PCA dimension)
and ``harness`` (experiments and output files).
"""

from .data import Dataset, InputBox, Teacher, make_teacher, sample_dataset, test_loss, train_loss
from .dimest import DimEstimate, PointCloud, estimate_tes_dimension, lpca_estimate
from .errors import *  # noqa: F401,F403
from .harness import CurveSummary, ExperimentConfig, ExperimentRecord, check_proposition2, run_experiment
from .linalg import SeededRng
from .models import DomainBox, NetworkSpec, ParamVector, estimate_lipschitz, forward, gradient
from .samplers import SamplerConfig, SamplerOutcome, run_sampler
from .theory import BoundReport, EmbeddingWitness, bound_for, embed, sample_tes_point

__version__ = "0.1.0"
