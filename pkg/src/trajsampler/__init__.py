"""Select S trajectories from the pooled weighted proposals of an ensemble
of trajectory predictors by minimizing the expected minADE_k under the
proposal mixture, plus baseline samplers and an evaluation harness."""
from .baselines import (KMeansConfig, NmsConfig, kmeans_select, nms_kmeans_select, nms_select,
                        sample_categorical, sample_topk, sample_uniform)
from .errors import TrajSamplerError
from .metrics import MetricReport, ade, fde, min_ade_k, min_fde_k
from .optimizer import LossKind, LossSpec, OptimizerConfig, optimize, risk, risk_subgradient
from .types import (CandidateSet, ModelPrediction, ProposalMixture, Scenario, WeightedProposal,
                    build_mixture)

__version__ = "0.1.0"
