"""Sequential recommendation via a tractable Gaussian bridge between the
encoded user state and the target item embedding, with SDE/ODE samplers and
optional cluster-conditioned guidance."""

from .autodiff import Tape, Tensor
from .bridge import lemma_quantities, marginal_coeffs, marginal_params, sample_xt
from .data import Dataset, SplitView, ingest, split, write_dataset
from .errors import (
    BridgeRecError,
    ContractError,
    DimensionError,
    DomainError,
    IngestError,
    NumericError,
    OrderingError,
)
from .metrics import EvalReport, bucket_report, hr_at_k, ndcg_at_k, ranks_from_scores
from .model import Model, ModelConfig
from .sampler import SamplerConfig, guided_predict, ode_step, sample, sde_step
from .schedule import ScheduleCoeffs, ScheduleParams, coeffs, coeffs_batch
from .trainer import SyntheticSpec, TrainConfig, evaluate, fit, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BridgeRecError", "ContractError", "Dataset", "DimensionError",
    "DomainError", "EvalReport", "IngestError", "Model", "ModelConfig",
    "NumericError", "OrderingError", "SamplerConfig", "ScheduleCoeffs",
    "ScheduleParams", "SplitView", "SyntheticSpec", "Tape", "Tensor",
    "TrainConfig", "bucket_report", "coeffs", "coeffs_batch", "evaluate",
    "fit", "generate_synthetic", "guided_predict", "hr_at_k", "ingest",
    "lemma_quantities", "marginal_coeffs", "marginal_params", "ndcg_at_k",
    "ode_step", "ranks_from_scores", "sample", "sample_xt", "sde_step",
    "split", "write_dataset",
]
