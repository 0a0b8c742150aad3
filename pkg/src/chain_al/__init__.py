"""Pool-based active learning with an online-tuned Firth penalty."""

from .bilevel import (BatchSchedule, BilevelConfig, TangentState,
                      hypergradient, inner_unroll_with_tangent, make_schedule,
                      solve_lambda)
from .data import (FeatureDataset, PoolState, SynthSpec, make_pool,
                   query_commit, synth_gaussian_mixture)
from .errors import ConfigurationError, FormatError, LogicError, NumericError
from .featfile import load_features, write_features
from .model import (GradPair, LossBreakdown, ModelParams, grad, hvp, loss,
                    predict_accuracy, probs, zero_params)
from .orchestrator import (ExperimentConfig, ExperimentResult, RoundRecord,
                           paired_t, run_experiment, run_seed)
from .query import (badge_embeddings, kmeans_pp_select, select_badge,
                    select_coreset, select_entropy, select_random)
from .trainer import (LambdaTrajectory, TrainConfig, TrainOutcome,
                      train_chain, train_fbr_bo, train_fbr_gs,
                      train_fixed_lambda)

__version__ = "0.1.0"
