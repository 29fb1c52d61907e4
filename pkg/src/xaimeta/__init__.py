"""Meta-evaluation toolkit for explanation-quality estimators.

Scores an estimator on two complementary failure modes -- resilience to
label-preserving noise and reactivity to label-changing disruption -- via
intra-consistency (Wilcoxon p-values), inter-consistency (ranking
agreement) and their meta-consistency average.
"""
from .consistency import (
    BenchmarkSetup,
    MetaVector,
    iac,
    iec_disruptive,
    iec_minor,
    meta_vector,
    run_meta_evaluation,
)
from .dataio import Dataset, load_idx, load_model, make_masks, save_model, synth_blobs
from .errors import (
    ConfigError,
    DataFormatError,
    MetaEvaluationError,
    PerturbationInfeasibleError,
    TrainingDivergedError,
)
from .estimators import Estimate, EstimatorConfig, EvalContext, make_scorer
from .explain import Attribution, ExplainerConfig, build_explainer, normalize
from .net import Net, forward, get_weights, input_gradient, set_weights, train_tiny
from .perturb import EstimateMatrix, PerturbSpec, collect, input_spec, ipt_sample, model_spec, mpt_sample
from .runconfig import RunConfig, load_config
from .runner import run_benchmark, run_convergence, run_hpo, run_sanity, run_train

__version__ = "0.1.0"
