"""Quality estimators: one explanation of one prediction in, one scalar out.

Twelve estimators across five families (faithfulness, robustness,
randomisation, complexity, localisation) plus two adversarial estimators
used to sanity-check the meta-evaluation itself.  Every estimator returns an
Estimate that is either finite or explicitly flagged undefined; NaN never
leaks into aggregation.  Estimators are pure given (ctx, cfg) -- all
randomness flows from ctx.seed.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .errors import ConfigError
from .explain import Attribution
from .net import Layer, Net, dense_layer_indices, forward, logits_batch, replace_layer
from .seeding import derive_rng

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"


@dataclass
class EvalContext:
    """Everything a quality estimator may look at for one sample.

    `explainer` is the (normalized) explanation function that produced
    `attribution`; robustness and randomisation estimators re-invoke it.
    `dataset_mean` feeds the "mean" baseline strategy; `sample_index` keys
    the deterministic adversarial estimator.
    """

    net: Net
    x: np.ndarray
    label: int
    attribution: Attribution
    explainer: object
    dataset_bounds: tuple
    mask: np.ndarray | None = None
    dataset_mean: float | None = None
    seed: int = 0
    sample_index: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.attribution.values.shape != self.x.shape:
            raise ValueError("attribution length does not match input length")
        if self.mask is not None:
            self.mask = np.asarray(self.mask).astype(bool)
            if self.mask.shape != self.x.shape or not self.mask.any():
                raise ValueError("mask must match the input and mark at least one feature")


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator hyperparameters; None means "derive the default from D".

    Subset and step sizes default to 2*sqrt(D) features; the robustness
    radius defaults to a tenth of the dataset range; top-k defaults to the
    mask cardinality.
    """

    fc_subset_size: int | None = None
    fc_runs: int = 100
    fc_baseline: str = "uniform"  # black | uniform | mean
    pf_step_size: int | None = None
    pf_baseline: str = "uniform"
    robustness_runs: int = 10
    robustness_radius: float | None = None
    topk_k: int | None = None
    direction: str | None = None  # override of the registry direction

    def __post_init__(self):
        if self.fc_runs < 1 or self.robustness_runs < 1:
            raise ValueError("run counts must be >= 1")
        for name in ("fc_baseline", "pf_baseline"):
            if getattr(self, name) not in ("black", "uniform", "mean"):
                raise ValueError(f"{name} must be one of black/uniform/mean")

    def subset_size(self, d: int) -> int:
        size = self.fc_subset_size if self.fc_subset_size is not None else _default_block(d)
        if not 1 <= size <= d:
            raise ValueError(f"fc_subset_size {size} outside [1, {d}]")
        return size

    def step_size(self, d: int) -> int:
        size = self.pf_step_size if self.pf_step_size is not None else _default_block(d)
        if not 1 <= size <= d:
            raise ValueError(f"pf_step_size {size} outside [1, {d}]")
        return size

    def radius(self, bounds) -> float:
        if self.robustness_radius is not None:
            return self.robustness_radius
        return 0.1 * (bounds[1] - bounds[0])


def _default_block(d: int) -> int:
    # 2*w features where w is the side of a square input, at least 1
    return max(1, min(d, int(round(2 * math.sqrt(d)))))


@dataclass(frozen=True)
class Estimate:
    value: float
    estimator_id: str
    direction: str
    undefined: bool = False


def _estimate(estimator_id, value, cfg=None):
    direction = None
    if cfg is not None and cfg.direction is not None:
        direction = cfg.direction
    if direction is None:
        direction = DIRECTIONS[estimator_id]
    if value is None or not np.isfinite(value):
        return Estimate(math.nan, estimator_id, direction, undefined=True)
    return Estimate(float(value), estimator_id, direction)


def _baseline_values(kind, indices, ctx, rng):
    lo, hi = ctx.dataset_bounds
    if kind == "black":
        return np.full(len(indices), lo)
    if kind == "mean":
        mean = ctx.dataset_mean if ctx.dataset_mean is not None else float(ctx.x.mean())
        return np.full(len(indices), mean)
    return rng.uniform(lo, hi, size=len(indices))


# --- faithfulness -----------------------------------------------------------


def evaluate_faithfulness_correlation(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Pearson correlation between subset attribution sums and logit drops.

    Random feature subsets (without replacement within a subset) are replaced
    by the configured baseline; the correlation is taken over cfg.fc_runs
    subsets.  Undefined when either series has zero variance.
    """
    rng = derive_rng("fc", ctx.seed)
    d = ctx.x.size
    size = cfg.subset_size(d)
    e = ctx.attribution.values
    base_logit = forward(ctx.net, ctx.x).logits[ctx.label]
    attr_sums = np.empty(cfg.fc_runs)
    masked = np.repeat(ctx.x[None, :], cfg.fc_runs, axis=0)
    for r in range(cfg.fc_runs):
        subset = rng.choice(d, size=size, replace=False)
        attr_sums[r] = e[subset].sum()
        masked[r, subset] = _baseline_values(cfg.fc_baseline, subset, ctx, rng)
    drops = base_logit - logits_batch(ctx.net, masked)[:, ctx.label]
    return _estimate("faithfulness_correlation", stats.pearson(attr_sums, drops), cfg)


def evaluate_pixel_flipping(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Area under the predicted-class probability curve while flipping.

    Features are replaced by the baseline in blocks of cfg.pf_step_size, most
    attributed first (descending raw attribution, stable ties); the x-axis is
    the fraction of features flipped.
    """
    rng = derive_rng("pf", ctx.seed)
    d = ctx.x.size
    step = cfg.step_size(d)
    order = np.argsort(-ctx.attribution.values, kind="stable")
    xs = [0.0]
    ys = [forward(ctx.net, ctx.x).probs[ctx.label]]
    flipped = ctx.x.copy()
    for start in range(0, d, step):
        block = order[start : start + step]
        flipped[block] = _baseline_values(cfg.pf_baseline, block, ctx, rng)
        xs.append(min(start + step, d) / d)
        ys.append(forward(ctx.net, flipped).probs[ctx.label])
    return _estimate("pixel_flipping", stats.trapezoid_auc(xs, ys), cfg)


# --- robustness -------------------------------------------------------------


def _perturbed_inputs(ctx, cfg, rng):
    lo, hi = ctx.dataset_bounds
    radius = cfg.radius(ctx.dataset_bounds)
    delta = rng.uniform(-radius, radius, size=ctx.x.size)
    x_pert = np.clip(ctx.x + delta, lo, hi)
    return x_pert, x_pert - ctx.x  # effective displacement after clipping


def evaluate_max_sensitivity(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Largest explanation change over random in-ball input perturbations,
    relative to the input norm.  Undefined for a zero input."""
    x_norm = float(np.linalg.norm(ctx.x))
    if x_norm == 0.0:
        return _estimate("max_sensitivity", None, cfg)
    rng = derive_rng("ms", ctx.seed)
    base = ctx.attribution.values
    worst = 0.0
    for _ in range(cfg.robustness_runs):
        x_pert, _ = _perturbed_inputs(ctx, cfg, rng)
        other = ctx.explainer(ctx.net, x_pert, ctx.label).values
        worst = max(worst, float(np.linalg.norm(base - other)) / x_norm)
    return _estimate("max_sensitivity", worst, cfg)


def evaluate_local_lipschitz(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Largest explanation-change to input-change ratio over random draws.

    The denominator uses the effective (post-clip) displacement; degenerate
    draws below 1e-12 are redrawn.
    """
    rng = derive_rng("lle", ctx.seed)
    base = ctx.attribution.values
    worst = 0.0
    accepted = 0
    attempts = 0
    while accepted < cfg.robustness_runs and attempts < 1000 * cfg.robustness_runs:
        attempts += 1
        x_pert, delta = _perturbed_inputs(ctx, cfg, rng)
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            continue
        other = ctx.explainer(ctx.net, x_pert, ctx.label).values
        worst = max(worst, float(np.linalg.norm(base - other)) / dist)
        accepted += 1
    if accepted == 0:
        return _estimate("local_lipschitz", None, cfg)
    return _estimate("local_lipschitz", worst, cfg)


# --- randomisation ----------------------------------------------------------


def evaluate_model_parameter_randomisation(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Mean rank correlation between the explanation and re-explanations of
    nets with one dense layer re-randomised at a time.

    Replacement parameters are drawn from a normal fitted to the original
    layer (its empirical mean and std, weights and bias pooled).  Layers
    whose correlation is undefined (constant map) are skipped; if every
    layer is skipped the estimate is undefined.
    """
    base = ctx.attribution.values
    correlations = []
    for v, layer_index in enumerate(dense_layer_indices(ctx.net)):
        layer = ctx.net.layers[layer_index]
        pooled = np.concatenate([layer.weights.ravel(), layer.bias.ravel()])
        mu, sd = float(pooled.mean()), float(pooled.std())
        rng = derive_rng("mpr", ctx.seed, v)
        new_layer = Layer(
            "dense",
            rng.normal(mu, sd, size=layer.weights.shape),
            rng.normal(mu, sd, size=layer.bias.shape),
        )
        randomized = replace_layer(ctx.net, layer_index, new_layer)
        other = ctx.explainer(randomized, ctx.x, ctx.label).values
        rho = stats.spearman(base, other)
        if not math.isnan(rho):
            correlations.append(rho)
    if not correlations:
        return _estimate("model_parameter_randomisation", None, cfg)
    return _estimate("model_parameter_randomisation", float(np.mean(correlations)), cfg)


def evaluate_random_logit(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Rank correlation between the explanation for the predicted class and
    the explanation for a randomly drawn other class."""
    if ctx.net.num_classes < 2:
        raise ConfigError("random_logit needs at least two classes")
    rng = derive_rng("rl", ctx.seed)
    others = [c for c in range(ctx.net.num_classes) if c != ctx.label]
    y_other = int(rng.choice(others))
    other = ctx.explainer(ctx.net, ctx.x, y_other).values
    return _estimate("random_logit", stats.spearman(ctx.attribution.values, other), cfg)


# --- complexity -------------------------------------------------------------


def evaluate_sparseness(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Gini index of the absolute attribution; undefined for an all-zero map."""
    v = np.sort(np.abs(ctx.attribution.values))
    total = v.sum()
    if total == 0.0:
        return _estimate("sparseness", None, cfg)
    d = v.size
    i = np.arange(1, d + 1)
    return _estimate("sparseness", float(((2 * i - d - 1) * v).sum() / (d * total)), cfg)


def evaluate_complexity(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Shannon entropy of the normalized absolute attribution (0 ln 0 := 0)."""
    v = np.abs(ctx.attribution.values)
    total = v.sum()
    if total == 0.0:
        return _estimate("complexity", None, cfg)
    p = v / total
    nonzero = p[p > 0]
    return _estimate("complexity", float(-(nonzero * np.log(nonzero)).sum()), cfg)


# --- localisation -----------------------------------------------------------


def _require_mask(ctx, estimator_id):
    if ctx.mask is None:
        raise ConfigError(f"{estimator_id} requires a ground-truth mask")
    return ctx.mask


def _top_indices(values, k):
    return np.argsort(-values, kind="stable")[:k]


def evaluate_pointing_game(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """1 when the maximally attributed feature lies inside the mask.

    Works on absolute attributions; ties break on the lowest index.
    """
    mask = _require_mask(ctx, "pointing_game")
    hit = bool(mask[int(np.argmax(np.abs(ctx.attribution.values)))])
    return _estimate("pointing_game", 1.0 if hit else 0.0, cfg)


def evaluate_relevance_mass_accuracy(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Fraction of absolute attribution mass inside the mask."""
    mask = _require_mask(ctx, "relevance_mass_accuracy")
    v = np.abs(ctx.attribution.values)
    total = v.sum()
    if total == 0.0:
        return _estimate("relevance_mass_accuracy", None, cfg)
    return _estimate("relevance_mass_accuracy", float(v[mask].sum() / total), cfg)


def evaluate_top_k_intersection(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Fraction of the K highest absolute attributions inside the mask;
    K defaults to the mask cardinality."""
    mask = _require_mask(ctx, "top_k_intersection")
    k = cfg.topk_k if cfg.topk_k is not None else int(mask.sum())
    if not 1 <= k <= ctx.x.size:
        raise ConfigError(f"topk_k {k} outside [1, {ctx.x.size}]")
    top = _top_indices(np.abs(ctx.attribution.values), k)
    return _estimate("top_k_intersection", float(mask[top].sum() / k), cfg)


def evaluate_relevance_rank_accuracy(ctx: EvalContext, cfg: EstimatorConfig) -> Estimate:
    """Fraction of the |mask| highest absolute attributions inside the mask."""
    mask = _require_mask(ctx, "relevance_rank_accuracy")
    m = int(mask.sum())
    top = _top_indices(np.abs(ctx.attribution.values), m)
    return _estimate("relevance_rank_accuracy", float(mask[top].sum() / m), cfg)


# --- adversarial sanity estimators ------------------------------------------


@dataclass
class DeterministicAdversaryState:
    """Per-sample uniform draws that Psi= returns no matter what it is shown."""

    n_samples: int
    seed: int
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = derive_rng("psi_eq", self.seed).uniform(0.0, 1.0, size=self.n_samples)


def adversarial_deterministic(ctx: EvalContext, state: DeterministicAdversaryState) -> Estimate:
    """Perturbation-blind estimator: the same fixed draw for a sample index,
    whether or not the inputs were perturbed."""
    return _estimate("adversarial_deterministic", float(state.values[ctx.sample_index]))


def adversarial_distribution_shift(ctx: EvalContext, is_perturbed: bool) -> Estimate:
    """Estimator that deliberately answers from different distributions.

    Unperturbed calls draw from N(mu, 1) with mu uniform in [-100000, -1];
    any perturbed call draws with mu uniform in [0, 1].
    """
    rng = derive_rng("psi_neq", ctx.seed, int(is_perturbed))
    if is_perturbed:
        mu = rng.uniform(0.0, 1.0)
    else:
        mu = rng.uniform(-100000.0, -1.0)
    return _estimate("adversarial_distribution_shift", float(rng.normal(mu, 1.0)))


# --- registry ---------------------------------------------------------------

DIRECTIONS = {
    "faithfulness_correlation": HIGHER_BETTER,
    "pixel_flipping": LOWER_BETTER,
    "max_sensitivity": LOWER_BETTER,
    "local_lipschitz": LOWER_BETTER,
    "model_parameter_randomisation": LOWER_BETTER,
    "random_logit": LOWER_BETTER,
    "sparseness": HIGHER_BETTER,
    "complexity": LOWER_BETTER,
    "pointing_game": HIGHER_BETTER,
    "relevance_mass_accuracy": HIGHER_BETTER,
    "top_k_intersection": HIGHER_BETTER,
    "relevance_rank_accuracy": HIGHER_BETTER,
    "adversarial_deterministic": HIGHER_BETTER,
    "adversarial_distribution_shift": HIGHER_BETTER,
}

ESTIMATOR_FUNCTIONS = {
    "faithfulness_correlation": evaluate_faithfulness_correlation,
    "pixel_flipping": evaluate_pixel_flipping,
    "max_sensitivity": evaluate_max_sensitivity,
    "local_lipschitz": evaluate_local_lipschitz,
    "model_parameter_randomisation": evaluate_model_parameter_randomisation,
    "random_logit": evaluate_random_logit,
    "sparseness": evaluate_sparseness,
    "complexity": evaluate_complexity,
    "pointing_game": evaluate_pointing_game,
    "relevance_mass_accuracy": evaluate_relevance_mass_accuracy,
    "top_k_intersection": evaluate_top_k_intersection,
    "relevance_rank_accuracy": evaluate_relevance_rank_accuracy,
}

CATEGORIES = {
    "faithfulness_correlation": "faithfulness",
    "pixel_flipping": "faithfulness",
    "max_sensitivity": "robustness",
    "local_lipschitz": "robustness",
    "model_parameter_randomisation": "randomisation",
    "random_logit": "randomisation",
    "sparseness": "complexity",
    "complexity": "complexity",
    "pointing_game": "localisation",
    "relevance_mass_accuracy": "localisation",
    "top_k_intersection": "localisation",
    "relevance_rank_accuracy": "localisation",
    "adversarial_deterministic": "adversarial",
    "adversarial_distribution_shift": "adversarial",
}

NEEDS_MASK = {
    "pointing_game",
    "relevance_mass_accuracy",
    "top_k_intersection",
    "relevance_rank_accuracy",
}

ADVERSARIAL_IDS = ("adversarial_deterministic", "adversarial_distribution_shift")


@dataclass
class Scorer:
    """Pipeline-facing estimator: id, direction, and a uniform call shape."""

    estimator_id: str
    direction: str
    _call: object

    def __call__(self, ctx: EvalContext, is_perturbed: bool) -> Estimate:
        return self._call(ctx, is_perturbed)


def make_scorer(estimator_id: str, cfg: EstimatorConfig, n_samples: int = 0, state_seed: int = 0):
    """Build a Scorer; adversarial estimators get their state wired in here."""
    if estimator_id == "adversarial_deterministic":
        state = DeterministicAdversaryState(n_samples=n_samples, seed=state_seed)
        call = lambda ctx, is_perturbed: adversarial_deterministic(ctx, state)
    elif estimator_id == "adversarial_distribution_shift":
        call = adversarial_distribution_shift
    elif estimator_id in ESTIMATOR_FUNCTIONS:
        fn = ESTIMATOR_FUNCTIONS[estimator_id]
        call = lambda ctx, is_perturbed: fn(ctx, cfg)
    else:
        raise ConfigError(f"unknown estimator {estimator_id!r}")
    direction = cfg.direction if cfg.direction is not None else DIRECTIONS[estimator_id]
    return Scorer(estimator_id, direction, call)
