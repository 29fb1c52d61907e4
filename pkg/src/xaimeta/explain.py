"""Attribution methods and the second-moment normalization.

Each method maps (net, x, label) to a per-feature relevance vector.  Signs
are preserved throughout; normalization divides by the root mean square of
the map so that maps from different methods live on a comparable scale.
All methods are deterministic given their config (including its seed).
"""
from dataclasses import dataclass, replace

import numpy as np

from .net import Net, input_gradient, input_gradient_batch, logits_batch
from .seeding import derive_rng


@dataclass(frozen=True)
class Attribution:
    values: np.ndarray
    method_id: str
    normalized: bool = False


@dataclass(frozen=True)
class ExplainerConfig:
    ig_steps: int = 32
    ig_baseline: float = 0.0
    occlusion_patch: int = 4
    occlusion_baseline: float = 0.0
    shap_samples: int = 5
    shap_noise_std: float = 0.1
    shap_bounds: tuple = (0.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.ig_steps < 1 or self.occlusion_patch < 1 or self.shap_samples < 1:
            raise ValueError("ig_steps, occlusion_patch and shap_samples must be >= 1")


def explain_gradient(net: Net, x, label: int, cfg: ExplainerConfig = None) -> Attribution:
    return Attribution(input_gradient(net, x, label), "gradient")


def explain_saliency(net: Net, x, label: int, cfg: ExplainerConfig = None) -> Attribution:
    return Attribution(np.abs(input_gradient(net, x, label)), "saliency")


def explain_input_x_gradient(net: Net, x, label: int, cfg: ExplainerConfig = None) -> Attribution:
    x = np.asarray(x, dtype=np.float64)
    return Attribution(x * input_gradient(net, x, label), "input_x_gradient")


def explain_integrated_gradients(net: Net, x, label: int, cfg: ExplainerConfig) -> Attribution:
    """Midpoint Riemann sum of gradients along the straight path baseline -> x."""
    x = np.asarray(x, dtype=np.float64)
    baseline = np.broadcast_to(np.asarray(cfg.ig_baseline, dtype=np.float64), x.shape)
    steps = cfg.ig_steps
    alphas = (np.arange(steps) + 0.5) / steps
    points = baseline[None, :] + alphas[:, None] * (x - baseline)[None, :]
    grads = input_gradient_batch(net, points, label)
    values = (x - baseline) * grads.mean(axis=0)
    return Attribution(values, "integrated_gradients")


def explain_occlusion(net: Net, x, label: int, cfg: ExplainerConfig) -> Attribution:
    """Drop in the class logit when a block of features is set to the baseline.

    Blocks of `occlusion_patch` consecutive features tile the input; a final
    smaller block is allowed when the length does not divide evenly.  Every
    feature in a block receives the block's full logit drop.
    """
    x = np.asarray(x, dtype=np.float64)
    base_logit = logits_batch(net, x[None, :])[0, label]
    patch = cfg.occlusion_patch
    n_blocks = (x.size + patch - 1) // patch
    occluded = np.repeat(x[None, :], n_blocks, axis=0)
    for row, start in enumerate(range(0, x.size, patch)):
        occluded[row, start : start + patch] = cfg.occlusion_baseline
    drops = base_logit - logits_batch(net, occluded)[:, label]
    values = np.empty_like(x)
    for row, start in enumerate(range(0, x.size, patch)):
        values[start : start + patch] = drops[row]
    return Attribution(values, "occlusion")


def explain_gradient_shap(net: Net, x, label: int, cfg: ExplainerConfig) -> Attribution:
    """Expected-gradients estimate: jittered baselines, random interpolation.

    Baselines are drawn uniformly over `shap_bounds` with Gaussian jitter of
    std `shap_noise_std`; one uniform interpolation coefficient is drawn per
    baseline.  The average of (x - baseline) * grad(point) over the samples
    is returned.  Deterministic for a fixed cfg.seed.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = derive_rng("gradient_shap", cfg.seed)
    low, high = cfg.shap_bounds
    baselines = rng.uniform(low, high, size=(cfg.shap_samples, x.size))
    baselines = baselines + rng.normal(0.0, cfg.shap_noise_std, size=baselines.shape)
    ts = rng.uniform(0.0, 1.0, size=cfg.shap_samples)
    points = baselines + ts[:, None] * (x[None, :] - baselines)
    grads = input_gradient_batch(net, points, label)
    values = ((x[None, :] - baselines) * grads).mean(axis=0)
    return Attribution(values, "gradient_shap")


def normalize(a: Attribution) -> Attribution:
    """Divide by the root of the average squared value; all-zero maps pass through."""
    rms = float(np.sqrt(np.mean(a.values**2)))
    if rms == 0.0:
        return replace(a, normalized=False)
    return Attribution(a.values / rms, a.method_id, normalized=True)


# --- method registry ------------------------------------------------------

METHODS = {
    "gradient": explain_gradient,
    "saliency": explain_saliency,
    "input_x_gradient": explain_input_x_gradient,
    "integrated_gradients": explain_integrated_gradients,
    "occlusion": explain_occlusion,
    "gradient_shap": explain_gradient_shap,
}

# cheap placeholder methods for pipeline checks where only the plumbing
# matters (the adversarial estimators ignore the attribution entirely)
def _synthetic_flat(net, x, label, cfg=None):
    return Attribution(np.ones_like(np.asarray(x, dtype=np.float64)), "synthetic_flat")


def _synthetic_input(net, x, label, cfg=None):
    return Attribution(np.asarray(x, dtype=np.float64).copy(), "synthetic_input")


def _synthetic_negative(net, x, label, cfg=None):
    return Attribution(-np.asarray(x, dtype=np.float64), "synthetic_negative")


def _synthetic_noise(net, x, label, cfg=None):
    seed = cfg.seed if cfg is not None else 0
    rng = derive_rng("synthetic_noise", seed)
    return Attribution(rng.normal(size=np.asarray(x).shape), "synthetic_noise")


SYNTHETIC_METHODS = {
    "synthetic_flat": _synthetic_flat,
    "synthetic_input": _synthetic_input,
    "synthetic_negative": _synthetic_negative,
    "synthetic_noise": _synthetic_noise,
}

ALL_METHODS = {**METHODS, **SYNTHETIC_METHODS}


def build_explainer(method_id: str, cfg: ExplainerConfig):
    """Wrap a method into normalized callable(net, x, label) -> Attribution."""
    if method_id not in ALL_METHODS:
        raise KeyError(f"unknown explanation method {method_id!r}")
    fn = ALL_METHODS[method_id]

    def explainer(net, x, label):
        return normalize(fn(net, x, label, cfg))

    explainer.method_id = method_id
    return explainer
