"""Train a tiny model and inspect the attribution methods.

Walks through the base layer of the toolkit: a dense/relu net trained on
synthetic blobs, the six attribution methods, and the second-moment
normalization that puts their maps on a comparable scale.
"""
import numpy as np

from xaimeta.dataio import synth_blobs
from xaimeta.explain import ExplainerConfig, METHODS, normalize
from xaimeta.net import accuracy, forward, train_tiny

dataset = synth_blobs(n=200, d=8, classes=4, seed=7)
net = train_tiny((16,), dataset.inputs, dataset.labels, epochs=20, seed=7)
print(f"trained 8-16-4 net, training accuracy {accuracy(net, dataset.inputs, dataset.labels):.3f}")

x = dataset.inputs[0]
pred = forward(net, x)
print(f"\nsample 0: predicted class {pred.label}, probs {np.round(pred.probs, 3)}")

cfg = ExplainerConfig(ig_steps=64, occlusion_patch=2, shap_samples=20, seed=1)
print("\nraw attribution maps (one row per method):")
for name, method in METHODS.items():
    attribution = method(net, x, pred.label, cfg)
    print(f"  {name:22s} {np.round(attribution.values, 3)}")

print("\nafter normalization every map has unit mean square:")
for name, method in METHODS.items():
    normalized = normalize(method(net, x, pred.label, cfg))
    print(f"  {name:22s} mean square = {np.mean(normalized.values**2):.6f}")
