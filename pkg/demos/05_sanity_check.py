"""Sanity-check the framework itself with adversarial estimators.

Two rigged estimators probe the criteria: one ignores perturbation entirely
(it must ace the noise-resilience checks and fail both reactivity checks,
landing exactly on [1, 0, 1, 0]), the other answers from a shifted
distribution whenever anything is perturbed (it must fail noise resilience,
with ranking agreement collapsing to chance, 1/L).
"""
from xaimeta.runconfig import config_from_tables, parse_tables
from xaimeta.runner import run_sanity

CONFIG = """
[dataset]
kind = blobs
samples = 256
features = 8
classes = 6

[model]
hidden = [16]
epochs = 20

[run]
master_seed = 42

[methods]
use = [synthetic_flat, synthetic_input, synthetic_negative, synthetic_noise]

[estimators]
use = [adversarial_deterministic, adversarial_distribution_shift]
"""

config = config_from_tables(parse_tables(CONFIG))
outcome = run_sanity(config, k=5, iterations=3)

print(f"{'test':5s} {'estimator':34s} {'criterion':9s} {'value':>8} {'expected':>14}")
for row in outcome.rows:
    lo, hi = row["expected"]
    expected = f"= {lo}" if lo == hi else f"[{lo}, {hi}]"
    print(
        f"{row['test']:5s} {row['estimator']:34s} {row['criterion']:9s} "
        f"{row['value']:8.4f} {expected:>14}"
    )
print(f"\nsanity verdict: {'PASS' if outcome.passed else 'FAIL (see rows above)'}")
