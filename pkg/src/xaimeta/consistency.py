"""Consistency criteria and the meta-evaluation orchestrator.

Intra-consistency (IAC) is the mean Wilcoxon signed-rank p-value between
unperturbed and perturbed score sets: high under minor noise means the
estimator is resilient, low under disruption means it reacts.  Inter-
consistency (IEC) checks ranking behaviour across explanation methods:
under minor noise the method ranking should be preserved, under disruption
the unperturbed score should strictly beat the perturbed one (with the
comparison inverted for lower-is-better estimators).  The four criteria,
with the adversarial-reactivity IAC reverse-scored so that higher is always
better, average into one meta-consistency (MC) score.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import stats
from .errors import MetaEvaluationError
from .estimators import LOWER_BETTER, EstimatorConfig, make_scorer
from .net import Net
from .perturb import DISRUPTIVE, MINOR, CollectResult, collect, input_spec, model_spec
from .seeding import derive_seed

IPT = "ipt"
MPT = "mpt"
CRITERIA = ("iac_nr", "iac_ar", "iec_nr", "iec_ar")


@dataclass(frozen=True)
class MetaVector:
    """One meta-evaluation outcome; iac_ar is stored reverse-scored."""

    iac_nr: float
    iac_ar: float
    iec_nr: float
    iec_ar: float
    mc: float
    test: str
    estimator_id: str

    def entries(self) -> np.ndarray:
        return np.array([self.iac_nr, self.iac_ar, self.iec_nr, self.iec_ar])


def meta_vector(iac_nr, iac_ar_raw, iec_nr, iec_ar, test="", estimator_id="") -> MetaVector:
    """Assemble the 4-entry record; the AR p-value enters as 1 - p."""
    entries = [float(iac_nr), 1.0 - float(iac_ar_raw), float(iec_nr), float(iec_ar)]
    for value in entries:
        if not -1e-12 <= value <= 1 + 1e-12:
            raise MetaEvaluationError(f"criterion outside [0, 1]: {entries}")
    return MetaVector(*entries, mc=float(np.mean(entries)), test=test, estimator_id=estimator_id)


def iac(unperturbed, perturbed, retained, unperturbed_ok=None) -> float:
    """Mean two-sided Wilcoxon p-value between the unperturbed scores and
    each perturbed column, over retained pairs only.

    Columns with fewer than two usable pairs are skipped; if every column is
    degenerate the criterion is undefined and the run errors out.
    """
    unperturbed = np.asarray(unperturbed, dtype=np.float64)
    perturbed = np.asarray(perturbed, dtype=np.float64)
    retained = np.asarray(retained, dtype=bool)
    if unperturbed_ok is None:
        unperturbed_ok = np.ones(unperturbed.size, dtype=bool)
    ps = []
    for k in range(perturbed.shape[1]):
        pairs = retained[:, k] & unperturbed_ok
        if pairs.sum() < 2:
            continue
        ps.append(stats.wilcoxon_signed_rank(unperturbed[pairs], perturbed[pairs, k]))
    if not ps:
        raise MetaEvaluationError("every perturbed column is degenerate; IAC undefined")
    return float(np.mean(ps))


def iec_minor(qbar, qbar_m) -> float:
    """Fraction of method ranks preserved between the unperturbed and
    minor-perturbed score matrices, row by row."""
    qbar = np.asarray(qbar, dtype=np.float64)
    qbar_m = np.asarray(qbar_m, dtype=np.float64)
    if qbar.shape != qbar_m.shape or qbar.ndim != 2 or qbar.shape[1] < 2:
        raise ValueError("IEC needs matching (N, L) matrices with L >= 2")
    agree = 0
    for i in range(qbar.shape[0]):
        agree += int(
            np.sum(stats.rank_descending(qbar[i]) == stats.rank_descending(qbar_m[i]))
        )
    return agree / qbar.size


def iec_disruptive(qbar, qbar_d, lower_better: bool = False) -> float:
    """Fraction of entries where the unperturbed score strictly beats the
    disruptively perturbed one; ties score zero.  For lower-is-better
    estimators the comparison is inverted."""
    qbar = np.asarray(qbar, dtype=np.float64)
    qbar_d = np.asarray(qbar_d, dtype=np.float64)
    if qbar.shape != qbar_d.shape or qbar.ndim != 2:
        raise ValueError("IEC needs matching (N, L) matrices")
    wins = (qbar_d > qbar) if lower_better else (qbar_d < qbar)
    return float(wins.mean())


def ranking_matrices(result: CollectResult):
    """Per-sample method-score matrices (Qbar, Qbar') from a collect run.

    Perturbed scores are averaged over retained draws; samples without a
    full row across methods (dropped) are excluded from both matrices.
    """
    method_ids = list(result.per_method)
    n = result.per_method[method_ids[0]].unperturbed.size
    keep = [i for i in range(n) if i not in set(result.dropped)]
    qbar = np.empty((len(keep), len(method_ids)))
    qbar_prime = np.empty_like(qbar)
    for j, method_id in enumerate(method_ids):
        matrix = result.per_method[method_id]
        for row, i in enumerate(keep):
            qbar[row, j] = matrix.unperturbed[i]
            draws = matrix.perturbed[i, matrix.retained[i]]
            # the mean of identical draws is that value exactly; bypassing
            # the float division keeps strict tie comparisons honest
            qbar_prime[row, j] = draws[0] if (draws == draws[0]).all() else draws.mean()
    return qbar, qbar_prime


def iac_over_methods(result: CollectResult) -> float:
    values = [
        iac(m.unperturbed, m.perturbed, m.retained, m.unperturbed_ok)
        for m in result.per_method.values()
    ]
    return float(np.mean(values))


@dataclass
class BenchmarkSetup:
    """Materialized inputs of a meta-evaluation run."""

    net: Net
    inputs: np.ndarray
    bounds: tuple
    methods: list  # [(method_id, explainer), ...]
    estimators: list  # [(estimator_id, EstimatorConfig), ...]
    tests: list  # subset of {"ipt", "mpt"}
    K: int = 5
    iterations: int = 3
    master_seed: int = 0
    dataset_mean: float | None = None
    masks: np.ndarray | None = None
    perturb_templates: dict = field(default_factory=dict)  # (test, strength) -> PerturbSpec

    def __post_init__(self):
        if len(self.methods) < 2:
            raise MetaEvaluationError("the ranking criterion needs at least two methods")
        if self.K < 1 or self.iterations < 1:
            raise MetaEvaluationError("K and iterations must be >= 1")
        for test in self.tests:
            if test not in (IPT, MPT):
                raise MetaEvaluationError(f"unknown test type {test!r}")
        defaults = {
            (IPT, MINOR): input_spec(MINOR),
            (IPT, DISRUPTIVE): input_spec(DISRUPTIVE),
            (MPT, MINOR): model_spec(MINOR),
            (MPT, DISRUPTIVE): model_spec(DISRUPTIVE),
        }
        defaults.update(self.perturb_templates)
        self.perturb_templates = defaults


@dataclass
class CellResult:
    """Aggregated outcome of one estimator x test cell."""

    estimator_id: str
    test: str
    mean: MetaVector
    std: dict  # per criterion and mc
    per_iteration: list
    diagnostics: dict


def evaluate_cell(setup: BenchmarkSetup, estimator_id: str, cfg, test: str) -> CellResult:
    """Run `iterations` independent repetitions of one estimator x test."""
    vectors = []
    diagnostics = {"dropped": [], "undefined": [], "total": [], "mean_attempts": []}
    n = setup.inputs.shape[0]
    for iteration in range(setup.iterations):
        cell_seed = derive_seed(setup.master_seed, test, estimator_id, iteration)
        scorer = make_scorer(
            estimator_id, cfg, n_samples=n, state_seed=derive_seed(cell_seed, "adv")
        )
        collects = {}
        for strength in (MINOR, DISRUPTIVE):
            spec = replace(
                setup.perturb_templates[(test, strength)],
                seed=derive_seed(cell_seed, strength),
            )
            collects[strength] = collect(
                setup.net,
                setup.inputs,
                setup.methods,
                scorer,
                spec,
                setup.K,
                setup.bounds,
                dataset_mean=setup.dataset_mean,
                masks=setup.masks,
            )
        iac_nr = iac_over_methods(collects[MINOR])
        iac_ar_raw = iac_over_methods(collects[DISRUPTIVE])
        qbar_nr, qbar_m = ranking_matrices(collects[MINOR])
        qbar_ar, qbar_d = ranking_matrices(collects[DISRUPTIVE])
        vectors.append(
            meta_vector(
                iac_nr,
                iac_ar_raw,
                iec_minor(qbar_nr, qbar_m),
                iec_disruptive(qbar_ar, qbar_d, scorer.direction == LOWER_BETTER),
                test=test,
                estimator_id=estimator_id,
            )
        )
        for strength in (MINOR, DISRUPTIVE):
            r = collects[strength]
            diagnostics["dropped"].append(len(r.dropped))
            diagnostics["undefined"].append(r.undefined_count)
            diagnostics["total"].append(r.total_count)
            diagnostics["mean_attempts"].append(r.mean_attempts)
    return CellResult(
        estimator_id=estimator_id,
        test=test,
        mean=_mean_vector(vectors, test, estimator_id),
        std=_std_entries(vectors),
        per_iteration=vectors,
        diagnostics=diagnostics,
    )


def _mean_vector(vectors, test, estimator_id) -> MetaVector:
    entries = np.array([v.entries() for v in vectors])
    means = entries.mean(axis=0)
    return MetaVector(
        *(float(v) for v in means),
        mc=float(np.mean([v.mc for v in vectors])),
        test=test,
        estimator_id=estimator_id,
    )


def _std_entries(vectors) -> dict:
    entries = np.array([v.entries() for v in vectors])
    mcs = np.array([v.mc for v in vectors])
    ddof = 1 if len(vectors) > 1 else 0
    stds = entries.std(axis=0, ddof=ddof) if len(vectors) > 1 else np.zeros(4)
    return {
        "iac_nr": float(stds[0]),
        "iac_ar": float(stds[1]),
        "iec_nr": float(stds[2]),
        "iec_ar": float(stds[3]),
        "mc": float(mcs.std(ddof=ddof)) if len(vectors) > 1 else 0.0,
    }


def run_meta_evaluation(setup: BenchmarkSetup, jobs: int = 1) -> dict:
    """Evaluate every estimator x test cell.

    Cells are independent and may run on `jobs` worker threads; the result
    (keyed (estimator_id, test)) is identical for any worker count because
    each cell derives its own seeds.
    """
    cells = [
        (estimator_id, cfg, test)
        for estimator_id, cfg in setup.estimators
        for test in setup.tests
    ]
    if jobs <= 1:
        outcomes = [evaluate_cell(setup, e, c, t) for e, c, t in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(evaluate_cell, setup, e, c, t) for e, c, t in cells]
            outcomes = [f.result() for f in futures]
    return {(r.estimator_id, r.test): r for r in outcomes}
