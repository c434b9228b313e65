"""Experiment protocols and metrics: splits, confusion matrices, and the
growing-grid vs SOM efficiency benchmark."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .pipeline import PipelineConfig, PipelineModel, predict, train_pipeline
from .skeleton import Dataset

log = logging.getLogger(__name__)

HOLDOUT = "holdout"
KFOLD = "kfold"


@dataclass(frozen=True)
class SplitSpec:
    """Random holdout or k-fold split, optionally stratified by class."""

    mode: str = HOLDOUT
    test_fraction: float = 0.25
    folds: int = 10
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.mode not in (HOLDOUT, KFOLD):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ValueError("k-fold needs at least 2 folds")


def split(dataset: Dataset, spec: SplitSpec) -> list[tuple[Dataset, Dataset]]:
    """Deterministic (train, test) pairs: one for holdout, k for k-fold."""
    rng = np.random.default_rng(spec.seed)
    n = len(dataset)
    labels = dataset.labels()

    if spec.mode == HOLDOUT:
        if spec.stratified:
            test_idx = _stratified_holdout(labels, spec.test_fraction, rng)
        else:
            perm = rng.permutation(n)
            test_idx = set(perm[: round(n * spec.test_fraction)].tolist())
        train_idx = [i for i in range(n) if i not in test_idx]
        return [(dataset.subset(train_idx), dataset.subset(sorted(test_idx)))]

    fold_of = np.empty(n, dtype=int)
    if spec.stratified:
        for c in np.unique(labels):
            members = np.flatnonzero(labels == c)
            if len(members) < spec.folds:
                raise ValueError(
                    f"class {c} has {len(members)} sequences, fewer than "
                    f"{spec.folds} folds"
                )
            members = rng.permutation(members)
            for i, idx in enumerate(members):
                fold_of[idx] = i % spec.folds
    else:
        perm = rng.permutation(n)
        for i, idx in enumerate(perm):
            fold_of[idx] = i % spec.folds
    pairs = []
    for f in range(spec.folds):
        test_idx = [i for i in range(n) if fold_of[i] == f]
        train_idx = [i for i in range(n) if fold_of[i] != f]
        pairs.append((dataset.subset(train_idx), dataset.subset(test_idx)))
    return pairs


def _stratified_holdout(labels: np.ndarray, fraction: float, rng) -> set[int]:
    """Largest-remainder allocation keeps every class within one sequence of
    the global test proportion."""
    n = len(labels)
    target_total = round(n * fraction)
    classes = np.unique(labels)
    exact = {c: np.count_nonzero(labels == c) * fraction for c in classes}
    counts = {c: int(np.floor(exact[c])) for c in classes}
    shortfall = target_total - sum(counts.values())
    by_remainder = sorted(classes, key=lambda c: (exact[c] - counts[c]), reverse=True)
    for c in by_remainder[:shortfall]:
        counts[c] += 1
    test: set[int] = set()
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        test.update(members[: counts[c]].tolist())
    return test


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    category_names: list[str]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def per_class_accuracy(self) -> list[float | None]:
        out = []
        for i in range(self.counts.shape[0]):
            row_sum = int(self.counts[i].sum())
            out.append(float(self.counts[i, i]) / row_sum if row_sum else None)
        return out

    def to_csv(self) -> str:
        header = "true\\predicted," + ",".join(self.category_names)
        lines = [header]
        for i, name in enumerate(self.category_names):
            lines.append(name + "," + ",".join(str(int(v)) for v in self.counts[i]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "categories": self.category_names,
                "counts": self.counts.astype(int).tolist(),
                "accuracy": self.accuracy,
                "per_class_accuracy": self.per_class_accuracy(),
            },
            indent=2,
        )


@dataclass
class EvalResult:
    accuracy: float
    confusion: ConfusionMatrix
    per_class: list[float | None]
    predictions: list[int] = field(default_factory=list, repr=False)


def evaluate(model: PipelineModel, test_set: Dataset) -> EvalResult:
    """Accuracy, confusion matrix, and per-class accuracy on a test set."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    if test_set.category_names != model.category_names:
        raise ValueError(
            f"category mismatch: model {model.category_names} vs "
            f"dataset {test_set.category_names}"
        )
    n = len(model.category_names)
    counts = np.zeros((n, n), dtype=np.int64)
    predictions = []
    for seq in test_set.sequences:
        scored = predict(model, seq)
        counts[seq.label, scored.predicted] += 1
        predictions.append(scored.predicted)
    confusion = ConfusionMatrix(counts=counts, category_names=list(model.category_names))
    return EvalResult(
        accuracy=confusion.accuracy,
        confusion=confusion,
        per_class=confusion.per_class_accuracy(),
        predictions=predictions,
    )


@dataclass
class CVResult:
    fold_accuracies: list[float]
    pooled_confusion: ConfusionMatrix

    @property
    def pooled_accuracy(self) -> float:
        # pooled correct/total across folds, not the mean of fold accuracies
        return self.pooled_confusion.accuracy


def cross_validate(
    config: PipelineConfig, dataset: Dataset, spec: SplitSpec, threads: int = 1
) -> CVResult:
    """Train and evaluate one pipeline per fold; pool the confusion counts."""
    pairs = split(dataset, spec)

    def run_fold(pair):
        train_set, test_set = pair
        model = train_pipeline(config, train_set)
        return evaluate(model, test_set)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, pairs))
    else:
        results = [run_fold(p) for p in pairs]
    counts = sum(r.confusion.counts for r in results)
    return CVResult(
        fold_accuracies=[r.accuracy for r in results],
        pooled_confusion=ConfusionMatrix(
            counts=counts, category_names=list(dataset.category_names)
        ),
    )


# ---------------------------------------------------------------------------
# Backend benchmark
# ---------------------------------------------------------------------------

# Ladder rungs are fractions of each backend's designed schedule. The grid
# cannot stop before its growth phase ends, so its rungs sit high; the SOM
# anneals over a long designed schedule and is probed from one eighth up.
DEFAULT_GG_LADDER = (0.7, 0.85, 1.0)
DEFAULT_SOM_LADDER = (0.125, 0.25, 0.5, 1.0)


@dataclass
class BackendBench:
    backend: str
    accuracy: float            # at the epochs-to-criterion budget
    converged_accuracy: float  # at the full preset budget
    epochs: int                # total epochs to reach the accuracy criterion
    wall_seconds: float        # dedicated timed run at that budget
    relative_time: float = 0.0
    ladder: list[tuple[int, float]] = field(default_factory=list)  # (epochs, accuracy)


@dataclass
class BenchReport:
    gg: BackendBench
    som: BackendBench
    criterion_points: float

    def to_json(self) -> str:
        def encode(b: BackendBench):
            return {
                "backend": b.backend,
                "accuracy": b.accuracy,
                "converged_accuracy": b.converged_accuracy,
                "epochs": b.epochs,
                "wall_seconds": b.wall_seconds,
                "relative_time": b.relative_time,
                "ladder": [{"epochs": e, "accuracy": a} for e, a in b.ladder],
            }

        return json.dumps(
            {
                "criterion_points": self.criterion_points,
                "gg": encode(self.gg),
                "som": encode(self.som),
            },
            indent=2,
        )


def _neuron_counts(config: PipelineConfig) -> tuple[int, int]:
    if config.backend == "gg":
        return config.layer1.gamma, config.layer2.gamma
    return (
        config.layer1.rows * config.layer1.cols,
        config.layer2.rows * config.layer2.cols,
    )


def _scaled(config: PipelineConfig, frac: float) -> PipelineConfig:
    """Stop the run at a fraction of the designed schedule; annealing still
    spans the full schedule, as the architecture defines it."""
    return replace(
        config,
        layer1_epochs=max(1, round(config.layer1_epochs * frac)),
        layer2_epochs=max(1, round(config.layer2_epochs * frac)),
        layer1_schedule=config.layer1_schedule or config.layer1_epochs,
        layer2_schedule=config.layer2_schedule or config.layer2_epochs,
    )


def _bench_backend(
    config: PipelineConfig,
    train_set: Dataset,
    test_set: Dataset,
    ladder: tuple[float, ...],
    criterion_points: float,
) -> BackendBench:
    runs: list[tuple[int, float, float]] = []  # (epochs, accuracy, train wall)
    for frac in ladder:
        cfg = _scaled(config, frac)
        t0 = time.perf_counter()
        try:
            model = train_pipeline(cfg, train_set)
        except RuntimeError as exc:
            # budget too small for the growth phase; not a candidate
            log.info("bench %s: %.3g of schedule infeasible (%s)",
                     config.backend, frac, exc)
            continue
        wall = time.perf_counter() - t0
        accuracy = evaluate(model, test_set).accuracy
        runs.append((model.training_info.total_epochs, accuracy, wall))
        log.info("bench %s: %d epochs -> accuracy %.3f (%.1fs)",
                 config.backend, runs[-1][0], accuracy, wall)
    if not runs:
        raise RuntimeError(f"no feasible ladder budgets for backend {config.backend}")
    converged = runs[-1][1]
    threshold = converged - criterion_points
    chosen = min(
        (run for run in runs if run[1] >= threshold), key=lambda run: run[0]
    )
    return BackendBench(
        backend=config.backend,
        accuracy=chosen[1],
        converged_accuracy=converged,
        epochs=chosen[0],
        wall_seconds=chosen[2],
        ladder=[(e, a) for e, a, _ in runs],
    )


def benchmark_backends(
    dataset: Dataset,
    gg_config: PipelineConfig,
    som_config: PipelineConfig,
    spec: SplitSpec,
    gg_ladder: tuple[float, ...] = DEFAULT_GG_LADDER,
    som_ladder: tuple[float, ...] = DEFAULT_SOM_LADDER,
    criterion_points: float = 0.02,
) -> BenchReport:
    """Epochs-to-criterion and wall-clock comparison of the two backends.

    Both pipelines see the same split. Each backend trains at a ladder of
    stop points on its designed schedule; its epoch count is the smallest
    stop whose test accuracy comes within criterion_points of its own
    full-schedule accuracy. Wall-clock shares come from dedicated
    single-thread re-runs at those stop points.
    """
    if _neuron_counts(gg_config) != _neuron_counts(som_config):
        raise ValueError(
            f"backends must use matching neuron counts, got "
            f"{_neuron_counts(gg_config)} vs {_neuron_counts(som_config)}"
        )
    train_set, test_set = split(dataset, spec)[0]
    gg = _bench_backend(gg_config, train_set, test_set, gg_ladder, criterion_points)
    som = _bench_backend(som_config, train_set, test_set, som_ladder, criterion_points)
    total = gg.wall_seconds + som.wall_seconds
    gg.relative_time = gg.wall_seconds / total
    som.relative_time = som.wall_seconds / total
    return BenchReport(gg=gg, som=som, criterion_points=criterion_points)
