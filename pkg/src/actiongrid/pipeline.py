"""End-to-end composition of the five processing layers.

preprocessing -> first-layer map -> ordered vector representation ->
second-layer map -> labeling layer, trainable with either the growing-grid
or the SOM backend, persisted as one versioned text document.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .growing_grid import FINETUNE, GROWTH, GridConfig, GrowingGrid, GrowthReport
from .label_layer import ClassScores, LabelConfig, LabelingLayer, TrainingReport
from .patterns import (
    ActivityPattern,
    OrderedPattern,
    compute_kmax,
    dedup_consecutive,
    fit_to_kmax,
    pad_single_point,
    resample,
    trace_sequence,
)
from .preprocess import CanonicalSkeleton, PreprocessConfig, build_canonical, preprocess_sequence
from .skeleton import Dataset, SkeletonLayout, SkeletonSequence
from .som import SomConfig, SomNet, som_train

log = logging.getLogger(__name__)

MODEL_VERSION = 1

BACKEND_GG = "gg"
BACKEND_SOM = "som"

LABEL_INPUT_ACTIVITY = "activity_map"
LABEL_INPUT_ONEHOT = "winner_onehot"


class ModelFormatError(Exception):
    """Model document cannot be parsed or has the wrong version."""


@dataclass
class PipelineConfig:
    """Full training recipe for one experiment."""

    preprocess: PreprocessConfig
    layer1: GridConfig | SomConfig
    layer2: GridConfig | SomConfig
    label: LabelConfig
    backend: str = BACKEND_GG
    layer1_epochs: int = 50
    layer2_epochs: int = 100
    label_input: str = LABEL_INPUT_ACTIVITY
    shuffle_seed: int = 0
    # designed schedule lengths; learning-rate/radius decay spans these even
    # when layerN_epochs stops a run short (None: same as the run length)
    layer1_schedule: int | None = None
    layer2_schedule: int | None = None

    def __post_init__(self):
        if self.backend not in (BACKEND_GG, BACKEND_SOM):
            raise ValueError(f"unknown backend {self.backend!r}")
        want = GridConfig if self.backend == BACKEND_GG else SomConfig
        for name, cfg in (("layer1", self.layer1), ("layer2", self.layer2)):
            if not isinstance(cfg, want):
                raise ValueError(
                    f"{name} config is {type(cfg).__name__}, but backend "
                    f"{self.backend!r} needs {want.__name__}"
                )
        if self.label_input not in (LABEL_INPUT_ACTIVITY, LABEL_INPUT_ONEHOT):
            raise ValueError(f"unknown label_input {self.label_input!r}")
        if self.layer1_epochs < 1 or self.layer2_epochs < 1:
            raise ValueError("epoch budgets must be at least 1")


@dataclass
class PhaseInfo:
    epochs_used: int
    wall_seconds: float
    growth: GrowthReport | None = None


@dataclass
class TrainingInfo:
    layer1: PhaseInfo
    layer2: PhaseInfo
    label_report: TrainingReport
    k_max: int
    total_wall_seconds: float

    @property
    def total_epochs(self) -> int:
        return self.layer1.epochs_used + self.layer2.epochs_used


@dataclass
class PipelineModel:
    """Everything needed to classify a new sequence."""

    backend: str
    category_names: list[str]
    layout: SkeletonLayout
    preprocess: PreprocessConfig
    canonical: CanonicalSkeleton
    layer1: GrowingGrid | SomNet
    k_max: int
    layer2: GrowingGrid | SomNet
    labels: LabelingLayer
    label_input: str = LABEL_INPUT_ACTIVITY
    training_info: TrainingInfo | None = field(default=None, repr=False, compare=False)

    def predict(self, seq: SkeletonSequence) -> ClassScores:
        return predict(self, seq)


def _epoch_stream(frames: np.ndarray, units: list[np.ndarray], epochs: int, rng):
    """Yield frames for `epochs` epochs, unit order reshuffled per epoch,
    frame order inside a unit preserved."""
    for _ in range(epochs):
        for u in rng.permutation(len(units)):
            for idx in units[u]:
                yield frames[idx]


def _train_layer(
    cfg: GridConfig | SomConfig,
    backend: str,
    frames: np.ndarray,
    units: list[np.ndarray],
    epoch_budget: int,
    shuffle_seed: tuple,
    schedule_epochs: int | None = None,
) -> tuple[GrowingGrid | SomNet, PhaseInfo]:
    start = time.perf_counter()
    epoch_size = frames.shape[0]
    schedule_epochs = schedule_epochs or epoch_budget
    if backend == BACKEND_GG:
        net = GrowingGrid(cfg, frames.shape[1])
        growth_rng = np.random.default_rng((*shuffle_seed, 1))
        stream = _epoch_stream(frames, units, epoch_budget, growth_rng)
        growth = net.run_growth_phase(stream, epoch_size)
        growth_epochs = math.ceil(growth.epochs_consumed)
        finetune_epochs = epoch_budget - growth_epochs
        if finetune_epochs < 1:
            raise RuntimeError(
                f"growth used {growth_epochs} of {epoch_budget} epochs, leaving "
                f"none for fine-tuning; increase the epoch budget"
            )
        net.run_finetune_phase(
            frames,
            finetune_epochs,
            shuffle_units=units,
            order_seed=int(np.random.default_rng((*shuffle_seed, 2)).integers(2**32)),
            schedule_epochs=max(schedule_epochs - growth_epochs, finetune_epochs),
        )
        info = PhaseInfo(
            epochs_used=growth_epochs + finetune_epochs,
            wall_seconds=time.perf_counter() - start,
            growth=growth,
        )
        return net, info
    cfg_schedule = replace(cfg, epochs=schedule_epochs)
    net = som_train(
        cfg_schedule,
        frames,
        shuffle_units=units,
        order_seed=int(np.random.default_rng((*shuffle_seed, 1)).integers(2**32)),
        run_epochs=epoch_budget,
    )
    return net, PhaseInfo(epochs_used=epoch_budget, wall_seconds=time.perf_counter() - start)


def _label_input_vector(model_or_net, label_input: str, vector: np.ndarray) -> np.ndarray:
    net = model_or_net
    if label_input == LABEL_INPUT_ACTIVITY:
        return net.activity_map(vector, contrast=True).reshape(-1)
    won = net.find_winner(vector)
    onehot = np.zeros(net.rows * net.cols)
    onehot[won.row * net.cols + won.col] = 1.0
    return onehot


def train_pipeline(config: PipelineConfig, train_set: Dataset) -> PipelineModel:
    """Two-phase training: first the posture map, then the pattern map
    together with the labeling layer."""
    t0 = time.perf_counter()
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    present = np.unique(train_set.labels())
    if present.size < 2:
        raise ValueError("training needs at least 2 action classes")

    canonical = build_canonical(train_set.sequences)
    per_seq = [
        preprocess_sequence(seq, config.preprocess, canonical)
        for seq in train_set.sequences
    ]
    frames = np.concatenate(per_seq, axis=0)
    units, offset = [], 0
    for arr in per_seq:
        units.append(np.arange(offset, offset + arr.shape[0]))
        offset += arr.shape[0]

    # Phase 1: the posture map.
    net1, info1 = _train_layer(
        config.layer1, config.backend, frames, units,
        config.layer1_epochs, (config.shuffle_seed, 1),
        schedule_epochs=config.layer1_schedule,
    )

    # Phase 2: trace, normalize length, train the pattern map.
    deduped = []
    for i, arr in enumerate(per_seq):
        pattern = trace_sequence(net1, arr)
        pattern.source_id = str(i)
        deduped.append(pad_single_point(dedup_consecutive(pattern)))
    k_max = compute_kmax(deduped)
    ordered = [resample(p, k_max) for p in deduped]
    pattern_vectors = np.stack([o.flattened for o in ordered])

    pattern_units = [np.array([i]) for i in range(pattern_vectors.shape[0])]
    net2, info2 = _train_layer(
        config.layer2, config.backend, pattern_vectors, pattern_units,
        config.layer2_epochs, (config.shuffle_seed, 2),
        schedule_epochs=config.layer2_schedule,
    )

    label_vectors = [
        _label_input_vector(net2, config.label_input, v) for v in pattern_vectors
    ]
    labels = LabelingLayer(
        class_names=list(train_set.category_names),
        input_dim=label_vectors[0].shape[0],
        config=config.label,
    )
    examples = list(zip(label_vectors, (int(l) for l in train_set.labels())))
    label_report = labels.train_supervised(examples)

    info = TrainingInfo(
        layer1=info1,
        layer2=info2,
        label_report=label_report,
        k_max=k_max,
        total_wall_seconds=time.perf_counter() - t0,
    )
    log.info(
        "trained %s pipeline: layer1 %dx%d (%d epochs), k_max=%d, layer2 %dx%d "
        "(%d epochs), final train accuracy %.3f",
        config.backend, net1.rows, net1.cols, info1.epochs_used, k_max,
        net2.rows, net2.cols, info2.epochs_used, label_report.final_accuracy,
    )
    return PipelineModel(
        backend=config.backend,
        category_names=list(train_set.category_names),
        layout=train_set.layout,
        preprocess=config.preprocess,
        canonical=canonical,
        layer1=net1,
        k_max=k_max,
        layer2=net2,
        labels=labels,
        label_input=config.label_input,
        training_info=info,
    )


def sequence_pattern(model: PipelineModel, seq: SkeletonSequence) -> OrderedPattern:
    """Preprocess and trace one sequence into its fixed-length pattern."""
    if seq.n_joints != model.layout.n_joints:
        raise ValueError(
            f"sequence has {seq.n_joints} joints, model expects {model.layout.n_joints}"
        )
    arr = preprocess_sequence(seq, model.preprocess, model.canonical)
    return fit_to_kmax(trace_sequence(model.layer1, arr), model.k_max)


def predict(model: PipelineModel, seq: SkeletonSequence) -> ClassScores:
    """Classify one sequence. Pure function of (model, sequence)."""
    ordered = sequence_pattern(model, seq)
    vec = _label_input_vector(model.layer2, model.label_input, ordered.flattened)
    return model.labels.score(vec)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _escape(name: str) -> str:
    return name.replace(" ", "\\x20")


def _unescape(name: str) -> str:
    return name.replace("\\x20", " ")


def model_to_text(model: PipelineModel) -> str:
    lines = ["# action recognition pipeline model"]
    lines.append(
        f"model version={MODEL_VERSION} backend={model.backend} kmax={model.k_max} "
        f"label_input={model.label_input} categories={len(model.category_names)}"
    )
    for i, name in enumerate(model.category_names):
        lines.append(f"category {i} {_escape(name)}")
    pp = model.preprocess
    lines.append(
        f"preprocess attention={int(pp.attention)} "
        f"degeneracy_tol={pp.degeneracy_tol:.17g} "
        f"max_dropped_fraction={pp.max_dropped_fraction:.17g}"
    )
    layout = model.layout
    lines.append(
        f"layout joints={layout.n_joints} stomach={layout.stomach} "
        f"left_hip={layout.left_hip} right_hip={layout.right_hip}"
    )
    lines.append("names " + ",".join(layout.joint_names))
    for name, idx in layout.partition.parts():
        lines.append(f"part {name} " + ",".join(str(j) for j in idx))
    for parent, child in layout.tree:
        lines.append(f"link {parent} {child}")
    for parent, child, length in model.canonical.links:
        lines.append(f"canon {parent} {child} {length:.17g}")
    lines.extend(model.layer1.state_lines())
    lines.extend(model.layer2.state_lines())
    lines.extend(model.labels.state_lines())
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: PipelineModel, path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path) -> PipelineModel:
    path = Path(path)
    return model_from_text(path.read_text(), origin=str(path))


def model_from_text(text: str, origin: str = "<model>") -> PipelineModel:
    from .growing_grid import _parse_kv
    from .skeleton import BodyPartition

    numbered = [
        (no, line.strip())
        for no, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    ]

    def fail(no: int, msg: str):
        raise ModelFormatError(f"{origin}:{no}: {msg}")

    if not numbered:
        raise ModelFormatError(f"{origin}: empty model document")
    if numbered[-1][1] != "end":
        fail(numbered[-1][0], "document truncated (missing 'end' marker)")

    no, header = numbered[0]
    kv = _parse_kv(header.split(None, 1)[1]) if header.startswith("model ") else None
    if kv is None:
        fail(no, "first line must be the 'model version=...' header")
    if kv.get("version") != str(MODEL_VERSION):
        fail(no, f"unsupported model version {kv.get('version')!r} "
                 f"(supported: {MODEL_VERSION})")
    backend = kv["backend"]
    k_max = int(kv["kmax"])
    label_input = kv["label_input"]
    n_categories = int(kv["categories"])

    categories: dict[int, str] = {}
    pp_kv: dict[str, str] = {}
    layout_kv: dict[str, str] = {}
    names: tuple[str, ...] = ()
    parts: dict[str, tuple[int, ...]] = {}
    tree: list[tuple[int, int]] = []
    canon: list[tuple[int, int, float]] = []
    net_blocks: list[tuple[int, list[str]]] = []
    label_block: tuple[int, list[str]] | None = None

    i = 1
    while i < len(numbered):
        no, line = numbered[i]
        kind = line.split(None, 1)[0]
        if kind == "category":
            _, idx, name = line.split(None, 2)
            categories[int(idx)] = _unescape(name)
        elif kind == "preprocess":
            pp_kv = _parse_kv(line.split(None, 1)[1])
        elif kind == "layout":
            layout_kv = _parse_kv(line.split(None, 1)[1])
        elif kind == "names":
            names = tuple(line.split(None, 1)[1].split(","))
        elif kind == "part":
            _, pname, idx = line.split(None, 2)
            parts[pname] = tuple(int(v) for v in idx.split(",")) if idx.strip() else ()
        elif kind == "link":
            _, parent, child = line.split()
            tree.append((int(parent), int(child)))
        elif kind == "canon":
            _, parent, child, length = line.split()
            canon.append((int(parent), int(child), float(length)))
        elif kind == "net":
            block = [line]
            start = no
            i += 1
            while i < len(numbered) and numbered[i][1].split(None, 1)[0] in ("netconfig", "w"):
                block.append(numbered[i][1])
                i += 1
            net_blocks.append((start, block))
            continue
        elif kind == "labels":
            block = [line]
            start = no
            i += 1
            while i < len(numbered) and numbered[i][1].startswith("lw "):
                block.append(numbered[i][1])
                i += 1
            label_block = (start, block)
            continue
        elif kind == "end":
            break
        else:
            fail(no, f"unrecognized line {line[:40]!r}")
        i += 1

    if len(categories) != n_categories:
        raise ModelFormatError(
            f"{origin}: header announces {n_categories} categories, found {len(categories)}"
        )
    if len(net_blocks) != 2:
        raise ModelFormatError(f"{origin}: expected 2 net blocks, found {len(net_blocks)}")
    if label_block is None:
        raise ModelFormatError(f"{origin}: missing labeling-layer block")

    layout = SkeletonLayout(
        n_joints=int(layout_kv["joints"]),
        joint_names=names,
        stomach=int(layout_kv["stomach"]),
        left_hip=int(layout_kv["left_hip"]),
        right_hip=int(layout_kv["right_hip"]),
        partition=BodyPartition(
            left_arm=parts.get("LeftArm", ()),
            right_arm=parts.get("RightArm", ()),
            left_leg=parts.get("LeftLeg", ()),
            right_leg=parts.get("RightLeg", ()),
            base=parts.get("Base", ()),
        ),
        tree=tuple(tree),
    )
    layout.validate()
    preprocess = PreprocessConfig(
        attention=bool(int(pp_kv["attention"])),
        degeneracy_tol=float(pp_kv["degeneracy_tol"]),
        max_dropped_fraction=float(pp_kv["max_dropped_fraction"]),
    )

    def parse_net(start: int, block: list[str]):
        cls = GrowingGrid if backend == BACKEND_GG else SomNet
        try:
            return cls.from_state_lines(block)
        except (ValueError, KeyError, IndexError) as exc:
            raise ModelFormatError(f"{origin}: net block at line {start}: {exc}")

    net1 = parse_net(*net_blocks[0])
    net2 = parse_net(*net_blocks[1])
    try:
        labels = LabelingLayer.from_state_lines(label_block[1])
    except (ValueError, KeyError, IndexError) as exc:
        raise ModelFormatError(f"{origin}: label block at line {label_block[0]}: {exc}")

    return PipelineModel(
        backend=backend,
        category_names=[categories[i] for i in range(n_categories)],
        layout=layout,
        preprocess=preprocess,
        canonical=CanonicalSkeleton(links=tuple(canon)),
        layer1=net1,
        k_max=k_max,
        layer2=net2,
        labels=labels,
        label_input=label_input,
    )
