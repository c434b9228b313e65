"""One-layer supervised readout: cosine scores plus a delta-rule update.

Maps second-layer activity vectors to action labels. Scores are plain cosine
similarities against one weight vector per class; training nudges each
weight vector by beta * x * (target - score) against one-hot targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LabelConfig:
    beta: float = 0.1
    epochs: int = 100
    # The source text prints the update with the error sign reversed, which
    # drives weights away from their targets; paper_sign=True reproduces that
    # printed form for regression purposes.
    paper_sign: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class ClassScores:
    """Cosine activity per class and the winning index."""

    scores: np.ndarray
    predicted: int


@dataclass
class TrainingReport:
    epoch_accuracy: list[float] = field(default_factory=list)
    epoch_error: list[float] = field(default_factory=list)  # mean squared target error

    @property
    def final_accuracy(self) -> float:
        return self.epoch_accuracy[-1]


class LabelingLayer:
    """N class-weight vectors scored by cosine similarity."""

    def __init__(self, class_names: list[str], input_dim: int, config: LabelConfig):
        if len(class_names) < 2:
            raise ValueError("labeling needs at least 2 classes")
        if input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        self.class_names = list(class_names)
        self.input_dim = input_dim
        self.config = config
        rng = np.random.default_rng(config.rng_seed)
        weights = rng.random((len(class_names), input_dim))
        self.weights = weights / np.linalg.norm(weights, axis=1, keepdims=True)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def score(self, x: np.ndarray) -> ClassScores:
        """Cosine similarity against every class; ties go to the smallest
        index. Scale-free: score(c*x) == score(x) for c > 0."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"input shape {x.shape} != ({self.input_dim},)")
        x_norm = np.linalg.norm(x)
        if x_norm == 0.0:
            raise ValueError("cannot score a zero input vector")
        w_norms = np.linalg.norm(self.weights, axis=1)
        scores = (self.weights @ x) / (w_norms * x_norm)
        return ClassScores(scores=scores, predicted=int(np.argmax(scores)))

    def train_supervised(
        self, examples: list[tuple[np.ndarray, int]], epochs: int | None = None
    ) -> TrainingReport:
        """Delta-rule training against one-hot targets, in presentation order.

        Reports per-epoch training accuracy and mean squared target error.
        """
        if not examples:
            raise ValueError("no training examples")
        epochs = self.config.epochs if epochs is None else epochs
        beta = self.config.beta
        sign = -1.0 if self.config.paper_sign else 1.0
        report = TrainingReport()
        for _ in range(epochs):
            correct = 0
            sq_error = 0.0
            for x, target in examples:
                result = self.score(x)
                if result.predicted == target:
                    correct += 1
                desired = np.zeros(self.n_classes)
                desired[target] = 1.0
                errs = desired - result.scores
                sq_error += float(errs @ errs)
                self.weights += sign * beta * np.outer(errs, x)
            report.epoch_accuracy.append(correct / len(examples))
            report.epoch_error.append(sq_error / len(examples))
        return report

    # -- persistence -------------------------------------------------------

    def state_lines(self) -> list[str]:
        cfg = self.config
        lines = [
            f"labels version=1 classes={self.n_classes} dim={self.input_dim} "
            f"beta={cfg.beta:.17g} epochs={cfg.epochs} "
            f"paper_sign={int(cfg.paper_sign)} seed={cfg.rng_seed}",
        ]
        for name, row in zip(self.class_names, self.weights):
            safe = name.replace(" ", "\\x20")
            lines.append(f"lw {safe} " + " ".join(f"{v:.17g}" for v in row))
        return lines

    @classmethod
    def from_state_lines(cls, lines: list[str]) -> "LabelingLayer":
        from .growing_grid import _parse_kv

        header = _parse_kv(lines[0].split(None, 1)[1])
        if header.get("version") != "1":
            raise ValueError(f"unsupported label-layer version {header.get('version')!r}")
        n, dim = int(header["classes"]), int(header["dim"])
        config = LabelConfig(
            beta=float(header["beta"]),
            epochs=int(header["epochs"]),
            paper_sign=bool(int(header["paper_sign"])),
            rng_seed=int(header["seed"]),
        )
        if len(lines) != n + 1:
            raise ValueError(f"expected {n} class-weight rows, found {len(lines) - 1}")
        names = []
        weights = np.empty((n, dim))
        for i, line in enumerate(lines[1:]):
            fields = line.split()
            if fields[0] != "lw" or len(fields) != dim + 2:
                raise ValueError(f"class row {i}: expected 'lw <name>' plus {dim} values")
            names.append(fields[1].replace("\\x20", " "))
            weights[i] = [float(v) for v in fields[2:]]
        layer = cls(names, dim, config)
        layer.weights = weights
        return layer
