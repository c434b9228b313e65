"""Fixed-topology self-organizing map, the comparison backend.

Classic Kohonen training: Euclidean winner search, Gaussian neighborhood
shrinking from half the lattice to one cell, learning rate decaying
exponentially over the configured number of epochs. Exposes the same
winner/activity interface as the growing grid so the pipeline can swap
backends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .growing_grid import WinnerResult, _parse_kv, _parse_weight_lines


@dataclass
class SomConfig:
    """Hyperparameters of the fixed-size map."""

    rows: int
    cols: int
    sigma: float  # activity exponential factor, as in the growing grid
    alpha0: float = 0.1
    alpha_min: float | None = None    # defaults to alpha0 / 100
    radius0: float | None = None      # defaults to max(rows, cols) / 2
    radius_min: float = 1.0
    epochs: int = 10
    softmax_exp: float = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.rows * self.cols < 4:
            raise ValueError("map needs at least 4 neurons")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.radius0 is not None and self.radius0 < self.radius_min:
            raise ValueError("initial radius must not be below the final radius")

    @property
    def alpha_floor(self) -> float:
        return self.alpha_min if self.alpha_min is not None else 0.01 * self.alpha0

    @property
    def radius_start(self) -> float:
        return self.radius0 if self.radius0 is not None else max(self.rows, self.cols) / 2.0


class SomNet:
    """Fixed lattice of weight vectors with Gaussian-neighborhood training."""

    def __init__(self, config: SomConfig, input_dim: int):
        if input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        self.config = config
        self.input_dim = input_dim
        rng = np.random.default_rng(config.rng_seed)
        self.weights = rng.random((config.rows, config.cols, input_dim))
        self.trained = False
        self._row_grid = np.arange(config.rows, dtype=np.float64)[:, None]
        self._col_grid = np.arange(config.cols, dtype=np.float64)[None, :]

    @property
    def rows(self) -> int:
        return self.config.rows

    @property
    def cols(self) -> int:
        return self.config.cols

    @property
    def n_neurons(self) -> int:
        return self.rows * self.cols

    def find_winner(self, x: np.ndarray) -> WinnerResult:
        """Same contract as the growing grid: Euclidean argmin, row-major
        tie-break, activity exp(-distance / sigma)."""
        x = self._check_input(x)
        flat = self.weights.reshape(self.n_neurons, self.input_dim)
        diff = flat - x
        s2 = np.einsum("ij,ij->i", diff, diff)
        k = int(np.argmin(s2))
        s = math.sqrt(float(s2[k]))
        return WinnerResult(
            row=k // self.cols,
            col=k % self.cols,
            net_input=s,
            activity=math.exp(-s / self.config.sigma),
        )

    def activities(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        diff = self.weights - x
        s = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return np.exp(-s / self.config.sigma)

    def activity_map(self, x: np.ndarray, contrast: bool = True) -> np.ndarray:
        y = self.activities(x)
        if not contrast:
            return y
        yp = y ** self.config.softmax_exp
        return yp / yp.sum()

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"input shape {x.shape} != ({self.input_dim},)")
        return x

    def train_step(self, x: np.ndarray, alpha: float, radius: float) -> WinnerResult:
        """One Kohonen update: every weight moves toward x, scaled by the
        Gaussian neighborhood of the winner on the lattice."""
        won = self.find_winner(x)
        if alpha != 0.0:
            d2 = (self._row_grid - won.row) ** 2 + (self._col_grid - won.col) ** 2
            h = np.exp(-d2 / (2.0 * radius * radius))
            self.weights += (alpha * h)[:, :, None] * (x - self.weights)
        return won

    # -- persistence -------------------------------------------------------

    def state_lines(self) -> list[str]:
        cfg = self.config
        lines = [
            f"net version=1 backend=som rows={self.rows} cols={self.cols} "
            f"dim={self.input_dim} phase={'frozen' if self.trained else 'untrained'}",
            f"netconfig sigma={cfg.sigma:.17g} alpha0={cfg.alpha0:.17g} "
            f"alpha_min={cfg.alpha_floor:.17g} radius0={cfg.radius_start:.17g} "
            f"radius_min={cfg.radius_min:.17g} epochs={cfg.epochs} "
            f"softmax_exp={cfg.softmax_exp:.17g} seed={cfg.rng_seed}",
        ]
        flat = self.weights.reshape(self.n_neurons, self.input_dim)
        for row in flat:
            lines.append("w " + " ".join(f"{v:.17g}" for v in row))
        return lines

    @classmethod
    def from_state_lines(cls, lines: list[str]) -> "SomNet":
        header = _parse_kv(lines[0].split(None, 1)[1])
        if header.get("version") != "1":
            raise ValueError(f"unsupported net version {header.get('version')!r}")
        if header.get("backend") != "som":
            raise ValueError(f"expected a som net, found {header.get('backend')!r}")
        cfgkv = _parse_kv(lines[1].split(None, 1)[1])
        config = SomConfig(
            rows=int(header["rows"]),
            cols=int(header["cols"]),
            sigma=float(cfgkv["sigma"]),
            alpha0=float(cfgkv["alpha0"]),
            alpha_min=float(cfgkv["alpha_min"]),
            radius0=float(cfgkv["radius0"]),
            radius_min=float(cfgkv["radius_min"]),
            epochs=int(cfgkv["epochs"]),
            softmax_exp=float(cfgkv["softmax_exp"]),
            rng_seed=int(cfgkv["seed"]),
        )
        dim = int(header["dim"])
        net = cls(config, dim)
        weights = _parse_weight_lines(lines[2:], net.n_neurons, dim)
        net.weights = weights.reshape(config.rows, config.cols, dim)
        net.trained = header["phase"] == "frozen"
        return net


def som_train(
    config: SomConfig,
    inputs: np.ndarray,
    epoch_size: int | None = None,
    shuffle_units: list[np.ndarray] | None = None,
    order_seed: int | None = None,
    run_epochs: int | None = None,
) -> SomNet:
    """Train a fresh map on inputs.

    All weights move toward each signal, scaled by the Gaussian lattice
    neighborhood of the winner. Learning rate and radius decay exponentially
    over config.epochs, the map's designed schedule length; run_epochs stops
    training earlier (or keeps going at the floor values) without changing
    that schedule, which is how the benchmark probes epochs-to-criterion.
    shuffle_units reshuffles unit order per epoch (frames within a unit stay
    in temporal order).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("inputs must be a non-empty (N, dim) array")
    n, dim = inputs.shape
    epoch_size = epoch_size or n
    net = SomNet(config, dim)
    run_epochs = config.epochs if run_epochs is None else run_epochs
    schedule_total = config.epochs * epoch_size
    if schedule_total < 1 or run_epochs < 1:
        raise ValueError("epochs must be at least 1")

    alpha0 = config.alpha0
    alpha_ratio = (config.alpha_floor / alpha0) if alpha0 > 0 else 0.0
    radius0 = net.config.radius_start
    radius_ratio = config.radius_min / radius0

    rng = np.random.default_rng(order_seed)
    step = 0
    for _ in range(run_epochs):
        if shuffle_units is not None:
            order = np.concatenate(
                [shuffle_units[i] for i in rng.permutation(len(shuffle_units))]
            )
        else:
            order = np.arange(n)
        for i in order:
            frac = min(step / schedule_total, 1.0)
            alpha = alpha0 * alpha_ratio**frac if alpha0 > 0 else 0.0
            radius = radius0 * radius_ratio**frac
            net.train_step(inputs[i], alpha, radius)
            step += 1
    net.trained = True
    return net


def som_find_winner(net: SomNet, x: np.ndarray) -> WinnerResult:
    """Free-function form of SomNet.find_winner."""
    return net.find_winner(x)
