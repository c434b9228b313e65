"""Incremental self-organizing lattice with row/column growth.

The network starts as a 2x2 rectangular grid and, during the growth phase,
inserts whole rows or columns where per-neuron win counters concentrate.
Once the neuron-count cap is reached it fine-tunes at fixed size with a
decaying learning rate, then freezes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GROWTH = "growth"
FINETUNE = "finetune"
FROZEN = "frozen"

LAMBDA_MIDDLE = "middle"


@dataclass
class GridConfig:
    """Hyperparameters of one growing grid.

    sigma scales the activity exponential; alpha0 is the constant growth
    learning rate; lambda_mode is "middle" (half the epoch's signal count)
    or a fixed signal count; gamma is the neuron cap that ends growth.
    """

    sigma: float
    alpha0: float = 0.1
    lambda_mode: int | str = LAMBDA_MIDDLE
    gamma: int = 100
    finetune_epochs: int = 10
    alpha_min: float | None = None  # fine-tune floor; defaults to alpha0 / 100
    softmax_exp: float = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.alpha0 <= 1.0:
            raise ValueError("alpha0 must lie in [0, 1]")
        if self.gamma < 4:
            raise ValueError("gamma must be at least 4 (the initial lattice size)")
        if isinstance(self.lambda_mode, str) and self.lambda_mode != LAMBDA_MIDDLE:
            raise ValueError(f"lambda_mode must be {LAMBDA_MIDDLE!r} or an int")
        if isinstance(self.lambda_mode, bool):
            raise ValueError("lambda_mode must be 'middle' or an int")

    @property
    def alpha_floor(self) -> float:
        return self.alpha_min if self.alpha_min is not None else 0.01 * self.alpha0


def resolve_lambda(mode: int | str, epoch_signal_count: int) -> int:
    """Signals between insertion checks: half an epoch, or a fixed count."""
    if mode == LAMBDA_MIDDLE:
        if epoch_signal_count < 2:
            raise ValueError("middle mode needs an epoch of at least 2 signals")
        return epoch_signal_count // 2
    return int(mode)


@dataclass(frozen=True)
class WinnerResult:
    """Best-matching neuron for one input vector."""

    row: int
    col: int
    net_input: float  # Euclidean distance to the winner's weights
    activity: float   # exp(-net_input / sigma)


@dataclass(frozen=True)
class InsertionEvent:
    interval: int      # adaptation-interval index (0-based)
    signal_count: int  # total signals seen when the check fired
    axis: str          # "row" or "col"
    index: int         # lattice index of the inserted line
    rows: int          # lattice shape after the event
    cols: int
    max_lc: int        # largest local counter at check time, pre-reset


@dataclass
class GrowthReport:
    insertions: list[InsertionEvent]
    max_lc_trace: list[int]
    final_rows: int
    final_cols: int
    signals_consumed: int
    epoch_size: int

    @property
    def epochs_consumed(self) -> float:
        return self.signals_consumed / self.epoch_size if self.epoch_size else 0.0

    def to_csv(self) -> str:
        lines = ["interval,max_lc,rows,cols"]
        for i, ev in enumerate(self.insertions):
            lines.append(f"{i},{ev.max_lc},{ev.rows},{ev.cols}")
        return "\n".join(lines) + "\n"


@dataclass
class FinetuneReport:
    quantization_errors: list[float]  # mean winner distance per epoch

    @property
    def final_error(self) -> float:
        return self.quantization_errors[-1]


class GrowingGrid:
    """Rectangular growing lattice of weight vectors with local counters."""

    def __init__(self, config: GridConfig, input_dim: int):
        if input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        self.config = config
        self.input_dim = input_dim
        rng = np.random.default_rng(config.rng_seed)
        self.weights = rng.random((2, 2, input_dim))
        self.local_counters = np.zeros((2, 2), dtype=np.int64)
        self.phase = GROWTH
        self.signals_since_insertion = 0
        self.insertion_interval: int | None = (
            int(config.lambda_mode) if isinstance(config.lambda_mode, int) else None
        )
        self.growth_events: list[InsertionEvent] = []
        self._interval_index = 0
        self._signals_total = 0
        self._finetune_step = 0
        self._finetune_total = 0

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def n_neurons(self) -> int:
        return self.rows * self.cols

    def set_weights(self, weights: np.ndarray) -> None:
        """Replace the lattice (weights plus zeroed counters) wholesale."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 3 or weights.shape[2] != self.input_dim:
            raise ValueError(f"weights must be (rows, cols, {self.input_dim})")
        if weights.shape[0] < 2 or weights.shape[1] < 2:
            raise ValueError("lattice must stay at least 2x2")
        self.weights = weights.copy()
        self.local_counters = np.zeros(weights.shape[:2], dtype=np.int64)

    # -- winner search -----------------------------------------------------

    def find_winner(self, x: np.ndarray) -> WinnerResult:
        """Nearest neuron by Euclidean distance; ties go to the smallest
        row-major index. Activity is exp(-distance / sigma)."""
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
        """Full (rows, cols) activity grid exp(-s_ij / sigma)."""
        x = self._check_input(x)
        diff = self.weights - x
        s = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return np.exp(-s / self.config.sigma)

    def activity_map(self, x: np.ndarray, contrast: bool = True) -> np.ndarray:
        """Activity grid, optionally contrast-sharpened to unit sum.

        The contrast exponent rescales activities as y^p / sum(y^p); it never
        changes the argmax, so it has no effect on training or winners.
        """
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

    # -- training ----------------------------------------------------------

    def train_step(self, x: np.ndarray) -> WinnerResult:
        """One competitive update: move the winner and its direct lattice
        neighbors toward x, count the win, and in the growth phase trigger an
        insertion check every lambda signals."""
        if self.phase == FROZEN:
            raise RuntimeError("cannot train a frozen net")
        won = self.find_winner(x)
        self.local_counters[won.row, won.col] += 1
        self._signals_total += 1

        if self.phase == GROWTH:
            alpha = self.config.alpha0
        else:
            alpha = self._finetune_alpha()
            self._finetune_step += 1
        if alpha != 0.0:
            for r, c in self._update_set(won.row, won.col):
                w = self.weights[r, c]
                w += alpha * (x - w)

        if self.phase == GROWTH:
            self.signals_since_insertion += 1
            if (
                self.insertion_interval is not None
                and self.signals_since_insertion >= self.insertion_interval
            ):
                self.maybe_insert()
        return won

    def _update_set(self, row: int, col: int) -> list[tuple[int, int]]:
        cells = [(row, col)]
        cells.extend(self.neighbors(row, col))
        return cells

    def neighbors(self, row: int, col: int) -> list[tuple[int, int]]:
        """In-lattice direct topological neighbors, row-major order."""
        out = []
        if row > 0:
            out.append((row - 1, col))
        if col > 0:
            out.append((row, col - 1))
        if col < self.cols - 1:
            out.append((row, col + 1))
        if row < self.rows - 1:
            out.append((row + 1, col))
        return out

    def _finetune_alpha(self) -> float:
        a0 = self.config.alpha0
        if a0 == 0.0 or self._finetune_total == 0:
            return a0
        ratio = self.config.alpha_floor / a0
        return a0 * ratio ** min(self._finetune_step / self._finetune_total, 1.0)

    # -- growth ------------------------------------------------------------

    def maybe_insert(self) -> bool:
        """Insertion check: end growth if the neuron cap is reached, else
        insert a full row or column next to the busiest neuron.

        The check precedes the insertion, so growth stops at the first check
        where rows*cols >= gamma. The new line's weights interpolate between
        the flanking lines; all local counters reset afterwards.
        """
        if self.phase != GROWTH:
            raise RuntimeError("insertions only happen in the growth phase")
        max_lc = int(self.local_counters.max())
        if self.n_neurons >= self.config.gamma:
            self.phase = FINETUNE
            self.signals_since_insertion = 0
            return False

        flat_idx = int(np.argmax(self.local_counters))
        r1, c1 = flat_idx // self.cols, flat_idx % self.cols
        w1 = self.weights[r1, c1]
        best, best_dist = None, -1.0
        for r, c in self.neighbors(r1, c1):
            dist = float(np.linalg.norm(w1 - self.weights[r, c]))
            if dist > best_dist:
                best, best_dist = (r, c), dist
        r2, c2 = best

        if r1 == r2:
            at = max(c1, c2)
            mean = 0.5 * (self.weights[:, at - 1, :] + self.weights[:, at, :])
            self.weights = np.insert(self.weights, at, mean, axis=1)
            axis = "col"
        else:
            at = max(r1, r2)
            mean = 0.5 * (self.weights[at - 1, :, :] + self.weights[at, :, :])
            self.weights = np.insert(self.weights, at, mean, axis=0)
            axis = "row"

        self.local_counters = np.zeros((self.rows, self.cols), dtype=np.int64)
        self.signals_since_insertion = 0
        self.growth_events.append(
            InsertionEvent(
                interval=self._interval_index,
                signal_count=self._signals_total,
                axis=axis,
                index=at,
                rows=self.rows,
                cols=self.cols,
                max_lc=max_lc,
            )
        )
        self._interval_index += 1
        return True

    def run_growth_phase(self, inputs, epoch_size: int) -> GrowthReport:
        """Stream inputs through growth-phase training until the cap ends it.

        inputs is any iterable of vectors (typically an endless per-epoch
        shuffled stream); epoch_size resolves the "middle" lambda. Raises if
        the stream ends while the net is still growing.
        """
        if self.phase != GROWTH:
            raise RuntimeError("net is not in the growth phase")
        if self.insertion_interval is None:
            self.insertion_interval = resolve_lambda(self.config.lambda_mode, epoch_size)
        start_events = len(self.growth_events)
        start_signals = self._signals_total
        if self.n_neurons >= self.config.gamma:
            self.maybe_insert()  # flips to fine-tuning without consuming input
        else:
            for x in inputs:
                self.train_step(x)
                if self.phase != GROWTH:
                    break
            else:
                raise RuntimeError(
                    "input stream exhausted before growth completed; "
                    "provide more epochs of data"
                )
        events = self.growth_events[start_events:]
        return GrowthReport(
            insertions=list(events),
            max_lc_trace=[ev.max_lc for ev in events],
            final_rows=self.rows,
            final_cols=self.cols,
            signals_consumed=self._signals_total - start_signals,
            epoch_size=epoch_size,
        )

    def run_finetune_phase(
        self,
        inputs: np.ndarray,
        epochs: int,
        shuffle_units: list[np.ndarray] | None = None,
        order_seed: int | None = None,
        schedule_epochs: int | None = None,
    ) -> FinetuneReport:
        """Train at fixed size with learning rate decaying to the floor.

        inputs is an (N, dim) array presented `epochs` times. The decay
        spans schedule_epochs (default: `epochs`), so a run can stop early
        on a longer designed schedule without compressing it. If
        shuffle_units is given (index arrays, e.g. one per sequence), unit
        order is reshuffled each epoch with order_seed while order inside a
        unit is preserved. Freezes the net when done.
        """
        if self.phase != FINETUNE:
            raise RuntimeError("net is not in the fine-tuning phase")
        if epochs < 1:
            raise ValueError("epochs must be at least 1")
        inputs = np.asarray(inputs, dtype=np.float64)
        n = inputs.shape[0]
        self._finetune_step = 0
        self._finetune_total = (schedule_epochs or epochs) * n
        rng = np.random.default_rng(order_seed)
        errors = []
        for _ in range(epochs):
            if shuffle_units is not None:
                order = np.concatenate(
                    [shuffle_units[i] for i in rng.permutation(len(shuffle_units))]
                )
            else:
                order = np.arange(n)
            total = 0.0
            for i in order:
                total += self.train_step(inputs[i]).net_input
            errors.append(total / n)
        self.phase = FROZEN
        return FinetuneReport(quantization_errors=errors)

    def freeze(self) -> None:
        self.phase = FROZEN

    # -- persistence ---------------------------------------------------------

    def state_lines(self) -> list[str]:
        """Versioned text serialization (17 significant digits round-trips
        float64 exactly)."""
        cfg = self.config
        lines = [
            f"net version=1 backend=gg rows={self.rows} cols={self.cols} "
            f"dim={self.input_dim} phase={self.phase}",
            f"netconfig sigma={cfg.sigma:.17g} alpha0={cfg.alpha0:.17g} "
            f"lambda={cfg.lambda_mode} gamma={cfg.gamma} "
            f"finetune_epochs={cfg.finetune_epochs} alpha_min={cfg.alpha_floor:.17g} "
            f"softmax_exp={cfg.softmax_exp:.17g} seed={cfg.rng_seed}",
        ]
        flat = self.weights.reshape(self.n_neurons, self.input_dim)
        for row in flat:
            lines.append("w " + " ".join(f"{v:.17g}" for v in row))
        return lines

    @classmethod
    def from_state_lines(cls, lines: list[str]) -> "GrowingGrid":
        header = _parse_kv(lines[0].split(None, 1)[1])
        if header.get("version") != "1":
            raise ValueError(f"unsupported net version {header.get('version')!r}")
        if header.get("backend") != "gg":
            raise ValueError(f"expected a growing-grid net, found {header.get('backend')!r}")
        cfgkv = _parse_kv(lines[1].split(None, 1)[1])
        lam: int | str = cfgkv["lambda"]
        if lam != LAMBDA_MIDDLE:
            lam = int(lam)
        config = GridConfig(
            sigma=float(cfgkv["sigma"]),
            alpha0=float(cfgkv["alpha0"]),
            lambda_mode=lam,
            gamma=int(cfgkv["gamma"]),
            finetune_epochs=int(cfgkv["finetune_epochs"]),
            alpha_min=float(cfgkv["alpha_min"]),
            softmax_exp=float(cfgkv["softmax_exp"]),
            rng_seed=int(cfgkv["seed"]),
        )
        rows, cols, dim = int(header["rows"]), int(header["cols"]), int(header["dim"])
        net = cls(config, dim)
        weights = _parse_weight_lines(lines[2:], rows * cols, dim)
        net.weights = weights.reshape(rows, cols, dim)
        net.local_counters = np.zeros((rows, cols), dtype=np.int64)
        net.phase = header["phase"]
        return net


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for token in text.split():
        key, _, val = token.partition("=")
        out[key] = val
    return out


def _parse_weight_lines(lines: list[str], count: int, dim: int) -> np.ndarray:
    if len(lines) != count:
        raise ValueError(f"expected {count} weight rows, found {len(lines)}")
    weights = np.empty((count, dim))
    for i, line in enumerate(lines):
        fields = line.split()
        if fields[0] != "w" or len(fields) != dim + 1:
            raise ValueError(f"weight row {i}: expected 'w' plus {dim} values")
        try:
            weights[i] = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"weight row {i}: {exc}")
    return weights


def save_net(net: GrowingGrid, path) -> None:
    from pathlib import Path

    Path(path).write_text("\n".join(net.state_lines()) + "\n")


def load_net(path) -> GrowingGrid:
    from pathlib import Path

    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    return GrowingGrid.from_state_lines(lines)
