"""Time-invariant pattern vectors from first-layer winner trajectories.

A sequence of posture frames traces a path of winner coordinates on the
first-layer map. Collapsing consecutive repeats and resampling every path to
the common activation count K_max (walking the polyline in steps of its
length / K_max) yields fixed-length vectors that do not depend on how fast
the action was performed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

EPS_PAD = 1e-6  # row offset used to split a single-point (static pose) pattern


@dataclass
class ActivityPattern:
    """Ordered winner coordinates (row, col) elicited by one sequence."""

    points: np.ndarray  # (k, 2) float64
    source_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.points.shape[0] == 0:
            raise ValueError("activity pattern must contain at least one point")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class OrderedPattern:
    """Fixed-length resampled pattern; flattened it feeds the second layer."""

    points: np.ndarray  # (k_max, 2) float64
    source_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def flattened(self) -> np.ndarray:
        """(2 * k_max,) vector: row0, col0, row1, col1, ..."""
        return self.points.reshape(-1)

    def to_csv(self, sequence_id: str | None = None) -> str:
        sid = sequence_id if sequence_id is not None else self.source_id
        lines = ["sequence,k,row,col"]
        for k, (row, col) in enumerate(self.points):
            lines.append(f"{sid},{k},{row:.17g},{col:.17g}")
        return "\n".join(lines) + "\n"


def dedup_consecutive(pattern: ActivityPattern) -> ActivityPattern:
    """Collapse runs of identical consecutive points to a single activation.

    Non-adjacent repeats are kept; order is preserved.
    """
    pts = pattern.points
    keep = [0]
    for i in range(1, len(pts)):
        if not np.array_equal(pts[i], pts[keep[-1]]):
            keep.append(i)
    return ActivityPattern(points=pts[keep], source_id=pattern.source_id)


def compute_kmax(patterns: list[ActivityPattern]) -> int:
    """Largest activation count over a set of (deduped) patterns."""
    if not patterns:
        raise ValueError("cannot compute k_max of an empty pattern set")
    return max(len(p) for p in patterns)


def polyline_length(pattern: ActivityPattern) -> float:
    """Sum of Euclidean distances between consecutive activations."""
    pts = pattern.points
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def pad_single_point(pattern: ActivityPattern, eps: float = EPS_PAD) -> ActivityPattern:
    """Make a degenerate one-point pattern resamplable by adding a point
    offset by eps in the row direction."""
    if len(pattern) > 1:
        return pattern
    p = pattern.points[0]
    return ActivityPattern(
        points=np.array([p, p + (eps, 0.0)]), source_id=pattern.source_id
    )


def resample(pattern: ActivityPattern, k_max: int) -> OrderedPattern:
    """Grow a deduped pattern to exactly k_max activations.

    Walks the pattern with target spacing delta = length / k_max: a segment
    longer than delta gets a new point delta away from its start; a segment
    shorter than delta is absorbed (its far vertex dropped) and the leftover
    spacing carries into the following segments. Insertion stops the moment
    the pattern reaches k_max points, so the final stretch may stay longer
    than delta.
    """
    count = len(pattern)
    if count > k_max:
        raise ValueError(
            f"pattern has {count} points, more than k_max={k_max}; "
            f"k_max was computed on a different pattern set"
        )
    if count == k_max:
        return OrderedPattern(points=pattern.points.copy(), source_id=pattern.source_id)
    if count < 2:
        raise ValueError("cannot grow a single-point pattern; pad it first")

    total = polyline_length(pattern)
    if total <= 0.0:
        raise ValueError("pattern has zero length; dedup it before resampling")
    delta = total / k_max

    pts = [p.copy() for p in pattern.points]
    i = 0
    while len(pts) < k_max:
        if i + 1 >= len(pts):
            _subdivide_tail(pts, k_max)
            break
        a1, a2 = pts[i], pts[i + 1]
        d = float(np.linalg.norm(a2 - a1))
        if d > delta:
            pts.insert(i + 1, a1 + (a2 - a1) * (delta / d))
            i += 1
        elif d == delta:
            i += 1
        else:
            remainder = delta - d
            j = i + 1
            new_point = None
            drop_to = None
            while j + 1 < len(pts):
                seg = pts[j + 1] - pts[j]
                seg_len = float(np.linalg.norm(seg))
                if remainder < seg_len:
                    new_point = pts[j] + seg * (remainder / seg_len)
                    drop_to = j
                    break
                if remainder == seg_len:
                    new_point = pts[j + 1].copy()
                    drop_to = j + 1
                    break
                remainder -= seg_len
                j += 1
            if new_point is None:
                _subdivide_tail(pts, k_max)
                break
            del pts[i + 1 : drop_to + 1]
            pts.insert(i + 1, new_point)
            i += 1
    return OrderedPattern(points=np.array(pts), source_id=pattern.source_id)


def _subdivide_tail(pts: list[np.ndarray], k_max: int) -> None:
    """Degenerate-walk fallback: spread the missing points evenly inside the
    final segment. Reached only when vertex drops shortcut away more length
    than the walk has left, which uniform winner paths do not produce."""
    missing = k_max - len(pts)
    log.warning("resample walk exhausted the pattern; subdividing final segment "
                "for %d points", missing)
    a, b = pts[-2], pts[-1]
    for k in range(missing):
        frac = (k + 1) / (missing + 1)
        pts.insert(-1, a + (b - a) * frac)


def fit_to_kmax(pattern: ActivityPattern, k_max: int) -> OrderedPattern:
    """Dedup, pad degenerate patterns, truncate overlong ones, and resample.

    Truncation (tail-first, with a warning) only happens for test-time
    patterns longer than the training K_max.
    """
    deduped = pad_single_point(dedup_consecutive(pattern))
    if len(deduped) > k_max:
        log.warning(
            "pattern %s has %d activations, truncating to k_max=%d",
            deduped.source_id, len(deduped), k_max,
        )
        deduped = ActivityPattern(
            points=deduped.points[:k_max], source_id=deduped.source_id
        )
    return resample(deduped, k_max)


def trace_sequence(net, frames: np.ndarray) -> ActivityPattern:
    """Winner coordinates of every frame on a trained first-layer net.

    net is any object with find_winner(); frames is (T, dim). The output has
    one point per frame (dedup happens later).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("frames must be a non-empty (T, dim) array")
    points = np.empty((frames.shape[0], 2))
    for t in range(frames.shape[0]):
        won = net.find_winner(frames[t])
        points[t] = (won.row, won.col)
    return ActivityPattern(points=points)
