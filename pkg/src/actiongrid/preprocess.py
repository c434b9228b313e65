"""Turn raw skeleton sequences into network-ready input vectors.

Three stages, applied per sequence in this order: ego-centered coordinate
transform (removes camera orientation/position), link-length scaling to a
canonical skeleton (removes camera distance), and optional attention
reduction to the body part moving the most.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .skeleton import (
    PART_ORDER,
    BodyPartition,
    SkeletonDataError,
    SkeletonLayout,
    SkeletonSequence,
)

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-12


class DegenerateFrameError(SkeletonDataError):
    """Reference joints of a frame are too close or collinear to define axes."""


@dataclass(frozen=True)
class EgoFrameBasis:
    """Body-centered right-handed frame anchored at the stomach joint."""

    origin: np.ndarray  # stomach position in sensor coordinates
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray

    @property
    def rotation(self) -> np.ndarray:
        """Columns are the ego axes in sensor coordinates (det = +1)."""
        return np.column_stack([self.x_axis, self.y_axis, self.z_axis])


@dataclass(frozen=True)
class CanonicalSkeleton:
    """Fixed per-link lengths for size normalization.

    links: (parent, child, length) in root-first order; the tree is the
    layout's and every length is strictly positive.
    """

    links: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        for parent, child, length in self.links:
            if length <= 0:
                raise SkeletonDataError(f"link ({parent},{child}) has non-positive length")


@dataclass
class PreprocessConfig:
    """Switches for the preprocessing stages."""

    attention: bool = False
    partition: BodyPartition | None = None  # overrides the layout's partition
    degeneracy_tol: float = DEGENERACY_TOL
    max_dropped_fraction: float = 0.2  # degenerate-frame budget per sequence


def attention_select(
    seq: SkeletonSequence, partition: BodyPartition
) -> tuple[str, SkeletonSequence]:
    """Pick the body part with the largest total movement; drop the rest.

    Motion energy of a part is the sum over consecutive frame pairs of the
    Euclidean displacements of that part's joints. Ties go to the first part
    in PART_ORDER.
    """
    if seq.n_frames < 2:
        raise SkeletonDataError("attention needs at least 2 frames")
    displacement = np.linalg.norm(np.diff(seq.frames, axis=0), axis=2)  # (T-1, J)
    per_joint = displacement.sum(axis=0)
    best_name, best_energy = None, -1.0
    for name, idx in partition.parts():
        energy = float(per_joint[list(idx)].sum()) if idx else 0.0
        if energy > best_energy:
            best_name, best_energy = name, energy
    keep = list(partition.part(best_name))
    reduced = SkeletonSequence(
        frames=seq.frames[:, keep, :],
        label=seq.label,
        subject_id=seq.subject_id,
        event_id=seq.event_id,
        layout=_reduced_layout(seq.layout, keep, best_name),
        dataset_tag=seq.dataset_tag,
    )
    return best_name, reduced


def _reduced_layout(layout: SkeletonLayout, keep: list[int], part: str) -> SkeletonLayout:
    # A single-part skeleton has no meaningful refs/partition/tree; keep a
    # minimal chain so the sequence still validates.
    n = len(keep)
    parts = {name: () for name in PART_ORDER}
    parts[part] = tuple(range(n))
    return SkeletonLayout(
        n_joints=n,
        joint_names=tuple(layout.joint_names[j] for j in keep),
        stomach=0,
        left_hip=min(1, n - 1),
        right_hip=min(2, n - 1),
        partition=BodyPartition(
            left_arm=parts["LeftArm"], right_arm=parts["RightArm"],
            left_leg=parts["LeftLeg"], right_leg=parts["RightLeg"], base=parts["Base"],
        ),
        tree=tuple((i, i + 1) for i in range(n - 1)),
    )


def compute_ego_basis(
    frame: np.ndarray, layout: SkeletonLayout, tol: float = DEGENERACY_TOL
) -> EgoFrameBasis:
    """Build the body frame from the stomach and the two hip joints.

    The stomach is projected onto the hip-hip line; the z axis points from
    the projection to the stomach, y toward the left hip, and x completes
    the right-handed system via their cross product.
    """
    stomach = frame[layout.stomach]
    right_hip = frame[layout.right_hip]
    left_hip = frame[layout.left_hip]

    hip_vec = left_hip - right_hip
    hip_len = np.linalg.norm(hip_vec)
    if hip_len < tol:
        raise DegenerateFrameError("hip joints coincide; cannot orient the body frame")
    hip_dir = hip_vec / hip_len
    # orthogonal projection of the stomach onto the hip line
    t = float(np.dot(stomach - right_hip, hip_dir))
    foot = right_hip + t * hip_dir

    up = stomach - foot
    up_len = np.linalg.norm(up)
    if up_len < tol:
        raise DegenerateFrameError("stomach lies on the hip line; body frame undefined")
    z_axis = up / up_len
    y_vec = left_hip - foot
    y_axis = y_vec / np.linalg.norm(y_vec)
    x_vec = np.cross(y_vec, up)
    x_axis = x_vec / np.linalg.norm(x_vec)
    return EgoFrameBasis(origin=stomach.copy(), x_axis=x_axis, y_axis=y_axis, z_axis=z_axis)


def to_ego_frame(
    frame: np.ndarray, layout: SkeletonLayout, tol: float = DEGENERACY_TOL
) -> np.ndarray:
    """Express every joint in the body frame; the stomach maps to the origin."""
    basis = compute_ego_basis(frame, layout, tol)
    shifted = frame - basis.origin
    ego = shifted @ basis.rotation  # row-vector form of R^T (p - origin)
    ego[layout.stomach] = 0.0  # exact, not merely within rounding
    return ego


def from_ego_frame(ego: np.ndarray, basis: EgoFrameBasis) -> np.ndarray:
    """Inverse map back to sensor coordinates (for round-trip checks)."""
    return ego @ basis.rotation.T + basis.origin


def build_canonical(train_sequences: list[SkeletonSequence]) -> CanonicalSkeleton:
    """Canonical link lengths = per-link median over all training frames."""
    if not train_sequences:
        raise SkeletonDataError("cannot build a canonical skeleton from no sequences")
    layout = train_sequences[0].layout
    all_frames = np.concatenate([seq.frames for seq in train_sequences], axis=0)
    links = []
    for parent, child in layout.tree:
        lengths = np.linalg.norm(all_frames[:, child, :] - all_frames[:, parent, :], axis=1)
        median = float(np.median(lengths))
        if median <= 0:
            raise SkeletonDataError(f"link ({parent},{child}) has zero median length")
        links.append((parent, child, median))
    return CanonicalSkeleton(links=tuple(links))


@lru_cache(maxsize=16)
def _subtree_table(links: tuple) -> list[tuple[int, int, float, np.ndarray]]:
    """Per link: (parent, child, length, indices of child plus descendants)."""
    children: dict[int, list[int]] = {}
    for parent, child, _ in links:
        children.setdefault(parent, []).append(child)

    def gather(j: int) -> list[int]:
        acc = [j]
        for c in children.get(j, ()):
            acc.extend(gather(c))
        return acc

    return [
        (parent, child, length, np.array(gather(child), dtype=int))
        for parent, child, length in links
    ]


def scale_to_canonical(
    frame: np.ndarray, canon: CanonicalSkeleton, tol: float = DEGENERACY_TOL
) -> np.ndarray:
    """Reposition each joint so every link has its canonical length.

    Walks the tree root-to-leaves; each child is moved along the original
    parent-to-child direction to the canonical distance, and its whole
    subtree is rigidly translated with it, preserving distal geometry.
    """
    n = frame.shape[0]
    out = frame.astype(np.float64, copy=True)
    for parent, child, length, moved in _subtree_table(canon.links):
        if child >= n or parent >= n:
            raise SkeletonDataError("canonical tree references joints beyond the frame")
        vec = out[child] - out[parent]
        norm = np.linalg.norm(vec)
        if norm < tol:
            raise SkeletonDataError(
                f"zero-length link ({parent},{child}) in input frame; direction undefined"
            )
        delta = out[parent] + vec * (length / norm) - out[child]
        out[moved] += delta
    return out


def preprocess_sequence(
    seq: SkeletonSequence,
    config: PreprocessConfig,
    canonical: CanonicalSkeleton | None = None,
) -> np.ndarray:
    """Full per-sequence preprocessing: ego transform, scaling, attention.

    Returns an (n_kept_frames, dim) array of flattened frame vectors where
    dim = 3 * retained joint count. Degenerate frames are dropped with a
    warning; if more than max_dropped_fraction of them drop, the whole
    sequence is rejected.
    """
    layout = seq.layout
    ego_frames = []
    dropped = 0
    for i in range(seq.n_frames):
        try:
            ego = to_ego_frame(seq.frames[i], layout, config.degeneracy_tol)
        except DegenerateFrameError as exc:
            dropped += 1
            log.warning("dropping degenerate frame %d: %s", i, exc)
            continue
        if canonical is not None:
            ego = scale_to_canonical(ego, canonical, config.degeneracy_tol)
        ego_frames.append(ego)
    if dropped > config.max_dropped_fraction * seq.n_frames:
        raise SkeletonDataError(
            f"{dropped}/{seq.n_frames} frames degenerate; sequence rejected"
        )
    if len(ego_frames) < 2:
        raise SkeletonDataError("fewer than 2 usable frames after preprocessing")

    processed = SkeletonSequence(
        frames=np.stack(ego_frames),
        label=seq.label,
        subject_id=seq.subject_id,
        event_id=seq.event_id,
        layout=layout,
        dataset_tag=seq.dataset_tag,
    )
    if config.attention:
        partition = config.partition or layout.partition
        _, processed = attention_select(processed, partition)
    return processed.frames.reshape(processed.n_frames, -1)
