"""Skeleton datasets: common in-memory representation, loaders, synthetic data.

Loads the three public 3D-skeleton action datasets (MSRAction3D, UTKinect,
Florence3D) into one structure, generates seeded synthetic action data for
dataset-free testing, and reads/writes a versioned plain-text interchange
format so small golden datasets can live inside the test suite.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

# Attention tie-break order; also the canonical iteration order for parts.
PART_ORDER = ("LeftArm", "RightArm", "LeftLeg", "RightLeg", "Base")


class SkeletonDataError(Exception):
    """Malformed or inconsistent skeleton data (files or in-memory)."""


@dataclass(frozen=True)
class BodyPartition:
    """The five body-part joint groups used by the attention stage.

    The five index sets must be disjoint and together cover every joint of
    the skeleton they describe.
    """

    left_arm: tuple[int, ...]
    right_arm: tuple[int, ...]
    left_leg: tuple[int, ...]
    right_leg: tuple[int, ...]
    base: tuple[int, ...]

    def parts(self) -> list[tuple[str, tuple[int, ...]]]:
        """(name, joint indices) pairs in fixed tie-break order."""
        return [
            ("LeftArm", self.left_arm),
            ("RightArm", self.right_arm),
            ("LeftLeg", self.left_leg),
            ("RightLeg", self.right_leg),
            ("Base", self.base),
        ]

    def part(self, name: str) -> tuple[int, ...]:
        for part_name, idx in self.parts():
            if part_name == name:
                return idx
        raise KeyError(name)

    def validate(self, n_joints: int) -> None:
        seen: set[int] = set()
        for name, idx in self.parts():
            for j in idx:
                if not 0 <= j < n_joints:
                    raise SkeletonDataError(f"part {name}: joint index {j} out of range")
                if j in seen:
                    raise SkeletonDataError(f"joint index {j} appears in more than one part")
                seen.add(j)
        if len(seen) != n_joints:
            missing = sorted(set(range(n_joints)) - seen)
            raise SkeletonDataError(f"partition does not cover joints {missing}")


@dataclass(frozen=True)
class SkeletonLayout:
    """Structural description shared by all frames of a dataset.

    Identifies the three reference joints needed by the ego-centered
    transform, the body partition, and the link tree (rooted at the stomach
    joint) used for size normalization.
    """

    n_joints: int
    joint_names: tuple[str, ...]
    stomach: int
    left_hip: int
    right_hip: int
    partition: BodyPartition
    tree: tuple[tuple[int, int], ...]  # (parent, child) pairs, root = stomach

    def validate(self) -> None:
        if len(self.joint_names) != self.n_joints:
            raise SkeletonDataError("joint_names length disagrees with n_joints")
        refs = (self.stomach, self.left_hip, self.right_hip)
        if len(set(refs)) != 3 or any(not 0 <= j < self.n_joints for j in refs):
            raise SkeletonDataError("stomach/hip indices must be three distinct valid joints")
        self.partition.validate(self.n_joints)
        if len(self.tree) != self.n_joints - 1:
            raise SkeletonDataError(
                f"link tree has {len(self.tree)} links, expected {self.n_joints - 1}"
            )
        reached = {self.stomach}
        for parent, child in self.tree:
            if parent not in reached:
                raise SkeletonDataError(f"link ({parent},{child}) not in root-first order")
            if child in reached:
                raise SkeletonDataError(f"joint {child} has two parents in link tree")
            reached.add(child)
        if len(reached) != self.n_joints:
            raise SkeletonDataError("link tree does not reach every joint")


@dataclass
class SkeletonSequence:
    """One action instance: consecutive posture frames plus its label."""

    frames: np.ndarray  # (n_frames, n_joints, 3) float64
    label: int
    subject_id: int
    event_id: int
    layout: SkeletonLayout
    dataset_tag: str = ""

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise SkeletonDataError(f"frames must be (T, J, 3), got {self.frames.shape}")
        if self.n_frames == 0:
            raise SkeletonDataError("sequence has no frames")
        if self.frames.shape[1] != self.layout.n_joints:
            raise SkeletonDataError(
                f"frame joint count {self.frames.shape[1]} != layout {self.layout.n_joints}"
            )
        if not np.isfinite(self.frames).all():
            raise SkeletonDataError("sequence contains non-finite joint coordinates")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]


@dataclass
class Dataset:
    """A set of labeled skeleton sequences sharing one layout."""

    sequences: list[SkeletonSequence]
    category_names: list[str]
    layout: SkeletonLayout
    tag: str = ""

    def __post_init__(self) -> None:
        for seq in self.sequences:
            if not 0 <= seq.label < len(self.category_names):
                raise SkeletonDataError(
                    f"sequence label {seq.label} outside {len(self.category_names)} categories"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.sequences], dtype=int)

    def subset(self, indices) -> "Dataset":
        return Dataset(
            sequences=[self.sequences[i] for i in indices],
            category_names=list(self.category_names),
            layout=self.layout,
            tag=self.tag,
        )


MIN_SEQUENCE_FRAMES = 3  # attention needs displacement, resampling >= 2 activations


def _check_min_frames(frames: np.ndarray, origin: str) -> None:
    if frames.shape[0] < MIN_SEQUENCE_FRAMES:
        raise SkeletonDataError(
            f"{origin}: only {frames.shape[0]} frames; sequences need at least "
            f"{MIN_SEQUENCE_FRAMES}"
        )


# ---------------------------------------------------------------------------
# Layouts of the three public datasets.
#
# The published files do not embed joint names; the orders below are the
# de-facto conventions used by the dataset releases. `describe_format()`
# renders the same information for the CLI probe.
# ---------------------------------------------------------------------------

# MSRAction3D skeleton files list joints in this order (20 joints, Kinect-v1
# style capture). Hips live in the base part; legs start at the knee.
MSR_JOINT_NAMES = (
    "shoulder_center", "spine", "hip_center", "head",
    "right_shoulder", "left_shoulder", "right_elbow", "left_elbow",
    "right_wrist", "left_wrist", "right_hand", "left_hand",
    "right_hip", "left_hip", "right_knee", "left_knee",
    "right_ankle", "left_ankle", "right_foot", "left_foot",
)

MSR_LAYOUT = SkeletonLayout(
    n_joints=20,
    joint_names=MSR_JOINT_NAMES,
    stomach=1,
    left_hip=13,
    right_hip=12,
    partition=BodyPartition(
        left_arm=(5, 7, 9, 11),
        right_arm=(4, 6, 8, 10),
        left_leg=(15, 17, 19),
        right_leg=(14, 16, 18),
        base=(0, 1, 2, 3, 12, 13),
    ),
    tree=(
        (1, 0), (0, 3), (1, 2), (2, 12), (2, 13),
        (0, 4), (4, 6), (6, 8), (8, 10),
        (0, 5), (5, 7), (7, 9), (9, 11),
        (12, 14), (14, 16), (16, 18),
        (13, 15), (15, 17), (17, 19),
    ),
)

# UTKinect joint files follow the Kinect v1 SDK order.
UTKINECT_JOINT_NAMES = (
    "hip_center", "spine", "shoulder_center", "head",
    "left_shoulder", "left_elbow", "left_wrist", "left_hand",
    "right_shoulder", "right_elbow", "right_wrist", "right_hand",
    "left_hip", "left_knee", "left_ankle", "left_foot",
    "right_hip", "right_knee", "right_ankle", "right_foot",
)

UTKINECT_LAYOUT = SkeletonLayout(
    n_joints=20,
    joint_names=UTKINECT_JOINT_NAMES,
    stomach=1,
    left_hip=12,
    right_hip=16,
    partition=BodyPartition(
        left_arm=(4, 5, 6, 7),
        right_arm=(8, 9, 10, 11),
        left_leg=(13, 14, 15),
        right_leg=(17, 18, 19),
        base=(0, 1, 2, 3, 12, 16),
    ),
    tree=(
        (1, 0), (0, 12), (0, 16), (1, 2), (2, 3),
        (2, 4), (4, 5), (5, 6), (6, 7),
        (2, 8), (8, 9), (9, 10), (10, 11),
        (12, 13), (13, 14), (14, 15),
        (16, 17), (17, 18), (18, 19),
    ),
)

# Florence3D world-coordinate rows carry 15 joints in this order.
FLORENCE_JOINT_NAMES = (
    "head", "neck", "spine",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_shoulder", "right_elbow", "right_wrist",
    "left_hip", "left_knee", "left_ankle",
    "right_hip", "right_knee", "right_ankle",
)

FLORENCE_LAYOUT = SkeletonLayout(
    n_joints=15,
    joint_names=FLORENCE_JOINT_NAMES,
    stomach=2,
    left_hip=9,
    right_hip=12,
    partition=BodyPartition(
        left_arm=(3, 4, 5),
        right_arm=(6, 7, 8),
        left_leg=(10, 11),
        right_leg=(13, 14),
        base=(0, 1, 2, 9, 12),
    ),
    tree=(
        (2, 1), (1, 0),
        (1, 3), (3, 4), (4, 5),
        (1, 6), (6, 7), (7, 8),
        (2, 9), (9, 10), (10, 11),
        (2, 12), (12, 13), (13, 14),
    ),
)

MSR_ACTION_NAMES = {
    1: "high arm wave", 2: "horizontal arm wave", 3: "hammer", 4: "hand catch",
    5: "forward punch", 6: "high throw", 7: "draw x", 8: "draw tick",
    9: "draw circle", 10: "hand clap", 11: "two hand wave", 12: "side boxing",
    13: "bend", 14: "forward kick", 15: "side kick", 16: "jogging",
    17: "tennis swing", 18: "tennis serve", 19: "golf swing", 20: "pickup and throw",
}

# The ten whole-body actions of the reduced MSRAction3D experiment.
MSR_SUBSET_10 = (10, 11, 12, 13, 14, 15, 16, 18, 19, 20)

UTKINECT_ACTION_NAMES = (
    "walk", "sitDown", "standUp", "pickUp", "carry",
    "throw", "push", "pull", "waveHands", "clapHands",
)

FLORENCE_ACTION_NAMES = (
    "wave", "drink from a bottle", "answer phone", "clap",
    "tight lace", "sit down", "stand up", "read watch", "bow",
)

FORMAT_NOTES = {
    "msr": (
        "MSRAction3D: one text file per sequence named aAA_sSS_eEE_skeleton3D.txt\n"
        "(action, subject, event numbers). Each frame is 20 consecutive rows of\n"
        "four reals: x y z confidence. The confidence column is dropped on load.\n"
        f"Joint row order: {', '.join(MSR_JOINT_NAMES)}."
    ),
    "utkinect": (
        "UTKinect: per-video joint file joints/joints_sSS_eEE.txt with rows\n"
        "'frame_id x1 y1 z1 ... x20 y20 z20' (61 numbers), plus actionLabel.txt\n"
        "listing per video one 'actionName: first_frame last_frame' line per\n"
        "action (non-numeric ranges are skipped). Frames are Kinect v1 SDK\n"
        f"joint order: {', '.join(UTKINECT_JOINT_NAMES)}."
    ),
    "florence": (
        "Florence3D: single world-coordinates file; each row is\n"
        "'video_id actor_id category_id' followed by 45 reals (15 joints x 3).\n"
        "Consecutive rows sharing a video_id form one sequence.\n"
        f"Joint order: {', '.join(FLORENCE_JOINT_NAMES)}."
    ),
    "synthetic": (
        "Synthetic: generated in memory by generate_synthetic(); persisted only\n"
        "through the interchange format (see save_dataset/load_dataset)."
    ),
    "interchange": (
        "Interchange: UTF-8 text, '#' comments. Header 'version=1 joints=<n>\n"
        "categories=<comma list>' then layout lines (refs/part/link), then per\n"
        "sequence 'seq label=<k> subject=<s> event=<e>' followed by one line per\n"
        "frame of 3*n space-separated decimal reals."
    ),
}


def describe_format(name: str) -> str:
    """On-disk format assumption for one of the supported dataset names."""
    try:
        return FORMAT_NOTES[name]
    except KeyError:
        raise KeyError(f"unknown dataset format {name!r}; known: {sorted(FORMAT_NOTES)}")


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------

_MSR_FILE_RE = re.compile(r"a(\d+)_s(\d+)_e(\d+)_skeleton3D\.txt$", re.IGNORECASE)


def load_msr_action3d(
    root_path, subset=None, exclude: set[str] | None = None
) -> Dataset:
    """Load MSRAction3D skeleton files from a directory.

    subset: optional iterable of 1-based action ids to keep (e.g.
    MSR_SUBSET_10); exclude: file names (basename) to skip, for mirroring
    published sample counts when archives contain corrupt captures.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise SkeletonDataError(f"MSRAction3D directory not found: {root}")
    subset_ids = list(subset) if subset is not None else sorted(MSR_ACTION_NAMES)
    label_of = {aid: i for i, aid in enumerate(subset_ids)}
    exclude = exclude or set()

    sequences: list[SkeletonSequence] = []
    files = sorted(root.iterdir())
    for path in files:
        m = _MSR_FILE_RE.search(path.name)
        if m is None or path.name in exclude:
            continue
        action, subject, event = (int(g) for g in m.groups())
        if action not in label_of:
            continue
        values = _read_numeric_table(path, expected_cols=4)
        if values.shape[0] % 20 != 0:
            raise SkeletonDataError(
                f"{path}: {values.shape[0]} joint rows is not a multiple of 20"
            )
        frames = values[:, :3].reshape(-1, 20, 3)  # confidence column dropped
        _check_min_frames(frames, str(path))
        sequences.append(
            SkeletonSequence(
                frames=frames, label=label_of[action], subject_id=subject,
                event_id=event, layout=MSR_LAYOUT, dataset_tag="msr",
            )
        )
    if not sequences:
        raise SkeletonDataError(f"no MSRAction3D skeleton files found under {root}")
    names = [MSR_ACTION_NAMES[a] for a in subset_ids]
    return Dataset(sequences=sequences, category_names=names, layout=MSR_LAYOUT, tag="msr")


def load_utkinect(root_path) -> Dataset:
    """Load UTKinect from its joints/ directory plus actionLabel.txt."""
    root = Path(root_path)
    label_file = root / "actionLabel.txt"
    joints_dir = root / "joints"
    if not root.is_dir() or not label_file.is_file() or not joints_dir.is_dir():
        raise SkeletonDataError(
            f"UTKinect root must contain joints/ and actionLabel.txt: {root}"
        )

    label_of = {name: i for i, name in enumerate(UTKINECT_ACTION_NAMES)}
    ranges = _parse_utkinect_labels(label_file)

    sequences: list[SkeletonSequence] = []
    for video_id, actions in ranges.items():
        joints_path = joints_dir / f"joints_{video_id}.txt"
        if not joints_path.is_file():
            raise SkeletonDataError(f"{label_file}: no joint file for video {video_id}")
        table = _read_numeric_table(joints_path, expected_cols=61)
        frame_ids = table[:, 0]
        coords = table[:, 1:].reshape(-1, 20, 3)
        subject, event = _parse_utkinect_video_id(video_id)
        for action_name, (first, last) in actions.items():
            mask = (frame_ids >= first) & (frame_ids <= last)
            frames = coords[mask]
            if frames.shape[0] == 0:
                raise SkeletonDataError(
                    f"{label_file}: {video_id}/{action_name} range [{first},{last}] "
                    f"matches no recorded frames"
                )
            _check_min_frames(frames, f"{video_id}/{action_name}")
            sequences.append(
                SkeletonSequence(
                    frames=frames, label=label_of[action_name], subject_id=subject,
                    event_id=event, layout=UTKINECT_LAYOUT, dataset_tag="utkinect",
                )
            )
    if not sequences:
        raise SkeletonDataError(f"no UTKinect sequences found under {root}")
    return Dataset(
        sequences=sequences, category_names=list(UTKINECT_ACTION_NAMES),
        layout=UTKINECT_LAYOUT, tag="utkinect",
    )


def _parse_utkinect_video_id(video_id: str) -> tuple[int, int]:
    m = re.match(r"s(\d+)_e(\d+)$", video_id)
    if m is None:
        return 0, 0
    return int(m.group(1)), int(m.group(2))


def _parse_utkinect_labels(path: Path) -> dict[str, dict[str, tuple[int, int]]]:
    ranges: dict[str, dict[str, tuple[int, int]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            current = line.rstrip(":")
            if current in ranges:
                raise SkeletonDataError(f"{path}:{line_no}: duplicate video id {current}")
            ranges[current] = {}
            continue
        if current is None:
            raise SkeletonDataError(f"{path}:{line_no}: action range before any video id")
        name, _, span = line.partition(":")
        name = name.strip()
        if name not in UTKINECT_ACTION_NAMES:
            raise SkeletonDataError(f"{path}:{line_no}: unknown action name {name!r}")
        fields = span.split()
        if len(fields) != 2:
            raise SkeletonDataError(f"{path}:{line_no}: expected 'first last' frame range")
        try:
            first, last = int(float(fields[0])), int(float(fields[1]))
        except ValueError:
            log.info("skipping %s/%s: non-numeric frame range", current, name)
            continue
        if last < first:
            raise SkeletonDataError(f"{path}:{line_no}: range ends before it starts")
        for other, (f0, l0) in ranges[current].items():
            if first <= l0 and f0 <= last:
                raise SkeletonDataError(
                    f"{path}:{line_no}: range of {name} overlaps {other} in {current}"
                )
        ranges[current][name] = (first, last)
    return ranges


def load_florence3d(file_path) -> Dataset:
    """Load the Florence3D single world-coordinates text file."""
    path = Path(file_path)
    if not path.is_file():
        raise SkeletonDataError(f"Florence3D file not found: {path}")

    rows: list[tuple[int, int, int, np.ndarray]] = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 3 + 45:
            raise SkeletonDataError(
                f"{path}:{line_no}: expected {3 + 45} columns, got {len(fields)}"
            )
        try:
            video, actor, category = (int(float(v)) for v in fields[:3])
            coords = np.array([float(v) for v in fields[3:]], dtype=np.float64)
        except ValueError as exc:
            raise SkeletonDataError(f"{path}:{line_no}: non-numeric value ({exc})")
        rows.append((video, actor, category, coords))
    if not rows:
        raise SkeletonDataError(f"{path}: no data rows")

    sequences: list[SkeletonSequence] = []
    previous_video = None
    start = 0
    rows.append((-1, -1, -1, rows[-1][3]))  # sentinel flushes the final group
    for i, (video, _, _, _) in enumerate(rows):
        if video != previous_video:
            if previous_video is not None:
                group = rows[start:i]
                frames = np.stack([r[3] for r in group]).reshape(-1, 15, 3)
                _check_min_frames(frames, f"{path}: video {previous_video}")
                sequences.append(
                    SkeletonSequence(
                        frames=frames,
                        label=group[0][2] - 1,
                        subject_id=group[0][1],
                        event_id=previous_video,
                        layout=FLORENCE_LAYOUT,
                        dataset_tag="florence",
                    )
                )
            previous_video = video
            start = i
    video_ids = sorted({s.event_id for s in sequences})
    gaps = [b for a, b in zip(video_ids, video_ids[1:]) if b != a + 1]
    if gaps:
        log.info("florence: non-contiguous video ids (e.g. at %s)", gaps[:3])
    return Dataset(
        sequences=sequences, category_names=list(FLORENCE_ACTION_NAMES),
        layout=FLORENCE_LAYOUT, tag="florence",
    )


def _read_numeric_table(path: Path, expected_cols: int) -> np.ndarray:
    rows = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != expected_cols:
            raise SkeletonDataError(
                f"{path}:{line_no}: expected {expected_cols} columns, got {len(fields)}"
            )
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise SkeletonDataError(f"{path}:{line_no}: non-numeric value ({exc})")
    if not rows:
        raise SkeletonDataError(f"{path}: empty file")
    return np.array(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

_PROTO_SEED = 160823  # class prototypes must not depend on the caller's seed


def synthetic_layout(n_joints: int) -> SkeletonLayout:
    """Layout for generated skeletons: stomach, two hips, then limb chains."""
    if n_joints < 5:
        raise SkeletonDataError("synthetic skeletons need at least 5 joints")
    names = ["stomach", "left_hip", "right_hip"]
    parts: dict[str, list[int]] = {name: [] for name in PART_ORDER}
    parts["Base"] = [0, 1, 2]
    tree: list[tuple[int, int]] = [(0, 1), (0, 2)]
    chain_roots = {"LeftArm": 0, "RightArm": 0, "LeftLeg": 1, "RightLeg": 2, "Base": 0}
    chain_tips = dict(chain_roots)
    limb_cycle = ("LeftArm", "RightArm", "LeftLeg", "RightLeg")
    for j in range(3, n_joints):
        part = limb_cycle[(j - 3) % 4]
        parts[part].append(j)
        tree.append((chain_tips[part], j))
        chain_tips[part] = j
        names.append(f"{part.lower()}_{len(parts[part])}")
    return SkeletonLayout(
        n_joints=n_joints,
        joint_names=tuple(names),
        stomach=0,
        left_hip=1,
        right_hip=2,
        partition=BodyPartition(
            left_arm=tuple(parts["LeftArm"]),
            right_arm=tuple(parts["RightArm"]),
            left_leg=tuple(parts["LeftLeg"]),
            right_leg=tuple(parts["RightLeg"]),
            base=tuple(parts["Base"]),
        ),
        tree=tuple(tree),
    )


def _rest_pose(layout: SkeletonLayout) -> np.ndarray:
    pose = np.zeros((layout.n_joints, 3))
    pose[layout.stomach] = (0.0, 0.0, 1.0)
    pose[layout.left_hip] = (0.18, 0.0, 0.8)
    pose[layout.right_hip] = (-0.18, 0.0, 0.8)
    directions = {
        "LeftArm": np.array([0.28, 0.05, -0.02]),
        "RightArm": np.array([-0.28, 0.05, -0.02]),
        "LeftLeg": np.array([0.04, 0.03, -0.26]),
        "RightLeg": np.array([-0.04, 0.03, -0.26]),
    }
    anchors = {
        "LeftArm": pose[layout.stomach] + (0.12, 0.0, 0.35),
        "RightArm": pose[layout.stomach] + (-0.12, 0.0, 0.35),
        "LeftLeg": pose[layout.left_hip],
        "RightLeg": pose[layout.right_hip],
    }
    for name, idx in layout.partition.parts():
        if name == "Base":
            continue
        for k, j in enumerate(idx):
            pose[j] = anchors[name] + directions[name] * (k + 1)
    return pose


def _class_motion(class_idx: int, layout: SkeletonLayout):
    """Per-class trajectory family: which limbs oscillate, and how."""
    rng = np.random.default_rng((_PROTO_SEED, class_idx))
    limbs = ("LeftArm", "RightArm", "LeftLeg", "RightLeg")
    primary = limbs[class_idx % 4]
    secondary = limbs[(class_idx + 1 + class_idx // 4) % 4]
    moves = []
    for part, amp_scale in ((primary, 1.0), (secondary, 0.45)):
        idx = layout.partition.part(part)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        moves.append(
            dict(
                joints=np.array(idx, dtype=int),
                direction=direction,
                amplitude=amp_scale * (0.35 + 0.12 * ((class_idx * 2) % 3)),
                frequency=1.0 + (class_idx % 3) * 0.5,
                phase=2.0 * math.pi * class_idx / 7.0,
            )
        )
    return moves


def _prototype_frames(layout: SkeletonLayout, moves, n_frames: int) -> np.ndarray:
    rest = _rest_pose(layout)
    frames = np.repeat(rest[None, :, :], n_frames, axis=0)
    t = np.linspace(0.0, 1.0, n_frames)
    for move in moves:
        wave = move["amplitude"] * np.sin(
            2.0 * math.pi * move["frequency"] * t + move["phase"]
        )
        # per-joint ramp so distal joints swing wider, like real limbs
        for rank, j in enumerate(move["joints"]):
            frames[:, j, :] += np.outer(wave * (0.5 + 0.5 * rank), move["direction"])
    return frames


def generate_synthetic(
    n_classes: int,
    n_per_class: int,
    n_joints: int,
    frame_range: tuple[int, int],
    noise_sigma: float,
    seed: int,
) -> Dataset:
    """Deterministic synthetic action dataset.

    Each class is a distinct parametric limb-oscillation family; sequences of
    a class sample the same continuous prototype at different lengths (drawn
    uniformly from frame_range), so they are time-warped copies of each other
    plus Gaussian jitter of scale noise_sigma. Prototypes and per-sequence
    lengths depend only on (class, index), never on `seed`, so changing the
    seed changes jitter alone.
    """
    if n_classes < 2:
        raise SkeletonDataError("need at least 2 classes")
    if n_per_class < 1 or n_joints < 1:
        raise SkeletonDataError("counts must be positive")
    lo, hi = int(frame_range[0]), int(frame_range[1])
    if not (10 <= lo <= hi <= 200):
        raise SkeletonDataError(f"frame_range must lie within [10, 200], got {frame_range}")

    layout = synthetic_layout(n_joints)
    noise_rng = np.random.default_rng(seed)
    sequences: list[SkeletonSequence] = []
    for c in range(n_classes):
        moves = _class_motion(c, layout)
        length_rng = np.random.default_rng((_PROTO_SEED, c, 1))
        lengths = length_rng.integers(lo, hi + 1, size=n_per_class)
        for i in range(n_per_class):
            frames = _prototype_frames(layout, moves, int(lengths[i]))
            if noise_sigma > 0:
                frames = frames + noise_rng.normal(0.0, noise_sigma, size=frames.shape)
            sequences.append(
                SkeletonSequence(
                    frames=frames, label=c, subject_id=i, event_id=0,
                    layout=layout, dataset_tag="synthetic",
                )
            )
    names = [f"action_{c}" for c in range(n_classes)]
    return Dataset(sequences=sequences, category_names=names, layout=layout, tag="synthetic")


# ---------------------------------------------------------------------------
# Interchange format
# ---------------------------------------------------------------------------

INTERCHANGE_VERSION = 1


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as the versioned interchange text document."""
    layout = dataset.layout
    lines = ["# skeleton dataset interchange document"]
    categories = ",".join(name.replace(",", ";") for name in dataset.category_names)
    lines.append(f"version={INTERCHANGE_VERSION} joints={layout.n_joints} categories={categories}")
    lines.append(f"tag {dataset.tag}")
    lines.append(
        f"refs stomach={layout.stomach} left_hip={layout.left_hip} right_hip={layout.right_hip}"
    )
    lines.append("names " + ",".join(layout.joint_names))
    for name, idx in layout.partition.parts():
        lines.append(f"part {name} " + ",".join(str(j) for j in idx))
    for parent, child in layout.tree:
        lines.append(f"link {parent} {child}")
    for seq in dataset.sequences:
        lines.append(f"seq label={seq.label} subject={seq.subject_id} event={seq.event_id}")
        for frame in seq.frames:
            lines.append(" ".join(_fmt(v) for v in frame.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    """Read a dataset written by save_dataset (bitwise coordinate round-trip)."""
    path = Path(path)
    lines = [
        (no, line.strip())
        for no, line in enumerate(path.read_text().splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise SkeletonDataError(f"{path}: empty interchange document")

    def fail(no: int, msg: str):
        raise SkeletonDataError(f"{path}:{no}: {msg}")

    no, header = lines[0]
    m = re.match(r"version=(\d+) joints=(\d+) categories=(.*)$", header)
    if m is None:
        fail(no, "malformed header (expected 'version=.. joints=.. categories=..')")
    if int(m.group(1)) != INTERCHANGE_VERSION:
        fail(no, f"unsupported version {m.group(1)} (supported: {INTERCHANGE_VERSION})")
    n_joints = int(m.group(2))
    categories = m.group(3).split(",") if m.group(3) else []

    tag = ""
    refs: dict[str, int] = {}
    names: tuple[str, ...] = ()
    parts: dict[str, tuple[int, ...]] = {}
    tree: list[tuple[int, int]] = []
    sequences: list[SkeletonSequence] = []
    current: dict | None = None
    frames: list[np.ndarray] = []
    layout: SkeletonLayout | None = None

    def flush(no: int):
        nonlocal current, frames, layout
        if current is None:
            return
        if layout is None:
            layout = SkeletonLayout(
                n_joints=n_joints,
                joint_names=names or tuple(f"j{i}" for i in range(n_joints)),
                stomach=refs.get("stomach", 0),
                left_hip=refs.get("left_hip", 1),
                right_hip=refs.get("right_hip", 2),
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
        if not frames:
            fail(no, "sequence block with no frame lines")
        sequences.append(
            SkeletonSequence(
                frames=np.stack(frames), label=current["label"],
                subject_id=current["subject"], event_id=current["event"],
                layout=layout, dataset_tag=tag,
            )
        )
        current, frames = None, []

    for no, line in lines[1:]:
        kind = line.split(None, 1)[0]
        if kind == "tag":
            tag = line[4:].strip()
        elif kind == "refs":
            for key_val in line.split()[1:]:
                key, _, val = key_val.partition("=")
                refs[key] = int(val)
        elif kind == "names":
            names = tuple(line.split(None, 1)[1].split(","))
        elif kind == "part":
            _, name, idx = line.split(None, 2)
            parts[name] = tuple(int(v) for v in idx.split(",")) if idx.strip() else ()
        elif kind == "link":
            _, parent, child = line.split()
            tree.append((int(parent), int(child)))
        elif kind == "seq":
            flush(no)
            m = re.match(r"seq label=(-?\d+) subject=(-?\d+) event=(-?\d+)$", line)
            if m is None:
                fail(no, "malformed sequence header")
            current = dict(label=int(m.group(1)), subject=int(m.group(2)), event=int(m.group(3)))
        else:
            if current is None:
                fail(no, f"unexpected line outside a sequence block: {line[:40]!r}")
            values = line.split()
            if len(values) != 3 * n_joints:
                fail(no, f"expected {3 * n_joints} coordinates, got {len(values)}")
            try:
                frames.append(np.array([float(v) for v in values]).reshape(n_joints, 3))
            except ValueError as exc:
                fail(no, f"non-numeric coordinate ({exc})")
    flush(lines[-1][0])
    if not sequences:
        raise SkeletonDataError(f"{path}: document contains no sequences")
    assert layout is not None
    return Dataset(sequences=sequences, category_names=categories, layout=layout, tag=tag)
