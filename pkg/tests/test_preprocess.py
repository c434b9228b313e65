import numpy as np
import pytest

from actiongrid.preprocess import (
    CanonicalSkeleton,
    DegenerateFrameError,
    PreprocessConfig,
    attention_select,
    build_canonical,
    compute_ego_basis,
    from_ego_frame,
    preprocess_sequence,
    scale_to_canonical,
    to_ego_frame,
)
from actiongrid.skeleton import (
    SkeletonDataError,
    SkeletonSequence,
    UTKINECT_LAYOUT,
    generate_synthetic,
    synthetic_layout,
)

LAYOUT5 = synthetic_layout(5)


def frame_with_refs(stomach, right_hip, left_hip, extra=None):
    """5-joint frame with the reference joints placed explicitly."""
    frame = np.zeros((5, 3))
    frame[LAYOUT5.stomach] = stomach
    frame[LAYOUT5.left_hip] = left_hip
    frame[LAYOUT5.right_hip] = right_hip
    frame[3] = extra if extra is not None else (0.5, 0.5, 0.5)
    frame[4] = (0.2, -0.4, 0.9)
    return frame


def random_valid_frame(rng, layout=LAYOUT5):
    """Random frame whose reference joints are guaranteed non-degenerate."""
    while True:
        frame = rng.normal(scale=1.0, size=(layout.n_joints, 3))
        hips = frame[layout.left_hip] - frame[layout.right_hip]
        if np.linalg.norm(hips) < 1e-3:
            continue
        hip_dir = hips / np.linalg.norm(hips)
        off = frame[layout.stomach] - frame[layout.right_hip]
        perp = off - (off @ hip_dir) * hip_dir
        if np.linalg.norm(perp) > 1e-3:
            return frame


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestEgoBasis:
    def test_hand_worked_example(self):
        frame = frame_with_refs(
            stomach=(0.0, 0.0, 1.0), right_hip=(1.0, 0.0, 0.0), left_hip=(-1.0, 0.0, 0.0)
        )
        basis = compute_ego_basis(frame, LAYOUT5)
        assert np.allclose(basis.x_axis, (0, 1, 0), atol=1e-12)
        assert np.allclose(basis.y_axis, (-1, 0, 0), atol=1e-12)
        assert np.allclose(basis.z_axis, (0, 0, 1), atol=1e-12)
        assert np.allclose(basis.origin, (0, 0, 1))

    def test_orthonormal_right_handed_on_random_frames(self, rng):
        for _ in range(200):
            basis = compute_ego_basis(random_valid_frame(rng), LAYOUT5)
            rot = basis.rotation
            assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(rot) - 1.0) < 1e-9
            for axis in (basis.x_axis, basis.y_axis, basis.z_axis):
                assert abs(np.linalg.norm(axis) - 1.0) < 1e-9

    def test_rotation_matches_independent_projection_oracle(self, rng):
        for _ in range(50):
            frame = random_valid_frame(rng)
            basis = compute_ego_basis(frame, LAYOUT5)
            # independent construction: straight least-squares projection on
            # the parametric hip line, then axes by definition
            j1 = frame[LAYOUT5.stomach]
            j2 = frame[LAYOUT5.right_hip]
            j3 = frame[LAYOUT5.left_hip]
            line = j3 - j2
            t = np.dot(j1 - j2, line) / np.dot(line, line)
            foot = j2 + t * line
            z = (j1 - foot) / np.linalg.norm(j1 - foot)
            y = (j3 - foot) / np.linalg.norm(j3 - foot)
            x = np.cross(y, z)
            x /= np.linalg.norm(x)
            oracle = np.column_stack([x, y, z])
            assert np.allclose(basis.rotation, oracle, atol=1e-9)

    def test_degenerate_hips_error(self):
        frame = frame_with_refs((0, 0, 1), (0.3, 0, 0), (0.3, 0, 0))
        with pytest.raises(DegenerateFrameError, match="hip joints coincide"):
            compute_ego_basis(frame, LAYOUT5)

    def test_stomach_on_hip_line_error(self):
        frame = frame_with_refs((0, 0, 0), (1, 0, 0), (-1, 0, 0))
        with pytest.raises(DegenerateFrameError, match="hip line"):
            compute_ego_basis(frame, LAYOUT5)


class TestEgoTransform:
    def test_hand_worked_joint(self):
        frame = frame_with_refs(
            stomach=(0.0, 0.0, 1.0), right_hip=(1.0, 0.0, 0.0), left_hip=(-1.0, 0.0, 0.0),
            extra=(0.0, 1.0, 1.0),
        )
        ego = to_ego_frame(frame, LAYOUT5)
        assert np.allclose(ego[3], (1.0, 0.0, 0.0), atol=1e-12)

    def test_stomach_maps_to_exact_origin(self, rng):
        for _ in range(20):
            ego = to_ego_frame(random_valid_frame(rng), LAYOUT5)
            assert np.array_equal(ego[LAYOUT5.stomach], np.zeros(3))

    def test_round_trip(self, rng):
        frame = random_valid_frame(rng)
        basis = compute_ego_basis(frame, LAYOUT5)
        ego = to_ego_frame(frame, LAYOUT5)
        back = from_ego_frame(ego, basis)
        # the stomach row was snapped to exactly zero, so compare loosely there
        assert np.allclose(back, frame, atol=1e-9)

    def test_rotation_invariance(self, rng):
        for _ in range(50):
            frame = random_valid_frame(rng)
            rot = random_rotation(rng)
            shift = rng.normal(scale=3.0, size=3)
            moved = frame @ rot.T + shift
            assert np.allclose(
                to_ego_frame(frame, LAYOUT5), to_ego_frame(moved, LAYOUT5), atol=1e-6
            )

    def test_translation_invariance(self, rng):
        frame = random_valid_frame(rng)
        moved = frame + np.array([10.0, -4.0, 2.5])
        assert np.allclose(
            to_ego_frame(frame, LAYOUT5), to_ego_frame(moved, LAYOUT5), atol=1e-9
        )


class TestScaling:
    def test_axis_aligned_halving(self):
        frame = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        canon = CanonicalSkeleton(links=((0, 1, 1.0),))
        out = scale_to_canonical(frame, canon)
        assert np.allclose(out[1], (1.0, 0.0, 0.0), atol=1e-12)

    def test_fixed_point(self, rng):
        frame = random_valid_frame(rng)
        seq = SkeletonSequence(frames=frame[None], label=0, subject_id=0, event_id=0,
                               layout=LAYOUT5)
        canon = build_canonical([seq])
        out = scale_to_canonical(frame, canon)
        assert np.allclose(out, frame, atol=1e-9)

    def test_lengths_and_directions_oracle(self, rng):
        canon_lengths = {link: 0.2 + 0.05 * i for i, link in enumerate(LAYOUT5.tree)}
        canon = CanonicalSkeleton(
            links=tuple((p, c, canon_lengths[(p, c)]) for p, c in LAYOUT5.tree)
        )
        for _ in range(50):
            frame = random_valid_frame(rng)
            out = scale_to_canonical(frame, canon)
            for parent, child, length in canon.links:
                vec_out = out[child] - out[parent]
                vec_in = frame[child] - frame[parent]
                assert abs(np.linalg.norm(vec_out) - length) < 1e-9
                dir_out = vec_out / np.linalg.norm(vec_out)
                dir_in = vec_in / np.linalg.norm(vec_in)
                assert np.allclose(dir_out, dir_in, atol=1e-9)

    def test_idempotent(self, rng):
        canon = CanonicalSkeleton(
            links=tuple((p, c, 0.3) for p, c in LAYOUT5.tree)
        )
        frame = random_valid_frame(rng)
        once = scale_to_canonical(frame, canon)
        twice = scale_to_canonical(once, canon)
        assert np.allclose(once, twice, atol=1e-12)

    def test_uniform_scaling_about_stomach_normalizes_away(self, rng):
        canon = CanonicalSkeleton(links=tuple((p, c, 0.3) for p, c in LAYOUT5.tree))
        frame = random_valid_frame(rng)
        stomach = frame[LAYOUT5.stomach]
        scaled = stomach + 2.7 * (frame - stomach)
        assert np.allclose(
            scale_to_canonical(frame, canon), scale_to_canonical(scaled, canon),
            atol=1e-6,
        )

    def test_zero_length_link_errors(self):
        frame = np.zeros((2, 3))
        canon = CanonicalSkeleton(links=((0, 1, 1.0),))
        with pytest.raises(SkeletonDataError, match="zero-length"):
            scale_to_canonical(frame, canon)

    def test_non_positive_canonical_length_rejected(self):
        with pytest.raises(SkeletonDataError, match="non-positive"):
            CanonicalSkeleton(links=((0, 1, 0.0),))


class TestBuildCanonical:
    def seq_scaled(self, frame, k):
        stomach = frame[LAYOUT5.stomach]
        return SkeletonSequence(
            frames=(stomach + k * (frame - stomach))[None],
            label=0, subject_id=0, event_id=0, layout=LAYOUT5,
        )

    def test_single_frame_is_its_own_canon(self, rng):
        frame = random_valid_frame(rng)
        canon = build_canonical([self.seq_scaled(frame, 1.0)])
        for parent, child, length in canon.links:
            assert abs(length - np.linalg.norm(frame[child] - frame[parent])) < 1e-12

    def test_identical_frames_share_lengths(self, rng):
        frame = random_valid_frame(rng)
        seqs = [self.seq_scaled(frame, 1.0) for _ in range(4)]
        canon = build_canonical(seqs)
        single = build_canonical(seqs[:1])
        assert canon == single

    def test_median_oracle_mixed_scales(self, rng):
        frame = random_valid_frame(rng)
        seqs = [self.seq_scaled(frame, k) for k in (1.0, 2.0, 4.0)]
        canon = build_canonical(seqs)
        for parent, child, length in canon.links:
            base = np.linalg.norm(frame[child] - frame[parent])
            assert abs(length - 2.0 * base) < 1e-9

    def test_empty_errors(self):
        with pytest.raises(SkeletonDataError, match="no sequences"):
            build_canonical([])


class TestAttention:
    def make_seq(self, frames, layout=UTKINECT_LAYOUT):
        return SkeletonSequence(
            frames=frames, label=0, subject_id=0, event_id=0, layout=layout
        )

    def moving_part_frames(self, part_name, n_frames=6, step=0.5):
        frames = np.tile(
            np.arange(UTKINECT_LAYOUT.n_joints)[None, :, None] * 0.1, (n_frames, 1, 3)
        )
        idx = list(UTKINECT_LAYOUT.partition.part(part_name))
        for t in range(n_frames):
            frames[t, idx, 0] += step * t
        return frames

    def test_single_moving_part_selected(self):
        seq = self.make_seq(self.moving_part_frames("RightArm"))
        part, reduced = attention_select(seq, UTKINECT_LAYOUT.partition)
        assert part == "RightArm"
        assert reduced.n_joints == 4

    def test_static_sequence_ties_to_left_arm(self):
        frames = np.tile(np.linspace(0, 1, 60).reshape(1, 20, 3), (5, 1, 1))
        part, _ = attention_select(self.make_seq(frames), UTKINECT_LAYOUT.partition)
        assert part == "LeftArm"

    def test_matches_displacement_sum_oracle(self, rng):
        for _ in range(20):
            frames = rng.normal(size=(8, 20, 3))
            seq = self.make_seq(frames)
            part, _ = attention_select(seq, UTKINECT_LAYOUT.partition)
            energies = {}
            for name, idx in UTKINECT_LAYOUT.partition.parts():
                total = 0.0
                for t in range(7):
                    for j in idx:
                        total += np.linalg.norm(frames[t + 1, j] - frames[t, j])
                energies[name] = total
            assert part == max(energies, key=energies.get)

    def test_subsampling_keeps_argmax_when_dominant(self):
        frames = self.moving_part_frames("LeftLeg", n_frames=10, step=1.0)
        seq = self.make_seq(frames)
        part_full, _ = attention_select(seq, UTKINECT_LAYOUT.partition)
        part_half, _ = attention_select(
            self.make_seq(frames[::2]), UTKINECT_LAYOUT.partition
        )
        assert part_full == part_half == "LeftLeg"

    def test_single_frame_errors(self):
        seq = self.make_seq(np.zeros((3, 20, 3)) + np.arange(20)[None, :, None])
        short = SkeletonSequence(
            frames=seq.frames[:1], label=0, subject_id=0, event_id=0,
            layout=UTKINECT_LAYOUT,
        )
        with pytest.raises(SkeletonDataError, match="at least 2"):
            attention_select(short, UTKINECT_LAYOUT.partition)


class TestPreprocessSequence:
    def test_output_dimension_no_attention(self):
        ds = generate_synthetic(2, 2, 20, (15, 20), 0.01, 1)
        seq = ds.sequences[0]
        out = preprocess_sequence(seq, PreprocessConfig(attention=False))
        assert out.shape == (seq.n_frames, 60)

    def test_output_dimension_15_joints(self):
        ds = generate_synthetic(2, 2, 15, (15, 20), 0.01, 1)
        seq = ds.sequences[0]
        out = preprocess_sequence(seq, PreprocessConfig(attention=False))
        assert out.shape == (seq.n_frames, 45)

    def test_attention_reduces_dimension(self):
        frames = TestAttention().moving_part_frames("RightArm")
        # keep refs sane: stomach off the hip line in every frame
        frames[:, UTKINECT_LAYOUT.stomach] = (0.0, 0.2, 1.0)
        frames[:, UTKINECT_LAYOUT.left_hip] = (0.2, 0.0, 0.5)
        frames[:, UTKINECT_LAYOUT.right_hip] = (-0.2, 0.0, 0.5)
        seq = SkeletonSequence(
            frames=frames, label=0, subject_id=0, event_id=0, layout=UTKINECT_LAYOUT
        )
        out = preprocess_sequence(seq, PreprocessConfig(attention=True))
        assert out.shape[1] == 12  # 4-joint part, 3 coordinates each

    def test_degenerate_frames_dropped_with_budget(self, rng):
        ds = generate_synthetic(2, 2, 15, (18, 20), 0.0, 1)
        seq = ds.sequences[0]
        frames = seq.frames.copy()
        frames[4, seq.layout.left_hip] = frames[4, seq.layout.right_hip]
        ok = SkeletonSequence(
            frames=frames, label=0, subject_id=0, event_id=0, layout=seq.layout
        )
        out = preprocess_sequence(ok, PreprocessConfig())
        assert out.shape[0] == seq.n_frames - 1

        bad = frames.copy()
        for t in range(bad.shape[0] // 2):
            bad[t, seq.layout.left_hip] = bad[t, seq.layout.right_hip]
        broken = SkeletonSequence(
            frames=bad, label=0, subject_id=0, event_id=0, layout=seq.layout
        )
        with pytest.raises(SkeletonDataError, match="degenerate"):
            preprocess_sequence(broken, PreprocessConfig())

    def test_scaling_stage_applied(self, rng):
        ds = generate_synthetic(2, 3, 15, (15, 20), 0.0, 2)
        canon = build_canonical(ds.sequences)
        seq = ds.sequences[0]
        out = preprocess_sequence(seq, PreprocessConfig(), canonical=canon)
        frame = out[0].reshape(15, 3)
        for parent, child, length in canon.links:
            assert abs(np.linalg.norm(frame[child] - frame[parent]) - length) < 1e-9
