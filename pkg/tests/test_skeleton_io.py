import numpy as np
import pytest

from actiongrid.skeleton import (
    FLORENCE_LAYOUT,
    MSR_LAYOUT,
    MSR_SUBSET_10,
    UTKINECT_LAYOUT,
    SkeletonDataError,
    SkeletonSequence,
    describe_format,
    generate_synthetic,
    load_dataset,
    load_florence3d,
    load_msr_action3d,
    load_utkinect,
    save_dataset,
    synthetic_layout,
)


# ---------------------------------------------------------------------------
# fixture-file builders (tiny, format-faithful stand-ins for the real data)
# ---------------------------------------------------------------------------

def write_msr_file(path, n_frames=4, offset=0.0):
    rows = []
    for t in range(n_frames):
        for j in range(20):
            rows.append(f"{offset + j * 0.1} {t * 0.5} {1.0 + j * 0.01} 1.0")
    path.write_text("\n".join(rows) + "\n")


def make_msr_dir(tmp_path, actions=(10, 11), subjects=(1, 2), events=(1,)):
    root = tmp_path / "msr"
    root.mkdir()
    for a in actions:
        for s in subjects:
            for e in events:
                write_msr_file(
                    root / f"a{a:02d}_s{s:02d}_e{e:02d}_skeleton3D.txt",
                    offset=a + s,
                )
    return root


def make_utkinect_dir(tmp_path, videos=("s01_e01", "s01_e02"), n_actions=10):
    from actiongrid.skeleton import UTKINECT_ACTION_NAMES

    root = tmp_path / "utk"
    (root / "joints").mkdir(parents=True)
    label_lines = []
    for v_idx, video in enumerate(videos):
        label_lines.append(video)
        rows = []
        frame = 1
        for a_idx in range(n_actions):
            start = frame
            for _ in range(4):
                coords = " ".join(
                    f"{a_idx + j * 0.05 + v_idx}" for j in range(60)
                )
                rows.append(f"{frame} {coords}")
                frame += 1
            label_lines.append(f"{UTKINECT_ACTION_NAMES[a_idx]}: {start} {frame - 1}")
        (root / "joints" / f"joints_{video}.txt").write_text("\n".join(rows) + "\n")
    (root / "actionLabel.txt").write_text("\n".join(label_lines) + "\n")
    return root


def make_florence_file(tmp_path, n_videos=4, frames_per_video=5):
    lines = []
    for v in range(1, n_videos + 1):
        category = (v - 1) % 9 + 1
        actor = (v - 1) // 9 + 1
        for t in range(frames_per_video):
            coords = " ".join(f"{v + t * 0.1 + j * 0.01}" for j in range(45))
            lines.append(f"{v} {actor} {category} {coords}")
    path = tmp_path / "florence.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# MSRAction3D
# ---------------------------------------------------------------------------

class TestMsrLoader:
    def test_loads_sequences_and_drops_confidence(self, tmp_path):
        root = make_msr_dir(tmp_path, actions=(10, 11), subjects=(1, 2), events=(1, 2))
        ds = load_msr_action3d(root, subset=(10, 11))
        assert len(ds) == 8
        assert len(ds.category_names) == 2
        seq = ds.sequences[0]
        assert seq.frames.shape == (4, 20, 3)
        assert seq.subject_id in (1, 2)

    def test_subset_filters_actions(self, tmp_path):
        root = make_msr_dir(tmp_path, actions=(1, 10), subjects=(1,))
        ds = load_msr_action3d(root, subset=(10,))
        assert len(ds) == 1
        assert ds.category_names == ["hand clap"]

    def test_full_subset_ids_cover_ten_categories(self):
        assert len(MSR_SUBSET_10) == 10

    def test_missing_directory_errors(self, tmp_path):
        with pytest.raises(SkeletonDataError, match="not found"):
            load_msr_action3d(tmp_path / "nope")

    def test_empty_directory_errors(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(SkeletonDataError, match="no MSRAction3D"):
            load_msr_action3d(empty)

    def test_malformed_row_errors_with_line(self, tmp_path):
        root = tmp_path / "msr"
        root.mkdir()
        path = root / "a10_s01_e01_skeleton3D.txt"
        good = "0.0 0.0 0.0 1.0"
        lines = [good] * 30
        lines[14] = "0.0 0.0 0.0"  # wrong column count
        path.write_text("\n".join(lines))
        with pytest.raises(SkeletonDataError, match=":15"):
            load_msr_action3d(root)

    def test_joint_rows_not_multiple_of_20_errors(self, tmp_path):
        root = tmp_path / "msr"
        root.mkdir()
        (root / "a10_s01_e01_skeleton3D.txt").write_text(
            "\n".join(["0 0 0 1"] * 65)
        )
        with pytest.raises(SkeletonDataError, match="multiple of 20"):
            load_msr_action3d(root)

    def test_too_few_frames_rejected(self, tmp_path):
        root = tmp_path / "msr"
        root.mkdir()
        write_msr_file(root / "a10_s01_e01_skeleton3D.txt", n_frames=2)
        with pytest.raises(SkeletonDataError, match="at least 3"):
            load_msr_action3d(root)

    def test_exclusion_list(self, tmp_path):
        root = make_msr_dir(tmp_path, actions=(10,), subjects=(1, 2))
        ds = load_msr_action3d(root, exclude={"a10_s01_e01_skeleton3D.txt"})
        assert len(ds) == 1


# ---------------------------------------------------------------------------
# UTKinect
# ---------------------------------------------------------------------------

class TestUtkinectLoader:
    def test_loads_sequences(self, tmp_path):
        root = make_utkinect_dir(tmp_path)
        ds = load_utkinect(root)
        assert len(ds) == 20  # 2 videos x 10 actions
        assert len(ds.category_names) == 10
        assert ds.sequences[0].frames.shape[1:] == (20, 3)

    def test_frame_vectors_are_60_dimensional(self, tmp_path):
        root = make_utkinect_dir(tmp_path, videos=("s01_e01",))
        ds = load_utkinect(root)
        flat = ds.sequences[0].frames.reshape(ds.sequences[0].n_frames, -1)
        assert flat.shape[1] == 60

    def test_overlapping_ranges_error(self, tmp_path):
        root = make_utkinect_dir(tmp_path, videos=("s01_e01",))
        label = root / "actionLabel.txt"
        text = label.read_text().replace("sitDown: 5 8", "sitDown: 3 8")
        label.write_text(text)
        with pytest.raises(SkeletonDataError, match="overlaps"):
            load_utkinect(root)

    def test_range_with_no_frames_errors(self, tmp_path):
        root = make_utkinect_dir(tmp_path, videos=("s01_e01",))
        label = root / "actionLabel.txt"
        text = label.read_text().replace("clapHands: 37 40", "clapHands: 900 940")
        label.write_text(text)
        with pytest.raises(SkeletonDataError, match="matches no recorded frames"):
            load_utkinect(root)

    def test_unparsable_label_file_errors(self, tmp_path):
        root = make_utkinect_dir(tmp_path, videos=("s01_e01",))
        (root / "actionLabel.txt").write_text("s01_e01\nwalk: 1 2 3\n")
        with pytest.raises(SkeletonDataError, match="first last"):
            load_utkinect(root)

    def test_missing_pieces_error(self, tmp_path):
        with pytest.raises(SkeletonDataError, match="joints/"):
            load_utkinect(tmp_path)


# ---------------------------------------------------------------------------
# Florence3D
# ---------------------------------------------------------------------------

class TestFlorenceLoader:
    def test_loads_sequences(self, tmp_path):
        path = make_florence_file(tmp_path, n_videos=4)
        ds = load_florence3d(path)
        assert len(ds) == 4
        assert len(ds.category_names) == 9
        assert ds.sequences[0].frames.shape == (5, 15, 3)

    def test_frame_vectors_are_45_dimensional(self, tmp_path):
        path = make_florence_file(tmp_path, n_videos=1)
        ds = load_florence3d(path)
        flat = ds.sequences[0].frames.reshape(-1, 45)
        assert flat.shape[1] == 45

    def test_malformed_row_names_line_number(self, tmp_path):
        path = make_florence_file(tmp_path, n_videos=2)
        lines = path.read_text().splitlines()
        lines[6] = "1 1 1 0.5 0.5"
        path.write_text("\n".join(lines))
        with pytest.raises(SkeletonDataError, match=":7"):
            load_florence3d(path)

    def test_missing_file_errors(self, tmp_path):
        with pytest.raises(SkeletonDataError, match="not found"):
            load_florence3d(tmp_path / "nope.txt")


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

class TestSynthetic:
    def test_counts_and_classes(self):
        ds = generate_synthetic(5, 40, 20, (30, 60), 0.01, 7)
        assert len(ds) == 200
        assert len(ds.category_names) == 5
        assert ds.layout.n_joints == 20
        assert all(30 <= s.n_frames <= 60 for s in ds.sequences)

    def test_deterministic_per_seed(self, tmp_path):
        a = generate_synthetic(3, 5, 15, (20, 30), 0.02, 7)
        b = generate_synthetic(3, 5, 15, (20, 30), 0.02, 7)
        for sa, sb in zip(a.sequences, b.sequences):
            assert np.array_equal(sa.frames, sb.frames)
        # byte-identical through the interchange writer as well
        pa, pb = tmp_path / "a.txt", tmp_path / "b.txt"
        save_dataset(a, pa)
        save_dataset(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_zero_noise_gives_time_warped_prototypes(self):
        ds = generate_synthetic(2, 6, 15, (20, 40), 0.0, 3)
        by_class_and_len = {}
        for seq in ds.sequences:
            key = (seq.label, seq.n_frames)
            if key in by_class_and_len:
                assert np.array_equal(seq.frames, by_class_and_len[key])
            by_class_and_len[key] = seq.frames

    def test_different_seed_changes_only_jitter(self):
        a = generate_synthetic(3, 4, 15, (20, 30), 0.0, 1)
        b = generate_synthetic(3, 4, 15, (20, 30), 0.0, 2)
        for sa, sb in zip(a.sequences, b.sequences):
            assert np.array_equal(sa.frames, sb.frames)
        noisy_a = generate_synthetic(3, 4, 15, (20, 30), 0.05, 1)
        noisy_b = generate_synthetic(3, 4, 15, (20, 30), 0.05, 2)
        for sa, sb in zip(noisy_a.sequences, noisy_b.sequences):
            assert sa.n_frames == sb.n_frames
            assert not np.array_equal(sa.frames, sb.frames)

    def test_fixed_length_range(self):
        ds = generate_synthetic(2, 10, 15, (20, 20), 0.05, 1)
        assert len(ds) == 20
        assert all(s.n_frames == 20 for s in ds.sequences)

    def test_input_validation(self):
        with pytest.raises(SkeletonDataError):
            generate_synthetic(1, 10, 15, (20, 30), 0.0, 1)
        with pytest.raises(SkeletonDataError):
            generate_synthetic(2, 0, 15, (20, 30), 0.0, 1)
        with pytest.raises(SkeletonDataError):
            generate_synthetic(2, 5, 15, (5, 30), 0.0, 1)

    def test_layout_partition_covers_all_joints(self):
        for n in (5, 9, 15, 20, 33):
            layout = synthetic_layout(n)
            layout.validate()


# ---------------------------------------------------------------------------
# interchange format
# ---------------------------------------------------------------------------

class TestInterchange:
    def test_round_trip_bitwise(self, tmp_path):
        ds = generate_synthetic(3, 4, 15, (20, 25), 0.03, 11)
        path = tmp_path / "ds.txt"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.category_names == ds.category_names
        assert back.layout == ds.layout
        assert len(back) == len(ds)
        for sa, sb in zip(ds.sequences, back.sequences):
            assert np.array_equal(sa.frames, sb.frames)
            assert (sa.label, sa.subject_id, sa.event_id) == (
                sb.label, sb.subject_id, sb.event_id,
            )

    def test_save_load_save_is_stable(self, tmp_path):
        ds = generate_synthetic(2, 3, 15, (20, 22), 0.01, 5)
        p1, p2 = tmp_path / "one.txt", tmp_path / "two.txt"
        save_dataset(ds, p1)
        save_dataset(load_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_version_rejected(self, tmp_path):
        ds = generate_synthetic(2, 3, 15, (20, 22), 0.01, 5)
        path = tmp_path / "ds.txt"
        save_dataset(ds, path)
        text = path.read_text().replace("version=1", "version=9")
        path.write_text(text)
        with pytest.raises(SkeletonDataError, match="version"):
            load_dataset(path)

    def test_wrong_coordinate_count_names_line(self, tmp_path):
        ds = generate_synthetic(2, 3, 15, (20, 22), 0.01, 5)
        path = tmp_path / "ds.txt"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        for i, line in enumerate(lines):
            if line.startswith("seq "):
                lines[i + 1] = "1.0 2.0 3.0"
                break
        path.write_text("\n".join(lines))
        with pytest.raises(SkeletonDataError, match="expected 45 coordinates"):
            load_dataset(path)


# ---------------------------------------------------------------------------
# shared structure checks
# ---------------------------------------------------------------------------

class TestStructures:
    def test_builtin_layouts_validate(self):
        for layout in (MSR_LAYOUT, UTKINECT_LAYOUT, FLORENCE_LAYOUT):
            layout.validate()
            assert len(layout.tree) == layout.n_joints - 1

    def test_sequence_rejects_nan(self):
        layout = synthetic_layout(5)
        frames = np.zeros((4, 5, 3))
        frames[1, 2, 0] = np.nan
        with pytest.raises(SkeletonDataError, match="non-finite"):
            SkeletonSequence(frames=frames, label=0, subject_id=0, event_id=0, layout=layout)

    def test_sequence_rejects_wrong_joint_count(self):
        layout = synthetic_layout(5)
        with pytest.raises(SkeletonDataError, match="joint count"):
            SkeletonSequence(
                frames=np.zeros((4, 6, 3)), label=0, subject_id=0, event_id=0,
                layout=layout,
            )

    def test_describe_format_known_names(self):
        for name in ("msr", "utkinect", "florence", "synthetic", "interchange"):
            assert describe_format(name)
        with pytest.raises(KeyError):
            describe_format("unknown")
