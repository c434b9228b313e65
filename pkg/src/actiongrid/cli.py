"""Command-line entry points: train, eval, bench, export-patterns.

Every run is described by a preset plus optional config-file and flag
overrides; all outputs land inside --output-dir. Exit codes: 0 success,
1 usage/config problem, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .evaluate import ConfusionMatrix, benchmark_backends, evaluate as evaluate_model, split as split_dataset
from .growing_grid import GridConfig, GrowingGrid
from .pipeline import (
    PipelineConfig,
    PipelineModel,
    load_model,
    predict,
    save_model,
    sequence_pattern,
    train_pipeline,
)
from .presets import PRESETS, Preset, get_preset
from .skeleton import (
    Dataset,
    SkeletonDataError,
    describe_format,
    generate_synthetic,
    load_dataset,
    load_florence3d,
    load_msr_action3d,
    load_utkinect,
)
from .som import SomConfig

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """Bad usage, bad config file, or missing inputs (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are exit code 1, not 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="actiongrid",
                     description="Growing-grid skeleton action recognition")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_output=True):
        p.add_argument("--preset", default="synth",
                       help=f"experiment preset ({', '.join(sorted(PRESETS))})")
        p.add_argument("--config", help="key=value config file with overrides")
        p.add_argument("--seed", type=int, help="master seed for splits and training")
        p.add_argument("--backend", choices=["gg", "som"], help="network backend")
        p.add_argument("--data", help="dataset root path (for dataset presets)")
        p.add_argument("--output-dir", required=needs_output,
                       help="directory receiving all outputs")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for fold-parallel runs")
        p.add_argument("--no-stratify", action="store_true",
                       help="plain random splits instead of per-class stratified")
        p.add_argument("--format", choices=["csv", "json"], default="csv",
                       help="stdout report format where applicable")
        p.add_argument("--describe-format", action="store_true",
                       help="print the preset's on-disk dataset format and exit")

    p_train = sub.add_parser("train", help="train a pipeline and save the model")
    common(p_train)
    p_train.add_argument("--fold", type=int, default=0,
                         help="which fold's training part to use under k-fold splits")
    p_train.add_argument("--all-folds", action="store_true",
                         help="train every fold and write a cross-validation summary")

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    common(p_eval)
    p_eval.add_argument("--model", required=True, help="model document to load")
    p_eval.add_argument("--fold", type=int, default=0,
                        help="which fold's test part to use under k-fold splits")
    p_eval.add_argument("--on", choices=["test", "all"], default="test",
                        help="evaluate on the split's test part or the whole dataset")

    p_bench = sub.add_parser("bench", help="compare the gg and som backends")
    common(p_bench)

    p_export = sub.add_parser("export-patterns",
                              help="write per-sequence patterns and cluster map")
    common(p_export)
    p_export.add_argument("--model", required=True, help="model document to load")

    return parser


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------

_SPLIT_KEYS = {"split.mode", "split.test_fraction", "split.folds", "split.stratified"}
_LABEL_KEYS = {"label.beta", "label.epochs", "label.paper_sign"}
_TOP_KEYS = {"backend", "seed", "data", "label_input", "attention",
             "epochs.layer1", "epochs.layer2", "shuffle_seed"}
_SYN_KEYS = {"synthetic.classes", "synthetic.per_class", "synthetic.joints",
             "synthetic.frames_min", "synthetic.frames_max", "synthetic.noise",
             "synthetic.seed"}
_GG_LAYER_FIELDS = {"sigma", "alpha0", "lambda", "gamma", "softmax_exp", "seed"}
_SOM_LAYER_FIELDS = {"rows", "cols", "sigma", "alpha0", "radius0", "radius_min",
                     "softmax_exp", "seed"}


def parse_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    values: dict[str, str] = {}
    errors: list[str] = []
    for no, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"{p}:{no}: expected key = value")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key or not val:
            errors.append(f"{p}:{no}: empty key or value")
            continue
        if key in values:
            errors.append(f"{p}:{no}: duplicate key {key!r}")
            continue
        values[key] = val
    if errors:
        raise ConfigError("config file problems:\n  " + "\n  ".join(errors))
    return values


def _parse_bool(val: str, key: str, errors: list[str]) -> bool:
    low = val.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    errors.append(f"{key}: expected a boolean, got {val!r}")
    return False


def _num(cast, val, key, errors, lo=None, hi=None):
    try:
        x = cast(val)
    except ValueError:
        errors.append(f"{key}: expected {cast.__name__}, got {val!r}")
        return None
    if lo is not None and x < lo:
        errors.append(f"{key}: {x} below minimum {lo}")
        return None
    if hi is not None and x > hi:
        errors.append(f"{key}: {x} above maximum {hi}")
        return None
    return x


def apply_overrides(preset: Preset, values: dict[str, str]) -> Preset:
    """Apply config-file key=value overrides to a preset, validating every
    key and reporting all problems at once. The keys backend/seed/data are
    consumed by the caller."""
    errors: list[str] = []
    split_kw: dict = {}
    synthetic = list(preset.dataset.synthetic or ())
    ds = preset.dataset
    gg, som = preset.gg, preset.som

    for key, val in values.items():
        if key in ("backend", "seed", "data"):
            continue
        if key == "label_input":
            if val not in ("activity_map", "winner_onehot"):
                errors.append(f"label_input: unknown value {val!r}")
            else:
                gg = replace(gg, label_input=val)
                som = replace(som, label_input=val)
        elif key == "attention":
            on = _parse_bool(val, key, errors)
            gg = replace(gg, preprocess=replace(gg.preprocess, attention=on))
            som = replace(som, preprocess=replace(som.preprocess, attention=on))
        elif key == "shuffle_seed":
            x = _num(int, val, key, errors)
            if x is not None:
                gg, som = replace(gg, shuffle_seed=x), replace(som, shuffle_seed=x)
        elif key in ("epochs.layer1", "epochs.layer2"):
            x = _num(int, val, key, errors, lo=1)
            if x is not None:
                which = "layer1_epochs" if key.endswith("layer1") else "layer2_epochs"
                gg, som = replace(gg, **{which: x}), replace(som, **{which: x})
        elif key in _SPLIT_KEYS:
            name = key.split(".", 1)[1]
            if name == "mode":
                if val not in ("holdout", "kfold"):
                    errors.append(f"{key}: must be holdout or kfold")
                else:
                    split_kw["mode"] = val
            elif name == "test_fraction":
                x = _num(float, val, key, errors, lo=0.01, hi=0.99)
                if x is not None:
                    split_kw["test_fraction"] = x
            elif name == "folds":
                x = _num(int, val, key, errors, lo=2)
                if x is not None:
                    split_kw["folds"] = x
            elif name == "stratified":
                split_kw["stratified"] = _parse_bool(val, key, errors)
        elif key in _LABEL_KEYS:
            name = key.split(".", 1)[1]
            if name == "beta":
                x = _num(float, val, key, errors, lo=1e-9)
            elif name == "epochs":
                x = _num(int, val, key, errors, lo=1)
            else:
                x = _parse_bool(val, key, errors)
            if x is not None:
                gg = replace(gg, label=replace(gg.label, **{name: x}))
                som = replace(som, label=replace(som.label, **{name: x}))
        elif key in _SYN_KEYS:
            if ds.kind != "synthetic":
                errors.append(f"{key}: preset {preset.name!r} does not use synthetic data")
                continue
            name = key.split(".", 1)[1]
            order = ["classes", "per_class", "joints", "frames_min", "frames_max",
                     "noise", "seed"]
            cast = float if name == "noise" else int
            x = _num(cast, val, key, errors, lo=0)
            if x is not None:
                synthetic[order.index(name)] = x
        elif key.startswith(("layer1.", "layer2.")):
            layer, name = key.split(".", 1)
            if name not in _GG_LAYER_FIELDS | _SOM_LAYER_FIELDS:
                errors.append(f"{key}: unknown layer field {name!r}")
                continue
            gg = _apply_layer_override(gg, layer, name, val, errors)
            som = _apply_layer_override(som, layer, name, val, errors)
        else:
            errors.append(f"unknown config key {key!r}")

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    out = replace(
        preset,
        gg=gg,
        som=som,
        split=replace(preset.split, **split_kw) if split_kw else preset.split,
    )
    if ds.kind == "synthetic" and synthetic:
        out = replace(out, dataset=replace(ds, synthetic=tuple(synthetic)))
    return out


def _apply_layer_override(config: PipelineConfig, layer: str, name: str, val: str,
                          errors: list[str]) -> PipelineConfig:
    cfg = config.layer1 if layer == "layer1" else config.layer2
    mapping = {"seed": "rng_seed", "lambda": "lambda_mode"}
    field_name = mapping.get(name, name)
    if not hasattr(cfg, field_name):
        return config  # field belongs to the other backend's config
    current = getattr(cfg, field_name)
    try:
        if field_name == "lambda_mode":
            parsed = val if val == "middle" else int(val)
        elif isinstance(current, int) and not isinstance(current, bool):
            parsed = int(val)
        else:
            parsed = float(val)
        new_cfg = replace(cfg, **{field_name: parsed})
    except ValueError as exc:
        errors.append(f"{layer}.{name}: {exc}")
        return config
    return replace(config, **{layer: new_cfg})


def apply_master_seed(config: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(
        config,
        shuffle_seed=seed,
        layer1=replace(config.layer1, rng_seed=seed + 1),
        layer2=replace(config.layer2, rng_seed=seed + 2),
        label=replace(config.label, rng_seed=seed + 3),
    )


def resolve_run(args) -> tuple[Preset, PipelineConfig]:
    try:
        preset = get_preset(args.preset)
    except KeyError as exc:
        raise ConfigError(exc.args[0])
    file_values: dict[str, str] = {}
    if args.config:
        file_values = parse_config_file(args.config)
        preset = apply_overrides(preset, file_values)
    if args.no_stratify:
        preset = replace(preset, split=replace(preset.split, stratified=False))
    seed = args.seed
    if seed is None and "seed" in file_values:
        errors: list[str] = []
        seed = _num(int, file_values["seed"], "seed", errors)
        if errors:
            raise ConfigError(errors[0])
    if seed is not None:
        preset = replace(
            preset,
            split=replace(preset.split, seed=seed),
            gg=apply_master_seed(preset.gg, seed),
            som=apply_master_seed(preset.som, seed),
        )
    backend = args.backend or file_values.get("backend", "gg")
    if backend not in ("gg", "som"):
        raise ConfigError(f"backend must be gg or som, got {backend!r}")
    if args.data is None and "data" in file_values:
        args.data = file_values["data"]
    active = preset.gg if backend == "gg" else preset.som
    return preset, active


def load_preset_dataset(preset: Preset, data_path: str | None) -> Dataset:
    ds = preset.dataset
    if ds.kind == "synthetic":
        c, per, joints, lo, hi, noise, seed = ds.synthetic
        return generate_synthetic(int(c), int(per), int(joints),
                                  (int(lo), int(hi)), float(noise), int(seed))
    if data_path is None:
        raise ConfigError(
            f"preset {preset.name!r} needs --data pointing at {ds.instructions}"
        )
    path = Path(data_path)
    if not path.exists():
        raise ConfigError(
            f"dataset path {path} does not exist; obtain {ds.instructions} "
            f"and pass its location via --data"
        )
    if ds.kind == "msr":
        return load_msr_action3d(path, subset=ds.msr_subset)
    if ds.kind == "utkinect":
        return load_utkinect(path)
    if ds.kind == "florence":
        return load_florence3d(path)
    if ds.kind == "interchange":
        return load_dataset(path)
    raise ConfigError(f"unknown dataset kind {ds.kind!r}")


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    preset, config = resolve_run(args)
    if args.describe_format:
        print(describe_format(preset.dataset.kind))
        return 0
    dataset = load_preset_dataset(preset, args.data)
    pairs = split_dataset(dataset, preset.split)
    out = _out_dir(args)

    if args.all_folds and preset.split.mode == "kfold":
        def run_fold(k_pair):
            k, (train_set, test_set) = k_pair
            model = train_pipeline(config, train_set)
            save_model(model, out / f"model_fold{k}.txt")
            _write_growth_reports(model, out, suffix=f"_fold{k}")
            return evaluate_model(model, test_set)

        if args.threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(run_fold, enumerate(pairs)))
        else:
            results = [run_fold(kp) for kp in enumerate(pairs)]
        counts = sum(r.confusion.counts for r in results)
        pooled = ConfusionMatrix(counts=counts,
                                 category_names=list(dataset.category_names))
        summary = {
            "fold_accuracies": [r.accuracy for r in results],
            "pooled_accuracy": pooled.accuracy,
        }
        (out / "cv_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"pooled_accuracy={pooled.accuracy:.4f}")
        return 0

    fold = min(args.fold, len(pairs) - 1)
    train_set, _ = pairs[fold]
    model = train_pipeline(config, train_set)
    save_model(model, out / "model.txt")
    _write_growth_reports(model, out)
    info = model.training_info
    lines = [
        f"backend={model.backend}",
        f"sequences={len(train_set)}",
        f"layer1={model.layer1.rows}x{model.layer1.cols} "
        f"epochs={info.layer1.epochs_used} wall={info.layer1.wall_seconds:.2f}s",
        f"k_max={model.k_max}",
        f"layer2={model.layer2.rows}x{model.layer2.cols} "
        f"epochs={info.layer2.epochs_used} wall={info.layer2.wall_seconds:.2f}s",
        f"train_accuracy={info.label_report.final_accuracy:.4f}",
        f"total_wall={info.total_wall_seconds:.2f}s",
    ]
    (out / "train_log.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"model written to {out / 'model.txt'}")
    return 0


def _write_growth_reports(model: PipelineModel, out: Path, suffix: str = "") -> None:
    info = model.training_info
    if info is None:
        return
    for layer_name, phase in (("layer1", info.layer1), ("layer2", info.layer2)):
        if phase.growth is not None:
            path = out / f"growth_{layer_name}{suffix}.csv"
            path.write_text(phase.growth.to_csv())


def cmd_eval(args) -> int:
    preset, _ = resolve_run(args)
    if args.describe_format:
        print(describe_format(preset.dataset.kind))
        return 0
    model = load_model(args.model)
    dataset = load_preset_dataset(preset, args.data)
    if model.category_names != dataset.category_names:
        raise ConfigError(
            "model/dataset category mismatch: model has "
            f"{model.category_names}, dataset has {dataset.category_names}"
        )
    if args.on == "all":
        test_set = dataset
    else:
        pairs = split_dataset(dataset, preset.split)
        fold = min(args.fold, len(pairs) - 1)
        test_set = pairs[fold][1]
    result = evaluate_model(model, test_set)
    out = _out_dir(args)
    (out / "confusion.csv").write_text(result.confusion.to_csv())
    (out / "confusion.json").write_text(result.confusion.to_json() + "\n")
    print(f"accuracy={result.accuracy:.4f}")
    if args.format == "json":
        print(result.confusion.to_json())
    return 0


def cmd_bench(args) -> int:
    preset, _ = resolve_run(args)
    if args.describe_format:
        print(describe_format(preset.dataset.kind))
        return 0
    dataset = load_preset_dataset(preset, args.data)
    report = benchmark_backends(
        dataset, preset.gg, preset.som, preset.split,
        gg_ladder=preset.gg_ladder, som_ladder=preset.som_ladder,
    )
    out = _out_dir(args)
    (out / "bench.json").write_text(report.to_json() + "\n")
    for side in (report.gg, report.som):
        print(f"{side.backend}: accuracy={side.accuracy:.4f} epochs={side.epochs} "
              f"rt={side.relative_time:.3f}")
    print(f"report written to {out / 'bench.json'}")
    return 0


def cmd_export_patterns(args) -> int:
    preset, _ = resolve_run(args)
    if args.describe_format:
        print(describe_format(preset.dataset.kind))
        return 0
    model = load_model(args.model)
    dataset = load_preset_dataset(preset, args.data)
    out = _out_dir(args)
    patterns_dir = out / "patterns"
    patterns_dir.mkdir(exist_ok=True)
    cluster_lines = ["sequence,label,winner_row,winner_col"]
    for i, seq in enumerate(dataset.sequences):
        ordered = sequence_pattern(model, seq)
        (patterns_dir / f"pattern_{i:04d}.csv").write_text(ordered.to_csv(str(i)))
        won = model.layer2.find_winner(ordered.flattened)
        cluster_lines.append(f"{i},{seq.label},{won.row},{won.col}")
    (out / "clusters.csv").write_text("\n".join(cluster_lines) + "\n")
    print(f"{len(dataset.sequences)} patterns written to {patterns_dir}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "export-patterns": cmd_export_patterns,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
