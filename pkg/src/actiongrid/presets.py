"""Built-in experiment recipes.

Dataset presets carry the published hyperparameters (map sizes 900-2500
neurons, per-layer activity factors 1e6/1e3, learning rate 0.1, contrast
exponent 10, the "middle" insertion interval, and each architecture's epoch
budget); the synthetic presets are scaled-down stand-ins that run without
the public datasets.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .evaluate import DEFAULT_GG_LADDER, DEFAULT_SOM_LADDER, SplitSpec
from .growing_grid import GridConfig
from .label_layer import LabelConfig
from .pipeline import PipelineConfig
from .preprocess import PreprocessConfig
from .skeleton import MSR_SUBSET_10


@dataclass(frozen=True)
class DatasetSpec:
    """How a preset obtains its data."""

    kind: str  # synthetic | msr | utkinect | florence | interchange
    synthetic: tuple | None = None  # (classes, per_class, joints, lo, hi, noise, seed)
    msr_subset: tuple | None = None
    needs_path: bool = False
    instructions: str = ""


@dataclass
class Preset:
    name: str
    description: str
    dataset: DatasetSpec
    gg: PipelineConfig
    som: PipelineConfig
    split: SplitSpec
    gg_ladder: tuple = DEFAULT_GG_LADDER
    som_ladder: tuple = DEFAULT_SOM_LADDER


def _label(epochs: int = 150) -> LabelConfig:
    return LabelConfig(beta=0.1, epochs=epochs, rng_seed=3)


def _gg(sigma1, sigma2, gamma1, gamma2, e1, e2, label_epochs=150) -> PipelineConfig:
    from .growing_grid import LAMBDA_MIDDLE

    return PipelineConfig(
        preprocess=PreprocessConfig(),
        layer1=GridConfig(sigma=sigma1, gamma=gamma1, lambda_mode=LAMBDA_MIDDLE, rng_seed=1),
        layer2=GridConfig(sigma=sigma2, gamma=gamma2, lambda_mode=LAMBDA_MIDDLE, rng_seed=2),
        label=_label(label_epochs),
        backend="gg",
        layer1_epochs=e1,
        layer2_epochs=e2,
        shuffle_seed=11,
    )


def _som(sigma1, sigma2, shape1, shape2, e1, e2, label_epochs=150) -> PipelineConfig:
    from .som import SomConfig

    return PipelineConfig(
        preprocess=PreprocessConfig(),
        layer1=SomConfig(rows=shape1[0], cols=shape1[1], sigma=sigma1, epochs=e1, rng_seed=1),
        layer2=SomConfig(rows=shape2[0], cols=shape2[1], sigma=sigma2, epochs=e2, rng_seed=2),
        label=_label(label_epochs),
        backend="som",
        layer1_epochs=e1,
        layer2_epochs=e2,
        shuffle_seed=11,
    )


_DATA_URLS = {
    "msr": "the MSRAction3D skeleton archive (one aAA_sSS_eEE_skeleton3D.txt per sequence)",
    "utkinect": "the UTKinect-Action3D joints/ directory plus actionLabel.txt",
    "florence": "the Florence3D world-coordinates text file",
}


def build_presets() -> dict[str, Preset]:
    presets = {}

    presets["synth"] = Preset(
        name="synth",
        description="Dataset-free run: 5 synthetic action families, 200 sequences, "
                    "growing grid 100/64 neurons, 50+100 epochs.",
        dataset=DatasetSpec(kind="synthetic", synthetic=(5, 40, 20, 30, 60, 0.01, 11)),
        gg=_gg(10.0, 10.0, 100, 64, 50, 100),
        som=_som(10.0, 10.0, (10, 10), (8, 8), 200, 400),
        split=SplitSpec(mode="holdout", test_fraction=0.25, seed=11, stratified=True),
    )

    presets["synth-bench"] = Preset(
        name="synth-bench",
        description="Backend comparison on harder synthetic data (10 confusable "
                    "families) at matched neuron counts 256/169.",
        dataset=DatasetSpec(kind="synthetic", synthetic=(10, 32, 20, 25, 45, 0.02, 11)),
        gg=_gg(10.0, 10.0, 256, 169, 30, 24, label_epochs=100),
        som=_som(10.0, 10.0, (16, 16), (13, 13), 128, 128, label_epochs=100),
        split=SplitSpec(mode="holdout", test_fraction=0.25, seed=11, stratified=True),
    )

    presets["msr10"] = Preset(
        name="msr10",
        description="MSRAction3D, 10 whole-body actions, random 25% holdout; "
                    "published settings (900/1600 neurons, 200 vs 1300 epochs).",
        dataset=DatasetSpec(
            kind="msr", msr_subset=MSR_SUBSET_10, needs_path=True,
            instructions=_DATA_URLS["msr"],
        ),
        gg=_gg(1e6, 1e3, 900, 1600, 200, 200),
        som=_som(1e6, 1e3, (30, 30), (40, 40), 1300, 1300),
        split=SplitSpec(mode="holdout", test_fraction=0.25, seed=1, stratified=True),
    )

    presets["msr20"] = Preset(
        name="msr20",
        description="MSRAction3D, all 20 actions, random 25% holdout; 2500-neuron "
                    "maps, 250 vs 1600 epochs.",
        dataset=DatasetSpec(kind="msr", needs_path=True, instructions=_DATA_URLS["msr"]),
        gg=_gg(1e6, 1e3, 2500, 2500, 250, 250),
        som=_som(1e6, 1e3, (50, 50), (50, 50), 1600, 1600),
        split=SplitSpec(mode="holdout", test_fraction=0.25, seed=1, stratified=True),
    )

    presets["utkinect"] = Preset(
        name="utkinect",
        description="UTKinect, 10 actions, 10-fold cross validation; 900/1600 "
                    "neurons, 300 vs 1600 epochs.",
        dataset=DatasetSpec(kind="utkinect", needs_path=True,
                            instructions=_DATA_URLS["utkinect"]),
        gg=_gg(1e6, 1e3, 900, 1600, 300, 300),
        som=_som(1e6, 1e3, (30, 30), (40, 40), 1600, 1600),
        split=SplitSpec(mode="kfold", folds=10, seed=1, stratified=True),
    )

    presets["florence"] = Preset(
        name="florence",
        description="Florence3D, 9 actions, 10-fold cross validation; 900/1600 "
                    "neurons, 300 vs 1600 epochs.",
        dataset=DatasetSpec(kind="florence", needs_path=True,
                            instructions=_DATA_URLS["florence"]),
        gg=_gg(1e6, 1e3, 900, 1600, 300, 300),
        som=_som(1e6, 1e3, (30, 30), (40, 40), 1600, 1600),
        split=SplitSpec(mode="kfold", folds=10, seed=1, stratified=True),
    )

    return presets


PRESETS = build_presets()


def get_preset(name: str) -> Preset:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    # presets are templates; hand out copies so overrides never leak back
    return replace(base, gg=replace(base.gg), som=replace(base.som))
