"""Sketch-guided scenery outpainting: gated-convolution generator with an
LSTM bottleneck bridge, Wasserstein critics, deterministic training loop,
distribution metrics, and an HTTP inference service."""

from .blocks import (
    EDGE_NORM,
    FrozenEdgeDetector,
    GatedConv2d,
    GatedDeconv2d,
    GatedResBlock,
    SamePadConv2d,
    SobelEdgeDetector,
    binarize_sketch,
    concat_width,
    derive_seed,
    init_parameters,
    make_edge_detector,
    position_channels,
    split_halves,
    to_hwc,
    to_nchw,
)
from .critics import Critic, make_critic_pair
from .data import (
    CorpusError,
    MaskingPolicy,
    TrainingExample,
    extract_sketch,
    load_corpus,
    make_eval_example,
    make_example,
    random_crop_flip,
    random_sketch_mask,
    save_corpus,
    scene_with_layout,
    synth_corpus,
    synth_scenery,
)
from .evaluation import (
    FeatureStats,
    RandomProjectionExtractor,
    SceneLayoutClassifier,
    compute_stats,
    evaluate_rebuild,
    frechet_distance,
    get_extractor,
    inception_score,
    mean_satisfaction,
    read_rating_log,
)
from .generator import (
    SCALES,
    ArchitectureScale,
    ConditionalSkip,
    Generator,
    get_scale,
    outpaint_steps,
)
from .losses import (
    LossWeights,
    build_loss_mask,
    critic_loss,
    generator_adv_loss,
    gradient_penalty,
    masked_l1,
    sketch_alignment_loss,
    total_generator_loss,
)
from .service import create_app
from .training import (
    CheckpointError,
    TrainConfig,
    TrainingDiverged,
    build_models,
    build_optimizers,
    collate,
    config_fingerprint,
    desk_config,
    load_checkpoint,
    lr_at,
    restore_models,
    save_checkpoint,
    train,
    train_step,
)

__version__ = "0.1.0"
