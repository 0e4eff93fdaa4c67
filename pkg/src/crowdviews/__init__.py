"""Multiview embeddings from crowdsourced double-sided triplet comparisons."""

from .crowdsim import (
    COLOR_NAMES,
    DatasetManifest,
    ItemLabel,
    ItemRecord,
    SimWorkerSpec,
    color_distance,
    digit_distance,
    generate_corpus,
    generate_dataset,
    load_manifest,
    read_triplets,
    render_item,
    render_items,
    sample_triplets,
    save_manifest,
    setting_workers,
    simulate_answer,
    write_triplets,
)
from .errors import (
    CheckpointError,
    ConfigurationError,
    CrowdviewsError,
    NumericError,
    ShapeError,
    SimulationError,
    TrainingError,
    UnknownIdError,
)
from .evaluation import (
    EvalReport,
    agglomerative,
    evaluate_model,
    export_embeddings,
    k_anchors_eval,
    kmeans,
    linear_eval,
    nmi,
    preference_report,
    purity,
    triplet_accuracy,
)
from .model import (
    EncoderConfig,
    ModelParams,
    forward,
    forward_batch,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .objective import (
    TripletAnnotation,
    TripletWeights,
    ViewPairProbs,
    WorkerChoiceProbs,
    batch_loss,
    combined_weights,
    inherent_weight,
    loss_gradients,
    triplet_entropy,
    view_pair_probs,
    view_similarity,
    worker_choice_probs,
)
from .estimator import MultiviewTripletEmbedder
from .trainer import TrainConfig, train, train_single_view_baseline

__version__ = "0.1.0"
