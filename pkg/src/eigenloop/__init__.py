"""Budget-constrained active few-label transfer toolkit."""

from .clustering import (
    AnchorSet,
    ClusterState,
    KMeansConfig,
    ackmeans,
    bcubed_precision,
    inertia,
    kmeans_pp_init,
    select_eigen_samples,
)
from .contrastive import (
    AugmentationConfig,
    EncoderMLP,
    MixConfig,
    PretrainConfig,
    Temperature,
    encoder_backward,
    encoder_forward,
    info_nce_grad,
    info_nce_loss,
    load_encoder,
    loss_decomposition,
    mixing_sampler,
    pretrain,
    save_encoder,
)
from .core import (
    EmbeddingSet,
    LabeledSet,
    RngStream,
    cosine_sim,
    load_embeddings,
    load_embeddings_csv,
    load_labels,
    normalize_rows,
    save_embeddings,
    save_labels,
    sq_euclidean,
)
from .synth import Benchmark, DomainShift, MixtureSpec, apply_shift, gen_mixture, make_benchmark
from .transfer import (
    AdapterModel,
    Budget,
    EvolutionState,
    FinetuneConfig,
    GroundTruthOracle,
    HistoryRow,
    ProgressiveLoop,
    cluster_quality,
    evaluate,
    finetune,
    pick_indicators,
    progressive_loop,
    random_baseline,
    reembed,
)

__version__ = "0.1.0"
