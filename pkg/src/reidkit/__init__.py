"""reidkit: framework-free instance re-identification toolkit.

A library plus batch-evaluation CLI covering the full retrieval pipeline
mathematics: image pre-processing, spatial pooling, head transforms,
metric-learning and distillation losses, distance metrics, query expansion,
k-reciprocal re-ranking, and CMC/mAP/mINP/ROC evaluation over embedding
files.
"""

__version__ = "0.1.0"

from .core import (
    DistanceMatrix,
    Embedding,
    FeatureMap,
    ImageTensor,
    ItemMeta,
    l2_normalize,
    validate_meta_set,
)
from .aggregation import GemParams, attention_pool, avg_pool, gem_pool, max_pool
from .metrics import EvalProtocol, EvalReport, evaluate, roc_curve
from .retrieval import (
    QeParams,
    RerankParams,
    cosine_distances,
    dsr_score,
    euclidean_distances,
    k_reciprocal_rerank,
    query_expansion,
    rank_lists,
)
from .schedule import LrSchedule, PkSpec, is_backbone_frozen, lr_at, pk_sample
from .pipeline import dump_schedule, gen_synthetic, run_eval

__all__ = [
    "__version__",
    "DistanceMatrix",
    "Embedding",
    "FeatureMap",
    "ImageTensor",
    "ItemMeta",
    "l2_normalize",
    "validate_meta_set",
    "GemParams",
    "attention_pool",
    "avg_pool",
    "gem_pool",
    "max_pool",
    "EvalProtocol",
    "EvalReport",
    "evaluate",
    "roc_curve",
    "QeParams",
    "RerankParams",
    "cosine_distances",
    "dsr_score",
    "euclidean_distances",
    "k_reciprocal_rerank",
    "query_expansion",
    "rank_lists",
    "LrSchedule",
    "PkSpec",
    "is_backbone_frozen",
    "lr_at",
    "pk_sample",
    "dump_schedule",
    "gen_synthetic",
    "run_eval",
]
