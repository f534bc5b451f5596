"""Guided-fusion person re-identification core.

Thin Python surface over the C++ library: tensor joins, the two training
losses, retrieval metrics (mAP/CMC), and k-reciprocal re-ranking.
"""

from sspreid._core import (
    FormatError,
    ProtocolError,
    bilinear_resize,
    channel_weight,
    cross_entropy_lsr,
    distance_matrix,
    evaluate,
    global_avg_pool,
    l2_normalize,
    load_gallery,
    load_saliency,
    lsr_target,
    parsing_join,
    rerank,
    saliency_join,
    save_gallery,
    ssp_combine,
    stream_combine,
    triplet_hard,
)

__all__ = [
    "FormatError",
    "ProtocolError",
    "bilinear_resize",
    "channel_weight",
    "cross_entropy_lsr",
    "distance_matrix",
    "evaluate",
    "global_avg_pool",
    "l2_normalize",
    "load_gallery",
    "load_saliency",
    "lsr_target",
    "parsing_join",
    "rerank",
    "saliency_join",
    "save_gallery",
    "ssp_combine",
    "stream_combine",
    "triplet_hard",
]

__version__ = "0.1.0"
