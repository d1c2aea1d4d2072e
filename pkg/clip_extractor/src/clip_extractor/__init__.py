"""Offline landmark/view similarity scoring emitting navigation score tables."""

from .embedder import TOY_MODEL_ID, ToyColorTextEmbedder, cosine_similarity, load_embedder
from .scoring import (RawScore, ScoringError, SkippedView, SkippedViewWarning,
                      VIEW_OFFSETS_DEG, ViewSpec, compute_stats, load_landmarks,
                      load_raw_scores, load_views_manifest, score_views, standardize,
                      store_raw_scores, store_skip_manifest, store_stats)

__version__ = "0.1.0"
