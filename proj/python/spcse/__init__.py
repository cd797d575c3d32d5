"""Desk-scale contrastive sentence-embedding lab.

Train a small transformer encoder with an in-batch contrastive objective, score
attention heads and FFN neurons by the gradient of an alignment/uniformity
objective with respect to their gate variables, prune the lowest-scoring units
under a sparsity budget, rewind the survivors to an early checkpoint, retrain,
and evaluate — per call or as a full sweep over sparsity and lambda grids.

Everything here wraps the C++ core; arrays cross the boundary as float32 numpy.
"""

from ._spcse import (
    SpcseError,
    alignment_loss,
    checkpoint_info,
    contrastive_loss,
    default_config,
    embed,
    eval_sts,
    gen_corpus,
    importance,
    load_config,
    normalize_rows,
    override_config,
    run_sweep,
    spearman,
    uniformity_loss,
)

__all__ = [
    "SpcseError",
    "alignment_loss",
    "checkpoint_info",
    "contrastive_loss",
    "default_config",
    "embed",
    "eval_sts",
    "gen_corpus",
    "importance",
    "load_config",
    "normalize_rows",
    "override_config",
    "run_sweep",
    "spearman",
    "uniformity_loss",
]
