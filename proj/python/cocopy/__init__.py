"""Multi-environment causal estimation via gradient penalties."""

from ._coco import (
    check,
    fit,
    generate,
    intersect_plausible_sets,
    ols,
    penalty,
    pooled_ols,
    workflow,
)

__all__ = [
    "check",
    "fit",
    "generate",
    "intersect_plausible_sets",
    "ols",
    "penalty",
    "pooled_ols",
    "workflow",
]
