"""Self-supervised dual-network dynamic MRI reconstruction."""

from ._selfcolearn import (
    data_consistency,
    evaluate_pair,
    fft2,
    forward_model,
    gen_mask,
    gen_phantom_sequence,
    gradcheck,
    resolved_config,
    run_command,
    split_mask,
    zero_filled,
)

__all__ = [
    "data_consistency",
    "evaluate_pair",
    "fft2",
    "forward_model",
    "gen_mask",
    "gen_phantom_sequence",
    "gradcheck",
    "resolved_config",
    "run_command",
    "split_mask",
    "zero_filled",
]
