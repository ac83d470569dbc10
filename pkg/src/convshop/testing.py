"""Synthetic fixtures shared by the test suite and the grad-check command."""

from __future__ import annotations

import numpy as np

from .model.core import ModelConfig, init_params
from .model.data import TrainingExample


def random_examples(n: int, seed: int = 0, d: int = 8, n_heads: int = 2,
                    d_head: int = 4, text_vocab: int = 40, attr_vocab: int = 20,
                    state_vocab: int = 20, n_candidates: int = 4,
                    param_scale: float = 0.3):
    """Random parameters, config, and training examples for gradient checks.

    Parameters are re-drawn at normal scale (Gaussian * param_scale) instead
    of the tiny init so gradients are not uniformly near zero.
    """
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(d=d, n_heads=n_heads, d_head=d_head, text_vocab=text_vocab,
                      attr_vocab=attr_vocab, state_vocab=state_vocab)
    params = init_params(cfg, seed=seed)
    for key in params:
        params[key] = rng.normal(0.0, param_scale, size=params[key].shape)

    def ids(vocab, lo=1, hi=8):
        return list(rng.integers(0, vocab, size=rng.integers(lo, hi)))

    examples = []
    for _ in range(n):
        seq = ids(state_vocab, 2, 6)
        examples.append(TrainingExample(
            history_ids=ids(text_vocab, 3, 12),
            state_ids=ids(text_vocab, 1, 6),
            decoder_prev_ids=[0] + seq,
            decoder_target_ids=seq + [1],
            gold_intent=int(rng.integers(0, len(cfg.intents))),
            gold_index=int(rng.integers(0, n_candidates)),
            gold_pid="P0",
            cand_pids=[f"P{j}" for j in range(n_candidates)],
            cand_profile_ids=[ids(text_vocab, 2, 10) for _ in range(n_candidates)],
            cand_attr_ids=[ids(attr_vocab, 2, 10) for _ in range(n_candidates)],
        ))
    return params, cfg, examples
