"""Training loop: decoupled-weight-decay Adam, plateau-halving schedule,
stop after three straight validation drops."""

from __future__ import annotations

import dataclasses
import logging
import random
from dataclasses import dataclass, field

import numpy as np

from .core import ModelConfig, forward_backward, zero_grads

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


class AdamW(object):
    """AdamW from its published update equations.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta
    """

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for key, g in grads.items():
            self.m[key] = self.b1 * self.m[key] + (1 - self.b1) * g
            self.v[key] = self.b2 * self.v[key] + (1 - self.b2) * g * g
            mhat = self.m[key] / bc1
            vhat = self.v[key] / bc2
            params[key] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            if self.weight_decay:
                params[key] -= self.lr * self.weight_decay * params[key]


class PlateauScheduler:
    """Halve the learning rate on every validation-loss increase; signal a
    stop after three consecutive increases."""

    def __init__(self, lr: float, factor: float = 0.5, patience_stops: int = 3):
        self.lr = lr
        self.factor = factor
        self.patience_stops = patience_stops
        self.consecutive_drops = 0
        self.previous: float | None = None
        self.lr_trace = [lr]

    def update(self, val_loss: float) -> tuple[float, bool]:
        """Feed one validation loss; returns (current lr, should_stop)."""
        if self.previous is not None and val_loss > self.previous:
            self.consecutive_drops += 1
            self.lr *= self.factor
            self.lr_trace.append(self.lr)
        else:
            self.consecutive_drops = 0
        self.previous = val_loss
        return self.lr, self.consecutive_drops >= self.patience_stops


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 16
    weight_decay: float = 0.0
    max_epochs: int = 30
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    seed: int = 0
    eval_every: int = 1
    # probability of zeroing a training example's candidate profile bags
    # (modality dropout): keeps the hybrid mode's attribute pathway as strong
    # as an attr-only model instead of co-adapting onto noisy profile text
    text_dropout: float = 0.0


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    stopped_epoch: int | None = None
    skipped_search: int = 0


def _mean_val_loss(examples, params, cfg, tc):
    total = 0.0
    for ex in examples:
        loss, _, _ = forward_backward(ex, params, cfg, tc.alpha, tc.beta, tc.gamma,
                                      compute_grads=False)
        total += loss
    return total / max(len(examples), 1)


def train(train_examples, val_examples, params, cfg: ModelConfig,
          tc: TrainConfig | None = None) -> TrainHistory:
    """In-place AdamW training with the plateau schedule. Gradients of a
    batch are summed in a fixed order so runs are reproducible."""
    if not train_examples or not val_examples:
        raise ValueError("need non-empty train and validation splits")
    tc = tc or TrainConfig()
    rng = random.Random(tc.seed)
    opt = AdamW(params, lr=tc.lr, weight_decay=tc.weight_decay)
    sched = PlateauScheduler(tc.lr)
    hist = TrainHistory()

    order = list(range(len(train_examples)))
    for epoch in range(tc.max_epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), tc.batch_size):
            batch = [train_examples[i] for i in order[start : start + tc.batch_size]]
            grads_sum = zero_grads(params)
            batch_loss = 0.0
            for ex in batch:
                if tc.text_dropout > 0.0 and rng.random() < tc.text_dropout:
                    ex = dataclasses.replace(
                        ex, cand_profile_ids=[[] for _ in ex.cand_pids])
                loss, grads, aux = forward_backward(ex, params, cfg,
                                                    tc.alpha, tc.beta, tc.gamma)
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}: components {aux}")
                batch_loss += loss
                hist.skipped_search += aux["skipped_search"]
                for k in grads_sum:
                    grads_sum[k] += grads[k]
            scale = 1.0 / len(batch)
            for k in grads_sum:
                grads_sum[k] *= scale
            opt.lr = sched.lr
            opt.step(params, grads_sum)
            epoch_loss += batch_loss
        hist.train_loss.append(epoch_loss / len(order))

        val = _mean_val_loss(val_examples, params, cfg, tc)
        hist.val_loss.append(val)
        lr, stop = sched.update(val)
        hist.lr.append(lr)
        log.info("epoch %d train %.4f val %.4f lr %.2e", epoch, hist.train_loss[-1], val, lr)
        if stop:
            hist.stopped_epoch = epoch
            break
    return hist
