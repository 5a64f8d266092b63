"""Adam training loop with warmup+cosine schedule, plus MCQ evaluation."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, backward
from .errors import BadConfig, DivergedLoss
from .pipeline import ModelBundle, batch_loss, forward_logits
from .decoder import predict
from .rng import RngState, derive_seed
from .synthclips import CATEGORY_ORDER


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 2000
    warmup_steps: int = 200
    batch: int = 32
    lr: float = 3e-4
    min_lr: float = 3e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.95
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 0 or self.warmup_steps < 0 or self.batch < 1:
            raise BadConfig("steps and batch must be non-negative / positive")
        if self.total_steps > 0 and self.warmup_steps >= self.total_steps:
            raise BadConfig(f"warmup {self.warmup_steps} must stay below total {self.total_steps}")
        if self.min_lr > self.lr:
            raise BadConfig(f"min_lr {self.min_lr} above lr {self.lr}")


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup from 0, then cosine decay: lr at warmup_steps, min_lr at
    total_steps, continuous and non-increasing in between."""
    if cfg.total_steps == 0:
        return cfg.min_lr
    if step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    span = max(cfg.total_steps - cfg.warmup_steps, 1)
    progress = min((step - cfg.warmup_steps) / span, 1.0)
    return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + math.cos(math.pi * progress))


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, params, grads, lr: float) -> None:
        self.t += 1
        b1, b2 = self.cfg.adam_beta1, self.cfg.adam_beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in params.items():
            g = grads[p]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            update = (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.cfg.adam_eps)
            p.data -= lr * update


def _batch_arrays(samples):
    pixels = np.stack([s.clip.pixels.data for s in samples])
    questions = np.stack([s.question_ids for s in samples])
    answers = np.array([s.answer_idx for s in samples], dtype=np.int64)
    return pixels, questions, answers


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    evals: list[tuple[int, float]] = field(default_factory=list)
    steps_run: int = 0
    stopped_early: bool = False
    wall_seconds: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def train(bundle: ModelBundle, dataset, cfg: TrainConfig, eval_samples=None,
          eval_every: int | None = None, stop_accuracy: float | None = None) -> TrainResult:
    """Seeded-shuffle minibatch Adam. Raises DivergedLoss with the step index
    if the loss goes non-finite. Optional periodic eval with accuracy-based
    early stop."""
    if not dataset:
        raise BadConfig("empty training dataset")
    optimizer = Adam(bundle.params, cfg)
    order_rng = RngState(derive_seed(cfg.seed, "order"))
    order: list[int] = []
    result = TrainResult()
    start = time.monotonic()
    for step in range(cfg.total_steps):
        if len(order) < cfg.batch:
            order += order_rng.shuffle(list(range(len(dataset))))
        take, order = order[:cfg.batch], order[cfg.batch:]
        pixels, questions, answers = _batch_arrays([dataset[i] for i in take])
        with Tape() as tape:
            loss = batch_loss(bundle, pixels, questions, answers)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergedLoss(f"step {step}: loss {value}")
            grads = backward(tape, loss)
        optimizer.step(bundle.params, grads, lr_at(step, cfg))
        result.losses.append(value)
        result.steps_run = step + 1
        if eval_every and eval_samples is not None and (step + 1) % eval_every == 0:
            acc = evaluate(bundle, eval_samples).accuracy
            result.evals.append((step + 1, acc))
            if stop_accuracy is not None and acc >= stop_accuracy:
                result.stopped_early = True
                break
    result.wall_seconds = time.monotonic() - start
    return result


@dataclass
class EvalResult:
    accuracy: float
    mean_loss: float
    n: int
    per_category: dict[str, float]
    category_counts: dict[str, int]


def evaluate(bundle: ModelBundle, samples, batch_size: int = 64) -> EvalResult:
    """Argmax accuracy with per-category breakdown; accepts any iterable and
    consumes it in chunks, so the sample stream never has to fit in memory."""
    from .autodiff import cross_entropy

    right: dict[str, int] = {}
    seen: dict[str, int] = {}
    loss_sum = 0.0
    total = 0
    chunk = []

    def flush():
        nonlocal loss_sum, total
        pixels, questions, answers = _batch_arrays(chunk)
        logits = forward_logits(bundle, pixels, questions, answers)
        loss_sum += cross_entropy(logits, answers).item() * len(chunk)
        preds = predict(logits)
        for s, p in zip(chunk, preds):
            cat = s.category.value
            seen[cat] = seen.get(cat, 0) + 1
            right[cat] = right.get(cat, 0) + int(p == s.answer_idx)
        total += len(chunk)
        chunk.clear()

    for sample in samples:
        chunk.append(sample)
        if len(chunk) == batch_size:
            flush()
    if chunk:
        flush()
    if total == 0:
        raise BadConfig("evaluate needs at least one sample")
    per_cat = {c: right[c] / seen[c] for c in seen}
    accuracy = sum(right.values()) / total
    ordered = {c.value: per_cat[c.value] for c in CATEGORY_ORDER if c.value in per_cat}
    counts = {c.value: seen[c.value] for c in CATEGORY_ORDER if c.value in seen}
    return EvalResult(accuracy=accuracy, mean_loss=loss_sum / total, n=total,
                      per_category=ordered, category_counts=counts)
