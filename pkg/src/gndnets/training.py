"""Training loop, data splits, and the repeated-runs protocol.

A run optimizes the masked cross-entropy plus L2 with Adam, watches the
validation loss every epoch, and keeps the parameter snapshot from the best
validation epoch. Patience counts epochs since the last strict improvement;
when it reaches the window the run stops and the snapshot is restored.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import adam_step
from .errors import (EmptyMask, InsufficientVertices, InvalidParameter,
                     NonFiniteValue)
from .graph import Graph
from .models import GraphOperators, Model, ModelConfig, accuracy, loss_value


@dataclass
class TrainConfig:
    lr: float = 0.005
    l2: float = 5e-4
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0


@dataclass
class SplitSpec:
    labels_per_class: int
    validation_size: int = 500
    seed: int = 0


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class TrainHistory:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    epochs_run: int = 0


class EarlyStopping:
    """Stop after `patience` epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.stale = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record one epoch; returns True when training should stop.

        Equal losses do not count as improvement and do not reset patience.
        """
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def sample_split(g: Graph, spec: SplitSpec) -> Split:
    """Per-class training vertices, a uniform validation sample, and the
    rest as test; only labeled vertices participate.

    Raises InsufficientVertices naming the class that cannot supply
    labels_per_class vertices, or when the validation pool is too small.
    """
    if spec.labels_per_class < 1:
        raise InsufficientVertices("labels_per_class must be at least 1")
    rng = np.random.default_rng(spec.seed)
    n = g.n_vertices
    train = np.zeros(n, dtype=bool)
    for c in range(g.n_classes):
        members = np.flatnonzero(g.labels == c)
        if members.size < spec.labels_per_class:
            raise InsufficientVertices(
                f"class {c} has {members.size} labeled vertices, "
                f"need {spec.labels_per_class}"
            )
        train[rng.choice(members, size=spec.labels_per_class, replace=False)] = True
    pool = np.flatnonzero(~train & (g.labels >= 0))
    if pool.size < spec.validation_size + 1:
        raise InsufficientVertices(
            f"need {spec.validation_size} validation vertices plus at least one "
            f"test vertex, have {pool.size} labeled non-train vertices"
        )
    val = np.zeros(n, dtype=bool)
    val[rng.choice(pool, size=spec.validation_size, replace=False)] = True
    test = ~train & ~val & (g.labels >= 0)
    assert not np.any(train & val) and not np.any(train & test) and not np.any(val & test)
    return Split(train=train, val=val, test=test)


def train(model: Model, g: Graph, split: Split, config: TrainConfig,
          rng: np.random.Generator | None = None,
          ops: GraphOperators | None = None) -> TrainHistory:
    """Optimize the model in place; afterwards it holds the parameters of
    the best validation epoch (or the last epoch when the validation mask
    is empty, in which case early stopping is disabled)."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if ops is None:
        ops = GraphOperators.prepare(g, model.config)
    use_validation = bool(np.any(split.val))
    stopper = EarlyStopping(config.patience)
    history = TrainHistory()
    snapshot = None
    for epoch in range(1, config.max_epochs + 1):
        try:
            fp = model.forward(ops, training=True, rng=rng)
            loss = fp.loss_node(ops.labels, split.train, config.l2)
            fp.tape.backward(loss)
        except NonFiniteValue as err:
            raise NonFiniteValue(f"epoch {epoch}: {err}") from err
        for _, p in model.parameters():
            adam_step(p, config.lr)  # the loss already carries the L2 term
        history.train_losses.append(float(loss.value[0, 0]))
        history.epochs_run = epoch
        if not use_validation:
            continue
        probs = model.forward(ops, training=False).probabilities
        val_loss = loss_value(probs, ops.labels, split.val, config.l2, model)
        history.val_losses.append(val_loss)
        if val_loss < stopper.best:
            snapshot = [(name, p.value.copy()) for name, p in model.parameters()]
        if stopper.update(val_loss, epoch):
            break
    if use_validation and snapshot is not None:
        for (_, saved), (_, p) in zip(snapshot, model.parameters()):
            p.value = saved
        history.best_epoch = stopper.best_epoch
        history.best_val_loss = stopper.best
    else:
        history.best_epoch = history.epochs_run
    return history


def evaluate(model: Model, g: Graph, mask, ops: GraphOperators | None = None) -> float:
    """Accuracy of the model's predictions over the masked vertices."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("evaluation mask selects no vertices")
    if ops is None:
        ops = GraphOperators.prepare(g, model.config)
    return accuracy(model.predict_proba(ops), g.labels, mask)


@dataclass
class ExperimentResult:
    variant: str
    labels_per_class: int
    runs: int
    accuracies: list
    epochs: list
    mean: float
    std: float
    wall_time: float
    learned_alpha_abs_mean: list | None = None

    def to_json_dict(self, include_timing=False):
        out = {
            "variant": self.variant,
            "labels_per_class": self.labels_per_class,
            "runs": self.runs,
            "accuracies": self.accuracies,
            "epochs": self.epochs,
            "mean": self.mean,
            "std": self.std,
        }
        if self.learned_alpha_abs_mean is not None:
            out["learned_alpha_abs_mean"] = self.learned_alpha_abs_mean
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def run_experiment(g: Graph, model_config: ModelConfig, train_config: TrainConfig,
                   split_spec: SplitSpec, runs: int, n_threads: int = 1) -> ExperimentResult:
    """Repeat split/init/train/evaluate `runs` times and aggregate.

    Run i draws its split from split_spec.seed + i and its initialization
    and dropout stream from train_config.seed + i, so results do not depend
    on n_threads or on execution order.
    """
    if runs < 1:
        raise InvalidParameter("need at least one run")
    ops = GraphOperators.prepare(g, model_config)
    started = time.perf_counter()

    def one_run(i: int):
        split = sample_split(g, replace(split_spec, seed=split_spec.seed + i))
        rng = np.random.default_rng(train_config.seed + i)
        model = Model(model_config, g.n_features, g.n_classes, rng)
        history = train(model, g, split, replace(train_config, seed=train_config.seed + i),
                        rng=rng, ops=ops)
        acc = evaluate(model, g, split.test, ops=ops)
        alpha = np.abs(model.slp.alpha.value[0]).tolist() if model.slp is not None else None
        return acc, history.epochs_run, alpha

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            outcomes = list(pool.map(one_run, range(runs)))
    else:
        outcomes = [one_run(i) for i in range(runs)]

    accuracies = [o[0] for o in outcomes]
    epochs = [o[1] for o in outcomes]
    alphas = [o[2] for o in outcomes if o[2] is not None]
    mean = float(np.mean(accuracies))
    std = 0.0 if runs == 1 else float(np.std(accuracies, ddof=1))
    alpha_mean = np.mean(alphas, axis=0).tolist() if alphas else None
    return ExperimentResult(
        variant=model_config.variant,
        labels_per_class=split_spec.labels_per_class,
        runs=runs,
        accuracies=accuracies,
        epochs=epochs,
        mean=mean,
        std=std,
        wall_time=time.perf_counter() - started,
        learned_alpha_abs_mean=alpha_mean,
    )
