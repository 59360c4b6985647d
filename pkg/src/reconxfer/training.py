"""Staged models and the source/target training loops.

A staged model is three MLPs glued at the feature layer: a feature stage
(input -> feature layer), an optimization stage (feature layer -> task
output) and, during source training only, a reconstruction stage (feature
layer -> common-information estimate). Source training minimizes

    total = task_loss + alpha * reconstruction_loss

so the feature layer receives gradient from both branches. Target
training reuses the feature stage frozen and fits the optimization stage
on the task loss alone.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, TrainingError
from .utils import derive_seed
from .nn import (
    LINEAR,
    RELU,
    Mlp,
    adam_step,
    backward,
    forward,
    freeze_all,
    init_adam,
    init_mlp,
    parameter_count,
)

METRIC_LOSS = "loss"
METRIC_UTILITY = "utility"


# ---------------------------------------------------------------------------
# data container


@dataclass
class LabeledDataset:
    """Aligned per-sample arrays: network inputs, optional reconstruction
    targets, plus task-specific extras (labels, raw gains, channels, ...)."""

    inputs: np.ndarray
    recon_targets: np.ndarray = None
    extras: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n = len(self.inputs)
        if self.recon_targets is not None and len(self.recon_targets) != n:
            raise ConfigurationError("recon_targets misaligned with inputs")
        for key, arr in self.extras.items():
            if len(arr) != n:
                raise ConfigurationError(f"extras[{key!r}] misaligned with inputs")

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx) -> "LabeledDataset":
        rt = None if self.recon_targets is None else self.recon_targets[idx]
        extras = {k: v[idx] for k, v in self.extras.items()}
        return LabeledDataset(self.inputs[idx], rt, extras, self.name)


class TaskAdapter:
    """Interface between a training loop and a concrete task.

    loss_and_grad returns the mean task loss over the batch and its
    gradient w.r.t. the network outputs (already carrying the 1/batch
    weighting). utility is the task's figure of merit, to be maximized.
    """

    utility_name = "utility"

    def loss_and_grad(self, outputs, batch: LabeledDataset):
        raise NotImplementedError

    def utility(self, outputs, batch: LabeledDataset) -> float:
        raise NotImplementedError

    def loss(self, outputs, batch: LabeledDataset) -> float:
        return self.loss_and_grad(outputs, batch)[0]


# ---------------------------------------------------------------------------
# staged model


@dataclass
class Architecture:
    feature_dims: list
    optimization_dims: list
    reconstruction_dims: list
    output_activation: str = LINEAR

    def __post_init__(self):
        feat = self.feature_dims[-1]
        if self.optimization_dims[0] != feat:
            raise ConfigurationError(
                f"optimization stage expects feature width {feat}, "
                f"got {self.optimization_dims[0]}"
            )
        if self.reconstruction_dims and self.reconstruction_dims[0] != feat:
            raise ConfigurationError(
                f"reconstruction stage expects feature width {feat}, "
                f"got {self.reconstruction_dims[0]}"
            )


@dataclass
class StagedModel:
    feature: Mlp
    optimization: Mlp
    reconstruction: Mlp = None

    def stages(self):
        out = [("feature", self.feature), ("optimization", self.optimization)]
        if self.reconstruction is not None:
            out.append(("reconstruction", self.reconstruction))
        return out

    def stage_parameter_counts(self) -> dict:
        return {name: parameter_count(stage) for name, stage in self.stages()}

    def predict(self, x):
        feats, _ = forward(self.feature, x)
        out, _ = forward(self.optimization, feats)
        return out

    def reconstruct(self, x):
        if self.reconstruction is None:
            raise ConfigurationError("model has no reconstruction stage")
        feats, _ = forward(self.feature, x)
        rec, _ = forward(self.reconstruction, feats)
        return rec

    def copy(self) -> "StagedModel":
        rec = None if self.reconstruction is None else self.reconstruction.copy()
        return StagedModel(self.feature.copy(), self.optimization.copy(), rec)


def _acts(dims, last):
    return [RELU] * (len(dims) - 2) + [last]


def build_staged_model(arch: Architecture, with_reconstruction: bool,
                       seed) -> StagedModel:
    """Fresh stages, each from its own child seed so widths can be changed
    independently without reshuffling the other stages."""
    seeds = np.random.SeedSequence(seed).spawn(3)
    feature = init_mlp(arch.feature_dims, _acts(arch.feature_dims, RELU), seeds[0])
    optimization = init_mlp(arch.optimization_dims,
                            _acts(arch.optimization_dims, arch.output_activation),
                            seeds[1])
    reconstruction = None
    if with_reconstruction:
        if not arch.reconstruction_dims:
            raise ConfigurationError("architecture has no reconstruction dims")
        reconstruction = init_mlp(arch.reconstruction_dims,
                                  _acts(arch.reconstruction_dims, LINEAR), seeds[2])
    return StagedModel(feature, optimization, reconstruction)


def transfer_feature_stage(source: StagedModel, target_arch: Architecture,
                           seed) -> StagedModel:
    """Copy the trained feature stage, freeze it, and pair it with a fresh
    optimization stage for the target task. No reconstruction stage."""
    if source.feature.dims != list(target_arch.feature_dims):
        raise ConfigurationError(
            f"feature stage dims {source.feature.dims} != target arch "
            f"{list(target_arch.feature_dims)}"
        )
    feature = freeze_all(source.feature.copy())
    seeds = np.random.SeedSequence(seed).spawn(3)
    optimization = init_mlp(
        target_arch.optimization_dims,
        _acts(target_arch.optimization_dims, target_arch.output_activation),
        seeds[1],
    )
    return StagedModel(feature, optimization, None)


# ---------------------------------------------------------------------------
# losses


def combined_loss(task_loss: float, recon_loss: float, alpha: float) -> float:
    return task_loss + alpha * recon_loss


def reconstruction_loss(reconstruction, target) -> float:
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if reconstruction.shape != target.shape:
        from .errors import ShapeError

        raise ShapeError(
            f"reconstruction shape {reconstruction.shape} != target {target.shape}"
        )
    diff = reconstruction - target
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# training configuration / report


@dataclass
class TrainConfig:
    alpha: float = 0.0
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 20
    early_stopping: bool = True
    seed: int = 0
    validation_metric: str = METRIC_UTILITY

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.patience > self.max_epochs:
            raise ConfigurationError(
                f"patience {self.patience} exceeds max_epochs {self.max_epochs}"
            )
        if self.validation_metric not in (METRIC_LOSS, METRIC_UTILITY):
            raise ConfigurationError(
                f"validation_metric must be 'loss' or 'utility', "
                f"got {self.validation_metric!r}"
            )


@dataclass
class TrainReport:
    epochs_run: int = 0
    best_epoch: int = -1
    stopped_early: bool = False
    validation_metric: str = METRIC_UTILITY
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_task_loss: list = field(default_factory=list)
    val_task_loss: list = field(default_factory=list)
    train_utility: list = field(default_factory=list)
    val_utility: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    best_params: dict = None
    final_params: dict = None

    def restore_best(self, model: StagedModel) -> None:
        _restore_params(model, self.best_params)

    def restore_final(self, model: StagedModel) -> None:
        _restore_params(model, self.final_params)

    def curves_rows(self):
        for e in range(self.epochs_run):
            yield (e + 1, self.train_loss[e], self.val_loss[e],
                   self.train_utility[e], self.val_utility[e])

    def summary(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "validation_metric": self.validation_metric,
            "best_val_loss": self.val_loss[self.best_epoch - 1],
            "best_val_utility": self.val_utility[self.best_epoch - 1],
            "final_val_loss": self.val_loss[-1],
            "final_val_utility": self.val_utility[-1],
            "total_seconds": float(sum(self.epoch_seconds)),
        }


def _snapshot_params(model: StagedModel) -> dict:
    snap = {}
    for name, stage in model.stages():
        snap[name] = [(layer.weights.copy(), layer.biases.copy())
                      for layer in stage.layers]
    return snap


def _restore_params(model: StagedModel, snap: dict) -> None:
    if snap is None:
        raise ConfigurationError("report carries no parameter snapshot")
    for name, stage in model.stages():
        if name not in snap:
            continue
        for layer, (w, b) in zip(stage.layers, snap[name]):
            layer.weights[...] = w
            layer.biases[...] = b
        stage.version += 1


# ---------------------------------------------------------------------------
# early stopping


class EarlyStopper:
    """Patience counter over a validation metric.

    mode 'min' treats smaller as better (losses), 'max' larger (utilities).
    Improvement must be strict; after `patience` consecutive epochs without
    one, should_stop() turns true.
    """

    def __init__(self, patience: int, mode: str):
        if mode not in ("min", "max"):
            raise ConfigurationError(f"mode must be 'min' or 'max', got {mode!r}")
        self.patience = patience
        self.mode = mode
        self.best = None
        self.best_epoch = -1
        self.wait = 0

    def update(self, epoch: int, metric: float) -> bool:
        if not np.isfinite(metric):
            raise TrainingError(f"non-finite validation metric at epoch {epoch}")
        improved = (
            self.best is None
            or (self.mode == "min" and metric < self.best)
            or (self.mode == "max" and metric > self.best)
        )
        if improved:
            self.best = metric
            self.best_epoch = epoch
            self.wait = 0
        else:
            self.wait += 1
        return improved

    def should_stop(self) -> bool:
        return self.wait >= self.patience


# ---------------------------------------------------------------------------
# evaluation and the epoch loop


def evaluate_model(model: StagedModel, dataset: LabeledDataset,
                   adapter: TaskAdapter, alpha: float = 0.0,
                   chunk: int = 8192) -> dict:
    """Mean task loss / reconstruction loss / utility over a dataset."""
    n = len(dataset)
    task_loss = 0.0
    rec_loss = 0.0
    utility = 0.0
    for start in range(0, n, chunk):
        idx = slice(start, min(start + chunk, n))
        batch = dataset.subset(idx)
        feats, _ = forward(model.feature, batch.inputs)
        out, _ = forward(model.optimization, feats)
        w = len(batch) / n
        task_loss += adapter.loss(out, batch) * w
        utility += adapter.utility(out, batch) * w
        if alpha > 0:
            rec, _ = forward(model.reconstruction, feats)
            rec_loss += reconstruction_loss(rec, batch.recon_targets) * w
    return {
        "task_loss": task_loss,
        "recon_loss": rec_loss,
        "loss": combined_loss(task_loss, rec_loss, alpha),
        "utility": utility,
    }


def _train(model: StagedModel, train: LabeledDataset, val: LabeledDataset,
           adapter: TaskAdapter, cfg: TrainConfig, alpha: float) -> TrainReport:
    n = len(train)
    if n == 0:
        raise ConfigurationError("empty training set")
    if alpha > 0:
        if model.reconstruction is None:
            raise ConfigurationError("alpha > 0 requires a reconstruction stage")
        if train.recon_targets is None or val.recon_targets is None:
            raise ConfigurationError(
                "alpha > 0 requires common-information targets in both splits"
            )
        if model.reconstruction.out_dim != train.recon_targets.shape[1]:
            raise ConfigurationError(
                f"reconstruction stage width {model.reconstruction.out_dim} != "
                f"target width {train.recon_targets.shape[1]}"
            )

    states = {name: init_adam(stage, lr=cfg.lr) for name, stage in model.stages()}
    feature_trainable = not model.feature.frozen.all()
    rng = np.random.default_rng(derive_seed(cfg.seed, "shuffle"))
    report = TrainReport(validation_metric=cfg.validation_metric)
    stopper = EarlyStopper(cfg.patience,
                           "min" if cfg.validation_metric == METRIC_LOSS else "max")

    batch_size = min(cfg.batch_size, n)
    for epoch in range(1, cfg.max_epochs + 1):
        tic = time.perf_counter()
        perm = rng.permutation(n)
        ep_loss = ep_task = ep_util = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            batch = train.subset(idx)
            feats, tape_f = forward(model.feature, batch.inputs)
            out, tape_o = forward(model.optimization, feats)
            task_loss, dout = adapter.loss_and_grad(out, batch)
            grads_o = backward(model.optimization, tape_o, dout)
            dfeats = grads_o.input_grad
            rec_loss = 0.0
            if alpha > 0:
                rec, tape_r = forward(model.reconstruction, feats)
                diff = rec - batch.recon_targets
                rec_loss = float(np.mean(diff * diff))
                grads_r = backward(model.reconstruction, tape_r,
                                   2.0 * diff / diff.size)
                dfeats = dfeats + alpha * grads_r.input_grad
                adam_step(model.reconstruction, grads_r, states["reconstruction"])
            total = combined_loss(task_loss, rec_loss, alpha)
            if not np.isfinite(total):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            adam_step(model.optimization, grads_o, states["optimization"])
            if feature_trainable:
                grads_f = backward(model.feature, tape_f, dfeats)
                adam_step(model.feature, grads_f, states["feature"])
            else:
                model.feature.version += 1  # keep tapes in sync with steps
            w = len(idx) / n
            ep_loss += total * w
            ep_task += task_loss * w
            ep_util += adapter.utility(out, batch) * w

        val_stats = evaluate_model(model, val, adapter, alpha)
        report.train_loss.append(ep_loss)
        report.train_task_loss.append(ep_task)
        report.train_utility.append(ep_util)
        report.val_loss.append(val_stats["loss"])
        report.val_task_loss.append(val_stats["task_loss"])
        report.val_utility.append(val_stats["utility"])
        report.epoch_seconds.append(time.perf_counter() - tic)
        report.epochs_run = epoch

        metric = (val_stats["loss"] if cfg.validation_metric == METRIC_LOSS
                  else val_stats["utility"])
        if stopper.update(epoch, metric):
            report.best_epoch = epoch
            report.best_params = _snapshot_params(model)
        if cfg.early_stopping and stopper.should_stop():
            report.stopped_early = True
            break

    report.final_params = _snapshot_params(model)
    if report.best_params is None:  # pragma: no cover - defensive
        report.best_params = report.final_params
        report.best_epoch = report.epochs_run
    return report


def train_source(model: StagedModel, train: LabeledDataset, val: LabeledDataset,
                 adapter: TaskAdapter, cfg: TrainConfig) -> TrainReport:
    """Source-task training on task loss + alpha * reconstruction loss."""
    if cfg.alpha > 0 and model.reconstruction is None:
        raise ConfigurationError("alpha > 0 but model has no reconstruction stage")
    if cfg.alpha == 0 and model.reconstruction is not None:
        raise ConfigurationError("alpha == 0 source models carry no reconstruction stage")
    return _train(model, train, val, adapter, cfg, cfg.alpha)


def train_target(model: StagedModel, train: LabeledDataset, val: LabeledDataset,
                 adapter: TaskAdapter, cfg: TrainConfig) -> TrainReport:
    """Target-task training on the task loss alone; frozen layers (the
    transferred feature stage) are left untouched by the optimizer."""
    return _train(model, train, val, adapter, cfg, alpha=0.0)
