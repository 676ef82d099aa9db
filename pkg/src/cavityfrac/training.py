"""k-fold cross-validation driver, regression metrics and the six-scenario
preprocessing study."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError, ValidationError
from .neuralnet import (AdamState, Architecture, ModelParams, adam_step, backward_batch,
                        forward_batch, init_params, mse_loss, predict_batch)
from .preprocess import SCENARIOS, FixturePair, apply_scenario
from .rng import rng_from_seed
from .sparams import to_feature_tensor


class RSquaredUndefinedError(ValidationError):
    """Targets have zero variance; MSE/MAE are still available."""

    def __init__(self, mse, mae):
        super().__init__("R^2 undefined: targets have zero variance "
                         f"(mse={mse:.6g}, mae={mae:.6g})")
        self.mse = mse
        self.mae = mae


@dataclass(frozen=True)
class FoldPlan:
    """Validation-fold index per sample; -1 marks never-validate (augmented)."""

    k: int
    assignments: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        object.__setattr__(self, "assignments", a)
        sizes = [np.count_nonzero(a == f) for f in range(self.k)]
        if max(sizes) - min(sizes) > 1:
            raise ValidationError(f"fold sizes {sizes} differ by more than 1")

    def fold_sizes(self):
        return [int(np.count_nonzero(self.assignments == f)) for f in range(self.k)]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    k: int = 5
    seed: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 16
    full_batch_threshold: int = 32
    allow_leakage: bool = False
    arch: Architecture = field(default_factory=Architecture)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass
class FoldResult:
    fold: int
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_mae: list = field(default_factory=list)
    val_mae: list = field(default_factory=list)
    mse: float | None = None
    mae: float | None = None
    r2: float | None = None
    error: str | None = None
    params: ModelParams | None = None


@dataclass
class TrainingReport:
    scenario: str
    epochs: int
    folds: list
    best_fold: int | None

    def mean_curves(self) -> dict:
        """Per-epoch curves averaged over the folds that completed."""
        ok = [f for f in self.folds if f.error is None]
        if not ok:
            raise ValidationError("no completed folds to average")
        return {key: np.mean([getattr(f, key) for f in ok], axis=0)
                for key in ("train_loss", "val_loss", "train_mae", "val_mae")}


def kfold_split(samples: list, k: int, seed: int) -> FoldPlan:
    """Shuffle non-augmented samples and deal them round-robin into k folds.

    Augmented samples are never assigned a validation fold.
    """
    eligible = [i for i, s in enumerate(samples) if s.provenance != "augmented"]
    if len(eligible) < k:
        raise ValidationError(f"k={k} exceeds the {len(eligible)} non-augmented samples")
    order = rng_from_seed(seed).permutation(len(eligible))
    assignments = np.full(len(samples), -1, dtype=int)
    for pos, j in enumerate(order):
        assignments[eligible[j]] = pos % k
    return FoldPlan(k=k, assignments=assignments)


def fold_indices(plan: FoldPlan, samples: list, fold: int, allow_leakage: bool = False):
    """(train_idx, val_idx) for one fold.

    Unless allow_leakage is set, augmented samples with a parent fraction in
    the validation fold are dropped from the training side as well.
    """
    val = np.nonzero(plan.assignments == fold)[0]
    val_fracs = {samples[i].fraction for i in val}
    train = []
    for i in np.nonzero(plan.assignments != fold)[0]:
        s = samples[i]
        if s.provenance == "augmented" and not allow_leakage:
            if any(any(abs(pf - vf) < 1e-12 for vf in val_fracs) for pf in s.parents):
                continue
        train.append(i)
    return np.array(train, dtype=int), val


def compute_metrics(pred, target) -> tuple:
    """(MSE, MAE, R^2) of predictions against targets."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.size == 0:
        raise ValidationError("pred/target must have equal nonzero lengths")
    mse = float(np.mean((pred - target) ** 2))
    mae = float(np.mean(np.abs(pred - target)))
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    if ss_tot == 0.0:
        raise RSquaredUndefinedError(mse, mae)
    r2 = 1.0 - float(np.sum((target - pred) ** 2)) / ss_tot
    return mse, mae, r2


def _epoch_batches(n: int, cfg: TrainConfig, rng: np.random.Generator):
    if n <= cfg.full_batch_threshold:
        return [np.arange(n)]
    order = rng.permutation(n)
    return [order[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]


def _train_fold(x_train, y_train, x_val, y_val, cfg: TrainConfig, fold: int) -> FoldResult:
    result = FoldResult(fold=fold)
    params = init_params(cfg.seed + fold, cfg.arch)
    state = AdamState.for_params(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                                 eps=cfg.adam_eps)
    batch_rng = rng_from_seed(cfg.seed + fold + 0x5EED)
    for _ in range(cfg.epochs):
        for batch in _epoch_batches(len(y_train), cfg, batch_rng):
            pred, cache = forward_batch(x_train[batch], params)
            _, d_pred = mse_loss(pred, y_train[batch])
            grads = backward_batch(cache, params, d_pred)
            params, state = adam_step(params, grads, state)
        train_pred = predict_batch(params, x_train)
        val_pred = predict_batch(params, x_val)
        result.train_loss.append(float(np.mean((train_pred - y_train) ** 2)))
        result.val_loss.append(float(np.mean((val_pred - y_val) ** 2)))
        result.train_mae.append(float(np.mean(np.abs(train_pred - y_train))))
        result.val_mae.append(float(np.mean(np.abs(val_pred - y_val))))
    val_pred = predict_batch(params, x_val)
    result.mse, result.mae, result.r2 = compute_metrics(val_pred, y_val)
    result.params = params
    return result


def samples_to_arrays(samples: list, arch: Architecture) -> tuple:
    x = np.stack([to_feature_tensor(s.record, arch.input_len).values for s in samples])
    y = np.array([s.fraction for s in samples])
    return x, y


def train_model(samples: list, cfg: TrainConfig, scenario: str = "raw") -> TrainingReport:
    """Run k-fold cross-validated training and collect curves and metrics.

    A numeric failure aborts only its own fold; the fold is reported with
    its error message and excluded from best-fold selection.
    """
    plan = kfold_split(samples, cfg.k, cfg.seed)
    x, y = samples_to_arrays(samples, cfg.arch)
    folds = []
    for fold in range(cfg.k):
        train_idx, val_idx = fold_indices(plan, samples, fold, cfg.allow_leakage)
        try:
            folds.append(_train_fold(x[train_idx], y[train_idx], x[val_idx], y[val_idx],
                                     cfg, fold))
        except (NumericError, RSquaredUndefinedError, FloatingPointError) as exc:
            folds.append(FoldResult(fold=fold, error=str(exc)))
    ok = [f for f in folds if f.error is None]
    best = min(ok, key=lambda f: f.mse).fold if ok else None
    return TrainingReport(scenario=scenario, epochs=cfg.epochs, folds=folds, best_fold=best)


def run_scenarios(measured: list, fixtures: FixturePair | None, cfg: TrainConfig,
                  scenarios=SCENARIOS) -> list:
    """Train on each preprocessing scenario; returns [(name, report), ...]."""
    out = []
    for name in scenarios:
        data = apply_scenario(measured, name, fixtures)
        out.append((name, train_model(data, cfg, scenario=name)))
    return out


def write_reports(out_dir, reports: list) -> None:
    """Emit report.csv plus per-fold and fold-averaged curve CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "fold", "mse", "mae", "r2", "best", "error"])
        for name, report in reports:
            for f in report.folds:
                if f.error is not None:
                    w.writerow([name, f.fold, "", "", "", "", f.error])
                else:
                    w.writerow([name, f.fold, f"{f.mse:.8e}", f"{f.mae:.8e}",
                                f"{f.r2:.8f}", int(f.fold == report.best_fold), ""])
    for name, report in reports:
        for f in report.folds:
            if f.error is not None:
                continue
            with open(out / f"curves_{name}_fold{f.fold}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["epoch", "train_loss", "val_loss", "train_mae", "val_mae"])
                for e in range(report.epochs):
                    w.writerow([e, f"{f.train_loss[e]:.8e}", f"{f.val_loss[e]:.8e}",
                                f"{f.train_mae[e]:.8e}", f"{f.val_mae[e]:.8e}"])
        mean = report.mean_curves()
        with open(out / f"curves_{name}_mean.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "train_mae", "val_mae"])
            for e in range(report.epochs):
                w.writerow([e] + [f"{mean[key][e]:.8e}"
                                  for key in ("train_loss", "val_loss",
                                              "train_mae", "val_mae")])
