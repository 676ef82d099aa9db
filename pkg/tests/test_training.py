import csv

import numpy as np
import pytest

from cavityfrac.dataset import LabeledSample
from cavityfrac.errors import ValidationError
from cavityfrac.neuralnet import Architecture
from cavityfrac.preprocess import augment_linear
from cavityfrac.rng import rng_from_seed
from cavityfrac.sparams import SParameterRecord
from cavityfrac.training import (FoldPlan, RSquaredUndefinedError, TrainConfig,
                                 compute_metrics, fold_indices, kfold_split,
                                 samples_to_arrays, train_model, write_reports)

SMALL_ARCH = Architecture(input_len=40, conv1_channels=4, conv2_channels=6, hidden=8)


def tiny_samples(n=21, points=40, noise=0.0, seed=0):
    """Labeled records whose response encodes the fraction recoverably."""
    rng = rng_from_seed(seed)
    f = np.linspace(1e9, 5e9, points)
    t = np.linspace(0, 1, points)
    samples = []
    for frac in np.linspace(0, 1, n):
        base = np.exp(-((t - 0.2 - 0.6 * frac) / 0.1) ** 2).astype(complex)
        thru = 0.5 * base + 0.2
        if noise:
            base = base + noise * (rng.standard_normal(points)
                                   + 1j * rng.standard_normal(points))
        rec = SParameterRecord.from_components(f, base, thru, thru, base)
        samples.append(LabeledSample(record=rec, fraction=float(frac),
                                     provenance="synthetic"))
    return samples


class TestKFoldSplit:
    def test_fold_sizes_21_samples(self):
        plan = kfold_split(tiny_samples(21), k=5, seed=0)
        assert sorted(plan.fold_sizes(), reverse=True) == [5, 4, 4, 4, 4]

    def test_deterministic_and_seed_sensitive(self):
        samples = tiny_samples(10)
        a = kfold_split(samples, k=5, seed=1)
        b = kfold_split(samples, k=5, seed=1)
        c = kfold_split(samples, k=5, seed=2)
        assert np.array_equal(a.assignments, b.assignments)
        assert not np.array_equal(a.assignments, c.assignments)

    def test_augmented_never_assigned(self):
        samples = augment_linear(tiny_samples(6), n_intermediate=2)
        plan = kfold_split(samples, k=3, seed=0)
        for i, s in enumerate(samples):
            if s.provenance == "augmented":
                assert plan.assignments[i] == -1
            else:
                assert 0 <= plan.assignments[i] < 3

    def test_every_sample_validated_once(self):
        samples = tiny_samples(13)
        plan = kfold_split(samples, k=5, seed=3)
        seen = np.concatenate([np.nonzero(plan.assignments == f)[0] for f in range(5)])
        assert sorted(seen) == list(range(13))

    def test_k_too_large(self):
        with pytest.raises(ValidationError):
            kfold_split(tiny_samples(3), k=5, seed=0)

    def test_unbalanced_plan_rejected(self):
        with pytest.raises(ValidationError):
            FoldPlan(k=2, assignments=np.array([0, 0, 0, 1]))


class TestFoldIndices:
    def test_partition_without_augmentation(self):
        samples = tiny_samples(10)
        plan = kfold_split(samples, k=5, seed=0)
        for fold in range(5):
            train, val = fold_indices(plan, samples, fold)
            assert len(set(train) & set(val)) == 0
            assert len(train) + len(val) == 10

    def test_leakage_guard_drops_children_of_validation_parents(self):
        samples = augment_linear(tiny_samples(6), n_intermediate=2)
        plan = kfold_split(samples, k=3, seed=0)
        for fold in range(3):
            train, val = fold_indices(plan, samples, fold, allow_leakage=False)
            val_fracs = {samples[i].fraction for i in val}
            for i in train:
                s = samples[i]
                if s.provenance == "augmented":
                    assert not any(p in val_fracs for p in s.parents)

    def test_allow_leakage_keeps_all_augmented(self):
        samples = augment_linear(tiny_samples(6), n_intermediate=2)
        plan = kfold_split(samples, k=3, seed=0)
        n_aug = sum(s.provenance == "augmented" for s in samples)
        train, val = fold_indices(plan, samples, 0, allow_leakage=True)
        kept = sum(samples[i].provenance == "augmented" for i in train)
        assert kept == n_aug
        assert all(samples[i].provenance != "augmented" for i in val)


class TestMetrics:
    def test_matches_sklearn(self):
        sklearn_metrics = pytest.importorskip("sklearn.metrics")
        rng = rng_from_seed(40)
        y = rng.uniform(0, 1, 50)
        p = y + 0.1 * rng.standard_normal(50)
        mse, mae, r2 = compute_metrics(p, y)
        assert mse == pytest.approx(sklearn_metrics.mean_squared_error(y, p))
        assert mae == pytest.approx(sklearn_metrics.mean_absolute_error(y, p))
        assert r2 == pytest.approx(sklearn_metrics.r2_score(y, p))

    def test_perfect_prediction(self):
        mse, mae, r2 = compute_metrics([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        assert (mse, mae, r2) == (0.0, 0.0, 1.0)

    def test_constant_targets_raise(self):
        with pytest.raises(RSquaredUndefinedError) as excinfo:
            compute_metrics([0.4, 0.6], [0.5, 0.5])
        assert excinfo.value.mse == pytest.approx(0.01)
        assert excinfo.value.mae == pytest.approx(0.1)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            compute_metrics([], [])


@pytest.fixture(scope="module")
def trained():
    samples = tiny_samples(21)
    cfg = TrainConfig(epochs=60, k=5, seed=0, lr=1e-2, arch=SMALL_ARCH)
    return samples, cfg, train_model(samples, cfg)


class TestTrainModel:
    def test_learns_the_mapping(self, trained):
        _, _, report = trained
        best = report.folds[report.best_fold]
        assert best.error is None
        assert best.r2 > 0.8
        assert best.mae < 0.15

    def test_curves_have_epoch_length(self, trained):
        _, cfg, report = trained
        for f in report.folds:
            assert len(f.train_loss) == cfg.epochs
            assert len(f.val_loss) == cfg.epochs
        mean = report.mean_curves()
        assert len(mean["val_mae"]) == cfg.epochs

    def test_training_loss_decreases(self, trained):
        _, _, report = trained
        for f in report.folds:
            assert f.train_loss[-1] < f.train_loss[0]

    def test_rerun_is_bit_identical(self, trained):
        samples, cfg, report = trained
        again = train_model(samples, cfg)
        assert again.best_fold == report.best_fold
        for a, b in zip(report.folds, again.folds):
            assert a.val_loss == b.val_loss
            assert a.mse == b.mse
            for name, arr in a.params.blocks().items():
                assert np.array_equal(arr, b.params.blocks()[name])

    def test_write_reports(self, trained, tmp_path):
        _, cfg, report = trained
        write_reports(tmp_path, [("raw", report)])
        with open(tmp_path / "report.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == cfg.k
        assert sum(int(r["best"]) for r in rows) == 1
        assert (tmp_path / "curves_raw_fold0.csv").exists()
        assert (tmp_path / "curves_raw_mean.csv").exists()

    def test_samples_to_arrays_shapes(self, trained):
        samples, cfg, _ = trained
        x, y = samples_to_arrays(samples, cfg.arch)
        assert x.shape == (21, 8, cfg.arch.input_len)
        assert y.shape == (21,)
        assert np.array_equal(y, np.linspace(0, 1, 21))

    def test_bad_config_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(k=1)
        with pytest.raises(ValidationError):
            TrainConfig(epochs=0)
