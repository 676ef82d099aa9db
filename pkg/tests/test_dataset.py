import numpy as np
import pytest

from cavityfrac.dataset import (MANIFEST_NAME, LabeledSample, load_dataset,
                                save_dataset)
from cavityfrac.errors import ValidationError
from cavityfrac.rng import rng_from_seed

from conftest import random_record


class TestLabeledSample:
    def test_valid_sample(self):
        s = LabeledSample(record=random_record(rng_from_seed(0)), fraction=0.5,
                          seed=12)
        assert s.provenance == "synthetic"
        assert s.parents is None

    def test_fraction_out_of_range(self):
        with pytest.raises(ValidationError):
            LabeledSample(record=random_record(rng_from_seed(0)), fraction=1.5)

    def test_unknown_provenance(self):
        with pytest.raises(ValidationError):
            LabeledSample(record=random_record(rng_from_seed(0)), fraction=0.5,
                          provenance="guessed")

    def test_augmented_requires_parents(self):
        with pytest.raises(ValidationError):
            LabeledSample(record=random_record(rng_from_seed(0)), fraction=0.5,
                          provenance="augmented")


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        rng = rng_from_seed(1)
        samples = [
            LabeledSample(record=random_record(rng), fraction=0.0, seed=5),
            LabeledSample(record=random_record(rng), fraction=0.25,
                          provenance="augmented", parents=(0.0, 0.5)),
            LabeledSample(record=random_record(rng), fraction=0.5,
                          provenance="measured"),
        ]
        save_dataset(samples, tmp_path)
        loaded = load_dataset(tmp_path)
        assert len(loaded) == 3
        for got, want in zip(loaded, samples):
            assert got.fraction == pytest.approx(want.fraction)
            assert got.provenance == want.provenance
            assert got.parents == want.parents
            assert got.seed == want.seed
            assert np.allclose(got.record.s, want.record.s, atol=1e-9)
            assert np.allclose(got.record.frequencies, want.record.frequencies)

    def test_files_on_disk(self, tmp_path):
        samples = [LabeledSample(record=random_record(rng_from_seed(2)), fraction=0.1)]
        save_dataset(samples, tmp_path)
        assert (tmp_path / "sample_0000.s2p").exists()
        assert (tmp_path / MANIFEST_NAME).exists()

    def test_empty_dataset_refused(self, tmp_path):
        with pytest.raises(ValidationError):
            save_dataset([], tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ValidationError):
            load_dataset(tmp_path)

    def test_bad_manifest_columns(self, tmp_path):
        (tmp_path / MANIFEST_NAME).write_text("filename,label\nx.s2p,0.5\n")
        with pytest.raises(ValidationError):
            load_dataset(tmp_path)
