"""Labeled sample container and on-disk dataset layout.

A dataset is a directory of Touchstone `.s2p` files plus a `manifest.csv`
with columns `filename,fraction,provenance,parent_lo,parent_hi,seed`.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .sparams import SParameterRecord, parse_touchstone, write_touchstone

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ["filename", "fraction", "provenance", "parent_lo", "parent_hi", "seed"]

PROVENANCES = ("synthetic", "measured", "augmented")


@dataclass(frozen=True)
class LabeledSample:
    """One S-parameter sweep with its ground-truth inclusion fraction."""

    record: SParameterRecord
    fraction: float
    provenance: str = "synthetic"
    parents: tuple | None = None  # (fraction_lo, fraction_hi) for augmented samples
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance '{self.provenance}'")
        if self.provenance == "augmented" and self.parents is None:
            raise ValidationError("augmented samples must record their parent fractions")


def save_dataset(samples: list, out_dir) -> None:
    """Write one `.s2p` file per sample plus the manifest."""
    if not samples:
        raise ValidationError("refusing to write an empty dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, sample in enumerate(samples):
        name = f"sample_{i:04d}.s2p"
        (out / name).write_text(write_touchstone(sample.record), newline="\n")
        lo, hi = sample.parents if sample.parents is not None else ("", "")
        rows.append([name, f"{sample.fraction:.12g}", sample.provenance,
                     lo if lo == "" else f"{lo:.12g}",
                     hi if hi == "" else f"{hi:.12g}",
                     "" if sample.seed is None else str(sample.seed)])
    with open(out / MANIFEST_NAME, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)


def load_dataset(in_dir) -> list:
    """Load a dataset directory written by save_dataset."""
    root = Path(in_dir)
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        raise ValidationError(f"no {MANIFEST_NAME} in {root}")
    samples = []
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise ValidationError(f"unexpected manifest columns {reader.fieldnames}")
        for row in reader:
            record = parse_touchstone((root / row["filename"]).read_text())
            parents = None
            if row["parent_lo"] != "" and row["parent_hi"] != "":
                parents = (float(row["parent_lo"]), float(row["parent_hi"]))
            seed = int(row["seed"]) if row["seed"] != "" else None
            samples.append(LabeledSample(record=record, fraction=float(row["fraction"]),
                                         provenance=row["provenance"], parents=parents,
                                         seed=seed))
    if not samples:
        raise ValidationError(f"empty manifest in {root}")
    return samples
