"""Preprocessing ladder: fixture embedding/de-embedding, linear-interpolation
data augmentation, and Savitzky-Golay filtering with automatic parameter
selection.

Scenario names (see SCENARIOS) follow the six-dataset study: raw data,
optionally de-embedded, optionally augmented, optionally filtered.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dataset import LabeledSample
from .errors import ConditioningError, ConfigError, ValidationError
from .rng import rng_from_seed
from .sparams import SParameterRecord, record_to_tmatrices, tmatrices_to_s

SCENARIOS = ("raw", "raw_aug", "raw_aug_filt", "deemb", "deemb_aug", "deemb_aug_filt")

_DET_TOL = 1e-15


@dataclass(frozen=True)
class FixturePair:
    """Left/right two-port fixtures bracketing the device under test."""

    left: SParameterRecord
    right: SParameterRecord

    def __post_init__(self):
        if not np.allclose(self.left.frequencies, self.right.frequencies):
            raise ValidationError("fixture halves are on different frequency grids")
        for name, rec in (("left", self.left), ("right", self.right)):
            if np.any(rec.s[:, 1, 0] == 0):
                raise ValidationError(f"{name} fixture has s21 = 0 somewhere; "
                                      "not T-convertible")


def _check_grid(a: SParameterRecord, b: SParameterRecord):
    if len(a) != len(b) or not np.allclose(a.frequencies, b.frequencies):
        raise ValidationError("frequency grids do not match")


def embed_fixture(dut: SParameterRecord, fx: FixturePair) -> SParameterRecord:
    """Cascade left fixture, DUT and right fixture: T_meas = T_L T_dut T_R."""
    _check_grid(dut, fx.left)
    t = record_to_tmatrices(fx.left) @ record_to_tmatrices(dut) @ record_to_tmatrices(fx.right)
    return SParameterRecord(frequencies=dut.frequencies, s=tmatrices_to_s(t),
                            metadata=dut.metadata)


def fixture_conditioning(fx: FixturePair) -> dict:
    """Diagnostics for de-embedding stability: min |s21| and worst condition number."""
    out = {}
    for name, rec in (("left", fx.left), ("right", fx.right)):
        t = record_to_tmatrices(rec)
        out[f"min_abs_s21_{name}"] = float(np.min(np.abs(rec.s[:, 1, 0])))
        out[f"max_cond_{name}"] = float(np.max(np.linalg.cond(t)))
    return out


def deembed(measured: SParameterRecord, fx: FixturePair) -> SParameterRecord:
    """Remove fixture halves: T_dut = T_L^-1 T_meas T_R^-1."""
    _check_grid(measured, fx.left)
    tl = record_to_tmatrices(fx.left)
    tr = record_to_tmatrices(fx.right)
    for name, t in (("left", tl), ("right", tr)):
        det = np.abs(np.linalg.det(t))
        if np.any(det < _DET_TOL):
            idx = int(np.argmax(det < _DET_TOL))
            raise ConditioningError(
                f"{name} fixture T-matrix numerically singular at frequency index {idx} "
                f"(|det| = {det[idx]:.3e})")
    t = np.linalg.inv(tl) @ record_to_tmatrices(measured) @ np.linalg.inv(tr)
    return SParameterRecord(frequencies=measured.frequencies, s=tmatrices_to_s(t),
                            metadata=measured.metadata)


def synth_fixture_pair(frequencies, seed: int = 0) -> FixturePair:
    """Synthesize a mildly lossy, well-conditioned fixture pair.

    Each half is a reciprocal two-port with |s21| around 0.8, a linear
    phase slope and a small reflection, emulating a connector/feed run.
    """
    f = np.asarray(frequencies, dtype=float)
    rng = rng_from_seed(seed)
    halves = []
    for _ in range(2):
        amp = rng.uniform(0.7, 0.9)
        delay = rng.uniform(0.05e-9, 0.15e-9)  # seconds of through delay
        refl = rng.uniform(0.02, 0.06)
        phase = -2 * np.pi * f * delay
        s21 = amp * np.exp(1j * phase)
        s11 = refl * np.exp(1j * (phase / 2))
        halves.append(SParameterRecord.from_components(f, s11, s21, s21, s11,
                                                       metadata="synthetic fixture"))
    return FixturePair(left=halves[0], right=halves[1])


def augment_linear(samples: list, n_intermediate: int = 4) -> list:
    """Insert linearly interpolated samples between adjacent fractions.

    For each adjacent pair the S-parameters are interpolated entrywise at
    n_intermediate evenly spaced intermediate fractions. Originals pass
    through unchanged; new samples carry provenance "augmented" with their
    parent fractions.
    """
    if len(samples) < 2:
        raise ValidationError("need at least 2 samples to augment")
    if n_intermediate < 1:
        raise ValidationError("n_intermediate must be >= 1")
    fracs = [s.fraction for s in samples]
    if any(b < a for a, b in zip(fracs, fracs[1:])):
        raise ValidationError("samples must be sorted by fraction")
    for s in samples[1:]:
        _check_grid(samples[0].record, s.record)

    out = []
    for lo, hi in zip(samples, samples[1:]):
        out.append(lo)
        for k in range(1, n_intermediate + 1):
            t = k / (n_intermediate + 1)
            s = (1 - t) * lo.record.s + t * hi.record.s
            rec = SParameterRecord(frequencies=lo.record.frequencies, s=s,
                                   metadata="augmented")
            out.append(LabeledSample(record=rec,
                                     fraction=(1 - t) * lo.fraction + t * hi.fraction,
                                     provenance="augmented",
                                     parents=(lo.fraction, hi.fraction)))
    out.append(samples[-1])
    return out


@dataclass(frozen=True)
class SavGolParams:
    window: int
    order: int

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValidationError(f"window must be odd and >= 3, got {self.window}")
        if not 0 <= self.order < self.window:
            raise ValidationError(f"order must satisfy 0 <= order < window, got {self.order}")


DEFAULT_SAVGOL_CANDIDATES = tuple(SavGolParams(w, o)
                                  for w in (5, 7, 9, 11, 15, 21) for o in (2, 3, 4))


def savgol_coefficients(p: SavGolParams) -> np.ndarray:
    """Center-point smoothing kernel from a least-squares polynomial fit.

    The kernel reproduces polynomials up to the given order exactly and
    sums to 1.
    """
    half = p.window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    design = np.vander(offsets, p.order + 1, increasing=True)
    # row of the hat matrix for the window center
    kernel = design @ np.linalg.pinv(design)
    return kernel[half]


def _loo_kernel(p: SavGolParams) -> np.ndarray:
    """Predictor for the window center from the other window points."""
    half = p.window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    keep = np.ones(p.window, dtype=bool)
    keep[half] = False
    design = np.vander(offsets[keep], p.order + 1, increasing=True)
    weights = np.linalg.pinv(design)[0]  # evaluate fitted polynomial at offset 0
    kernel = np.zeros(p.window)
    kernel[keep] = weights
    return kernel


def _apply_kernel(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    half = kernel.size // 2
    padded = np.pad(values, half, mode="reflect")
    return np.convolve(padded, kernel[::-1], mode="valid")


def savgol_filter(record: SParameterRecord, p: SavGolParams) -> SParameterRecord:
    """Smooth Re and Im of every S-entry with the kernel; mirror-padded edges."""
    if p.window > len(record):
        raise ValidationError(f"window {p.window} exceeds record length {len(record)}")
    kernel = savgol_coefficients(p)
    out = np.empty_like(record.s)
    for i in range(2):
        for j in range(2):
            out[:, i, j] = (_apply_kernel(record.s[:, i, j].real, kernel)
                            + 1j * _apply_kernel(record.s[:, i, j].imag, kernel))
    return SParameterRecord(frequencies=record.frequencies, s=out, metadata=record.metadata)


def _loo_score(record: SParameterRecord, p: SavGolParams) -> float:
    """Leave-one-out squared-error proxy over all interior points and channels."""
    kernel = _loo_kernel(p)
    half = p.window // 2
    total = 0.0
    for i in range(2):
        for j in range(2):
            for part in (record.s[:, i, j].real, record.s[:, i, j].imag):
                pred = np.convolve(part, kernel[::-1], mode="valid")
                total += float(np.sum((pred - part[half:len(part) - half]) ** 2))
    return total


def savgol_optimize(noisy: SParameterRecord, candidates=DEFAULT_SAVGOL_CANDIDATES) -> SavGolParams:
    """Pick the candidate minimizing the leave-one-out MSE proxy.

    Ties go to the smaller window, then the smaller order.
    """
    return savgol_optimize_dataset([noisy], candidates)


def savgol_optimize_dataset(records: list, candidates=DEFAULT_SAVGOL_CANDIDATES) -> SavGolParams:
    """savgol_optimize with the score accumulated over several records."""
    if not candidates:
        raise ValidationError("empty candidate list")
    if not records:
        raise ValidationError("no records to score")
    best, best_score = None, np.inf
    for p in sorted(candidates, key=lambda c: (c.window, c.order)):
        if p.window > min(len(r) for r in records):
            continue
        score = sum(_loo_score(r, p) for r in records)
        if score < best_score:
            best, best_score = p, score
    if best is None:
        raise ValidationError("no candidate window fits the records")
    return best


def apply_scenario(samples: list, scenario: str, fixtures: FixturePair | None = None,
                   n_intermediate: int = 4,
                   candidates=DEFAULT_SAVGOL_CANDIDATES) -> list:
    """Build one of the six study datasets from raw (fixture-embedded) samples."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario '{scenario}'; expected one of {SCENARIOS}")
    out = list(samples)
    if scenario.startswith("deemb"):
        if fixtures is None:
            raise ConfigError(f"scenario '{scenario}' requires fixture data")
        out = [replace(s, record=deembed(s.record, fixtures)) for s in out]
    if "_aug" in scenario:
        out = augment_linear(sorted(out, key=lambda s: s.fraction), n_intermediate)
    if scenario.endswith("_filt"):
        params = savgol_optimize_dataset(
            [s.record for s in out if s.provenance != "augmented"], candidates)
        out = [replace(s, record=savgol_filter(s.record, params)) for s in out]
    return out
