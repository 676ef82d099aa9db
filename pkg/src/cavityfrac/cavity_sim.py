"""Synthetic cavity-sensor forward model.

A rectangular cavity filled with the effective medium shifts its TE-mode
resonances with the mixture fraction; each mode is rendered as a Lorentzian
transmission resonance. Optional complex Gaussian noise and fixture
embedding turn the clean response into a measured-looking sweep.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledSample
from .errors import ValidationError
from .mixture import DEFAULT_EPS_HOST, DEFAULT_EPS_INCL, MixtureSpec, bruggeman_eff
from .preprocess import FixturePair, embed_fixture
from .rng import rng_from_seed, sample_seed
from .sparams import FMAX_HZ, FMIN_HZ, N_POINTS, SParameterRecord

C0 = 299792458.0  # vacuum speed of light, m/s


@dataclass(frozen=True)
class CavityGeometry:
    """Rectangular cavity outer dimensions in meters (width, height, depth)."""

    a: float = 0.040
    b: float = 0.020
    h: float = 0.040

    def __post_init__(self):
        if min(self.a, self.b, self.h) <= 0:
            raise ValidationError("cavity dimensions must be positive")


@dataclass(frozen=True)
class SimConfig:
    geometry: CavityGeometry = field(default_factory=CavityGeometry)
    n_points: int = N_POINTS
    fmin: float = FMIN_HZ
    fmax: float = FMAX_HZ
    coupling: float = 0.8
    q_factor: float = 100.0
    noise_sigma: float = 0.0
    eps_host: complex = DEFAULT_EPS_HOST
    eps_incl: complex = DEFAULT_EPS_INCL
    fixture: FixturePair | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.fmin >= self.fmax:
            raise ValidationError("fmin must be < fmax")
        if not 0 < self.coupling <= 1:
            raise ValidationError("coupling must be in (0, 1]")
        if self.q_factor <= 0:
            raise ValidationError("q_factor must be positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.n_points < 2:
            raise ValidationError("n_points must be >= 2")

    def frequency_grid(self) -> np.ndarray:
        return np.linspace(self.fmin, self.fmax, self.n_points)


def resonant_frequencies(geom: CavityGeometry, eps_eff: complex, fmax: float) -> list:
    """TE_mnl mode frequencies up to fmax, sorted ascending.

    f_mnl = c / (2 sqrt(Re(eps))) * sqrt((m/a)^2 + (n/b)^2 + (l/h)^2),
    over indices with m, l not both zero and at most one index zero.
    """
    eps_r = eps_eff.real if isinstance(eps_eff, complex) else float(eps_eff)
    if eps_r < 1:
        raise ValidationError(f"Re(eps_eff) must be >= 1, got {eps_r}")
    scale = C0 / (2.0 * np.sqrt(eps_r))
    m_max = int(np.floor(fmax / scale * geom.a)) + 1
    n_max = int(np.floor(fmax / scale * geom.b)) + 1
    l_max = int(np.floor(fmax / scale * geom.h)) + 1
    modes = []
    for m in range(m_max + 1):
        for n in range(n_max + 1):
            for l in range(l_max + 1):
                if m == 0 and l == 0:
                    continue
                if (m == 0) + (n == 0) + (l == 0) > 1:
                    continue
                f = scale * np.sqrt((m / geom.a) ** 2 + (n / geom.b) ** 2 + (l / geom.h) ** 2)
                if f <= fmax:
                    modes.append(((m, n, l), float(f)))
    modes.sort(key=lambda item: (item[1], item[0]))
    return modes


def _lorentzian_sum(freqs: np.ndarray, modes: list, coupling: float, q: float) -> np.ndarray:
    """Sum of transmission Lorentzians; degenerate modes share the coupling
    budget so the on-resonance peak never exceeds the coupling coefficient."""
    if not modes:
        return np.zeros_like(freqs, dtype=complex)
    mode_f = np.array([f for _, f in modes])
    # group degenerate frequencies and split coupling within each group
    weights = np.empty_like(mode_f)
    for i, f in enumerate(mode_f):
        weights[i] = coupling / np.count_nonzero(np.isclose(mode_f, f, rtol=1e-9, atol=0.0))
    x = freqs[:, None] / mode_f[None, :] - mode_f[None, :] / freqs[:, None]
    return np.sum(weights[None, :] / (1.0 + 1j * q * x), axis=1)


def _clamp_unit(values: np.ndarray) -> np.ndarray:
    mag = np.abs(values)
    return np.where(mag > 1.0, values / mag, values)


def synth_sparams(cfg: SimConfig, fraction: float, seed: int | None = None) -> LabeledSample:
    """Synthesize one labeled two-port sweep for a given mixture fraction.

    Noiseless synthesis is reciprocal and symmetric (s12 = s21, s22 = s11);
    complex Gaussian noise (std noise_sigma) is then added independently to
    every entry, and a configured fixture pair is cascaded around the DUT
    before the noise is applied.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {fraction}")
    if seed is None:
        seed = cfg.rng_seed
    eps_eff = bruggeman_eff(MixtureSpec(cfg.eps_host, cfg.eps_incl, fraction))
    freqs = cfg.frequency_grid()
    modes = resonant_frequencies(cfg.geometry, eps_eff, cfg.fmax)

    s21 = _clamp_unit(_lorentzian_sum(freqs, modes, cfg.coupling, cfg.q_factor))
    s11 = _clamp_unit(1.0 - s21)
    record = SParameterRecord.from_components(freqs, s11, s21, s21, s11,
                                              metadata=f"synthetic fraction={fraction:.6f}")
    if cfg.fixture is not None:
        record = embed_fixture(record, cfg.fixture)
    if cfg.noise_sigma > 0:
        rng = rng_from_seed(seed)
        noise = (rng.standard_normal(record.s.shape)
                 + 1j * rng.standard_normal(record.s.shape)) * (cfg.noise_sigma / np.sqrt(2))
        record = SParameterRecord(frequencies=record.frequencies, s=record.s + noise,
                                  metadata=record.metadata)
    return LabeledSample(record=record, fraction=float(fraction), provenance="synthetic",
                         seed=int(seed))


def generate_dataset(cfg: SimConfig, fractions) -> list:
    """One sample per fraction, each with its own derived seed."""
    fractions = list(fractions)
    if not fractions:
        raise ValidationError("empty fraction list")
    return [synth_sparams(cfg, f, seed=sample_seed(cfg.rng_seed, i))
            for i, f in enumerate(fractions)]
