from pathlib import Path

import numpy as np

from cavityfrac.sparams import SParameterRecord

DATA_DIR = Path(__file__).parent / "data"


def random_record(rng, n=11, fmin=1e9, fmax=5e9):
    """Random reciprocal-ish record with s21 bounded away from zero."""
    f = np.linspace(fmin, fmax, n)

    def entry():
        return rng.uniform(-0.5, 0.5, n) + 1j * rng.uniform(-0.5, 0.5, n)

    s21 = entry() + 1.0  # |s21| >= 0.5 guaranteed nowhere near singular
    return SParameterRecord.from_components(f, entry(), entry(), s21, entry())
