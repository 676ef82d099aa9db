"""Bruggeman symmetric effective-medium approximation for two-phase mixtures.

The effective permittivity eps of a host/inclusion mixture with inclusion
volume fraction f satisfies

    f (eps_i - eps) / (eps_i + 2 eps) + (1 - f) (eps_h - eps) / (eps_h + 2 eps) = 0

Clearing denominators gives the quadratic

    2 eps^2 + eps (eps_h + eps_i - 3 m) - eps_h eps_i = 0,   m = f eps_i + (1 - f) eps_h

which is solved in closed form; the physical root is the one continuously
connected to eps_h at f = 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError

# Default salt-in-sand scenario materials. These are plumbing defaults for
# the synthetic pipeline, not measured material constants; override via
# MixtureSpec or run configuration.
DEFAULT_EPS_HOST = 2.5 + 0j   # dry sand
DEFAULT_EPS_INCL = 5.9 + 0j   # granular salt

_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class MixtureSpec:
    """Host/inclusion relative permittivities and inclusion volume fraction."""

    eps_host: complex = DEFAULT_EPS_HOST
    eps_incl: complex = DEFAULT_EPS_INCL
    fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError(f"fraction must be in [0, 1], got {self.fraction}")
        for name in ("eps_host", "eps_incl"):
            e = complex(getattr(self, name))
            if e.real < 1.0:
                raise ValidationError(f"Re({name}) must be >= 1, got {e}")
            if e.imag > 0.0:
                raise ValidationError(f"Im({name}) must be <= 0 (e^+jwt loss convention)")
            object.__setattr__(self, name, e)
        object.__setattr__(self, "fraction", float(self.fraction))


def mixing_residual(spec: MixtureSpec, eps: complex) -> complex:
    """Left-hand side of the Bruggeman equation at a candidate eps."""
    f = spec.fraction
    return (f * (spec.eps_incl - eps) / (spec.eps_incl + 2 * eps)
            + (1 - f) * (spec.eps_host - eps) / (spec.eps_host + 2 * eps))


def bruggeman_eff(spec: MixtureSpec) -> complex:
    """Solve the symmetric Bruggeman equation for the effective permittivity.

    Closed-form quadratic roots, with the physical branch chosen by
    proximity to the linear mix (the branch continuously connected to
    eps_host at fraction 0). A residual above 1e-12 raises NumericError.
    """
    eh, ei, f = spec.eps_host, spec.eps_incl, spec.fraction
    mix = f * ei + (1 - f) * eh
    b = eh + ei - 3 * mix
    # 2 eps^2 + b eps - eh*ei = 0
    disc = np.sqrt(complex(b * b + 8 * eh * ei))
    roots = [(-b + disc) / 4.0, (-b - disc) / 4.0]

    candidates = [r for r in roots if r.real > 0 and r.imag <= 1e-9]
    if not candidates:
        raise NumericError(f"no physical Bruggeman root among {roots} for {spec}")
    eps = min(candidates, key=lambda r: abs(r - mix))
    res = mixing_residual(spec, eps)
    if abs(res) >= _RESIDUAL_TOL:
        raise NumericError(f"Bruggeman residual {abs(res):.3e} too large; roots {roots}")
    return complex(eps)


def complement_fraction(f: float) -> float:
    """Fraction of the other constituent: 1 - f."""
    if not 0.0 <= f <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {f}")
    return 1.0 - f
