import numpy as np
import pytest

from cavityfrac.errors import ValidationError
from cavityfrac.mixture import (MixtureSpec, bruggeman_eff, complement_fraction,
                                mixing_residual)
from cavityfrac.rng import rng_from_seed


class TestBruggeman:
    def test_endpoint_zero_fraction(self):
        assert bruggeman_eff(MixtureSpec(2.5, 5.9, 0.0)) == pytest.approx(2.5, abs=1e-12)

    def test_endpoint_full_fraction(self):
        assert bruggeman_eff(MixtureSpec(2.5, 5.9, 1.0)) == pytest.approx(5.9, abs=1e-12)

    def test_half_mix_quadratic_oracle(self):
        # f=0.5, eps_h=1, eps_i=3 reduces to 4x^2 - 4x - 6 = 0; positive root
        oracle = (4 + np.sqrt(16 + 96)) / 8  # quadratic formula
        assert oracle == pytest.approx((1 + np.sqrt(7)) / 2)
        assert bruggeman_eff(MixtureSpec(1, 3, 0.5)) == pytest.approx(oracle, abs=1e-9)

    def test_degenerate_equal_materials(self):
        for f in (0.0, 0.3, 1.0):
            assert bruggeman_eff(MixtureSpec(4, 4, f)) == pytest.approx(4.0, abs=1e-12)

    def test_residual_on_random_specs(self):
        rng = rng_from_seed(42)
        for _ in range(1000):
            spec = MixtureSpec(eps_host=complex(rng.uniform(1, 20), -rng.uniform(0, 2)),
                               eps_incl=complex(rng.uniform(1, 20), -rng.uniform(0, 2)),
                               fraction=float(rng.uniform(0, 1)))
            eps = bruggeman_eff(spec)
            assert abs(mixing_residual(spec, eps)) < 1e-12

    def test_monotone_in_fraction(self):
        sweep = [bruggeman_eff(MixtureSpec(2.5, 5.9, f)).real
                 for f in np.linspace(0, 1, 101)]
        assert all(b > a for a, b in zip(sweep, sweep[1:]))

    def test_bounded_by_constituents(self):
        rng = rng_from_seed(43)
        for _ in range(100):
            eh, ei = rng.uniform(1, 20, 2)
            eps = bruggeman_eff(MixtureSpec(eh, ei, float(rng.uniform(0, 1)))).real
            assert min(eh, ei) - 1e-9 <= eps <= max(eh, ei) + 1e-9

    def test_host_inclusion_symmetry(self):
        for f in np.linspace(0, 1, 101):
            a = bruggeman_eff(MixtureSpec(2.5, 5.9, float(f)))
            b = bruggeman_eff(MixtureSpec(5.9, 2.5, float(1 - f)))
            assert abs(a - b) < 1e-12

    def test_lossy_root_has_negative_imag(self):
        eps = bruggeman_eff(MixtureSpec(2.5 - 0.1j, 5.9 - 0.5j, 0.4))
        assert eps.imag < 0

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValidationError):
            MixtureSpec(2.5, 5.9, 1.5)
        with pytest.raises(ValidationError):
            MixtureSpec(0.5, 5.9, 0.5)
        with pytest.raises(ValidationError):
            MixtureSpec(2.5 + 1j, 5.9, 0.5)


class TestComplementFraction:
    @pytest.mark.parametrize("f,expected", [(0.0, 1.0), (1.0, 0.0), (0.35, 0.65)])
    def test_values(self, f, expected):
        assert complement_fraction(f) == pytest.approx(expected)

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            complement_fraction(-0.1)
        with pytest.raises(ValidationError):
            complement_fraction(1.1)
