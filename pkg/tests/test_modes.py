import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwg.modes import ModeError, mode_basis, threshold


def test_one_mode_example():
    b = mode_basis(1.0, 20.0)
    assert b.M == 1
    assert b.lambdas[0] ** 2 == pytest.approx(math.pi ** 2, abs=1e-12)
    assert b.nus[0] == pytest.approx(3.18283, abs=1e-5)
    assert b.nus[0] == pytest.approx(math.sqrt(20 - math.pi ** 2), abs=1e-12)


def test_two_modes():
    b = mode_basis(1.0, 45.0)
    assert b.M == 2
    assert threshold(1, 1.0) < 45 and threshold(2, 1.0) == pytest.approx(39.4784176)


@pytest.mark.parametrize("k_sq", [4 * math.pi ** 2, math.pi ** 2, 5.0, -1.0])
def test_threshold_and_below_rejected(k_sq):
    with pytest.raises(ModeError):
        mode_basis(1.0, k_sq)


def test_parity_and_dirichlet():
    b = mode_basis(1.0, 45.0)
    y = np.linspace(-0.5, 0.5, 11)
    assert np.allclose(b.psi(1, y), b.psi(1, -y))
    assert np.allclose(b.psi(2, y), -b.psi(2, -y))
    assert np.allclose([b.psi(1, 0.5), b.psi(2, 0.5)], 0, atol=1e-15)
    with pytest.raises(ModeError):
        b.psi(3, y)


@settings(max_examples=40, deadline=None)
@given(l=st.floats(0.3, 3.0), frac=st.floats(0.02, 0.98), q=st.integers(1, 4))
def test_flux_normalisation(l, frac, q):
    k_sq = threshold(q, l) + frac * (threshold(q + 1, l) - threshold(q, l))
    b = mode_basis(l, k_sq)
    assert b.M == q
    assert np.allclose(b.flux_gram(), np.diag(1.0 / b.nus), atol=1e-12, rtol=0)
    assert b.delta == pytest.approx(math.sqrt(threshold(q + 1, l) - k_sq))
