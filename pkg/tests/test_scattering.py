import math

import numpy as np
import pytest

from rwg.fem import FemSolution, evaluate
from rwg.geometry import WaveguideGeometry
from rwg.modes import mode_basis
from rwg.scattering import (ScatteringError, ScatteringMatrix, WaveguideModel, default_R_trunc, transmission)

K_SQ = 20.0


@pytest.fixture(scope="module")
def strip():
    return WaveguideModel.straight_strip(1.0, 3.0, d=0.0, h_max=0.05)


@pytest.fixture(scope="module")
def narrows():
    return WaveguideModel.from_geometry(WaveguideGeometry(epsilon=0.35), 3.0, h_max=0.08)


def test_shortcut_minus_solutions_vanish(strip):
    basis = mode_basis(1.0, K_SQ)
    vpm = strip.radiation_solutions(basis, -basis.nus[0])
    assert all(np.max(np.abs(v)) == 0 for v in vpm.minus)


def test_plus_solution_matches_plane_wave(strip):
    basis = mode_basis(1.0, K_SQ)
    nu = basis.nus[0]
    vpm = strip.radiation_solutions(basis, -nu)
    pts = np.array([[x, y] for x in (-2.5, -1.0, 0.0, 1.5, 2.9) for y in (-0.3, 0.0, 0.2)])
    got = evaluate(FemSolution(strip.forms.space, vpm.plus[0]), pts)
    want = np.exp(1j * nu * pts[:, 0]) * basis.psi(1, pts[:, 1])
    assert np.max(np.abs(got - want)) < 1e-4


def test_zero_zeta_rejected(strip):
    with pytest.raises(ScatteringError):
        strip.radiation_solutions(mode_basis(1.0, K_SQ), 0.0)


def test_E_is_identity_over_nu(narrows):
    basis = mode_basis(1.0, K_SQ)
    vpm = narrows.radiation_solutions(basis, -basis.nus[0])
    E, F, G = narrows.assemble_EFG(vpm, basis)
    assert np.allclose(E, np.eye(2) / basis.nus[0], atol=1e-8, rtol=0)
    assert np.all(G >= 0)


def test_strip_empty_scatterer(strip):
    S = strip.scattering_matrix(K_SQ)
    assert abs(abs(S.s[0, 1]) - 1) <= 1e-3
    assert abs(S.s[0, 0]) <= 1e-3
    assert S.unitarity_defect <= 1e-3
    R, T = transmission(S)
    assert T == pytest.approx(1.0, abs=1e-3) and R == pytest.approx(0.0, abs=1e-3)
    # phases referenced to absolute x: transmitted wave keeps exp(i nu x)
    assert S.s[0, 1] == pytest.approx(1.0, abs=1e-3)


def test_strip_two_modes():
    model = WaveguideModel.straight_strip(1.0, 3.0, d=0.5, h_max=0.06)
    S = model.scattering_matrix(45.0)
    assert S.M == 2
    assert S.unitarity_defect < 1e-3
    for m in (1, 2):
        assert transmission(S, m)[1] == pytest.approx(1.0, abs=1e-3)


def test_unitarity_and_mirror_symmetry(narrows):
    S = narrows.scattering_matrix(14.0)
    assert abs(S.s[0, 0]) ** 2 + abs(S.s[0, 1]) ** 2 == pytest.approx(1.0, abs=1e-6)
    assert S.unitarity_defect < 1e-6
    assert S.symmetry_defect < 1e-4


def test_shortcut_equals_general(narrows):
    a = narrows.scattering_matrix(14.0)
    b = narrows.scattering_matrix(14.0, general=True)
    c = narrows.scattering_matrix(14.0, zeta=2.0)
    assert np.max(np.abs(a.s - b.s)) < 1e-10
    assert np.max(np.abs(a.s - c.s)) < 1e-6


def test_transmission_arithmetic():
    s = np.array([[0.6, 0.8j], [0.8j, 0.6]])
    S = ScatteringMatrix(s, 20.0, None, 3.0, 0.1, -1.0, 0.0, 0.0)
    R, T = transmission(S)
    assert (R, T) == pytest.approx((0.36, 0.64), abs=1e-15)
    with pytest.raises(ScatteringError):
        transmission(S, 2)


def test_default_truncation():
    R = default_R_trunc(1.0, 14.0)
    delta = math.sqrt(4 * math.pi ** 2 - 14.0)
    assert math.exp(-delta * R) <= 1e-8 * (1 + 1e-12)
    assert R >= 3.0
