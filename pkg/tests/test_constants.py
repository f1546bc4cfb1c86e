import json
import math

import numpy as np
import pytest

from rwg.constants import (CONVENTION, ConstantsError, FemOptions, TunnelingConstants, amplitude_constant,
                           assemble_constants, narrow_constants)
from rwg.fem import assemble, evaluate, solve_eigen
from rwg.geometry import WaveguideGeometry, build_resonator
from rwg.mesh import triangulate


def test_resonance_in_one_mode_window(default_constants):
    c = default_constants
    assert math.pi ** 2 < c.k0_sq < 4 * math.pi ** 2
    assert c.diagnostics["k0_gap"] > 1e-6 * c.k0_sq


def test_symmetric_corner_coefficients(default_constants):
    c = default_constants
    assert c.q in (1, -1)
    assert abs(c.diagnostics["q_raw"] - c.q) <= 0.02
    assert c.b1 > 0


def test_b1_matches_point_extraction(default_geom, default_constants):
    # independent route: sqrt(pi) * eps^-p * V0(eps, 0) on the axis near O1
    m = triangulate(build_resonator(default_geom), 0.025, 0.5, r_ref=1.0)
    v0 = solve_eigen(assemble(m, 2), 1)[0].eigenfunction
    eps = 0.05
    point = math.sqrt(math.pi) * eps ** -2 * evaluate(v0, [[eps, 0.0]])[0]
    k0 = math.sqrt(default_constants.k0_sq)
    # leading Helmholtz correction of J_2: 1 - (k r)^2 / 12
    assert point / (1 - (k0 * eps) ** 2 / 12) == pytest.approx(default_constants.b1, rel=2e-3)


def test_amplitude_reflection_checks(default_constants):
    d = default_constants.diagnostics
    r = complex(d["reflection"]["re"], d["reflection"]["im"])
    assert abs(abs(r) - 1) <= 0.01
    assert d["amplitude_phase_mismatch_deg"] <= 2.0
    a = default_constants.a_bold
    assert default_constants.A_abs == pytest.approx(abs(a) / 2, rel=1e-14)


def test_amplitude_truncation_stable(default_geom, default_constants):
    R0 = default_constants.diagnostics["amplitude_R_trunc"]
    far = amplitude_constant(default_geom, default_constants.k0_sq, R_trunc=2 * R0)
    assert far.A_abs == pytest.approx(default_constants.A_abs, rel=5e-3)


def test_single_sector_alpha_vanishes():
    res = narrow_constants(0.5, math.pi / 2, single_sector=True)
    assert abs(res.alpha) < 1e-3


def test_beta_truncation_convergence():
    res = narrow_constants(0.5, math.pi / 2, R_list=(4.0, 8.0))
    b4, b8 = res.beta_by_R
    assert abs(b4 - b8) <= 0.01 * abs(b8)
    assert res.beta != 0


def test_narrow_constants_scale_with_r0():
    # Omega(s r0) is Omega(r0) scaled by s, so alpha and beta scale like s^(2 pi / omega)
    opts = FemOptions(omega_h_max=0.2)
    a = narrow_constants(0.5, math.pi / 2, R_list=(4.0, 6.0), opts=opts)
    b = narrow_constants(0.25, math.pi / 2, R_list=(4.0, 6.0), opts=opts, window=(0.75, 2.0))
    assert b.alpha == pytest.approx(a.alpha / 16, rel=5e-3)
    assert b.beta == pytest.approx(a.beta / 16, rel=5e-3)


def test_empty_R_list():
    with pytest.raises(ConstantsError):
        narrow_constants(0.5, math.pi / 2, R_list=())


def test_P_arithmetic():
    c = assemble_constants(20.0, 1.5, 1.0, 0.9, 0.8, 0.4)
    assert c.P == pytest.approx(1 / (2 * 2.25 * 0.16 * 0.81), rel=1e-14)
    assert c.P == pytest.approx(1.7147, abs=1e-4)


def test_invariant_failures_aggregated():
    with pytest.raises(ConstantsError, match="beta"):
        assemble_constants(20.0, 1.5, 1.0, 0.9, 0.8, 0.0)
    with pytest.raises(ConstantsError, match="mesh suspect"):
        assemble_constants(20.0, 1.5, 0.5, 0.9, 0.8, 0.4)
    with pytest.raises(ConstantsError, match="beta.*;.*mesh suspect|mesh suspect.*;.*beta"):
        assemble_constants(20.0, 1.5, 0.5, 0.9, 0.8, 0.0)
    with pytest.raises(ConstantsError, match="one-mode window"):
        assemble_constants(50.0, 1.5, 1.0, 0.9, 0.8, 0.4, l=1.0)


def test_json_round_trip(default_constants):
    text = default_constants.to_json()
    d = json.loads(text)
    assert d["convention"] == CONVENTION
    for key in ("k0_sq", "b1", "q", "A_abs", "alpha", "beta", "P", "diagnostics", "geometry"):
        assert key in d
    back = TunnelingConstants.from_json(text)
    assert back.to_json() == text


def test_resonance_shift_matches_normalisation(default_constants):
    # the predicted shift at eps = 0.3 lies near the FEM peak (about 14.12572)
    c = default_constants
    shift = 2 * c.alpha * c.b1 ** 2 * 0.3 ** 4
    assert 14.1255 < c.k0_sq - shift < 14.1262
