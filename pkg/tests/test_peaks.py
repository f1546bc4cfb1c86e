import math

import numpy as np
import pytest

from rwg.geometry import WaveguideGeometry
from rwg.peaks import (PeakError, SweepError, lorentzian, locate_peak, ordered_map, seek_bracket,
                       sweep_transmission, write_sweep_csv)
from rwg.scattering import WaveguideModel


def synthetic(x):
    return 1.0 / (1.0 + ((x - 20.0) / 1e-4) ** 2)


def test_synthetic_oracle():
    p = locate_peak(synthetic, (20.0 - 4.3e-4, 20.0 + 6.1e-4))
    assert abs(p.k_res_sq_n - 20.0) / 20.0 < 1e-7
    assert p.widths[0.5] == pytest.approx(2e-4, rel=1e-3)
    assert p.lorentz_fit["center"] == pytest.approx(20.0, abs=1e-9)
    assert p.lorentz_fit["fwhm"] == pytest.approx(2e-4, rel=1e-6)


def test_widths_decrease_with_height():
    p = locate_peak(synthetic, (19.9995, 20.0005), heights=(0.7, 0.2, 0.5))
    w = [p.widths[h] for h in (0.2, 0.5, 0.7)]
    assert w[0] > w[1] > w[2]
    # Lorentzian oracle: width at h is the FWHM times sqrt(1/h - 1)
    for h in (0.2, 0.5, 0.7):
        assert p.widths[h] == pytest.approx(2e-4 * math.sqrt(1 / h - 1), rel=1e-3)


def test_widths_relative_to_peak_height():
    p = locate_peak(lambda x: 0.9 * synthetic(x), (19.9995, 20.0005))
    assert p.T_max == pytest.approx(0.9, rel=1e-9)
    assert p.widths[0.5] == pytest.approx(2e-4, rel=1e-3)


def test_flat_is_not_unimodal():
    with pytest.raises(PeakError, match="non-unimodal"):
        locate_peak(lambda x: 0.3, (0.0, 1.0))


def test_two_peaks_not_unimodal():
    T = lambda x: synthetic(x) + synthetic(x + 3e-4)
    with pytest.raises(PeakError, match="non-unimodal"):
        locate_peak(T, (19.9994, 20.0004), n_scan=21)


def test_peak_at_edge():
    with pytest.raises(PeakError, match="bracket missed peak"):
        locate_peak(synthetic, (20.0002, 20.001))


def test_seek_bracket_from_far_guess():
    lo, hi, fwhm = seek_bracket(synthetic, 20.0 + 0.05, 1e-4)
    assert lo < 20.0 < hi
    assert fwhm == pytest.approx(2e-4, rel=1e-3)


def test_ordered_map_keeps_order(monkeypatch):
    monkeypatch.setenv("RWG_THREADS", "4")
    assert ordered_map(lambda x: x * x, range(20)) == [x * x for x in range(20)]


@pytest.fixture(scope="module")
def strip():
    return WaveguideModel.straight_strip(1.0, 3.0, h_max=0.1)


def test_sweep_empty_scatterer(strip):
    rows = sweep_transmission(strip, [25.0, 12.0, 30.0])
    assert [r.k_sq for r in rows] == [12.0, 25.0, 30.0]
    assert all(r.ok and abs(r.T - 1) < 1e-3 for r in rows)


def test_sweep_single_point(strip):
    assert len(sweep_transmission(strip, [20.0])) == 1


def test_sweep_threshold_crossing_rejected_before_solving():
    class Boom:
        l = 1.0

        def scattering_matrix(self, k):
            raise AssertionError("solver must not run")

    with pytest.raises(SweepError):
        sweep_transmission(Boom(), [20.0, 30.0, 41.0])


def test_sweep_failure_flagged(tmp_path):
    class Flaky:
        l = 1.0

        def scattering_matrix(self, k):
            if k > 25:
                raise RuntimeError("singular")
            s = np.array([[0.0, 1.0], [1.0, 0.0]], complex)
            from rwg.scattering import ScatteringMatrix
            return ScatteringMatrix(s, k, None, 3.0, 0.1, -1.0, 0.0, 0.0)

    rows = sweep_transmission(Flaky(), [20.0, 30.0])
    assert rows[0].ok and not rows[1].ok and "singular" in rows[1].error
    write_sweep_csv(tmp_path / "s.csv", rows)
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "k_sq,T,R,unitarity_defect,ok,error"
    assert len(text) == 3


def test_lorentzian_helper():
    assert lorentzian(1.0, 1.0, 0.5, 0.8) == 0.8
    assert lorentzian(1.5, 1.0, 0.5, 1.0) == pytest.approx(0.5)
