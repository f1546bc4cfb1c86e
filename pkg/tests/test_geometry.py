import math

import numpy as np
import pytest

from rwg.geometry import (GeometryError, Tag, WaveguideGeometry, arc_segments, build_halfstrip, build_omega,
                          build_resonator, build_waveguide, channel_width)


def test_waveguide_polygon_closed_simple_and_ends():
    g = WaveguideGeometry(epsilon=0.3)
    b = build_waveguide(g, 3.0)
    assert b.is_simple()
    assert b.signed_area() > 0
    xs = b.vertices[:, 0]
    assert xs.min() == pytest.approx(-3.0)
    assert xs.max() == pytest.approx(5.0)
    # closed: every vertex starts exactly one segment and ends exactly one
    assert sorted(b.segments[:, 0]) == sorted(b.segments[:, 1]) == list(range(len(b.vertices)))


def test_channel_width_at_both_narrows():
    b = build_waveguide(WaveguideGeometry(epsilon=0.3), 3.0)
    assert channel_width(b, 0.0) == pytest.approx(0.3, abs=1e-12)
    assert channel_width(b, 2.0) == pytest.approx(0.3, abs=1e-12)


def test_point_in_polygon_oracle():
    b = build_waveguide(WaveguideGeometry(epsilon=0.3), 3.0)
    inside = [(-2.0, 0.0), (1.0, 0.4), (1.0, -0.4), (0.0, 0.14), (4.5, -0.45)]
    outside = [(0.0, 0.16), (2.0, -0.2), (-3.5, 0.0), (1.0, 0.6), (0.3, 0.4)]
    assert b.contains(inside).all()
    assert not b.contains(outside).any()


def test_end_tags():
    b = build_waveguide(WaveguideGeometry(), 3.0)
    v = b.vertices
    for tag, x in ((Tag.GAMMA_1, -3.0), (Tag.GAMMA_2, 5.0)):
        seg = b.segments_with(tag)
        assert len(seg) == 1
        assert np.allclose(v[seg.ravel(), 0], x)


def test_narrow_too_wide_rejected():
    with pytest.raises(GeometryError, match="l/4"):
        WaveguideGeometry(epsilon=0.6)


def test_channel_width_shrinks_with_epsilon():
    widths = [channel_width(build_waveguide(WaveguideGeometry(epsilon=e), 3.0), 0.0)
              for e in (0.4, 0.2, 0.1, 0.05, 0.01)]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_resonator_vertices_and_mirror_symmetry():
    g = WaveguideGeometry()
    b = build_resonator(g)
    v = b.vertices
    assert any(np.allclose(p, (0, 0)) for p in v)
    assert any(np.allclose(p, (2, 0)) for p in v)
    mirrored = np.column_stack([g.d - v[:, 0], v[:, 1]])
    for p in mirrored:
        assert np.min(np.linalg.norm(v - p, axis=1)) < 1e-12
    assert b.is_simple() and b.signed_area() > 0


def test_resonator_cones_crossing_rejected():
    with pytest.raises(GeometryError, match="increase d"):
        WaveguideGeometry(d=0.8)


def test_halfstrip_single_gamma1_run():
    g = WaveguideGeometry()
    b = build_halfstrip(g, 3.0)
    assert len(b.segments_with(Tag.GAMMA_1)) == 1
    assert len(b.segments_with(Tag.GAMMA_2)) == 0
    assert b.is_simple()
    assert b.contains([(-2.0, 0.0), (-0.1, 0.0)]).all()
    assert not b.contains([(0.1, 0.0)]).any()


@pytest.mark.parametrize("R", [0.0, -1.0, 0.3])
def test_halfstrip_bad_truncation(R):
    with pytest.raises(GeometryError):
        build_halfstrip(WaveguideGeometry(), R)


def test_omega_symmetry():
    b = build_omega(0.5, math.pi / 2, 8.0)
    v = b.vertices
    for flip in ((-1, 1), (1, -1)):
        m = v * np.array(flip)
        for p in m:
            assert np.min(np.linalg.norm(v - p, axis=1)) < 1e-9
    assert b.is_simple()


def test_omega_single_sector_is_pure_sector():
    b = build_omega(0.5, math.pi / 2, 8.0, single_sector=True)
    r = np.hypot(*b.vertices.T)
    phi = np.arctan2(b.vertices[:, 1], b.vertices[:, 0])
    assert np.all((r < 1e-12) | np.isclose(r, 8.0))
    assert np.all(np.abs(phi) <= math.pi / 4 + 1e-12)
    assert len(b.segments_with(Tag.GAMMA_1)) == 0


def test_omega_truncation_too_small():
    with pytest.raises(GeometryError):
        build_omega(0.5, math.pi / 2, 0.6)


def test_arc_segments_even_and_fine():
    n = arc_segments(1.0, math.pi / 2, 0.5)
    assert n % 2 == 0
    sagitta = 1.0 - math.cos(0.5 * (math.pi / 2) / n)
    assert sagitta <= 1e-5
