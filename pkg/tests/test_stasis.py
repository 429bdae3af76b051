from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from crawler_ris.dissipation import DissipationSpec, check_coefficients
from crawler_ris.model import CrawlerModel, assemble, chi
from crawler_ris.stasis import (ALL, NONNEG, NONPOS, ZERO, box_vertices_on_section,
                                build_geometry, enumerate_vertices, halfspaces, is_admissible,
                                normal_cone_direction)
from crawler_ris.timeprog import DomainError, TimeProgram


def _geo(mm, mp, n=3):
    return build_geometry(DissipationSpec.constant(mm, mp, n), 0.0)


def test_two_point_interval():
    g = _geo(2.0, 1.0, 2)
    assert np.allclose(np.sort(g.vertices[:, 0]), [-1.0, 1.0])
    g = _geo(0.7, 3.0, 2)
    assert np.allclose(np.sort(g.vertices[:, 0]), [-0.7, 0.7])


def test_triangle_regime():
    g = _geo(3.0, 1.0)
    assert len(g.vertices) == 3
    assert {s for _, _, s in g.polygon_edges()} == {NONNEG}


def test_triangle_regime_mirrored():
    g = _geo(1.0, 3.0)
    assert len(g.vertices) == 3
    assert {s for _, _, s in g.polygon_edges()} == {NONPOS}


def test_hexagon_regime_alternates():
    g = _geo(1.3, 1.0)
    assert len(g.vertices) == 6
    labels = [s for _, _, s in g.polygon_edges()]
    assert all(a != b for a, b in zip(labels, labels[1:] + labels[:1]))
    assert set(labels) == {NONNEG, NONPOS}
    assert all(lab.sign_set == ALL for lab in g.vertex_labels())


def test_isotropic_hexagon():
    assert len(_geo(1.0, 1.0).vertices) == 6


def test_section_image_and_membership():
    g = _geo(3.0, 1.0)
    sec = g.to_section(g.vertices)
    assert np.allclose(sec.sum(axis=1), 0.0)
    assert np.all(sec <= g.box_hi + 1e-12) and np.all(sec >= g.box_lo - 1e-12)
    assert all(g.contains(v) for v in g.vertices)
    assert not g.contains(2 * g.vertices[0])
    w = np.array([0.3, -1.0])
    assert g.support(w) == pytest.approx(max(g.vertices @ w))


def test_geometry_json_and_four_points():
    g = _geo(1.3, 1.0)
    data = g.to_json()
    assert len(data["edges"]) == 6 and len(data["halfspaces"]) == 6
    g4 = _geo(2.0, 1.5, 4)
    assert g4.vertices is not None and g4.dim == 3
    assert len(g4.facet_labels()) > 0
    g6 = _geo(2.0, 1.5, 6)
    assert g6.vertices is None and g6.to_json()["vertices"] is None
    with pytest.raises(ValueError):
        g4.polygon()


def test_enumerate_unit_square():
    normals = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
    v = enumerate_vertices(normals, np.ones(4))
    assert len(v) == 4 and np.allclose(np.abs(v), 1.0)


def _two_point(z0, L0=0.0, mu=1.0, k=1.0):
    m = CrawlerModel.chain(2, k, TimeProgram.constant(L0), mu, mu)
    return assemble(m), DissipationSpec.from_model(m), chi([z0], 0.0)


def test_admissibility():
    e, d, x = _two_point(0.3, L0=0.3, mu=0.8)
    ok, margin = is_admissible(e, d, 0.0, x)
    assert ok and margin == pytest.approx(0.8)
    e, d, x = _two_point(1.1)
    assert not is_admissible(e, d, 0.0, x)[0]
    e, d, x = _two_point(1.0)
    ok, margin = is_admissible(e, d, 0.0, x)
    assert ok and margin == pytest.approx(0.0, abs=1e-14)


def test_normal_cone_labels():
    d = DissipationSpec.constant(2.0, 1.0, 3)
    assert normal_cone_direction(d, 0.0, [0.1, -0.2, 0.1]).sign_set == ZERO
    assert normal_cone_direction(d, 0.0, [1.0, -0.5, -0.5]).sign_set == NONNEG
    assert normal_cone_direction(d, 0.0, [1.0, 1.0, -2.0]).sign_set == ALL
    with pytest.raises(DomainError):
        normal_cone_direction(d, 0.0, [1.5, -1.0, -0.5])


def test_box_vertices_on_section():
    pats = box_vertices_on_section([1.0, 1.0], [1.0, 1.0])
    assert {tuple(p) for p in pats} == {(True, False), (False, True)}
    assert box_vertices_on_section([1.0] * 3, [1.5] * 3).size == 0
    with pytest.raises(ValueError):
        box_vertices_on_section(np.ones(21), np.ones(21))


def test_halfspaces_describe_section():
    mm, mp = np.array([1.0, 2.0, 0.5]), np.array([0.7, 0.4, 1.1])
    normals, offsets = halfspaces(mm, mp)
    assert normals.shape == (6, 2) and np.allclose(offsets, np.concatenate([mp, mm]))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_vertex_count_dichotomy(mm, mp):
    r = mm / mp
    assume(abs(r - 2) > 1e-3 and abs(r - 0.5) > 1e-3)
    g = _geo(mm, mp)
    expected = 3 if (r > 2 or r < 0.5) else 6
    assert len(g.vertices) == expected
    assert np.all(g.slack(g.vertices) >= -1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.integers(1, 4))
def test_condition_matches_box_vertices(n, a, b):
    mm, mp = np.full(n, float(a)), np.full(n, float(b))
    assert check_coefficients(mm, mp).holds == (box_vertices_on_section(mm, mp).size == 0)
