import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drifthom.closed_form import AnnulusSpec, scalar_radius
from drifthom.errors import ArgumentError, GradingError, ResolutionError
from drifthom.mesh import (
    Boundary,
    GradingSpec,
    Subdomain,
    check_mesh,
    disk_cell,
    dump_text,
    load_text,
    periodic_cell,
    perforated_lattice,
    structured_square,
    write_vtk,
)


def test_structured_square_counts():
    m = structured_square(2)
    assert (m.n_vertices, m.n_triangles) == (9, 8)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-15)
    check_mesh(m)


@given(st.integers(2, 30), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.1, 3))
@settings(max_examples=30, deadline=None)
def test_structured_square_partition(n, x0, y0, w, h):
    m = structured_square(n, (x0, y0), (x0 + w, y0 + h))
    assert m.n_triangles == 2 * n * n
    assert m.areas.sum() == pytest.approx(w * h, rel=1e-12)
    # congruent right triangles
    np.testing.assert_allclose(m.areas, w * h / (2 * n * n), rtol=1e-9)
    check_mesh(m)


def test_structured_square_degenerate():
    with pytest.raises(ArgumentError):
        structured_square(4, (0, 0), (1, 0))
    with pytest.raises(ArgumentError):
        structured_square(4, (1, 1), (0, 2))


def test_structured_periodic_pairs():
    n = 5
    m = structured_square(n, periodic=True)
    check_mesh(m)
    slaves, masters = m.periodic_pairs.T
    # every right or top boundary vertex is a slave, masters sit on the left/bottom sides
    bv = m.boundary_vertices
    on_hi = bv[(m.vertices[bv, 0] == 1.0) | (m.vertices[bv, 1] == 1.0)]
    assert set(slaves) == set(on_hi)
    assert len(slaves) == len(bv) - len(np.unique(masters))
    d = m.vertices[slaves] - m.vertices[masters]
    assert np.all(np.isin(np.round(d, 12).tolist(), [0.0, 1.0]))
    # corner (1,1) goes to (0,0)
    corner = np.flatnonzero(np.all(m.vertices == 1.0, axis=1))[0]
    master = masters[slaves == corner][0]
    np.testing.assert_array_equal(m.vertices[master], [0.0, 0.0])


def test_disk_cell_core_area_and_ring_width():
    g = GradingSpec(layers=12, ratio=1.25)
    m = disk_cell(0.4, g, inner_circle=0.05)
    check_mesh(m)
    assert m.area_of(Subdomain.DISK_CORE) == pytest.approx(math.pi * 0.05**2, rel=1e-3)
    assert m.areas.sum() == pytest.approx(math.pi * 0.16, rel=1e-3)
    r = np.hypot(*m.vertices.T)
    radii = np.unique(np.round(r[r >= 0.05 * (1 - 1e-12)], 12))
    # 0.05 to 0.4 is a factor 8; ceil(ln 8 / ln 1.25) = 10 rings, so ratio 8^(1/10)
    assert len(radii) == 11
    assert radii[1] - radii[0] == pytest.approx(0.05 * (8 ** 0.1 - 1), rel=1e-9)
    assert radii[1] - radii[0] == pytest.approx(0.05 * 0.25, rel=0.25)
    inner = m.vertices_with_tag(Boundary.INNER_CIRCLE)
    np.testing.assert_allclose(r[inner], 0.05, rtol=1e-12)


def test_disk_cell_without_inner_circle():
    m = disk_cell(0.4, GradingSpec())
    check_mesh(m)
    assert set(np.unique(m.subdomain)) == {Subdomain.DISK_CORE}
    assert m.areas.sum() == pytest.approx(math.pi * 0.16, rel=1e-3)


def test_grading_cannot_span():
    with pytest.raises(GradingError):
        disk_cell(0.4, GradingSpec(layers=2, ratio=1.2), inner_circle=0.01)
    with pytest.raises(GradingError):
        GradingSpec(ratio=1.0)


def test_scalar_periodic_cell_areas():
    an = AnnulusSpec(0.4, 0.05)
    m = periodic_cell(an, 0.5)
    check_mesh(m)
    assert m.area_of(Subdomain.DISK_CORE) == pytest.approx(math.pi * 0.05**2, rel=1e-3)
    assert m.area_of(Subdomain.ANNULUS) == pytest.approx(math.pi * (0.16 - 0.0025), rel=1e-3)
    assert m.area_of(Subdomain.EXTERIOR) == pytest.approx(1 - math.pi * 0.16, rel=1e-3)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-12)


def test_stokes_periodic_cell_pairs():
    m = periodic_cell(AnnulusSpec(1.0, 0.3), 1.0)
    check_mesh(m)
    assert m.areas.sum() == pytest.approx(4.0, abs=1e-12)
    slaves, masters = m.periodic_pairs.T
    bv = m.boundary_vertices
    side = bv[np.max(np.abs(m.vertices[bv]), axis=1) >= 1.0 - 1e-14]
    assert len(slaves) == len(side) - len(np.unique(masters))
    d = m.vertices[slaves] - m.vertices[masters]
    assert np.all(np.isclose(d, 0.0, atol=1e-12) | np.isclose(d, 2.0, atol=1e-12))


@given(st.floats(5.0, 200.0), st.floats(0.1, 0.5))
@settings(max_examples=12, deadline=None)
def test_random_cells_valid(mu, eps):
    r = scalar_radius(mu, eps, 0.4) if 2 * math.pi / (mu * eps * eps) > math.log(1 / 0.4) else None
    if r is None or r < 1e-9:
        return
    g = GradingSpec(layers=400, ratio=1.5, target_h=0.05)
    m = periodic_cell(AnnulusSpec(0.4, r), 0.5, g)
    check_mesh(m)
    assert m.area_of(Subdomain.DISK_CORE) == pytest.approx(math.pi * r * r, rel=1e-3)


def test_refining_target_h():
    an = AnnulusSpec(0.4, 0.1)
    # ring and segment counts are rounded up, so pick a target_h where neither count rounds
    a = periodic_cell(an, 0.5, GradingSpec(target_h=0.021))
    b = periodic_cell(an, 0.5, GradingSpec(target_h=0.0105))
    ext_a = np.sum(a.subdomain == Subdomain.EXTERIOR)
    ext_b = np.sum(b.subdomain == Subdomain.EXTERIOR)
    assert ext_b >= 4 * ext_a

    def far_h(m):
        e = m.edges
        mid = 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]])
        return m.edge_lengths[np.hypot(*mid.T) > 0.4].max()

    # diagonals of the morphed quads are chosen per level, which leaves a few percent of slack
    assert far_h(b) <= 0.5 * far_h(a) * 1.05


def test_lattice_counts():
    an = AnnulusSpec(0.4, scalar_radius(50, 0.25, 0.4))
    assert an.r_eps == pytest.approx(0.1339, abs=1e-4)
    m = perforated_lattice(pitch=0.25, annulus=an)
    check_mesh(m)
    assert len(m.lattice.centers) == 16
    assert sum(1 for c in m.circles if c[2] == pytest.approx(0.25 * an.r_eps)) == 16
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-10)
    assert m.area_of(Subdomain.DISK_CORE) == pytest.approx(16 * math.pi * (0.25 * an.r_eps) ** 2, rel=1e-3)
    # outer boundary is the square only
    bv = m.boundary_vertices
    x, y = m.vertices[bv].T
    assert np.all((np.abs(x) < 1e-12) | (np.abs(x - 1) < 1e-12) | (np.abs(y) < 1e-12) | (np.abs(y - 1) < 1e-12))


def test_lattice_divisibility():
    an = AnnulusSpec(0.4, 0.1)
    m = perforated_lattice(pitch=1 / 3, annulus=an, grading=GradingSpec(target_h=0.1))
    assert len(m.lattice.centers) == 9
    with pytest.raises(ArgumentError):
        perforated_lattice(pitch=0.3, annulus=an)


def test_lattice_resolution_error():
    with pytest.raises(ResolutionError):
        perforated_lattice(pitch=0.25, annulus=AnnulusSpec(0.4, 1e-8))


def test_meshes_are_deterministic():
    an = AnnulusSpec(0.4, 0.05)
    a = perforated_lattice(pitch=0.5, annulus=an)
    b = perforated_lattice(pitch=0.5, annulus=an)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.triangles, b.triangles)


def test_text_dump_round_trip(tmp_path):
    m = periodic_cell(AnnulusSpec(0.4, 0.1), 0.5, GradingSpec(target_h=0.1))
    p = tmp_path / "m.txt"
    dump_text(m, p)
    assert p.read_text().splitlines()[0] == f"vertices {m.n_vertices} triangles {m.n_triangles}"
    back = load_text(p)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.subdomain, m.subdomain)
    write_vtk(m, tmp_path / "m.vtk", point_data={"r": np.hypot(*m.vertices.T)})
    assert "POINT_DATA" in (tmp_path / "m.vtk").read_text()
