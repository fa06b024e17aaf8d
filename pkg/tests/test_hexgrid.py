import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoneroute.errors import DomainError
from zoneroute.hexgrid import (
    EARTH_RADIUS_M,
    GeoPoint,
    GridSpec,
    HexCellId,
    ProjectedPoint,
    cell_of,
    centroid,
    format_cell_id,
    pack,
    parent,
    parse_cell_id,
    project,
    unpack,
    unproject,
)

ORIGIN = GeoPoint(33.98, -118.25)


def test_project_meridian_arc(spec):
    p = project(GeoPoint(ORIGIN.lat + 0.01, ORIGIN.lng), spec)
    assert p.x == pytest.approx(0.0, abs=1e-9)
    assert p.y == pytest.approx(EARTH_RADIUS_M * 0.01 * math.pi / 180.0, abs=1e-6)
    assert p.y == pytest.approx(1111.95, abs=0.01)


def test_project_origin_is_zero(spec):
    p = project(ORIGIN, spec)
    assert p.x == 0.0 and p.y == 0.0


@given(dlat=st.floats(-0.5, 0.5), dlng=st.floats(-0.5, 0.5))
@settings(max_examples=200)
def test_project_unproject_roundtrip(dlat, dlng):
    spec = GridSpec(origin=ORIGIN)
    g = GeoPoint(ORIGIN.lat + dlat, ORIGIN.lng + dlng)
    back = unproject(project(g, spec), spec)
    assert back.lat == pytest.approx(g.lat, abs=1e-12)
    assert back.lng == pytest.approx(g.lng, abs=1e-12)


def test_centroid_basis_vectors():
    # (1,0) -> sqrt(3)*e along x; (0,1) -> (sqrt(3)/2*e, 3/2*e)
    spec = GridSpec(origin=ORIGIN, ref_resolution=7, ref_edge_m=1000.0)
    c = centroid(HexCellId(7, 1, 0), spec)
    assert c.x == pytest.approx(1732.05, abs=0.01)
    assert c.y == pytest.approx(0.0, abs=1e-9)
    c = centroid(HexCellId(7, 0, 1), spec)
    assert c.x == pytest.approx(866.03, abs=0.01)
    assert c.y == pytest.approx(1500.0, abs=1e-9)


def test_cell_of_near_boundary():
    # distance 0.8487*e to center (0,0) beats 0.8833*e to center (1,0)
    spec = GridSpec(origin=ORIGIN, ref_resolution=7, ref_edge_m=1000.0)
    e = spec.edge_m(7)
    cell = cell_of(ProjectedPoint(0.8487 * e, 0.0), 7, spec)
    assert (cell.q, cell.r) == (0, 0)


def test_cell_of_nearest_center_bruteforce(spec):
    # cell_of must agree with a nearest-centroid scan over a neighborhood
    rng = np.random.default_rng(0)
    res = 8
    e = spec.edge_m(res)
    for _ in range(200):
        p = ProjectedPoint(*(rng.uniform(-4 * e, 4 * e, size=2)))
        cell = cell_of(p, res, spec)
        best = None
        for q in range(-8, 9):
            for r in range(-8, 9):
                c = centroid(HexCellId(res, q, r), spec)
                d = (c.x - p.x) ** 2 + (c.y - p.y) ** 2
                if best is None or d < best[0] - 1e-9:
                    best = (d, q, r)
        assert (cell.q, cell.r) == (best[1], best[2])


def test_edge_scaling_sqrt7(spec):
    for res in range(1, 15):
        assert spec.edge_m(res - 1) / spec.edge_m(res) == pytest.approx(
            math.sqrt(7.0), rel=1e-12)


def test_parent_cases(spec):
    assert parent(HexCellId(8, 0, 0), spec) == HexCellId(7, 0, 0)
    # child (2,1): exact inverse-matrix image (1, 0)
    assert parent(HexCellId(8, 2, 1), spec) == HexCellId(7, 1, 0)


def test_parent_inverts_canonical_children(spec):
    # child = M.parent + offset for the 7 canonical offsets; parent() must
    # invert that exactly (M = [[2, -1], [1, 3]] in axial columns)
    offsets = [(0, 0), (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    rng = np.random.default_rng(1)
    for _ in range(200):
        pq, pr = int(rng.integers(-1000, 1000)), int(rng.integers(-1000, 1000))
        cq0, cr0 = 2 * pq - pr, pq + 3 * pr
        for oq, orr in offsets:
            got = parent(HexCellId(9, cq0 + oq, cr0 + orr), spec)
            assert (got.resolution, got.q, got.r) == (8, pq, pr)


def test_pack_known_value():
    assert pack(HexCellId(7, 0, 0)) == 0x7000000000000000


def test_pack_unpack_bijection():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        c = HexCellId(int(rng.integers(0, 16)),
                      int(rng.integers(-(1 << 27), (1 << 27))),
                      int(rng.integers(-(1 << 27), (1 << 27))))
        assert unpack(pack(c)) == c


def test_format_parse_roundtrip():
    c = HexCellId(7, -3, 12)
    s = format_cell_id(c)
    assert len(s) == 16 and s == s.upper()
    assert parse_cell_id(s) == c


def test_parse_rejects_garbage():
    with pytest.raises((DomainError, ValueError)):
        parse_cell_id("nope")


def test_validation_errors():
    with pytest.raises(DomainError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(DomainError):
        GeoPoint(0.0, 181.0)
    with pytest.raises(DomainError):
        HexCellId(16, 0, 0)
    with pytest.raises(DomainError):
        HexCellId(7, 1 << 27, 0)
    with pytest.raises(DomainError):
        GridSpec(origin=ORIGIN, ref_edge_m=-1.0)
