from collections import Counter
from itertools import combinations

import numpy as np
import pytest

from suzuki_tower import constructions as C
from suzuki_tower import embed as E
from suzuki_tower import geometry as G
from suzuki_tower import valuations as V


# -- test-side oracles -------------------------------------------------------

def oracle_offset(f1, f2):
    """All admissible offsets, straight from the definition."""
    return [e for e in (-1, 0, 1) if all(abs(a - b + e) <= 1 for a, b in zip(f1, f2))]


def oracle_star(f1, f2):
    eps = oracle_offset(f1, f2)
    assert eps, "not neighbouring"
    e = eps[0]
    raw = [a - 1 if a == b - e else max(a, b - e) for a, b in zip(f1, f2)]
    m = min(raw)
    return tuple(v - m for v in raw)


def oracle_valuations(g):
    """Index-order backtracking; a line is tested once its last point is set."""
    n, d = g.num_points, g.diameter
    closing = [[] for _ in range(n)]
    for line in g.lines:
        closing[max(line)].append(line)
    vals, out = [0] * n, []

    def go(i):
        if i == n:
            if 0 in vals:
                out.append(tuple(vals))
            return
        for v in range(d + 1):
            vals[i] = v
            if all(sorted(vals[p] for p in l)[1:] == [min(vals[p] for p in l) + 1] * 2 for l in closing[i]):
                go(i + 1)

    go(0)
    return sorted(out)


def as_tuples(vals):
    return sorted(tuple(f.values.tolist()) for f in vals)


@pytest.fixture(scope="module")
def grid():
    L = G.line_geometry()
    return G.direct_product(L, L, "grid")


# -- basics ------------------------------------------------------------------

def test_single_line_valuations():
    L = G.line_geometry()
    f = V.classical_valuation(L, 1)
    assert f.distribution() == (1, 2)
    assert V.hyperplane_of(f) == frozenset({1})
    assert as_tuples(V.enumerate_valuations(L)) == [(0, 1, 1), (1, 0, 1), (1, 1, 0)]


def test_all_zero_is_not_a_valuation(grid):
    v = V.is_valuation(grid, [0] * 9)
    assert not v and v.detail["values"] == (0, 0, 0)
    assert v.witness in grid.lines


def test_is_valuation_rejects_positive_minimum(grid):
    f = V.classical_valuation(grid, 0).values + 1
    v = V.is_valuation(grid, f)
    assert not v and v.detail["minimum"] == 1


def test_is_valuation_needs_three_point_lines():
    with pytest.raises(V.ValuationError):
        V.is_valuation(G.Geometry(2, [[0, 1]]), [0, 1])


def test_valid_rows_agrees_with_is_valuation(grid):
    rng = np.random.default_rng(0)
    m = rng.integers(0, 3, size=(3000, 9))
    m[:5] = [V.classical_valuation(grid, x).values for x in range(5)]
    fast = V.valid_rows(grid, m)
    slow = np.array([V.is_valuation(grid, row).ok for row in m])
    assert (fast == slow).all() and fast[:5].all()


def test_valuation_is_read_only():
    f = V.Valuation([0, 1, 1])
    with pytest.raises(ValueError):
        f.values[0] = 3
    assert f == V.Valuation((0, 1, 1)) and hash(f) == hash(V.Valuation((0, 1, 1)))


# -- enumeration against oracles ---------------------------------------------

def test_grid_valuations_match_oracle(grid):
    fast = V.enumerate_valuations(grid)
    assert len(fast) == 15
    assert as_tuples(fast) == oracle_valuations(grid)
    assert fast == V.brute_force_valuations(grid)


def test_w2_valuations_classical_and_ovoidal():
    g = C.build_w2().geometry
    fast = V.enumerate_valuations(g)
    assert as_tuples(fast) == oracle_valuations(g)
    assert len(fast) == 21
    zeros = Counter(len(f.zero_set) for f in fast)
    assert zeros == {1: 15, 5: 6}
    d = g.distance_matrix
    for f in fast:
        if len(f.zero_set) == 5:
            # an ovoid: pairwise non-collinear and meeting every line
            assert all(d[a, b] == 2 for a, b in combinations(f.zero_set, 2))
            assert all(set(l) & set(f.zero_set) for l in g.lines)


def test_h21_valuations_match_oracle(ws):
    g = ws.geometry("H21")
    fast = V.enumerate_valuations(g)
    assert as_tuples(fast) == oracle_valuations(g)
    assert fast == V.exhaustive_valuations(g)


def test_enumeration_is_sorted_and_distinct(grid):
    vals = V.enumerate_valuations(grid)
    keys = [f.values.tolist() for f in vals]
    assert keys == sorted(keys) and len(set(map(tuple, keys))) == len(keys)


def test_parallel_enumeration_is_identical(grid):
    one = V.enumerate_valuations(grid)
    assert V.enumerate_valuations(grid, workers=3) == one


def test_progress_reports_every_root(grid):
    seen = []
    V.enumerate_valuations(grid, progress=lambda r, vecs: seen.append((r, len(vecs))))
    assert [r for r, _ in seen] == list(range(9))
    assert sum(k for _, k in seen) == 15


def test_brute_force_refuses_large_inputs(ws):
    with pytest.raises(V.ValuationError):
        V.brute_force_valuations(ws.geometry("H2D"))


def test_disconnected_geometry_rejected():
    with pytest.raises(V.ValuationError):
        V.enumerate_valuations(G.Geometry(6, [[0, 1, 2], [3, 4, 5]]))


# -- neighbouring and the product --------------------------------------------

def test_offset_matches_definition(grid):
    vals = V.enumerate_valuations(grid)
    for f1 in vals:
        for f2 in vals:
            got = V.are_neighboring(f1, f2)
            adm = oracle_offset(f1.values.tolist(), f2.values.tolist())
            if f1 == f2:
                assert got == 0 and adm == [-1, 0, 1]
            elif not adm:
                assert got is None
            else:
                assert adm == [got]


def test_star_matches_oracle_and_closes_lines(grid):
    vals = V.enumerate_valuations(grid)
    keys = {f.key for f in vals}
    for f1 in vals:
        for f2 in vals:
            if V.are_neighboring(f1, f2) is None:
                with pytest.raises(V.ValuationError):
                    V.star(f1, f2)
                continue
            f3 = V.star(f1, f2)
            assert tuple(f3.values.tolist()) == oracle_star(f1.values.tolist(), f2.values.tolist())
            assert f3.key in keys
            assert V.star(f2, f1) == f3
            assert V.star(f1, f3) == f2 and V.star(f2, f3) == f1


def test_star_rows_agrees_with_star(grid):
    vals = V.enumerate_valuations(grid)
    pairs = [(a, b) for a in vals for b in vals if V.are_neighboring(a, b) is not None]
    A = np.stack([a.values for a, _ in pairs])
    B = np.stack([b.values for _, b in pairs])
    mask, prod = V.star_rows(A, B)
    assert mask.all()
    assert [tuple(r) for r in prod.tolist()] == [tuple(V.star(a, b).values.tolist()) for a, b in pairs]


def test_collinear_classical_valuations(ws):
    g = ws.geometry("HJ")
    x, y, z = g.lines[0]
    fx, fy, fz = (V.classical_valuation(g, p) for p in (x, y, z))
    assert V.are_neighboring(fx, fy) is not None
    assert V.star(fx, fy) == fz
    far = int(np.nonzero(g.distance_matrix[x] == 4)[0][0])
    assert V.are_neighboring(fx, V.classical_valuation(g, far)) is None


def test_classical_valuation_distributions(ws):
    assert V.classical_valuation(ws.geometry("H2D"), 5).distribution() == (1, 6, 24, 32)
    assert V.classical_valuation(ws.geometry("HJ"), 7).distribution() == (1, 10, 80, 160, 64)


# -- tables --------------------------------------------------------------------

def test_h2d_types(ws):
    vals, types = ws.valuations("H2D")
    assert len(vals) == 1575
    assert Counter(types) == {"A": 63, "B": 252, "C": 252, "D": 1008}
    by = {t: f for f, t in zip(vals, types)}
    assert V.signature(by["B"], 4) == V.ValuationSignature(3, 1, (1, 14, 32, 16))
    d = by["D"]
    assert V.is_valuation(ws.geometry("H2D"), d.values) and d.max_value == 2 and len(d.zero_set) == 5
    sizes = {t: len(V.hyperplane_of(f)) for f, t in zip(vals, types)}
    assert sizes == {"A": 31, "B": 47, "C": 23, "D": 31}


def test_h2d_type_table_rows(ws):
    rows = V.table_types(ws.vgeom("H2D"), V.TABLE_H2D, V.TABLE_H2D_HYPERPLANES)
    assert [r["type"] for r in rows] == ["A", "B", "C", "D"]
    assert all(r["pass"] for r in rows)


def test_h2d_line_table(ws):
    vg = ws.vgeom("H2D")
    rows = V.table_incidences(vg, V.TABLE_H2D_LINES)
    assert len(rows) == 11 * 4 and all(r["pass"] for r in rows)
    d_profile = {r["line_type"]: r["observed"] for r in rows if r["point_type"] == "D" and r["observed"]}
    assert d_profile == {"ADD": 3, "BDD": 2, "CCD": 5, "CDD": 2, "DDD": 10}


def test_vlines_are_star_closed(ws):
    vg = ws.vgeom("H2D")
    rng = np.random.default_rng(3)
    for li in rng.choice(len(vg.vlines), 300, replace=False):
        a, b, c = (vg.valuations[i] for i in vg.vlines[li])
        assert len({a.key, b.key, c.key}) == 3
        assert V.star(a, b) == c and V.star(b, c) == a and V.star(a, c) == b


def test_hj_types(ws):
    vals, types = ws.valuations("HJ")
    assert len(vals) == 7119
    assert Counter(types) == {"A": 315, "B": 630, "C": 3150, "D": 1008, "E": 2016}
    sig = {t: V.signature(f, 5) for f, t in zip(vals, types)}
    assert sig["E"] == V.ValuationSignature(2, 25, (25, 130, 160, 0, 0))
    assert sig["C"] == V.ValuationSignature(3, 1, (1, 26, 128, 160, 0))


def test_hj_line_table(ws):
    vg = ws.vgeom("HJ")
    rows = V.table_incidences(vg, V.TABLE_HJ_LINES)
    assert len(rows) == 10 * 5 and all(r["pass"] for r in rows)
    prof = lambda pt: {r["line_type"]: r["observed"] for r in rows if r["point_type"] == pt and r["observed"]}
    assert prof("C") == {"ACC": 1, "BBC": 1, "CCC": 9, "CDD": 4}
    assert prof("A") == {"AAA": 5, "ABB": 1, "ACC": 5}


def test_assign_types_rejects_wrong_counts(ws):
    vals, _ = ws.valuations("H2D")
    with pytest.raises(V.ValuationError, match="table says"):
        V.assign_types(vals[:-1], V.TABLE_H2D)
    with pytest.raises(V.ValuationError, match="matches no table row"):
        V.assign_types(vals, V.TABLE_HJ)


# -- structure checks ----------------------------------------------------------

def test_ccc_lines(ws):
    vg = ws.vgeom("HJ")
    v = V.classify_ccc_lines(vg)
    assert v.ok
    assert v.detail == {"special": 1050, "ordinary": 3150 * 9 // 3 - 1050}


def test_connectivity_checks(ws):
    b = V.lemma_b_connectivity(ws.vgeom("H2D"))
    assert b.ok and b.detail["vertices"] == 252 and b.detail["components"] == 1
    c = V.lemma_c_connectivity(ws.vgeom("HJ"))
    assert c.ok and c.detail["vertices"] == 3150


def test_b_lines_bijection(ws):
    v = V.lemma_b_lines_bijection(ws.vgeom("HJ"))
    assert v.ok and v.detail["checked"] == 630


def test_bc_noncollinear_in_valuation_geometry(ws):
    vg = ws.vgeom("HJ")
    v = V.lemma_bc_noncollinear(vg)
    assert v.ok
    # under the zero-point reading the statement fails; the witness shows why
    assert v.detail["zero_point_reading"] is False
    f, g_, h = v.detail["zero_point_witness"]
    assert vg.types[f] == "C" and not vg.are_collinear(g_, h)
    d = vg.geometry.distance_matrix
    assert any(d[a, b] == 1 for a in vg.valuations[g_].zero_set for b in vg.valuations[h].zero_set)


# -- models and induced valuations ---------------------------------------------

def test_vab_model(ws):
    mg, pts = V.subgeometry_by_types(ws.vgeom("H2D"), "AB", ("AAA", "ABB", "BBB"), "VAB")
    assert (mg.num_points, mg.num_lines) == (315, 525)
    assert tuple(G.order_of(mg)) == (2, 4) and G.is_near_polygon(mg)
    assert G.intersection_array(mg) == G.intersection_array(ws.geometry("HJ"))
    a_part, _ = V.subgeometry_by_types(ws.vgeom("H2D"), "A", ("AAA",))
    res = G.graph_isomorphic(a_part, ws.geometry("H2D"), first_targets=ws.orbit_reps("H2D"))
    assert res.found


def test_subgeometry_rejects_foreign_line_types(ws):
    with pytest.raises(V.ValuationError):
        V.subgeometry_by_types(ws.vgeom("H2D"), "A", ("ABB",))


def test_induced_on_identity_embedding_is_classical(ws):
    g = ws.geometry("H2D")
    ind = V.induced_valuations(E.identity_embedding(g))
    assert all(ind.verdicts.values())
    assert (ind.distance == 0).all()
    assert (ind.matrix == g.distance_matrix).all()


def test_induced_types_of_hj_over_h2d(ws):
    ind = V.induced_valuations(ws.embedding("H2D", "HJ").embedding)
    assert all(ind.verdicts.values())
    assert Counter(V.type_lookup(ws.vgeom("H2D"), ind.matrix)) == {"A": 63, "B": 252}


def test_induced_types_of_g24_over_hj(ws):
    ind = V.induced_valuations(ws.embedding("HJ", "G24").embedding)
    assert all(ind.verdicts.values())
    types = V.type_lookup(ws.vgeom("HJ"), ind.matrix)
    assert Counter(types) == {"A": 315, "B": 630, "C": 3150}
    # every point is within distance 1 of the embedded copy
    assert set(ind.distance.tolist()) == {0, 1}
    assert {t for t, d in zip(types, ind.distance.tolist()) if d == 0} == {"A"}


def test_induced_rejects_bad_embedding(grid):
    L = G.line_geometry()
    bad = E.embedding_from_map(L, grid, [0, 1, 3])
    with pytest.raises(G.GeometryError):
        V.induced_valuations(bad)


# -- cache formats ---------------------------------------------------------------

def test_valuation_file_roundtrip(grid):
    vals = V.enumerate_valuations(grid)
    text = V.format_valuations(grid, vals)
    assert text.startswith(f"VALS v1 {grid.digest()} 15\n")
    assert V.parse_valuations(text, grid) == vals
    with pytest.raises(V.ValuationError):
        V.parse_valuations(text, C.build_w2().geometry)
    with pytest.raises(V.ValuationError):
        V.parse_valuations(text.rsplit("\n", 2)[0] + "\n", grid)


def test_vgeometry_file_roundtrip(ws):
    vg = ws.vgeom("HJ")
    text = V.format_vgeometry(vg)
    back = V.parse_vgeometry(text, vg.geometry, vg.valuations)
    assert back.vlines == vg.vlines and back.types == vg.types and back.special == vg.special
    assert V.format_vgeometry(back) == text
    assert sum(1 for ln in text.splitlines() if ln.endswith(" special")) == 1050
