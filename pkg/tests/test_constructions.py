from itertools import combinations

import pytest

from suzuki_tower import constructions as C
from suzuki_tower import embed as E
from suzuki_tower import geometry as G
from suzuki_tower.perm import GeneratorSet, Permutation


def test_fano_plane_is_a_projective_plane():
    lines = C.fano_plane()
    assert len(set(lines)) == 7
    for a, b in combinations(range(7), 2):
        assert sum(a in l and b in l for l in lines) == 1


def test_h21():
    ng = C.build_h21()
    assert ng.verify() == []
    assert ng.statistics() == {
        "name": "H21", "points": 21, "lines": 14, "order": [2, 1], "diameter": 3, "near_polygon": True,
    }
    assert G.is_generalized_polygon(ng.geometry)


def test_w2_is_a_quadrangle():
    ng = C.build_w2()
    assert ng.verify() == []
    assert G.is_nondegenerate_gq(ng.geometry)
    assert G.find_quads(ng.geometry)[0].tag == "W2"


def test_l3_cubed_count_identity():
    g = C.build_l3_cubed().geometry
    assert C.build_l3_cubed().verify() == []
    assert G.check_count_identity(g)
    # n2 = (v + 9) / 3 points at distance 2 from a point
    assert g.distance_distribution(0)[2] == (27 + 9) // 3 == 12


def test_verify_reports_wrong_statistics():
    ng = C.NamedGeometry("H21", C.build_w2().geometry)
    problems = ng.verify()
    assert "points 15 != 21" in problems
    assert any(p.startswith("order") for p in problems)


def test_orbit_representatives():
    # (0 1)(2 3) and (1 2) generate a transitive group on 4 points; 4 is fixed
    assert C.orbit_representatives(5, [[1, 0, 3, 2, 4], [0, 2, 1, 3, 4]]) == [0, 4]


def test_line_action_rejects_non_automorphism():
    g = G.Geometry(4, [[0, 1, 2]])
    gens = GeneratorSet(4, (Permutation([0, 1, 3, 2]),))
    with pytest.raises(C.ConstructionError):
        C.line_action(gens, g)


def test_wrong_degree_rejected():
    gens = GeneratorSet(4, (Permutation([1, 0, 2, 3]),))
    with pytest.raises(C.ConstructionError, match="63-point"):
        C.build_hexagons_2_2(gens)
    with pytest.raises(C.ConstructionError, match="degree 4"):
        C.build_hj(gens)
    with pytest.raises(C.ConstructionError, match="degree 4"):
        C.build_g24(gens)


def test_hexagons_of_order_two_two(ws):
    h2, h2d = ws.named("H2"), ws.named("H2D")
    for ng in (h2, h2d):
        assert ng.verify() == []
        assert G.check_count_identity(ng.geometry)
        assert ng.geometry.distance_distribution(0) == [1, 6, 24, 32]
        assert ng.geometry.distance_distribution(0)[2] == (63 + 9) // 3
    assert h2.geometry != h2d.geometry
    h21 = ws.geometry("H21")
    assert ws.embedding("H21", "H2D").status == E.FOUND
    assert ws.embedding("H21", "H2").status == E.NONE
    emb = E.embedding_from_map(h21, h2d.geometry, h2d.extra["h21_embedding"])
    assert E.verify_embedding(emb)


def test_hexagons_are_dual(ws):
    h2, h2d = ws.geometry("H2"), ws.geometry("H2D")
    res = G.graph_isomorphic(G.dual(h2), h2d, first_targets=ws.orbit_reps("H2D"))
    assert res.status == E.FOUND


def test_hj(ws):
    ng = ws.named("HJ")
    assert ng.verify() == []
    assert ng.provenance["class_size"] == 315
    assert ng.provenance["rejected_pairs"] == 0
    assert G.intersection_array(ng.geometry) == ((10, 8, 8, 2), (1, 1, 4, 5))
    assert G.check_count_identity(ng.geometry)


def test_hj_lines_are_products(ws):
    ng = ws.named("HJ")
    from suzuki_tower.perm import compose

    cls = ng.extra["class"]
    for a, b, c in ng.geometry.lines[:50]:
        assert compose(cls[a], cls[b]) == cls[c]


def test_g24(ws):
    ng = ws.named("G24")
    assert ng.verify() == []
    assert ng.provenance["class_size"] == 4095
    assert ng.provenance["orbit_sizes"] == [1365, 13650, 27300]
    assert G.check_count_identity(ng.geometry)
    assert ng.geometry.distance_distribution(0) == _bfs_distribution(ng.geometry, 0)
    assert ng.geometry.distance_distribution(0)[1] == 22


def _bfs_distribution(g, root):
    """Independent level count via plain breadth-first search over lines."""
    on = [[] for _ in range(g.num_points)]
    for line in g.lines:
        for p in line:
            on[p].append(line)
    dist = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for x in frontier:
            for line in on[x]:
                for y in line:
                    if y not in dist:
                        dist[y] = dist[x] + 1
                        nxt.append(y)
        frontier = nxt
    counts = [0] * (max(dist.values()) + 1)
    for v in dist.values():
        counts[v] += 1
    return counts


def test_tower_embeddings(ws):
    for small, big in (("H21", "H2D"), ("H2D", "HJ"), ("HJ", "G24")):
        res = ws.embedding(small, big)
        assert res.status == E.FOUND, (small, big)
        assert E.verify_embedding(res.embedding)


def test_cached_geometries_reload_identically(ws, tmp_path):
    from suzuki_tower import pipeline as PL

    other = PL.Workspace(PL.PipelineConfig(cache_dir=ws.config.cache_dir))
    for name in ("H21", "H2", "H2D", "HJ"):
        assert other.geometry(name) == ws.geometry(name)
