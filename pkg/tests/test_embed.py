import numpy as np
import pytest

from suzuki_tower import embed as E
from suzuki_tower import geometry as G


@pytest.fixture
def chain():
    return G.Geometry(7, [[0, 1, 2], [2, 3, 4], [4, 5, 6]], "chain")


@pytest.fixture
def cycle():
    return G.Geometry(8, [[0, 1, 2], [2, 3, 4], [4, 5, 6], [6, 7, 0]], "cycle")


def test_identity_embedding_verifies(chain):
    assert E.verify_embedding(E.identity_embedding(chain))


def test_inclusion_into_cycle_is_not_isometric(chain, cycle):
    # 0 and 5 are three apart in the chain but two apart in the cycle (via 6)
    v = E.verify_embedding(E.embedding_from_map(chain, cycle, range(7)))
    assert not v
    assert v.detail == {"reason": "distance not preserved", "source": 3, "target": 2}
    assert v.witness == (0, 5)


def test_chain_has_no_isometric_copy_in_cycle(chain, cycle):
    assert E.find_embedding(chain, cycle).status == E.NONE


def test_verify_rejects_non_injective_and_broken_lines(chain):
    v = E.verify_embedding(E.embedding_from_map(chain, chain, [0, 0, 2, 3, 4, 5, 6]))
    assert not v and v.detail["reason"] == "not injective"
    v = E.verify_embedding(E.embedding_from_map(chain, chain, [0, 1, 3, 2, 4, 5, 6]))
    assert not v and v.detail["reason"] == "line not mapped onto a line"
    with pytest.raises(G.GeometryError):
        E.embedding_from_map(chain, chain, [0, 1])


def test_line_embeds_in_grid():
    L = G.line_geometry()
    grid = G.direct_product(L, L)
    res = E.find_embedding(L, grid)
    assert res.found and E.verify_embedding(res.embedding)
    assert res.embedding.image in grid.lines


def test_budget_is_reported(ws):
    res = E.find_embedding(ws.geometry("H21"), ws.geometry("H2"), budget=5)
    assert res.status == E.BUDGET and res.embedding is None


def test_bigger_source_has_no_embedding(chain):
    assert E.find_embedding(chain, G.line_geometry()).status == E.NONE


def test_isomorphism_requires_equal_invariants(chain, cycle):
    assert E.find_isomorphism(chain, cycle).status == E.NONE


def test_isomorphism_of_relabeled_h21(ws):
    g = ws.geometry("H21")
    perm = np.random.default_rng(2).permutation(21).tolist()
    res = E.find_isomorphism(g, g.relabel(perm))
    assert res.found
    assert sorted(res.embedding.point_map) == list(range(21))


def test_projection_onto_subhexagon(ws):
    emb = ws.embedding("H21", "H2D").embedding
    d = E.distance_to_image(emb)
    assert d.max() == 1
    h2d = ws.geometry("H2D")
    img = set(emb.point_map)
    for x in range(h2d.num_points):
        p = E.projection(emb, x)
        if x in img:
            assert p == x
        else:
            assert p in img and h2d.distance_matrix[x, p] == 1


def test_projection_none_when_ambiguous():
    L = G.line_geometry()
    grid = G.direct_product(L, L)
    # image is a single line {0,1,2}; point 4 is collinear with exactly 1 of it
    emb = E.embedding_from_map(L, grid, [0, 1, 2])
    assert E.projection(emb, 4) == 1
    # two image points collinear with x: use the 4-point path with two lines
    g = G.Geometry(5, [[0, 1, 2], [2, 3, 4], [0, 3]])
    sub = G.Geometry(2, [[0, 1]])
    assert E.projection(E.embedding_from_map(sub, g, [0, 4]), 3) is None


def test_embedding_file_roundtrip(chain):
    emb = E.identity_embedding(chain)
    text = E.format_embedding(emb)
    assert text.startswith("EMB v1 ")
    assert E.parse_embedding(text, chain, chain) == emb


def test_embedding_file_digest_mismatch(chain, cycle):
    text = E.format_embedding(E.identity_embedding(chain))
    with pytest.raises(G.GeometryError, match="digests"):
        E.parse_embedding(text, chain, cycle)
    with pytest.raises(G.GeometryError, match="header"):
        E.parse_embedding("EMB v2\n", chain, chain)


def test_bfs_order_covers_and_parents_are_earlier(ws):
    g = ws.geometry("HJ")
    order, parent = E.bfs_order(g)
    assert sorted(order) == list(range(g.num_points))
    pos = {u: k for k, u in enumerate(order)}
    for u in order[1:]:
        assert pos[parent[u]] < pos[u] and g.distance_matrix[u, parent[u]] == 1
