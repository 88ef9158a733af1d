"""Full isometric embeddings between geometries: search, verification, projection."""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Geometry, GeometryError, Verdict

FOUND = "found"
NONE = "none"
BUDGET = "budget exceeded"


@dataclass(frozen=True)
class EmbeddingMap:
    source: Geometry
    target: Geometry
    point_map: tuple[int, ...]

    def __post_init__(self):
        if len(self.point_map) != self.source.num_points:
            raise GeometryError("point map length differs from the source point count")

    @property
    def image(self) -> tuple[int, ...]:
        return tuple(sorted(self.point_map))

    def __getitem__(self, x: int) -> int:
        return self.point_map[x]


@dataclass(frozen=True)
class SearchResult:
    status: str
    embedding: EmbeddingMap | None = None
    nodes: int = 0

    @property
    def found(self) -> bool:
        return self.status == FOUND


def verify_embedding(e: EmbeddingMap) -> Verdict:
    """Injective, full (lines onto whole lines) and distance preserving."""
    src, tgt = e.source, e.target
    phi = np.asarray(e.point_map, dtype=np.int64)
    if phi.min() < 0 or phi.max() >= tgt.num_points:
        return Verdict(False, {"reason": "image out of range"})
    if np.unique(phi).size != phi.size:
        vals, counts = np.unique(phi, return_counts=True)
        return Verdict(False, {"reason": "not injective"}, int(vals[counts > 1][0]))
    tlines = tgt.line_index
    for line in src.lines:
        img = tuple(sorted(int(phi[p]) for p in line))
        if img not in tlines:
            return Verdict(False, {"reason": "line not mapped onto a line"}, line)
    ds = src.distance_matrix
    dt = tgt.distance_matrix[np.ix_(phi, phi)]
    bad = np.argwhere(ds != dt)
    if len(bad):
        x, y = map(int, bad[0])
        return Verdict(
            False,
            {"reason": "distance not preserved", "source": int(ds[x, y]), "target": int(dt[x, y])},
            (x, y),
        )
    return Verdict(True)


def bfs_order(g: Geometry, root: int | None = None) -> tuple[list[int], list[int]]:
    """BFS order from ``root`` (default: a maximum-degree point) and parent array."""
    if root is None:
        degs = [len(x) for x in g.lines_through]
        root = int(np.argmax(degs))
    parent = [-1] * g.num_points
    seen = [False] * g.num_points
    seen[root] = True
    order = [root]
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in g.neighbors[x]:
            y = int(y)
            if not seen[y]:
                seen[y] = True
                parent[y] = x
                order.append(y)
                queue.append(y)
    return order, parent


def _search(
    small: Geometry,
    big: Geometry,
    budget: int,
    first_targets: Iterable[int] | None = None,
    bijective: bool = False,
) -> SearchResult:
    """Backtracking over point assignments of ``small`` in BFS order.

    A point's candidates are the neighbours of its parent's image whose
    distances to every image so far match the source distances.  Two mapped
    points of a line leave exactly one candidate for the third one, so lines
    close immediately.
    """
    order, parent = bfs_order(small)
    if len(order) != small.num_points:
        raise GeometryError("source geometry must be connected")
    ds = small.distance_matrix
    dt = big.distance_matrix
    n = len(order)
    src_rows = [ds[u, order[:k]] for k, u in enumerate(order)]
    big_nbrs = big.neighbors
    src_deg = [len(x) for x in small.lines_through]
    big_deg = np.array([len(x) for x in big.lines_through])

    root = order[0]
    if first_targets is None:
        first = np.arange(big.num_points)
    else:
        first = np.array(sorted(set(int(t) for t in first_targets)), dtype=np.int64)
    if bijective:
        want = np.bincount(ds[root], minlength=256)
        first = np.array(
            [t for t in first if np.array_equal(np.bincount(dt[t], minlength=256), want)],
            dtype=np.int64,
        )
    else:
        first = first[big_deg[first] >= src_deg[root]]

    images = np.empty(n, dtype=np.int64)  # images[k] = image of order[k]
    pos = {u: k for k, u in enumerate(order)}
    parent_pos = [pos[parent[u]] if parent[u] >= 0 else -1 for u in order]
    candidates: list[np.ndarray] = [first] + [None] * (n - 1)
    cursor = [0] * n
    nodes = 0
    level = 0
    while level >= 0:
        cands = candidates[level]
        if cursor[level] >= len(cands):
            level -= 1
            continue
        images[level] = cands[cursor[level]]
        cursor[level] += 1
        nodes += 1
        if nodes > budget:
            return SearchResult(BUDGET, None, nodes)
        if level == n - 1:
            phi = [0] * n
            for k, u in enumerate(order):
                phi[u] = int(images[k])
            emb = EmbeddingMap(small, big, tuple(phi))
            if verify_embedding(emb).ok:
                return SearchResult(FOUND, emb, nodes)
            continue
        nxt = level + 1
        pimg = images[parent_pos[nxt]]
        cand = big_nbrs[pimg]
        mapped = images[:nxt]
        ok = (dt[np.ix_(cand, mapped)] == src_rows[nxt]).all(axis=1)
        candidates[nxt] = cand[ok]
        cursor[nxt] = 0
        level = nxt
    return SearchResult(NONE, None, nodes)


def find_embedding(
    small: Geometry,
    big: Geometry,
    budget: int = 10**9,
    first_targets: Iterable[int] | None = None,
) -> SearchResult:
    """Search for a full isometric embedding of ``small`` into ``big``.

    ``first_targets`` restricts where the first source point may go (orbit
    representatives of a transitive automorphism group suffice).  "none" is
    reported only after the search space is exhausted.
    """
    if small.num_points > big.num_points:
        return SearchResult(NONE)
    return _search(small, big, budget, first_targets)


def find_isomorphism(
    g1: Geometry, g2: Geometry, budget: int = 10**7, first_targets=None
) -> SearchResult:
    if g1.num_points != g2.num_points or g1.num_lines != g2.num_lines:
        return SearchResult(NONE)
    inv1 = sorted(tuple(g1.distance_distribution(x)) for x in range(g1.num_points))
    inv2 = sorted(tuple(g2.distance_distribution(x)) for x in range(g2.num_points))
    if inv1 != inv2:
        return SearchResult(NONE)
    return _search(g1, g2, budget, first_targets, bijective=True)


def distance_to_image(e: EmbeddingMap) -> np.ndarray:
    img = np.asarray(e.point_map, dtype=np.int64)
    return e.target.distance_matrix[:, img].min(axis=1)


def projection(e: EmbeddingMap, x: int) -> int | None:
    """Unique image point collinear with ``x`` (or ``x`` itself if it is an image point)."""
    img = np.asarray(e.point_map, dtype=np.int64)
    row = e.target.distance_matrix[x, img]
    if (row == 0).any():
        return int(x)
    close = img[row == 1]
    if len(close) == 1:
        return int(close[0])
    return None


def format_embedding(e: EmbeddingMap) -> str:
    head = f"EMB v1 {e.source.digest()} {e.target.digest()}"
    return head + "\n" + "\n".join(map(str, e.point_map)) + "\n"


def parse_embedding(text: str, source: Geometry, target: Geometry) -> EmbeddingMap:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["EMB", "v1"]:
        raise GeometryError("bad embedding header")
    if head[2] != source.digest() or head[3] != target.digest():
        raise GeometryError("embedding digests do not match the given geometries")
    phi = tuple(int(x) for x in lines[1:] if x.strip())
    return EmbeddingMap(source, target, phi)


def identity_embedding(g: Geometry) -> EmbeddingMap:
    return EmbeddingMap(g, g, tuple(range(g.num_points)))


def embedding_from_map(small: Geometry, big: Geometry, phi: Sequence[int]) -> EmbeddingMap:
    return EmbeddingMap(small, big, tuple(int(p) for p in phi))


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
