"""Valuations of near polygons with three points per line.

A valuation assigns integers to points so that the minimum is 0 and every
line carries values ``{k, k+1, k+1}``.  This module enumerates them, forms
the ``*``-product, builds valuation geometries and reproduces the type and
incidence tables for H(2)^D and HJ.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .embed import EmbeddingMap, verify_embedding
from .geometry import Geometry, GeometryError, Verdict, order_of

# Expected valuation types: label -> (count, M_f, |O_f|, value distribution).
TABLE_H2D = {
    "A": (63, 3, 1, (1, 6, 24, 32)),
    "B": (252, 3, 1, (1, 14, 32, 16)),
    "C": (252, 2, 1, (1, 22, 40, 0)),
    "D": (1008, 2, 5, (5, 26, 32, 0)),
}
TABLE_H2D_HYPERPLANES = {"A": 31, "B": 47, "C": 23, "D": 31}

# Lines of the valuation geometry: line type -> {point type: lines through such a point}.
TABLE_H2D_LINES = {
    "AAA": {"A": 3},
    "ABB": {"A": 2, "B": 1},
    "ACC": {"A": 2, "C": 1},
    "ADD": {"A": 24, "D": 3},
    "BBB": {"B": 4},
    "BCC": {"B": 1, "C": 2},
    "BDD": {"B": 4, "D": 2},
    "CCC": {"C": 8},
    "CCD": {"C": 40, "D": 5},
    "CDD": {"C": 4, "D": 2},
    "DDD": {"D": 10},
}

TABLE_HJ = {
    "A": (315, 4, 1, (1, 10, 80, 160, 64)),
    "B": (630, 3, 1, (1, 10, 112, 192, 0)),
    "C": (3150, 3, 1, (1, 26, 128, 160, 0)),
    "D": (1008, 2, 5, (5, 110, 200, 0, 0)),
    "E": (2016, 2, 25, (25, 130, 160, 0, 0)),
}
TABLE_HJ_LINES = {
    "AAA": {"A": 5},
    "ABB": {"A": 1, "B": 1},
    "ACC": {"A": 5, "C": 1},
    "BBB": {"B": 5},
    "BBC": {"B": 10, "C": 1},
    "CCC": {"C": 9},
    "CDD": {"C": 4, "D": 25},
    "DDD": {"D": 6},
    "DEE": {"D": 1, "E": 1},
    "EEE": {"E": 6},
}

TABLES = {
    "h2d": (TABLE_H2D, TABLE_H2D_LINES),
    "hj": (TABLE_HJ, TABLE_HJ_LINES),
}


class ValuationError(ValueError):
    pass


class Valuation:
    """Integer labelling of the points of a geometry (read-only int8 vector)."""

    __slots__ = ("values", "geometry", "_key", "__dict__")

    def __init__(self, values: Iterable[int], geometry: Geometry | None = None):
        arr = np.array(values, dtype=np.int8)
        arr.flags.writeable = False
        self.values = arr
        self.geometry = geometry
        self._key = arr.tobytes()

    @property
    def key(self) -> bytes:
        return self._key

    def __eq__(self, other):
        return isinstance(other, Valuation) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other):
        return self.values.tolist() < other.values.tolist()

    def __len__(self):
        return int(self.values.size)

    def __getitem__(self, x):
        return int(self.values[x])

    def __repr__(self):
        return f"Valuation(M={self.max_value}, |O|={len(self.zero_set)})"

    @cached_property
    def max_value(self) -> int:
        return int(self.values.max())

    @cached_property
    def zero_set(self) -> tuple[int, ...]:
        return tuple(np.nonzero(self.values == 0)[0].tolist())

    def distribution(self, length: int | None = None) -> tuple[int, ...]:
        counts = np.bincount(self.values.astype(np.int64), minlength=length or 0)
        return tuple(int(c) for c in counts)


@dataclass(frozen=True)
class ValuationSignature:
    max_value: int
    zero_count: int
    distribution: tuple[int, ...]


def signature(f: Valuation, length: int | None = None) -> ValuationSignature:
    if length is None and f.geometry is not None:
        length = f.geometry.diameter + 1
    return ValuationSignature(f.max_value, len(f.zero_set), f.distribution(length))


def is_valuation(g: Geometry, values: Sequence[int]) -> Verdict:
    """Minimum 0 and every line of the form ``{k, k+1, k+1}``."""
    vals = np.asarray(values, dtype=np.int64)
    if vals.size != g.num_points:
        return Verdict(False, {"reason": "wrong length"})
    if vals.min() != 0:
        return Verdict(False, {"reason": "minimum is not 0", "minimum": int(vals.min())})
    for line in g.lines:
        if len(line) != 3:
            raise ValuationError("valuations are only defined here for 3-point lines")
        a, b, c = sorted(int(vals[p]) for p in line)
        if not (b == c == a + 1):
            return Verdict(False, {"reason": "bad line pattern", "values": (a, b, c)}, line)
    return Verdict(True)


def valid_rows(g: Geometry, matrix: np.ndarray) -> np.ndarray:
    """Vectorized :func:`is_valuation` over the rows of ``matrix``."""
    m = np.asarray(matrix)
    ok = m.min(axis=1) == 0
    for a, b, c in g.line_array.tolist():
        x, y, z = m[:, a], m[:, b], m[:, c]
        lo = np.minimum(np.minimum(x, y), z)
        hi = np.maximum(np.maximum(x, y), z)
        # {k, k+1, k+1}: range 1 and the sum is 3k + 2
        ok &= (hi - lo == 1) & (x + y + z == 3 * lo + 2)
    return ok


def classical_valuation(g: Geometry, x: int) -> Valuation:
    return Valuation(g.distance_matrix[x], g)


def hyperplane_of(f: Valuation) -> frozenset[int]:
    """Points with value below the maximum; checked to meet every line in one or all points."""
    h = f.values < f.max_value
    if f.geometry is not None:
        for line in f.geometry.lines:
            k = int(h[list(line)].sum())
            if k not in (1, len(line)):
                raise ValuationError(f"line {line} meets H_f in {k} points")
    return frozenset(np.nonzero(h)[0].tolist())


def are_neighboring(f1: Valuation, f2: Valuation) -> int | None:
    """The offset ``eps`` with ``|f1 - f2 + eps| <= 1`` everywhere, or None.

    ``f1 == f2`` returns 0.
    """
    if f1 == f2:
        return 0
    diff = f1.values.astype(np.int64) - f2.values.astype(np.int64)
    mx, mn = int(diff.max()), int(diff.min())
    if mx - mn > 2:
        return None
    return int(_offsets(np.array([mx]), np.array([mn]))[0])


def _star_values(v1: np.ndarray, v2: np.ndarray, eps) -> np.ndarray:
    shifted = v2 - eps
    out = np.where(v1 == shifted, v1 - 1, np.maximum(v1, shifted))
    return out - out.min(axis=-1, keepdims=True)


def star_rows(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise neighbouring mask and ``*``-product; non-neighbouring rows hold junk."""
    a = np.asarray(a, dtype=np.int16)
    b = np.asarray(b, dtype=np.int16)
    diff = a - b
    mx, mn = diff.max(axis=1), diff.min(axis=1)
    neighboring = mx - mn <= 2
    same = mx == mn
    if ((mx - mn == 1) & neighboring).any():
        raise ValuationError("offset is not unique for distinct valuations")
    prod = _star_values(a, b, (-1 - mn)[:, None])
    prod[same] = a[same]
    return neighboring, prod


def star(f1: Valuation, f2: Valuation) -> Valuation:
    eps = are_neighboring(f1, f2)
    if eps is None:
        raise ValuationError("star product needs neighbouring valuations")
    if f1 == f2:
        return f1
    v = _star_values(f1.values.astype(np.int64), f2.values.astype(np.int64), eps)
    return Valuation(v, f1.geometry)


# ---------------------------------------------------------------------------
# enumeration


class _RootedSearch:
    """All valuations whose lowest-index zero point is ``root``.

    Two assigned points of a line fix the third (equal values ``k`` force
    ``k-1``, values ``k, k+1`` force ``k+1``).  Every assigned value also
    bounds the rest through ``|f(x) - f(y)| <= d(x, y)``; points whose bounds
    meet are forced, crossing bounds prune the branch.  Search branches on an
    unassigned point with the fewest admissible values.
    """

    def __init__(self, g: Geometry, others):
        self.n = g.num_points
        self.others = others
        self.dist = g.distance_matrix.astype(np.int16)

    def run(self, root: int) -> list[tuple[int, ...]]:
        n = self.n
        self.root = root
        self.vals = [-1] * n
        self.out = []
        lo = np.zeros(n, dtype=np.int16)
        lo[:root] = 1
        hi = self.dist[root].copy()
        self._descend([(root, 0)], lo, hi)
        return self.out

    def _propagate(self, pending, lo, hi, trail) -> bool:
        """Line rule closure; returns False on a contradiction."""
        vals = self.vals
        others = self.others
        stack = list(pending)
        while stack:
            x, v = stack.pop()
            cur = vals[x]
            if cur >= 0:
                if cur != v:
                    return False
                continue
            if v < lo[x] or v > hi[x]:
                return False
            vals[x] = v
            trail.append(x)
            for a, b in others[x]:
                fa = vals[a]
                fb = vals[b]
                if fa >= 0:
                    if fb >= 0:
                        m = min(v, fa, fb)
                        if v + fa + fb != 3 * m + 2 or max(v, fa, fb) != m + 1:
                            return False
                    elif fa == v:
                        stack.append((b, v - 1))
                    elif fa == v + 1 or fa == v - 1:
                        stack.append((b, max(fa, v)))
                    else:
                        return False
                elif fb >= 0:
                    if fb == v:
                        stack.append((a, v - 1))
                    elif fb == v + 1 or fb == v - 1:
                        stack.append((a, max(fb, v)))
                    else:
                        return False
                elif lo[a] >= v and lo[b] >= v:
                    # x must be the unique minimum of this line
                    stack.append((a, v + 1))
                    stack.append((b, v + 1))
        return True

    def _descend(self, pending, lo, hi) -> None:
        vals = self.vals
        trail = []
        lo = lo.copy()
        hi = hi.copy()
        ok = True
        while pending:
            start = len(trail)
            if not self._propagate(pending, lo, hi, trail):
                ok = False
                break
            new = trail[start:]
            nv = np.array([vals[x] for x in new], dtype=np.int16)
            rows = self.dist[new]
            np.maximum(lo, (nv[:, None] - rows).max(axis=0), out=lo)
            np.minimum(hi, (nv[:, None] + rows).min(axis=0), out=hi)
            if (lo > hi).any():
                ok = False
                break
            varr = np.array(vals, dtype=np.int16)
            free = varr < 0
            assigned = ~free
            if ((varr < lo) & assigned).any() or ((varr > hi) & assigned).any():
                ok = False
                break
            fixed = np.nonzero(free & (lo == hi))[0]
            pending = [(int(x), int(lo[x])) for x in fixed]
        if ok:
            varr = np.array(vals, dtype=np.int16)
            free = np.nonzero(varr < 0)[0]
            if len(free) == 0:
                self.out.append(tuple(vals))
            else:
                width = hi[free] - lo[free]
                x = int(free[np.argmin(width)])
                for v in range(int(lo[x]), int(hi[x]) + 1):
                    self._descend([(x, v)], lo, hi)
        for y in trail:
            vals[y] = -1


def _line_partners(g: Geometry):
    others = [[] for _ in range(g.num_points)]
    for line in g.lines:
        if len(line) != 3:
            raise ValuationError("valuation enumeration needs 3-point lines")
        a, b, c = line
        others[a].append((b, c))
        others[b].append((a, c))
        others[c].append((a, b))
    return [tuple(x) for x in others]


def _search_roots(g: Geometry, roots: list[int]) -> list[tuple[int, list]]:
    search = _RootedSearch(g, _line_partners(g))
    return [(r, search.run(r)) for r in roots]


def enumerate_valuations(
    g: Geometry,
    roots: Iterable[int] | None = None,
    progress=None,
    workers: int = 1,
) -> list[Valuation]:
    """Every valuation of ``g``, sorted lexicographically by value vector.

    Each valuation is produced once, by the search rooted at its lowest-index
    zero point.  ``progress`` (if given) is called with ``(root, vectors)``
    after each root, which lets callers checkpoint.  With ``workers > 1`` the
    roots are split over processes; the result does not depend on the split.
    """
    if (g.distance_matrix == 255).any():
        raise ValuationError("geometry must be connected")
    roots = list(range(g.num_points) if roots is None else roots)
    found = set()
    if workers > 1 and len(roots) > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [roots[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_search_roots, [g] * len(chunks), chunks))
        results = sorted(item for batch in batches for item in batch)
    else:
        search = _RootedSearch(g, _line_partners(g))
        results = ((r, search.run(r)) for r in roots)
    for root, vecs in results:
        if progress is not None:
            progress(root, vecs)
        found.update(vecs)
    return sort_valuations([Valuation(v, g) for v in found])


def sort_valuations(vals: Iterable[Valuation]) -> list[Valuation]:
    vals = list(vals)
    if not vals:
        return []
    mat = np.stack([f.values for f in vals])
    order = np.lexsort(mat.T[::-1])
    return [vals[i] for i in order]


def brute_force_valuations(g: Geometry) -> list[Valuation]:
    """Filter every vector in ``{0..d}^n`` through the line rule (small geometries only)."""
    n = g.num_points
    base = g.diameter + 1
    if base**n > 5 * 10**8:
        raise ValuationError(f"{base ** n} vectors is too many for brute force")
    tail_len = min(n, 10)
    tail = _all_vectors(base, tail_len)
    heads = _all_vectors(base, n - tail_len)
    found = []
    for head in heads:
        mat = np.empty((len(tail), n), dtype=np.int8)
        mat[:, : n - tail_len] = head
        mat[:, n - tail_len :] = tail
        found.extend(mat[valid_rows(g, mat)])
    return sort_valuations([Valuation(v, g) for v in found])


def _all_vectors(base: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros((1, 0), dtype=np.int8)
    grids = np.indices((base,) * length, dtype=np.int8)
    return grids.reshape(length, -1).T.copy()


def exhaustive_valuations(g: Geometry) -> list[Valuation]:
    """Point-by-point generate-and-test in index order.

    A line is tested only once all its points carry values, so the result is
    exactly the set of vectors in ``{0..d}^n`` passing :func:`is_valuation`.
    """
    n = g.num_points
    d = g.diameter
    last_line_at: list[list[tuple[int, ...]]] = [[] for _ in range(n)]
    for line in g.lines:
        last_line_at[max(line)].append(line)
    vals = [0] * n
    out = []

    def rec(i):
        if i == n:
            if min(vals) == 0:
                out.append(tuple(vals))
            return
        for v in range(d + 1):
            vals[i] = v
            good = True
            for line in last_line_at[i]:
                a, b, c = sorted(vals[p] for p in line)
                if not (b == c == a + 1):
                    good = False
                    break
            if good:
                rec(i + 1)

    rec(0)
    return sort_valuations([Valuation(v, g) for v in out])


# ---------------------------------------------------------------------------
# types and valuation geometry


def assign_types(valuations: Sequence[Valuation], table: dict, length: int | None = None) -> list[str]:
    """Type label per valuation by signature match; counts must equal the table's."""
    lookup = {}
    for label, (count, m, z, dist) in table.items():
        lookup[ValuationSignature(m, z, tuple(dist))] = label
    labels = []
    for f in valuations:
        sig = signature(f, length or len(next(iter(table.values()))[3]))
        if sig not in lookup:
            raise ValuationError(f"signature {sig} matches no table row")
        labels.append(lookup[sig])
    counts = Counter(labels)
    for label, (count, *_rest) in table.items():
        if counts[label] != count:
            raise ValuationError(f"type {label}: {counts[label]} valuations, table says {count}")
    return labels


@dataclass
class ValuationGeometry:
    """Valuations as points; pairwise neighbouring ``*``-closed triples as lines."""

    geometry: Geometry
    valuations: list[Valuation]
    types: list[str]
    vlines: list[tuple[int, int, int]]
    special: dict = field(default_factory=dict)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.stack([f.values for f in self.valuations])

    @cached_property
    def index_of(self) -> dict:
        return {f.key: i for i, f in enumerate(self.valuations)}

    def line_type(self, line) -> str:
        return "".join(sorted(self.types[i] for i in line))

    @cached_property
    def line_types(self) -> list[str]:
        return [self.line_type(l) for l in self.vlines]

    @cached_property
    def lines_through(self) -> list[list[int]]:
        out = [[] for _ in self.valuations]
        for li, line in enumerate(self.vlines):
            for i in line:
                out[i].append(li)
        return out

    @cached_property
    def collinear_pairs(self) -> set:
        pairs = set()
        for a, b, c in self.vlines:
            pairs.update(((a, b), (a, c), (b, c)))
        return pairs

    def are_collinear(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.collinear_pairs

    def incidence_counts(self) -> dict:
        """Per point type: the set of distinct {line type: count} profiles."""
        profiles = defaultdict(Counter)
        for i, lis in enumerate(self.lines_through):
            prof = Counter(self.line_types[li] for li in lis)
            profiles[self.types[i]][tuple(sorted(prof.items()))] += 1
        return profiles

    def as_geometry(self, label: str = "V") -> Geometry:
        return Geometry(len(self.valuations), self.vlines, label)


def _offsets(mx: np.ndarray, mn: np.ndarray) -> np.ndarray:
    """Offset for distinct neighbouring pairs; their difference range is exactly 2."""
    if ((mx - mn) == 1).any():
        raise ValuationError("offset is not unique for distinct valuations")
    return -1 - mn


def neighboring_pairs(matrix: np.ndarray):
    """Index pairs ``i < j`` of distinct neighbouring valuations with their offsets."""
    m = np.asarray(matrix, dtype=np.int8)
    out_i, out_j, out_e = [], [], []
    for i in range(len(m) - 1):
        diff = m[i] - m[i + 1 :]
        mx = diff.max(axis=1).astype(np.int16)
        mn = diff.min(axis=1).astype(np.int16)
        hit = np.nonzero(mx - mn <= 2)[0]
        if len(hit):
            out_i.append(np.full(len(hit), i))
            out_j.append(hit + i + 1)
            out_e.append(_offsets(mx[hit], mn[hit]))
    if not out_i:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_e)


def build_valuation_geometry(g: Geometry, valuations: Sequence[Valuation], types: Sequence[str]) -> ValuationGeometry:
    """Scan every neighbouring pair, form the product, keep the triple if it is new."""
    vals = list(valuations)
    mat = np.stack([f.values for f in vals])
    index = {f.key: i for i, f in enumerate(vals)}
    ii, jj, ee = neighboring_pairs(mat)
    lines = set()
    step = 100_000
    for s in range(0, len(ii), step):
        a, b, e = ii[s : s + step], jj[s : s + step], ee[s : s + step]
        prod = _star_values(mat[a].astype(np.int16), mat[b].astype(np.int16), e[:, None]).astype(np.int8)
        for x, y, row in zip(a.tolist(), b.tolist(), prod):
            z = index.get(row.tobytes())
            if z is None:
                raise ValuationError("product of neighbouring valuations missing from the list")
            if z == x or z == y:
                raise ValuationError("product equals a factor for distinct valuations")
            lines.add(tuple(sorted((x, y, z))))
    return ValuationGeometry(g, vals, list(types), sorted(lines))


def table_incidences(vg: ValuationGeometry, line_table: dict) -> list[dict]:
    """One row per (line type, point type) cell: expected, observed set, pass flag."""
    profiles = defaultdict(lambda: defaultdict(Counter))
    for i, lis in enumerate(vg.lines_through):
        counts = Counter(vg.line_types[li] for li in lis)
        for lt in set(line_table) | set(counts):
            profiles[lt][vg.types[i]][counts.get(lt, 0)] += 1
    point_types = sorted(set(vg.types))
    rows = []
    for lt in sorted(set(line_table) | set(vg.line_types)):
        for pt in point_types:
            expected = line_table.get(lt, {}).get(pt, 0)
            observed = sorted(profiles[lt][pt])
            rows.append(
                {
                    "line_type": lt,
                    "point_type": pt,
                    "expected": expected,
                    "observed": observed if len(observed) != 1 else observed[0],
                    "pass": observed == [expected],
                }
            )
    return rows


def table_types(vg: ValuationGeometry, table: dict, hyperplanes: dict | None = None) -> list[dict]:
    length = len(next(iter(table.values()))[3])
    rows = []
    by_type = defaultdict(list)
    for f, t in zip(vg.valuations, vg.types):
        by_type[t].append(f)
    for label, (count, m, z, dist) in table.items():
        fs = by_type.get(label, [])
        sigs = {signature(f, length) for f in fs}
        obs = {
            "count": len(fs),
            "M_f": sorted({s.max_value for s in sigs}),
            "O_f": sorted({s.zero_count for s in sigs}),
            "distribution": sorted({s.distribution for s in sigs}),
        }
        ok = len(fs) == count and obs["M_f"] == [m] and obs["O_f"] == [z] and obs["distribution"] == [tuple(dist)]
        row = {"type": label, "expected": {"count": count, "M_f": m, "O_f": z, "distribution": list(dist)}, "observed": obs}
        if hyperplanes is not None:
            sizes = sorted({len(hyperplane_of(f)) for f in fs})
            row["expected"]["H_f"] = hyperplanes[label]
            row["observed"]["H_f"] = sizes
            ok = ok and sizes == [hyperplanes[label]]
        row["pass"] = ok
        rows.append(row)
    return rows


def classify_ccc_lines(vg: ValuationGeometry) -> Verdict:
    """Flag CCC lines special when their zero points form a line of the base geometry.

    Verifies that each type-C valuation lies on exactly one special CCC line
    and that every ordinary one has three pairwise non-collinear zero points.
    """
    g = vg.geometry
    d = g.distance_matrix
    special = {}
    per_c = Counter()
    bad_ordinary = None
    for li, (line, lt) in enumerate(zip(vg.vlines, vg.line_types)):
        if lt != "CCC":
            continue
        zeros = []
        for i in line:
            z = vg.valuations[i].zero_set
            if len(z) != 1:
                raise ValuationError("type-C valuation without a unique zero")
            zeros.append(z[0])
        is_special = tuple(sorted(zeros)) in g.line_index
        special[li] = is_special
        if is_special:
            for i in line:
                per_c[i] += 1
        elif any(d[a, b] <= 1 for a, b in combinations(zeros, 2)) and bad_ordinary is None:
            bad_ordinary = (line, tuple(zeros))
    vg.special = special
    c_points = [i for i, t in enumerate(vg.types) if t == "C"]
    not_one = [i for i in c_points if per_c[i] != 1]
    detail = {
        "special": sum(special.values()),
        "ordinary": len(special) - sum(special.values()),
    }
    if not_one:
        return Verdict(False, dict(detail, reason="special count != 1"), not_one[0])
    if bad_ordinary is not None:
        return Verdict(False, dict(detail, reason="ordinary line with collinear zeros"), bad_ordinary)
    return Verdict(True, detail)


def _type_graph_connected(vg: ValuationGeometry, point_type: str, line_filter) -> Verdict:
    pts = [i for i, t in enumerate(vg.types) if t == point_type]
    pos = {p: k for k, p in enumerate(pts)}
    rows, cols = [], []
    for li, line in enumerate(vg.vlines):
        if not line_filter(li):
            continue
        members = [pos[i] for i in line if i in pos]
        for a, b in combinations(members, 2):
            rows.append(a)
            cols.append(b)
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(pts), len(pts)))
    ncomp, _ = csgraph.connected_components(adj, directed=False)
    return Verdict(ncomp == 1, {"vertices": len(pts), "edges": len(rows), "components": int(ncomp)})


def lemma_b_connectivity(vg: ValuationGeometry) -> Verdict:
    """Type-B valuations joined by ABB and BBB lines form a connected graph."""
    lt = vg.line_types
    return _type_graph_connected(vg, "B", lambda li: lt[li] in ("ABB", "BBB"))


def lemma_c_connectivity(vg: ValuationGeometry) -> Verdict:
    """Type-C valuations joined by ACC and ordinary CCC lines form a connected graph."""
    if not vg.special:
        classify_ccc_lines(vg)
    lt = vg.line_types
    return _type_graph_connected(
        vg, "C", lambda li: lt[li] == "ACC" or (lt[li] == "CCC" and not vg.special[li])
    )


def lemma_bc_noncollinear(vg: ValuationGeometry) -> Verdict:
    """For type-C ``f``: B/C valuations on distinct lines through ``f`` are never collinear.

    ``detail['zero_point_reading']`` additionally reports whether their zero
    points are non-collinear in the base geometry.
    """
    d = vg.geometry.distance_matrix
    first_fail = None
    zero_fail = None
    checked = 0
    for f, t in enumerate(vg.types):
        if t != "C":
            continue
        lis = vg.lines_through[f]
        members = [[i for i in vg.vlines[li] if i != f and vg.types[i] in "BC"] for li in lis]
        for (la, ma), (lb, mb) in combinations(zip(lis, members), 2):
            for g_ in ma:
                for h in mb:
                    checked += 1
                    if first_fail is None and vg.are_collinear(g_, h):
                        first_fail = (f, g_, h)
                    if zero_fail is None:
                        zg = vg.valuations[g_].zero_set
                        zh = vg.valuations[h].zero_set
                        if any(d[a, b] == 1 for a in zg for b in zh):
                            zero_fail = (f, g_, h)
    detail = {
        "pairs_checked": checked,
        "zero_point_reading": zero_fail is None,
        "zero_point_witness": zero_fail,
    }
    return Verdict(first_fail is None, detail, first_fail)


def lemma_b_lines_bijection(vg: ValuationGeometry) -> Verdict:
    """For type-B ``f`` with zero ``x``: its BBB lines map bijectively onto the lines through ``x``."""
    g = vg.geometry
    checked = 0
    for f, t in enumerate(vg.types):
        if t != "B":
            continue
        (x,) = vg.valuations[f].zero_set
        images = []
        for li in vg.lines_through[f]:
            if vg.line_types[li] != "BBB":
                continue
            zeros = set()
            for i in vg.vlines[li]:
                zeros.update(vg.valuations[i].zero_set)
            images.append(tuple(sorted(zeros)))
        target = sorted(g.lines[li] for li in g.lines_through[x])
        if sorted(images) != target:
            return Verdict(False, {"checked": checked}, f)
        checked += 1
    return Verdict(True, {"checked": checked})


def subgeometry_by_types(
    vg: ValuationGeometry, point_types: Iterable[str], line_types: Iterable[str], label: str = ""
) -> tuple[Geometry, list[int]]:
    """Geometry on valuations of the given types with the given line types.

    Returns the geometry and the list of valuation indices of its points.
    """
    pt = set(point_types)
    lt = set(line_types)
    for t in lt:
        if not set(t) <= pt:
            raise ValuationError(f"line type {t} uses point types outside {sorted(pt)}")
    pts = [i for i, t in enumerate(vg.types) if t in pt]
    pos = {p: k for k, p in enumerate(pts)}
    lines = [[pos[i] for i in line] for line, t in zip(vg.vlines, vg.line_types) if t in lt]
    return Geometry(len(pts), lines, label), pts


@dataclass
class InducedValuations:
    matrix: np.ndarray  # row x: f_x on the small geometry
    distance: np.ndarray  # d(x, image)
    verdicts: dict


def induced_valuations(emb: EmbeddingMap) -> InducedValuations:
    """``f_x(y) = d(x, y) - d(x, image)`` for every point ``x`` of the big geometry.

    Checks at every point: ``f_x`` is a valuation; collinear points give
    neighbouring valuations; each line ``{x1, x2, x3}`` satisfies
    ``f_x1 * f_x2 = f_x3``; and ``max f_x <= d - d(x, image)``.
    """
    v = verify_embedding(emb)
    if not v.ok:
        raise GeometryError(f"embedding fails verification: {v.detail}")
    small, big = emb.source, emb.target
    phi = np.asarray(emb.point_map, dtype=np.int64)
    raw = big.distance_matrix[:, phi].astype(np.int16)
    dist = raw.min(axis=1)
    mat = (raw - dist[:, None]).astype(np.int8)
    verdicts = {}
    verdicts["valuation"] = bool(valid_rows(small, mat).all())
    lines = big.line_array
    neighboring, prod = star_rows(mat[lines[:, 0]], mat[lines[:, 1]])
    verdicts["collinear_neighboring"] = bool(neighboring.all())
    verdicts["line_product"] = bool((prod == mat[lines[:, 2]]).all())
    diameter = big.diameter
    verdicts["max_bound"] = bool((mat.max(axis=1) <= diameter - dist).all())
    return InducedValuations(mat, dist, verdicts)


def valuation_model_map(
    emb: EmbeddingMap, vg: ValuationGeometry, model_points: Sequence[int], model: Geometry
) -> EmbeddingMap:
    """Send each point ``x`` of ``emb.target`` to the model point carrying ``f_x``.

    ``model_points[k]`` is the valuation index of model point ``k``.  The
    returned map is not verified here.
    """
    induced = induced_valuations(emb)
    pos = {v: k for k, v in enumerate(model_points)}
    phi = []
    for x, row in enumerate(induced.matrix):
        i = vg.index_of.get(row.tobytes())
        if i is None or i not in pos:
            raise ValuationError(f"point {x} induces a valuation outside the model")
        phi.append(pos[i])
    return EmbeddingMap(emb.target, model, tuple(phi))


def type_lookup(vg: ValuationGeometry, matrix: np.ndarray) -> list[str | None]:
    out = []
    for row in np.asarray(matrix, dtype=np.int8):
        i = vg.index_of.get(row.tobytes())
        out.append(vg.types[i] if i is not None else None)
    return out


def format_valuations(g: Geometry, vals: Sequence[Valuation]) -> str:
    out = [f"VALS v1 {g.digest()} {len(vals)}"]
    out += [" ".join(map(str, f.values.tolist())) for f in vals]
    return "\n".join(out) + "\n"


def parse_valuations(text: str, g: Geometry) -> list[Valuation]:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["VALS", "v1"]:
        raise ValuationError("bad valuation cache header")
    if head[2] != g.digest():
        raise ValuationError("valuation cache belongs to a different geometry")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != int(head[3]):
        raise ValuationError("valuation count does not match header")
    return [Valuation([int(t) for t in ln.split()], g) for ln in body]


def format_vgeometry(vg: ValuationGeometry) -> str:
    out = [f"VGEOM v1 {vg.geometry.digest()} {len(vg.valuations)} {len(vg.vlines)}"]
    out.append("types " + "".join(vg.types))
    for li, (line, lt) in enumerate(zip(vg.vlines, vg.line_types)):
        flag = ""
        if li in vg.special:
            flag = " special" if vg.special[li] else " ordinary"
        out.append(f"{line[0]} {line[1]} {line[2]} {lt}{flag}")
    return "\n".join(out) + "\n"


def parse_vgeometry(text: str, g: Geometry, valuations: Sequence[Valuation]) -> ValuationGeometry:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 5 or head[:2] != ["VGEOM", "v1"]:
        raise ValuationError("bad valuation geometry header")
    if head[2] != g.digest() or int(head[3]) != len(valuations):
        raise ValuationError("valuation geometry cache does not match its geometry")
    types = list(lines[1].split()[1])
    vlines, special = [], {}
    for li, ln in enumerate(lines[2:]):
        parts = ln.split()
        vlines.append(tuple(int(x) for x in parts[:3]))
        if len(parts) == 5:
            special[li] = parts[4] == "special"
    if len(vlines) != int(head[4]):
        raise ValuationError("line count does not match header")
    return ValuationGeometry(g, list(valuations), types, vlines, special)
