"""The named geometries of the tower and their defining statistics."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from itertools import combinations

from . import perm as P
from .embed import find_embedding
from .geometry import (
    Geometry,
    GeometryError,
    direct_product,
    dual,
    is_generalized_polygon,
    is_near_polygon,
    line_geometry,
    order_of,
    orbital_graphs,
    triangles_as_lines,
)

log = logging.getLogger(__name__)

RECIPE_VERSION = "1"

# name -> (points, lines, (s, t), diameter, generalized polygon?)
EXPECTED = {
    "H21": (21, 14, (2, 1), 3, True),
    "H2": (63, 63, (2, 2), 3, True),
    "H2D": (63, 63, (2, 2), 3, True),
    "L3cubed": (27, 27, (2, 2), 3, False),
    "W2": (15, 15, (2, 2), 2, True),
    "HJ": (315, 525, (2, 4), 4, None),
    "G24": (4095, 15015, (2, 10), 4, None),
}


class ConstructionError(RuntimeError):
    pass


class BudgetExceededError(ConstructionError):
    """A search inside a construction ran out of nodes."""


@dataclass
class NamedGeometry:
    name: str
    geometry: Geometry
    provenance: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def statistics(self) -> dict:
        g = self.geometry
        o = order_of(g)
        np_v = is_near_polygon(g)
        return {
            "name": self.name,
            "points": g.num_points,
            "lines": g.num_lines,
            "order": [o.s, o.t],
            "diameter": g.diameter,
            "near_polygon": np_v.ok,
        }

    def verify(self) -> list[str]:
        """Re-check the expected statistics block; returns the list of problems."""
        exp = EXPECTED.get(self.name)
        if exp is None:
            return []
        points, lines, order, diameter, gp = exp
        stats = self.statistics()
        problems = []
        if stats["points"] != points:
            problems.append(f"points {stats['points']} != {points}")
        if stats["lines"] != lines:
            problems.append(f"lines {stats['lines']} != {lines}")
        if tuple(stats["order"]) != order:
            problems.append(f"order {stats['order']} != {order}")
        if stats["diameter"] != diameter:
            problems.append(f"diameter {stats['diameter']} != {diameter}")
        if not stats["near_polygon"]:
            problems.append("not a near polygon")
        if gp is not None and is_generalized_polygon(self.geometry).ok != gp:
            problems.append(f"generalized polygon test should be {gp}")
        return problems


def gens_digest(gens: P.GeneratorSet) -> str:
    return hashlib.sha256(P.format_generators(gens).encode()).hexdigest()


def fano_plane() -> list[tuple[int, int, int]]:
    """Lines ``{i, i+1, i+3} mod 7`` of the cyclic Fano plane."""
    return [tuple(sorted({i % 7, (i + 1) % 7, (i + 3) % 7})) for i in range(7)]


def build_h21() -> NamedGeometry:
    """Points are the 21 flags of the Fano plane; lines are its 7 points and 7 lines."""
    fano = fano_plane()
    flags = [(p, li) for li, line in enumerate(fano) for p in line]
    flags.sort()
    index = {f: i for i, f in enumerate(flags)}
    lines = []
    for p in range(7):
        lines.append([index[(p, li)] for li, line in enumerate(fano) if p in line])
    for li, line in enumerate(fano):
        lines.append([index[(p, li)] for p in line])
    g = Geometry(len(flags), lines, "H21")
    return NamedGeometry("H21", g, {"recipe": f"fano-flags/{RECIPE_VERSION}"})


def build_w2() -> NamedGeometry:
    """The generalized quadrangle W(2): duads of a 6-set as points, synthemes as lines."""
    duads = list(combinations(range(6), 2))
    index = {d: i for i, d in enumerate(duads)}
    lines = set()
    for a, b in duads:
        rest = [x for x in range(6) if x not in (a, b)]
        for c, d in combinations(rest, 2):
            e, f = [x for x in rest if x not in (c, d)]
            lines.add(tuple(sorted((index[(a, b)], index[(c, d)], index[(e, f)]))))
    return NamedGeometry("W2", Geometry(15, sorted(lines), "W2"), {"recipe": f"synthemes/{RECIPE_VERSION}"})


def build_l3_cubed() -> NamedGeometry:
    L = line_geometry(3)
    g = direct_product(L, direct_product(L, L))
    g.label = "L3cubed"
    return NamedGeometry("L3cubed", g, {"recipe": f"product/{RECIPE_VERSION}"})


def orbit_representatives(num_points: int, actions) -> list[int]:
    """Least point of each orbit of the group generated by ``actions`` (image arrays)."""
    uf = P.UnionFind(num_points)
    for img in actions:
        for x, y in enumerate(img):
            uf.union(x, int(y))
    reps = {}
    for x in range(num_points):
        reps.setdefault(uf.find(x), x)
    return sorted(reps.values())


def line_action(gens: P.GeneratorSet, g: Geometry) -> list[list[int]]:
    """Induced action on line indices; raises if a generator is not an automorphism."""
    out = []
    for gen in gens.generators:
        img = gen.images
        act = []
        for line in g.lines:
            j = g.line_index.get(tuple(sorted(int(img[p]) for p in line)))
            if j is None:
                raise ConstructionError("generator does not preserve the line set")
            act.append(j)
        out.append(act)
    return out


def build_hexagons_2_2(u33_gens: P.GeneratorSet, budget: int = 10**7):
    """Both generalized hexagons of order (2,2) from a 63-point action.

    The valency-6 orbital is turned into a geometry by taking its triangles as
    lines; the dual is the other hexagon.  H2D is the one that contains H(2,1)
    as a full isometric subgeometry.
    """
    if u33_gens.degree != 63:
        raise ConstructionError(f"expected a 63-point action, got degree {u33_gens.degree}")
    orbitals = orbital_graphs(u33_gens)
    six = [o for o in orbitals if o.valency == 6]
    if not six:
        raise ConstructionError(
            f"no valency-6 orbital (valencies {[o.valency for o in orbitals]})"
        )
    hexa = triangles_as_lines(63, six[0].edges, "hex-a")
    hexb = dual(hexa, "hex-b")
    # point i of the dual is line i of hex-a
    reps = {
        "hex-a": orbit_representatives(63, [gen.images for gen in u33_gens.generators]),
        "hex-b": orbit_representatives(63, line_action(u33_gens, hexa)),
    }
    h21 = build_h21().geometry
    results = {}
    for g in (hexa, hexb):
        res = find_embedding(h21, g, budget=budget, first_targets=reps[g.label])
        if res.status == "budget exceeded":
            raise BudgetExceededError(f"H(2,1) search in {g.label} exceeded its budget")
        results[g.label] = res
    has = [g for g in (hexa, hexb) if results[g.label].found]
    if len(has) != 1:
        raise ConstructionError(
            f"{len(has)} of the two hexagons contain H(2,1); expected exactly one"
        )
    h2d = has[0]
    h2 = hexb if h2d is hexa else hexa
    prov = {
        "recipe": f"orbital6-triangles/{RECIPE_VERSION}",
        "gens": gens_digest(u33_gens),
        "orbital_valencies": sorted(o.valency for o in orbitals),
    }
    # relabel so that labels carry the identified names
    h2d_g = Geometry(h2d.num_points, h2d.lines, "H2D")
    h2_g = Geometry(h2.num_points, h2.lines, "H2")
    h2_ng = NamedGeometry("H2", h2_g, dict(prov, built_as=h2.label, orbit_reps=reps[h2.label]))
    h2d_ng = NamedGeometry(
        "H2D",
        h2d_g,
        dict(prov, built_as=h2d.label, orbit_reps=reps[h2d.label]),
        {"h21_embedding": results[h2d.label].embedding.point_map},
    )
    return h2_ng, h2d_ng


def _class_of_size(gens: P.GeneratorSet, size: int, seed: int) -> P.InvolutionClass:
    x = P.find_class_involution(gens, size, seed=seed)
    cls = P.conjugation_class(gens, x)
    if len(cls) != size:
        raise ConstructionError(f"class size {len(cls)} != {size}")
    return cls


def _check_invariant(gens: P.GeneratorSet, cls: P.InvolutionClass, lines) -> None:
    line_set = set(lines)
    for g in gens.generators:
        act = cls.conjugation_action(g)
        for t in lines:
            if P.canonical_triple(act[list(t)]) not in line_set:
                raise ConstructionError("line set is not invariant under conjugation")


def build_hj(j2_gens: P.GeneratorSet, seed: int = 1) -> NamedGeometry:
    """Points: the 315 central involutions; lines: triples {x, y, xy} inside the class."""
    if j2_gens.degree != 100:
        raise ConstructionError(f"expected J2 on 100 points, got degree {j2_gens.degree}")
    cls = _class_of_size(j2_gens, 315, seed)
    triples, rejected = P.product_triples(cls)
    if rejected:
        log.info("HJ: %d commuting pairs with product outside the class discarded", rejected)
    _check_invariant(j2_gens, cls, triples)
    g = Geometry(len(cls), triples, "HJ")
    # conjugation is transitive on a class, so one representative suffices
    prov = {
        "recipe": f"involutions/{RECIPE_VERSION}",
        "gens": gens_digest(j2_gens),
        "seed": seed,
        "orbit_reps": [0],
        "class_size": len(cls),
        "rejected_pairs": rejected,
    }
    return NamedGeometry("HJ", g, prov, {"class": cls})


def build_g24(g242_gens: P.GeneratorSet, seed: int = 1) -> NamedGeometry:
    """Points: the 4095 central involutions; lines: the commuting-triple orbits of sizes 1365 and 13650."""
    if g242_gens.degree != 416:
        raise ConstructionError(f"expected G2(4):2 on 416 points, got degree {g242_gens.degree}")
    cls = _class_of_size(g242_gens, 4095, seed)
    triples, rejected = P.product_triples(cls)
    orbits = P.orbit_partition_of_triples(g242_gens, cls, triples)
    sizes = [len(o) for o in orbits]
    keep = [o for o in orbits if len(o) in (1365, 13650)]
    if sorted(len(o) for o in keep) != [1365, 13650]:
        raise ConstructionError(f"retained orbit sizes {sorted(len(o) for o in keep)}; orbits {sizes}")
    lines = sorted(t for o in keep for t in o)
    _check_invariant(g242_gens, cls, lines)
    g = Geometry(len(cls), lines, "G24")
    prov = {
        "recipe": f"involutions-orbits/{RECIPE_VERSION}",
        "gens": gens_digest(g242_gens),
        "seed": seed,
        "orbit_reps": [0],
        "class_size": len(cls),
        "rejected_pairs": rejected,
        "orbit_sizes": sizes,
    }
    return NamedGeometry("G24", g, prov, {"class": cls})
