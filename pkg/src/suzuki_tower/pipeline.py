"""End-to-end verification: builds, valuations, models and embeddings with cached artifacts."""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import constructions as C
from . import embed as E
from . import geometry as G
from . import perm as P
from . import valuations as V
from .cache import Cache, CacheError, cache_key
from .report import (
    BUDGET_EXCEEDED,
    EXTENDED_PASS,
    FAIL,
    INFO,
    PASS,
    Check,
    VerificationReport,
)

log = logging.getLogger(__name__)

GROUP_FILES = {"u33": "u33_63.txt", "j2": "j2_100.txt", "g24": "g24d2_416.txt"}
GROUP_OF = {"H2": "u33", "H2D": "u33", "HJ": "j2", "G24": "g24"}
GEOMETRIES = ("H21", "H2", "H2D", "L3cubed", "HJ", "G24")
MODELS = ("VAB", "GVAL")
VALUATION_SOURCES = {"H2D": "h2d", "HJ": "hj"}
MODEL_PARTS = {
    "VAB": ("H2D", "AB", ("AAA", "ABB", "BBB")),
    "GVAL": ("HJ", "ABC", ("AAA", "ABB", "ACC", "BBC", "CCC")),
}
NAME_ALIASES = {n.lower(): n for n in GEOMETRIES + MODELS + ("W2",)}
NAME_ALIASES.update({"hex22": "H2D", "l3": "L3cubed"})

STAR_PAIR_SAMPLES = 10_000
STAR_SELF_SAMPLES = 1_000


class InputError(FileNotFoundError):
    pass


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    if key not in NAME_ALIASES:
        raise KeyError(f"unknown geometry {name!r}; choose from {', '.join(sorted(NAME_ALIASES))}")
    return NAME_ALIASES[key]


def packaged_generators(group: str) -> Path:
    return Path(str(resources.files("suzuki_tower") / "data" / GROUP_FILES[group]))


@dataclass
class PipelineConfig:
    cache_dir: Path | None = None
    gens: dict = field(default_factory=dict)
    seed: int = 1
    threads: int = 1
    budget: int = 10**9
    iso_budget: int = 10**5
    fmt: str = "tsv"

    def __post_init__(self):
        if self.seed <= 0 or self.budget <= 0 or self.iso_budget <= 0 or self.threads <= 0:
            raise ValueError("seed, threads and budgets must be positive")
        if self.fmt not in ("tsv", "json"):
            raise ValueError("format must be tsv or json")

    def gens_path(self, group: str) -> Path:
        return Path(self.gens.get(group) or packaged_generators(group))


class Workspace:
    """Lazily built objects of one configuration, backed by an optional cache."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.cache = Cache(config.cache_dir) if config.cache_dir else None
        self._gens = {}
        self._named = {}
        self._vals = {}
        self._vgeom = {}
        self._models = {}
        self._emb = {}
        self._pairs = {}

    # -- inputs ---------------------------------------------------------

    def generators(self, group: str) -> P.GeneratorSet:
        if group not in self._gens:
            path = self.config.gens_path(group)
            if not path.is_file():
                raise InputError(f"input not found: {path}")
            self._gens[group] = P.read_generators(path, label=group)
        return self._gens[group]

    def _geom_key(self, name: str) -> str:
        parts = [name, C.RECIPE_VERSION]
        group = GROUP_OF.get(name)
        if group:
            parts.append(C.gens_digest(self.generators(group)))
        if name in ("HJ", "G24"):
            parts.append(self.config.seed)
        return cache_key(*parts)

    # -- geometries -----------------------------------------------------

    def named(self, name: str) -> C.NamedGeometry:
        name = canonical_name(name)
        if name in MODELS:
            raise KeyError(f"{name} is a valuation model, not a built geometry")
        if name not in self._named:
            self._named[name] = self._load_or_build(name)
        return self._named[name]

    def _load_or_build(self, name: str) -> C.NamedGeometry:
        key = self._geom_key(name)
        rel = f"geom/{name}-{key}.geom"
        meta_rel = f"geom/{name}-{key}.json"
        if self.cache is not None and self.cache.has(rel) and self.cache.has(meta_rel):
            g = G.parse_geometry(self.cache.read(rel))
            meta = self.cache.read_json(meta_rel)
            ng = C.NamedGeometry(name, g, meta["provenance"])
            problems = ng.verify()
            if problems:
                raise CacheError(self.cache.path(rel), "cached geometry fails its statistics: " + "; ".join(problems))
            return ng
        built = self._build(name)
        for ng in built:
            if self.cache is not None:
                k = self._geom_key(ng.name)
                self.cache.write(f"geom/{ng.name}-{k}.geom", G.format_geometry(ng.geometry))
                self.cache.write_json(
                    f"geom/{ng.name}-{k}.json",
                    {"name": ng.name, "digest": ng.geometry.digest(), "provenance": ng.provenance},
                )
            self._named.setdefault(ng.name, ng)
        return self._named[name]

    def _build(self, name: str) -> list[C.NamedGeometry]:
        seed = self.config.seed
        if name == "H21":
            return [C.build_h21()]
        if name == "L3cubed":
            return [C.build_l3_cubed()]
        if name == "W2":
            return [C.build_w2()]
        if name in ("H2", "H2D"):
            return list(C.build_hexagons_2_2(self.generators("u33"), budget=self.config.budget))
        if name == "HJ":
            return [C.build_hj(self.generators("j2"), seed=seed)]
        if name == "G24":
            return [C.build_g24(self.generators("g24"), seed=seed)]
        raise KeyError(name)

    def geometry(self, name: str) -> G.Geometry:
        name = canonical_name(name)
        if name in MODELS:
            return self.model(name)[0]
        return self.named(name).geometry

    def orbit_reps(self, name: str):
        name = canonical_name(name)
        if name in MODELS:
            return None
        return self.named(name).provenance.get("orbit_reps")

    # -- valuations -----------------------------------------------------

    def valuations(self, name: str) -> tuple[list[V.Valuation], list[str]]:
        name = canonical_name(name)
        if name not in VALUATION_SOURCES:
            raise KeyError(f"valuations are tabulated for h2d and hj, not {name}")
        if name not in self._vals:
            g = self.geometry(name)
            table = V.TABLES[VALUATION_SOURCES[name]][0]
            rel = f"vals/{name}-{g.digest()[:16]}.vals"
            text = self.cache.read(rel) if self.cache is not None else None
            if text is not None:
                vals = V.parse_valuations(text, g)
            else:
                vals = self._enumerate(g, rel)
                if self.cache is not None:
                    self.cache.write(rel, V.format_valuations(g, vals))
            self._vals[name] = (vals, V.assign_types(vals, table))
        return self._vals[name]

    def _enumerate(self, g: G.Geometry, rel: str) -> list[V.Valuation]:
        """Enumerate with a per-root checkpoint file so an interrupted run resumes."""
        if self.cache is None:
            return V.enumerate_valuations(g, workers=self.config.threads)
        partial = self.cache.path(rel + ".partial")
        done, vectors = _read_checkpoint(partial, g)
        todo = [r for r in range(g.num_points) if r not in done]
        partial.parent.mkdir(parents=True, exist_ok=True)
        if not partial.exists():
            partial.write_text(f"VALS-PARTIAL v1 {g.digest()}\n")
        with partial.open("a") as fh:

            def progress(root, vecs):
                fh.write(f"root {root} {len(vecs)}\n")
                fh.writelines(" ".join(map(str, v)) + "\n" for v in vecs)
                fh.flush()

            vals = V.enumerate_valuations(g, roots=todo, progress=progress, workers=self.config.threads)
        merged = {f.key: f for f in vals}
        for v in vectors:
            f = V.Valuation(v, g)
            merged.setdefault(f.key, f)
        partial.unlink()
        return V.sort_valuations(merged.values())

    def vgeom(self, name: str) -> V.ValuationGeometry:
        name = canonical_name(name)
        if name not in self._vgeom:
            vals, types = self.valuations(name)
            g = self.geometry(name)
            rel = f"vgeom/{name}-{g.digest()[:16]}.vgeom"
            text = self.cache.read(rel) if self.cache is not None else None
            if text is not None:
                vg = V.parse_vgeometry(text, g, vals)
                if vg.types != types:
                    raise CacheError(self.cache.path(rel), "cached types disagree with the signatures")
            else:
                vg = V.build_valuation_geometry(g, vals, types)
                if name == "HJ":
                    V.classify_ccc_lines(vg)
                if self.cache is not None:
                    self.cache.write(rel, V.format_vgeometry(vg))
            self._vgeom[name] = vg
        return self._vgeom[name]

    def model(self, name: str) -> tuple[G.Geometry, list[int]]:
        name = canonical_name(name)
        if name not in self._models:
            source, ptypes, ltypes = MODEL_PARTS[name]
            self._models[name] = V.subgeometry_by_types(self.vgeom(source), ptypes, ltypes, name)
        return self._models[name]

    def neighboring_pairs(self, name: str):
        if name not in self._pairs:
            self._pairs[name] = V.neighboring_pairs(self.vgeom(name).matrix)
        return self._pairs[name]

    # -- embeddings -----------------------------------------------------

    def embedding(self, small: str, big: str, budget: int | None = None) -> E.SearchResult:
        small, big = canonical_name(small), canonical_name(big)
        budget = budget or self.config.budget
        memo = (small, big)
        if memo in self._emb:
            return self._emb[memo]
        gs, gb = self.geometry(small), self.geometry(big)
        key = cache_key(gs.digest(), gb.digest())
        rel = f"emb/{small}-{big}-{key}.emb"
        none_rel = f"emb/{small}-{big}-{key}.none"
        result = None
        if self.cache is not None:
            text = self.cache.read(rel)
            if text is not None:
                emb = E.parse_embedding(text, gs, gb)
                if not E.verify_embedding(emb).ok:
                    raise CacheError(self.cache.path(rel), "cached embedding fails verification")
                result = E.SearchResult(E.FOUND, emb)
            elif self.cache.read(none_rel) is not None:
                result = E.SearchResult(E.NONE)
        if result is None:
            result = E.find_embedding(gs, gb, budget=budget, first_targets=self.orbit_reps(big))
            if self.cache is not None:
                if result.found:
                    self.cache.write(rel, E.format_embedding(result.embedding))
                elif result.status == E.NONE:
                    self.cache.write(none_rel, "none\n")
        if result.status != E.BUDGET:
            self._emb[memo] = result
        return result


def _read_checkpoint(path: Path, g: G.Geometry):
    done, vectors = set(), []
    if not path.exists():
        return done, vectors
    lines = path.read_text().splitlines()
    if not lines or lines[0] != f"VALS-PARTIAL v1 {g.digest()}":
        path.unlink()
        return set(), []
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) != 3 or parts[0] != "root":
            break
        root, k = int(parts[1]), int(parts[2])
        block = lines[i + 1 : i + 1 + k]
        if len(block) < k:
            break  # interrupted mid-write; redo this root
        vectors += [tuple(int(t) for t in ln.split()) for ln in block]
        done.add(root)
        i += 1 + k
    return done, vectors


# ---------------------------------------------------------------------------
# checks


class Recorder:
    """Collects checks; each check's runtime is the time since the previous one."""

    def __init__(self, report: VerificationReport):
        self.report = report
        self._t = time.perf_counter()

    def add(self, id_, description, expected, observed, ok=None, status=None):
        now = time.perf_counter()
        if status is None:
            if ok is None:
                ok = _plain_eq(expected, observed)
            status = PASS if ok else FAIL
        check = Check(id_, description, expected, observed, status, now - self._t)
        self._t = now
        log.info("%-16s %s", status, id_)
        return self.report.add(check)

    def mark(self):
        self._t = time.perf_counter()


def _plain_eq(a, b) -> bool:
    from .report import _plain

    return _plain(a) == _plain(b)


def _stats_checks(ws: Workspace, rec: Recorder, name: str) -> None:
    ng = ws.named(name)
    g = ng.geometry
    points, lines, order, diameter, gp = C.EXPECTED[name]
    tag = name.lower()
    rec.add(f"{tag}.points", f"{name} point count", points, g.num_points)
    rec.add(f"{tag}.lines", f"{name} line count", lines, g.num_lines)
    rec.add(f"{tag}.order", f"{name} order (s,t)", list(order), _order(g))
    rec.add(f"{tag}.diameter", f"{name} diameter", diameter, g.diameter)
    rec.add(f"{tag}.near-polygon", f"{name} is a near polygon", True, G.is_near_polygon(g).ok)
    if gp is not None:
        rec.add(f"{tag}.generalized-polygon", f"{name} generalized polygon test", gp, G.is_generalized_polygon(g).ok)


def check_h21(ws, rec):
    _stats_checks(ws, rec, "H21")


def check_order_two_two(ws, rec):
    for name in ("H2", "H2D", "L3cubed"):
        _stats_checks(ws, rec, name)
    found = []
    for name in ("H2", "H2D", "L3cubed"):
        res = ws.embedding("H21", name)
        rec.add(
            f"embed.h21-{name.lower()}",
            f"H(2,1) embeds isometrically in {name}",
            E.FOUND if name == "H2D" else E.NONE,
            res.status,
        )
        if res.found:
            found.append(name)
    rec.add("hexagons.h21-host", "geometries of order (2,2) containing H(2,1)", ["H2D"], found)
    for name in ("H2", "H2D", "L3cubed"):
        g = ws.geometry(name)
        rec.add(f"{name.lower()}.count-identity", f"{name} point-count identity", True, G.check_count_identity(g).ok)
        n2 = sorted({int(c) for c in (g.distance_matrix == 2).sum(axis=1)})
        rec.add(f"{name.lower()}.n2", f"{name} points at distance 2, (v+9)/3", [(g.num_points + 9) // 3], n2)
    res = G.graph_isomorphic(ws.geometry("H2"), ws.geometry("H2D"), budget=ws.config.budget,
                             first_targets=ws.orbit_reps("H2D"))
    rec.add("hexagons.distinct", "H2 and H2D are not isomorphic", E.NONE, res.status)


def check_hj(ws, rec):
    _stats_checks(ws, rec, "HJ")
    prov = ws.named("HJ").provenance
    rec.add("hj.class-size", "HJ involution class size", 315, prov.get("class_size"))
    rec.add("hj.rejected-products", "commuting pairs whose product leaves the class", 0, prov.get("rejected_pairs"))
    ia = G.intersection_array(ws.geometry("HJ"))
    rec.add("hj.intersection-array", "HJ intersection array", [[10, 8, 8, 2], [1, 1, 4, 5]], ia)


def check_g24(ws, rec):
    _stats_checks(ws, rec, "G24")
    prov = ws.named("G24").provenance
    rec.add("g24.class-size", "G24 involution class size", 4095, prov.get("class_size"))
    kept = sorted(s for s in prov.get("orbit_sizes", []) if s in (1365, 13650))
    rec.add("g24.line-orbits", "retained commuting-triple orbit sizes", [1365, 13650], kept)
    rec.add("g24.all-orbits", "all commuting-triple orbit sizes", None, prov.get("orbit_sizes"), status=INFO)


def type_table_checks(ws, rec, name):
    key = VALUATION_SOURCES[name]
    table, _ = V.TABLES[key]
    hyper = V.TABLE_H2D_HYPERPLANES if name == "H2D" else None
    vg = ws.vgeom(name)
    total = sum(row[0] for row in table.values())
    rec.add(f"{key}.valuations.count", f"number of valuations of {name}", total, len(vg.valuations))
    for row in V.table_types(vg, table, hyper):
        rec.add(f"{key}.type.{row['type']}", f"{name} valuations of type {row['type']}",
                row["expected"], row["observed"], ok=row["pass"])


def line_table_checks(ws, rec, name):
    key = VALUATION_SOURCES[name]
    _, lines = V.TABLES[key]
    vg = ws.vgeom(name)
    by_lt = {}
    for row in V.table_incidences(vg, lines):
        by_lt.setdefault(row["line_type"], []).append(row)
    for lt in sorted(by_lt):
        rows = by_lt[lt]
        expected = {r["point_type"]: r["expected"] for r in rows}
        observed = {r["point_type"]: r["observed"] for r in rows}
        rec.add(f"{key}.lines.{lt}", f"{name} lines of type {lt} per point type", expected, observed,
                ok=all(r["pass"] for r in rows))


def check_h2d_types(ws, rec):
    type_table_checks(ws, rec, "H2D")


def check_h2d_lines(ws, rec):
    line_table_checks(ws, rec, "H2D")


def check_hj_types(ws, rec):
    type_table_checks(ws, rec, "HJ")


def check_hj_lines(ws, rec):
    line_table_checks(ws, rec, "HJ")


LEMMAS = {
    "b-connected": ("H2D", "type-B valuations joined by ABB/BBB lines form a connected graph"),
    "bc-noncollinear": ("HJ", "B/C valuations on distinct lines through a type-C valuation are non-collinear"),
    "b-lines-bijection": ("HJ", "BBB lines through a type-B valuation biject onto the lines through its zero"),
    "ccc-special": ("HJ", "one special CCC line per type-C valuation; ordinary zero points non-collinear"),
    "c-connected": ("HJ", "type-C valuations joined by ACC and ordinary CCC lines form a connected graph"),
}


def run_lemma(ws, lemma_id):
    name, _ = LEMMAS[lemma_id]
    vg = ws.vgeom(name)
    fn = {
        "b-connected": V.lemma_b_connectivity,
        "bc-noncollinear": V.lemma_bc_noncollinear,
        "b-lines-bijection": V.lemma_b_lines_bijection,
        "ccc-special": V.classify_ccc_lines,
        "c-connected": V.lemma_c_connectivity,
    }[lemma_id]
    return fn(vg)


def check_lemmas(ws, rec, only=None):
    for lemma_id, (name, desc) in LEMMAS.items():
        if only and lemma_id != only:
            continue
        verdict = run_lemma(ws, lemma_id)
        detail = dict(verdict.detail or {})
        alt = detail.pop("zero_point_reading", None)
        detail.pop("zero_point_witness", None)
        rec.add(f"lemma.{lemma_id}", desc, True, {"ok": verdict.ok, **detail}, ok=verdict.ok)
        if alt is not None:
            rec.add(f"lemma.{lemma_id}.zero-points", "same pairs: zero points non-collinear in HJ",
                    None, alt, status=INFO)


def _classical_map(ws, base: str, model: str) -> E.EmbeddingMap:
    """Base point ``x`` goes to the model point carrying its classical valuation."""
    g = ws.geometry(base)
    vg = ws.vgeom(base)
    mg, pts = ws.model(model)
    pos = {v: k for k, v in enumerate(pts)}
    phi = []
    for x in range(g.num_points):
        i = vg.index_of[V.classical_valuation(g, x).key]
        phi.append(pos[i])
    return E.EmbeddingMap(g, mg, tuple(phi))


def _model_checks(ws, rec, model, base, points, line_counts, order):
    mg, _ = ws.model(model)
    vg = ws.vgeom(base)
    tag = model.lower()
    rec.add(f"{tag}.points", f"{model} point count", points, mg.num_points)
    rec.add(f"{tag}.lines", f"{model} line count", sum(line_counts.values()), mg.num_lines)
    types = Counter(t for t in vg.line_types if t in MODEL_PARTS[model][2])
    rec.add(f"{tag}.line-types", f"{model} lines by type", line_counts, dict(sorted(types.items())))
    rec.add(f"{tag}.order", f"{model} order (s,t)", list(order), _order(mg))
    rec.add(f"{tag}.near-polygon", f"{model} is a near polygon", True, G.is_near_polygon(mg).ok)
    emb = _classical_map(ws, base, model)
    rec.add(f"{tag}.type-a-embedding", f"type-A points of {model} form an isometric full {base}",
            True, E.verify_embedding(emb).ok)
    return mg


def check_vab(ws, rec):
    mg = _model_checks(ws, rec, "VAB", "H2D", 315, {"AAA": 63, "ABB": 126, "BBB": 336}, (2, 4))
    rec.add("vab.intersection-array", "VAB intersection array equals that of HJ",
            G.intersection_array(ws.geometry("HJ")), G.intersection_array(mg))


def check_gval(ws, rec):
    _model_checks(ws, rec, "GVAL", "HJ", 4095,
                  {"AAA": 525, "ABB": 315, "ACC": 1575, "BBC": 3150, "CCC": 9450}, (2, 10))


def check_oracles(ws, rec):
    line = G.line_geometry(3)
    cases = [
        ("grid", G.direct_product(line, line, "grid"), V.brute_force_valuations, 15),
        ("w2", C.build_w2().geometry, V.brute_force_valuations, 21),
        ("h21", ws.geometry("H21"), V.exhaustive_valuations, 255),
    ]
    for tag, g, oracle, count in cases:
        fast = V.enumerate_valuations(g)
        slow = oracle(g)
        rec.add(f"oracle.{tag}", f"enumeration equals the exhaustive oracle on {tag}",
                {"count": count, "equal": True}, {"count": len(fast), "equal": fast == slow})


def check_star(ws, rec):
    rng = np.random.default_rng(ws.config.seed)
    for name in ("H2D", "HJ"):
        key = VALUATION_SOURCES[name]
        mat = ws.vgeom(name).matrix.astype(np.int16)
        ii, jj, _ = ws.neighboring_pairs(name)
        pick = rng.choice(len(ii), size=min(STAR_PAIR_SAMPLES, len(ii)), replace=False)
        a, b = mat[ii[pick]], mat[jj[pick]]
        _, ab = V.star_rows(a, b)
        _, ba = V.star_rows(b, a)
        n13, a_c = V.star_rows(a, ab)
        n23, b_c = V.star_rows(b, ab)
        ok = {
            "commutative": bool((ab == ba).all()),
            "first_with_product": bool(n13.all() and (a_c == b).all()),
            "second_with_product": bool(n23.all() and (b_c == a).all()),
            "product_is_valuation": bool(V.valid_rows(ws.geometry(name), ab).all()),
        }
        rec.add(f"star.{key}.pairs", f"product laws on {len(pick)} neighbouring pairs of {name}",
                {k: True for k in ok}, ok)
        pick = rng.choice(len(mat), size=min(STAR_SELF_SAMPLES, len(mat)), replace=False)
        _, ff = V.star_rows(mat[pick], mat[pick])
        rec.add(f"star.{key}.self", f"f * f = f on {len(pick)} valuations of {name}", True,
                bool((ff == mat[pick]).all()))


def _induced_checks(ws, rec, small, big):
    res = ws.embedding(small, big)
    tag = f"{small.lower()}-{big.lower()}"
    rec.add(f"embed.{tag}", f"{small} embeds isometrically in {big}", E.FOUND, res.status)
    if not res.found:
        return None
    ind = V.induced_valuations(res.embedding)
    expected = {k: True for k in ind.verdicts}
    rec.add(f"induced.{tag}", f"valuations induced on {small} by points of {big}", expected, ind.verdicts)
    types = V.type_lookup(ws.vgeom(small), ind.matrix)
    by_dist = {}
    for t, d in zip(types, ind.distance.tolist()):
        by_dist.setdefault(str(d), set()).add(t)
    observed = {d: sorted(ts, key=str) for d, ts in sorted(by_dist.items())}
    return res, ind, types, observed


def check_tower(ws, rec):
    out = _induced_checks(ws, rec, "H2D", "HJ")
    if out:
        _, _, types, observed = out
        rec.add("induced.h2d-hj.types", "types induced on H2D by points of HJ",
                {"A": 63, "B": 252}, dict(sorted(Counter(types).items())))
    out = _induced_checks(ws, rec, "HJ", "G24")
    if not out:
        return
    res, ind, types, observed = out
    rec.add("induced.hj-g24.types", "types induced on HJ by points of G24",
            {"A": 315, "B": 630, "C": 3150}, dict(sorted(Counter(types).items())))
    rec.add("induced.hj-g24.by-distance", "induced types by distance from the embedded HJ",
            {"0": ["A"], "1": ["B", "C"]}, observed)
    emb = res.embedding
    image = set(emb.point_map)
    proj_ok = True
    for x in range(emb.target.num_points):
        p = E.projection(emb, x)
        if x in image:
            proj_ok &= p == x
        elif ind.distance[x] == 1:
            proj_ok &= p is not None and emb.target.distance_matrix[x, p] == 1
        else:
            proj_ok &= p is None
    rec.add("projection.hj-g24", "projection onto the embedded HJ is well defined", True, bool(proj_ok))


def check_extended(ws, rec):
    budget = ws.config.iso_budget
    hj = ws.geometry("HJ")
    vab = ws.geometry("VAB")
    res = G.graph_isomorphic(hj, vab, budget=budget)
    rec.add("iso.hj-vab", "HJ is isomorphic to VAB (direct search)", EXTENDED_PASS, res.status,
            status=_extended(res))
    _model_route(ws, rec, "H2D", "HJ", "VAB", "iso.hj-vab.model")
    g24 = ws.geometry("G24")
    gval = ws.geometry("GVAL")
    res = G.graph_isomorphic(g24, gval, budget=budget)
    rec.add("iso.g24-gval", "G24 is isomorphic to GVAL (direct search)", EXTENDED_PASS, res.status,
            status=_extended(res))
    inv = {
        "points": [g24.num_points, gval.num_points],
        "lines": [g24.num_lines, gval.num_lines],
        "order": [_order(g24), _order(gval)],
        "distance_distributions": [_distance_profile(g24), _distance_profile(gval)],
        "line_types": [_induced_line_types(ws, "HJ", "G24"), _model_line_types(ws, "HJ", "GVAL")],
    }
    same = all(a == b for a, b in inv.values())
    rec.add("iso.g24-gval.invariants", "G24 and GVAL share counts, order, distance and line-type profiles",
            True, same, status=EXTENDED_PASS if same else FAIL)
    _model_route(ws, rec, "HJ", "G24", "GVAL", "iso.g24-gval.model")


def _induced_line_types(ws, small, big):
    """Line types of ``big`` with points typed by the valuation they induce on ``small``."""
    res = ws.embedding(small, big)
    if not res.found:
        return None
    types = V.type_lookup(ws.vgeom(small), V.induced_valuations(res.embedding).matrix)
    return sorted(Counter("".join(sorted(str(types[p]) for p in line)) for line in res.embedding.target.lines).items())


def _model_line_types(ws, base, model):
    vg = ws.vgeom(base)
    mg, pts = ws.model(model)
    return sorted(Counter("".join(sorted(vg.types[pts[p]] for p in line)) for line in mg.lines).items())


def _order(g):
    o = G.has_order(g)
    return [o.s, o.t] if o else None


def _distance_profile(g):
    rows = [tuple(g.distance_distribution(x)) for x in range(g.num_points)]
    return sorted(Counter(rows).items())


def _extended(res) -> str:
    if res.found:
        return EXTENDED_PASS
    return BUDGET_EXCEEDED if res.status == E.BUDGET else FAIL


def _model_route(ws, rec, small, big, model, id_):
    """Isomorphism ``big -> model`` given by ``x -> f_x`` for an embedded ``small``."""
    desc = f"{big} is isomorphic to {model} via induced valuations"
    res = ws.embedding(small, big)
    if not res.found:
        status = BUDGET_EXCEEDED if res.status == E.BUDGET else FAIL
        rec.add(id_, desc, EXTENDED_PASS, res.status, status=status)
        return
    mg, pts = ws.model(model)
    iso = V.valuation_model_map(res.embedding, ws.vgeom(small), pts, mg)
    ok = len(set(iso.point_map)) == mg.num_points and mg.num_lines == res.embedding.target.num_lines \
        and E.verify_embedding(iso).ok
    rec.add(id_, desc, EXTENDED_PASS, EXTENDED_PASS if ok else "not an isomorphism",
            status=EXTENDED_PASS if ok else FAIL)


STAGES = (
    ("h21", check_h21),
    ("order-2-2", check_order_two_two),
    ("hj", check_hj),
    ("g24", check_g24),
    ("h2d-types", check_h2d_types),
    ("h2d-lines", check_h2d_lines),
    ("hj-types", check_hj_types),
    ("hj-lines", check_hj_lines),
    ("lemmas", check_lemmas),
    ("vab", check_vab),
    ("gval", check_gval),
    ("oracles", check_oracles),
    ("star", check_star),
    ("tower", check_tower),
    ("extended", check_extended),
)


def run_stages(ws: Workspace, stages=None) -> VerificationReport:
    report = VerificationReport()
    rec = Recorder(report)
    for name, fn in STAGES:
        if stages is None or name in stages:
            log.info("stage %s", name)
            rec.mark()
            fn(ws, rec)
    return report


def full_pipeline(config: PipelineConfig) -> VerificationReport:
    ws = Workspace(config)
    report = run_stages(ws)
    if ws.cache is not None:
        ws.cache.write("reports/pipeline.tsv", report.to_tsv())
        ws.cache.write("reports/pipeline.json", report.to_json())
        ws.cache.path("reports/timings.tsv").write_text(report.timings_tsv())
    return report


def verify_geometries(ws: Workspace, names) -> VerificationReport:
    report = VerificationReport()
    rec = Recorder(report)
    for name in names:
        _stats_checks(ws, rec, canonical_name(name))
    return report


def table_rows(ws: Workspace, key: str) -> list[dict]:
    """Cell-by-cell rows for the type table and line table of ``h2d`` or ``hj``."""
    name = {"h2d": "H2D", "hj": "HJ"}[key]
    table, lines = V.TABLES[key]
    vg = ws.vgeom(name)
    hyper = V.TABLE_H2D_HYPERPLANES if key == "h2d" else None
    rows = []
    for row in V.table_types(vg, table, hyper):
        for col, exp in row["expected"].items():
            obs = row["observed"][col]
            obs = obs[0] if isinstance(obs, list) and len(obs) == 1 else obs
            if col == "distribution" and isinstance(obs, tuple):
                obs = list(obs)
            rows.append({"table": f"{key}-types", "row": row["type"], "column": col,
                         "expected": exp, "observed": obs, "pass": _plain_eq(exp, obs)})
    for row in V.table_incidences(vg, lines):
        rows.append({"table": f"{key}-lines", "row": row["line_type"], "column": row["point_type"],
                     "expected": row["expected"], "observed": row["observed"], "pass": row["pass"]})
    return rows
