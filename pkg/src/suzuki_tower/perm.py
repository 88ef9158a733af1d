"""Permutation arithmetic, generator files and conjugation orbits.

Permutations act on the right: ``compose(p, q)`` applies ``p`` first and then
``q``, and ``conjugate(x, g)`` is ``g^-1 x g``.  Image arrays are 0-based.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_DTYPE = np.uint16


class PermutationError(ValueError):
    pass


class GeneratorFileError(ValueError):
    """Raised for a malformed generator file; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Permutation:
    """A bijection of ``{0..n-1}`` stored as a read-only image array."""

    __slots__ = ("images", "_key")

    def __init__(self, images: Iterable[int], check: bool = True):
        arr = np.array(images, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise PermutationError("permutation needs a nonempty 1-d image list")
        if check:
            if arr.min() < 0 or arr.max() >= arr.size:
                raise PermutationError("image out of range")
            if np.unique(arr).size != arr.size:
                raise PermutationError("images are not a bijection")
        arr = arr.astype(_DTYPE)
        arr.flags.writeable = False
        self.images = arr
        self._key = arr.tobytes()

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n), check=False)

    @classmethod
    def _raw(cls, arr: np.ndarray) -> "Permutation":
        return cls(arr, check=False)

    @property
    def degree(self) -> int:
        return int(self.images.size)

    @property
    def key(self) -> bytes:
        """Canonical byte key used for hashing and class lookup."""
        return self._key

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.images, np.arange(self.degree)))

    def __eq__(self, other):
        return isinstance(other, Permutation) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other: "Permutation") -> bool:
        return tuple(self.images.tolist()) < tuple(other.images.tolist())

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __len__(self):
        return self.degree

    def __getitem__(self, i):
        return int(self.images[i])

    def __repr__(self):
        return f"Permutation({self.cycles()!r}, degree={self.degree})"

    def cycles(self) -> list[tuple[int, ...]]:
        """Nontrivial cycles, each starting at its smallest point."""
        seen = np.zeros(self.degree, dtype=bool)
        out = []
        img = self.images
        for start in range(self.degree):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            j = int(img[start])
            while j != start:
                cyc.append(j)
                seen[j] = True
                j = int(img[j])
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def cycle_lengths(self) -> list[int]:
        seen = np.zeros(self.degree, dtype=bool)
        img = self.images
        lengths = []
        for start in range(self.degree):
            if seen[start]:
                continue
            n = 0
            j = start
            while not seen[j]:
                seen[j] = True
                j = int(img[j])
                n += 1
            lengths.append(n)
        return lengths


def _check_degrees(*perms: Permutation) -> None:
    n = perms[0].degree
    for p in perms[1:]:
        if p.degree != n:
            raise PermutationError(f"degree mismatch: {n} vs {p.degree}")


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Apply ``p`` and then ``q``."""
    _check_degrees(p, q)
    return Permutation._raw(q.images[p.images])


def inverse(p: Permutation) -> Permutation:
    inv = np.empty_like(p.images)
    inv[p.images] = np.arange(p.degree, dtype=_DTYPE)
    return Permutation._raw(inv)


def conjugate(x: Permutation, g: Permutation) -> Permutation:
    """``g^-1 x g``: maps ``g(i)`` to ``g(x(i))``."""
    _check_degrees(x, g)
    out = np.empty_like(x.images)
    out[g.images] = g.images[x.images]
    return Permutation._raw(out)


def power(p: Permutation, k: int) -> Permutation:
    result = Permutation.identity(p.degree)
    base = p
    if k < 0:
        base, k = inverse(p), -k
    while k:
        if k & 1:
            result = compose(result, base)
        base = compose(base, base)
        k >>= 1
    return result


def element_order(p: Permutation) -> int:
    return math.lcm(*p.cycle_lengths())


def commutes(p: Permutation, q: Permutation) -> bool:
    _check_degrees(p, q)
    return bool(np.array_equal(q.images[p.images], p.images[q.images]))


def is_involution(p: Permutation) -> bool:
    return not p.is_identity() and bool(
        np.array_equal(p.images[p.images], np.arange(p.degree))
    )


@dataclass(frozen=True)
class GeneratorSet:
    degree: int
    generators: tuple[Permutation, ...]
    label: str = ""

    def __post_init__(self):
        if self.degree <= 0:
            raise PermutationError("degree must be positive")
        if not self.generators:
            raise PermutationError("at least one generator is required")
        for g in self.generators:
            if g.degree != self.degree:
                raise PermutationError(
                    f"generator of degree {g.degree} in a set of degree {self.degree}"
                )
            if g.is_identity():
                raise PermutationError("identity is not allowed as a generator")

    def point_orbit(self, start: int = 0) -> list[int]:
        seen = {start}
        todo = [start]
        imgs = [g.images for g in self.generators]
        while todo:
            x = todo.pop()
            for img in imgs:
                y = int(img[x])
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return sorted(seen)

    def is_transitive(self) -> bool:
        return len(self.point_orbit(0)) == self.degree


def parse_generators(text: str | Iterable[str], label: str = "") -> GeneratorSet:
    """Parse the plain-text generator format.

    First non-comment line is the degree ``n``; every further nonempty line
    lists the 1-based images of ``1..n``.  Lines starting with ``#`` are
    ignored.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    degree = None
    gens = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values = [int(tok) for tok in line.split()]
        except ValueError:
            raise GeneratorFileError(lineno, "non-integer token") from None
        if degree is None:
            if len(values) != 1 or values[0] <= 0:
                raise GeneratorFileError(lineno, "expected a single positive degree")
            degree = values[0]
            continue
        if len(values) != degree:
            raise GeneratorFileError(
                lineno, f"expected {degree} images, found {len(values)}"
            )
        if min(values) < 1 or max(values) > degree:
            raise GeneratorFileError(lineno, f"image outside 1..{degree}")
        if len(set(values)) != degree:
            dup = next(v for v in values if values.count(v) > 1)
            raise GeneratorFileError(lineno, f"value {dup} repeated; not a bijection")
        p = Permutation([v - 1 for v in values], check=False)
        if p.is_identity():
            raise GeneratorFileError(lineno, "identity generator")
        gens.append(p)
    if degree is None:
        raise GeneratorFileError(len(lines) or 1, "missing degree line")
    if not gens:
        raise GeneratorFileError(len(lines) or 1, "no generators")
    return GeneratorSet(degree, tuple(gens), label)


def read_generators(path, label: str | None = None) -> GeneratorSet:
    from pathlib import Path

    path = Path(path)
    return parse_generators(path.read_text(), label=label or path.stem)


def format_generators(gens: GeneratorSet) -> str:
    out = [f"# {gens.label}" if gens.label else "# generators", str(gens.degree)]
    for g in gens.generators:
        out.append(" ".join(str(int(v) + 1) for v in g.images))
    return "\n".join(out) + "\n"


@dataclass(frozen=True, eq=False)
class InvolutionClass:
    """A conjugacy class of involutions, sorted by image array.

    ``matrix`` holds one image array per row; ``index_of`` maps a
    permutation key to its row.
    """

    elements: tuple[Permutation, ...]
    matrix: np.ndarray = field(repr=False)
    index_of: dict = field(repr=False)

    @classmethod
    def from_elements(cls, elements: Iterable[Permutation]) -> "InvolutionClass":
        elems = list(elements)
        if not elems:
            raise PermutationError("empty class")
        mat = np.stack([e.images for e in elems])
        order = np.lexsort(mat.T[::-1])
        mat = np.ascontiguousarray(mat[order])
        mat.flags.writeable = False
        sorted_elems = tuple(Permutation._raw(row) for row in mat)
        index = {e.key: i for i, e in enumerate(sorted_elems)}
        return cls(sorted_elems, mat, index)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i) -> Permutation:
        return self.elements[i]

    def __contains__(self, p: Permutation) -> bool:
        return p.key in self.index_of

    def index(self, p: Permutation) -> int:
        return self.index_of[p.key]

    def conjugation_action(self, g: Permutation) -> np.ndarray:
        """Index permutation induced on the class by conjugation with ``g``.

        Raises if some conjugate leaves the class.
        """
        m = self.matrix
        conj = np.empty_like(m)
        conj[:, g.images] = g.images[m]
        out = np.empty(len(self), dtype=np.int64)
        lookup = self.index_of
        for i, row in enumerate(conj):
            j = lookup.get(row.tobytes())
            if j is None:
                raise PermutationError("class is not closed under conjugation")
            out[i] = j
        return out


def _conjugation_orbit(gens: GeneratorSet, seed: Permutation, limit: int | None = None):
    """Breadth-first conjugation closure; returns None once ``limit`` is exceeded."""
    seen = {seed.key: seed}
    queue = deque([seed])
    while queue:
        x = queue.popleft()
        for g in gens.generators:
            y = conjugate(x, g)
            if y.key not in seen:
                seen[y.key] = y
                if limit is not None and len(seen) > limit:
                    return None
                queue.append(y)
    return list(seen.values())


def conjugation_class(gens: GeneratorSet, seed: Permutation) -> InvolutionClass:
    if seed.degree != gens.degree:
        raise PermutationError(f"degree mismatch: {seed.degree} vs {gens.degree}")
    if not is_involution(seed):
        raise PermutationError("seed is not an involution")
    return InvolutionClass.from_elements(_conjugation_orbit(gens, seed))


def random_elements(gens: GeneratorSet, seed: int = 1, max_length: int = 60):
    """Deterministic stream of random words in the generators (and inverses)."""
    rng = random.Random(seed)
    letters = list(gens.generators) + [inverse(g) for g in gens.generators]
    idx = np.arange(gens.degree, dtype=_DTYPE)
    while True:
        length = rng.randint(1, max_length)
        arr = idx
        for _ in range(length):
            arr = rng.choice(letters).images[arr]
        yield Permutation._raw(arr)


def find_class_involution(
    gens: GeneratorSet, target_size: int, budget: int = 2000, seed: int = 1
) -> Permutation:
    """Return an involution whose conjugacy class has ``target_size`` elements.

    Random words are powered to involutions.  Classes already measured are
    remembered so each size test runs once per class.
    """
    if target_size == 1:
        # central involutions are fixed by every generator; try the generators' powers first
        candidates = []
        for g in gens.generators:
            o = element_order(g)
            if o % 2 == 0:
                candidates.append(power(g, o // 2))
        for c in candidates:
            if all(compose(c, g) == compose(g, c) for g in gens.generators):
                return c
    rejected: set[bytes] = set()
    stream = random_elements(gens, seed)
    for _ in range(budget):
        p = next(stream)
        o = element_order(p)
        if o % 2:
            continue
        x = power(p, o // 2)
        if x.key in rejected:
            continue
        orbit = _conjugation_orbit(gens, x, limit=target_size)
        if orbit is not None and len(orbit) == target_size:
            return x
        if orbit is not None:
            rejected.update(e.key for e in orbit)
        else:
            rejected.add(x.key)
    raise RuntimeError(
        f"no involution with class size {target_size} found in {budget} random elements"
    )


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return sorted(out.values(), key=lambda g: (len(g), g[0]))


def canonical_triple(t: Sequence[int]) -> tuple[int, int, int]:
    a, b, c = sorted(int(v) for v in t)
    return (a, b, c)


def orbit_partition_of_triples(
    gens: GeneratorSet,
    cls: InvolutionClass,
    triples: Iterable[Sequence[int]],
) -> list[list[tuple[int, int, int]]]:
    """Split index triples of class elements into conjugation orbits.

    Orbits are returned sorted by (size, first triple); every triple is a
    sorted tuple of class indices.
    """
    tri = sorted({canonical_triple(t) for t in triples})
    pos = {t: i for i, t in enumerate(tri)}
    uf = UnionFind(len(tri))
    for g in gens.generators:
        act = cls.conjugation_action(g)
        for i, (a, b, c) in enumerate(tri):
            img = canonical_triple((act[a], act[b], act[c]))
            j = pos.get(img)
            if j is None:
                raise PermutationError(
                    f"triple {tri[i]} is mapped outside the given set by a generator"
                )
            uf.union(i, j)
    return [[tri[i] for i in grp] for grp in uf.groups()]


def commuting_pairs(cls: InvolutionClass, sample: int = 12, chunk: int = 512):
    """All index pairs ``i < j`` of commuting class elements.

    A few image positions are compared first for every pair; only pairs that
    agree there are checked in full.
    """
    m = cls.matrix.astype(np.int64)
    k, n = m.shape
    rng = np.random.default_rng(0)
    cols = np.sort(rng.choice(n, size=min(sample, n), replace=False))
    sub = m[:, cols]
    pairs = []
    for i in range(k - 1):
        x = m[i]
        rest = slice(i + 1, k)
        # (x then y)[c] = y[x[c]]; (y then x)[c] = x[y[c]]
        xy = m[rest][:, x[cols]]
        yx = x[sub[rest]]
        cand = np.nonzero((xy == yx).all(axis=1))[0] + i + 1
        for j in cand:
            y = m[j]
            if np.array_equal(y[x], x[y]):
                pairs.append((i, int(j)))
    return pairs


def product_triples(cls: InvolutionClass, pairs=None):
    """Triples ``{x, y, xy}`` of class members from commuting pairs.

    Returns ``(triples, rejected)`` where ``rejected`` counts commuting pairs
    whose product lies outside the class.
    """
    if pairs is None:
        pairs = commuting_pairs(cls)
    m = cls.matrix
    triples = set()
    rejected = 0
    for i, j in pairs:
        prod = m[j][m[i]]
        k = cls.index_of.get(prod.tobytes())
        if k is None:
            rejected += 1
            continue
        triples.add(canonical_triple((i, j, k)))
    return sorted(triples), rejected
