"""Degree-constrained multigraphs and complete pairings.

Moments of products of Gaussian monomials expand over perfect matchings
of labeled half-edges ("legs"), one leg per factor. Forgetting which
leg carries which edge end collapses a matching onto a multigraph whose
vertices are the variables; the number of matchings landing on a given
multigraph is its multiplicity. This module owns that combinatorial
layer: enumerating both levels, multiplicities, connectivity, component
signs, set partitions for Moebius inversion, and the correspondence
between degree-2 multigraphs and permutations.

Everything here is exact integer or Fraction arithmetic; no floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = [
    "Multigraph",
    "PairingDiagram",
    "enumerate_multigraphs",
    "enumerate_pairings",
    "enumerate_partitions",
    "pairing_multiplicity",
    "delta_paper",
    "delta_bar",
    "multigraph_sign",
    "is_connected",
    "connected_components",
    "permutation_to_multigraph",
    "multigraph_to_permutations",
    "permutation_lift_count",
    "multiplicity_report",
    "PARTITION_CAP",
]

# Documented cap for set-partition enumeration (Bell numbers explode).
PARTITION_CAP = 14


@dataclass(frozen=True)
class Multigraph:
    """Undirected multigraph as a symmetric adjacency matrix.

    q[i][j] counts edges between i and j; a loop q[i][i] consumes two
    of vertex i's degree. The allow_loops flag records which family the
    graph was enumerated in and is excluded from equality so that
    matchings binned from mixed enumerations compare by shape alone.
    """

    q: tuple[tuple[int, ...], ...]
    allow_loops: bool = field(default=False, compare=False)

    def __post_init__(self):
        n = len(self.q)
        for i, row in enumerate(self.q):
            if len(row) != n:
                raise ValueError("adjacency matrix must be square")
            for j, v in enumerate(row):
                if v < 0:
                    raise ValueError("edge counts must be nonnegative")
                if self.q[j][i] != v:
                    raise ValueError("adjacency matrix must be symmetric")
            if not self.allow_loops and self.q[i][i]:
                raise ValueError("loop present but allow_loops is False")

    @property
    def n(self) -> int:
        return len(self.q)

    def degree(self, i: int) -> int:
        return sum(self.q[i][j] for j in range(self.n) if j != i) + 2 * self.q[i][i]

    def degrees(self) -> tuple[int, ...]:
        return tuple(self.degree(i) for i in range(self.n))

    def upper(self) -> tuple[int, ...]:
        """Row-major upper triangle, diagonal included."""
        return tuple(self.q[i][j] for i in range(self.n) for j in range(i, self.n))


def from_upper(n: int, upper: Sequence[int], allow_loops: bool = False) -> Multigraph:
    """Rebuild a Multigraph from its row-major upper triangle."""
    it = iter(upper)
    q = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            v = next(it)
            q[i][j] = q[j][i] = v
    return Multigraph(tuple(tuple(row) for row in q), allow_loops)


def enumerate_multigraphs(
    degrees: Sequence[int], allow_loops: bool = False
) -> Iterator[Multigraph]:
    """Yield every multigraph with the given vertex degrees exactly once.

    Cells of the upper triangle are filled in row-major order (the
    diagonal cell first within its row when loops are allowed), trying
    values in increasing order, so the output is sorted
    lexicographically on the flattened upper triangle. The empty degree
    sequence yields the single empty multigraph.
    """
    degs = tuple(degrees)
    if any(d < 0 for d in degs):
        raise ValueError("degrees must be nonnegative")
    n = len(degs)
    if n == 0:
        yield Multigraph((), allow_loops)
        return
    cells = [(i, j) for i in range(n) for j in range(i if allow_loops else i + 1, n)]
    q = [[0] * n for _ in range(n)]
    residual = list(degs)

    def fill(idx: int) -> Iterator[Multigraph]:
        if idx == len(cells):
            if all(r == 0 for r in residual):
                yield Multigraph(tuple(tuple(row) for row in q), allow_loops)
            return
        i, j = cells[idx]
        row_ends = idx + 1 == len(cells) or cells[idx + 1][0] != i
        cap = residual[i] // 2 if i == j else min(residual[i], residual[j])
        for v in range(cap + 1):
            take = 2 * v if i == j else v
            if row_ends and residual[i] != take:
                continue
            q[i][j] = q[j][i] = v
            residual[i] -= take
            if i != j:
                residual[j] -= v
            yield from fill(idx + 1)
            residual[i] += take
            if i != j:
                residual[j] += v
            q[i][j] = q[j][i] = 0

    yield from fill(0)


def is_connected(q: Multigraph) -> bool:
    """True when every vertex has positive degree and the support graph
    is one component.

    Loops are ignored when walking the support but do count toward the
    degree, so a single vertex carrying a loop is connected. The empty
    graph has zero components, not one, and returns False.
    """
    n = q.n
    if n == 0:
        return False
    if any(d == 0 for d in q.degrees()):
        return False
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in range(n):
            if w != v and q.q[v][w] and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def connected_components(q: Multigraph) -> list[tuple[tuple[int, ...], Multigraph]]:
    """Split into (vertex tuple, induced sub-multigraph) pairs.

    Degree-zero vertices come out as singleton components. Components
    are ordered by their smallest vertex; reassembling the blocks
    reproduces q.
    """
    n = q.n
    unseen = set(range(n))
    comps = []
    while unseen:
        start = min(unseen)
        comp = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in range(n):
                if w != v and q.q[v][w] and w in unseen and w not in comp:
                    comp.add(w)
                    stack.append(w)
        unseen -= comp
        verts = tuple(sorted(comp))
        sub = tuple(tuple(q.q[a][b] for b in verts) for a in verts)
        comps.append((verts, Multigraph(sub, q.allow_loops)))
    return comps


def multigraph_sign(q: Multigraph) -> int:
    """(-1) to the sum over components of (component size - 1)."""
    exponent = sum(len(verts) - 1 for verts, _ in connected_components(q))
    return -1 if exponent % 2 else 1


def pairing_multiplicity(q: Multigraph, degrees: Sequence[int]) -> int:
    """Number of complete leg pairings that collapse onto q.

    Vertex i owns l_i distinguishable legs. The matchings collapsing to
    q form one orbit under leg relabeling, whose size is

        prod_i l_i!  /  ( prod_{i<j} q_ij!  *  prod_i 2^{q_ii} q_ii! )

    since permuting a bundle of parallel edges, permuting loops, or
    swapping the two feet of a loop leaves the matching unchanged.
    Validated against explicit enumeration (see multiplicity_report).
    """
    degs = tuple(degrees)
    if q.degrees() != degs:
        raise ValueError(f"degree mismatch: graph has {q.degrees()}, expected {degs}")
    num = math.prod(math.factorial(l) for l in degs)
    den = 1
    for i in range(q.n):
        den *= 2 ** q.q[i][i] * math.factorial(q.q[i][i])
        for j in range(i + 1, q.n):
            den *= math.factorial(q.q[i][j])
    val, rem = divmod(num, den)
    assert rem == 0, "multiplicity must be an integer"
    return val


def delta_paper(q: Multigraph, degrees: Sequence[int]) -> int:
    """Verbatim product formula for the matching count, comparison only.

    Evaluates prod over i <= j of C(l_i, q_ij) C(l_j, q_ij) q_ij!.
    This closed form overcounts whenever a vertex joins two or more
    distinct neighbors (a triangle of single edges gives 64 where
    enumeration gives 8); pairing_multiplicity is authoritative and
    multiplicity_report records the disagreements.
    """
    degs = tuple(degrees)
    if q.degrees() != degs:
        raise ValueError(f"degree mismatch: graph has {q.degrees()}, expected {degs}")
    out = 1
    for i in range(q.n):
        for j in range(i, q.n):
            v = q.q[i][j]
            out *= math.comb(degs[i], v) * math.comb(degs[j], v) * math.factorial(v)
    return out


def delta_bar(q: Multigraph, r: int) -> Fraction:
    """Verbatim per-vertex product for squared-modulus multiplicities,
    comparison only.

    Evaluates prod_i r! / (2^{q_ii} q_ii! prod_{j != i} q_ij!). Every
    vertex degree must equal 2r. The product places each off-diagonal
    q_ij! inside both endpoint factors, so it disagrees with the
    bipartite pairing count; complexboson.delta_bar_report records both.
    """
    if r < 1:
        raise ValueError("r must be a positive integer")
    degs = q.degrees()
    if any(d != 2 * r for d in degs):
        raise ValueError(f"every vertex degree must equal {2 * r}, got {degs}")
    out = Fraction(1)
    for i in range(q.n):
        den = 2 ** q.q[i][i] * math.factorial(q.q[i][i])
        for j in range(q.n):
            if j != i:
                den *= math.factorial(q.q[i][j])
        out *= Fraction(math.factorial(r), den)
    return out


def permutation_to_multigraph(sigma: Sequence[int]) -> Multigraph:
    """Symmetrize a permutation into its transition multigraph.

    Each element contributes one edge i -- sigma(i) with the direction
    forgotten; fixed points become loops. Every vertex ends up with
    degree exactly 2 (one outgoing plus one incoming edge end).
    """
    n = len(sigma)
    if sorted(sigma) != list(range(n)):
        raise ValueError("input is not a permutation of 0..n-1")
    q = [[0] * n for _ in range(n)]
    for i, j in enumerate(sigma):
        if i == j:
            q[i][i] += 1
        else:
            q[i][j] += 1
            q[j][i] += 1
    return Multigraph(tuple(tuple(row) for row in q), allow_loops=True)


def multigraph_to_permutations(q: Multigraph) -> list[tuple[int, ...]]:
    """All permutations whose symmetrization is q.

    Requires every vertex degree to equal 2, so each component is a
    loop, a doubled edge, or a simple cycle; a cycle of length >= 3
    lifts to its two directed orientations, the others to one
    permutation each. Output is sorted.
    """
    degs = q.degrees()
    if any(d != 2 for d in degs):
        raise ValueError(f"every vertex degree must equal 2, got {degs}")
    per_component: list[list[dict[int, int]]] = []
    for verts, sub in connected_components(q):
        k = len(verts)
        if k == 1:
            # degree 2 on one vertex forces a single loop
            per_component.append([{verts[0]: verts[0]}])
        elif k == 2:
            a, b = verts
            if sub.q[0][1] != 2:
                raise ValueError("two-vertex component of degree 2 must be a doubled edge")
            per_component.append([{a: b, b: a}])
        else:
            if any(sub.q[i][i] for i in range(k)) or any(
                v > 1 for row in sub.q for v in row
            ):
                raise ValueError("component is not a simple cycle")
            fwd: dict[int, int] = {}
            prev, cur = None, 0
            for _ in range(k):
                nbrs = [w for w in range(k) if sub.q[cur][w] and w != prev]
                nxt = min(nbrs) if prev is None else nbrs[0]
                fwd[verts[cur]] = verts[nxt]
                prev, cur = cur, nxt
            if cur != 0:
                raise ValueError("component is not a single cycle")
            bwd = {v: u for u, v in fwd.items()}
            per_component.append([fwd, bwd])

    results: list[tuple[int, ...]] = []

    def assemble(idx: int, mapping: dict[int, int]) -> None:
        if idx == len(per_component):
            results.append(tuple(mapping[i] for i in range(q.n)))
            return
        for choice in per_component[idx]:
            assemble(idx + 1, {**mapping, **choice})

    assemble(0, {})
    return sorted(results)


def permutation_lift_count(q: Multigraph) -> int:
    """Number of permutations symmetrizing to q (all degrees 2):
    2 per cycle component of length >= 3, 1 per loop or doubled edge.
    Multiplicative over components by construction.
    """
    degs = q.degrees()
    if any(d != 2 for d in degs):
        raise ValueError(f"every vertex degree must equal 2, got {degs}")
    out = 1
    for verts, _ in connected_components(q):
        if len(verts) >= 3:
            out *= 2
    return out


def enumerate_partitions(items: Sequence) -> Iterator[tuple[tuple, ...]]:
    """Yield every set partition of items exactly once.

    Restricted-growth recursion: each element joins an existing block
    or opens a new one, so the number of outputs is the Bell number of
    len(items). Blocks keep the input order of their elements; the
    partition is a tuple of block tuples, first-seen block first.
    """
    items = list(items)
    if len(items) > PARTITION_CAP:
        raise ValueError(f"partition enumeration capped at {PARTITION_CAP} elements")
    if not items:
        yield ()
        return
    blocks: list[list] = []

    def grow(idx: int) -> Iterator[tuple[tuple, ...]]:
        if idx == len(items):
            yield tuple(tuple(b) for b in blocks)
            return
        x = items[idx]
        for b in blocks:
            b.append(x)
            yield from grow(idx + 1)
            b.pop()
        blocks.append([x])
        yield from grow(idx + 1)
        blocks.pop()

    yield from grow(0)


@dataclass(frozen=True)
class PairingDiagram:
    """A perfect matching of labeled legs.

    points are (group, slot) pairs; edges is the matching, every point
    in exactly one edge. forbid_intra records whether edges inside one
    group were admissible during enumeration.
    """

    points: tuple[tuple[int, int], ...]
    edges: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    forbid_intra: bool = field(default=True, compare=False)

    def as_multigraph(self, n_groups: int) -> Multigraph:
        """Collapse each leg to its group; intra-group edges -> loops."""
        q = [[0] * n_groups for _ in range(n_groups)]
        has_loop = False
        for (ga, _), (gb, _) in self.edges:
            if ga == gb:
                q[ga][ga] += 1
                has_loop = True
            else:
                q[ga][gb] += 1
                q[gb][ga] += 1
        return Multigraph(tuple(tuple(row) for row in q), allow_loops=has_loop)


def enumerate_pairings(
    groups: Sequence[int], forbid_intra_group: bool = True
) -> Iterator[PairingDiagram]:
    """Yield perfect matchings of the legs of the given groups.

    groups lists how many legs each group owns; legs are (group, slot)
    pairs. The first free leg is matched with every admissible later
    leg in order and the rest recursively, which visits each matching
    exactly once in a stable order. Odd total yields nothing.
    """
    points = tuple(
        (g, s) for g, size in enumerate(groups) for s in range(size)
    )
    if len(points) % 2:
        return

    def match(free: tuple) -> Iterator[tuple]:
        if not free:
            yield ()
            return
        a = free[0]
        for k in range(1, len(free)):
            b = free[k]
            if forbid_intra_group and a[0] == b[0]:
                continue
            rest = free[1:k] + free[k + 1 :]
            for tail in match(rest):
                yield ((a, b),) + tail

    for edges in match(points):
        yield PairingDiagram(points, edges, forbid_intra=forbid_intra_group)


def _degree_sequences(max_vertices: int, max_degree: int) -> Iterator[tuple[int, ...]]:
    """All tuples of degrees 1..max_degree on 1..max_vertices vertices."""
    def grow(prefix: tuple[int, ...], k: int) -> Iterator[tuple[int, ...]]:
        if prefix:
            yield prefix
        if k == 0:
            return
        for d in range(1, max_degree + 1):
            yield from grow(prefix + (d,), k - 1)

    yield from grow((), max_vertices)


def multiplicity_report(max_vertices: int = 4, max_degree: int = 4) -> dict:
    """Compare multiplicity formulas against the enumeration oracle.

    For every degree sequence up to the given size, in both the
    loop-free and loop-allowing families, complete pairings are
    enumerated and binned by collapsed multigraph. Each bin is checked
    against pairing_multiplicity (must match) and against the verbatim
    product formula delta_paper (known to overcount; loop-free family
    only, which is the formula's stated domain). Returns a dict with
    the number of bins checked, the closed-form mismatches (expected
    empty), and the delta_paper disagreements.
    """
    checked = 0
    closed_form_mismatches = []
    formula_disagreements = []
    for degs in _degree_sequences(max_vertices, max_degree):
        if sum(degs) % 2:
            continue
        for allow_loops in (False, True):
            bins: dict[Multigraph, int] = {}
            for diagram in enumerate_pairings(degs, forbid_intra_group=not allow_loops):
                g = diagram.as_multigraph(len(degs))
                bins[g] = bins.get(g, 0) + 1
            for g, count in sorted(bins.items(), key=lambda kv: kv[0].upper()):
                checked += 1
                entry = {
                    "degrees": degs,
                    "upper": g.upper(),
                    "oracle": count,
                }
                closed = pairing_multiplicity(g, degs)
                if closed != count:
                    closed_form_mismatches.append({**entry, "closed_form": closed})
                if not allow_loops:
                    formula = delta_paper(g, degs)
                    if formula != count:
                        formula_disagreements.append({**entry, "formula": formula})
    return {
        "bins_checked": checked,
        "closed_form_mismatches": closed_form_mismatches,
        "formula_disagreements": formula_disagreements,
    }
