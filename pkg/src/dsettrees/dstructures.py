"""Core representations of D-set graphs and trees of D-sets.

A `DSetGraph` is a finite unrooted tree without degree-2 nodes whose leaves
form a D-set; at every ramification point (node of degree >= 3) one incident
branch is designated special.  A `TreeOfDSets` is a rooted structure tree
whose vertices are labelled by D-set graphs, glued by the coherence
bijections f (successors -> ramification points) and g (leaves of a child
label -> non-special branches at the corresponding ramification point).

All values are immutable after construction and safe to share.  Geometric
queries (medians, branches, geodesics) are answered by rootless BFS with
per-graph memoised rooted indices; the structures are tiny so nothing
fancier is warranted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional

from .errors import ArgumentError


def _edge_key(a: str, b: str) -> tuple:
    return (a, b) if a <= b else (b, a)


def _memoized_property(fn):
    """Per-instance cache for derived views of frozen dataclasses."""
    name = "_memo_" + fn.__name__

    @property
    def wrapper(self):
        d = self.__dict__
        if name not in d:
            object.__setattr__(self, name, fn(self))
        return d[name]

    return wrapper


# --------------------------------------------------------------------------
# D-set graphs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DSetGraph:
    """Finite unrooted tree with a special branch chosen at each ramification point.

    `special` is stored as sorted (ram, neighbor) pairs; the neighbor is the
    node adjacent to the ramification point inside the special branch (a
    branch is canonically identified by the neighbor of r it contains).
    """

    nodes: frozenset
    edges: frozenset
    special: tuple

    @_memoized_property
    def special_map(self) -> dict:
        return dict(self.special)

    def adjacency(self) -> dict:
        return _adjacency(self)

    def degree(self, node: str) -> int:
        return len(_adjacency(self)[node])

    def leaves(self) -> tuple:
        return tuple(n for n in sorted(self.nodes) if len(_adjacency(self)[n]) <= 1)

    def rams(self) -> tuple:
        return tuple(n for n in sorted(self.nodes) if len(_adjacency(self)[n]) >= 3)

    def median(self, x: str, y: str, z: str) -> str:
        """The unique node on all three pairwise geodesics."""
        a, b, c = sorted((x, y, z))
        return _median_cached(self, a, b, c)

    def distance(self, a: str, b: str) -> int:
        return _distance_cached(self, *_edge_key(a, b))

    def path(self, a: str, b: str) -> tuple:
        """Geodesic from a to b, inclusive."""
        parent, depth = _rooted(self)
        m = _lca(parent, depth, a, b)
        up = []
        n = a
        while n != m:
            up.append(n)
            n = parent[n]
        down = []
        n = b
        while n != m:
            down.append(n)
            n = parent[n]
        return tuple(up + [m] + list(reversed(down)))

    def branch_of(self, r: str, x: str) -> str:
        """Neighbor of r on the r->x geodesic (the branch at r containing x)."""
        if x == r:
            raise ArgumentError(f"branch_of: node {x!r} equals the ramification point")
        return _branch_of_cached(self, r, x)

    def branches_at(self, r: str) -> tuple:
        return tuple(sorted(_adjacency(self)[r]))

    def branch_leaves(self, r: str, neighbor: str) -> frozenset:
        """Leaves of the branch at r identified by `neighbor`."""
        return _branch_leaves(self, r, neighbor)

    def pairing(self, x: str, y: str, z: str, w: str):
        """Split pairing of four distinct leaves, or None for a star quartet.

        Returns a canonical ((a,b),(c,d)) with the ab- and cd-geodesics
        disjoint, or None when all three pairings meet (common median).
        """
        s_xy = self.distance(x, y) + self.distance(z, w)
        s_xz = self.distance(x, z) + self.distance(y, w)
        s_xw = self.distance(x, w) + self.distance(y, z)
        m = min(s_xy, s_xz, s_xw)
        if s_xy == s_xz == s_xw:
            return None
        if s_xy == m:
            pair = ((x, y), (z, w))
        elif s_xz == m:
            pair = ((x, z), (y, w))
        else:
            pair = ((x, w), (y, z))
        (a, b), (c, d) = (tuple(sorted(p)) for p in pair)
        return ((a, b), (c, d)) if (a, b) <= (c, d) else ((c, d), (a, b))

    def leaf_d(self, x: str, y: str, z: str, w: str) -> bool:
        """The natural D-relation on leaves: equal-pair clauses or disjoint paths."""
        if x == y and x not in (z, w):
            return True
        if z == w and z not in (x, y):
            return True
        if len({x, y, z, w}) < 4:
            return False
        p = self.pairing(x, y, z, w)
        return p is not None and p == _canon_pairing(x, y, z, w)

    def validation_errors(self) -> list:
        """Structural violations of the D-set graph invariants."""
        out = []
        if not self.nodes:
            out.append("graph has no nodes")
            return out
        adj = _adjacency(self)
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                out.append(f"edge ({a},{b}) mentions unknown node")
        # connected & acyclic
        seen = set()
        start = min(self.nodes)
        stack = [start]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(adj[n])
        if seen != set(self.nodes):
            out.append("graph is not connected")
        elif len(self.edges) != len(self.nodes) - 1:
            out.append("graph is not acyclic")
        for n in sorted(self.nodes):
            if len(adj[n]) == 2:
                out.append(f"node {n} has degree 2 (dyadic vertices are forbidden)")
        sp = self.special_map
        rams = set(self.rams())
        for r in sorted(rams):
            if r not in sp:
                out.append(f"ramification point {r} lacks special branch")
            elif sp[r] not in adj[r]:
                out.append(f"special branch at {r} names non-neighbor {sp[r]}")
        for r in sorted(set(sp) - rams):
            out.append(f"special designation at non-ramification node {r}")
        n_leaves = len(self.leaves())
        if n_leaves >= 3 and len(rams) > n_leaves - 2:
            out.append(f"{len(rams)} ramification points exceeds bound {n_leaves - 2}")
        return out


def dset_graph(nodes: Iterable, edges: Iterable, special: Optional[Mapping] = None) -> DSetGraph:
    """Build a DSetGraph from raw collections (no validation; see validate)."""
    return DSetGraph(
        nodes=frozenset(nodes),
        edges=frozenset(_edge_key(a, b) for a, b in edges),
        special=tuple(sorted((special or {}).items())),
    )


@lru_cache(maxsize=None)
def _adjacency(g: DSetGraph) -> dict:
    adj = {n: [] for n in g.nodes}
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    return {n: tuple(sorted(ns)) for n, ns in adj.items()}


@lru_cache(maxsize=None)
def _rooted(g: DSetGraph):
    """Parent/depth maps for an arbitrary rooting at the least node."""
    adj = _adjacency(g)
    root = min(g.nodes)
    parent = {root: None}
    depth = {root: 0}
    queue = [root]
    while queue:
        n = queue.pop()
        for m in adj[n]:
            if m not in depth:
                parent[m] = n
                depth[m] = depth[n] + 1
                queue.append(m)
    return parent, depth


@lru_cache(maxsize=None)
def _median_cached(g, x, y, z):
    parent, depth = _rooted(g)
    a = _lca(parent, depth, x, y)
    b = _lca(parent, depth, x, z)
    c = _lca(parent, depth, y, z)
    return max((a, b, c), key=lambda n: depth[n])


@lru_cache(maxsize=None)
def _distance_cached(g, a, b):
    parent, depth = _rooted(g)
    m = _lca(parent, depth, a, b)
    return depth[a] + depth[b] - 2 * depth[m]


@lru_cache(maxsize=None)
def _branch_of_cached(g, r, x):
    return g.path(r, x)[1]


def _lca(parent, depth, a, b):
    while depth[a] > depth[b]:
        a = parent[a]
    while depth[b] > depth[a]:
        b = parent[b]
    while a != b:
        a = parent[a]
        b = parent[b]
    return a


@lru_cache(maxsize=None)
def _branch_leaves(g: DSetGraph, r: str, neighbor: str) -> frozenset:
    adj = _adjacency(g)
    seen = {r, neighbor}
    stack = [neighbor]
    found = []
    while stack:
        n = stack.pop()
        if len(adj[n]) <= 1:
            found.append(n)
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return frozenset(found)


def _canon_pairing(x, y, z, w):
    (a, b), (c, d) = tuple(sorted((x, y))), tuple(sorted((z, w)))
    return ((a, b), (c, d)) if (a, b) <= (c, d) else ((c, d), (a, b))


# --------------------------------------------------------------------------
# Structure trees
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureTree:
    """Finite rooted tree given by parent links (a lower semilinear order)."""

    vertices: frozenset
    root: str
    parent: tuple  # sorted (child, parent) pairs

    @_memoized_property
    def parent_map(self) -> dict:
        return dict(self.parent)

    def children(self, v: str) -> tuple:
        return _children(self)[v]

    def successors(self, v: str) -> tuple:
        return self.children(v)

    def ancestors(self, v: str) -> tuple:
        """Chain from v down to the root, inclusive of both."""
        pm = self.parent_map
        out = [v]
        while out[-1] != self.root:
            out.append(pm[out[-1]])
        return tuple(out)

    def leq(self, a: str, b: str) -> bool:
        """a <= b in the structure-tree order (root is minimum)."""
        return a in self.ancestors(b)

    def chain(self, lo: str, hi: str) -> tuple:
        """Vertices on the chain lo <= ... <= hi, lowest first."""
        if not self.leq(lo, hi):
            raise ArgumentError(f"{lo!r} is not below {hi!r} in the structure tree")
        anc = self.ancestors(hi)
        return tuple(reversed(anc[: anc.index(lo) + 1]))

    def subtree(self, v: str) -> frozenset:
        kids = _children(self)
        out = set()
        stack = [v]
        while stack:
            n = stack.pop()
            out.add(n)
            stack.extend(kids[n])
        return frozenset(out)

    def height_below(self, v: str) -> int:
        kids = _children(self)[v]
        return 1 + max((self.height_below(k) for k in kids), default=0)

    def validation_errors(self) -> list:
        out = []
        if self.root not in self.vertices:
            out.append(f"root {self.root} is not a vertex")
            return out
        pm = self.parent_map
        if set(pm) != self.vertices - {self.root}:
            out.append("parent map is not total on exactly the non-root vertices")
            return out
        for c, p in self.parent:
            if p not in self.vertices:
                out.append(f"vertex {c} has unknown parent {p}")
                return out
        for v in sorted(self.vertices):
            seen = {v}
            n = v
            while n != self.root:
                n = pm[n]
                if n in seen:
                    out.append(f"parent links cycle at vertex {v}")
                    return out
                seen.add(n)
        return out


def structure_tree(vertices: Iterable, root: str, parent: Mapping) -> StructureTree:
    return StructureTree(
        vertices=frozenset(vertices),
        root=root,
        parent=tuple(sorted(parent.items())),
    )


@lru_cache(maxsize=None)
def _children(t: StructureTree) -> dict:
    kids = {v: [] for v in t.vertices}
    for c, p in t.parent:
        if p in kids:
            kids[p].append(c)
    return {v: tuple(sorted(cs)) for v, cs in kids.items()}


# --------------------------------------------------------------------------
# Trees of D-sets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeOfDSets:
    """Rooted structure tree with D-set labels and coherence bijections.

    f maps each successor of a vertex to a ramification point of that
    vertex's label; g maps, per (parent, child) edge, each leaf of the child
    label to the neighbor node identifying a non-special branch at the
    corresponding ramification point.  Element names live on the root label's
    leaves only.
    """

    tree: StructureTree
    label: tuple    # sorted (vertex, DSetGraph)
    f: tuple        # sorted (vertex, successor, ram)
    g: tuple        # sorted (parent, child, leaf, neighbor)
    element: tuple  # sorted (root leaf, name)

    @_memoized_property
    def label_map(self) -> dict:
        return dict(self.label)

    @_memoized_property
    def f_map(self) -> dict:
        out = {v: {} for v in self.tree.vertices}
        for v, s, r in self.f:
            out.setdefault(v, {})[s] = r
        return out

    @_memoized_property
    def g_map(self) -> dict:
        out = {}
        for p, c, leaf, nb in self.g:
            out.setdefault((p, c), {})[leaf] = nb
        return out

    @_memoized_property
    def element_map(self) -> dict:
        return dict(self.element)

    @_memoized_property
    def domain(self) -> frozenset:
        return frozenset(name for _, name in self.element)

    def root_label(self) -> DSetGraph:
        return self.label_map[self.tree.root]

    def leaf_of_element(self) -> dict:
        d = self.__dict__
        if "_memo_leaf_of" not in d:
            object.__setattr__(self, "_memo_leaf_of",
                               {name: leaf for leaf, name in self.element})
        return d["_memo_leaf_of"]


def tree_of_dsets(tree: StructureTree, label: Mapping, f: Mapping, g: Mapping,
                  element: Mapping) -> TreeOfDSets:
    """Build a TreeOfDSets from nested mappings.

    `f` is {vertex: {successor: ram}}, `g` is {(parent, child): {leaf: neighbor}},
    `element` is {root leaf: name}.
    """
    f_rows = []
    for v, m in f.items():
        f_rows.extend((v, s, r) for s, r in m.items())
    g_rows = []
    for (p, c), m in g.items():
        g_rows.extend((p, c, leaf, nb) for leaf, nb in m.items())
    return TreeOfDSets(
        tree=tree,
        label=tuple(sorted(label.items(), key=lambda kv: kv[0])),
        f=tuple(sorted(f_rows)),
        g=tuple(sorted(g_rows)),
        element=tuple(sorted(element.items())),
    )


# ---- validation ----------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple

    def __bool__(self) -> bool:
        return self.ok


def validate(t: TreeOfDSets) -> ValidationReport:
    """Check every TreeOfDSets invariant; violations are data, not failures."""
    out = list(t.tree.validation_errors())
    if out:
        return ValidationReport(False, tuple(out))
    labels = t.label_map
    for v in sorted(t.tree.vertices):
        if v not in labels:
            out.append(f"vertex {v} has no label")
    for v in sorted(set(labels) - t.tree.vertices):
        out.append(f"label for unknown vertex {v}")
    if out:
        return ValidationReport(False, tuple(out))
    for v in sorted(t.tree.vertices):
        for msg in labels[v].validation_errors():
            out.append(f"vertex {v}: {msg}")
    if out:
        return ValidationReport(False, tuple(out))

    fm = t.f_map
    gm = t.g_map
    for v in sorted(t.tree.vertices):
        lab = labels[v]
        succ = set(t.tree.children(v))
        rams = set(lab.rams())
        fv = fm.get(v, {})
        if set(fv) != succ:
            out.append(f"vertex {v}: f is not defined on exactly the successors")
            continue
        vals = list(fv.values())
        if set(vals) != rams or len(vals) != len(rams):
            out.append(f"vertex {v}: f is not a bijection onto the ramification points")
        if v != t.tree.root and len(lab.leaves()) < 2:
            out.append(f"vertex {v}: non-root label has fewer than 2 leaves")
    if out:
        return ValidationReport(False, tuple(out))

    for v in sorted(t.tree.vertices):
        lab = labels[v]
        for w in t.tree.children(v):
            r = fm[v][w]
            child_leaves = set(labels[w].leaves())
            gmap = gm.get((v, w), {})
            if set(gmap) != child_leaves:
                out.append(f"edge ({v},{w}): g is not defined on exactly the child label's leaves")
                continue
            nonspecial = set(lab.branches_at(r)) - {lab.special_map[r]}
            vals = list(gmap.values())
            if set(vals) != nonspecial or len(set(vals)) != len(vals):
                out.append(f"edge ({v},{w}): g is not a bijection onto the non-special branches at {r}")
            if len(child_leaves) != lab.degree(r) - 1:
                out.append(
                    f"edge ({v},{w}): child label has {len(child_leaves)} leaves, "
                    f"expected degree({r})-1 = {lab.degree(r) - 1}")

    em = t.element_map
    root_leaves = set(t.root_label().leaves())
    if set(em) != root_leaves:
        out.append("element names are not assigned to exactly the root label's leaves")
    if len(set(em.values())) != len(em):
        out.append("element names are not distinct")
    if not em:
        out.append("empty domain")
    return ValidationReport(not out, tuple(out))


# ---- spec operations ------------------------------------------------------

def ram(d: DSetGraph, x: str, y: str, z: str) -> str:
    """The unique ramification point on all three pairwise geodesics."""
    leaves = set(d.leaves())
    if len({x, y, z}) < 3:
        raise ArgumentError("ram requires three distinct leaves")
    if not {x, y, z} <= leaves:
        raise ArgumentError("ram arguments must be leaves")
    return d.median(x, y, z)


def branch_of(d: DSetGraph, r: str, x: str) -> str:
    return d.branch_of(r, x)


def branches_at(d: DSetGraph, r: str) -> tuple:
    return d.branches_at(r)


def leaf_d(d: DSetGraph, x: str, y: str, z: str, w: str) -> bool:
    return d.leaf_d(x, y, z, w)


def g_chain(t: TreeOfDSets, mu: str, nu: str, a: str) -> frozenset:
    """Image of leaf `a` of label(mu) in label(nu), for nu <= mu.

    Composes the one-step g maps down the chain; each step expands a leaf to
    the leaf set of its branch.  Returns a set of leaves of label(nu).
    """
    if mu not in t.tree.vertices or nu not in t.tree.vertices:
        raise ArgumentError("unknown vertex")
    if not t.tree.leq(nu, mu):
        raise ArgumentError(f"{nu!r} is not below {mu!r}")
    labels = t.label_map
    if a not in labels[mu].leaves():
        raise ArgumentError(f"{a!r} is not a leaf of label({mu!r})")
    chain = t.tree.chain(nu, mu)  # nu ... mu, lowest first
    cur = {a}
    fm, gm = t.f_map, t.g_map
    for hi, lo in zip(reversed(chain), reversed(chain[:-1])):
        r = fm[lo][hi]
        lab = labels[lo]
        nxt = set()
        for leaf in cur:
            nxt |= lab.branch_leaves(r, gm[(lo, hi)][leaf])
        cur = nxt
    return frozenset(cur)


@lru_cache(maxsize=None)
def leaf_partition(t: TreeOfDSets, v: str) -> dict:
    """Map each leaf of label(v) to the set of domain elements it covers."""
    em = t.element_map
    if v == t.tree.root:
        return {leaf: frozenset({em[leaf]}) for leaf in t.root_label().leaves()}
    pm = t.tree.parent_map
    p = pm[v]
    base = leaf_partition(t, p)
    lab = t.label_map[p]
    r = t.f_map[p][v]
    gm = t.g_map[(p, v)]
    out = {}
    for leaf in t.label_map[v].leaves():
        elems = set()
        for x in lab.branch_leaves(r, gm[leaf]):
            elems |= base[x]
        out[leaf] = frozenset(elems)
    return out


@lru_cache(maxsize=None)
def covered(t: TreeOfDSets, v: str) -> frozenset:
    return frozenset().union(*leaf_partition(t, v).values())


def omitted(t: TreeOfDSets, v: str) -> frozenset:
    return t.domain - covered(t, v)


def induced_at(t: TreeOfDSets, v: str) -> TreeOfDSets:
    """The tree of D-sets on the subtree above v, with domain its label's leaves."""
    if v not in t.tree.vertices:
        raise ArgumentError(f"unknown vertex {v!r}")
    verts = t.tree.subtree(v)
    pm = t.tree.parent_map
    labels = t.label_map
    fm, gm = t.f_map, t.g_map
    sub = structure_tree(verts, v, {c: p for c, p in pm.items() if c in verts and c != v})
    return tree_of_dsets(
        sub,
        {w: labels[w] for w in verts},
        {w: dict(fm.get(w, {})) for w in verts},
        {(p, c): dict(m) for (p, c), m in gm.items() if p in verts and c in verts},
        {leaf: leaf for leaf in labels[v].leaves()},
    )


def height(t: TreeOfDSets) -> int:
    """Number of vertices on the longest root-to-leaf chain of the structure tree."""
    return t.tree.height_below(t.tree.root)
