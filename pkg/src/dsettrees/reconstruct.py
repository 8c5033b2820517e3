"""Rebuild structure trees from the relations alone, and decide membership.

Starting from an LStructure this module recovers the R-classes of apex
triples, their J-sets, the pre-direction partitions, and the D-relation on
directions; orders the classes by reverse J-inclusion; realizes each
direction set as a concrete tree; and reattaches the forced two-leaf labels
to obtain a realizing tree of D-sets.  Membership in the class of
realizable structures is decided by re-realizing the reconstruction and
comparing exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .dstructures import (DSetGraph, TreeOfDSets, dset_graph, structure_tree,
                          tree_of_dsets, validate)
from .errors import ArgumentError, DataError
from .relations import LStructure, canon_l, check_d_axioms, realize


# --------------------------------------------------------------------------
# Realizing a finite D-relation as a tree
# --------------------------------------------------------------------------

def tree_from_d(elements: Iterable, d) -> DSetGraph:
    """Build the unique degree-2-free tree whose leaf D-relation is `d`.

    `d` is a predicate on ordered 4-tuples of elements.  Raises DataError if
    no tree realizes the relation.
    """
    elems = tuple(sorted(set(elements)))
    counter = itertools.count()
    prefix = "#"
    while any(str(e).startswith(prefix) for e in elems):
        prefix += "#"

    def fresh():
        return f"{prefix}{next(counter)}"

    def build(xs, dd):
        # returns (nodes, edges) with leaves exactly xs
        if len(xs) == 1:
            return {xs[0]}, set()
        if len(xs) == 2:
            return {xs[0], xs[1]}, {(xs[0], xs[1])}
        x, y, z = xs[0], xs[1], xs[2]
        buckets = {x: [x], y: [y], z: [z]}
        rest = []
        for u in xs[3:]:
            hits = [a for a, b, c in ((x, y, z), (y, x, z), (z, x, y))
                    if dd(a, u, b, c)]
            if len(hits) > 1:
                raise DataError(f"element {u} separates into multiple branches")
            if hits:
                buckets[hits[0]].append(u)
            else:
                rest.append(u)
        groups = []
        for u in rest:
            for grp in groups:
                if dd(u, grp[0], x, y):
                    grp.append(u)
                    break
            else:
                groups.append([u])
        branches = [buckets[x], buckets[y], buckets[z]] + groups
        r = fresh()
        nodes, edges = {r}, set()
        for branch in branches:
            if len(branch) == 1:
                nodes.add(branch[0])
                edges.add((r, branch[0]))
                continue
            outside = x if branch is not buckets[x] else y
            port = fresh()

            def dd_sub(a, b, c, e, _o=outside, _p=port):
                sub = lambda v: _o if v == _p else v
                return dd(sub(a), sub(b), sub(c), sub(e))

            sub_nodes, sub_edges = build(tuple(sorted(branch)) + (port,), dd_sub)
            adj = {}
            for a, b in sub_edges:
                adj.setdefault(a, set()).add(b)
                adj.setdefault(b, set()).add(a)
            (nb,) = adj[port]
            sub_nodes.discard(port)
            sub_edges.discard((port, nb) if (port, nb) in sub_edges else (nb, port))
            nodes |= sub_nodes
            edges |= sub_edges
            edges.add((r, nb))
        return nodes, edges

    nodes, edges = build(elems, d)
    g = dset_graph(nodes, edges)
    for quad in itertools.product(elems, repeat=4):
        if g.leaf_d(*quad) != bool(d(*quad)):
            raise DataError(f"relation is not realizable by a tree (mismatch at {quad})")
    return g


# --------------------------------------------------------------------------
# K*-classes, J-sets, pre-directions
# --------------------------------------------------------------------------

def kstar_classes(ls: LStructure) -> tuple:
    """Partition the apex triples by R; DataError if R is not an equivalence."""
    triples = ls.kstar()
    for t in triples:
        if not ls.has_r(*t, *t):
            raise DataError(f"R is missing the reflexive instance on {t}")
    related = {t: {t} for t in triples}
    for a, b in itertools.combinations(triples, 2):
        if ls.has_r(*a, *b):
            related[a].add(b)
            related[b].add(a)
    classes = []
    seen = set()
    for t in triples:
        if t in seen:
            continue
        cls = frozenset(related[t])
        for a, b in itertools.combinations(sorted(cls), 2):
            if not ls.has_r(*a, *b):
                raise DataError(f"R is not transitive: {t} relates {a} and {b} but not each other")
        for a in cls:
            if related[a] != set(cls):
                raise DataError(f"R is not an equivalence at triple {a}")
        seen |= cls
        classes.append(cls)
    return tuple(sorted(classes, key=min))


def j_set(ls: LStructure, triple) -> frozenset:
    """The elements j related into the class of (p; q, s) by the three disjuncts."""
    p, q, s = triple
    if not ls.has_l(p, q, s):
        raise ArgumentError(f"L({p};{q},{s}) does not hold")
    out = set()
    for j in ls.domain:
        if (ls.has_r(p, q, s, j, q, s) or ls.has_r(p, q, s, p, j, s)
                or ls.has_r(p, q, s, p, j, q)):
            out.add(j)
    return frozenset(out)


def e_partition(ls: LStructure, triple) -> tuple:
    """Pre-direction classes of the J-set, grouped by R-profiles."""
    p, q, s = triple
    js = j_set(ls, triple)
    dom = ls.domain

    def profile(u):
        in_pair = frozenset(
            (m, n) for m in dom for n in dom
            if ls.has_r(p, q, s, m, n, u))
        in_apex = frozenset(
            frozenset((m, n)) for m in dom for n in dom
            if ls.has_r(p, q, s, u, m, n))
        return (in_pair, in_apex)

    groups = {}
    for u in sorted(js):
        groups.setdefault(profile(u), []).append(u)
    return tuple(sorted((frozenset(g) for g in groups.values()), key=min))


def direction_d(ls: LStructure, triple) -> tuple:
    """(classes, D-relation on class indices) for the directions at a triple.

    The relation is the equality clauses plus the Q-clause evaluated over all
    representatives; representative dependence raises DataError.
    """
    x, y, z = triple
    if not ls.has_l(x, y, z):
        raise ArgumentError(f"L({x};{y},{z}) does not hold")
    classes = e_partition(ls, triple)
    n = len(classes)
    rel = set()
    for i, j, k, l in itertools.product(range(n), repeat=4):
        if i == j and i not in (k, l):
            rel.add((i, j, k, l))
            continue
        if k == l and k not in (i, j):
            rel.add((i, j, k, l))
            continue
        if len({i, j, k, l}) < 4:
            continue
        votes = set()
        for u, v, t, s in itertools.product(classes[i], classes[j], classes[k], classes[l]):
            votes.add(ls.has_q(u, v, t, s, x, y, z))
            if len(votes) > 1:
                raise DataError(
                    f"direction relation at {triple} depends on representatives "
                    f"for classes {(i, j, k, l)}")
        if votes.pop():
            rel.add((i, j, k, l))
    return classes, frozenset(rel)


# --------------------------------------------------------------------------
# Full reconstruction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructedTree:
    """Poset of R-classes with their J-sets, pre-directions and direction trees."""

    vertices: tuple          # canonical representative triple per class, sorted
    classes: tuple           # (rep, frozenset of class triples)
    jset: tuple              # (rep, frozenset)
    epartition: tuple        # (rep, tuple of frozensets)
    ddir: tuple              # (rep, frozenset of index 4-tuples)
    parent: tuple            # (rep, parent rep) for non-minimal vertices
    dtree: tuple             # (rep, DSetGraph on leaf ids d<i>)
    cone: tuple              # (parent rep, child rep, ram node id)

    @property
    def jset_map(self):
        return dict(self.jset)

    @property
    def epartition_map(self):
        return dict(self.epartition)

    @property
    def ddir_map(self):
        return dict(self.ddir)

    @property
    def parent_map(self):
        return dict(self.parent)

    @property
    def dtree_map(self):
        return dict(self.dtree)

    @property
    def cone_map(self):
        return {(p, c): r for p, c, r in self.cone}

    def root(self):
        tops = [v for v in self.vertices if v not in self.parent_map]
        return tops[0] if len(tops) == 1 else None


def _leaf_id(i: int) -> str:
    return f"d{i}"


def reconstruct(ls: LStructure) -> ReconstructedTree:
    """Assemble the reconstructed structure tree; DataError on any failure."""
    classes = kstar_classes(ls)
    reps = tuple(min(c) for c in classes)
    by_rep = dict(zip(reps, classes))

    jsets, eparts, ddirs, dtrees = {}, {}, {}, {}
    for rep, cls in by_rep.items():
        js = j_set(ls, rep)
        for other in sorted(cls):
            if j_set(ls, other) != js:
                raise DataError(f"J-sets differ inside the class of {rep} (at {other})")
        jsets[rep] = js
        ep = e_partition(ls, rep)
        for other in sorted(cls):
            if e_partition(ls, other) != ep:
                raise DataError(f"pre-directions differ inside the class of {rep}")
        eparts[rep] = ep
        cdirs, rel = direction_d(ls, rep)
        ddirs[rep] = rel
        axioms = check_d_axioms(range(len(cdirs)), rel, "basic")
        if not axioms.ok:
            raise DataError(f"direction relation at {rep} fails {axioms.failures[0][0]}")
        rel_ids = frozenset(tuple(_leaf_id(i) for i in t) for t in rel)
        try:
            g = tree_from_d([_leaf_id(i) for i in range(len(cdirs))],
                            lambda a, b, c, d: (a, b, c, d) in rel_ids)
        except DataError as exc:
            raise DataError(f"direction relation at {rep} is not treelike: {exc}")
        idx = {}
        for i, c in enumerate(cdirs):
            for e in c:
                idx[e] = i
        special = {}
        for (a, b, c) in sorted(by_rep[rep]):
            la, lb, lc = (_leaf_id(idx[e]) for e in (a, b, c))
            if len({la, lb, lc}) < 3:
                raise DataError(f"triple {(a, b, c)} does not span three directions at {rep}")
            r = g.median(la, lb, lc)
            nb = g.branch_of(r, la)
            if special.setdefault(r, nb) != nb:
                raise DataError(f"conflicting special branches at {rep}, node {r}")
        for r in g.rams():
            if r not in special:
                raise DataError(f"ramification point {r} at {rep} has no witnessed special branch")
        dtrees[rep] = dset_graph(g.nodes, g.edges, special)

    # Order: a < b iff J_b is a strict subset of J_a AND b's triple spans
    # three distinct directions of a.  Plain reverse J-inclusion is too
    # coarse at finite scale: an incomparable vertex can cover a subset of
    # another's coverage, but its defining triple then collapses into fewer
    # directions (three leaves cannot sit in distinct branches at two
    # different nodes), so the span condition recovers exact witness
    # comparability.
    eclass_index = {}
    for rep, ep in eparts.items():
        idx = {}
        for i, c in enumerate(ep):
            for el in c:
                idx[el] = i
        eclass_index[rep] = idx

    def below(a, b):
        if not jsets[a] > jsets[b]:
            return False
        if not set(b) <= jsets[a]:
            return False
        idx = eclass_index[a]
        return len({idx[el] for el in b}) == 3

    parent = {}
    for v in reps:
        lower = [w for w in reps if below(w, v)]
        for a, b in itertools.combinations(lower, 2):
            if not (below(a, b) or below(b, a)):
                raise DataError(f"lower set of {v} is not a chain ({a} vs {b})")
        if lower:
            parent[v] = min(lower, key=lambda w: (len(jsets[w]), w))
    if reps:
        roots = [v for v in reps if v not in parent]
        if len(roots) != 1:
            raise DataError(f"reconstructed order has {len(roots)} minimal vertices")

    cones = {}
    for v, p in parent.items():
        ep = eparts[p]
        idx = {}
        for i, c in enumerate(ep):
            for e in c:
                idx[e] = i
        a, b, c = v
        if not {a, b, c} <= jsets[p]:
            raise DataError(f"triple {v} escapes the J-set of its parent {p}")
        la, lb, lc = (_leaf_id(idx[e]) for e in (a, b, c))
        if len({la, lb, lc}) < 3:
            raise DataError(f"triple {v} does not span three directions of its parent {p}")
        g = dtrees[p]
        r = g.median(la, lb, lc)
        sp = g.special_map[r]
        for leaf in (la, lb, lc):
            if g.branch_of(r, leaf) == sp:
                raise DataError(f"cone triple {v} meets the special branch at {r} in {p}")
        cones[(p, v)] = r

    return ReconstructedTree(
        vertices=reps,
        classes=tuple(sorted(by_rep.items())),
        jset=tuple(sorted(jsets.items())),
        epartition=tuple(sorted(eparts.items())),
        ddir=tuple(sorted(ddirs.items())),
        parent=tuple(sorted(parent.items())),
        dtree=tuple(sorted(dtrees.items())),
        cone=tuple(sorted((p, c, r) for (p, c), r in cones.items())),
    )


# --------------------------------------------------------------------------
# Membership
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    member: bool
    tree: Optional[TreeOfDSets]
    refutation: Optional[str]

    def __bool__(self):
        return self.member


def _trivial_tree(domain) -> TreeOfDSets:
    elems = tuple(sorted(domain))
    nodes = set(elems)
    edges = set()
    if len(elems) == 2:
        edges.add((elems[0], elems[1]))
    st = structure_tree({"u0"}, "u0", {})
    return tree_of_dsets(st, {"u0": dset_graph(nodes, edges)}, {"u0": {}}, {},
                         {e: e for e in elems})


def is_member_of_D(ls: LStructure) -> Membership:
    """Decide whether some tree of D-sets realizes `ls` exactly."""
    dom = ls.domain
    if len(dom) == 0:
        return Membership(False, None, "empty domain")
    if len(dom) <= 2:
        if ls.L or ls.S or ls.Lp or ls.Sp or ls.Q or ls.R:
            return Membership(False, None, "relations must be empty on fewer than 3 elements")
        return Membership(True, _trivial_tree(dom), None)

    for trip in itertools.combinations(dom, 3):
        apexes = [x for x in trip if ls.has_l(x, *(a for a in trip if a != x))]
        if len(apexes) != 1:
            return Membership(
                False, None,
                f"triple {trip} has {len(apexes)} apex assignments, expected exactly one")

    try:
        rec = reconstruct(ls)
    except DataError as exc:
        return Membership(False, None, str(exc))

    root = rec.root()
    if root is None:
        return Membership(False, None, "reconstruction has no unique minimal class")
    jm, em, dm = rec.jset_map, rec.epartition_map, rec.dtree_map
    if jm[root] != frozenset(dom):
        return Membership(False, None, "minimal class does not cover the whole domain")
    if any(len(c) != 1 for c in em[root]):
        return Membership(False, None, "root pre-directions are not singletons")

    children = {}
    for (p, c), r in rec.cone_map.items():
        children.setdefault(p, {})
        if r in children[p].values():
            return Membership(False, None, f"two cones of {p} share the ramification point {r}")
        children[p][c] = r

    order = sorted(rec.vertices, key=lambda v: (len(dom) - len(jm[v]), v))
    vid = {v: f"u{i}" for i, v in enumerate(order)}
    labels, f_map, g_map, parent_links = {}, {}, {}, {}
    extra = itertools.count()

    for v in order:
        g = dm[v]
        ep = em[v]
        if v == root:
            rename = {_leaf_id(i): min(c) for i, c in enumerate(ep)}
            g = dset_graph({rename.get(n, n) for n in g.nodes},
                           {(rename.get(a, a), rename.get(b, b)) for a, b in g.edges},
                           {rename.get(r, r): rename.get(nb, nb) for r, nb in g.special_map.items()})
            leaf_name = rename
        else:
            leaf_name = {_leaf_id(i): _leaf_id(i) for i in range(len(ep))}
        labels[vid[v]] = g
        f_map.setdefault(vid[v], {})

        kids = children.get(v, {})
        for c, r in kids.items():
            parent_links[vid[c]] = vid[v]
            f_map[vid[v]][vid[c]] = leaf_name.get(r, r)
        covered_rams = {leaf_name.get(r, r) for r in kids.values()}

        # g maps for reconstructed children
        for c, r in kids.items():
            r2 = leaf_name.get(r, r)
            sp = g.special_map[r2]
            child_ep = em[c]
            mapping = {}
            used = set()
            for j, cls in enumerate(child_ep):
                subclasses = [i for i, pc in enumerate(ep) if pc <= cls]
                if frozenset().union(*(ep[i] for i in subclasses)) != cls:
                    return Membership(
                        False, None,
                        f"pre-directions of {c} are not unions of pre-directions of {v}")
                leaves = {leaf_name[_leaf_id(i)] for i in subclasses}
                nbs = {g.branch_of(r2, leaf) for leaf in leaves}
                if len(nbs) != 1:
                    return Membership(
                        False, None,
                        f"direction {j} of {c} spans several branches at {r2} in {v}")
                nb = nbs.pop()
                if nb == sp:
                    return Membership(False, None,
                                      f"direction {j} of {c} lies in the special branch at {r2}")
                if g.branch_leaves(r2, nb) != leaves:
                    return Membership(
                        False, None,
                        f"direction {j} of {c} does not fill the branch {nb} at {r2}")
                if nb in used:
                    return Membership(False, None,
                                      f"two directions of {c} map to the branch {nb}")
                used.add(nb)
                mapping[_leaf_id(j)] = nb
            nonspecial = set(g.branches_at(r2)) - {sp}
            if used != nonspecial:
                return Membership(False, None,
                                  f"directions of {c} miss a non-special branch at {r2} in {v}")
            g_map[(vid[v], vid[c])] = mapping

        # forced two-leaf completions at the remaining ramification points
        for r2 in g.rams():
            if r2 in covered_rams:
                continue
            if g.degree(r2) != 3:
                return Membership(
                    False, None,
                    f"ramification point {r2} of {v} has degree {g.degree(r2)} but no cone above")
            w = f"c{next(extra)}"
            nonspecial = sorted(set(g.branches_at(r2)) - {g.special_map[r2]})
            lab = dset_graph({"n0", "n1"}, {("n0", "n1")})
            labels[w] = lab
            parent_links[w] = vid[v]
            f_map[vid[v]][w] = r2
            f_map[w] = {}
            g_map[(vid[v], w)] = {"n0": nonspecial[0], "n1": nonspecial[1]}

    st = structure_tree(set(labels), vid[root], parent_links)
    element = {min(c): min(c) for c in em[root]}
    candidate = tree_of_dsets(st, labels, f_map, g_map, element)
    rep = validate(candidate)
    if not rep.ok:
        return Membership(False, None, "assembled tree invalid: " + rep.violations[0])
    back, _ = realize(candidate)
    if (back.L, back.S, back.Lp, back.Sp, back.Q, back.R) != \
            (ls.L, ls.S, ls.Lp, ls.Sp, ls.Q, ls.R) or back.domain != ls.domain:
        return Membership(False, None, "re-realization differs from the input relations")
    return Membership(True, candidate, None)


# --------------------------------------------------------------------------
# Isomorphism
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeIsomorphism:
    vertex_map: tuple  # (v1, v2) pairs
    node_maps: tuple   # (v1, ((node1, node2), ...)) pairs

    @property
    def vertex_dict(self):
        return dict(self.vertex_map)

    def node_dict(self, v1):
        return dict(dict(self.node_maps)[v1])


def _graph_isos(g1: DSetGraph, g2: DSetGraph, forced: dict):
    """Yield special-preserving graph isomorphisms extending `forced` (leaf map)."""
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return
    deg1 = {n: g1.degree(n) for n in g1.nodes}
    deg2 = {n: g2.degree(n) for n in g2.nodes}
    if sorted(deg1.values()) != sorted(deg2.values()):
        return
    sp1, sp2 = g1.special_map, g2.special_map
    adj1, adj2 = g1.adjacency(), g2.adjacency()

    start = min(g1.nodes, key=lambda n: (-deg1[n], n))
    order = []
    seen = {start}
    queue = [start]
    while queue:
        n = queue.pop(0)
        order.append(n)
        for m in adj1[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)

    def consistent(mapping):
        for r, nb in sp1.items():
            if r in mapping:
                r2 = mapping[r]
                if r2 in sp2:
                    if nb in mapping and mapping[nb] != sp2[r2]:
                        return False
                else:
                    return False
        return True

    def extend(i, mapping, used):
        if i == len(order):
            for a, b in g1.edges:
                if (mapping[a], mapping[b]) not in g2.edges and \
                        (mapping[b], mapping[a]) not in g2.edges:
                    return
            for r, nb in sp1.items():
                if sp2.get(mapping[r]) != mapping[nb]:
                    return
            yield dict(mapping)
            return
        n = order[i]
        if n in mapping:
            yield from extend(i + 1, mapping, used)
            return
        mapped_nbrs = [m for m in adj1[n] if m in mapping]
        if mapped_nbrs:
            candidates = set(adj2[mapping[mapped_nbrs[0]]])
            for m in mapped_nbrs[1:]:
                candidates &= set(adj2[mapping[m]])
        else:
            candidates = set(g2.nodes)
        for cand in sorted(candidates):
            if cand in used or deg2[cand] != deg1[n]:
                continue
            mapping[n] = cand
            used.add(cand)
            if consistent(mapping):
                yield from extend(i + 1, mapping, used)
            del mapping[n]
            used.discard(cand)

    base = dict(forced)
    if len(set(base.values())) != len(base):
        return
    yield from extend(0, base, set(base.values()))


def tree_iso(t1: TreeOfDSets, t2: TreeOfDSets,
             fix: Optional[dict] = None) -> Optional[TreeIsomorphism]:
    """Isomorphism of trees of D-sets, optionally fixing a domain map."""
    if len(t1.domain) != len(t2.domain):
        return None
    leaf1 = t1.leaf_of_element()
    leaf2 = t2.leaf_of_element()
    forced = {}
    if fix:
        for a, b in fix.items():
            forced[leaf1[a]] = leaf2[b]

    lab1, lab2 = t1.label_map, t2.label_map
    f1, f2 = t1.f_map, t2.f_map
    g1m, g2m = t1.g_map, t2.g_map

    def descend(v1, v2, psi):
        """Extend the accepted label iso psi at (v1, v2) to the subtrees."""
        vmap = [(v1, v2)]
        nmaps = [(v1, tuple(sorted(psi.items())))]
        inv_f2 = {r: s for s, r in f2.get(v2, {}).items()}
        for w1, r1 in sorted(f1.get(v1, {}).items()):
            r2 = psi[r1]
            if r2 not in inv_f2:
                return None
            w2 = inv_f2[r2]
            leafmap = {}
            g1w = g1m[(v1, w1)]
            inv_g2w = {nb: leaf for leaf, nb in g2m[(v2, w2)].items()}
            for leaf, nb in g1w.items():
                nb2 = psi.get(nb)
                if nb2 is None or nb2 not in inv_g2w:
                    return None
                leafmap[leaf] = inv_g2w[nb2]
            found = None
            for psi_w in _graph_isos(lab1[w1], lab2[w2], leafmap):
                sub = descend(w1, w2, psi_w)
                if sub is not None:
                    found = sub
                    break
            if found is None:
                return None
            vmap.extend(found[0])
            nmaps.extend(found[1])
        return vmap, nmaps

    r1, r2 = t1.tree.root, t2.tree.root
    if not fix:
        candidates = _graph_isos(lab1[r1], lab2[r2], {})
    else:
        candidates = _graph_isos(lab1[r1], lab2[r2], forced)
    for psi in candidates:
        ok_elems = all(psi[leaf1[e]] in leaf2.values() for e in t1.domain)
        if not ok_elems:
            continue
        res = descend(r1, r2, psi)
        if res is not None:
            return TreeIsomorphism(vertex_map=tuple(sorted(res[0])),
                                   node_maps=tuple(sorted(res[1])))
    return None


def _ls_iso(a: LStructure, b: LStructure) -> Optional[dict]:
    if len(a.domain) != len(b.domain):
        return None
    for attr in ("L", "S", "Lp", "Sp", "Q", "R"):
        if len(getattr(a, attr)) != len(getattr(b, attr)):
            return None

    def inv(ls, x):
        apex = sum(1 for t in ls.L if t[0] == x)
        side = sum(1 for t in ls.L if x in t[1:])
        s_in = sum(1 for t in ls.S if x in t)
        return (apex, side, s_in)

    inva = {x: inv(a, x) for x in a.domain}
    invb = {x: inv(b, x) for x in b.domain}
    if sorted(inva.values()) != sorted(invb.values()):
        return None
    order = sorted(a.domain, key=lambda x: (inva[x], x))

    def l_ok(mapping):
        assigned = set(mapping)
        for t in a.L:
            if set(t) <= assigned:
                if canon_l(*(mapping[e] for e in t)) not in b.L:
                    return False
        return True

    def extend(i, mapping, used):
        if i == len(order):
            if a.rename(mapping).reduct_key() == b.reduct_key() and \
                    a.rename(mapping) == b:
                return dict(mapping)
            return None
        x = order[i]
        for y in sorted(b.domain):
            if y in used or invb[y] != inva[x]:
                continue
            mapping[x] = y
            used.add(y)
            if l_ok(mapping):
                res = extend(i + 1, mapping, used)
                if res is not None:
                    return res
            del mapping[x]
            used.discard(y)
        return None

    return extend(0, {}, set())


def iso(a: Union[TreeOfDSets, LStructure],
        b: Union[TreeOfDSets, LStructure]):
    """Isomorphism between two structures of the same kind, or None."""
    if isinstance(a, TreeOfDSets) and isinstance(b, TreeOfDSets):
        return tree_iso(a, b)
    if isinstance(a, LStructure) and isinstance(b, LStructure):
        return _ls_iso(a, b)
    raise ArgumentError("iso requires two values of the same kind")


_canonical_cache = {}


def canonical_key(ls: LStructure):
    """Canonical form over all domain relabelings (full six relations)."""
    cached = _canonical_cache.get(ls)
    if cached is not None:
        return cached
    dom = ls.domain
    best = None
    names = [f"t{i}" for i in range(len(dom))]
    for perm in itertools.permutations(dom):
        mapping = dict(zip(perm, names))
        r = ls.rename(mapping)
        key = (tuple(sorted(r.L)), tuple(sorted(r.S)), tuple(sorted(r.Lp)),
               tuple(sorted(r.Sp)), tuple(sorted(r.Q)), tuple(sorted(r.R)))
        if best is None or key < best:
            best = key
    out = (len(dom), best)
    _canonical_cache[ls] = out
    return out
