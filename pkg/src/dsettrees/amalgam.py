"""One-point extensions, classification, amalgamation, joint embedding, hulls.

Extensions come in three shapes: a new root below everything (type I), a new
leaf at an existing ramification point which recurses into the successor
structure (type IIa), and a new ramification point splitting an edge (type
IIb, with three choices of special branch).  Amalgamation of two one-point
extensions follows the case analysis over those shapes; general amalgamation
reduces to the one-point case along a peel ordering.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, replace
from functools import lru_cache
from math import factorial
from typing import Iterable, Optional, Union

from .dstructures import (DSetGraph, TreeOfDSets, dset_graph, induced_at,
                          leaf_partition, structure_tree, tree_of_dsets,
                          validate)
from .errors import ArgumentError, DataError, InconsistencyError
from .relations import LStructure, realize
from .reconstruct import Membership, is_member_of_D


def fresh_name(base: str, taken) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def rename_elements(t: TreeOfDSets, mapping: dict) -> TreeOfDSets:
    """Rename domain elements (element-name table only; geometry untouched)."""
    em = {leaf: mapping.get(name, name) for leaf, name in t.element}
    if len(set(em.values())) != len(em):
        raise ArgumentError("element renaming is not injective")
    return TreeOfDSets(tree=t.tree, label=t.label, f=t.f, g=t.g,
                       element=tuple(sorted(em.items())))


# --------------------------------------------------------------------------
# Extension descriptors and their application
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionDescriptor:
    """A one-point extension datum.

    kind "I": new root below everything, new element special there.
    kind "IIa": new leaf at root-label ramification point `ram`, recursing
    into the successor structure via `inner`.
    kind "IIb": new ramification point on root-label `edge`; `special_side`
    is None when the new leaf is special, else the edge endpoint whose side
    carries the special branch.
    """

    kind: str
    new_element: str
    ram: Optional[str] = None
    inner: Optional["ExtensionDescriptor"] = None
    edge: Optional[tuple] = None
    special_side: Optional[str] = None

    def kind_rank(self) -> int:
        return {"I": 0, "IIa": 1, "IIb": 2}[self.kind]

    def sort_key(self):
        inner_key = self.inner.sort_key() if self.inner else ()
        return (self.kind_rank(), self.ram or "", self.edge or (),
                "-" if self.special_side is None else self.special_side, inner_key)


@dataclass(frozen=True)
class Embedding:
    """An injective element map, flagged once all six relations were checked."""

    mapping: tuple
    verified: bool = False

    @property
    def as_dict(self) -> dict:
        return dict(self.mapping)

    def __call__(self, x):
        return self.as_dict[x]


def embedding(mapping: dict, verified: bool = False) -> Embedding:
    return Embedding(mapping=tuple(sorted(mapping.items())), verified=verified)


def _as_ls(x) -> LStructure:
    return realize(x)[0] if isinstance(x, TreeOfDSets) else x


def verify_embedding(src, dst, mapping: dict) -> bool:
    """Relations preserved and reflected under the element map."""
    src_ls, dst_ls = _as_ls(src), _as_ls(dst)
    image = set(mapping.values())
    if len(image) != len(mapping):
        return False
    return src_ls.rename(mapping) == dst_ls.induced(image)


def apply_extension(t: TreeOfDSets, desc: ExtensionDescriptor) -> TreeOfDSets:
    """Build the one-point extension of t described by `desc`."""
    e = desc.new_element
    if e in t.domain:
        raise ArgumentError(f"new element {e!r} already in the domain")
    if desc.kind == "I":
        return _apply_type_i(t, e)
    if desc.kind == "IIb":
        return _apply_type_iib(t, e, desc.edge, desc.special_side)
    if desc.kind == "IIa":
        return _apply_type_iia(t, e, desc.ram, desc.inner)
    raise ArgumentError(f"unknown extension kind {desc.kind!r}")


def _apply_type_i(t: TreeOfDSets, e: str) -> TreeOfDSets:
    dom = sorted(t.domain)
    if len(dom) == 1:
        x = dom[0]
        st = structure_tree({"u0"}, "u0", {})
        return tree_of_dsets(st, {"u0": dset_graph({x, e}, {(x, e)})},
                             {"u0": {}}, {}, {x: x, e: e})
    center = fresh_name("c", set(dom) | {e})
    star = dset_graph(set(dom) | {e, center},
                      [(center, a) for a in dom] + [(center, e)],
                      {center: e})
    new_root = fresh_name("w", set(t.tree.vertices))
    parent = dict(t.tree.parent_map)
    parent[t.tree.root] = new_root
    st = structure_tree(set(t.tree.vertices) | {new_root}, new_root, parent)
    labels = dict(t.label_map)
    labels[new_root] = star
    f = {v: dict(m) for v, m in t.f_map.items()}
    f[new_root] = {t.tree.root: center}
    g = {pc: dict(m) for pc, m in t.g_map.items()}
    em = t.element_map
    g[(new_root, t.tree.root)] = {leaf: em[leaf] for leaf in t.root_label().leaves()}
    element = {a: a for a in dom}
    element[e] = e
    return tree_of_dsets(st, labels, f, g, element)


def _apply_type_iib(t: TreeOfDSets, e: str, edge, special_side) -> TreeOfDSets:
    root = t.tree.root
    lab = t.root_label()
    u, v = edge
    key = (u, v) if u <= v else (v, u)
    if key not in lab.edges:
        raise ArgumentError(f"no root-label edge {edge}")
    taken = set(lab.nodes) | {e}
    m = fresh_name("m", taken)
    eleaf = e if e not in lab.nodes else fresh_name("el", taken | {m})
    nodes = set(lab.nodes) | {m, eleaf}
    edges = (set(lab.edges) - {key}) | {(m, u), (m, v), (m, eleaf)}
    special = dict(lab.special_map)
    # the subdivided edge may have identified someone's special branch
    if special.get(u) == v:
        special[u] = m
    if special.get(v) == u:
        special[v] = m
    if special_side is None:
        special[m] = eleaf
    elif special_side in (u, v):
        special[m] = special_side
    else:
        raise ArgumentError(f"special side {special_side!r} is not an endpoint of {edge}")
    w = fresh_name("w", t.tree.vertices)
    labels = dict(t.label_map)
    labels[root] = dset_graph(nodes, edges, special)
    labels[w] = dset_graph({"n0", "n1"}, {("n0", "n1")})
    parent = dict(t.tree.parent_map)
    parent[w] = root
    st = structure_tree(set(t.tree.vertices) | {w}, root, parent)
    f = {x: dict(mm) for x, mm in t.f_map.items()}
    f[root][w] = m
    f[w] = {}
    g = {pc: dict(mm) for pc, mm in t.g_map.items()}
    # branches formerly identified by the far endpoint now pass through m
    for child, rr in t.f_map[root].items():
        if rr == u:
            g[(root, child)] = {lf: (m if nb == v else nb)
                                for lf, nb in g[(root, child)].items()}
        elif rr == v:
            g[(root, child)] = {lf: (m if nb == u else nb)
                                for lf, nb in g[(root, child)].items()}
    nonspecial = sorted({u, v, eleaf} - {special[m]})
    g[(root, w)] = {"n0": nonspecial[0], "n1": nonspecial[1]}
    element = dict(t.element_map)
    element[eleaf] = e
    return tree_of_dsets(st, labels, f, g, element)


def _apply_type_iia(t: TreeOfDSets, e: str, r: str,
                    inner: ExtensionDescriptor) -> TreeOfDSets:
    root = t.tree.root
    lab = t.root_label()
    if r not in lab.rams():
        raise ArgumentError(f"{r!r} is not a ramification point of the root label")
    omega = {rr: s for s, rr in t.f_map[root].items()}[r]
    sub = induced_at(t, omega)
    inner_name = inner.new_element
    if inner_name in sub.domain:
        inner = _rename_descriptor(inner, fresh_name("e", set(sub.domain)))
        inner_name = inner.new_element
    esub = apply_extension(sub, inner)

    taken = set(lab.nodes) | {e}
    eleaf = e if e not in lab.nodes else fresh_name("el", taken)
    new_lab = dset_graph(set(lab.nodes) | {eleaf},
                         set(lab.edges) | {(r, eleaf)}, lab.special_map)

    old_sub = t.tree.subtree(omega)
    keep = set(t.tree.vertices) - old_sub
    taken_v = set(keep)
    vmap = {}
    for x in sorted(esub.tree.vertices):
        nv = fresh_name(f"s{len(vmap)}", taken_v)
        vmap[x] = nv
        taken_v.add(nv)
    labels = {x: lg for x, lg in t.label_map.items() if x in keep}
    labels[root] = new_lab
    for x, lg in esub.label_map.items():
        labels[vmap[x]] = lg
    parent = {c: p for c, p in t.tree.parent_map.items() if c in keep and p in keep}
    for c, p in esub.tree.parent_map.items():
        parent[vmap[c]] = vmap[p]
    parent[vmap[esub.tree.root]] = root
    st = structure_tree(set(labels), root, parent)
    f = {x: dict(m) for x, m in t.f_map.items() if x in keep}
    f[root] = {s: rr for s, rr in t.f_map[root].items() if s != omega}
    f[root][vmap[esub.tree.root]] = r
    for x, m in esub.f_map.items():
        f[vmap[x]] = {vmap[s]: rr for s, rr in m.items()}
    g = {(p, c): dict(m) for (p, c), m in t.g_map.items() if p in keep and c in keep}
    for (p, c), m in esub.g_map.items():
        g[(vmap[p], vmap[c])] = dict(m)
    old_g = t.g_map[(root, omega)]
    esub_names = esub.element_map
    bridge = {}
    for leaf in esub.root_label().leaves():
        name = esub_names[leaf]
        bridge[leaf] = eleaf if name == inner_name else old_g[name]
    g[(root, vmap[esub.tree.root])] = bridge
    element = dict(t.element_map)
    element[eleaf] = e
    return tree_of_dsets(st, labels, f, g, element)


def _rename_descriptor(desc: ExtensionDescriptor, new_name: str) -> ExtensionDescriptor:
    return replace(desc, new_element=new_name)


# --------------------------------------------------------------------------
# Enumeration and classification
# --------------------------------------------------------------------------

def enumerate_extensions(t: TreeOfDSets, new_name: Optional[str] = None) -> list:
    """Every one-point extension up to equality of the induced structure.

    Returns (descriptor, extension tree) pairs; the new element is named
    `new_name` (default: fresh 'e...').  Deduplication keys on the realized
    relations, which on a fixed base is isomorphism over the base.
    """
    rep = validate(t)
    if not rep.ok:
        raise ArgumentError("enumerate_extensions: invalid tree: " + rep.violations[0])
    e = new_name or fresh_name("e", t.domain)
    if len(t.domain) == 1:
        desc = ExtensionDescriptor("I", e)
        return [(desc, apply_extension(t, desc))]
    raw = [ExtensionDescriptor("I", e)]
    lab = t.root_label()
    inv_f = {r: s for s, r in t.f_map[t.tree.root].items()}
    for r in lab.rams():
        sub = induced_at(t, inv_f[r])
        inner_e = fresh_name("e", sub.domain)
        for inner, _ in enumerate_extensions(sub, new_name=inner_e):
            raw.append(ExtensionDescriptor("IIa", e, ram=r, inner=inner))
    for u, v in sorted(lab.edges):
        for side in (None, u, v):
            raw.append(ExtensionDescriptor("IIb", e, edge=(u, v), special_side=side))

    out, seen = [], set()
    for desc in sorted(raw, key=lambda d: d.sort_key()):
        ext = apply_extension(t, desc)
        ls, _ = realize(ext)
        key = (ls.domain, ls.L, ls.S, ls.Lp, ls.Sp, ls.Q, ls.R)
        if key in seen:
            continue
        seen.add(key)
        out.append((desc, ext))
    return out


def classify(a: TreeOfDSets, e: TreeOfDSets,
             emb: Union[Embedding, dict, None] = None) -> ExtensionDescriptor:
    """The descriptor reproducing the one-point extension e of a.

    Classification is structural: a type-I extension is recognized by the new
    element sitting as apex over every pair, and otherwise the new element's
    position in the root label (at an old ramification point, or at a new one
    splitting an edge) determines the type, recursing for type IIa.
    """
    emb_map = dict(emb.mapping) if isinstance(emb, Embedding) else dict(emb or {})
    if not emb_map:
        emb_map = {x: x for x in a.domain}
    if set(emb_map) != set(a.domain):
        raise ArgumentError("embedding must be defined on the whole base domain")
    if len(e.domain) != len(a.domain) + 1:
        raise ArgumentError("classify requires a one-point extension")
    extras = set(e.domain) - set(emb_map.values())
    if len(extras) != 1:
        raise ArgumentError("embedding image misses more than one element")
    x = extras.pop()
    back = {v: k for k, v in emb_map.items()}
    new_name = fresh_name(x, set(a.domain))
    back[x] = new_name
    aligned = rename_elements(e, back)
    desc = _classify_aligned(a, aligned, new_name)
    check_ls, _ = realize(apply_extension(a, desc))
    target_ls, _ = realize(aligned)
    if check_ls != target_ls:
        raise InconsistencyError(
            f"classification {desc.kind} does not reproduce the extension")
    return desc


def _is_type_i(a: TreeOfDSets, e: TreeOfDSets, x: str) -> bool:
    """Star root label with x special over a copy of a's whole structure."""
    le = e.root_label()
    rams = le.rams()
    if len(rams) != 1:
        return False
    c = rams[0]
    if set(le.leaves()) | {c} != set(le.nodes):
        return False
    if le.special_map[c] != e.leaf_of_element()[x]:
        return False
    root = e.tree.root
    succs = e.tree.children(root)
    if len(succs) != 1:
        return False
    w = succs[0]
    sub = induced_at(e, w)
    gmap = e.g_map[(root, w)]
    em = e.element_map
    ren = {leaf: em[gmap[leaf]] for leaf in sub.domain}
    sub_ls, _ = realize(rename_elements(sub, ren))
    return sub_ls == realize(a)[0]


def _classify_aligned(a: TreeOfDSets, e: TreeOfDSets, x: str) -> ExtensionDescriptor:
    if len(a.domain) == 1:
        return ExtensionDescriptor("I", x)
    if _is_type_i(a, e, x):
        return ExtensionDescriptor("I", x)

    la, le = a.root_label(), e.root_label()
    leaf_a, leaf_e = a.leaf_of_element(), e.leaf_of_element()
    chi = {leaf_a[el]: leaf_e[el] for el in a.domain}
    for trip in itertools.combinations(sorted(a.domain), 3):
        ra = la.median(*(leaf_a[el] for el in trip))
        re = le.median(*(leaf_e[el] for el in trip))
        if chi.get(ra, re) != re:
            raise InconsistencyError("base geometry does not embed in the extension")
        chi[ra] = re
    chi_inv = {v: k for k, v in chi.items()}
    xe = leaf_e[x]
    (p,) = le.adjacency()[xe]

    if p in chi_inv:
        r_a = chi_inv[p]
        if r_a not in la.rams():
            raise InconsistencyError("new element attaches to a non-ramification node")
        inv_fa = {r: s for s, r in a.f_map[a.tree.root].items()}
        inv_fe = {r: s for s, r in e.f_map[e.tree.root].items()}
        omega_a, omega_e = inv_fa[r_a], inv_fe[p]
        a_sub = induced_at(a, omega_a)
        e_sub = induced_at(e, omega_e)
        ga = a.g_map[(a.tree.root, omega_a)]
        ge_inv = {nb: leaf for leaf, nb in e.g_map[(e.tree.root, omega_e)].items()}
        ren = {}
        for leaf, nb in ga.items():
            ren[ge_inv[chi[nb]]] = leaf
        sub_new = fresh_name("e", set(a_sub.domain))
        ren[ge_inv[xe]] = sub_new
        inner = _classify_aligned(a_sub, rename_elements(e_sub, ren), sub_new)
        return ExtensionDescriptor("IIa", x, ram=r_a, inner=inner)

    others = [n for n in le.adjacency()[p] if n != xe]
    if len(others) != 2 or not all(n in chi_inv for n in others):
        raise InconsistencyError("new ramification point is not on a base edge")
    u, v = sorted(chi_inv[n] for n in others)
    sp = le.special_map[p]
    if sp == xe:
        side = None
    else:
        side = chi_inv[sp]
        if side not in (u, v):
            raise InconsistencyError("special branch at the new point misses the edge")
    return ExtensionDescriptor("IIb", x, edge=(u, v), special_side=side)


# --------------------------------------------------------------------------
# Peel orderings
# --------------------------------------------------------------------------

_member_cached = lru_cache(maxsize=None)(is_member_of_D)


def peel(e: Union[TreeOfDSets, LStructure], a: Iterable) -> tuple:
    """Order the complement of a so every prefix induces a realizable structure."""
    ls = _as_ls(e)
    base = frozenset(a)
    if not base <= set(ls.domain):
        raise ArgumentError("subset escapes the domain")
    if not _member_cached(ls.induced(base)).member:
        raise ArgumentError("the base subset does not induce a realizable structure")

    def rec(cur, remaining, acc):
        if not remaining:
            return acc
        for x in sorted(remaining):
            if _member_cached(ls.induced(cur | {x})).member:
                res = rec(cur | {x}, remaining - {x}, acc + (x,))
                if res is not None:
                    return res
        return None

    res = rec(base, frozenset(ls.domain) - base, ())
    if res is None:
        raise InconsistencyError("no peel ordering exists; one-point chain lemma violated")
    return res


# --------------------------------------------------------------------------
# Amalgamation
# --------------------------------------------------------------------------

def _aligned_pair(a, e, f):
    """Rename e so the embedding of a becomes the identity; return (tree, extras)."""
    f_map = dict(f.mapping) if isinstance(f, Embedding) else dict(f or {})
    if not f_map:
        f_map = {z: z for z in a.domain}
    back = {v: k for k, v in f_map.items()}
    extras = sorted(set(e.domain) - set(f_map.values()))
    return back, extras


def amalgamate_one_point(a: TreeOfDSets, e1: TreeOfDSets, e2: TreeOfDSets,
                         f1=None, f2=None) -> tuple:
    """Amalgamate two one-point extensions of a; the two new points stay distinct.

    Returns (E, g1, g2) with verified embeddings agreeing on a.
    """
    back1, extras1 = _aligned_pair(a, e1, f1)
    back2, extras2 = _aligned_pair(a, e2, f2)
    if len(extras1) != 1 or len(extras2) != 1:
        raise ArgumentError("amalgamate_one_point requires one-point extensions")
    x1, x2 = extras1[0], extras2[0]
    n1 = fresh_name(back1.get(x1, x1), set(a.domain))
    n2 = fresh_name(back2.get(x2, x2), set(a.domain) | {n1})
    back1[x1] = n1
    back2[x2] = n2
    e1n = rename_elements(e1, back1)
    e2n = rename_elements(e2, back2)
    d1 = _classify_aligned(a, e1n, n1)
    d2 = _classify_aligned(a, e2n, n2)

    amalgam = _dispatch_one_point(a, d1, d2)

    g1 = {y: back1[y] for y in e1.domain}
    g2 = {y: back2[y] for y in e2.domain}
    if not (verify_embedding(e1, amalgam, g1) and verify_embedding(e2, amalgam, g2)):
        raise InconsistencyError("amalgam embeddings failed verification")
    f1m = dict(f1.mapping) if isinstance(f1, Embedding) else dict(f1 or {z: z for z in a.domain})
    f2m = dict(f2.mapping) if isinstance(f2, Embedding) else dict(f2 or {z: z for z in a.domain})
    for z in a.domain:
        if g1[f1m[z]] != g2[f2m[z]]:
            raise InconsistencyError("amalgam embeddings do not commute on the base")
    return amalgam, embedding(g1, verified=True), embedding(g2, verified=True)


def _dispatch_one_point(a: TreeOfDSets, d1: ExtensionDescriptor,
                        d2: ExtensionDescriptor) -> TreeOfDSets:
    k1, k2 = d1.kind, d2.kind
    if k1 == "I" and k2 == "I":
        return apply_extension(apply_extension(a, d1), ExtensionDescriptor("I", d2.new_element))
    if k1 == "I":
        return apply_extension(apply_extension(a, d2), ExtensionDescriptor("I", d1.new_element))
    if k2 == "I":
        return apply_extension(apply_extension(a, d1), ExtensionDescriptor("I", d2.new_element))
    if k1 == "IIa" and k2 == "IIa" and d1.ram == d2.ram:
        return _amalgamate_shared_ram(a, d1, d2)
    first = apply_extension(a, d1)
    return apply_extension(first, _relocate(d2, d1, first))


def _relocate(d2: ExtensionDescriptor, d1: ExtensionDescriptor,
              applied: TreeOfDSets) -> ExtensionDescriptor:
    """Adjust d2's edge reference after d1 subdivided the same root-label edge."""
    if d2.kind != "IIb" or d1.kind != "IIb" or d1.edge != d2.edge:
        return d2
    u, v = sorted(d2.edge)
    lab = applied.root_label()
    path = lab.path(u, v)
    m1 = path[1]
    side = d2.special_side
    if side is not None:
        side = u if side == u else m1
    return replace(d2, edge=(u, m1), special_side=side)


def _amalgamate_shared_ram(a: TreeOfDSets, d1: ExtensionDescriptor,
                           d2: ExtensionDescriptor) -> TreeOfDSets:
    """Case of two type IIa extensions at the same ramification point."""
    root = a.tree.root
    r = d1.ram
    omega = {rr: s for s, rr in a.f_map[root].items()}[r]
    sub = induced_at(a, omega)
    i1, i2 = d1.inner, d2.inner
    m1 = fresh_name(i1.new_element, set(sub.domain))
    m2 = fresh_name(i2.new_element, set(sub.domain) | {m1})
    i1 = _rename_descriptor(i1, m1)
    i2 = _rename_descriptor(i2, m2)
    esub = _dispatch_one_point(sub, i1, i2)

    lab = a.root_label()
    taken = set(lab.nodes) | {d1.new_element, d2.new_element}
    leaf1 = d1.new_element if d1.new_element not in lab.nodes else fresh_name("el", taken)
    taken.add(leaf1)
    leaf2 = d2.new_element if d2.new_element not in lab.nodes else fresh_name("el", taken)
    new_lab = dset_graph(set(lab.nodes) | {leaf1, leaf2},
                         set(lab.edges) | {(r, leaf1), (r, leaf2)},
                         lab.special_map)

    old_sub = a.tree.subtree(omega)
    keep = set(a.tree.vertices) - old_sub
    taken_v = set(keep)
    vmap = {}
    for xv in sorted(esub.tree.vertices):
        nv = fresh_name(f"s{len(vmap)}", taken_v)
        vmap[xv] = nv
        taken_v.add(nv)
    labels = {xv: lg for xv, lg in a.label_map.items() if xv in keep}
    labels[root] = new_lab
    for xv, lg in esub.label_map.items():
        labels[vmap[xv]] = lg
    parent = {c: p for c, p in a.tree.parent_map.items() if c in keep and p in keep}
    for c, p in esub.tree.parent_map.items():
        parent[vmap[c]] = vmap[p]
    parent[vmap[esub.tree.root]] = root
    st = structure_tree(set(labels), root, parent)
    f = {xv: dict(m) for xv, m in a.f_map.items() if xv in keep}
    f[root] = {s: rr for s, rr in a.f_map[root].items() if s != omega}
    f[root][vmap[esub.tree.root]] = r
    for xv, m in esub.f_map.items():
        f[vmap[xv]] = {vmap[s]: rr for s, rr in m.items()}
    g = {(p, c): dict(m) for (p, c), m in a.g_map.items() if p in keep and c in keep}
    for (p, c), m in esub.g_map.items():
        g[(vmap[p], vmap[c])] = dict(m)
    old_g = a.g_map[(root, omega)]
    bridge = {}
    for leaf in esub.root_label().leaves():
        name = esub.element_map[leaf]
        if name == m1:
            bridge[leaf] = leaf1
        elif name == m2:
            bridge[leaf] = leaf2
        else:
            bridge[leaf] = old_g[name]
    g[(root, vmap[esub.tree.root])] = bridge
    element = dict(a.element_map)
    element[leaf1] = d1.new_element
    element[leaf2] = d2.new_element
    return tree_of_dsets(st, labels, f, g, element)


def amalgamate(a: TreeOfDSets, e1: TreeOfDSets, e2: TreeOfDSets,
               f1=None, f2=None) -> tuple:
    """General amalgamation by peeling down to one-point steps.

    E1's element names survive into the amalgam; E2's extra elements are
    renamed only on collision.
    """
    back1, extras1 = _aligned_pair(a, e1, f1)
    back2, extras2 = _aligned_pair(a, e2, f2)
    taken = set(a.domain) | {back1.get(y, y) for y in e1.domain}
    ren2 = dict(back2)
    for y in extras2:
        nm = fresh_name(ren2.get(y, y), taken)
        ren2[y] = nm
        taken.add(nm)
    e1n = rename_elements(e1, back1)
    e2n = rename_elements(e2, ren2)
    result = _amalgamate_aligned(a, e1n, e2n)
    g1 = {y: back1.get(y, y) for y in e1.domain}
    g2 = {y: ren2.get(y, y) for y in e2.domain}
    if not (verify_embedding(e1, result, g1) and verify_embedding(e2, result, g2)):
        raise InconsistencyError("amalgam embeddings failed verification")
    return result, embedding(g1, verified=True), embedding(g2, verified=True)


def _amalgamate_aligned(a: TreeOfDSets, e1: TreeOfDSets, e2: TreeOfDSets) -> TreeOfDSets:
    ex1 = sorted(set(e1.domain) - set(a.domain))
    ex2 = sorted(set(e2.domain) - set(a.domain))
    if not ex2:
        return e1
    if not ex1:
        return e2
    if len(ex2) == 1:
        if len(ex1) == 1:
            amalgam, _, _ = amalgamate_one_point(a, e1, e2)
            return amalgam
        ls1, _ = realize(e1)
        order = peel(ls1, a.domain)
        cur_tree = a
        cur_set = set(a.domain)
        g = e2
        for d in order:
            nxt_set = cur_set | {d}
            nxt_tree = _member_cached(ls1.induced(nxt_set)).tree
            g, _, _ = amalgamate_one_point(cur_tree, nxt_tree, g)
            cur_tree = nxt_tree
            cur_set = nxt_set
        return g
    ls2, _ = realize(e2)
    order = peel(ls2, a.domain)
    c1_set = set(a.domain) | {order[0]}
    c1 = _member_cached(ls2.induced(c1_set)).tree
    g1 = _amalgamate_aligned(a, e1, c1)
    return _amalgamate_aligned(c1, g1, e2)


def joint_embed(a: TreeOfDSets, b: TreeOfDSets) -> tuple:
    """Embed two structures side by side under a two-ramification-point root."""
    n, m = len(a.domain), len(b.domain)
    ren_b = {}
    taken = set(a.domain)
    for y in sorted(b.domain):
        nm = fresh_name(y, taken)
        ren_b[y] = nm
        taken.add(nm)
    bn = rename_elements(b, ren_b)
    ga = {y: y for y in a.domain}
    gb = dict(ren_b)

    if n == 1 and m == 1:
        x, y = sorted(a.domain)[0], sorted(bn.domain)[0]
        st = structure_tree({"u0"}, "u0", {})
        out = tree_of_dsets(st, {"u0": dset_graph({x, y}, {(x, y)})}, {"u0": {}},
                            {}, {x: x, y: y})
    elif n == 1:
        x = sorted(a.domain)[0]
        out = apply_extension(bn, ExtensionDescriptor("I", x))
    elif m == 1:
        y = sorted(bn.domain)[0]
        out = apply_extension(a, ExtensionDescriptor("I", y))
    else:
        dom_a, dom_b = sorted(a.domain), sorted(bn.domain)
        taken_nodes = set(dom_a) | set(dom_b)
        ra = fresh_name("r", taken_nodes)
        rb = fresh_name("q", taken_nodes | {ra})
        nodes = set(dom_a) | set(dom_b) | {ra, rb}
        edges = ([(ra, x) for x in dom_a] + [(rb, y) for y in dom_b] + [(ra, rb)])
        root_lab = dset_graph(nodes, edges, {ra: rb, rb: ra})
        out = _join_under(root_lab, ra, rb, a, bn)
    if not (verify_embedding(a, out, ga) and verify_embedding(b, out, gb)):
        raise InconsistencyError("joint embedding failed verification")
    return out, embedding(ga, verified=True), embedding(gb, verified=True)


def _join_under(root_lab: DSetGraph, ra: str, rb: str,
                a: TreeOfDSets, b: TreeOfDSets) -> TreeOfDSets:
    labels = {"j0": root_lab}
    parent = {}
    f = {"j0": {}}
    g = {}
    counter = itertools.count()

    def graft(t, r):
        vmap = {}
        for xv in sorted(t.tree.vertices):
            vmap[xv] = f"j{next(counter) + 1}"
        for xv, lg in t.label_map.items():
            labels[vmap[xv]] = lg
        for c, p in t.tree.parent_map.items():
            parent[vmap[c]] = vmap[p]
        parent[vmap[t.tree.root]] = "j0"
        f["j0"][vmap[t.tree.root]] = r
        for xv, m in t.f_map.items():
            f[vmap[xv]] = {vmap[s]: rr for s, rr in m.items()}
        for (p, c), m in t.g_map.items():
            g[(vmap[p], vmap[c])] = dict(m)
        em = t.element_map
        g[("j0", vmap[t.tree.root])] = {leaf: em[leaf] for leaf in t.root_label().leaves()}

    graft(a, ra)
    graft(b, rb)
    st = structure_tree(set(labels), "j0", parent)
    element = {x: x for x in set(a.domain) | set(b.domain)}
    return tree_of_dsets(st, labels, f, g, element)


# --------------------------------------------------------------------------
# Hulls
# --------------------------------------------------------------------------

def f_bound(n: int) -> int:
    """Size overhead bound for hulls: sum of (n-2)!/i! for i = 1 .. n-3."""
    if n <= 3:
        return 0
    return sum(factorial(n - 2) // factorial(i) for i in range(1, n - 2))


def _span_rams(lab: DSetGraph, leaves) -> list:
    out = set()
    for trip in itertools.combinations(sorted(leaves), 3):
        out.add(lab.median(*trip))
    return sorted(out)


def hull(e: TreeOfDSets, a: Iterable, max_levels: Optional[int] = None) -> frozenset:
    """Close a subset under special-branch representatives, level by level.

    For each ramification point determined by the current set whose special
    branch covers no current element, one representative from that branch is
    added; the procedure then descends into the successor structures.  Sets
    of at most three elements are returned unchanged.
    """
    subset = frozenset(a)
    if not subset:
        raise ArgumentError("hull of an empty set")
    if not subset <= e.domain:
        raise ArgumentError("subset escapes the domain")
    n = len(subset)
    levels = (n - 3) if max_levels is None else max_levels
    if levels <= 0:
        return subset
    current = set(subset)

    def visit(v, depth):
        if depth > levels:
            return
        part = leaf_partition(e, v)
        lab = e.label_map[v]
        inv_f = {r: s for s, r in e.f_map[v].items()}
        pleaves = [leaf for leaf in lab.leaves() if part[leaf] & current]
        if len(pleaves) < 3:
            return
        rams = _span_rams(lab, pleaves)
        for r in rams:
            sp_leaves = lab.branch_leaves(r, lab.special_map[r])
            if not any(part[leaf] & current for leaf in sp_leaves):
                cand = min(min(part[leaf]) for leaf in sorted(sp_leaves) if part[leaf])
                current.add(cand)
        for r in rams:
            visit(inv_f[r], depth + 1)

    visit(e.tree.root, 1)
    return frozenset(current)


def special_closure(e: TreeOfDSets, a: Iterable, cap: int = 64) -> frozenset:
    """Fixpoint closure: every span ramification point gets a covered special branch."""
    current = set(a)
    if not current:
        raise ArgumentError("closure of an empty set")
    changed = True
    while changed:
        changed = False
        for v in sorted(e.tree.vertices):
            part = leaf_partition(e, v)
            lab = e.label_map[v]
            pleaves = [leaf for leaf in lab.leaves() if part[leaf] & current]
            if len(pleaves) < 3:
                continue
            for r in _span_rams(lab, pleaves):
                sp_leaves = lab.branch_leaves(r, lab.special_map[r])
                if not any(part[leaf] & current for leaf in sp_leaves):
                    cand = min(min(part[leaf]) for leaf in sorted(sp_leaves) if part[leaf])
                    current.add(cand)
                    changed = True
                    if len(current) > cap:
                        raise InconsistencyError("special closure exceeded the size cap")
    return frozenset(current)


def minimal_hull(e: TreeOfDSets, a: Iterable) -> frozenset:
    """Smallest superset inducing a realizable structure (brute force)."""
    subset = frozenset(a)
    ls, _ = realize(e)
    rest = sorted(set(ls.domain) - subset)
    for k in range(len(rest) + 1):
        for extra in itertools.combinations(rest, k):
            cand = subset | set(extra)
            if _member_cached(ls.induced(cand)).member:
                return frozenset(cand)
    raise InconsistencyError("no realizable superset exists, including the full domain")


# --------------------------------------------------------------------------
# Random members via extension chains
# --------------------------------------------------------------------------

def random_member(size: int, seed: int) -> TreeOfDSets:
    """Grow a random structure of the given size by uniform one-point extensions."""
    if size < 1:
        raise ArgumentError("size must be positive")
    rng = random.Random(seed)
    st = structure_tree({"u0"}, "u0", {})
    t = tree_of_dsets(st, {"u0": dset_graph({"a"}, set())}, {"u0": {}}, {}, {"a": "a"})
    names = "abcdefghijklmnopqrstuvwxyz"
    while len(t.domain) < size:
        nm = names[len(t.domain)]
        options = enumerate_extensions(t, new_name=nm)
        _, t = options[rng.randrange(len(options))]
    return t
