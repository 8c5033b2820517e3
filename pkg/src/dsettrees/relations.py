"""The six relations L, S, L', S', Q, R realized from a tree of D-sets.

Relations are stored in canonical form: one representative tuple per
symmetry orbit (the semicolon conventions give L a swap symmetry in its
last two arguments, S the dihedral pair symmetries, and R a swap of its two
triples).  Queries canonicalize their arguments, so callers never see the
orbit bookkeeping.

Two realization engines are provided and cross-tested: `realize` scans
every vertex and materializes all six relations (fine for the small
structures the package mostly handles), while `RelationView` answers
point queries lazily by walking witness chains upward from the root, which
is what the chain-growth machinery uses on larger structures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

from .dstructures import (DSetGraph, TreeOfDSets, covered, leaf_partition,
                          omitted, validate)
from .errors import ArgumentError, InconsistencyError


# --------------------------------------------------------------------------
# Canonical tuple forms
# --------------------------------------------------------------------------

def canon_l(x, y, z):
    if len({x, y, z}) < 3:
        raise ArgumentError(f"L-tuple entries must be distinct: {(x, y, z)}")
    return (x,) + tuple(sorted((y, z)))


def canon_s(x, y, z, w):
    if len({x, y, z, w}) < 4:
        raise ArgumentError(f"S-tuple entries must be distinct: {(x, y, z, w)}")
    a = tuple(sorted((x, y)))
    b = tuple(sorted((z, w)))
    return a + b if a <= b else b + a


def canon_lp(x, y, z, u):
    key = canon_l(x, y, z)
    if u in key:
        raise ArgumentError(f"L'-tuple omitted element must be distinct: {(x, y, z, u)}")
    return key + (u,)


def canon_sp(x, y, z, w, t):
    key = canon_s(x, y, z, w)
    if t in key:
        raise ArgumentError(f"S'-tuple omitted element must be distinct: {(x, y, z, w, t)}")
    return key + (t,)


def canon_q(x, y, z, w, p, q, s):
    return canon_s(x, y, z, w) + canon_l(p, q, s)


def canon_r(x, y, z, p, q, s):
    a = canon_l(x, y, z)
    b = canon_l(p, q, s)
    return a + b if a <= b else b + a


# --------------------------------------------------------------------------
# LStructure
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LStructure:
    """A finite structure in the six relations over a named element domain."""

    domain: tuple
    L: frozenset
    S: frozenset
    Lp: frozenset
    Sp: frozenset
    Q: frozenset
    R: frozenset

    def has_l(self, x, y, z) -> bool:
        return len({x, y, z}) == 3 and canon_l(x, y, z) in self.L

    def has_s(self, x, y, z, w) -> bool:
        return len({x, y, z, w}) == 4 and canon_s(x, y, z, w) in self.S

    def has_lp(self, x, y, z, u) -> bool:
        return (len({x, y, z}) == 3 and u not in (x, y, z)
                and canon_lp(x, y, z, u) in self.Lp)

    def has_sp(self, x, y, z, w, t) -> bool:
        return (len({x, y, z, w}) == 4 and t not in (x, y, z, w)
                and canon_sp(x, y, z, w, t) in self.Sp)

    def has_q(self, x, y, z, w, p, q, s) -> bool:
        return (len({x, y, z, w}) == 4 and len({p, q, s}) == 3
                and canon_q(x, y, z, w, p, q, s) in self.Q)

    def has_r(self, x, y, z, p, q, s) -> bool:
        return (len({x, y, z}) == 3 and len({p, q, s}) == 3
                and canon_r(x, y, z, p, q, s) in self.R)

    def kstar(self) -> tuple:
        """All canonical L-triples, sorted."""
        return tuple(sorted(self.L))

    def apex_of(self, triple) -> Optional[str]:
        """The unique apex x with L(x; y, z) on the given 3-set, if any."""
        members = tuple(triple)
        for x in members:
            rest = [m for m in members if m != x]
            if self.has_l(x, rest[0], rest[1]):
                return x
        return None

    def induced(self, subset: Iterable) -> "LStructure":
        keep = frozenset(subset)
        return LStructure(
            domain=tuple(sorted(keep)),
            L=frozenset(t for t in self.L if set(t) <= keep),
            S=frozenset(t for t in self.S if set(t) <= keep),
            Lp=frozenset(t for t in self.Lp if set(t) <= keep),
            Sp=frozenset(t for t in self.Sp if set(t) <= keep),
            Q=frozenset(t for t in self.Q if set(t) <= keep),
            R=frozenset(t for t in self.R if set(t) <= keep),
        )

    def rename(self, mapping: dict) -> "LStructure":
        f = lambda t: tuple(mapping[a] for a in t)
        return LStructure(
            domain=tuple(sorted(mapping[a] for a in self.domain)),
            L=frozenset(canon_l(*f(t)) for t in self.L),
            S=frozenset(canon_s(*f(t)) for t in self.S),
            Lp=frozenset(canon_lp(*f(t)) for t in self.Lp),
            Sp=frozenset(canon_sp(*f(t)) for t in self.Sp),
            Q=frozenset(canon_q(*f(t)) for t in self.Q),
            R=frozenset(canon_r(*f(t)) for t in self.R),
        )

    def reduct_key(self):
        return (self.domain, self.L, self.S)


def lstructure(domain: Iterable, L=(), S=(), Lp=(), Sp=(), Q=(), R=()) -> LStructure:
    """Canonicalize raw tuple collections into an LStructure."""
    dom = tuple(sorted(set(domain)))
    known = set(dom)
    def chk(relname, tuples):
        for t in tuples:
            if not set(t) <= known:
                raise ArgumentError(f"{relname}-tuple {t} mentions unknown element")
            yield t
    return LStructure(
        domain=dom,
        L=frozenset(canon_l(*t) for t in chk("L", L)),
        S=frozenset(canon_s(*t) for t in chk("S", S)),
        Lp=frozenset(canon_lp(*t) for t in chk("L'", Lp)),
        Sp=frozenset(canon_sp(*t) for t in chk("S'", Sp)),
        Q=frozenset(canon_q(*t) for t in chk("Q", Q)),
        R=frozenset(canon_r(*t) for t in chk("R", R)),
    )


@dataclass(frozen=True)
class WitnessMap:
    """The unique witnessing vertex per realized L- and S-instance."""

    witness_l: tuple  # sorted (canonical L-tuple, vertex)
    witness_s: tuple  # sorted (canonical S-tuple, vertex)

    @property
    def l_map(self) -> dict:
        return dict(self.witness_l)

    @property
    def s_map(self) -> dict:
        return dict(self.witness_s)


# --------------------------------------------------------------------------
# Realization by full vertex scan
# --------------------------------------------------------------------------

def _scan_l(t: TreeOfDSets, v: str):
    """Yield (canonical L-triple of domain elements) witnessed at vertex v."""
    lab = t.label_map[v]
    part = leaf_partition(t, v)
    for r in lab.rams():
        sp_nb = lab.special_map[r]
        groups = [(nb, lab.branch_leaves(r, nb)) for nb in lab.branches_at(r)]
        special_leaves = dict(groups)[sp_nb]
        others = [ls for nb, ls in groups if nb != sp_nb]
        for xb in sorted(special_leaves):
            for g1, g2 in itertools.combinations(others, 2):
                for yb in sorted(g1):
                    for zb in sorted(g2):
                        for x in part[xb]:
                            for y in part[yb]:
                                for z in part[zb]:
                                    yield canon_l(x, y, z)


def _scan_s(t: TreeOfDSets, v: str):
    lab = t.label_map[v]
    part = leaf_partition(t, v)
    leaves = lab.leaves()
    for quad in itertools.combinations(leaves, 4):
        p = lab.pairing(*quad)
        if p is None:
            continue
        (ab, cd) = p
        for x in part[ab[0]]:
            for y in part[ab[1]]:
                for z in part[cd[0]]:
                    for w in part[cd[1]]:
                        yield canon_s(x, y, z, w)


def realize(t: TreeOfDSets) -> tuple:
    """Compute the full LStructure of t together with its witness map."""
    rep = validate(t)
    if not rep.ok:
        raise ArgumentError("realize: invalid tree of D-sets: " + "; ".join(rep.violations))
    wl, ws = {}, {}
    for v in sorted(t.tree.vertices):
        for key in _scan_l(t, v):
            if key in wl:
                raise InconsistencyError(f"L{key} witnessed at both {wl[key]} and {v}")
            wl[key] = v
        for key in _scan_s(t, v):
            if key in ws:
                raise InconsistencyError(f"S{key} witnessed at both {ws[key]} and {v}")
            ws[key] = v

    om = {v: omitted(t, v) for v in t.tree.vertices}
    lp = set()
    for key, v in wl.items():
        lp.update(key + (u,) for u in om[v])
    sp = set()
    for key, v in ws.items():
        sp.update(key + (u,) for u in om[v])
    by_vertex = {}
    for key, v in wl.items():
        by_vertex.setdefault(v, []).append(key)
    r_rel = set()
    for v, keys in by_vertex.items():
        for a in keys:
            for b in keys:
                r_rel.add(a + b if a <= b else b + a)
    q_rel = set()
    for skey, v in ws.items():
        for lkey in by_vertex.get(v, ()):
            q_rel.add(skey + lkey)

    ls = LStructure(
        domain=tuple(sorted(t.domain)),
        L=frozenset(wl),
        S=frozenset(ws),
        Lp=frozenset(lp),
        Sp=frozenset(sp),
        Q=frozenset(q_rel),
        R=frozenset(r_rel),
    )
    wm = WitnessMap(witness_l=tuple(sorted(wl.items())),
                    witness_s=tuple(sorted(ws.items())))
    return ls, wm


# --------------------------------------------------------------------------
# Lazy realization by witness-chain walking
# --------------------------------------------------------------------------

class RelationView:
    """Point queries against realize(t) without materializing the relations.

    Answers are produced by walking up the chain of vertices in which the
    query elements stay distinct; the walk mirrors the maximality argument
    that gives every triple its unique apex.  Results agree with `realize`
    (cross-checked by the test suite on the whole corpus).
    """

    def __init__(self, t: TreeOfDSets):
        self.t = t
        self.domain = tuple(sorted(t.domain))
        self._leaf_of = t.leaf_of_element()
        self._labels = t.label_map
        self._apex = {}
        self._pair = {}
        self._omitted = {}
        self._f_to_succ = {v: {r: s for s, r in m.items()} for v, m in t.f_map.items()}
        self._g_inv = {(v, c): {nb: leaf for leaf, nb in m.items()}
                       for (v, c), m in t.g_map.items()}

    def omitted(self, v: str) -> frozenset:
        if v not in self._omitted:
            self._omitted[v] = omitted(self.t, v)
        return self._omitted[v]

    def _project(self, v, leaves, r):
        """Map leaves in distinct non-special branches at r into the successor at r."""
        lab = self._labels[v]
        succ = self._f_to_succ[v][r]
        inv = self._g_inv[(v, succ)]
        out = []
        for x in leaves:
            nb = lab.branch_of(r, x)
            if nb not in inv:
                return None, None
            out.append(inv[nb])
        return succ, tuple(out)

    def apex(self, x, y, z):
        """(apex element, witness vertex) for the 3-set, per the unique L-instance."""
        key = frozenset((x, y, z))
        if len(key) != 3:
            raise ArgumentError("apex requires three distinct elements")
        hit = self._apex.get(key)
        if hit is not None:
            return hit
        v = self.t.tree.root
        trip = (self._leaf_of[x], self._leaf_of[y], self._leaf_of[z])
        elems = (x, y, z)
        while True:
            lab = self._labels[v]
            r = lab.median(*trip)
            sp = lab.special_map[r]
            hit_idx = [i for i, lf in enumerate(trip) if lab.branch_of(r, lf) == sp]
            if hit_idx:
                res = (elems[hit_idx[0]], v)
                self._apex[key] = res
                return res
            v2, trip2 = self._project(v, trip, r)
            if v2 is None:
                raise InconsistencyError(f"no apex found for {key}")
            v, trip = v2, trip2

    def s_instance(self, x, y, z, w):
        """(canonical S-tuple, witness vertex) for the 4-set, or None."""
        key = frozenset((x, y, z, w))
        if len(key) != 4:
            raise ArgumentError("s_instance requires four distinct elements")
        if key in self._pair:
            return self._pair[key]
        v = self.t.tree.root
        quad = tuple(sorted(key))
        leaves = tuple(self._leaf_of[e] for e in quad)
        res = None
        while True:
            lab = self._labels[v]
            p = lab.pairing(*leaves)
            if p is not None:
                pos = {lf: e for lf, e in zip(leaves, quad)}
                (a, b), (c, d) = p
                res = (canon_s(pos[a], pos[b], pos[c], pos[d]), v)
                break
            r = lab.median(*leaves[:3])
            sp = lab.special_map[r]
            if any(lab.branch_of(r, lf) == sp for lf in leaves):
                break
            v, leaves = self._project(v, leaves, r)
            if v is None:
                break
        self._pair[key] = res
        return res

    # point queries -------------------------------------------------------

    def has_l(self, x, y, z) -> bool:
        if len({x, y, z}) != 3:
            return False
        return self.apex(x, y, z)[0] == x

    def has_s(self, x, y, z, w) -> bool:
        if len({x, y, z, w}) != 4:
            return False
        hit = self.s_instance(x, y, z, w)
        return hit is not None and hit[0] == canon_s(x, y, z, w)

    def has_lp(self, x, y, z, u) -> bool:
        if len({x, y, z}) != 3 or u in (x, y, z) or not self.has_l(x, y, z):
            return False
        return u in self.omitted(self.apex(x, y, z)[1])

    def has_sp(self, x, y, z, w, u) -> bool:
        if not self.has_s(x, y, z, w) or u in (x, y, z, w):
            return False
        return u in self.omitted(self.s_instance(x, y, z, w)[1])

    def has_r(self, x, y, z, p, q, s) -> bool:
        if not (self.has_l(x, y, z) and self.has_l(p, q, s)):
            return False
        return self.apex(x, y, z)[1] == self.apex(p, q, s)[1]

    def has_q(self, x, y, z, w, p, q, s) -> bool:
        if not (self.has_s(x, y, z, w) and self.has_l(p, q, s)):
            return False
        return self.s_instance(x, y, z, w)[1] == self.apex(p, q, s)[1]

    def induced(self, subset: Iterable) -> LStructure:
        """Materialize the induced LStructure on a small subset."""
        elems = tuple(sorted(set(subset)))
        wl, ws = {}, {}
        for trip in itertools.combinations(elems, 3):
            apex, v = self.apex(*trip)
            rest = tuple(a for a in trip if a != apex)
            wl[canon_l(apex, rest[0], rest[1])] = v
        for quad in itertools.combinations(elems, 4):
            hit = self.s_instance(*quad)
            if hit is not None:
                ws[hit[0]] = hit[1]
        lp, sp = set(), set()
        for key, v in wl.items():
            lp.update(key + (u,) for u in self.omitted(v) if u in elems)
        for key, v in ws.items():
            sp.update(key + (u,) for u in self.omitted(v) if u in elems)
        by_vertex = {}
        for key, v in wl.items():
            by_vertex.setdefault(v, []).append(key)
        r_rel = set()
        for v, keys in by_vertex.items():
            for a in keys:
                for b in keys:
                    r_rel.add(a + b if a <= b else b + a)
        q_rel = set()
        for skey, v in ws.items():
            for lkey in by_vertex.get(v, ()):
                q_rel.add(skey + lkey)
        return LStructure(domain=elems, L=frozenset(wl), S=frozenset(ws),
                          Lp=frozenset(lp), Sp=frozenset(sp),
                          Q=frozenset(q_rel), R=frozenset(r_rel))


# --------------------------------------------------------------------------
# Root D-relation and definability from (L, S)
# --------------------------------------------------------------------------

def root_d(ls: LStructure) -> frozenset:
    """Recover the root D-relation from the relations alone (all ordered tuples)."""
    out = set()
    dom = ls.domain
    for x, y, z, w in itertools.product(dom, repeat=4):
        if (x == y or z == w) and not ({x, y} & {z, w}):
            out.add((x, y, z, w))
            continue
        if len({x, y, z, w}) == 4 and ls.has_s(x, y, z, w):
            if not any(ls.has_sp(x, y, z, w, u) for u in dom):
                out.add((x, y, z, w))
    return frozenset(out)


def leaf_d_relation(g: DSetGraph, naming: Optional[dict] = None) -> frozenset:
    """All ordered leaf 4-tuples satisfying the natural D-relation of the graph."""
    naming = naming or {}
    out = set()
    for quad in itertools.product(g.leaves(), repeat=4):
        if g.leaf_d(*quad):
            out.add(tuple(naming.get(n, n) for n in quad))
    return frozenset(out)


def derive_from_ls(domain: Iterable, L: Iterable, S: Iterable) -> LStructure:
    """Derive L', R, S', Q from (L, S) by the first-order definitions.

    Quantifiers range over the given finite domain.  On the (L, S)-reduct of
    a realized tree of D-sets the output reproduces the full realization.
    """
    base = lstructure(domain, L=L, S=S)
    dom = base.domain

    lp = set()
    for (x, y, z) in base.L:
        for w in dom:
            if w in (x, y, z):
                continue
            if (base.has_l(w, y, z) and base.has_l(w, x, z) and base.has_l(w, x, y)
                    and not base.has_s(x, w, y, z)):
                lp.add(canon_lp(x, y, z, w))
    with_lp = LStructure(dom, base.L, base.S, frozenset(lp),
                         frozenset(), frozenset(), frozenset())

    def lp_profile(key):
        return frozenset(u for u in dom if u not in key
                         and canon_lp(key[0], key[1], key[2], u) in with_lp.Lp)

    profiles = {key: lp_profile(key) for key in base.L}
    r_rel = set()
    for a in base.L:
        for b in base.L:
            if a <= b and profiles[a] == profiles[b]:
                r_rel.add(a + b)
    with_r = LStructure(dom, base.L, base.S, frozenset(lp),
                        frozenset(), frozenset(), frozenset(r_rel))

    sp = set()
    for (x, y, z, w) in base.S:
        quad = (x, y, z, w)
        for t in dom:
            if t in quad:
                continue
            ok = all(
                with_r.has_r(t, x, y, t, u, v)
                for u, v in itertools.combinations(quad, 2))
            if not ok:
                continue
            ok = all(
                not with_r.has_r(t, x, y, u, v, s)
                for u, v, s in itertools.permutations(quad, 3)
                if v < s and base.has_l(u, v, s))
            if ok:
                sp.add(canon_sp(x, y, z, w, t))
    with_sp = LStructure(dom, base.L, base.S, frozenset(lp),
                         frozenset(sp), frozenset(), frozenset(r_rel))

    def sp_profile(skey):
        return frozenset(u for u in dom if u not in skey and (skey + (u,)) in with_sp.Sp)

    q_rel = set()
    for skey in base.S:
        s_prof = sp_profile(skey)
        for lkey in base.L:
            if s_prof == profiles[lkey]:
                q_rel.add(skey + lkey)
    return LStructure(dom, base.L, base.S, frozenset(lp), frozenset(sp),
                      frozenset(q_rel), frozenset(r_rel))


# --------------------------------------------------------------------------
# D-relation axiom checking
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AxiomReport:
    ok: bool
    failures: tuple  # (axiom, offending instantiation)

    def __bool__(self):
        return self.ok


def check_d_axioms(domain: Iterable, rel: Iterable, level: str = "basic") -> AxiomReport:
    """Check (D1)-(D4), plus (D5) for `proper` and (D6) for `dense`."""
    if level not in ("basic", "proper", "dense"):
        raise ArgumentError(f"unknown level {level!r}")
    dom = tuple(sorted(set(domain)))
    d = frozenset(tuple(t) for t in rel)
    fails = []

    def has(x, y, z, w):
        return (x, y, z, w) in d

    for (x, y, z, w) in sorted(d):
        for sym in ((y, x, z, w), (x, y, w, z), (z, w, x, y)):
            if sym not in d:
                fails.append(("D1", (x, y, z, w), sym))
        if has(x, z, y, w):
            fails.append(("D2", (x, y, z, w), (x, z, y, w)))
        for a in dom:
            if not (has(a, y, z, w) or has(x, y, z, a)):
                fails.append(("D3", (x, y, z, w), a))
    for x, y, z in itertools.product(dom, repeat=3):
        if x != z and y != z and not has(x, y, z, z):
            fails.append(("D4", (x, y, z, z), None))
    if level in ("proper", "dense"):
        for x, y, z in itertools.permutations(dom, 3):
            if not any(t != z and has(x, y, z, t) for t in dom):
                fails.append(("D5", (x, y, z), None))
    if level == "dense":
        for (x, y, z, w) in sorted(d):
            if not any(has(a, y, z, w) and has(x, a, z, w) and has(x, y, a, w)
                       and has(x, y, z, a) for a in dom):
                fails.append(("D6", (x, y, z, w), None))
    return AxiomReport(not fails, tuple(fails))
