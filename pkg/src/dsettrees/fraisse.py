"""Chain growth toward the generic structure, with richness and orbit reports.

Each round enumerates extension tasks (an embedded substructure of bounded
size plus a one-point extension of it), checks which are already realized
inside the stage, and amalgamates the missing ones in.  A task is realized
at stage scale by amalgamating over a small special-closed anchor around the
embedded copy and transporting the resulting placement through the anchor's
span, which is a literal subgeometry of the stage, so every expensive step
runs on structures of bounded size.

Orbit signatures count isomorphism types of (hull, marked subset) pairs;
they approximate orbit counts on k-sets from above and stabilize as the
stage gets richer.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, replace
from typing import Optional

from .amalgam import (ExtensionDescriptor, Embedding, amalgamate,
                      apply_extension, embedding, enumerate_extensions,
                      classify, fresh_name, hull, rename_elements,
                      special_closure, _member_cached)
from .dstructures import (DSetGraph, TreeOfDSets, dset_graph, leaf_partition,
                          omitted, structure_tree, tree_of_dsets, validate)
from .errors import ArgumentError, InconsistencyError
from .relations import LStructure, RelationView, canon_s, realize
from .reconstruct import canonical_key


# --------------------------------------------------------------------------
# Stage relation index: positional patterns and realized-extension bitmasks
# --------------------------------------------------------------------------

def _pair(a, b):
    return (a, b) if a <= b else (b, a)


class StageIndex:
    """Apex and pairing tables for every triple/quadruple, plus bitmask
    lookups answering `is this one-point extension realized over S`."""

    def __init__(self, stage: TreeOfDSets, order: Optional[list] = None):
        self.stage = stage
        self.rv = RelationView(stage)
        self.elements = []
        self.pos = {}
        self.apex = {}
        self.spair = {}
        self.mask_apex = {}
        self.mask_side = {}
        self.mask_s = {}
        for el in (order or sorted(stage.domain)):
            self._extend(el)

    def _extend(self, el):
        rv = self.rv
        old = list(self.elements)
        self.pos[el] = len(self.elements)
        self.elements.append(el)
        pos = self.pos
        for a, b in itertools.combinations(old, 2):
            apex, wit = rv.apex(a, b, el)
            self.apex[frozenset((a, b, el))] = (apex, wit)
            rest = sorted(u for u in (a, b, el) if u != apex)
            key = (rest[0], rest[1])
            self.mask_apex[key] = self.mask_apex.get(key, 0) | (1 << pos[apex])
            k0 = (apex, rest[0])
            self.mask_side[k0] = self.mask_side.get(k0, 0) | (1 << pos[rest[1]])
            k1 = (apex, rest[1])
            self.mask_side[k1] = self.mask_side.get(k1, 0) | (1 << pos[rest[0]])
        for trio in itertools.combinations(old, 3):
            quad = trio + (el,)
            hit = rv.s_instance(*quad)
            self.spair[frozenset(quad)] = hit
            if hit is None:
                continue
            x, y, z, w = hit[0]
            for m, partner, pairset in ((x, y, (z, w)), (y, x, (z, w)),
                                        (z, w, (x, y)), (w, z, (x, y))):
                k = (partner, _pair(*pairset))
                self.mask_s[k] = self.mask_s.get(k, 0) | (1 << pos[m])

    def grow(self, new_stage: TreeOfDSets, new_element: str):
        self.stage = new_stage
        self.rv = RelationView(new_stage)
        self._extend(new_element)

    def pattern(self, subset: tuple):
        """Positional (L, S) pattern of a sorted tuple of elements."""
        k = len(subset)
        lpat = []
        for combo in itertools.combinations(range(k), 3):
            trip = tuple(subset[i] for i in combo)
            apex, _ = self.apex[frozenset(trip)]
            lpat.append((combo, trip.index(apex)))
        spat = []
        for combo in itertools.combinations(range(k), 4):
            quad = tuple(subset[i] for i in combo)
            hit = self.spair[frozenset(quad)]
            if hit is None:
                spat.append((combo, None))
            else:
                pos = {e: i for i, e in zip(combo, quad)}
                spat.append((combo, tuple(pos[e] for e in hit[0])))
        return (k, tuple(lpat), tuple(spat))

    def realized_mask(self, subset: tuple, bits) -> int:
        mask_apex = self.mask_apex
        mask_side = self.mask_side
        mask_s = self.mask_s
        pos = self.pos
        mask = (1 << len(self.elements)) - 1
        for el in subset:
            mask &= ~(1 << pos[el])
        for kind, data in bits:
            if kind == "apex_e":
                i, j = data
                mask &= mask_apex.get(_pair(subset[i], subset[j]), 0)
            elif kind == "apex_s":
                i, j = data
                mask &= mask_side.get((subset[i], subset[j]), 0)
            elif kind == "s_pair":
                i, pr = data
                mask &= mask_s.get((subset[i], _pair(subset[pr[0]], subset[pr[1]])), 0)
            else:
                i, j, k = data
                a, b, c = subset[i], subset[j], subset[k]
                forbid = (mask_s.get((a, _pair(b, c)), 0)
                          | mask_s.get((b, _pair(a, c)), 0)
                          | mask_s.get((c, _pair(a, b)), 0))
                mask &= ~forbid
            if not mask:
                return 0
        return mask


def _position_names(k: int) -> list:
    return [f"q{i}" for i in range(k)]


_NEW = "qz"


def _extension_bits(ext_ls: LStructure, k: int):
    """Pattern bits of the canonical extension over position names."""
    names = _position_names(k)
    bits = []
    for i, j in itertools.combinations(range(k), 2):
        trip = (names[i], names[j], _NEW)
        apex = ext_ls.apex_of(trip)
        if apex == _NEW:
            bits.append(("apex_e", (i, j)))
        elif apex == names[i]:
            bits.append(("apex_s", (i, j)))
        else:
            bits.append(("apex_s", (j, i)))
    for combo in itertools.combinations(range(k), 3):
        quad = tuple(names[i] for i in combo) + (_NEW,)
        hit = None
        for split in (((quad[0], quad[1]), (quad[2], quad[3])),
                      ((quad[0], quad[2]), (quad[1], quad[3])),
                      ((quad[0], quad[3]), (quad[1], quad[2]))):
            if ext_ls.has_s(split[0][0], split[0][1], split[1][0], split[1][1]):
                hit = canon_s(split[0][0], split[0][1], split[1][0], split[1][1])
                break
        if hit is None:
            bits.append(("s_none", combo))
        else:
            wherez = hit.index(_NEW)
            partner = hit[wherez ^ 1]
            others = tuple(x for n, x in enumerate(hit) if n not in (wherez, wherez ^ 1))
            pos = {nm: i for i, nm in zip(combo, quad)}
            bits.append(("s_pair", (pos[partner], (pos[others[0]], pos[others[1]]))))
    return tuple(bits)


@dataclass(frozen=True)
class _ExtInfo:
    index: int
    descriptor: ExtensionDescriptor
    kind: str
    bits: tuple
    sort_key: tuple


@dataclass(frozen=True)
class _TypeInfo:
    member: bool
    canon: object
    canon_rank: int
    rep_tree: Optional[TreeOfDSets]
    exts: tuple


class _TypeMemo:
    """Per positional pattern: membership, canonical key and extension data."""

    def __init__(self):
        self.by_pattern = {}
        self.rank_of = {}

    def lookup(self, index: StageIndex, subset: tuple) -> _TypeInfo:
        pat = index.pattern(subset)
        info = self.by_pattern.get(pat)
        if info is not None:
            return info
        k = len(subset)
        names = _position_names(k)
        ren = dict(zip(subset, names))
        ls_pos = index.rv.induced(subset).rename(ren)
        mem = _member_cached(ls_pos)
        if not mem.member:
            info = _TypeInfo(False, None, -1, None, ())
        else:
            exts = []
            for idx, (desc, ext_tree) in enumerate(
                    enumerate_extensions(mem.tree, new_name=_NEW)):
                ext_ls, _ = realize(ext_tree)
                bits = _extension_bits(ext_ls, k)
                exts.append(_ExtInfo(
                    index=idx,
                    descriptor=desc,
                    kind=desc.kind,
                    bits=bits,
                    sort_key=(desc.kind_rank(),) + desc.sort_key(),
                ))
            canon = canonical_key(ls_pos)
            rank = self.rank_of.setdefault(canon, len(self.rank_of))
            info = _TypeInfo(True, canon, rank, mem.tree, tuple(exts))
        self.by_pattern[pat] = info
        return info


# --------------------------------------------------------------------------
# Span surgery: a special-closed subset as a literal subgeometry of the stage
# --------------------------------------------------------------------------

def span_surgery(stage: TreeOfDSets, subset: frozenset) -> TreeOfDSets:
    """Realizing tree of a special-closed subset, with stage node identities.

    Vertices follow the stage's witnessing skeleton; every label is the
    suppressed span of the covering leaves, so its nodes are literal stage
    nodes and extension placements transport back verbatim.
    """
    leaf_of = stage.leaf_of_element()
    counter = itertools.count()
    labels, parent, fmap, gmap = {}, {}, {}, {}

    def span_label(sv, leaves):
        lab = stage.label_map[sv]
        nodes = set(leaves)
        if len(leaves) >= 3:
            for trip in itertools.combinations(sorted(leaves), 3):
                nodes.add(lab.median(*trip))
        edges = set()
        ordered = sorted(nodes)
        for a, b in itertools.combinations(ordered, 2):
            path = lab.path(a, b)
            if not any(n in nodes for n in path[1:-1]):
                edges.add((a, b))
        special = {}
        for r in sorted(nodes - set(leaves)):
            nbst = lab.special_map[r]
            occupants = [x for x in sorted(leaves)
                         if x != r and lab.branch_of(r, x) == nbst]
            if not occupants:
                raise InconsistencyError(
                    f"subset is not special-closed at {r} in {sv}")
            path = lab.path(r, occupants[0])
            nxt = next(n for n in path[1:] if n in nodes)
            special[r] = nxt
        return dset_graph(nodes, edges, special), sorted(nodes - set(leaves))

    def visit(sv, leaves):
        vid = f"h{next(counter)}"
        lab_stage = stage.label_map[sv]
        span, rams = span_label(sv, leaves)
        labels[vid] = span
        fmap[vid] = {}
        inv_f = {r: s for s, r in stage.f_map[sv].items()}
        for r in rams:
            omega = inv_f[r]
            gsl = stage.g_map[(sv, omega)]
            child_leaves = []
            for lf in sorted(stage.label_map[omega].leaves()):
                branch = lab_stage.branch_leaves(r, gsl[lf])
                if any(x in branch for x in leaves):
                    child_leaves.append(lf)
            child_vid = visit(omega, child_leaves)
            parent[child_vid] = vid
            fmap[vid][child_vid] = r
            bridge = {}
            span_nodes = set(labels[vid].nodes)
            for lf in child_leaves:
                branch = lab_stage.branch_leaves(r, gsl[lf])
                tgt = min(x for x in leaves if x in branch)
                path = lab_stage.path(r, tgt)
                bridge[lf] = next(n for n in path[1:] if n in span_nodes)
            gmap[(vid, child_vid)] = bridge
        return vid

    root_leaves = sorted(leaf_of[x] for x in subset)
    rootv = visit(stage.tree.root, root_leaves)
    em = stage.element_map
    element = {leaf: em[leaf] for leaf in root_leaves}
    st = structure_tree(set(labels), rootv, parent)
    return tree_of_dsets(st, labels, fmap, gmap, element)


def transport_descriptor(stage: TreeOfDSets, desc: ExtensionDescriptor,
                         sv: Optional[str] = None) -> ExtensionDescriptor:
    """Refine a span-level placement to a stage-level placement.

    Span labels use stage node ids, so ramification points carry over
    directly; a span edge maps to the first stage edge on its path.
    """
    sv = sv or stage.tree.root
    if desc.kind == "I":
        return desc
    lab = stage.label_map[sv]
    if desc.kind == "IIb":
        u, v = desc.edge
        path = lab.path(u, v)
        a, b = path[0], path[1]
        side = desc.special_side
        if side is not None:
            side = a if side == u else b
        return replace(desc, edge=(a, b), special_side=side)
    omega = {r: s for s, r in stage.f_map[sv].items()}[desc.ram]
    return replace(desc, inner=transport_descriptor(stage, desc.inner, omega))


# --------------------------------------------------------------------------
# Chain construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainConfig:
    seed: TreeOfDSets
    rounds: int
    max_size: int
    task_bound: int
    rng_seed: int = 0


@dataclass(frozen=True)
class ChainStage:
    structure: TreeOfDSets
    stage_index: int
    provenance: tuple
    embedding_from_previous: Optional[Embedding]
    deferred: tuple  # ((size, kind), count) pairs


def build_chain(cfg: ChainConfig) -> list:
    """Grow a chain of stages by amalgamating in missing one-point extensions."""
    rep = validate(cfg.seed)
    if not rep.ok:
        raise ArgumentError("build_chain: invalid seed: " + rep.violations[0])
    if not _member_cached(realize(cfg.seed)[0]).member:
        raise ArgumentError("build_chain: seed is not realizable")
    if cfg.max_size < len(cfg.seed.domain) or cfg.rounds < 0:
        raise ArgumentError("build_chain: inconsistent configuration")

    stages = [ChainStage(cfg.seed, 0, (), None, ())]
    stage = cfg.seed
    index = StageIndex(stage)
    memo = _TypeMemo()
    rng = random.Random(cfg.rng_seed)
    fresh_counter = itertools.count()

    for round_no in range(1, cfg.rounds + 1):
        prev_stage = stage
        prev_elements = list(index.elements)
        last = stages[-1]
        if (len(stage.domain) >= cfg.max_size and last.stage_index > 0
                and not last.provenance):
            # at capacity and the task list cannot have changed: same stage,
            # same tasks, same deferrals
            ident = embedding({x: x for x in stage.domain}, verified=True)
            stages.append(ChainStage(stage, round_no, (), ident, last.deferred))
            continue
        tasks = []
        for size in range(1, cfg.task_bound + 1):
            for subset in itertools.combinations(sorted(stage.domain), size):
                info = memo.lookup(index, subset)
                if not info.member:
                    continue
                for ext in info.exts:
                    tasks.append((size, ext.sort_key, info.canon_rank, subset, ext, info))
        rng.shuffle(tasks)
        tasks.sort(key=lambda t: (t[0], t[1], t[2], t[3]))

        provenance = []
        deferred = {}
        for size, _, _, subset, ext, info in tasks:
            if index.realized_mask(subset, ext.bits):
                continue
            if len(stage.domain) >= cfg.max_size:
                key = (size, ext.kind)
                deferred[key] = deferred.get(key, 0) + 1
                continue
            new_name = f"g{next(fresh_counter)}"
            while new_name in stage.domain:
                new_name = f"g{next(fresh_counter)}"
            stage = _realize_task(stage, subset, info, ext, new_name)
            index.grow(stage, new_name)
            provenance.append((subset, ext.kind, new_name))

        emb = _verify_stage_step(prev_stage, stage, prev_elements)
        stages.append(ChainStage(stage, round_no, tuple(provenance), emb,
                                 tuple(sorted(deferred.items()))))
    return stages


def _realize_task(stage: TreeOfDSets, subset: tuple, info: _TypeInfo,
                  ext: _ExtInfo, new_name: str) -> TreeOfDSets:
    """Amalgamate one extension task into the stage via a special-closed anchor."""
    names = _position_names(len(subset))
    a_tree = rename_elements(info.rep_tree, dict(zip(names, subset)))
    desc = replace(ext.descriptor, new_element=new_name)
    e2 = apply_extension(a_tree, desc)

    anchor = special_closure(stage, subset)
    f_tree = span_surgery(stage, anchor)
    want = RelationView(stage).induced(anchor)
    got, _ = realize(f_tree)
    if got != want:
        raise InconsistencyError("span surgery does not realize the anchor subset")

    g_tree, _, _ = amalgamate(a_tree, f_tree, e2)
    d_anchor = classify(f_tree, g_tree)
    d_stage = transport_descriptor(stage, d_anchor)
    new_stage = apply_extension(stage, replace(d_stage, new_element=new_name))

    target, _ = realize(e2)
    check = RelationView(new_stage).induced(set(subset) | {new_name})
    if check != target:
        raise InconsistencyError(
            f"transported placement does not realize the task over {subset}")
    return new_stage


def _verify_stage_step(prev: TreeOfDSets, cur: TreeOfDSets,
                       prev_elements: list) -> Embedding:
    """Full six-relation check that cur induces prev on the old elements."""
    if prev is cur:
        return embedding({x: x for x in prev_elements}, verified=True)
    rv_prev = RelationView(prev)
    rv_cur = RelationView(cur)
    groups_prev, groups_cur = {}, {}
    for trip in itertools.combinations(sorted(prev_elements), 3):
        ap, wp = rv_prev.apex(*trip)
        ac, wc = rv_cur.apex(*trip)
        if ap != ac:
            raise InconsistencyError(f"stage step changed the apex of {trip}")
        groups_prev.setdefault(wp, set()).add(("L", trip))
        groups_cur.setdefault(wc, set()).add(("L", trip))
    for quad in itertools.combinations(sorted(prev_elements), 4):
        hp = rv_prev.s_instance(*quad)
        hc = rv_cur.s_instance(*quad)
        if (hp is None) != (hc is None) or (hp and hp[0] != hc[0]):
            raise InconsistencyError(f"stage step changed the pairing of {quad}")
        if hp:
            groups_prev.setdefault(hp[1], set()).add(("S", quad))
            groups_cur.setdefault(hc[1], set()).add(("S", quad))
    part_prev = {frozenset(g) for g in groups_prev.values()}
    part_cur = {frozenset(g) for g in groups_cur.values()}
    if part_prev != part_cur:
        raise InconsistencyError("stage step rearranged witness classes")
    dom_prev = frozenset(prev_elements)
    omit_cur = {}
    for w, keys in groups_cur.items():
        omit_cur[frozenset(keys)] = omitted(cur, w) & dom_prev
    for w, keys in groups_prev.items():
        if omitted(prev, w) & dom_prev != omit_cur[frozenset(keys)]:
            raise InconsistencyError("stage step changed an omission set")
    return embedding({x: x for x in prev_elements}, verified=True)


# --------------------------------------------------------------------------
# Richness audit
# --------------------------------------------------------------------------

def richness_audit(stage, k: int) -> dict:
    """Which small types embed, and which of their extensions are realized.

    Coverage is tracked per (type key, extension index, extension kind): a
    pair counts as covered once the extension is realized over at least one
    embedded copy (this indicator is monotone along a chain, unlike the
    per-copy fraction, whose denominator grows with the stage).  Per-copy
    counts are reported alongside.
    """
    t = stage.structure if isinstance(stage, ChainStage) else stage
    index = StageIndex(t)
    memo = _TypeMemo()
    embedded = {size: {} for size in range(1, k + 1)}
    coverage = {}
    for size in range(1, k + 1):
        for subset in itertools.combinations(sorted(t.domain), size):
            info = memo.lookup(index, subset)
            if not info.member:
                continue
            embedded[size][info.canon] = embedded[size].get(info.canon, 0) + 1
            for ext in info.exts:
                key = (info.canon, ext.index, ext.kind)
                got, tot = coverage.get(key, (0, 0))
                hit = 1 if index.realized_mask(subset, ext.bits) else 0
                coverage[key] = (got + hit, tot + 1)
    fractions = {key: (got / tot if tot else 0.0)
                 for key, (got, tot) in coverage.items()}
    covered = {key: got > 0 for key, (got, tot) in coverage.items()}
    return {
        "embedded_type_counts": {s: len(embedded[s]) for s in embedded},
        "embedded_copies": embedded,
        "coverage": coverage,
        "coverage_fractions": fractions,
        "covered": covered,
        "full_coverage": all(covered.values()),
    }


# --------------------------------------------------------------------------
# Orbit signatures
# --------------------------------------------------------------------------

_orbit_cache = {}


def orbit_signature(stage, k: int) -> int:
    """Number of isomorphism types of (hull, marked k-subset) pairs.

    Upper-bounds the orbit count on k-sets; the bound tightens and then
    stabilizes as richness grows.
    """
    t = stage.structure if isinstance(stage, ChainStage) else stage
    if not 1 <= k <= len(t.domain):
        raise ArgumentError("orbit size out of range")
    cache_key = (t, k)
    if cache_key in _orbit_cache:
        return _orbit_cache[cache_key]
    rv = RelationView(t)
    buckets = {}
    for subset in itertools.combinations(sorted(t.domain), k):
        closure = hull(t, subset)
        data = _marked_data(rv, closure, frozenset(subset))
        fp = _marked_fingerprint(data)
        bucket = buckets.setdefault(fp, [])
        for repdata in bucket:
            if _marked_iso(repdata, data):
                break
        else:
            bucket.append(data)
    count = sum(len(b) for b in buckets.values())
    _orbit_cache[cache_key] = count
    return count


def _marked_data(rv: RelationView, closure: frozenset, marked: frozenset):
    elems = tuple(sorted(closure))
    lset = set()
    for trip in itertools.combinations(elems, 3):
        apex, _ = rv.apex(*trip)
        rest = tuple(x for x in trip if x != apex)
        lset.add((apex,) + rest)
    sset = set()
    for quad in itertools.combinations(elems, 4):
        hit = rv.s_instance(*quad)
        if hit is not None:
            sset.add(hit[0])
    return (elems, marked, frozenset(lset), frozenset(sset))


def _marked_fingerprint(data):
    elems, marked, lset, sset = data
    inv = {}
    for x in elems:
        apexes = sum(1 for t in lset if t[0] == x)
        sides = sum(1 for t in lset if x in t[1:])
        sin = sum(1 for t in sset if x in t)
        inv[x] = (x in marked, apexes, sides, sin)
    return (len(elems), len(marked), len(lset), len(sset),
            tuple(sorted(inv.values())))


def _marked_iso(a, b) -> bool:
    elems_a, marked_a, l_a, s_a = a
    elems_b, marked_b, l_b, s_b = b

    def inv(data, x):
        elems, marked, lset, sset = data
        return (x in marked, sum(1 for t in lset if t[0] == x),
                sum(1 for t in lset if x in t[1:]),
                sum(1 for t in sset if x in t))

    inva = {x: inv(a, x) for x in elems_a}
    invb = {x: inv(b, x) for x in elems_b}
    order = sorted(elems_a, key=lambda x: (inva[x], x))

    def extend(i, mapping, used):
        if i == len(order):
            ml = {tuple(mapping[e] for e in t) for t in l_a}
            ml = {(t[0],) + tuple(sorted(t[1:])) for t in ml}
            if ml != {(t[0],) + tuple(sorted(t[1:])) for t in l_b}:
                return False
            ms = {canon_s(*(mapping[e] for e in t)) for t in s_a}
            return ms == s_b
        x = order[i]
        for y in elems_b:
            if y in used or invb[y] != inva[x]:
                continue
            mapping[x] = y
            used.add(y)
            if extend(i + 1, mapping, used):
                return True
            del mapping[x]
            used.discard(y)
        return False

    return extend(0, {}, set())
