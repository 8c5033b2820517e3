import itertools

import pytest

from dsettrees.amalgam import random_member, rename_elements
from dsettrees.dstructures import covered, leaf_d, leaf_partition
from dsettrees.errors import ArgumentError, DataError
from dsettrees.relations import check_d_axioms, lstructure, realize
from dsettrees.reconstruct import (canonical_key, direction_d, e_partition,
                                   is_member_of_D, iso, j_set, kstar_classes,
                                   reconstruct, tree_from_d, tree_iso)


def test_kstar_classes_examples(fix1, fix2, fix5):
    assert len(kstar_classes(realize(fix5)[0])) == 2
    assert len(kstar_classes(realize(fix1)[0])) == 1
    assert len(kstar_classes(realize(fix2)[0])) == 0


def test_kstar_rejects_broken_equivalence():
    # R missing the reflexive instance on a witnessed triple
    ls = lstructure("abc", L=[("a", "b", "c")], R=[])
    with pytest.raises(DataError):
        kstar_classes(ls)


def test_j_set_examples(fix1, fix5):
    ls5 = realize(fix5)[0]
    assert j_set(ls5, ("p", "y", "z")) == frozenset("pyzw")
    assert j_set(ls5, ("x", "y", "z")) == frozenset("xyzwp")
    assert j_set(realize(fix1)[0], ("x", "y", "z")) == frozenset("xyz")
    with pytest.raises(ArgumentError):
        j_set(ls5, ("y", "x", "z"))


def test_j_set_equals_witness_coverage(fix5, corpus):
    for t in corpus[5][:8] + [fix5]:
        ls, wm = realize(t)
        for trip, wit in wm.l_map.items():
            assert j_set(ls, trip) == covered(t, wit)


def test_e_partition_examples(fix1, fix5):
    ls5 = realize(fix5)[0]
    assert e_partition(ls5, ("p", "y", "z")) == (
        frozenset({"p"}), frozenset({"w", "z"}), frozenset({"y"}))
    assert e_partition(ls5, ("x", "y", "z")) == tuple(
        frozenset({c}) for c in "pwxyz")
    assert e_partition(realize(fix1)[0], ("x", "y", "z")) == tuple(
        frozenset({c}) for c in "xyz")


def test_direction_d_examples(fix5):
    ls5 = realize(fix5)[0]
    classes, rel = direction_d(ls5, ("x", "y", "z"))
    idx = {min(c): i for i, c in enumerate(classes)}
    assert (idx["x"], idx["y"], idx["z"], idx["w"]) in rel
    # degenerate equal-pair clause
    assert (idx["x"], idx["x"], idx["z"], idx["w"]) in rel
    assert check_d_axioms(range(len(classes)), rel, "basic").ok
    classes_p, rel_p = direction_d(ls5, ("p", "y", "z"))
    assert len(classes_p) == 3
    assert all(len({i, j}) == 1 or len({k, l}) == 1
               for (i, j, k, l) in rel_p)


def test_reconstruct_examples(fix1, fix5):
    rec5 = reconstruct(realize(fix5)[0])
    assert len(rec5.vertices) == 2
    assert len(rec5.parent) == 1  # a two-vertex chain
    rec1 = reconstruct(realize(fix1)[0])
    assert len(rec1.vertices) == 1 and not rec1.parent


def reconstruction_roundtrip(t):
    """The reconstructed poset matches the witnessing sub-poset exactly."""
    ls, wm = realize(t)
    rec = reconstruct(ls)
    wl = wm.l_map
    corr = {}
    for rep, cls in rec.classes:
        wits = {wl[trip] for trip in cls}
        assert len(wits) == 1
        corr[rep] = wits.pop()
    witnessing = set(wl.values())
    assert set(corr.values()) == witnessing
    assert len(set(corr.values())) == len(corr)
    pm = rec.parent_map
    for a in rec.vertices:
        for b in rec.vertices:
            x, rec_le = b, (a == b)
            while x in pm:
                x = pm[x]
                if x == a:
                    rec_le = True
                    break
            assert rec_le == t.tree.leq(corr[a], corr[b])
    for rep in rec.vertices:
        v = corr[rep]
        part = leaf_partition(t, v)
        assert rec.jset_map[rep] == covered(t, v)
        want = tuple(sorted((frozenset(s) for s in part.values()), key=min))
        assert tuple(sorted(rec.epartition_map[rep], key=min)) == want
        lab = t.label_map[v]
        ep = rec.epartition_map[rep]
        leaf_for = {}
        for i, c in enumerate(ep):
            hits = [leaf for leaf, els in part.items() if els == c]
            assert len(hits) == 1
            leaf_for[i] = hits[0]
        rel = rec.ddir_map[rep]
        n = len(ep)
        for quad in itertools.product(range(n), repeat=4):
            assert ((quad in rel)
                    == leaf_d(lab, *(leaf_for[i] for i in quad)))
        assert check_d_axioms(range(n), rel, "basic").ok


def test_reconstruction_roundtrip_corpus(corpus):
    for members in corpus.values():
        for t in members:
            reconstruction_roundtrip(t)


def test_e_refinement_along_edges(corpus):
    for t in corpus[5]:
        rec = reconstruct(realize(t)[0])
        ep = rec.epartition_map
        for child, par in rec.parent_map.items():
            jc = rec.jset_map[child]
            for cls in ep[par]:
                sub = cls & jc
                if sub:
                    assert any(sub <= big for big in ep[child])


def test_directions_fill_single_branches(corpus):
    # each direction of the upper vertex is exactly one branch at the cone point
    for t in corpus[5]:
        rec = reconstruct(realize(t)[0])
        for (par, child), r in rec.cone_map.items():
            g = rec.dtree_map[par]
            idx = {}
            for i, c in enumerate(rec.epartition_map[par]):
                for e in c:
                    idx[e] = i
            for cls in rec.epartition_map[child]:
                leaves = {f"d{idx[e]}" for e in cls}
                nbs = {g.branch_of(r, leaf) for leaf in leaves}
                assert len(nbs) == 1
                assert g.branch_leaves(r, nbs.pop()) == leaves


def test_is_member_examples(fix1, fix2, fix5):
    ls5 = realize(fix5)[0]
    assert is_member_of_D(ls5).member
    sub = ls5.induced({"y", "z", "w", "p"})
    res = is_member_of_D(sub)
    assert not res.member and res.refutation
    assert is_member_of_D(realize(fix2)[0]).member
    assert is_member_of_D(realize(fix1)[0]).member


def test_is_member_returns_isomorphic_realization(fix5, corpus):
    for t in [fix5] + corpus[4] + corpus[5][:6]:
        m = is_member_of_D(realize(t)[0])
        assert m.member
        assert tree_iso(m.tree, t) is not None


def test_is_member_rejects_double_apex():
    ls = lstructure("abc", L=[("a", "b", "c"), ("b", "a", "c")],
                    R=[("a", "b", "c", "a", "b", "c"),
                       ("b", "a", "c", "b", "a", "c")])
    assert not is_member_of_D(ls).member


def test_tree_from_d_roundtrip(corpus):
    for t in corpus[5][:8]:
        lab = t.root_label()
        rel = {q for q in itertools.product(lab.leaves(), repeat=4)
               if lab.leaf_d(*q)}
        g = tree_from_d(lab.leaves(), lambda *q: q in rel)
        for q in itertools.product(lab.leaves(), repeat=4):
            assert g.leaf_d(*q) == lab.leaf_d(*q)


def test_tree_from_d_rejects_non_treelike():
    rel = {("a", "b", "c", "d"), ("b", "a", "c", "d"), ("a", "b", "d", "c"),
           ("c", "d", "a", "b")}
    # missing all degenerate instances: not realizable
    with pytest.raises(DataError):
        tree_from_d("abcd", lambda *q: q in rel)


def test_iso_examples(fix1, fix2):
    renamed = rename_elements(fix1, {"x": "u", "y": "v", "z": "t"})
    assert tree_iso(fix1, renamed) is not None
    assert iso(realize(fix1)[0], realize(renamed)[0]) is not None
    assert tree_iso(fix1, fix2) is None
    assert iso(realize(fix1)[0], realize(fix2)[0]) is None


def test_iso_respects_fixed_map(fix1):
    renamed = rename_elements(fix1, {"x": "u", "y": "v", "z": "t"})
    assert tree_iso(fix1, renamed, fix={"x": "u", "y": "v", "z": "t"}) is not None
    assert tree_iso(fix1, renamed, fix={"x": "v", "y": "u", "z": "t"}) is None


def test_iso_structure_agreement(corpus):
    members = corpus[4] + corpus[5][:5]
    for a in members:
        for b in members:
            t_match = tree_iso(a, b) is not None
            l_match = iso(realize(a)[0], realize(b)[0]) is not None
            assert t_match == l_match


def test_random_members_roundtrip():
    for seed in range(8):
        t = random_member(6, 900 + seed)
        m = is_member_of_D(realize(t)[0])
        assert m.member
        assert tree_iso(m.tree, t) is not None
        reconstruction_roundtrip(t)


def test_canonical_key_invariance(fix5):
    renamed = rename_elements(fix5, dict(zip("xyzwp", "abcde")))
    assert canonical_key(realize(fix5)[0]) == canonical_key(realize(renamed)[0])
