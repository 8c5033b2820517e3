import itertools

import pytest

from dsettrees.dstructures import leaf_d
from dsettrees.errors import ArgumentError
from dsettrees.relations import (RelationView, check_d_axioms, derive_from_ls,
                                 leaf_d_relation, lstructure, realize, root_d)
from dsettrees.reconstruct import is_member_of_D


FIX5_L = {("p", "w", "y"), ("p", "y", "z"), ("x", "p", "w"), ("x", "p", "y"),
          ("x", "p", "z"), ("x", "w", "y"), ("x", "y", "z"), ("z", "p", "w"),
          ("z", "w", "x"), ("z", "w", "y")}
FIX5_S = {("p", "x", "w", "z"), ("p", "y", "w", "z"), ("w", "z", "x", "y")}


def test_realize_fix1(fix1):
    ls, wm = realize(fix1)
    assert ls.L == frozenset({("x", "y", "z")})
    assert not ls.S and not ls.Lp and not ls.Sp and not ls.Q
    assert ls.R == frozenset({("x", "y", "z", "x", "y", "z")})
    assert wm.l_map[("x", "y", "z")] == "u0"


def test_realize_fix2(fix2):
    ls, _ = realize(fix2)
    assert not (ls.L or ls.S or ls.Lp or ls.Sp or ls.Q or ls.R)


def test_realize_fix5(fix5):
    ls, wm = realize(fix5)
    assert ls.L == frozenset(FIX5_L)
    assert ls.S == frozenset(FIX5_S)
    assert ls.has_s("x", "y", "z", "w")
    assert ls.has_l("x", "y", "z") and ls.has_l("x", "y", "p")
    assert ls.has_l("p", "y", "z")
    assert ls.has_lp("p", "y", "z", "x")
    assert not ls.has_q("p", "y", "z", "w", "p", "y", "z")
    assert ls.Lp == frozenset({("p", "w", "y", "x"), ("p", "y", "z", "x")})
    assert not ls.Sp
    # witnesses: the apex-p triples live in the successor at r
    assert wm.l_map[("p", "y", "z")] == "u1"
    assert wm.l_map[("x", "y", "z")] == "u0"


def test_realize_rejects_invalid(fix1):
    from dsettrees.dstructures import TreeOfDSets
    broken = TreeOfDSets(tree=fix1.tree, label=fix1.label, f=fix1.f, g=fix1.g,
                         element=tuple(fix1.element[:-1]))
    with pytest.raises(ArgumentError):
        realize(broken)


def test_exactly_one_apex_on_corpus(corpus):
    for size, members in corpus.items():
        for t in members:
            ls, _ = realize(t)
            for trip in itertools.combinations(ls.domain, 3):
                apexes = [x for x in trip
                          if ls.has_l(x, *[a for a in trip if a != x])]
                assert len(apexes) == 1


def test_witness_uniqueness_is_enforced(corpus):
    # realize raises if a witness were duplicated; reaching here means unique
    for members in corpus.values():
        for t in members:
            realize(t)


def test_root_d_examples(fix1, fix5):
    ls5, _ = realize(fix5)
    d5 = root_d(ls5)
    assert ("x", "y", "z", "w") in d5
    ls1, _ = realize(fix1)
    d1 = root_d(ls1)
    assert all(x == y or z == w for (x, y, z, w) in d1)


def test_root_d_recovers_leaf_d_on_corpus(corpus):
    for members in corpus.values():
        for t in members:
            ls, _ = realize(t)
            naming = t.element_map
            assert root_d(ls) == leaf_d_relation(t.root_label(), naming)


def test_monotone_restriction_on_corpus(corpus):
    # D_E(a,b;c,d) implies D_A(a,b;c,d) whenever A induces a realizable structure
    for t in corpus[4] + corpus[5]:
        ls, _ = realize(t)
        d_e = root_d(ls)
        for k in range(3, len(ls.domain)):
            for subset in itertools.combinations(ls.domain, k):
                sub = ls.induced(subset)
                if not is_member_of_D(sub).member:
                    continue
                d_a = root_d(sub)
                for quad in itertools.product(subset, repeat=4):
                    if len(set(quad)) == 4 and quad in d_e:
                        assert quad in d_a


def test_root_d_stable_without_new_root_extensions(corpus):
    # when no one-point subextension is star-like, the root relation restricts
    from dsettrees.amalgam import classify
    for t in corpus[4] + corpus[5]:
        ls, _ = realize(t)
        d_e = root_d(ls)
        for k in range(3, len(ls.domain)):
            for subset in itertools.combinations(sorted(ls.domain), k):
                sub = ls.induced(subset)
                mem = is_member_of_D(sub)
                if not mem.member:
                    continue
                has_type_i = False
                for e in sorted(set(ls.domain) - set(subset)):
                    one = ls.induced(set(subset) | {e})
                    m1 = is_member_of_D(one)
                    if m1.member and classify(mem.tree, m1.tree).kind == "I":
                        has_type_i = True
                        break
                if has_type_i:
                    continue
                d_a = root_d(sub)
                restricted = frozenset(q for q in d_e if set(q) <= set(subset))
                assert restricted == d_a


def test_derive_from_ls_identity(fix1, fix2, fix5, corpus):
    for t in [fix1, fix2, fix5] + corpus[4] + corpus[5]:
        ls, _ = realize(t)
        assert derive_from_ls(ls.domain, ls.L, ls.S) == ls


def test_derive_lp_formula_both_sides(fix5):
    ls, _ = realize(fix5)
    lhs = ls.has_lp("p", "y", "z", "x")
    rhs = (ls.has_l("p", "y", "z") and ls.has_l("x", "y", "z")
           and ls.has_l("x", "p", "z") and ls.has_l("x", "p", "y")
           and not ls.has_s("p", "x", "y", "z"))
    assert lhs and rhs


def test_derive_rejects_bad_input():
    with pytest.raises(ArgumentError):
        derive_from_ls(["a", "b", "c"], L=[("a", "a", "b")], S=[])


def test_check_d_axioms_on_corpus_leaf_relations(corpus):
    for members in corpus.values():
        for t in members:
            for lab in t.label_map.values():
                naming = {}
                rel = leaf_d_relation(lab)
                rep = check_d_axioms(lab.leaves(), rel, "basic")
                assert rep.ok, rep.failures[:3]


def test_check_d_axioms_detects_d2_violation():
    rel = {("a", "b", "c", "d"), ("b", "a", "c", "d"), ("a", "b", "d", "c"),
           ("c", "d", "a", "b"), ("a", "c", "b", "d"), ("c", "a", "b", "d"),
           ("a", "c", "d", "b"), ("b", "d", "a", "c")}
    rep = check_d_axioms("abcd", rel, "basic")
    assert not rep.ok
    assert any(f[0] == "D2" for f in rep.failures)


def test_check_d_axioms_three_star_fails_proper(fix1):
    lab = fix1.root_label()
    rel = leaf_d_relation(lab)
    assert check_d_axioms(lab.leaves(), rel, "basic").ok
    rep = check_d_axioms(lab.leaves(), rel, "proper")
    assert not rep.ok
    assert any(f[0] == "D5" for f in rep.failures)


def test_relation_view_agrees_with_realize(fix5, corpus):
    for t in [fix5] + corpus[5][:6]:
        ls, _ = realize(t)
        rv = RelationView(t)
        assert rv.induced(ls.domain) == ls


def test_lstructure_symmetry_closure():
    ls = lstructure("abc", L=[("a", "c", "b")])
    assert ls.has_l("a", "b", "c") and ls.has_l("a", "c", "b")
    assert not ls.has_l("b", "a", "c")
