import itertools

import pytest

from dsettrees.dstructures import (branch_of, branches_at, covered, dset_graph,
                                   g_chain, height, induced_at, leaf_d,
                                   leaf_partition, ram, validate)
from dsettrees.errors import ArgumentError
from dsettrees.relations import realize

from _oracles import median_by_paths, paths_disjoint


def test_validate_fixtures_ok(fix1, fix2, fix5):
    for t in (fix1, fix2, fix5):
        rep = validate(t)
        assert rep.ok and not rep.violations


def test_validate_reports_missing_special(fix1):
    lab = fix1.root_label()
    broken = dset_graph(lab.nodes, lab.edges, {})
    labels = dict(fix1.label_map)
    labels["u0"] = broken
    from dsettrees.dstructures import tree_of_dsets
    t = tree_of_dsets(fix1.tree, labels, fix1.f_map, fix1.g_map, fix1.element_map)
    rep = validate(t)
    assert not rep.ok
    assert any("lacks special branch" in v for v in rep.violations)


def test_validate_flags_two_leaf_root_and_orphans(fix5):
    # deleting a g row breaks the bijection onto non-special branches
    from dsettrees.dstructures import TreeOfDSets
    rows = tuple(r for r in fix5.g if r[:2] != ("u0", "u1") or r[2] != "yb")
    broken = TreeOfDSets(tree=fix5.tree, label=fix5.label, f=fix5.f, g=rows,
                         element=fix5.element)
    rep = validate(broken)
    assert not rep.ok


def test_ram_examples(fix1, fix5):
    assert ram(fix1.root_label(), "x", "y", "z") == "r"
    root5 = fix5.root_label()
    assert ram(root5, "x", "y", "p") == "r"
    assert ram(root5, "y", "z", "w") == "rp"


def test_ram_matches_path_intersection_oracle(fix5, corpus):
    for t in corpus[4] + corpus[5] + [fix5]:
        lab = t.root_label()
        leaves = lab.leaves()
        for trip in itertools.combinations(leaves, 3):
            assert ram(lab, *trip) == median_by_paths(lab, *trip)


def test_ram_permutation_invariant(fix5):
    lab = fix5.root_label()
    for trip in itertools.combinations(lab.leaves(), 3):
        values = {ram(lab, *p) for p in itertools.permutations(trip)}
        assert len(values) == 1


def test_ram_rejects_bad_arguments(fix1):
    lab = fix1.root_label()
    with pytest.raises(ArgumentError):
        ram(lab, "x", "x", "y")
    with pytest.raises(ArgumentError):
        ram(lab, "x", "y", "r")


def test_branch_of_examples(fix5):
    root5 = fix5.root_label()
    assert branch_of(root5, "rp", "z") != branch_of(root5, "rp", "w")
    assert branch_of(root5, "r", "z") == branch_of(root5, "r", "w") == "rp"
    star = fix5.label_map["u1"]
    for leaf in star.leaves():
        assert branch_of(star, "r2", leaf) == leaf
    with pytest.raises(ArgumentError):
        branch_of(root5, "r", "r")
    assert set(branches_at(root5, "r")) == {"x", "y", "p", "rp"}


def test_leaf_d_examples(fix5):
    root5 = fix5.root_label()
    assert leaf_d(root5, "x", "y", "z", "w")
    assert not leaf_d(root5, "x", "z", "y", "w")
    assert leaf_d(root5, "x", "x", "z", "w")
    assert not leaf_d(root5, "x", "x", "x", "w")


def test_leaf_d_matches_disjoint_path_oracle(corpus):
    for t in corpus[4] + corpus[5]:
        lab = t.root_label()
        for quad in itertools.permutations(lab.leaves(), 4):
            assert lab.leaf_d(*quad) == paths_disjoint(lab, *quad)


def test_g_chain_examples(fix5):
    assert g_chain(fix5, "u1", "u1", "cb") == frozenset({"cb"})
    assert g_chain(fix5, "u1", "u0", "cb") == frozenset({"z", "w"})
    assert g_chain(fix5, "u3", "u0", "k0") == frozenset({"y"})
    with pytest.raises(ArgumentError):
        g_chain(fix5, "u2", "u1", "m0")  # incomparable vertices


def test_g_chain_images_disjoint(fix5, corpus):
    for t in corpus[5] + [fix5]:
        for v in sorted(t.tree.vertices):
            if v == t.tree.root:
                continue
            images = [g_chain(t, v, t.tree.root, leaf)
                      for leaf in t.label_map[v].leaves()]
            for a, b in itertools.combinations(images, 2):
                assert not (a & b)
            assert all(images)


def test_induced_at_examples(fix1, fix5):
    assert induced_at(fix1, "u0") == fix1 or validate(induced_at(fix1, "u0")).ok
    two = induced_at(fix1, "u1")
    ls, _ = realize(two)
    assert len(two.domain) == 2 and not ls.L
    sub = induced_at(fix5, "u1")
    ls5, _ = realize(sub)
    assert sorted(sub.domain) == ["cb", "pb", "yb"]
    assert ls5.has_l("pb", "yb", "cb")
    with pytest.raises(ArgumentError):
        induced_at(fix5, "nope")


def test_induced_at_decreases_height_and_size(corpus, fix5):
    for t in corpus[4] + corpus[5] + [fix5]:
        for v in sorted(t.tree.vertices):
            if v == t.tree.root:
                continue
            sub = induced_at(t, v)
            assert validate(sub).ok
            assert height(sub) < height(t)
            assert len(sub.domain) < len(t.domain)


def test_height_examples(fix1, fix2, fix5):
    assert height(fix2) == 1
    assert height(fix1) == 2
    assert height(fix5) == 3


def test_ramification_count_bound(corpus):
    for size, members in corpus.items():
        for t in members:
            for lab in t.label_map.values():
                n = len(lab.leaves())
                if n >= 3:
                    assert len(lab.rams()) <= n - 2


def test_leaf_partition_covers_domain(fix5):
    part = leaf_partition(fix5, "u0")
    assert frozenset().union(*part.values()) == fix5.domain
    assert covered(fix5, "u1") == frozenset({"y", "z", "w", "p"})
