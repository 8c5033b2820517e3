"""Shared fixtures: the small reference structures used throughout the suite.

fix1: three elements x, y, z; root label a star at r with x special; one
      successor labelled by a two-leaf edge.
fix2: two elements a, b; a single root vertex labelled by one edge.
fix5: the five-element structure with elements x, y, z, w, p, two root
      ramification points r (special branch x) and r' (special branch z),
      a successor at r witnessing the apex p over {y, z/w}, and two-leaf
      labels elsewhere.
"""

import pytest

from dsettrees.dstructures import dset_graph, structure_tree, tree_of_dsets


def build_fix1():
    root_lab = dset_graph({"r", "x", "y", "z"},
                          {("r", "x"), ("r", "y"), ("r", "z")},
                          {"r": "x"})
    edge_lab = dset_graph({"n0", "n1"}, {("n0", "n1")})
    st = structure_tree({"u0", "u1"}, "u0", {"u1": "u0"})
    return tree_of_dsets(
        st,
        {"u0": root_lab, "u1": edge_lab},
        {"u0": {"u1": "r"}, "u1": {}},
        {("u0", "u1"): {"n0": "y", "n1": "z"}},
        {"x": "x", "y": "y", "z": "z"},
    )


def build_fix2():
    st = structure_tree({"u0"}, "u0", {})
    return tree_of_dsets(st, {"u0": dset_graph({"a", "b"}, {("a", "b")})},
                         {"u0": {}}, {}, {"a": "a", "b": "b"})


def build_fix5():
    root_lab = dset_graph(
        {"x", "y", "p", "z", "w", "r", "rp"},
        {("x", "r"), ("y", "r"), ("p", "r"), ("r", "rp"), ("z", "rp"), ("w", "rp")},
        {"r": "x", "rp": "z"},
    )
    # successor at r: star on ybar, pbar, cbar with pbar special
    nu_lab = dset_graph({"r2", "yb", "pb", "cb"},
                        {("r2", "yb"), ("r2", "pb"), ("r2", "cb")},
                        {"r2": "pb"})
    nu1_lab = dset_graph({"k0", "k1"}, {("k0", "k1")})
    nup_lab = dset_graph({"m0", "m1"}, {("m0", "m1")})
    st = structure_tree({"u0", "u1", "u2", "u3"}, "u0",
                        {"u1": "u0", "u2": "u0", "u3": "u1"})
    return tree_of_dsets(
        st,
        {"u0": root_lab, "u1": nu_lab, "u2": nup_lab, "u3": nu1_lab},
        {"u0": {"u1": "r", "u2": "rp"}, "u1": {"u3": "r2"}, "u2": {}, "u3": {}},
        {
            ("u0", "u1"): {"yb": "y", "pb": "p", "cb": "rp"},
            ("u0", "u2"): {"m0": "r", "m1": "w"},
            ("u1", "u3"): {"k0": "yb", "k1": "cb"},
        },
        {"x": "x", "y": "y", "z": "z", "w": "w", "p": "p"},
    )


@pytest.fixture(scope="session")
def corpus():
    from dsettrees.cli import enumerate_corpus
    return enumerate_corpus(5)


@pytest.fixture
def fix1():
    return build_fix1()


@pytest.fixture
def fix2():
    return build_fix2()


@pytest.fixture
def fix5():
    return build_fix5()
