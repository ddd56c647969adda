"""Generator families: counts, labels, isometric injections, Heisenberg balls."""

from fractions import Fraction as F

import pytest

from testspaces.errors import CapExceededError, ValidationError
from testspaces.generators import (
    UNIT,
    Weighting,
    binary_tree,
    cycle,
    diamond,
    diamond_weighting,
    fork,
    heis_inv,
    heis_mul,
    heisenberg_ball,
    laakso,
    laakso_weighting,
    tree_product,
)
from testspaces.metric_core import _dijkstra, apsp, verify_metric

from _oracles import heisenberg_ball_by_words


def test_binary_tree_counts_and_diameter():
    g = binary_tree(3)
    assert g.size == 15
    sp = apsp(g)
    assert max(max(r) for r in sp.dist) == 6  # diameter 2n
    assert binary_tree(0).size == 1
    assert len(binary_tree(0).edges) == 0


def test_binary_tree_adjacency_matches_labels():
    g = binary_tree(3)
    labels = g.labels()
    adjacent = {(min(u, v), max(u, v)) for u, v, _ in g.edges}
    for i, a in enumerate(labels):
        for j in range(i + 1, len(labels)):
            b = labels[j]
            extends = (len(a) == len(b) + 1 and a[: len(b)] == b) or (
                len(b) == len(a) + 1 and b[: len(a)] == a
            )
            assert ((i, j) in adjacent) == extends


def test_fork_distances():
    sp = apsp(fork())
    a0, a1, a2, a2p = 0, 1, 2, 3
    assert sp.d(a0, a2) == 2
    assert sp.d(a2, a2p) == 2
    assert sp.d(a0, a1) == 1
    # isometric to {root, 0, 00, 01} inside T_2
    t2 = apsp(binary_tree(2))
    lab = {v: i for i, v in enumerate(t2.labels)}
    sub = [lab[""], lab["0"], lab["00"], lab["01"]]
    for i in range(4):
        for j in range(4):
            assert sp.d(i, j) == t2.d(sub[i], sub[j])


@pytest.mark.parametrize(
    "n,vertices,edges", [(0, 2, 1), (1, 4, 4), (2, 12, 16), (3, 44, 64), (4, 172, 256)]
)
def test_diamond_counts(n, vertices, edges):
    fam = diamond(n, diamond_weighting())
    assert fam.graph.size == vertices
    assert len(fam.graph.edges) == edges


@pytest.mark.parametrize("n,vertices,edges", [(0, 2, 1), (1, 6, 6), (2, 30, 36), (3, 174, 216)])
def test_laakso_counts(n, vertices, edges):
    fam = laakso(n, laakso_weighting())
    assert fam.graph.size == vertices
    assert len(fam.graph.edges) == edges


def test_weighted_source_sink_distances():
    for n in range(4):
        assert apsp(diamond(n, diamond_weighting()).graph).d(0, 1) == 1
        assert apsp(laakso(n, laakso_weighting()).graph).d(0, 1) == 1
    for n in range(1, 4):
        assert apsp(diamond(n, UNIT).graph).d(0, 1) == 2**n


@pytest.mark.parametrize("maker,weighting", [(diamond, diamond_weighting()), (laakso, laakso_weighting())])
def test_weighted_injections_are_isometric(maker, weighting):
    # old vertices keep their indices; their pairwise distances must be
    # preserved exactly at every level up to 4
    prev = None
    for n in range(5):
        fam = maker(n, weighting)
        if prev is not None:
            old = fam.vertex_counts[-2]
            adj = fam.graph.adjacency()
            for src in range(old):
                dist = _dijkstra(adj, src)
                for v in range(old):
                    assert dist[v] == prev.d(src, v)
        prev = apsp(fam.graph) if n <= 3 else None


def test_cycle_examples():
    sp = apsp(cycle(6))
    assert sp.d(0, 3) == 3
    assert max(max(r) for r in sp.dist) == 3
    sp4 = apsp(cycle(4))
    d1 = apsp(diamond(1, UNIT).graph)
    sorted4 = sorted(sorted(row) for row in sp4.dist)
    assert sorted4 == sorted(sorted(row) for row in d1.dist)
    with pytest.raises(ValidationError):
        cycle(2)


def test_tree_product():
    t1 = apsp(binary_tree(1))
    single = tree_product([1])
    assert single.size == t1.size
    assert all(
        single.d(i, j) == t1.d(i, j) for i in range(3) for j in range(3)
    )
    prod = tree_product([1, 1])
    root_root = prod.labels.index("(,)")
    leaf_leaf = prod.labels.index("(0,0)")
    assert prod.d(root_root, leaf_leaf) == 2
    assert verify_metric(prod).valid


def test_tree_product_cap():
    with pytest.raises(CapExceededError):
        tree_product([4, 4, 4])


@pytest.mark.parametrize("r,size", [(0, 1), (1, 5), (2, 17), (3, 53), (4, 135)])
def test_heisenberg_ball_sizes_match_word_oracle(r, size):
    ball = heisenberg_ball(r)
    oracle = heisenberg_ball_by_words(r)
    assert ball.size == size == len(oracle)
    # word distances from the identity agree with the enumeration oracle
    ident = ball.labels.index("0,0,0")
    for i, lab in enumerate(ball.labels):
        g = tuple(int(x) for x in lab.split(","))
        assert ball.d(ident, i) == oracle[g]


def test_heisenberg_left_invariance():
    ball = heisenberg_ball(2)
    elems = [tuple(int(x) for x in lab.split(",")) for lab in ball.labels]
    index = {g: i for i, g in enumerate(elems)}
    inside = set(elems)
    for g in elems:
        for u in elems:
            for v in elems:
                gu, gv = heis_mul(g, u), heis_mul(g, v)
                if gu in inside and gv in inside:
                    assert ball.d(index[gu], index[gv]) == ball.d(index[u], index[v])


def test_heisenberg_metric_axioms():
    assert verify_metric(heisenberg_ball(2)).valid


def test_weighting_validation():
    with pytest.raises(ValidationError):
        Weighting("bogus")
    assert Weighting("scaled", F(2)).edge_length(3) == F(1, 8)
    assert UNIT.edge_length(5) == 1


def test_caps():
    with pytest.raises(CapExceededError):
        diamond(3, UNIT, vertex_cap=20)
    with pytest.raises(CapExceededError):
        binary_tree(8, vertex_cap=100)
    with pytest.raises(CapExceededError):
        heisenberg_ball(9)
