import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from codedpath.demand import (
    Demand, dump_demands, generate_gravity, generate_uniform, load_demands, make_demands,
    parse_demands, partition,
)
from codedpath.topology import Node, NetworkGraph, from_edges
from oracles import triangle


def test_uniform_counts(cost239, nsfnet):
    assert len(generate_uniform(cost239)) == 55
    assert len(generate_uniform(nsfnet)) == 91
    assert len(generate_uniform(triangle())) == 3


def test_gravity_count_and_determinism(nsfnet):
    a = generate_gravity(nsfnet, 150, 7)
    assert len(a) == 150 and a == generate_gravity(nsfnet, 150, 7)
    assert [d.index for d in a] == list(range(150))


def _with_pops(graph, pops):
    return NetworkGraph(tuple(Node(n.id, n.name, p) for n, p in zip(graph.nodes, pops)), graph.spans)


def test_gravity_heavy_pair():
    base = from_edges([(k, (k + 1) % 6, 1) for k in range(6)])
    g = _with_pops(base, [1000, 1000, 1, 1, 1, 1])
    hits = []
    for seed in range(1000):
        ds = generate_gravity(g, 10, seed)
        hits.append(sum({d.source, d.destination} == {0, 1} for d in ds))
    # weight of the heavy pair is 1e6 out of about 1.008e6, so >= 8 of 10 almost always
    assert np.mean(np.array(hits) >= 8) > 0.99
    assert np.median(hits) == 10


def test_gravity_uniform_populations_chi_square():
    g = from_edges([(k, (k + 1) % 5, 1) for k in range(5)])
    ds = generate_gravity(g, 10_000, 3)
    counts = {}
    for d in ds:
        counts[(d.source, d.destination)] = counts.get((d.source, d.destination), 0) + 1
    obs = np.array(list(counts.values()))
    assert len(obs) == 10
    assert stats.chisquare(obs).pvalue > 0.001


def test_gravity_bad_count(nsfnet):
    with pytest.raises(ValueError):
        generate_gravity(nsfnet, 0, 1)


def test_partition_sizes():
    ds = make_demands([(0, k) for k in range(1, 56)])
    p = partition(ds, 20, 1)
    assert sorted(len(g) for g in p.groups) == [15, 20, 20]
    assert len(partition(ds[:10], 100, 1).groups) == 1
    assert partition(ds, 20, 1) == p


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 80), st.integers(1, 25), st.integers(0, 10**6))
def test_partition_is_exact_cover(n, size, seed):
    ds = make_demands([(0, 1)] * n)
    p = partition(ds, size, seed)
    seen = [d.index for g in p.groups for d in g]
    assert sorted(seen) == list(range(n))
    assert all(1 <= len(g) <= size for g in p.groups)


def test_demand_file_round_trip(tmp_path, cost239):
    ds = generate_uniform(cost239)
    f = tmp_path / "d.txt"
    f.write_text(dump_demands(ds))
    assert load_demands(f) == ds
    with pytest.raises(ValueError):
        parse_demands("demand 0 1\n")
    with pytest.raises(ValueError):
        Demand(0, 2, 2)
