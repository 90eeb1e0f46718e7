import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsm.density import density_order
from dpsm.graph import WeightedGraph
from dpsm.merge import (NOISE, MergeEngine, MergeError, assign_remainder, clucut, clucut_key,
                        clucut_value, executed_prefix, half_drop_halts, r_inter, r_intra,
                        run_merging, scratch_stats, write_labels, write_trace)
from dpsm.partition import PartitionState, partition, verify_properties
from conftest import A, B, C, D, E, PATH_F, check_merge_run, path_graph, random_graph, random_rank


# -- reference quantities ----------------------------------------------------

def test_r_intra_examples():
    tri = WeightedGraph.from_edges([0, 0, 1], [1, 2, 2], [0.5, 0.5, 0.25], 3)
    assert r_intra({0}, tri) == 0.0
    assert r_intra({0, 1}, WeightedGraph.from_edges([0], [1], [0.8], 2)) == pytest.approx(0.8)
    assert r_intra({0, 1, 2}, tri) == pytest.approx(1.25)


def test_r_inter_path(path):
    g, dr = path
    assert r_inter(partition(g, dr), A, D, g) == 1.0


def test_r_inter_disjoint_margins():
    g = WeightedGraph.from_edges([0, 2], [1, 3], [1.0, 1.0], 4)
    st_ = PartitionState(4, {0: frozenset({0}), 2: frozenset({2})},
                         {0: frozenset({1}), 2: frozenset({3})})
    assert r_inter(st_, 0, 2, g) == 0.0


def test_r_inter_takes_weaker_side():
    g = WeightedGraph.from_edges([0, 0, 1, 2], [1, 2, 2, 3], [1.0, 0.2, 0.3, 0.1], 4)
    st_ = PartitionState(4, {0: frozenset({0, 1}), 3: frozenset({3})},
                         {0: frozenset({2}), 3: frozenset({2})})
    assert r_inter(st_, 0, 3, g) == pytest.approx(0.1)


def test_clucut_path(path):
    g, dr = path
    st_ = partition(g, dr)
    assert clucut(st_, A, D, g) == 2.0
    assert clucut(st_, D, A, g) == 2.0


def test_clucut_symmetric_example():
    g = path_graph((2.0, 0.5, 0.5, 2.0))
    st_ = partition(g, density_order(PATH_F))
    assert clucut(st_, A, D, g) == pytest.approx(0.5)


def test_zero_intra_is_infinite():
    assert clucut_value(0.3, 0.0, 1.0) == math.inf
    assert clucut_key(0.3, 0.0, 1.0) == (1, 0.3)
    assert clucut_key(0.3, 0.0, 0.0) == (2, 0.0)
    assert clucut_value(0.0, 0.0, 0.0) == 0.0


# -- merge primitive ---------------------------------------------------------

def test_merge_path_example(path):
    g, dr = path
    eng = MergeEngine(g, partition(g, dr))
    assert eng.merge(A, D) == A
    assert eng.clusters() == {A: frozenset({A, B, D, E})}
    assert eng.margins() == {A: frozenset({C})}
    assert eng.intra[A] == 2.0
    assert r_intra(eng.clusters()[A], g) == 2.0


def test_merge_with_absorb_takes_the_valley(path):
    g, dr = path
    eng = MergeEngine(g, partition(g, dr), rank=dr, absorb=True)
    eng.merge(A, D)
    assert eng.clusters() == {A: frozenset(range(5))}
    assert eng.intra[A] == 4.0
    assert eng.margins() == {A: frozenset()}


def test_merge_contract_errors(path):
    g, dr = path
    eng = MergeEngine(g, partition(g, dr))
    with pytest.raises(MergeError):
        eng.merge(A, B)  # B is not a root
    with pytest.raises(MergeError):
        eng.merge(A, A)
    eng.merge(A, D)
    with pytest.raises(MergeError):
        eng.merge(A, D)  # D is dead
    # two live clusters without a shared margin node
    g2 = WeightedGraph.from_edges([0, 2], [1, 3], [1.0, 1.0], 4)
    eng2 = MergeEngine(g2, partition(g2, density_order([2, 1, 2, 1])))
    with pytest.raises(MergeError, match="overlap"):
        eng2.merge(0, 2)


def test_absorb_needs_rank(path):
    g, dr = path
    with pytest.raises(ValueError):
        MergeEngine(g, partition(g, dr), absorb=True)


# -- driver ------------------------------------------------------------------

def test_target_one_on_path(path):
    g, dr = path
    final, trace = run_merging(partition(g, dr), g, target_k=1)
    assert trace.clucuts == [2.0]
    assert len(final.clusters) == 1
    assert trace.stop_reason == "target reached"


def test_two_components_cannot_reach_target():
    # two copies of the path example
    g = WeightedGraph.from_edges([0, 1, 2, 3, 5, 6, 7, 8], [1, 2, 3, 4, 6, 7, 8, 9], [1.0] * 8, 10)
    dr = density_order(np.concatenate([PATH_F, PATH_F]))
    final, trace = run_merging(partition(g, dr), g, target_k=1)
    assert len(final.clusters) == 2
    assert trace.stop_reason == "no adjacent pairs"
    assert any("cannot merge across components" in n for n in trace.notes)


def test_half_drop_rule():
    assert executed_prefix((2.0, 1.8, 0.3)) == 2
    assert executed_prefix((2.0, 1.0, 0.5)) == 3  # exactly half does not halt
    assert executed_prefix((1.0, math.inf, 0.6, 0.2)) == 3
    assert executed_prefix(()) == 0
    assert not half_drop_halts(0.1, None)
    assert half_drop_halts(0.3, 1.0, drop_ratio=0.5)
    assert not half_drop_halts(0.3, 1.0, drop_ratio=0.25)


def test_bad_driver_arguments(path):
    g, dr = path
    st_ = partition(g, dr)
    with pytest.raises(ValueError):
        run_merging(st_, g, target_k=0)
    with pytest.raises(ValueError):
        run_merging(st_, g, drop_ratio=0.0)
    with pytest.raises(ValueError):
        run_merging(st_, g, cluster_range=(3, 2))
    with pytest.raises(ValueError):
        run_merging(st_, g, target_k=2, cluster_range=(1, 2))


def _two_cliques_and_singleton(size=10):
    us, vs = [], []
    for base in (0, size):
        for i in range(size):
            for j in range(i + 1, size):
                us.append(base + i)
                vs.append(base + j)
    g = WeightedGraph.from_edges(us, vs, [1.0] * len(us), 2 * size + 1)
    f = np.concatenate([np.arange(size, 0, -1), np.arange(size, 0, -1), [1.0]]).astype(float)
    return g, density_order(f)


def test_pruning_removes_small_weak_cluster():
    g, dr = _two_cliques_and_singleton()
    st_ = partition(g, dr)
    assert len(st_.clusters) == 3
    final, trace = run_merging(st_, g, prune_fraction=0.2, rank=dr)
    assert trace.pruned_roots == [20] and trace.pruned_nodes == [20]
    assert sorted(final.clusters) == [0, 10]
    labels = assign_remainder(final, g, dr, "nearest", noise=trace.pruned_nodes)
    assert labels[20] == NOISE
    # below the threshold nothing is pruned
    _, trace = run_merging(st_, g, prune_fraction=0.05, rank=dr)
    assert trace.pruned_roots == []


def test_cluster_range_floor(path):
    g, dr = path
    final, trace = run_merging(partition(g, dr), g, cluster_range=(1, 1), rank=dr)
    assert len(final.clusters) == 1 and trace.stop_reason == "range floor reached"


# -- remainder ---------------------------------------------------------------

def test_remainder_nearest_after_merge(path):
    g, dr = path
    final, _ = run_merging(partition(g, dr), g, target_k=1, absorb=False)
    assert final.unassigned == frozenset({C})
    assert assign_remainder(final, g, dr, "nearest").tolist() == [0] * 5


def test_remainder_drop(path):
    g, dr = path
    final, _ = run_merging(partition(g, dr), g, target_k=1, absorb=False)
    assert assign_remainder(final, g, dr, "drop").tolist() == [0, 0, NOISE, 0, 0]


def test_remainder_ties_to_smaller_root(path):
    g, dr = path
    labels = assign_remainder(partition(g, dr), g, dr, "nearest")
    assert labels.tolist() == [0, 0, 0, 1, 1]


def test_isolated_node_is_its_own_cluster():
    g = WeightedGraph.from_edges([0], [1], [1.0], 3)
    dr = density_order([2.0, 1.0, 1.0])
    st_ = partition(g, dr)
    for policy in ("nearest", "drop"):
        assert assign_remainder(st_, g, dr, policy).tolist() == [0, 0, 1]


def test_remainder_gray_chain_is_labeled_in_density_order():
    # 0 > 2 > 3 > 1 > 4 on path 0-1-2-3 plus 1-4; node 4 hangs off a margin node
    g = WeightedGraph.from_edges([0, 1, 2, 1], [1, 2, 3, 4], [1.0, 2.0, 1.0, 1.0], 5)
    dr = density_order([5.0, 2.0, 4.0, 3.0, 1.0])
    labels = assign_remainder(partition(g, dr), g, dr, "nearest")
    assert labels.tolist() == [0, 1, 1, 1, 1]


def test_unknown_policy(path):
    g, dr = path
    with pytest.raises(ValueError):
        assign_remainder(partition(g, dr), g, dr, "bogus")


def test_writers(path):
    g, dr = path
    _, trace = run_merging(partition(g, dr), g, target_k=1)
    buf = io.StringIO()
    write_trace(buf, trace)
    assert buf.getvalue() == "step,root_a,root_b,clucut,clusters_after\n1,0,3,2.0,1\n"
    buf = io.StringIO()
    write_labels(buf, [1, -1])
    assert buf.getvalue() == "node_id,label\n0,1\n1,-1\n"


# -- randomized consistency --------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.floats(0.03, 0.3), st.booleans())
def test_argmax_and_incremental_state(seed, n, p, absorb):
    rng = np.random.default_rng(seed)
    check_merge_run(random_graph(rng, n, p), random_rank(rng, n), absorb)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 80))
def test_absorb_reaches_one_cluster_per_component(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.08)
    dr = random_rank(rng, n)
    final, _ = run_merging(partition(g, dr), g, target_k=1, rank=dr, absorb=True)
    comp = g.components()
    assert len(final.clusters) == len(set(comp.tolist()))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 80))
def test_auto_mode_respects_drop_rule(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.1)
    dr = random_rank(rng, n)
    _, trace = run_merging(partition(g, dr), g, rank=dr, prune_fraction=0.0)
    assert executed_prefix(trace.clucuts) == len(trace.records)
    if trace.stop_reason == "clucut drop":
        finite = [c for c in trace.clucuts if math.isfinite(c)]
        assert trace.halt_candidate.clucut < 0.5 * finite[-1]


def test_deterministic(path):
    rng = np.random.default_rng(2)
    g = random_graph(rng, 80, 0.06)
    dr = random_rank(rng, 80)
    runs = [run_merging(partition(g, dr), g, rank=dr) for _ in range(2)]
    assert runs[0][1].records == runs[1][1].records
    assert runs[0][0] == runs[1][0]
