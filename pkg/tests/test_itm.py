import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsys.itm import ItmMap
from oracles import (itm_reference, learning_progress_reference,
                     window_means_reference)


def two_node_map(w1=(0.0, 0.0), w2=(2.0, 0.0), resolution=6.0, window=2, lag=1):
    return ItmMap(np.array(w1, float), np.array(w2, float), resolution, window, lag)


def test_starts_with_two_connected_nodes():
    m = two_node_map()
    assert len(m) == 2
    assert m.nodes[0].neighbors == {1}
    assert m.nodes[1].neighbors == {0}
    m.check_consistent()


def test_adapt_exact_weight_hit_returns_node_without_creation():
    m = two_node_map()
    res = m.adapt(np.array([0.0, 0.0]))
    assert res.best == 0 and res.created is None and res.deleted == []
    assert len(m) == 2


def test_adapt_between_nodes_fails_thales_no_creation():
    # phi between n and n': (w_n-phi).(w_n'-phi) = (-1)(1) = -1 < 0
    m = two_node_map(resolution=0.0001)
    res = m.adapt(np.array([1.0, 0.0]))
    assert res.created is None
    assert len(m) == 2


def test_adapt_far_stimulus_creates_node_with_edge_to_best():
    # dot = (-10)(-8) = 80 > 0 and distance^2 = 64 > 6 for the nearer node (2,0)
    m = two_node_map()
    res = m.adapt(np.array([10.0, 0.0]))
    assert res.created == 2
    assert res.best == 2
    assert m.nodes[2].neighbors == {1}
    assert np.array_equal(m.nodes[2].w, [10.0, 0.0])
    m.check_consistent()


def test_adapt_edge_pruning_and_deletion():
    # Put a third node collinear beyond n' so it falls inside the Thales
    # sphere of (n, n') and loses its only edge.
    m = two_node_map(w1=(0.0, 0.0), w2=(4.0, 0.0), resolution=1e9)
    created = m.adapt(np.array([10.0, 0.0]))  # forced: dot>0 needs... check below
    # with resolution 1e9 no creation happens; build the geometry by hand instead
    assert created.created is None
    m.nodes[0].w = np.array([0.0, 0.0])
    m.nodes[1].w = np.array([1.0, 0.0])
    # add node 2 at (-1, 0) connected only to 0
    m.resolution = 0.5
    res = m.adapt(np.array([-1.0, 0.0]))
    assert res.created is not None
    v = res.created
    assert m.nodes[v].neighbors == {0}
    # now a stimulus matching n=0, n'=2 puts node 1 inside their Thales sphere?
    # (w_0 - w_2).(w_1 - w_2) = (1,0).(2,0) = 2 > 0 -> kept.  Use n=0, n'=1:
    # (w_0 - w_1).(w_v - w_1) = (-1,0).(-2,0) = 2 > 0 -> kept as well.
    # Force pruning: move v between 0 and 1 so matching 0 with n'=v prunes 1.
    m.nodes[v].w = np.array([0.4, 0.0])
    res2 = m.adapt(np.array([0.05, 0.0]))
    # n=0, n'=v: (w_0 - w_v).(w_1 - w_v) = (-0.4)(0.6) < 0 -> edge (1,0) removed,
    # node 1 still connected? neighbors of 1 were {0} only -> deleted.
    assert 1 in res2.deleted
    assert 1 not in m.nodes
    m.check_consistent()


def test_never_deletes_below_two_nodes():
    m = two_node_map(w1=(0.0, 0.0), w2=(1.0, 0.0), resolution=1e9)
    # make node 1's position violate the Thales test for a stimulus near 0
    # matching would need a third node; with only two nodes no pruning can
    # orphan anything because the (n, n') edge survives its own zero dot.
    for x in np.linspace(-3, 3, 50):
        m.adapt(np.array([x, 0.1]))
        assert len(m) >= 2
    m.check_consistent()


def test_record_error_window_means():
    m = two_node_map(window=2, lag=1)
    node = m.nodes[0]
    assert node.record_error(4.0) == 4.0
    assert node.record_error(2.0) == 3.0
    assert node.record_error(0.0) == 1.0
    assert list(node.error_window) == [2.0, 0.0]


def test_record_error_rejects_negative():
    m = two_node_map()
    with pytest.raises(ValueError):
        m.nodes[0].record_error(-1.0)


def test_learning_progress_hand_trace():
    # window=2, lag=1, errors [4,2,2,0] -> means [4,3,2,1], LP = 2 - 1 = 1
    m = two_node_map(window=2, lag=1)
    node = m.nodes[0]
    for e in (4.0, 2.0, 2.0, 0.0):
        node.record_error(e)
    assert list(node.mean_history) == [2.0, 1.0]
    assert node.learning_progress() == 1.0
    assert node.intrinsic_reward() == -1.0


def test_learning_progress_warm_up_boundary():
    m = two_node_map(window=2, lag=1)
    node = m.nodes[1]
    node.record_error(1.0)
    node.record_error(1.0)
    assert node.learning_progress() is None  # sigma + W - 1 events
    assert node.intrinsic_reward() == 0.0
    node.record_error(1.0)
    assert node.learning_progress() == 0.0  # constant stream


def test_lp_rising_error_gives_positive_intrinsic_reward():
    m = two_node_map(window=2, lag=1)
    node = m.nodes[0]
    for e in (0.0, 0.0, 1.0, 2.0):
        node.record_error(e)
    lp = node.learning_progress()
    assert lp is not None and lp < 0
    assert node.intrinsic_reward() == -lp > 0


@given(st.lists(st.floats(min_value=0, max_value=100), min_size=1, max_size=200),
       st.integers(1, 10), st.integers(1, 10))
@settings(max_examples=60, deadline=None)
def test_window_and_lp_match_brute_force(errors, window, lag):
    m = ItmMap(np.zeros(2), np.ones(2), 6.0, window, lag)
    node = m.nodes[0]
    means = []
    for e in errors:
        means.append(node.record_error(e))
    expect_means = window_means_reference(errors, window)
    assert np.allclose(means, expect_means, atol=1e-12, rtol=0)
    lp = node.learning_progress()
    expect_lp = learning_progress_reference(errors, window, lag)
    if expect_lp is None:
        assert lp is None
    else:
        assert lp == pytest.approx(expect_lp, abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_adaptation_matches_reference_on_random_streams(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 5))
    length = int(rng.integers(5, 120))
    scale = float(rng.uniform(0.5, 6.0))
    e_max = float(rng.uniform(0.1, 8.0))
    w1 = rng.uniform(-scale, scale, dim)
    w2 = rng.uniform(-scale, scale, dim)
    stream = rng.uniform(-scale, scale, (length, dim))

    m = ItmMap(w1, w2, e_max, 4, 2)
    events = []
    best_trace = []
    for t, phi in enumerate(stream):
        res = m.adapt(phi)
        best_trace.append(res.best)
        for d in res.deleted:
            events.append(("delete", t, d))
        if res.created is not None:
            events.append(("create", t, res.created))
        m.check_consistent()

    ref_w, ref_edges, ref_events, ref_best = itm_reference(stream, w1, w2, e_max)
    assert sorted(m.nodes) == sorted(ref_w)
    for i in m.nodes:
        assert np.array_equal(m.nodes[i].w, ref_w[i])
    assert m.edge_set() == ref_edges
    assert events == ref_events
    assert best_trace == ref_best


def test_map_size_bounded_by_stimulus_count():
    rng = np.random.default_rng(5)
    m = ItmMap(np.zeros(3), np.ones(3), 0.01, 4, 2)
    for k in range(100):
        m.adapt(rng.uniform(-5, 5, 3))
        assert len(m) <= k + 1 + 2


def test_snapshot_round_trip():
    rng = np.random.default_rng(6)
    m = ItmMap(np.zeros(2), np.ones(2), 2.0, 3, 2)
    for _ in range(40):
        res = m.adapt(rng.uniform(-4, 4, 2))
        m.nodes[res.best].record_error(float(rng.uniform(0, 5)))
    clone = ItmMap.load(m.dump())
    assert sorted(clone.nodes) == sorted(m.nodes)
    for i in m.nodes:
        assert np.array_equal(clone.nodes[i].w, m.nodes[i].w)
        assert list(clone.nodes[i].error_window) == list(m.nodes[i].error_window)
        assert list(clone.nodes[i].mean_history) == list(m.nodes[i].mean_history)
        assert clone.nodes[i].event_count == m.nodes[i].event_count
    assert clone.edge_set() == m.edge_set()
    assert clone.dump() == m.dump()


def test_snapshot_rejects_unknown_header():
    with pytest.raises(ValueError):
        ItmMap.load("bogus 1\n")
