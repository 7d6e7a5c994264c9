from collections import deque

import numpy as np
import pytest

from e2edelay.netmodel import (
    NO_HOP,
    Flow,
    LinkState,
    NetworkError,
    Path,
    Topology,
    UnroutableFlowError,
    build_routing,
    check_stability,
    link_arrival_rates,
    resolve_path,
)

# four-node example, 0-based ids for nodes 1..4
FOUR_NODE_EDGES = [(1, 2), (1, 3), (2, 4), (3, 4), (1, 4), (4, 1)]
# rows: current node, columns: destination (1-based labels)
FOUR_NODE_TABLE = [
    [None, 2, 3, 4],
    [4, None, 4, 4],
    [4, 4, None, 4],
    [1, 1, 1, None],
]


def four_node():
    cap = {(u - 1, v - 1): 1.0 for u, v in FOUR_NODE_EDGES}
    return Topology(4, cap, ("1", "2", "3", "4"))


def random_topology(n, extra, seed, capacity=1.0):
    rng = np.random.default_rng(seed)
    cap = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        cap[(u, v)] = cap[(v, u)] = capacity
    for _ in range(extra):
        u, v = (int(x) for x in rng.choice(n, 2, replace=False))
        cap[(u, v)] = cap[(v, u)] = capacity
    return Topology(n, cap)


def bfs_dist(topology):
    n = topology.n_nodes
    adj = {u: [] for u in range(n)}
    for u, v in topology.links:
        adj[u].append(v)
    dist = np.full((n, n), -1)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    q.append(v)
    return dist


def test_four_node_directory_matches_table():
    d = build_routing(four_node())
    for cur in range(4):
        for dst in range(4):
            want = FOUR_NODE_TABLE[cur][dst]
            got = d.next_hop[cur, dst]
            assert (got == NO_HOP) if want is None else (got + 1 == want)


def test_four_node_path_two_to_three():
    d = build_routing(four_node())
    path = resolve_path(d, Flow("a", 1, 2, 1.0))
    assert [u + 1 for u in path.nodes] == [2, 4, 1, 3]
    assert path.hops == 3


def test_single_link():
    d = build_routing(Topology(2, {(0, 1): 5.0}))
    assert d.next_hop[0, 1] == 1
    assert resolve_path(d, Flow("f", 0, 1, 1.0)).nodes == (0, 1)
    with pytest.raises(UnroutableFlowError):
        resolve_path(d, Flow("g", 1, 0, 1.0))


@pytest.mark.parametrize("seed", range(10))
def test_paths_are_bfs_shortest(seed):
    topo = random_topology(10, 6, seed)
    d = build_routing(topo)
    dist = bfs_dist(topo)
    for s in range(10):
        for t in range(10):
            if s == t:
                continue
            path = resolve_path(d, Flow("x", s, t, 1.0))
            assert len(set(path.nodes)) == len(path.nodes)
            assert path.hops == dist[s, t] <= 9
            assert all(l in topo.capacity for l in path.links)


def test_inverse_capacity_metric_prefers_fast_links():
    cap = {(0, 1): 1.0, (1, 2): 1.0, (0, 3): 10.0, (3, 4): 10.0, (4, 2): 10.0}
    topo = Topology(5, cap)
    assert resolve_path(build_routing(topo), Flow("f", 0, 2, 1.0)).nodes == (0, 1, 2)
    assert resolve_path(build_routing(topo, "inverse_capacity"), Flow("f", 0, 2, 1.0)).nodes == (0, 3, 4, 2)


def test_unknown_metric_rejected():
    with pytest.raises(NetworkError):
        build_routing(four_node(), "bogus")


def test_arrival_rates_additive():
    topo = Topology(3, {(0, 1): 1.0, (1, 2): 1.0})
    d = build_routing(topo)
    st = link_arrival_rates(topo, d, [Flow("a", 0, 1, 1.0), Flow("b", 0, 2, 2.0)], mu=0.25)
    assert st.arrival_rate[(0, 1)] == 3.0
    assert st.arrival_rate[(1, 2)] == 2.0
    assert st.load[(0, 1)] == pytest.approx(12.0)


def test_tandem_rates_equal_gamma():
    topo = Topology(3, {(0, 1): 1.0, (1, 2): 1.0})
    st = link_arrival_rates(topo, build_routing(topo), [Flow("k", 0, 2, 0.5)], mu=1.0)
    assert st.arrival_rate[(0, 1)] == st.arrival_rate[(1, 2)] == 0.5
    assert st.theta[(0, 1)] == 0.5


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_arrival_rates_brute_force(seed):
    topo = random_topology(20, 10, seed)
    d = build_routing(topo)
    rng = np.random.default_rng(seed)
    flows = []
    for i in range(40):
        s, t = (int(x) for x in rng.choice(20, 2, replace=False))
        flows.append(Flow(str(i), s, t, float(rng.uniform(0.1, 2))))
    st = link_arrival_rates(topo, d, flows, mu=1.0)
    # independent recount: walk the next-hop table by hand
    count = {l: 0.0 for l in topo.links}
    for f in flows:
        u = f.source
        while u != f.destination:
            v = int(d.next_hop[u, f.destination])
            count[(u, v)] += f.rate
            u = v
    for l in topo.links:
        assert st.arrival_rate.get(l, 0.0) == pytest.approx(count[l], rel=1e-12)


@pytest.mark.parametrize(
    "lam, overloaded",
    [(0.99, []), (1.0, [(0, 1)]), (1.01, [(0, 1)])],
)
def test_stability_boundary(lam, overloaded):
    st = LinkState(1.0, {(0, 1): 1.0, (1, 2): 1.0}, {(0, 1): lam, (1, 2): 0.5})
    assert check_stability(st) == overloaded


def test_path_rejects_loops():
    with pytest.raises(NetworkError):
        Path((0, 1, 0))
    with pytest.raises(NetworkError):
        Path((0,))


@pytest.mark.parametrize(
    "n, cap",
    [(0, {}), (2, {(0, 0): 1.0}), (2, {(0, 5): 1.0}), (2, {(0, 1): 0.0})],
)
def test_topology_validation(n, cap):
    with pytest.raises(NetworkError):
        Topology(n, cap)


def test_flow_validation():
    with pytest.raises(NetworkError):
        Flow("a", 1, 1, 1.0)
    with pytest.raises(NetworkError):
        Flow("a", 1, 2, 0.0)


def test_directory_read_only():
    d = build_routing(four_node())
    with pytest.raises(ValueError):
        d.next_hop[0, 1] = 3
