import json
import subprocess
import sys
from collections import deque

import numpy as np
import pytest

from e2edelay.cli import EXIT_INVALID, EXIT_OK, EXIT_UNSTABLE, main
from e2edelay.experiments import ONE_HOP_FLAG, fmt, read_table
from e2edelay.netmodel import UnstableNetworkError
from e2edelay.scenario import (
    TANDEM_LOADS,
    ScenarioError,
    load_scenario,
    parse_scenario,
    scale_rates,
    tandem_document,
)
from e2edelay.topogen import (
    Tier,
    TopologyGenError,
    generate_topology,
    parse_tiers,
    scenario_document,
    tier_sizes,
)


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def connected(n, edges):
    adj = {u: [] for u in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    q = deque([0])
    while q:
        for v in adj[q.popleft()]:
            if v not in seen:
                seen.add(v)
                q.append(v)
    return len(seen) == n


# scenario loading


def test_tandem_scenario_rates(tmp_path):
    sc = load_scenario(write(tmp_path, tandem_document(0.5)))
    assert sc.state.arrival_rate[(0, 1)] == sc.state.arrival_rate[(1, 2)] == 0.5
    assert sc.state.load[(0, 1)] == pytest.approx(0.5)
    assert sc.mu == 1.0


def test_unknown_node_named(tmp_path):
    doc = tandem_document(0.5)
    doc["flows"][0]["dst"] = 9
    with pytest.raises(ScenarioError, match="unknown node '9'"):
        load_scenario(write(tmp_path, doc))


def test_json_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"nodes": [1,\n  }')
    with pytest.raises(ScenarioError, match="line 2 column"):
        load_scenario(p)


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda d: d["flows"][0].update(rate_pps=0), "rate_pps"),
        (lambda d: d["flows"][0].update(rate_pps="fast"), "rate_pps"),
        (lambda d: d["links"][0].update(capacity_bps=-1), "capacity_bps"),
        (lambda d: d.update(flows=[]), "at least one flow"),
        (lambda d: d["flows"][0].update(mean_packet_bytes=100), "per-flow"),
        (lambda d: d["sim"].update(stop={"packets": 10, "seconds": 1}), "exactly one"),
        (lambda d: d["sim"].update(warmup=1.0), "warmup"),
        (lambda d: d.update(routing={"metric": "latency"}), "routing.metric"),
        (lambda d: d["links"].append({"u": 1, "v": 2, "capacity_bps": 1.0}), "duplicate link"),
        (lambda d: d.pop("traffic"), "traffic"),
    ],
)
def test_validation_errors(mutate, match):
    doc = tandem_document(0.5)
    mutate(doc)
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(doc)


def test_unstable_scenario():
    with pytest.raises(UnstableNetworkError, match="1->2"):
        parse_scenario(tandem_document(1.01))


def test_per_flow_rate_from_bitrate():
    doc = scenario_document(20, 7)
    sc = parse_scenario(doc)
    for f in sc.flows:
        assert f.rate == pytest.approx(1344.1, abs=0.1)
    assert sc.mean_packet_bits == 186 * 8


def test_parallel_flows_summed():
    doc = tandem_document(0.2)
    doc["flows"].append({"id": "K2", "src": 1, "dst": 3, "rate_pps": 0.3})
    sc = parse_scenario(doc)
    assert sc.state.arrival_rate[(0, 1)] == pytest.approx(0.5)


def test_scale_rates():
    sc = scale_rates(parse_scenario(tandem_document(0.2)), 0.7)
    assert max(sc.state.load.values()) == pytest.approx(0.7)
    with pytest.raises(UnstableNetworkError):
        scale_rates(sc, 1.0)


def test_tandem_grid():
    assert len(TANDEM_LOADS) == 14
    assert 0.6612 in TANDEM_LOADS and 0.62 in TANDEM_LOADS


# topology generator


def test_single_tier_four_nodes():
    tier_of, edges, cap = generate_topology(4, 0, [Tier(1e9, 1.0)])
    assert connected(4, edges)
    assert set(cap.values()) == {1e9}


def test_generator_deterministic():
    assert json.dumps(scenario_document(20, 7)) == json.dumps(scenario_document(20, 7))
    assert json.dumps(scenario_document(20, 7)) != json.dumps(scenario_document(20, 8))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_hundred_nodes_connected_all_tiers(seed):
    tier_of, edges, cap = generate_topology(100, seed)
    assert connected(100, edges)
    assert set(tier_of) == {0, 1, 2}
    assert all((v, u) in cap for u, v in cap)


def test_tier_capacity_is_slower_endpoint():
    tier_of, edges, cap = generate_topology(30, 3)
    caps = [10e9, 1e9, 100e6]
    for u, v in edges:
        assert cap[(u, v)] == min(caps[tier_of[u]], caps[tier_of[v]])


def test_tier_errors():
    with pytest.raises(TopologyGenError):
        tier_sizes(1, [Tier(1.0, 1.0)])
    with pytest.raises(TopologyGenError):
        tier_sizes(2, parse_tiers("1:1,2:1,3:1"))


def test_parse_tiers():
    assert parse_tiers("10e9:0.1,100e6") == [Tier(10e9, 0.1), Tier(100e6, 1.0)]


# CLI


@pytest.fixture
def tandem_file(tmp_path):
    return write(tmp_path, tandem_document(0.3, packets=20000), "tandem.json")


def test_cli_approx(tandem_file, tmp_path):
    out = tmp_path / "a"
    assert main(["approx", "--scenario", str(tandem_file), "--out", str(out)]) == EXIT_OK
    rows = read_table(out / "approx.tsv")
    assert [r["method"] for r in rows] == ["akia", "kia"]
    assert float(rows[0]["jitter_s"]) == pytest.approx(2.46609664, rel=1e-8)
    meta = json.loads((out / "run.json").read_text())
    assert set(meta["assumptions"]) == {"A1", "A2", "A3"}
    assert meta["scenario_sha256"]


def test_cli_compare_byte_identical(tandem_file, tmp_path):
    outs = [tmp_path / "c1", tmp_path / "c2"]
    for out in outs:
        assert main(["compare", "--scenario", str(tandem_file), "--out", str(out), "--seed", "5"]) == 0
    for name in ("report.tsv", "ccdf/K1.tsv", "run.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    row = read_table(outs[0] / "report.tsv")[0]
    assert row["region"] in ("high", "low")
    assert json.loads((outs[0] / "run.json").read_text())["seed"] == 5


def test_cli_seed_changes_output(tandem_file, tmp_path):
    for s in ("1", "2"):
        main(["simulate", "--scenario", str(tandem_file), "--out", str(tmp_path / s), "--seed", s])
    assert (tmp_path / "1/delays.tsv").read_bytes() != (tmp_path / "2/delays.tsv").read_bytes()


def test_cli_simulate_round_trip(tandem_file, tmp_path):
    from e2edelay.experiments import simulate

    out = tmp_path / "s"
    assert main(["simulate", "--scenario", str(tandem_file), "--out", str(out), "--reps", "2"]) == 0
    lines = (out / "delays.tsv").read_text().splitlines()
    assert lines[0] == "rep\tflow_id\tseq\tbirth_time_s\tdelay_s"
    runs = simulate(load_scenario(tandem_file), reps=2)
    rep1 = [l.split("\t") for l in lines[1:] if l.startswith("1\t")]
    z = runs[1]["K1"]
    assert len(rep1) == z.size
    got = np.array([float(r[4]) for r in rep1])
    assert np.array_equal(got, np.array([float(fmt(x)) for x in z]))
    assert np.allclose(got, z, rtol=1e-8)
    counts = read_table(out / "counts.tsv")
    assert {c["rep"] for c in counts} == {"0", "1"}


def test_cli_simulate_npz(tandem_file, tmp_path):
    out = tmp_path / "n"
    assert main(["simulate", "--scenario", str(tandem_file), "--out", str(out), "--format", "npz",
                 "--mode", "kia"]) == 0
    data = np.load(out / "delays.npz")
    assert data["rep0/K1/delay"].size == 19000
    assert json.loads((out / "run.json").read_text())["mode"] == "kia"


def test_cli_one_hop_flagged(tmp_path):
    doc = {
        "nodes": ["a", "b"],
        "links": [{"u": "a", "v": "b", "capacity_bps": 8000.0}],
        "flows": [{"id": "solo", "src": "a", "dst": "b", "rate_pps": 4.0}],
        "traffic": {"mean_packet_bytes": 125},
        "sim": {"stop": {"packets": 5000}, "seed": 3},
    }
    out = tmp_path / "o"
    assert main(["compare", "--scenario", str(write(tmp_path, doc)), "--out", str(out)]) == 0
    row = read_table(out / "report.tsv")[0]
    assert row["region"] == ONE_HOP_FLAG
    assert row["akia_jitter_s"] == row["kia_jitter_s"]
    summary = json.loads((out / "run.json").read_text())["summary"][0]
    assert summary["one_hop_flows"] == 1 and summary["multi_hop_flows"] == 0


def test_cli_rho_sweep(tandem_file, tmp_path):
    out = tmp_path / "sw"
    rc = main(["compare", "--scenario", str(tandem_file), "--out", str(out), "--rho-sweep", "0.2,0.8"])
    assert rc == 0
    assert (out / "rho_0.2" / "report.tsv").exists() and (out / "rho_0.8" / "report.tsv").exists()
    rows = read_table(out / "sweep.tsv")
    assert [r["target_load"] for r in rows] == ["0.2", "0.8"]
    assert "tip_load" in json.loads((out / "run.json").read_text())


def test_cli_exit_codes(tmp_path):
    bad = write(tmp_path, {"nodes": []}, "bad.json")
    assert main(["approx", "--scenario", str(bad), "--out", str(tmp_path / "x")]) == EXIT_INVALID
    assert main(["approx", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == EXIT_INVALID
    hot = write(tmp_path, tandem_document(1.2), "hot.json")
    assert main(["compare", "--scenario", str(hot), "--out", str(tmp_path / "y")]) == EXIT_UNSTABLE
    empty = tandem_document(0.5)
    empty["flows"] = []
    assert main(["approx", "--scenario", str(write(tmp_path, empty, "e.json")), "--out", str(tmp_path / "z")]) == EXIT_INVALID


def test_cli_bad_reps(tandem_file, tmp_path):
    assert main(["simulate", "--scenario", str(tandem_file), "--out", str(tmp_path / "r"), "--reps", "0"]) == EXIT_INVALID


def test_cli_argparse_errors():
    with pytest.raises(SystemExit) as exc:
        main(["compare", "--scenario", "x", "--out", "y", "--rho-sweep", "1.5"])
    assert exc.value.code == 2


def test_cli_gen_topology(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["gen-topology", "--nodes", "20", "--seed", "7", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    sc = load_scenario(a)
    assert len(sc.flows) == 100 and sc.topology.n_nodes == 20
    assert main(["gen-topology", "--nodes", "1", "--out", str(tmp_path / "c.json")]) == EXIT_INVALID


def test_module_entry_point(tandem_file, tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "e2edelay", "approx", "--scenario", str(tandem_file), "--out", str(tmp_path / "m")],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
