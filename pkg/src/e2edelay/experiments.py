"""Experiment pipelines behind the CLI: approximate, simulate, compare, sweep.

All tables are tab-separated with a header row; floats are written with nine
significant digits so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import dataclass, replace
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .analysis import (
    FlowReport,
    RegionSummary,
    empirical_ccdf,
    flow_report,
    region_classify,
)
from .approx import ASSUMPTIONS, FlowApproximation, akia_approximation, kia_approximation
from .dessim import DelaySamples, Mode, replicate
from .netmodel import Path, resolve_path
from .phasetype import ph_ccdf
from .scenario import Scenario, scale_rates

log = logging.getLogger(__name__)

ONE_HOP_FLAG = "identical-by-construction"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def write_table(path, header, rows) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(x) for x in row) + "\n")


def read_table(path) -> list[dict[str, str]]:
    lines = FsPath(path).read_text().splitlines()
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def write_metadata(out_dir, scenario: Scenario, command: str, extra=None) -> None:
    meta = {
        "command": command,
        "scenario": scenario.source,
        "scenario_sha256": hashlib.sha256(FsPath(scenario.source).read_bytes()).hexdigest()
        if scenario.source and FsPath(scenario.source).is_file()
        else None,
        "seed": scenario.sim.seed,
        "mode": scenario.sim.mode.value,
        "mean_packet_bits": scenario.mean_packet_bits,
        "routing_metric": scenario.routing_metric,
        "versions": {
            "e2edelay": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "assumptions": ASSUMPTIONS,
    }
    meta.update(extra or {})
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class FlowModel:
    flow_id: str
    path: Path
    akia: FlowApproximation
    kia: FlowApproximation
    load: float


def approximate_flows(scenario: Scenario) -> list[FlowModel]:
    out = []
    for f in scenario.flows:
        path = resolve_path(scenario.directory, f)
        out.append(
            FlowModel(
                flow_id=f.id,
                path=path,
                akia=akia_approximation(path, scenario.state, scenario.mu, f.id),
                kia=kia_approximation(path, scenario.state, f.id),
                load=max(scenario.state.load[l] for l in path.links),
            )
        )
    return out


def cmd_approx(scenario: Scenario, out_dir) -> list[FlowModel]:
    models = approximate_flows(scenario)
    labels = scenario.topology.label
    rows = []
    for m in models:
        for a in (m.akia, m.kia):
            rows.append(
                [
                    m.flow_id,
                    labels(m.path.nodes[0]),
                    labels(m.path.nodes[-1]),
                    m.path.hops,
                    a.method.value,
                    a.mean,
                    a.jitter,
                    a.compound_capacity if a.compound_capacity is not None else "",
                    ",".join(fmt(x) for x in a.params.p),
                    ",".join(fmt(x) for x in a.params.theta_raw),
                ]
            )
    write_table(
        FsPath(out_dir) / "approx.tsv",
        ["flow_id", "src", "dst", "hops", "method", "mean_s", "jitter_s",
         "compound_capacity_bps", "p", "theta"],
        rows,
    )
    write_metadata(out_dir, scenario, "approx")
    return models


def simulate(scenario: Scenario, reps: int = 1, mode: Mode | None = None) -> list[DelaySamples]:
    sim = scenario.sim if mode is None else replace(scenario.sim, mode=Mode(mode))
    return replicate(scenario.topology, scenario.directory, scenario.flows, sim, reps)


def write_samples(runs: list[DelaySamples], out_dir, fmt_kind: str = "tsv") -> None:
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt_kind == "npz":
        arrays = {}
        for rep, run in enumerate(runs):
            for fid, fs in run.flows.items():
                arrays[f"rep{rep}/{fid}/seq"] = fs.seq
                arrays[f"rep{rep}/{fid}/birth"] = fs.birth
                arrays[f"rep{rep}/{fid}/delay"] = fs.delay
        np.savez(out / "delays.npz", **arrays)
        return
    with (out / "delays.tsv").open("w", newline="\n") as fh:
        fh.write("rep\tflow_id\tseq\tbirth_time_s\tdelay_s\n")
        for rep, run in enumerate(runs):
            for fid, fs in run.flows.items():
                for s, b, d in zip(fs.seq.tolist(), fs.birth.tolist(), fs.delay.tolist()):
                    fh.write(f"{rep}\t{fid}\t{s}\t{b:.9g}\t{d:.9g}\n")


def cmd_simulate(scenario: Scenario, out_dir, reps: int = 1, mode=None, fmt_kind: str = "tsv"):
    runs = simulate(scenario, reps, mode)
    write_samples(runs, out_dir, fmt_kind)
    counts = [
        [rep, fid, fs.generated, fs.delivered, fs.in_flight, fs.discarded, fs.delay.size]
        for rep, run in enumerate(runs)
        for fid, fs in run.flows.items()
    ]
    write_table(
        FsPath(out_dir) / "counts.tsv",
        ["rep", "flow_id", "generated", "delivered", "in_flight", "warmup_discarded", "samples"],
        counts,
    )
    write_metadata(
        out_dir, scenario, "simulate",
        {"reps": reps, "mode": (runs[0].config.mode.value)},
    )
    return runs


REPORT_HEADER = [
    "rep", "flow_id", "src", "dst", "hops", "load", "n_samples", "sim_mean_s", "sim_jitter_s",
    "akia_mean_s", "akia_jitter_s", "kia_mean_s", "kia_jitter_s", "eps_akia", "eps_kia",
    "nll_akia", "nll_kia", "delta_nll", "region",
]


def compare_runs(models: list[FlowModel], runs: list[DelaySamples]) -> list[list[FlowReport]]:
    out = []
    for run in runs:
        reps = []
        for m in models:
            z = run[m.flow_id]
            if z.size < 2:
                log.warning("flow %s has %d samples; skipped", m.flow_id, z.size)
                continue
            reps.append(flow_report(m.flow_id, m.path.hops, z, m.akia, m.kia, m.load))
        out.append(reps)
    return out


def ccdf_grid(samples, n: int = 200) -> np.ndarray:
    z = np.asarray(samples)
    lo = max(float(np.quantile(z, 0.001)), 1e-12)
    hi = float(z.max())
    return np.geomspace(lo, hi, n) if hi > lo else np.array([lo])


def summary_dict(summary: RegionSummary) -> dict:
    return {
        "multi_hop_flows": summary.n_high + summary.n_low,
        "high_region": summary.n_high,
        "low_region": summary.n_low,
        "high_fraction": summary.high_fraction,
        "one_hop_flows": summary.n_skipped,
        "eps_akia_range": list(summary.eps_akia_range),
        "eps_kia_range": list(summary.eps_kia_range),
        "delta_nll_positive": summary.n_delta_positive,
        "tip_load": summary.tip_load,
    }


def cmd_compare(scenario: Scenario, out_dir, reps: int = 1, mode=None):
    models = approximate_flows(scenario)
    runs = simulate(scenario, reps, mode)
    reports = compare_runs(models, runs)
    labels = scenario.topology.label
    by_id = {m.flow_id: m for m in models}
    rows = []
    for rep, rep_reports in enumerate(reports):
        for r in rep_reports:
            m = by_id[r.flow_id]
            region = ONE_HOP_FLAG if r.one_hop else r.region.value
            rows.append(
                [rep, r.flow_id, labels(m.path.nodes[0]), labels(m.path.nodes[-1]), r.hops, r.load,
                 r.n_samples, r.sim_mean, r.sim_jitter, r.akia_mean, r.akia_jitter, r.kia_mean,
                 r.kia_jitter, r.eps_akia, r.eps_kia, r.nll_akia, r.nll_kia, r.delta_nll, region]
            )
    out = FsPath(out_dir)
    write_table(out / "report.tsv", REPORT_HEADER, rows)
    for m in models:
        z = runs[0][m.flow_id]
        if z.size < 2:
            continue
        t = ccdf_grid(z)
        emp = empirical_ccdf(z)(t)
        write_table(
            out / "ccdf" / f"{m.flow_id}.tsv",
            ["t_s", "empirical", "akia", "kia"],
            zip(t, emp, ph_ccdf(m.akia.params, t), ph_ccdf(m.kia.params, t)),
        )
    summaries = [summary_dict(region_classify(rr)) for rr in reports if rr]
    write_metadata(out, scenario, "compare", {"reps": reps, "summary": summaries})
    return reports


def rho_sweep(
    scenario: Scenario, loads, out_dir=None, command: str = "compare", reps: int = 1, mode=None,
    fmt_kind: str = "tsv",
):
    """Run ``command`` once per target load; compare also writes ``sweep.tsv``."""
    results = {}
    for rho in loads:
        scaled = scale_rates(scenario, rho)
        sub = None if out_dir is None else FsPath(out_dir) / f"rho_{fmt(rho)}"
        if command == "approx":
            results[rho] = cmd_approx(scaled, sub) if sub else approximate_flows(scaled)
        elif command == "simulate":
            results[rho] = cmd_simulate(scaled, sub, reps, mode, fmt_kind) if sub else simulate(scaled, reps, mode)
        else:
            if sub is not None:
                results[rho] = cmd_compare(scaled, sub, reps, mode)
            else:
                results[rho] = compare_runs(approximate_flows(scaled), simulate(scaled, reps, mode))
    if command == "compare" and out_dir is not None:
        rows = [
            [rho, rep, r.flow_id, r.sim_jitter, r.akia_jitter, r.kia_jitter, r.eps_akia, r.eps_kia, r.delta_nll]
            for rho, per_rep in results.items()
            for rep, rr in enumerate(per_rep)
            for r in rr
        ]
        write_table(
            FsPath(out_dir) / "sweep.tsv",
            ["target_load", "rep", "flow_id", "sim_jitter_s", "akia_jitter_s", "kia_jitter_s",
             "eps_akia", "eps_kia", "delta_nll"],
            rows,
        )
        tips = {}
        for rep in range(reps):
            flows = {r.flow_id for rr in results.values() for r in rr[rep]}
            for fid in sorted(flows):
                pts = [(rho, r) for rho, per_rep in results.items() for r in per_rep[rep] if r.flow_id == fid]
                summary = region_classify([replace(r, load=rho) for rho, r in pts])
                tips[f"rep{rep}/{fid}"] = summary.tip_load
        write_metadata(out_dir, scenario, "compare --rho-sweep", {"loads": list(loads), "tip_load": tips})
    return results
