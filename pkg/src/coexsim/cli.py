"""Command-line front end.

Subcommands expose the analytics and the simulator as reproducible
experiments with CSV output:

    coexsim coverage --config table1_inh --out table.csv
    coexsim edprob --rssi -52,-52 --threshold -62
    coexsim select --config scan.yaml
    coexsim adapt --config scan.yaml
    coexsim beacon encode --config cell.yaml
    coexsim beacon decode --hex 000a...
    coexsim simulate --config figure4_coexistence --compare-adaptive --runs 10
    coexsim sweep --config figure4_coexistence --runs 10

Exit codes: 0 success, 2 configuration error, 3 runtime error.  Output
is deterministic for a fixed (config, seed): floats are printed with
six significant digits and rows are fully ordered.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .coordination import adapt_ed_threshold, channel_metric, filter_scan, select_channel
from .propagation import sample_link_gains
from .relay import (
    BeaconDecodeError,
    CellInfo,
    MacSpec,
    NodeType,
    decode_pseudo_beacon,
    encode_pseudo_beacon,
    hex_to_ies,
    ies_to_hex,
)
from .sensing import EdConfig, ed_success_factors, ed_success_prob, fractional_ed_coverage
from .simulator import Node, Simulator, summarize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def fmt(value) -> str:
    """Six-significant-digit float formatting for byte-stable CSV."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def write_rows(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def load_with_overrides(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    cfgmod.apply_overrides(cfg, args.set or [])
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    cfgmod.check_top_level(cfg)
    return cfg


# -- coverage -----------------------------------------------------------------

def cmd_coverage(args) -> int:
    cfg = load_with_overrides(args)
    spec = cfgmod.build_coverage_spec(cfg)
    seed = int(cfg.get("seed", 1))
    base = Node(id="base", kind="wifi_ap", position=spec.base_position,
                tx_power_dbm=spec.tx_power_dbm)
    header = ["model"]
    for threshold in spec.thresholds_dbm:
        for cell_name, _ in spec.cells:
            header.append(f"{cell_name}_ed_{fmt(threshold)}")
    header += [f"{name}_cell_fraction" for name, _ in spec.cells]
    rows = []
    cdf_rows = []
    for model in spec.models:
        row = [model.variant]
        for threshold in spec.thresholds_dbm:
            for cell_name, sensitivity in spec.cells:
                cov = fractional_ed_coverage(
                    spec.building, base, model,
                    EdConfig(threshold_dbm=threshold, min_sensitivity_dbm=sensitivity),
                    n_samples=spec.samples,
                    rng=np.random.default_rng([seed, 7]),
                    include_shadow=spec.include_shadow,
                    margin_db=spec.margin_db,
                )
                row.append(cov.ed_fraction)
        for cell_name, sensitivity in spec.cells:
            cov = fractional_ed_coverage(
                spec.building, base, model,
                EdConfig(threshold_dbm=-np.inf, min_sensitivity_dbm=sensitivity),
                n_samples=spec.samples,
                rng=np.random.default_rng([seed, 7]),
                include_shadow=spec.include_shadow,
                margin_db=spec.margin_db,
            )
            row.append(cov.cell_fraction)
        rows.append(row)
        cdf_rows.extend(_rssi_cdf_rows(spec, model, seed))
    write_rows(args.out, header, rows)
    cdf_path = args.cdf_out
    if cdf_path is None and args.out not in (None, "-"):
        cdf_path = str(args.out).rsplit(".", 1)[0] + "_cdf.csv"
    if cdf_path:
        write_rows(cdf_path, ["model", "rssi_dbm", "cum_fraction"], cdf_rows)
    return EXIT_OK


def _rssi_cdf_rows(spec, model, seed):
    rng = np.random.default_rng([seed, 8])
    xs = rng.uniform(0.0, spec.building.width_m, spec.samples)
    ys = rng.uniform(0.0, spec.building.depth_m, spec.samples)
    dists = np.hypot(xs - spec.base_position.x, ys - spec.base_position.y)
    gains = sample_link_gains(np.maximum(dists, 1.0), model, rng,
                              include_shadow=spec.include_shadow)
    rssis = spec.tx_power_dbm + gains - spec.margin_db
    lo = np.floor(rssis.min() / spec.cdf_bin_db) * spec.cdf_bin_db
    hi = np.ceil(rssis.max() / spec.cdf_bin_db) * spec.cdf_bin_db
    levels = np.arange(lo, hi + spec.cdf_bin_db, spec.cdf_bin_db)
    return [(model.variant, float(level), float(np.mean(rssis <= level)))
            for level in levels]


# -- edprob ---------------------------------------------------------------------

def cmd_edprob(args) -> int:
    try:
        rssis = [float(tok) for tok in args.rssi.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse rssi list: {exc}") from exc
    if not rssis:
        raise ConfigError("rssi list is empty")
    prob = ed_success_prob(rssis, args.threshold)
    factors = ed_success_factors(rssis, args.threshold)
    for level, factor in zip(rssis, factors):
        print(f"link rssi={fmt(level)} dBm factor={fmt(factor)}")
    print(f"ed_success_prob={fmt(prob)}")
    return EXIT_OK


# -- select / adapt ---------------------------------------------------------------

def cmd_select(args) -> int:
    cfg = load_with_overrides(args)
    scan = cfgmod.parse_scan_entries(cfg)
    _, _, select_cfg = cfgmod._build_coordination(cfg.get("coordination"))
    running_on = (cfg.get("select") or {}).get("running_on", "wifi_ap")
    channels = cfg.get("channels")
    if not channels:
        raise ConfigError("select needs a candidate channels list")
    kept = filter_scan(scan, select_cfg, running_on)
    metrics = []
    for channel in channels:
        entries = [e for e in kept if e.cell.channel == channel]
        metric = channel_metric(entries, select_cfg, running_on)
        metric.channel = channel
        metrics.append(metric)
    chosen = select_channel(metrics)
    rows = [(m.channel, m.metric, len(m.contributors)) for m in metrics]
    write_rows(args.out, ["channel", "metric", "contributors"], rows)
    print(f"selected_channel={chosen}")
    return EXIT_OK


def cmd_adapt(args) -> int:
    cfg = load_with_overrides(args)
    scan = cfgmod.parse_scan_entries(cfg)
    adapt_section = cfg.get("adapt") or {}
    tech = adapt_section.get("technology", "wifi")
    wifi_cfg, lte_cfg, _ = cfgmod._build_coordination(cfg.get("coordination"))
    chosen_cfg = wifi_cfg if tech == "wifi" else lte_cfg
    own_channel = adapt_section.get("own_channel")
    threshold = adapt_ed_threshold(scan, chosen_cfg, own_channel=own_channel)
    print(f"ed_threshold_dbm={fmt(threshold)}")
    return EXIT_OK


# -- beacon -------------------------------------------------------------------------

_NODE_TYPES = {t.name.lower(): t for t in NodeType}
_MAC_SPECS = {m.name.lower(): m for m in MacSpec}


def cmd_beacon(args) -> int:
    if args.beacon_cmd == "encode":
        if args.config:
            cfg = cfgmod.load_config(args.config)
            cell_cfg = cfg.get("cell") or {}
        else:
            cell_cfg = {}
        if args.cell_id is not None:
            cell_cfg["operator_cell_id"] = args.cell_id
        if args.channel is not None:
            cell_cfg["channel"] = args.channel
        try:
            cell = CellInfo(
                operator_cell_id=cell_cfg.get("operator_cell_id", ""),
                channel=int(cell_cfg.get("channel", 36)),
                station_count=int(cell_cfg.get("station_count", 0)),
                channel_utilization=float(cell_cfg.get("channel_utilization", 0.0)),
                available_admission_capacity=int(
                    cell_cfg.get("available_admission_capacity", 0)),
                node_type=_NODE_TYPES[str(cell_cfg.get("node_type", "rel13_laa")).lower()],
                mac_spec=_MAC_SPECS[str(cell_cfg.get("mac_spec", "lbt_cat4")).lower()],
                tx_power_offset_db=int(cell_cfg.get("tx_power_offset_db", 0)),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid cell description: {exc}") from exc
        print(ies_to_hex(encode_pseudo_beacon(cell)))
        return EXIT_OK
    # decode
    cell = decode_pseudo_beacon(hex_to_ies(args.hex))
    print(f"operator_cell_id={cell.operator_cell_id}")
    print(f"channel={cell.channel}")
    print(f"station_count={cell.station_count}")
    print(f"channel_utilization={fmt(cell.channel_utilization)}")
    print(f"available_admission_capacity={cell.available_admission_capacity}")
    print(f"node_type={cell.node_type.name.lower()}")
    print(f"mac_spec={cell.mac_spec.name.lower()}")
    print(f"tx_power_offset_db={cell.tx_power_offset_db}")
    return EXIT_OK


# -- simulate / sweep ------------------------------------------------------------------

def _metric_rows(seed: int, adaptive: bool, scenario, metrics):
    rows = []
    clients = sorted(n.id for n in scenario.nodes if n.attach_to is not None)
    for client in clients:
        node = next(n for n in scenario.nodes if n.id == client)
        tputs = metrics.file_throughputs_mbps.get(client, [])
        rows.append((
            seed, str(adaptive).lower(), client, node.technology, "client",
            len(tputs),
            summarize(tputs) if tputs else 0.0,
            (sum(tputs) / len(tputs)) if tputs else 0.0,
            metrics.collision_count,
            metrics.ack_window_collisions,
            metrics.retransmissions,
            metrics.airtime["wifi"], metrics.airtime["lte"],
            metrics.airtime["overlap"], metrics.airtime["idle"],
        ))
    return rows

SIM_HEADER = [
    "seed", "adaptive", "node", "tech", "role", "files",
    "median_mbps", "mean_mbps", "collisions", "ack_window_collisions",
    "retransmissions", "airtime_wifi", "airtime_lte", "airtime_overlap",
    "airtime_idle",
]


def _run_batch(cfg: dict, seeds, adaptive_values, trace_path=None):
    rows = []
    raw: dict = {}
    trace_lines = None
    for seed in seeds:
        for adaptive in adaptive_values:
            run_cfg = {**cfg, "seed": seed}
            run_cfg["simulate"] = dict(cfg.get("simulate") or {})
            run_cfg["simulate"]["adaptive_ed"] = adaptive
            scenario = cfgmod.build_scenario(run_cfg)
            want_trace = trace_path is not None and trace_lines is None
            sim = Simulator(scenario, collect_trace=want_trace)
            metrics = sim.run()
            if want_trace:
                trace_lines = sim.trace_lines
            rows.extend(_metric_rows(seed, adaptive, scenario, metrics))
            for node, tputs in metrics.file_throughputs_mbps.items():
                key = (str(adaptive).lower(), node)
                raw.setdefault(key, []).extend(tputs)
    if trace_path and trace_lines is not None:
        with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time_us,node,tech,record,detail\n")
            fh.writelines(line + "\n" for line in trace_lines)
    return rows, raw


def _pooled_rows(rows, raw):
    """Aggregate per-seed rows into one summary row per (adaptive, node)."""
    groups = {}
    for row in rows:
        groups.setdefault((row[1], row[2]), []).append(row)
    pooled = []
    for (adaptive, node), members in sorted(groups.items()):
        files = sum(r[5] for r in members)
        tputs = raw.get((adaptive, node), [])
        med = summarize(tputs) if tputs else 0.0
        mean = sum(tputs) / len(tputs) if tputs else 0.0
        n = len(members)
        pooled.append((
            "pooled", adaptive, node, members[0][3], members[0][4], files,
            med, mean,
            sum(r[8] for r in members), sum(r[9] for r in members),
            sum(r[10] for r in members),
            sum(r[11] for r in members) / n, sum(r[12] for r in members) / n,
            sum(r[13] for r in members) / n, sum(r[14] for r in members) / n,
        ))
    return pooled


def cmd_simulate(args) -> int:
    cfg = load_with_overrides(args)
    base_seed = int(cfg.get("seed", 1))
    seeds = [base_seed + i for i in range(args.runs)]
    base_adaptive = bool((cfg.get("simulate") or {}).get("adaptive_ed", False))
    adaptive_values = [False, True] if args.compare_adaptive else [base_adaptive]
    rows, raw = _run_batch(cfg, seeds, adaptive_values, trace_path=args.trace)
    if args.runs > 1 or args.compare_adaptive:
        rows = rows + _pooled_rows(rows, raw)
    write_rows(args.out, SIM_HEADER, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    # one row per (seed, node); rows are sorted by seed so any parallel
    # execution strategy would emit identical bytes
    cfg = load_with_overrides(args)
    base_seed = int(cfg.get("seed", 1))
    seeds = [base_seed + i for i in range(args.runs)]
    adaptive = bool((cfg.get("simulate") or {}).get("adaptive_ed", False))
    rows, _ = _run_batch(cfg, seeds, [adaptive])
    rows.sort(key=lambda r: (r[0], r[2]))
    write_rows(args.out, SIM_HEADER, rows)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coexsim",
        description="Wi-Fi / unlicensed-LTE coexistence analytics and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="config file path or preset name")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override, repeatable")

    p_cov = sub.add_parser("coverage", help="fractional ED coverage table + RSSI CDF")
    add_common(p_cov)
    p_cov.add_argument("--cdf-out", default=None, help="CDF output path")
    p_cov.set_defaults(func=cmd_coverage)

    p_ed = sub.add_parser("edprob", help="closed-form ED success probability")
    p_ed.add_argument("--rssi", required=True,
                      help="comma-separated mean RSSI list in dBm")
    p_ed.add_argument("--threshold", type=float, required=True)
    p_ed.set_defaults(func=cmd_edprob)

    p_sel = sub.add_parser("select", help="run channel selection on a scan file")
    add_common(p_sel)
    p_sel.set_defaults(func=cmd_select)

    p_adapt = sub.add_parser("adapt", help="run adaptive ED thresholding on a scan file")
    add_common(p_adapt)
    p_adapt.set_defaults(func=cmd_adapt)

    p_beacon = sub.add_parser("beacon", help="pseudo-beacon codec")
    beacon_sub = p_beacon.add_subparsers(dest="beacon_cmd", required=True)
    p_enc = beacon_sub.add_parser("encode")
    p_enc.add_argument("--config", default=None, help="YAML with a cell: section")
    p_enc.add_argument("--cell-id", default=None)
    p_enc.add_argument("--channel", type=int, default=None)
    p_enc.set_defaults(func=cmd_beacon)
    p_dec = beacon_sub.add_parser("decode")
    p_dec.add_argument("--hex", required=True, help="lowercase hex IE string")
    p_dec.set_defaults(func=cmd_beacon)

    p_sim = sub.add_parser("simulate", help="run a scenario, emit per-node metrics")
    add_common(p_sim)
    p_sim.add_argument("--runs", type=int, default=1, help="number of seeds")
    p_sim.add_argument("--compare-adaptive", action="store_true",
                       help="run each seed with adaptation off and on")
    p_sim.add_argument("--trace", default=None, help="per-event trace output path")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="multi-seed scenario sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--runs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BeaconDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
