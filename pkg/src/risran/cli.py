"""Command-line experiment runner.

    risran run --config <I..VIII|path> [--seed N] [--duration S] [--out DIR]
    risran compare --configs V,VI --seeds 1,2,3 [--duration S]
    risran catalog

The output root defaults to ./runs and can be overridden with the
RIS_SIM_OUT environment variable; each run writes into its own
<config>_seed<seed> subdirectory.
"""

import argparse
import os
import sys

from .core import Slice
from .runner import compare, run_scenario, write_outputs
from .scenarios import CATALOG, load_scenario


def _output_root(explicit):
    if explicit:
        return explicit
    return os.environ.get("RIS_SIM_OUT", "runs")


def cmd_run(args) -> int:
    cfg = load_scenario(args.config, seed=args.seed, duration_s=args.duration)
    result = run_scenario(cfg)
    out_dir = os.path.join(_output_root(args.out), f"{cfg.config_id}_seed{cfg.seed}")
    write_outputs(result, out_dir, dump_channels=args.dump_channels)
    print(f"wrote {out_dir}/kpm.csv, summary.csv, ris_gains.csv")
    for sl in Slice:
        if sl in result.prb_ratios:
            print(f"  {sl}: prb_ratio={result.prb_ratios[sl]:.6g}")
    return 0


def cmd_compare(args) -> int:
    config_ids = [c.strip() for c in args.configs.split(",") if c.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    per_config, deltas = compare(config_ids, seeds, duration_s=args.duration)
    print(f"medians across seeds {seeds}:")
    for cid, values in per_config.items():
        print(f"  config {cid}:")
        for (sl, metric), value in values.items():
            print(f"    {sl:6} {metric:15} {value:.6g}")
    if deltas:
        print("pairwise deltas:")
        for d in deltas:
            print(f"  {d['from']}->{d['to']} {d['slice']:6} {d['metric']:15} "
                  f"{d['delta_pct']:+.2f}%")
    return 0


def cmd_catalog(_args) -> int:
    header = f"{'id':4} {'UEs':14} {'slices':22} {'bandwidth':12} {'RIS':6} {'xApp':5}"
    print(header)
    print("-" * len(header))
    for cid, cfg in CATALOG.items():
        ues = ",".join(str(u) for u in cfg.ue_ids)
        slices = ";".join(f"{u}:{cfg.slice_of[u]}" for u in cfg.ue_ids)
        bw = "&".join(f"{mhz:g}" for _, mhz in sorted(cfg.bandwidth_mhz.items(),
                                                      key=lambda kv: kv[0].value))
        print(f"{cid:4} {ues:14} {slices:22} {bw + ' MHz':12} "
              f"{cfg.ris_elements:<6} {'yes' if cfg.xapp_enabled else 'no':5}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risran",
                                     description="RIS-assisted open RAN simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write CSV outputs")
    run_p.add_argument("--config", required=True,
                       help="catalog id (I..VIII) or scenario file path")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--duration", type=int, default=None, help="seconds")
    run_p.add_argument("--out", default=None, help="output root directory")
    run_p.add_argument("--dump-channels", action="store_true",
                       help="also write channels.csv")
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="median metrics across seeds per config")
    cmp_p.add_argument("--configs", required=True, help="comma-separated catalog ids")
    cmp_p.add_argument("--seeds", required=True, help="comma-separated seeds")
    cmp_p.add_argument("--duration", type=int, default=None)
    cmp_p.set_defaults(func=cmd_compare)

    cat_p = sub.add_parser("catalog", help="print the scenario catalog")
    cat_p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
