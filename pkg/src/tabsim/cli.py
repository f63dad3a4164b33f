"""Command-line front end.

Settings resolve as subcommand preset, then ``--config`` file, then flags.
``--config`` also accepts any CSV written by this tool, since each embeds
the resolved configuration it was produced with.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import experiments as ex
from . import fileio
from .device import DIRECTION_POLICIES
from .errors import DomainError, IllConditionedError, ParseError
from .network import predict
from .quantization import effective_weights

COMMANDS = (
    "sample-population",
    "characterize",
    "train",
    "predict",
    "sweep-hidden",
    "sweep-bits",
    "subset-capacity",
)

# flag dest -> config key
FLAG_KEYS = {
    "seed": "mismatch.seed",
    "workers": "experiment.workers",
    "L": "network.L",
    "target": "experiment.target",
    "target_table": "experiment.target_table",
    "bits": "experiment.bits",
    "trials": "experiment.trials",
    "source": "network.source",
    "tuning_csv": "network.tuning_csv",
    "direction_policy": "network.direction_policy",
    "vref1": "device.vref1",
    "vref2": "device.vref2",
    "output_gain": "device.output_gain",
    "counts": "experiment.hidden_counts",
    "bit_list": "experiment.bit_list",
    "pool": "experiment.pool",
    "subset": "experiment.subset",
    "n": "experiment.n_subsets",
}


def _int_list(text):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _setting(text):
    key, sep, value = text.partition("=")
    if not sep or "." not in key:
        raise argparse.ArgumentTypeError(f"expected section.key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file or a previous output CSV")
    common.add_argument("--set", action="append", type=_setting, default=[],
                        metavar="SECTION.KEY=VALUE", help="override any config key")
    common.add_argument("--out", help="primary output path (default: <command>.csv)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--L", type=int, help="hidden neuron count")
    common.add_argument("--target", choices=config_mod.TARGETS)
    common.add_argument("--target-table", help="x,y CSV for --target table")
    common.add_argument("--bits", type=int, help="total bits per weight, sign included")
    common.add_argument("--trials", type=int)
    common.add_argument("--source", choices=config_mod.SOURCES)
    common.add_argument("--tuning-csv", help="measured tuning curves for --source measured")
    common.add_argument("--direction-policy", choices=DIRECTION_POLICIES)
    common.add_argument("--vref1", type=float)
    common.add_argument("--vref2", type=float)
    common.add_argument("--output-gain", type=float)

    parser = argparse.ArgumentParser(prog="tabsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("sample-population", parents=[common],
                   help="draw mismatched device parameters")
    sub.add_parser("characterize", parents=[common],
                   help="sweep tuning curves and summarize amplitude/offset spread")
    p = sub.add_parser("train", parents=[common], help="train and quantize one network")
    p.add_argument("--weights", help="weight file to write (default: <out stem>.weights.txt)")
    p = sub.add_parser("predict", parents=[common], help="evaluate a saved weight file")
    p.add_argument("--weights", required=True)
    p.add_argument("--x", type=_float_list, help="comma-separated inputs (default: test grid)")
    p = sub.add_parser("sweep-hidden", parents=[common], help="error versus hidden count")
    p.add_argument("--counts", type=_int_list)
    p = sub.add_parser("sweep-bits", parents=[common], help="error versus weight bit depth")
    p.add_argument("--bit-list", type=_int_list)
    p = sub.add_parser("subset-capacity", parents=[common],
                       help="error spread over random subsets of one pool")
    p.add_argument("--pool", type=int)
    p.add_argument("--subset", type=int)
    p.add_argument("--n", type=int, help="number of subsets")
    return parser


def resolve_config(args):
    cfg = config_mod.preset(args.command)
    if args.config:
        cfg = config_mod.load(args.config, base=cfg)
    overrides = dict(args.set)
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    return config_mod.apply_overrides(cfg, overrides)


def _sibling(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _run(args):
    cfg = resolve_config(args)
    out = Path(args.out or f"{args.command}.csv")
    written = [out]
    cmd = args.command
    if cmd == "sample-population":
        from .device import sample_population, systematic_vref

        d, L = cfg.device, cfg.network.L
        neurons = sample_population(L, cfg.subthreshold(), cfg.mismatch_config(),
                                    systematic_vref(d.vref1, d.vref2, L),
                                    cfg.network.direction_policy)
        fileio.write_population_csv(out, neurons, cfg)
    elif cmd == "characterize":
        _, curves, stats = ex.characterize_population(cfg)
        fileio.save_tuning_csv(out, curves, cfg)
        stats_path = _sibling(out, ".stats.csv")
        fileio.write_stats_csv(stats_path, stats, cfg)
        written.append(stats_path)
    elif cmd == "train":
        _, codes, report = ex.train_function(cfg)
        weights = Path(args.weights) if args.weights else _sibling(out, ".weights.txt")
        fileio.save_weights(weights, codes)
        fileio.write_report_csv(out, {cfg.network.L: report}, cfg)
        written.append(weights)
        r = report.rows[0]
        print(f"relative RMS: {r['rms_pre']:.4%} unquantized, {r['rms_post']:.4%} "
              f"at {cfg.experiment.bits} bits")
    elif cmd == "predict":
        codes = fileio.load_weights(args.weights)
        source = ex.make_source(cfg, cfg.seed)
        if len(codes) != source.L:
            raise DomainError(f"{args.weights} holds {len(codes)} weights, network has {source.L}")
        w = effective_weights(codes, ex.splitter_mismatches(cfg, cfg.seed, source.L))
        xs = np.asarray(args.x if args.x is not None else ex.test_grid(cfg), dtype=float)
        target = ex.TargetFunction.from_config(cfg)
        fileio.write_predictions_csv(out, xs, predict(source, w, xs), target(xs), cfg)
    elif cmd == "sweep-hidden":
        reports = ex.sweep_hidden(cfg)
        fileio.write_report_csv(out, reports, cfg)
        for L, rep in reports.items():
            print(f"L={L}: {rep.mean:.4%} +/- {rep.std:.4%}")
    elif cmd == "sweep-bits":
        reports = ex.sweep_bits(cfg)
        fileio.write_report_csv(out, reports, cfg)
        for b, rep in reports.items():
            print(f"bits={b}: {rep.mean:.4%} +/- {rep.std:.4%}")
    elif cmd == "subset-capacity":
        report, hist = ex.subset_capacity(cfg)
        fileio.write_report_csv(out, {cfg.experiment.subset: report}, cfg)
        hist_path = _sibling(out, ".hist.csv")
        fileio.write_histogram_csv(hist_path, hist, cfg)
        written.append(hist_path)
        ref = ex.CHIP_SUBSET_REFERENCE
        print(f"subset RMS: {report.mean:.4%} +/- {report.std:.4%} "
              f"(chip reference {ref['mean']:.2%} +/- {ref['std']:.2%})")
    cfg_path = _sibling(out, ".config.ini")
    fileio.write_config(cfg_path, cfg)
    written.append(cfg_path)
    for path in written:
        print(f"wrote {path}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except (DomainError, ParseError, IllConditionedError, OSError) as exc:
        print(f"tabsim: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
