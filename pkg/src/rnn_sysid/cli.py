"""Command-line entry point.

    sysid train|verify|existence|sweep --config path.json [--out dir] [--seed n]
    sysid verify --lemma spectral --m 1024 --trials 20 --seed 0 --out report.json

The config file is a single JSON document; see the README for the schema.
"""

import argparse
import json
import sys

from .harness import ConfigError, run_experiment
from .verify import ALL_LEMMAS, run_lemma


def _add_common(p):
    p.add_argument("--config", help="path to the experiment config JSON")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="seed override")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sysid",
        description="Learn stable linear systems with an over-parameterized "
                    "linear RNN, and verify the supporting numerical bounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in ("train", "existence", "sweep"):
        _add_common(sub.add_parser(kind))
    pv = sub.add_parser("verify")
    _add_common(pv)
    pv.add_argument("--lemma", choices=sorted(ALL_LEMMAS) + ["all"],
                    help="run one lemma check directly, without a config")
    pv.add_argument("--m", type=int, help="width for direct lemma runs")
    pv.add_argument("--trials", type=int, default=20)
    return parser


def _load_config(path, kind):
    with open(path) as f:
        cfg = json.load(f)
    if cfg.get("kind", kind) != kind:
        raise ConfigError(f"config kind {cfg.get('kind')!r} does not match "
                          f"subcommand {kind!r}")
    cfg["kind"] = kind
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify" and args.lemma and not args.config:
        lemmas = sorted(ALL_LEMMAS) if args.lemma == "all" else [args.lemma]
        code = 0
        for name in lemmas:
            kwargs = {"trials": args.trials, "seed": args.seed or 0}
            if args.m:
                kwargs["m"] = args.m
            report = run_lemma(name, **kwargs)
            line = "%-14s pass_fraction=%.3f %s" % (
                name, report.pass_fraction, "PASS" if report.passed else "FAIL")
            print(line)
            if args.out:
                report.save(args.out if len(lemmas) == 1
                            else args.out.replace(".json", f"_{name}.json"))
            code = code or (0 if report.passed else 1)
        return code
    if not args.config:
        print("error: --config is required (or --lemma for verify)",
              file=sys.stderr)
        return 2
    cfg = _load_config(args.config, args.command)
    code, out = run_experiment(cfg, out_dir=args.out, seed_override=args.seed)
    print(f"{args.command}: artifacts in {out} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
