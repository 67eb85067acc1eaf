"""Command-line entry point: ``otrlab run|sweep|presets|validate``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import PRESETS, ConfigError, preset_path, resolve_config_arg
from .report import SWEEPABLE, UnknownParameter, run, sweep


def _parse_values(text: str, parameter: str):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if parameter == "batch_size":
        return [int(v) for v in vals]
    return [float(v) for v in vals]


def _load(arg: str, seed):
    cfg = resolve_config_arg(arg)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otrlab", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run every baseline listed in a config")
    r.add_argument("config", help="YAML path or preset name (e.g. preset:paper-defaults)")
    r.add_argument("--out", default="otr-out")
    r.add_argument("--seed", type=int)

    s = sub.add_parser("sweep", help="one sub-run per parameter value")
    s.add_argument("config")
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    s.add_argument("--values", required=True, help="comma separated, e.g. 0,0.01,0.1,1")
    s.add_argument("--out", default="otr-sweep")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)

    pr = sub.add_parser("presets", help="shipped scenario presets")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")

    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "presets":
            if args.action == "list":
                for name in PRESETS:
                    print(name)
                return 0
            if not args.name:
                print("presets show needs a NAME", file=sys.stderr)
                return 2
            print(preset_path(args.name).read_text(), end="")
            return 0

        if args.verb == "validate":
            cfg = resolve_config_arg(args.config)
            print(f"ok: {cfg.name or args.config} ({len(cfg.models)} models, "
                  f"{len(cfg.sequencers)} sequencers, baselines={','.join(cfg.baselines)})")
            return 0

        cfg = _load(args.config, args.seed)
        if args.verb == "run":
            bundle = run(cfg, args.out)
            print(bundle.summary_txt.read_text(), end="")
            for problem in bundle.problems:
                print(f"invariant violated: {problem}", file=sys.stderr)
            return 0 if bundle.ok else 1

        values = _parse_values(args.values, args.param)
        bundles, combined = sweep(cfg, args.param, values, args.out, workers=args.workers)
        print(f"wrote {combined}")
        bad = [p for b in bundles for p in b.problems]
        for problem in bad:
            print(f"invariant violated: {problem}", file=sys.stderr)
        return 0 if not bad else 1
    except (ConfigError, UnknownParameter, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
