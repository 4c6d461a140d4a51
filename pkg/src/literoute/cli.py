"""Command-line entry point: ``literoute {synth,calibrate,run,sweep,report}``.

Exit status: 0 on success, 1 on data/config errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import ClassTaxonomy
from .errors import LiteRouteError
from .harness import RunConfig, load_config, reaggregate, run_cv
from .ingest import SynthSpec, read_metadata, synth_generate, write_dataset
from .risk import calibrate
from .sweep import run_sweep

log = logging.getLogger("literoute")


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_dict(load_config(args.config))
    block = write_dataset(synth_generate(spec), args.out)
    print(f"wrote {spec.n_samples} samples to {args.out} ({', '.join(block['encoders'])})")
    return 0


def _cmd_calibrate(args) -> int:
    tax = ClassTaxonomy.from_dict(load_config(args.taxonomy))
    model = calibrate(read_metadata(args.metadata, tax), tax)
    text = model.to_json() + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _run_config(args) -> RunConfig:
    raw = load_config(args.config)
    cfg = RunConfig.from_dict(raw, base_dir=Path(args.config).resolve().parent)
    if args.output_dir:
        cfg = RunConfig.from_dict({**raw, "output_dir": str(Path(args.output_dir).resolve())},
                                  base_dir=cfg.base_dir)
    if not cfg.output_dir:
        raise LiteRouteError("no output_dir in config and none given with --output-dir")
    return cfg, raw


def _cmd_run(args) -> int:
    cfg, _ = _run_config(args)
    report = run_cv(cfg)
    row = report.row("routed", "mean")
    print(f"routed arm: routing {row['routing_pct']:.4f}, energy {row['energy_j']:.4g} J/sample, "
          f"macro F1 {row['macro_f1']:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, raw = _run_config(args)
    if "grid" not in raw:
        raise LiteRouteError("sweep config needs a 'grid' block")
    points = run_sweep(cfg, raw["grid"])
    print(f"evaluated {len(points)} operating points")
    return 0


def _cmd_report(args) -> int:
    rows = reaggregate(args.input, args.output)
    if not args.output:
        for r in rows:
            print(r["arm"], r["fold"], json.dumps({k: v for k, v in r.items() if k not in ("arm", "fold")}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="literoute", description="Lite-first routed inference simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic dataset from a SynthSpec JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("calibrate", help="fit a risk model from a training metadata CSV")
    s.add_argument("--metadata", required=True)
    s.add_argument("--taxonomy", required=True)
    s.add_argument("--output")
    s.set_defaults(func=_cmd_calibrate)

    for name, func, text in (("run", _cmd_run, "cross-validated run of all arms"),
                             ("sweep", _cmd_sweep, "threshold grid sweep and Pareto frontier")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--output-dir")
        s.set_defaults(func=func)

    s = sub.add_parser("report", help="re-aggregate per-fold rows of a report.csv")
    s.add_argument("--input", required=True)
    s.add_argument("--output")
    s.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (LiteRouteError, OSError, KeyError, TypeError) as exc:
        print(f"literoute {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
