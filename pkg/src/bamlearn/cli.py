"""Command-line entry point: ``train``, ``eval``, ``ablate`` and ``diag``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import BamError
from .runs import (
    diag_entropy,
    diag_sinkhorn,
    evaluate_checkpoint,
    format_table,
    parse_dataset_spec,
    resolve_out_dir,
    run_ablation,
    run_training,
    sig6,
)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bamlearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one run and write its run directory")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True,
                   help="mixture:key=val,..., rings:key=val,... or csv:<path>")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="write the JSON report here as well as to stdout")

    a = sub.add_parser("ablate", help="base config plus one-switch-off variants")
    a.add_argument("--config", required=True)
    a.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    a.add_argument("--out")

    d = sub.add_parser("diag", help="Sinkhorn convergence / entropy sweeps on random latents")
    d.add_argument("what", choices=["sinkhorn", "entropy"])
    d.add_argument("--n", type=int, default=64)
    d.add_argument("--k", type=int, default=2)
    d.add_argument("--dim", type=int, default=32)
    d.add_argument("--temperature", type=float, default=0.1)
    d.add_argument("--target-temperature", type=_floats, default=(0.05,))
    d.add_argument("--iters", type=int, default=100)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", help="CSV path (default: stdout)")
    return p


def _write_csv(rows, header, out):
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def cmd_train(args) -> int:
    overrides = {"run.seed": args.seed} if args.seed is not None else None
    cfg = parse_config(args.config, overrides)
    out_dir = resolve_out_dir(cfg, args.out)
    outcome = run_training(cfg, out_dir, config_path=args.config)
    rep = outcome.report
    print(f"run dir {out_dir}: nmi={sig6(rep['nmi'])} ari={sig6(rep['ari'])} "
          f"probe={sig6(rep['probe_accuracy'])} collapsed={str(outcome.collapsed).lower()}")
    return 0


def cmd_eval(args) -> int:
    ds = parse_dataset_spec(args.dataset)
    report = evaluate_checkpoint(args.checkpoint, ds, args.seed)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return 0


def cmd_ablate(args) -> int:
    cfg = parse_config(args.config)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = run_ablation(cfg, resolve_out_dir(cfg, args.out), seeds)
    print(format_table(rows))
    return 0


def cmd_diag(args) -> int:
    if args.what == "sinkhorn":
        hist = diag_sinkhorn(args.n, args.k, args.dim, args.target_temperature[0], args.iters,
                             seed=args.seed)
        _write_csv([(i + 1, repr(e)) for i, e in enumerate(hist)],
                   ["iteration", "marginal_error"], args.out)
    else:
        rows = diag_entropy(args.n, args.k, args.dim, args.temperature, args.target_temperature,
                            args.seed)
        _write_csv([(tb, repr(ea), repr(eb)) for tb, ea, eb in rows],
                   ["target_temperature", "entropy_A", "entropy_B"], args.out)
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate, "diag": cmd_diag}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (BamError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
