"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or numeric error.
"""

from __future__ import annotations

import argparse
import ast
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import gradcheck
from .config import RunConfig, defaults_help, load_config
from .datasynth import GENERATORS, GeneratorSpec, generate
from .formats import load_checkpoint, load_dataset, read_points, save_checkpoint, save_dataset, write_points
from .layers import desk_preset
from .metrics import evaluate, format_table, retrieve_closest
from .svgplot import DEFAULT_COLORS, Style, svg_scatter
from .trainer import infer_multipass, parse_ablation, train

DATA_ERRORS = (ValueError, ArithmeticError, OSError, RuntimeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="p2pnet",
        description="Train and apply bidirectional point displacement networks.",
        epilog=defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", metavar="{synth,train,infer,eval,gradcheck,plot,retrieve}")

    s = sub.add_parser("synth", help="generate a paired dataset directory")
    s.add_argument("--out", required=True, help="dataset directory to create")
    s.add_argument("--config", help="run config; its [data] section is used")
    s.add_argument("--kind", choices=sorted(GENERATORS), help="generator (default line_disk)")
    s.add_argument("--count", type=int, help="number of pairs (default 200)")
    s.add_argument("--points", type=int, help="points per set (default 256)")
    s.add_argument("--seed", type=int, help="generator seed (default 0)")
    s.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="generator parameter (python literal)")

    t = sub.add_parser("train", help="train both branches on a dataset directory")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="run config (see p2pnet --help for keys)")
    t.add_argument("--ablation", help="ns+rg+, ns+rg-, ns-rg+ or ns-rg-")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--log", help="loss log path (default: checkpoint path + .log)")
    t.add_argument("--quiet", action="store_true", help="do not echo progress lines")

    i = sub.add_parser("infer", help="apply one branch of a checkpoint")
    i.add_argument("--ck", required=True)
    i.add_argument("--in", dest="inp", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--direction", choices=("xy", "yx"), default="xy")
    i.add_argument("--passes", type=int, default=1, help="forward passes with fresh noise, outputs unioned")
    i.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("eval", help="separation rate, curvature and normal differences")
    e.add_argument("--pred", nargs="+", required=True)
    e.add_argument("--truth", nargs="+", required=True)
    e.add_argument("--patch-fraction", type=float, default=0.003)
    e.add_argument("--target-label", help="'skeleton' disables the normal metric")
    e.add_argument("--setting", default="result", help="row label in the table")

    g = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    g.add_argument("--suite", action="append", choices=gradcheck.SUITES, help="run only these suites")
    g.add_argument("--instances", type=int, default=20)
    g.add_argument("--points", type=int, default=16)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-4)

    pl = sub.add_parser("plot", help="render point sets to SVG")
    pl.add_argument("--in", dest="inp", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--overlay-from", help="displacement line start points")
    pl.add_argument("--overlay-to", help="displacement line end points")
    pl.add_argument("--fraction", type=float, default=0.2, help="share of displacement lines drawn")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--drop-axis", type=int, default=2, choices=(0, 1, 2), help="axis removed for 3-D sets")

    r = sub.add_parser("retrieve", help="closest corpus entry to a query set")
    r.add_argument("--query", required=True)
    r.add_argument("--corpus", nargs="+", required=True)
    return p


def _generator_spec(args) -> GeneratorSpec:
    spec = load_config(args.config).data if args.config else GeneratorSpec()
    params = dict(spec.params)
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = ast.literal_eval(v.strip())
        except (ValueError, SyntaxError):
            params[k.strip()] = v.strip()
    over = {"kind": args.kind, "count": args.count, "points_per_set": args.points, "seed": args.seed}
    return replace(spec, **{k: v for k, v in over.items() if v is not None}, params=params)


def cmd_synth(args, out) -> int:
    spec = _generator_spec(args)
    ds = generate(spec)
    save_dataset(args.out, ds, spec.to_dict())
    print(f"wrote {len(ds)} pairs ({spec.kind}, dim={ds.dim}) to {args.out}", file=out)
    return 0


def cmd_train(args, out) -> int:
    try:
        ablation = parse_ablation(args.ablation) if args.ablation else {}
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = load_dataset(args.data)
    if args.config:
        run = load_config(args.config)
    else:
        run = RunConfig(network=desk_preset(ds.dim, n_points=len(ds.pairs[0][0])))
    tcfg = replace(run.train, **ablation)
    if args.epochs is not None:
        tcfg = replace(tcfg, epochs=args.epochs)
    if args.seed is not None:
        tcfg = replace(tcfg, seed=args.seed)
    log_path = Path(args.log or f"{args.out}.log")
    lines = []

    def sink(line):
        lines.append(line)
        if not args.quiet:
            print(line, file=out)

    ck = train(ds, run.network, tcfg, sink)
    save_checkpoint(args.out, ck)
    log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"checkpoint={args.out} log={log_path} ablation={tcfg.ablation_tag}", file=out)
    return 0


def cmd_infer(args, out) -> int:
    if args.passes < 1:
        raise UsageError("--passes must be >= 1")
    ck = load_checkpoint(args.ck)
    cfg, params = ck.branch(args.direction)
    x = read_points(args.inp)
    res = infer_multipass(x, cfg, params, args.passes, np.random.default_rng(args.seed))
    write_points(args.out, res)
    print(f"wrote {len(res)} points to {args.out}", file=out)
    return 0


def cmd_eval(args, out) -> int:
    if len(args.pred) != len(args.truth):
        raise UsageError("--pred and --truth need the same number of files")
    preds = [read_points(p) for p in args.pred]
    truths = [read_points(t) for t in args.truth]
    rep = evaluate(preds, truths, args.patch_fraction, args.target_label)
    print(format_table({args.setting: rep}), file=out)
    print(rep.as_record(), file=out)
    return 0


def cmd_gradcheck(args, out) -> int:
    ok = True
    for name in args.suite or gradcheck.SUITES:
        res = gradcheck.run_suite(name, args.instances, args.points, args.seed)
        passed = res.passed(args.tol, args.instances)
        ok = ok and passed
        print(f"{res.as_record()} {'PASS' if passed else 'FAIL'}", file=out)
    return 0 if ok else 2


def cmd_plot(args, out) -> int:
    sets = [(read_points(p), Style(DEFAULT_COLORS[i % len(DEFAULT_COLORS)], label=Path(p).name)) for i, p in enumerate(args.inp)]
    overlay = None
    if bool(args.overlay_from) != bool(args.overlay_to):
        raise UsageError("--overlay-from and --overlay-to go together")
    if args.overlay_from:
        overlay = (read_points(args.overlay_from), read_points(args.overlay_to))
    svg_scatter(sets, args.out, overlay, args.fraction, args.seed, args.drop_axis)
    print(f"wrote {args.out}", file=out)
    return 0


def cmd_retrieve(args, out) -> int:
    q = read_points(args.query)
    corpus = [read_points(c) for c in args.corpus]
    idx, d = retrieve_closest(q, corpus)
    print(f"index={idx} path={args.corpus[idx]} distance={d:.9g}", file=out)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "plot": cmd_plot,
    "retrieve": cmd_retrieve,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "p2pnet: error: a subcommand is required")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(str(exc), file=err)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except DATA_ERRORS as exc:
        print(f"p2pnet: error: {exc}", file=err)
        return 2


def run() -> None:
    sys.exit(main())
