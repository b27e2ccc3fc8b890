"""``ll0`` command line: run, bench, gen-data and export-dot."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datasets import BUILTIN, resolve, write_csv
from .dot import export_dot
from .errors import LL0Error
from .graph import Network
from .harness import LL0_PRESETS, MODELS, ExperimentConfig, bench, run, summarize

log = logging.getLogger("ll0")


def _load_config(args) -> dict:
    d = {}
    if getattr(args, "preset", False):
        d.update(json.loads(json.dumps(LL0_PRESETS.get(args.dataset or "spirals", {}))))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise LL0Error(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise LL0Error(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise LL0Error(f"config {args.config} must hold a JSON object")
        for k, v in loaded.items():
            if isinstance(v, dict) and isinstance(d.get(k), dict):
                d[k] = {**d[k], **v}
            else:
                d[k] = v
    return d


def _apply_flags(d: dict, args) -> dict:
    """Command-line flags win over the config file."""
    if args.dataset is not None:
        d["dataset"] = args.dataset
    if getattr(args, "model", None) is not None:
        d["model"] = args.model
    if args.seed:
        d["seeds"] = list(args.seed)
    if args.epochs is not None:
        d["stream"] = dict(d.get("stream", {}), epochs=args.epochs)
    if args.out is not None:
        d["output_dir"] = args.out
    if getattr(args, "eval_every", None) is not None:
        d["eval_every"] = args.eval_every
    if getattr(args, "workers", None) is not None:
        d["workers"] = args.workers
    return d


def cmd_run(args):
    cfg = ExperimentConfig.from_dict(_apply_flags(_load_config(args), args))
    runs = run(cfg)
    for r in runs:
        s = summarize(r)
        seed = "" if r.seed is None else f" seed={r.seed}"
        print(f"{r.model} on {r.dataset}{seed}: accuracy {s['final_accuracy']:.4f} "
              f"(peak {s['peak_accuracy']:.4f}), energy {s['final_energy']:.4g}, "
              f"nodes {s['nodes']}, depth {s['depth']}, max fan-in {s['max_fan_in']}")
    if cfg.output_dir:
        print(f"outputs written to {cfg.output_dir}")
    return 0


def cmd_bench(args):
    d = _load_config(args) if args.config else None
    dataset = args.dataset or (d or {}).get("dataset", "spirals")
    out = args.out or f"bench_{Path(str(dataset)).stem}"
    base = None
    if d is not None:
        d["dataset"] = dataset
        base = ExperimentConfig.from_dict(d)
    seeds = list(args.seed) if args.seed else list(range(10))
    curves = bench(dataset, out, seeds=seeds, ll0_epochs=args.ll0_epochs,
                   baseline_epochs=args.epochs, workers=args.workers or 1, base=base)
    for model, c in curves.items():
        s = summarize(c)
        print(f"{model:7s} peak {s['peak_accuracy']:.4f} final {s['final_accuracy']:.4f} "
              f"energy {s['final_energy']:.4g}")
    print(f"bundle written to {out}")
    return 0


def cmd_gen_data(args):
    names = BUILTIN if args.dataset in (None, "all") else (args.dataset,)
    out = Path(args.out or "data")
    for name in names:
        ds = resolve(name, seed=args.seed[0] if args.seed else None)
        path = write_csv(ds, out / f"{name}.csv")
        print(f"{name}: {len(ds)} rows, {ds.n_features} features, {ds.n_classes} classes -> {path}")
    return 0


def cmd_export_dot(args):
    try:
        with open(args.network, encoding="utf-8") as fh:
            net = Network.from_dict(json.load(fh))
    except OSError as exc:
        raise LL0Error(f"cannot read network snapshot {args.network}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LL0Error(f"{args.network} is not valid JSON: {exc}") from exc
    text = export_dot(net, omit_outputs=args.omit_outputs)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _common(p, model=True):
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--dataset", help=f"one of {', '.join(BUILTIN)} or a CSV path")
    if model:
        p.add_argument("--model", choices=MODELS)
    p.add_argument("--seed", type=int, action="append",
                   help="seed for baseline runs; repeat for several")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel processes for seeded runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ll0", description="Dynamic-graph lifelong learner and baselines.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one model and write metrics")
    _common(p)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--preset", action="store_true",
                   help="start from the fixed benchmark hyperparameters for the dataset")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="LL0 against the four baselines")
    _common(p, model=False)
    p.add_argument("--ll0-epochs", type=int, dest="ll0_epochs")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-data", help="write the built-in datasets as CSV")
    p.add_argument("--dataset", help="dataset name or 'all' (default)")
    p.add_argument("--seed", type=int, action="append", help="order seed for spirals")
    p.add_argument("--out", help="output directory (default: data)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("export-dot", help="render a saved network.json as DOT")
    p.add_argument("network", help="network.json written by 'run'")
    p.add_argument("--out", help="DOT file (default: stdout)")
    p.add_argument("--omit-outputs", action="store_true", dest="omit_outputs")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LL0Error as exc:
        print(f"ll0: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
