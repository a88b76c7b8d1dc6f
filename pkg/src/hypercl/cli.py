"""Command-line entry point: ``hypercl <command> ...``."""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import dataio
from .errors import (ConfigurationError, DatasetFormatError, DegenerateInputError,
                     HyperclError, NumericalError, ShapeError)
from .evalkit import ProbeConfig, evaluate_classification, evaluate_clustering, silhouette, kmeans
from .hgraph import random_split, remove_isolated_nodes
from .trainer import embed, random_init, train

EXIT_CODES = {ConfigurationError: 2, DatasetFormatError: 3, ShapeError: 3,
              DegenerateInputError: 3, NumericalError: 4}

VARIANTS = {"tricl": (True, True, True), "tricl-n": (True, False, False),
            "tricl-ng": (True, True, False)}


def parse_variant(text):
    """Map a variant name or ``loss-mask=n,g,m`` to (use_node, use_group, use_membership)."""
    if text in VARIANTS:
        return VARIANTS[text]
    if text.startswith("loss-mask="):
        bits = text.split("=", 1)[1].split(",")
        if len(bits) == 3 and all(b.strip().lower() in ("0", "1", "true", "false") for b in bits):
            return tuple(b.strip().lower() in ("1", "true") for b in bits)
    raise ConfigurationError(f"bad variant {text!r}; use tricl, tricl-n, tricl-ng or loss-mask=n,g,m")


def _load_dataset(path, keep_isolated=False):
    path = Path(path)
    d = dataio.load_orange_tab(path) if path.suffix == ".tab" else dataio.load_dataset(path)
    if not keep_isolated:
        d, _ = remove_isolated_nodes(d)
    return d


def _load_configs(source):
    if source is None:
        return dataio.config_from_dict({})
    if Path(source).exists():
        return dataio.load_config(source)
    return dataio.bundled_config(source)


def _emit(obj, as_json=True):
    print(json.dumps(obj, sort_keys=True) if as_json else obj)


# ------------------------------------------------------------ commands


def cmd_stats(args):
    d = _load_dataset(args.dataset, keep_isolated=True)
    st = dataio.dataset_stats(d)
    if args.json:
        _emit(st)
        return
    for k, v in st.items():
        print(f"{k:<20}{v:.2f}" if isinstance(v, float) else f"{k:<20}{v}")


def cmd_split(args):
    d = _load_dataset(args.dataset)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(args.count):
        s = random_split(d.num_nodes, ratios, args.seed + i)
        p = out / f"split_{i:03d}.json"
        dataio.save_split(s, p)
        paths.append(str(p))
    _emit({"splits": paths})


def _with_overrides(tc, args):
    use = parse_variant(args.variant)
    lc = dataclasses.replace(tc.loss, use_node=use[0], use_group=use[1], use_membership=use[2])
    changes = {"loss": lc}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    return dataclasses.replace(tc, **changes)


def _summary(tc, pc, args, tm=None):
    return {
        "config": dataio.config_to_dict(tc, pc),
        "dataset": str(args.dataset),
        "variant": getattr(args, "variant", "tricl"),
        "seeds": [tc.seed],
        "loss_trace": list(tm.loss_trace) if tm else [],
        "component_trace": dict(tm.component_trace) if tm else {},
        "epoch_ms": tm.mean_epoch_ms if tm else 0.0,
        "evaluation": {},
        "artifacts": {},
    }


def cmd_train(args):
    d = _load_dataset(args.dataset)
    tc, pc = _load_configs(args.config)
    tc = _with_overrides(tc, args)
    tm = train(d, tc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = _summary(tc, pc, args, tm)
    model_path = out / "model.npz"
    dataio.save_model(tm, model_path)
    summary["artifacts"]["model"] = str(model_path)
    if args.embeddings:
        emb_path = out / "embeddings.bin"
        dataio.save_embeddings(embed(tm, d), emb_path, "binary")
        summary["artifacts"]["embeddings"] = str(emb_path)
    dataio.save_run_summary(summary, out / "summary.json")
    _emit({"summary": str(out / "summary.json"), "digest": dataio.summary_digest(summary),
           "final_loss": tm.loss_trace[-1]})


def cmd_embed(args):
    d = _load_dataset(args.dataset)
    if args.random_init:
        tc, _ = _load_configs(args.config)
        if args.seed is not None:
            tc = dataclasses.replace(tc, seed=args.seed)
        tm = random_init(d, tc)
    else:
        if args.model is None:
            raise ConfigurationError("give --model or --random-init")
        tm = dataio.load_model(args.model)
        if tm.model.encoder.in_dim != d.features.shape[1]:
            raise ShapeError(f"model expects {tm.model.encoder.in_dim} features, "
                             f"dataset has {d.features.shape[1]}")
    emb = embed(tm, d)
    dataio.save_embeddings(emb, args.out, args.format)
    _emit({"embeddings": str(args.out), "rows": emb.shape[0], "cols": emb.shape[1]})


def _embeddings_for(args, d):
    if args.embeddings:
        emb = dataio.load_embeddings(args.embeddings)
    elif args.model:
        emb = embed(dataio.load_model(args.model), d)
    else:
        raise ConfigurationError("give --embeddings or --model")
    if emb.shape[0] != d.num_nodes:
        raise ShapeError(f"{emb.shape[0]} embedding rows for {d.num_nodes} nodes")
    return emb


def _append_summary(path, results):
    if not path:
        return
    obj = dataio.load_run_summary(path)
    obj["evaluation"].update(results)
    dataio.save_run_summary(obj, path)


def cmd_eval_classify(args):
    d = _load_dataset(args.dataset)
    if not args.splits:
        raise ConfigurationError("no split files given (--splits)")
    splits = [dataio.load_split(p, d.num_nodes) for p in args.splits]
    pc = ProbeConfig(args.l2, args.probe_lr, args.probe_epochs)
    emb = _embeddings_for(args, d)
    mean, std, accs = evaluate_classification(emb, d.labels, splits, pc, d.num_classes)
    res = {"accuracy_mean": mean, "accuracy_std": std, "accuracies": accs}
    _append_summary(args.summary, res)
    _emit(res)


def cmd_eval_cluster(args):
    d = _load_dataset(args.dataset)
    emb = _embeddings_for(args, d)
    k = args.k or d.num_classes
    nmi_, f1, _ = evaluate_clustering(emb, d.labels, k, args.runs, args.seed)
    res = {"nmi": nmi_, "f1": f1}
    if args.silhouette:
        res["silhouette"] = silhouette(emb, kmeans(emb, k, seed=args.seed).assignments)
    _append_summary(args.summary, res)
    _emit(res)


# ------------------------------------------------------------ parser


def build_parser():
    ap = argparse.ArgumentParser(prog="hypercl",
                                 description="Self-supervised node embeddings for hypergraphs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("dataset")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="write random train/valid/test splits")
    p.add_argument("dataset")
    p.add_argument("--ratios", default="0.1,0.1,0.8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="self-supervised training")
    p.add_argument("dataset")
    p.add_argument("--config", help="config JSON path or bundled name (e.g. zoo)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--variant", default="tricl")
    p.add_argument("--embeddings", action="store_true", help="also write embeddings.bin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="write node embeddings")
    p.add_argument("dataset")
    p.add_argument("--model")
    p.add_argument("--random-init", action="store_true")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    defaults = ProbeConfig()
    for name, func, text in (("eval-classify", cmd_eval_classify, "linear-probe accuracy"),
                             ("eval-cluster", cmd_eval_cluster, "k-means NMI and F1")):
        p = sub.add_parser(name, help=text)
        p.add_argument("dataset")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--embeddings")
        src.add_argument("--model")
        p.add_argument("--summary", help="run summary JSON to append results to")
        p.set_defaults(func=func)
        if name == "eval-classify":
            p.add_argument("--splits", nargs="*", default=[])
            p.add_argument("--l2", type=float, default=defaults.l2_coefficient)
            p.add_argument("--probe-lr", type=float, default=defaults.probe_lr)
            p.add_argument("--probe-epochs", type=int, default=defaults.probe_epochs)
        else:
            p.add_argument("--runs", type=int, default=5)
            p.add_argument("--k", type=int)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--silhouette", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (HyperclError, OSError, ValueError) as e:
        code = next((c for t, c in EXIT_CODES.items() if isinstance(e, t)), 1)
        diag = {"error": type(e).__name__, "message": str(e).replace("\n", " ")}
        print(json.dumps(diag), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
