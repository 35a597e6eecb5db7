"""Command-line interface.

Subcommands: ingest, teaug-stats, synth, train, evaluate, threshold,
predict, run. Any stage failure exits nonzero with the stage named.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiment import (
    SplitSpec,
    evaluate_per_scale,
    load_accounts,
    load_experiment_config,
    run_experiment,
    split_dataset,
)
from .graphs import GraphSample, build_micro_graph
from .ingest import load_dataset, load_transaction_file
from .metrics import ScaleReport, threshold_report
from .model import DualChannelClassifier
from .opcodes import code_histogram, load_bytecode_file
from .synth import synth_generate, write_dataset
from .teaug import augment_split, scale_stats


def _add_data_args(parser):
    parser.add_argument("--tx-dir", required=True)
    parser.add_argument("--bytecode-dir", required=True)
    parser.add_argument("--labels", required=True)
    parser.add_argument("--min-tx", type=int, default=100)


def cmd_ingest(args):
    accounts = load_dataset(args.tx_dir, args.bytecode_dir, args.labels, args.min_tx)
    counts = [len(a.records) for a in accounts]
    summary = {
        "accounts": len(accounts),
        "ponzi": sum(a.label for a in accounts),
        "non_ponzi": sum(1 - a.label for a in accounts),
        "min_records": min(counts) if counts else 0,
        "max_records": max(counts) if counts else 0,
    }
    if args.out:
        manifest = {
            "summary": summary,
            "accounts": [
                {"address": a.address, "label": a.label, "records": len(a.records)}
                for a in accounts
            ],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    print(json.dumps(summary))


def cmd_teaug_stats(args):
    accounts = load_dataset(args.tx_dir, args.bytecode_dir, args.labels,
                            max(args.min_tx, args.m * args.delta))
    rows = scale_stats(accounts, args.delta, args.m)
    lines = ["scale,tx_count,avg_nodes,avg_edges,n_ponzi,n_non_ponzi"]
    for r in rows:
        lines.append(
            f"{r['scale']},{r['tx_count']},{r['avg_nodes']:.2f},{r['avg_edges']:.2f},"
            f"{r['n_ponzi']},{r['n_non_ponzi']}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")


def cmd_synth(args):
    accounts = synth_generate(args.n_ponzi, args.n_normal, args.delta, args.m, args.seed)
    write_dataset(accounts, args.out)
    print(f"wrote {len(accounts)} accounts to {args.out}")


def cmd_train(args):
    config = load_experiment_config(args.config)
    if args.out:
        config.out_dir = args.out
    method = args.method or config.methods[0]
    os.makedirs(config.out_dir, exist_ok=True)

    accounts, contracts = load_accounts(config)
    spec = SplitSpec(config.train_size, config.val_size, config.test_size, config.split_seed)
    train_acc, val_acc, _ = split_dataset(accounts, spec)
    kwargs = dict(delta=config.delta, m=config.m, contract_addresses=contracts,
                  normalize_code=config.normalize_code)
    train_samples = augment_split(train_acc, mode="train", **kwargs)
    val_pooled = [s for sc in augment_split(val_acc, mode="val", **kwargs) for s in sc]

    clf = DualChannelClassifier(**config.classifier_params(method, repeat=0))
    clf.fit(train_samples, X_val=val_pooled)
    checkpoint = os.path.join(config.out_dir, f"checkpoint_{method}.npz")
    clf.save(checkpoint)
    with open(os.path.join(config.out_dir, f"history_{method}.json"), "w") as fh:
        json.dump(clf.history_, fh, indent=2)
    best = max((h.get("val_f1", 0.0) for h in clf.history_), default=0.0)
    print(f"saved {checkpoint} (best val F1 {best:.4f})")


def cmd_evaluate(args):
    config = load_experiment_config(args.config)
    clf = DualChannelClassifier.load(args.checkpoint)
    accounts, contracts = load_accounts(config)
    spec = SplitSpec(config.train_size, config.val_size, config.test_size, config.split_seed)
    _, _, test_acc = split_dataset(accounts, spec)
    test_scales = augment_split(test_acc, delta=config.delta, m=config.m, mode="test",
                                contract_addresses=contracts,
                                normalize_code=config.normalize_code)
    report = evaluate_per_scale(clf, test_scales, method=args.method, delta=config.delta)
    print("scale,tx_count,f1")
    for k, f1 in enumerate(report.mean, start=1):
        print(f"{k},{k * config.delta},{f1:.6f}")


def cmd_threshold(args):
    with open(args.metrics, "r", encoding="utf-8") as fh:
        metrics = json.load(fh)
    if args.method not in metrics:
        raise ValueError(f"method {args.method!r} not in {args.metrics}; "
                         f"have: {', '.join(sorted(metrics))}")
    entry = metrics[args.method]
    report = ScaleReport(method=args.method, delta=entry["delta"],
                         per_repeat=entry["per_repeat"])
    result = threshold_report(report, args.epsilon)
    print(json.dumps({
        "method": args.method, "scale": result.scale, "tx_count": result.tx_count,
        "stabilized": result.stabilized, "epsilon": result.epsilon,
    }))
    if not result.stabilized:
        print("warning: F1 curve never stabilized before the last scale",
              file=sys.stderr)


def cmd_predict(args):
    clf = DualChannelClassifier.load(args.checkpoint)
    code = code_histogram(load_bytecode_file(args.bytecode))
    records = load_transaction_file(args.transactions)
    target = args.address or os.path.splitext(os.path.basename(args.transactions))[0].lower()
    graph = build_micro_graph(target, records, code, label=0)
    sample = GraphSample.from_micro(graph)
    label, probability = clf.predict_account(sample)
    print(json.dumps({
        "address": target,
        "label": label,
        "verdict": "ponzi" if label == 1 else "non-ponzi",
        "ponzi_probability": round(probability, 6),
    }))


def cmd_run(args):
    config = load_experiment_config(args.config)
    if args.out:
        config.out_dir = args.out
    out = run_experiment(config)
    print(f"run directory: {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponziwarn",
        description="Early warning for Ethereum Ponzi contracts from bytecode "
                    "and transaction graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and summarize a labeled dataset")
    _add_data_args(p)
    p.add_argument("--out", help="write a JSON manifest here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("teaug-stats", help="per-scale graph statistics after TEAug")
    _add_data_args(p)
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_teaug_stats)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--n-ponzi", type=int, default=75)
    p.add_argument("--n-normal", type=int, default=325)
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one method and save its checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("code", "trans", "dual_nomlp", "dual"))
    p.add_argument("--out", help="override the config out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="per-scale F1 of a checkpoint on the test split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--method", default="checkpoint")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("threshold", help="recommended reporting threshold from metrics.json")
    p.add_argument("--metrics", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--epsilon", type=float, default=0.005)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("predict", help="classify one account from bytecode + transactions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bytecode", required=True)
    p.add_argument("--transactions", required=True)
    p.add_argument("--address", help="target address (default: transaction file stem)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("run", help="full protocol: split, augment, train, evaluate, threshold")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config out_dir")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except BrokenPipeError:
        return 0
    except Exception as exc:  # CLI boundary: report and exit nonzero
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
