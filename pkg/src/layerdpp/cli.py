"""Command-line entry point: train, sample, synth and verify."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .clustering import default_num_communities, fluid_communities
from .config import SAMPLERS, ExperimentConfig, stream
from .gnn import init_params, save_checkpoint
from .graph import (
    EmptyCandidateSetError,
    Graph,
    GraphFormatError,
    build_bottleneck_graph,
    build_candidate_set,
    generate_sbm,
    load_dataset,
    random_split,
    save_graph,
)
from .training import sample_pass, summarize, train
from .verify import FULL_DRAWS, run_all

log = logging.getLogger("layerdpp")

# flag name -> config field
OVERRIDES = {
    "dataset_dir": str,
    "layers": int,
    "hidden": int,
    "lr": float,
    "epochs": int,
    "seed": int,
    "gamma": float,
    "k_fraction": float,
    "central_fraction": float,
    "Q": int,
    "P": int,
    "mu_init": float,
    "metrics_every": int,
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    for name, typ in OVERRIDES.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--sampler", choices=SAMPLERS, default=None)
    p.add_argument("--cls-multipliers", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma-separated cluster-count multipliers, e.g. 1,5")
    p.add_argument("--train-mu", dest="train_mu", action="store_true", default=None)
    p.add_argument("--freeze-mu", dest="train_mu", action="store_false")


def load_config(args) -> ExperimentConfig:
    overrides = {name: getattr(args, name) for name in OVERRIDES}
    overrides["sampler"] = args.sampler
    overrides["cls_multipliers"] = args.cls_multipliers
    overrides["train_mu"] = args.train_mu
    if getattr(args, "dump_samples", False):
        overrides["dump_samples"] = True
    if args.config is not None and not args.config.exists():
        raise GraphFormatError(f"{args.config}: config file not found")
    return ExperimentConfig.from_json(args.config, **overrides)


def _load_graph(config: ExperimentConfig) -> Graph:
    if not config.dataset_dir:
        raise GraphFormatError("no dataset_dir given (set it in the config or pass --dataset-dir)")
    return load_dataset(config.dataset_dir)


def _run_dir(root: Path, seed: int) -> Path:
    base = root / f"{time.strftime('%Y%m%d-%H%M%S')}-seed{seed}"
    path, n = base, 1
    while path.exists():
        n += 1
        path = base.with_name(f"{base.name}-{n}")
    path.mkdir(parents=True)
    return path


def cmd_train(args) -> int:
    config = load_config(args)
    g = _load_graph(config)
    result = train(g, config)
    out = _run_dir(args.out_dir, config.seed)
    with open(out / "history.jsonl", "w") as fh:
        for rec in result.history:
            fh.write(json.dumps(rec) + "\n")
    save_checkpoint(out / "checkpoint.json", result.params, config.epochs, config.seed)
    summary = summarize(result, config)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if config.dump_samples:
        with open(out / "samples.jsonl", "w") as fh:
            for epoch, records in enumerate(result.records):
                for layer, rec in records:
                    fh.write(json.dumps({"epoch": epoch, "layer": layer + 1, **rec.to_json()}) + "\n")
    acc = summary["test_acc"]
    ovr = summary["ovr"]["ovr_node"]
    print(f"run: {out}")
    print(f"test_acc={acc if acc is None else f'{acc:.4f}'} "
          f"ovr_node={ovr if ovr is None else f'{ovr:.4f}'} mu={summary['mu']:.4f}")
    return 0


def cmd_sample(args) -> int:
    config = load_config(args)
    g = _load_graph(config)
    i = args.node
    if not 0 <= i < g.num_nodes:
        print(f"error: node {i} out of range for {g.num_nodes} nodes", file=sys.stderr)
        return 2
    try:
        s = build_candidate_set(g, i, config.P, stream(config.seed, "candidates", i))
    except EmptyCandidateSetError:
        print(f"node {i}: skipped (empty candidate set)")
        return 0
    params = init_params(g.num_features, config.hidden, max(g.num_classes, 1), config.layers,
                         stream(config.seed, "init"), config.mu_init)
    comm = fluid_communities(g, config.Q or default_num_communities(g), stream(config.seed, "communities", 0))
    _, records = sample_pass(params, g, comm, {i: s}, config, 0,
                             layer_diverse=config.sampler != "independent")
    print(f"node {i}: {len(s)} candidates (P={config.P}): {list(s.members)}")
    for layer, rec in records:
        eig = " ".join(f"{x:.6g}" for x in rec.eigenvalues) or "(not decomposed: all members taken)"
        print(f"layer {layer + 1} eigenvalues: {eig}")
        print(f"layer {layer + 1} squeezed rows: {rec.squeezed_rows}")
        print(f"layer {layer + 1} samples: {list(rec.sampled)}")
    return 0


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def cmd_synth(args) -> int:
    split = _parse_floats(args.split)
    if len(split) != 3 or any(x < 0 for x in split) or abs(sum(split) - 1.0) > 1e-9:
        print("error: --split needs three non-negative ratios summing to 1", file=sys.stderr)
        return 2
    blocks = [args.block_size] * args.num_blocks
    if args.kind == "bottleneck" and args.base is not None:
        base = load_dataset(args.base)
    else:
        base = generate_sbm(blocks, args.p_in, args.p_out, args.feature_dim,
                            stream(args.seed, "graph-gen"), split=split, noise=args.noise)
    if args.kind == "sbm":
        g = base
    else:
        res = build_bottleneck_graph(base, args.Q, stream(args.seed, "bottleneck"))
        g0 = res.graph
        splits = random_split(g0.labels, split, stream(args.seed, "split"))
        g = Graph.from_edges(g0.num_nodes, g0.edges(), g0.features, g0.labels, splits)
        print(f"removed {len(res.removed)} nodes; inter-community edges: {len(res.inter_community_edges())}")
    save_graph(g, args.out)
    print(f"wrote {args.out}: {g.num_nodes} nodes, {g.num_edges} edges, "
          f"{g.num_features} features, {g.num_classes} classes")
    return 0


def cmd_verify(args) -> int:
    results = run_all(seed=args.seed, draws=args.draws, fast=args.fast)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layerdpp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a run directory")
    _add_config_args(p)
    p.add_argument("--out-dir", type=Path, default=Path("runs"))
    p.add_argument("--dump-samples", action="store_true", help="write per-node sample records")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="show candidates, eigenvalues and samples for one node")
    _add_config_args(p)
    p.add_argument("--node", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("sbm", "bottleneck"), required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-blocks", type=int, default=6)
    p.add_argument("--block-size", type=int, default=50)
    p.add_argument("--p-in", type=float, default=0.2)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--split", default="0.1,0.2,0.7", help="train,val,test ratios")
    p.add_argument("--base", type=Path, default=None, help="dataset to cut (bottleneck only)")
    p.add_argument("--Q", type=int, default=2, help="communities for the bottleneck cut")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("--fast", action="store_true", help="fewer draws and fixtures")
    p.add_argument("--draws", type=int, default=FULL_DRAWS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GraphFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
