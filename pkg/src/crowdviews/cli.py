"""Command-line entry point: generate, simulate, train, eval, export, serve.

Every command is deterministic given its flags and input files (train
additionally honors --deterministic), never mutates its inputs, exits 0
on success and prints a single `error: ...` line to stderr otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import crowdsim, evaluation, model, trainer
from .errors import CrowdviewsError
from .server import make_server


def _cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = crowdsim.generate_corpus(
        args.seed, args.items_per_category, height=args.height, width=args.width
    )
    crowdsim.save_manifest(manifest, out / "manifest.txt")
    items_dir = out / "items"
    items_dir.mkdir(exist_ok=True)
    for record in manifest.records:
        pixels = crowdsim.render_item(manifest, record)
        img = Image.fromarray(np.round(pixels * 255).astype(np.uint8))
        img.save(items_dir / f"{record.item_id}.png")
    print(f"wrote {len(manifest.records)} items to {out}")
    return 0


def _cmd_simulate(args) -> int:
    manifest = crowdsim.load_manifest(args.manifest)
    workers = crowdsim.setting_workers(args.setting)
    triplets = crowdsim.sample_triplets(
        manifest, workers, args.n_per_worker, args.seed, split=args.split
    )
    crowdsim.write_triplets(triplets, args.out)
    print(f"wrote {len(triplets)} triplets ({len(workers)} workers) to {args.out}")
    return 0


def _first_seen_workers(triplets) -> list:
    seen = []
    known = set()
    for t in triplets:
        if t.worker not in known:
            known.add(t.worker)
            seen.append(t.worker)
    return seen


def _cmd_train(args) -> int:
    manifest = crowdsim.load_manifest(args.manifest)
    triplets = crowdsim.read_triplets(args.triplets)
    items = crowdsim.render_items(manifest)
    config = model.EncoderConfig(
        height=manifest.height,
        width=manifest.width,
        channels=3,
        trunk_hidden=tuple(int(w) for w in args.trunk.split(",")),
        embed_dim=args.dim,
        num_views=args.views,
        activation=args.activation,
        seed=args.seed,
    )
    workers = _first_seen_workers(triplets)
    params = model.init_params(config, len(workers), seed=args.seed, worker_ids=workers)
    cfg = trainer.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
        use_entropy=not args.no_entropy,
        entropy_stop_gradient=args.entropy_stop_grad,
        deterministic=args.deterministic,
        checkpoint_every=args.checkpoint_every,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(epoch, loss):
        print(f"epoch {epoch + 1}/{cfg.epochs} loss {loss:.6f}", flush=True)

    trained, history = trainer.train(
        params, config, items, triplets, cfg, progress=progress, checkpoint_dir=str(out)
    )
    model.save_checkpoint(trained, config, out / "checkpoint-final.txt")
    trainer.save_loss_log(history, out / "loss.log")
    print(f"final loss {history[-1]:.6f}" if history else "no epochs run")
    return 0


def _cmd_eval(args) -> int:
    params, config = model.load_checkpoint(args.checkpoint)
    manifest = crowdsim.load_manifest(args.manifest)
    triplets = crowdsim.read_triplets(args.triplets) if args.triplets else None
    metrics = (
        evaluation.ALL_METRICS if args.metrics == "all" else tuple(args.metrics.split(","))
    )
    unknown = set(metrics) - set(evaluation.ALL_METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    report = evaluation.evaluate_model(
        params,
        config,
        manifest,
        triplets=triplets,
        metrics=metrics,
        anchors_k=args.anchors_k,
        seed=args.seed,
        use_entropy=not args.no_entropy,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval-report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "eval-report.json").write_text(report.to_json(), encoding="utf-8")
    print(report.to_text(), end="")
    return 0


def _cmd_export(args) -> int:
    params, config = model.load_checkpoint(args.checkpoint)
    manifest = crowdsim.load_manifest(args.manifest)
    evaluation.export_embeddings(params, config, manifest, args.out, split=args.split)
    print(f"wrote embeddings to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    manifest = crowdsim.load_manifest(args.manifest)
    httpd = make_server(
        manifest, args.answers_out, port=args.port, seed=args.seed, ui_dir=args.ui_dir
    )
    print(f"serving on http://127.0.0.1:{httpd.server_address[1]}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.state.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdviews",
        description="Multiview embeddings from crowdsourced triplet comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a colored-digit corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items-per-category", type=int, default=2)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("simulate", help="sample triplets from simulated workers")
    p.add_argument("--setting", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n-per-worker", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the multiview encoder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--triplets", required=True)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--trunk", default="256,64", help="hidden widths, comma-separated")
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-entropy", action="store_true")
    p.add_argument("--entropy-stop-grad", action="store_true")
    p.add_argument("--deterministic", action="store_true", default=True)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run the metric suite on a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--triplets", default=None)
    p.add_argument("--metrics", default="all")
    p.add_argument("--anchors-k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-entropy", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export", help="write embeddings for external analysis")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test"), default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="run the annotation task server")
    p.add_argument("--manifest", required=True)
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--answers-out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CrowdviewsError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
