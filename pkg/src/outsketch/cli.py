"""Command-line entry points: train, evaluate, serve, and synthetic-corpus
generation."""

import argparse
import json
import logging

from .generator import get_scale


def _cmd_train(args):
    from .data import load_corpus
    from .training import TrainConfig, train

    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    corpus = load_corpus(args.data, get_scale(cfg.scale).full_hw)
    path = train(cfg, corpus, args.out, resume=args.resume)
    print(f"final checkpoint: {path}")
    return 0


def _cmd_evaluate(args):
    from .data import load_corpus
    from .evaluation import evaluate_rebuild, get_extractor
    from .training import load_checkpoint, restore_models

    ckpt = load_checkpoint(args.ckpt)
    models, _, cfg = restore_models(ckpt)
    corpus = load_corpus(args.data, get_scale(cfg.scale).full_hw)
    report = evaluate_rebuild(models["generator"], corpus, models["detector"],
                              extractor=get_extractor(args.extractor))
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(json.dumps(report))
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint=args.ckpt, ratings_path=args.ratings)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_synth(args):
    from .data import save_corpus, synth_corpus

    images = synth_corpus(args.count, args.height, args.width, seed=args.seed)
    paths = save_corpus(images, args.out)
    print(f"wrote {len(paths)} scenes to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="outsketch",
                                     description="sketch-guided scenery outpainting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the adversarial training loop")
    p.add_argument("--config", help="JSON config file (defaults omitted -> full scale)")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="rebuild-protocol metrics for a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--extractor", default="pool-proj")
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("serve", help="HTTP inference service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ratings", default="ratings.csv")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("synth", help="write a procedural scenery corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=128)
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
