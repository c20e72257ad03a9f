"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

import argparse
import os
import sys

from .errors import ConfigError, DataError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="camofuse",
        description="Train, evaluate and probe the RGB-D camouflage segmentation model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    p.add_argument("--config", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--split", default=None)
    p.add_argument("--e-variant", choices=("mean", "adaptive"), default="mean")
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict", help="predict a single RGB/depth pair")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--depth", required=False, default=None)
    p.add_argument("--out", default="prediction.png")
    p.add_argument("--panel", action="store_true")

    p = sub.add_parser("ablate", help="run an ablation suite at fixture scale")
    p.add_argument("--suite", required=True,
                   choices=("table3", "table4", "table5", "table6"))
    p.add_argument("--config", required=True)
    p.add_argument("--train-steps", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gradcheck", help="finite-difference checks per block")
    p.add_argument("--config", required=True)
    p.add_argument("--max-coords", type=int, default=8)

    p = sub.add_parser("report", help="aggregate run CSVs into a comparison")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("fixture", help="generate the synthetic fixture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--count", type=int, default=12)
    p.add_argument("--seed", type=int, default=7)
    return parser


def _cmd_train(args):
    from .config import load_config
    from .train import train

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    summary = train(cfg)
    print(f"trained {summary['steps']} steps; "
          f"loss {summary['first_loss']:.5f} -> {summary['last_loss']:.5f}")
    print(f"checkpoints: {summary['best_checkpoint']} / {summary['last_checkpoint']}")
    return EXIT_OK


def _cmd_evaluate(args):
    from .config import load_config
    from .runner import evaluate_run

    cfg = load_config(args.config)
    evaluate_run(args.ckpt, cfg=cfg, data_root=args.data, split=args.split,
                 e_variant=args.e_variant, out_dir=args.out)
    return EXIT_OK


def _cmd_predict(args):
    from .runner import predict_single

    if args.depth is None:
        raise DataError(
            "no depth map given; generate one with an external monocular "
            "depth estimator and pass it via --depth"
        )
    out, panel = predict_single(args.ckpt, args.rgb, args.depth, args.out,
                                panel=args.panel)
    print(f"prediction written to {out}")
    if panel:
        print(f"panel written to {panel}")
    return EXIT_OK


def _cmd_ablate(args):
    from .ablation import run_suite
    from .config import load_config

    cfg = load_config(args.config)
    out_csv = args.out or os.path.join(cfg.output_dir, f"ablation_{args.suite}.csv")
    rows = run_suite(args.suite, cfg, train_steps=args.train_steps, out_csv=out_csv)
    bad = [r["variant"] for r in rows if r["status"] != "ok"]
    if bad:
        raise NumericError(f"non-finite variants: {bad}")
    print(f"suite {args.suite}: {len(rows)} variants ok; csv at {out_csv}")
    return EXIT_OK


def _cmd_gradcheck(args):
    from .config import load_config
    from .gradcheck import run_block_checks

    cfg = load_config(args.config)
    results = run_block_checks(config=cfg, max_coords=args.max_coords)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericError(f"gradient check failed for: {failed}")
    return EXIT_OK


def _cmd_report(args):
    from .report import collect_reports, format_comparison, write_comparison

    rows = collect_reports(args.runs)
    print(format_comparison(rows))
    out_dir = args.out or args.runs
    csv_path, png_path = write_comparison(rows, out_dir)
    print(f"written {csv_path} and {png_path}")
    return EXIT_OK


def _cmd_fixture(args):
    from .fixture import make_fixture_dataset

    base = make_fixture_dataset(args.out, split=args.split, count=args.count,
                                seed=args.seed)
    print(f"fixture dataset written under {base}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "ablate": _cmd_ablate,
    "gradcheck": _cmd_gradcheck,
    "report": _cmd_report,
    "fixture": _cmd_fixture,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
