"""Command-line interface.

Machine-readable JSON goes to stdout; human summaries and errors go to
stderr. Exit codes: 0 success, 1 internal failure, 2 usage or parse/IO error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import numcore as nc
from .backbone import BackboneConfig
from .bench import (
    FixtureError,
    JudgeEndpointConfig,
    judge_metadata,
    load_bench,
    load_predictions,
    make_llm_judge,
    mock_judge,
    score_run,
    write_report,
)
from .captioner import (
    CaptionerConfig,
    Vocab,
    build_prompts,
    greedy_decode,
    init_captioner_params,
    load_dataset,
    train_toy,
)
from .geometry import (
    EmptyMaskError,
    InvalidBoxError,
    PixelBox,
    build_focal_prompt,
    expand_box,
)
from .numcore import CheckpointError, grad_check, load_into, save_checkpoint
from .pipeline import (
    PipelineConfig,
    emit_training_set,
    load_manifest,
    stage2_selftrain,
    synthetic_describer,
    synthetic_scorer,
    write_rejections_csv,
)


class UsageError(ValueError):
    """Malformed flag values or unusable input files."""


def _eprint(*args) -> None:
    print(*args, file=sys.stderr)


def _parse_box(text: str) -> PixelBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--box expects x0,y0,x1,y1, got {text!r}")
    try:
        x0, y0, x1, y1 = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--box expects four integers, got {text!r}") from None
    try:
        return PixelBox(x0, y0, x1, y1)
    except InvalidBoxError as e:
        raise UsageError(str(e)) from None


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise UsageError(f"--image-size expects WxH, got {text!r}")
    try:
        w, h = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"--image-size expects integers, got {text!r}") from None
    if w < 1 or h < 1:
        raise UsageError(f"--image-size must be positive, got {text!r}")
    return w, h


def _load_config(path: str | None) -> CaptionerConfig:
    if path is None:
        return CaptionerConfig()
    try:
        return CaptionerConfig.load(path)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad config {path}: {e}") from None


def cmd_expand_box(args) -> int:
    box = _parse_box(args.box)
    w, h = _parse_size(args.image_size)
    try:
        out = expand_box(box, args.alpha, w, h, args.min_side)
    except InvalidBoxError as e:
        raise UsageError(str(e)) from None
    print(json.dumps(out.as_dict()))
    return 0


def cmd_train_toy(args) -> int:
    nc.set_mode(args.mode)
    config = _load_config(args.config)
    vocab = Vocab.load(args.vocab) if args.vocab else Vocab.default()
    dataset = load_dataset(args.dataset, vocab)
    if not dataset:
        raise UsageError(f"dataset {args.dataset} is empty")
    result = train_toy(
        dataset,
        config,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        vocab_size=len(vocab),
        max_steps=args.max_steps,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, result.params.params())
    meta = {
        "config": json.loads(config.to_json()),
        "vocab": vocab.tokens,
        "seed": args.seed,
        "lr": args.lr,
        "epochs": args.epochs,
    }
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    history = [h.__dict__ for h in result.history]
    if not args.no_figure:
        from .figures import render_training_figure

        render_training_figure(result.history, out.with_suffix(".png"))
    last = result.history[-1]
    _eprint(f"trained {last.steps} steps: loss {last.loss:.4f}, accuracy {last.token_accuracy:.3f}")
    print(json.dumps({"checkpoint": str(out), "history": history}))
    return 0


def cmd_describe(args) -> int:
    from .imageio import load_mask_rle, load_ppm

    meta_path = Path(str(args.ckpt) + ".meta.json")
    if not meta_path.exists():
        raise UsageError(f"missing checkpoint metadata {meta_path}")
    meta = json.loads(meta_path.read_text())
    config = CaptionerConfig.from_json(json.dumps(meta["config"]))
    vocab = Vocab(meta["vocab"])
    params = init_captioner_params(len(vocab), config, seed=0)
    load_into(params.params(), args.ckpt)
    image = load_ppm(args.image)
    mask = load_mask_rle(args.mask)
    from .backbone import forward

    prompt = build_focal_prompt(image, mask, config.alpha, config.min_side, config.backbone.enc_res)
    with nc.no_grad():
        vision = forward(prompt, params.backbone, config.backbone)
    ids = greedy_decode(vision, params.decoder, config, max_len=args.max_len)
    words = vocab.decode(ids)
    content = [w for w in words if not w.startswith("<")]
    print(json.dumps({"token_ids": ids, "tokens": words, "caption": " ".join(content)}))
    return 0


def cmd_gradcheck(args) -> int:
    from .captioner import sample_loss
    from .synthetic import build_color_task, to_caption_samples

    config = _load_config(args.config)
    vocab = Vocab.default()
    samples = to_caption_samples(build_color_task(1, seed=args.seed), vocab)
    prompts = build_prompts(samples, config)
    params = init_captioner_params(len(vocab), config, args.seed)

    def f():
        return sample_loss(prompts[0], samples[0].target, params, config)

    report = grad_check(
        f,
        params.params(),
        h=1e-5,
        tol=args.tol,
        max_entries_per_param=args.entries,
        seed=args.seed,
    )
    _eprint(report.summary())
    print(
        json.dumps(
            {
                "max_rel_err": report.max_rel_err,
                "tol": report.tol,
                "passed": report.passed,
                "worst_param": report.worst_param,
                "checked_entries": sum(p.checked for p in report.params),
            }
        )
    )
    return 0 if report.passed else 1


def cmd_bench_score(args) -> int:
    bench = load_bench(args.bench)
    predictions = load_predictions(args.predictions)
    if args.judge == "mock":
        judge = mock_judge
        meta = judge_metadata("mock")
    else:
        if not args.judge_url:
            raise UsageError("--judge-url is required with --judge http")
        cfg = JudgeEndpointConfig(url=args.judge_url, model=args.judge_model)
        judge = make_llm_judge(cfg)
        meta = judge_metadata("http", cfg)
    report = score_run(predictions, bench, judge, workers=args.workers, judge_meta=meta)
    paths = write_report(report, args.report, figure=not args.no_figure)
    unanswered = sum(q.unanswered for r in report.regions for q in r.questions)
    _eprint(
        f"scored {len(report.regions)} regions: pos {report.pos_pct:.1f}% "
        f"neg {report.neg_pct:.1f}% avg {report.avg_pct:.1f}% ({unanswered} unanswered)"
    )
    print(
        json.dumps(
            {
                "pos_pct": report.pos_pct,
                "neg_pct": report.neg_pct,
                "avg_pct": report.avg_pct,
                "unanswered": unanswered,
                "report": {k: str(v) for k, v in paths.items()},
            }
        )
    )
    return 0


def cmd_pipeline(args) -> int:
    manifest = load_manifest(args.manifest)
    config = PipelineConfig(conf_threshold=args.threshold, class_name_prob=args.class_name_prob)
    accepted, rejections = stage2_selftrain(
        manifest, synthetic_describer, synthetic_scorer, config
    )
    out = Path(args.out)
    emit_training_set(accepted, out, config.class_name_prob, args.seed)
    rej_path = write_rejections_csv(rejections, Path(str(out) + ".rejections.csv"))
    if not args.no_figure:
        from .figures import render_pipeline_figure

        render_pipeline_figure(len(accepted), rejections, out.with_suffix(".png"))
    _eprint(f"accepted {len(accepted)} regions, rejected {len(rejections)}")
    print(
        json.dumps(
            {
                "accepted": len(accepted),
                "rejected": len(rejections),
                "out": str(out),
                "rejections": str(rej_path),
            }
        )
    )
    return 0


def cmd_make_toy_data(args) -> int:
    from .synthetic import build_color_task, write_dataset

    vocab = Vocab.default()
    raw = build_color_task(args.n, args.seed)
    jsonl = write_dataset(raw, args.out, vocab)
    _eprint(f"wrote {args.n} samples under {args.out}")
    print(json.dumps({"dataset": str(jsonl), "vocab": str(Path(args.out) / 'vocab.json')}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="damkit",
        description="Localized-captioning toolkit: geometry, encoders, toy training, "
        "benchmark scoring, data pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand-box", help="grow a box with boundary clipping and a minimum side")
    p.add_argument("--box", required=True, help="x0,y0,x1,y1 (half-open integer pixels)")
    p.add_argument("--image-size", required=True, help="WxH image bounds")
    p.add_argument("--alpha", type=float, default=3.0, help="per-axis growth factor (default 3)")
    p.add_argument("--min-side", type=int, default=48, help="minimum output side (default 48)")
    p.set_defaults(func=cmd_expand_box)

    p = sub.add_parser("train-toy", help="train the toy captioner on a JSONL dataset")
    p.add_argument("--dataset", required=True, help="dataset JSONL path")
    p.add_argument("--vocab", default=None, help="vocab JSON (default: built-in vocabulary)")
    p.add_argument("--config", default=None, help="captioner config JSON (default: toy config)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-steps", type=int, default=None, help="stop after this many optimizer steps")
    p.add_argument("--mode", choices=["check", "train"], default="check",
                   help="numeric mode: check=float64, train=float32")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--no-figure", action="store_true", help="skip the training-curves PNG")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("describe", help="greedy-decode a caption for an image + mask")
    p.add_argument("--ckpt", required=True, help="checkpoint written by train-toy")
    p.add_argument("--image", required=True, help="PPM image")
    p.add_argument("--mask", required=True, help="RLE mask JSON")
    p.add_argument("--max-len", type=int, default=8)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("gradcheck", help="finite-difference check of end-to-end gradients")
    p.add_argument("--config", default=None, help="captioner config JSON (default: toy config)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--entries", type=int, default=32,
                   help="max coordinates probed per parameter (default 32)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench-score", help="score predictions against a benchmark file")
    p.add_argument("--bench", required=True, help="benchmark JSON")
    p.add_argument("--predictions", required=True, help="JSON map region_id -> description")
    p.add_argument("--judge", choices=["mock", "http"], default="mock")
    p.add_argument("--judge-url", default=None, help="chat-completions endpoint (http judge)")
    p.add_argument("--judge-model", default="judge", help="model name sent to the endpoint")
    p.add_argument("--workers", type=int, default=1, help="parallel judge workers")
    p.add_argument("--report", required=True, help="report JSON output path")
    p.add_argument("--no-figure", action="store_true", help="skip the score-summary PNG")
    p.set_defaults(func=cmd_bench_score)

    p = sub.add_parser("pipeline", help="stage-2 self-training filter over a proposal manifest")
    p.add_argument("--manifest", required=True, help="JSONL of images and proposed regions")
    p.add_argument("--threshold", type=float, default=0.5, help="confidence threshold")
    p.add_argument("--class-name-prob", type=float, default=0.5,
                   help="probability a sample prompt mentions the class keyword")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output JSONL of accepted training samples")
    p.add_argument("--no-figure", action="store_true", help="skip the filtering-outcome PNG")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("make-toy-data", help="generate the colored-squares dataset on disk")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=48)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_make_toy_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        _eprint(f"error: {e}")
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        _eprint(f"error: {e}")
        return 2
    except (json.JSONDecodeError, FixtureError, CheckpointError, InvalidBoxError, EmptyMaskError) as e:
        _eprint(f"error: {e}")
        return 2
    except Exception as e:  # internal failure
        _eprint(f"internal error: {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
