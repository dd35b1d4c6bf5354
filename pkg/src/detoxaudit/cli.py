"""Command-line surface: analyze-audio, analyze-lyrics, compare, rewrite."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import lyrics as lyr
from . import providers, report
from .audio_io import AudioLoadError, PreprocessConfig, load_track, preprocess
from .dsp import frame_rms, rms_stats
from .voice import voice_report

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PROVIDER = 2
EXIT_INTERNAL = 3

ENV_CONFIG = "DETOX_CONFIG"


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise AudioLoadError(f"cannot read config {path}: {exc}") from exc


def _preprocess_cfg(args) -> PreprocessConfig:
    cfg = _load_config(getattr(args, "config", None))
    known = {f for f in PreprocessConfig.__dataclass_fields__}
    params = {k: v for k, v in cfg.items() if k in known}
    if getattr(args, "target_rate", None):
        params["target_rate"] = args.target_rate
    if getattr(args, "max_seconds", None):
        params["max_duration"] = args.max_seconds
    if getattr(args, "no_denoise", False):
        params["denoise"] = False
    return PreprocessConfig(**params)


def _providers(args):
    if args.offline:
        return providers.StubSentimentClassifier(), providers.StubEmbedder()
    return (
        providers.sentiment_client_from_env(),
        providers.embedding_client_from_env(),
    )


def cmd_analyze_audio(args) -> int:
    cfg = _preprocess_cfg(args)
    buf = preprocess(load_track(args.stem), cfg)
    metrics = voice_report(buf)
    out = metrics.as_dict()
    if args.percent:
        for key in ("jitter", "shimmer"):
            if out[key] is not None:
                out[key] *= 100
    out["rms"] = rms_stats(frame_rms(buf))
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_analyze_lyrics(args) -> int:
    text = Path(args.lyrics).read_text(encoding="utf-8")
    doc = lyr.parse_lyrics(text)
    classifier, _ = _providers(args)
    scores = lyr.score_document(doc, classifier)
    out = {
        "line_count": len(doc),
        "sentiment": lyr.sentiment_table(scores, doc),
        "ngrams": {
            f"{n}-gram": [
                {"gram": list(g), "count": c}
                for g, c in lyr.ngram_counts(doc, n).top(report.NGRAM_TOP_K)
            ]
            for n in (2, 3)
        },
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _preprocess_cfg(args)
    classifier, embedder = _providers(args)
    original = report.TrackBundle(
        args.original_stem, args.original_lyrics, args.artist, args.sections
    )
    transformed = report.TrackBundle(
        args.transformed_stem, args.transformed_lyrics, args.artist, args.sections
    )
    result = report.run_pipeline(
        original, transformed, cfg, classifier=classifier, embedder=embedder,
        out_path=args.out,
    )
    if args.emit:
        out_dir = Path(args.out).parent if args.out else Path(".")
        for kind in args.emit.split(","):
            kind = kind.strip()
            report.emit_plot_data(result, kind, out_dir / f"{args.artist}_{kind}.csv")
    if not args.out:
        json.dump(result, sys.stdout, indent=1, sort_keys=True)
        print()
    return EXIT_OK


def cmd_rewrite(args) -> int:
    text = Path(args.lyrics).read_text(encoding="utf-8")
    req = providers.RewriteRequest(text)
    client = providers.StubRewriter() if args.offline else providers.rewrite_client_from_env()
    print(client.rewrite(req))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detoxaudit",
        description="Before/after acoustic and lyric analysis of original vs transformed songs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help=f"config file path (or ${ENV_CONFIG})")
        p.add_argument("--target-rate", type=int, help="resample target rate (Hz)")
        p.add_argument("--max-seconds", type=float, help="truncate audio to this many seconds")
        p.add_argument("--no-denoise", action="store_true", help="skip spectral subtraction")

    p = sub.add_parser("analyze-audio", help="voice metrics for one vocal stem")
    p.add_argument("stem")
    p.add_argument("--sections", help="section sidecar file")
    p.add_argument("--percent", action="store_true", help="report jitter/shimmer as percent")
    add_common(p)
    p.set_defaults(func=cmd_analyze_audio)

    p = sub.add_parser("analyze-lyrics", help="sentiment and n-grams for one lyric file")
    p.add_argument("lyrics")
    p.add_argument("--offline", action="store_true", help="use deterministic stub providers")
    p.set_defaults(func=cmd_analyze_lyrics)

    p = sub.add_parser("compare", help="full original vs transformed comparison report")
    p.add_argument("--original-stem", required=True)
    p.add_argument("--original-lyrics", required=True)
    p.add_argument("--transformed-stem", required=True)
    p.add_argument("--transformed-lyrics", required=True)
    p.add_argument("--artist", default="track")
    p.add_argument("--sections")
    p.add_argument("--out", help="report JSON output path")
    p.add_argument("--offline", action="store_true")
    p.add_argument("--emit", help=f"comma list of plot kinds: {','.join(report.PLOT_KINDS)}")
    add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rewrite", help="send lyrics through the rewrite provider")
    p.add_argument("lyrics")
    p.add_argument("--offline", action="store_true")
    p.set_defaults(func=cmd_rewrite)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, OSError, AudioLoadError, report.StageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except providers.ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
