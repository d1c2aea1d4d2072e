"""Command line: score landmark/view pairs, then derive training stats.

    clip-extractor score --landmarks landmarks.txt --views views.jsonl \
        --out raw_scores.jsonl [--model toy-color-v1] [--skip-manifest skipped.jsonl]
    clip-extractor stats --raw raw_scores.jsonl --out stats.jsonl
"""

from __future__ import annotations

import argparse
import sys

from .embedder import TOY_MODEL_ID
from .scoring import (compute_stats, load_landmarks, load_raw_scores,
                      load_views_manifest, score_views, store_raw_scores,
                      store_skip_manifest, store_stats)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clip-extractor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every landmark against every view")
    p.add_argument("--landmarks", required=True, help="text file, one landmark per line")
    p.add_argument("--views", required=True, help="JSON-lines views manifest")
    p.add_argument("--model", default=TOY_MODEL_ID)
    p.add_argument("--out", required=True, help="raw scores JSON-lines output")
    p.add_argument("--skip-manifest", help="where to record undecodable views")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="per-landmark mean/std over training scores")
    p.add_argument("--raw", required=True, help="raw scores JSON-lines input")
    p.add_argument("--out", required=True, help="stats JSON-lines output")
    p.set_defaults(func=cmd_stats)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_score(args) -> int:
    landmarks = load_landmarks(args.landmarks)
    views = load_views_manifest(args.views)
    scores, skipped = score_views(landmarks, views, args.model)
    store_raw_scores(scores, args.out)
    if args.skip_manifest:
        store_skip_manifest(skipped, args.skip_manifest)
    print(f"scored {len(landmarks)} landmarks x {len(views) - len(skipped)} views "
          f"-> {len(scores)} rows ({len(skipped)} views skipped)")
    return 0


def cmd_stats(args) -> int:
    scores = load_raw_scores(args.raw)
    stats = compute_stats(scores)
    store_stats(stats, args.out)
    print(f"statistics for {len(stats)} landmarks -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
