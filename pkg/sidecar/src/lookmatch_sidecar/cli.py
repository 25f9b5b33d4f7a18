"""lookmatch-sidecar: produce embedding blocks and garment metadata files.

Mock mode (--mock) needs no endpoint and is deterministic given --seed; live
mode reads LOOKMATCH_SIDECAR_ENDPOINT / LOOKMATCH_SIDECAR_TOKEN.
"""

from __future__ import annotations

import argparse
import sys

from .jobs import (
    DEFAULT_CONFIDENCE,
    DEFAULT_DIM,
    DEFAULT_MAX_WORDS,
    SidecarJob,
    run_describe,
    run_detect,
    run_embed_crops,
    run_embed_images,
    run_embed_texts,
    run_mock_all,
)
from .live import EndpointFailure


def _job(args: argparse.Namespace) -> SidecarJob:
    return SidecarJob(
        output=args.output,
        seed=args.seed,
        dim=getattr(args, "dim", DEFAULT_DIM),
        mock=args.mock,
        model=args.model,
        max_words=getattr(args, "max_words", DEFAULT_MAX_WORDS),
        confidence_threshold=getattr(args, "confidence_threshold", DEFAULT_CONFIDENCE),
    )


def cmd_describe(args):
    n = len(run_describe(_job(args), args.corpus))
    print(f"wrote {n} descriptions to {args.output}")
    return 0


def cmd_detect(args):
    n = len(run_detect(_job(args), args.corpus, args.descriptions))
    print(f"wrote {n} boxes to {args.output}")
    return 0


def cmd_embed_images(args):
    n = run_embed_images(_job(args), args.corpus, args.role)
    print(f"wrote {n} {args.role} image vectors to {args.output}")
    return 0


def cmd_embed_texts(args):
    n = run_embed_texts(_job(args), args.descriptions)
    print(f"wrote {n} text vectors to {args.output}")
    return 0


def cmd_embed_crops(args):
    n = run_embed_crops(_job(args), args.corpus, args.boxes)
    print(f"wrote {n} crop vectors to {args.output}")
    return 0


def cmd_mock_all(args):
    paths = run_mock_all(args.output, args.queries, args.gallery, args.seed, args.dim)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def _common(p, output=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mock", action="store_true", help="deterministic mode, no endpoint")
    p.add_argument("--model", default="mock", help="model identifier sent to the endpoint")
    if output:
        p.add_argument("-o", "--output", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lookmatch-sidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="garment descriptions per gallery image")
    p.add_argument("--corpus", required=True, help="gallery manifest")
    p.add_argument("--max-words", type=int, default=DEFAULT_MAX_WORDS)
    _common(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("detect", help="bounding boxes guided by descriptions")
    p.add_argument("--corpus", required=True, help="gallery manifest")
    p.add_argument("--descriptions", required=True)
    p.add_argument("--confidence-threshold", type=float, default=DEFAULT_CONFIDENCE)
    _common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("embed-images", help="full-image embedding block")
    p.add_argument("--corpus", required=True)
    p.add_argument("--role", required=True, choices=["query", "gallery"])
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    _common(p)
    p.set_defaults(func=cmd_embed_images)

    p = sub.add_parser("embed-texts", help="description embedding block")
    p.add_argument("--descriptions", required=True)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    _common(p)
    p.set_defaults(func=cmd_embed_texts)

    p = sub.add_parser("embed-crops", help="crop embedding block")
    p.add_argument("--corpus", required=True)
    p.add_argument("--boxes", required=True)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    _common(p)
    p.set_defaults(func=cmd_embed_crops)

    p = sub.add_parser("mock-all", help="every mock artifact in one pass")
    p.add_argument("--queries", required=True, help="query manifest")
    p.add_argument("--gallery", required=True, help="gallery manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_mock_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EndpointFailure as exc:
        print(f"endpoint error: {exc} (attempts per batch: {exc.attempts})", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
