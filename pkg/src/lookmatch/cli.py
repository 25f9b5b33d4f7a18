"""lookmatch command line: every pipeline stage as a subcommand.

Subcommands: embed-check, score, calibrate, standardize, retrieve, fuse,
eval (recall | corr | curve), curate, sample, pipeline. All artifacts are
plain files in the formats each module documents, so any stage can be run,
inspected, or re-run in isolation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .blocks import check_block, read_block
from .channels import (
    CHANNELS,
    aggregate_i2i,
    read_table,
    score_bb2i,
    score_fi2i,
    score_t2i,
    write_table,
)
from .config import load_config
from .corpus import load_corpus
from .curation import (
    build_manifest,
    draw_annotation_samples,
    form_pairs,
    read_manifest,
    write_annotation_tasks,
    write_manifest,
)
from .errors import LookmatchError
from .evaluation import (
    correlation_matrix,
    format_correlation_heatmap,
    load_annotations,
    load_ground_truth,
    quality_curve,
    ranking_from_candidates,
    ranking_from_table,
    recall_at_k,
)
from .fusion import MODE_SECOND_HIGHEST, fuse_mean, fuse_second_highest, read_spec
from .pipeline import run_pipeline
from .retrieval import (
    BrandFilter,
    build_candidates,
    read_candidates,
    write_candidates,
)
from .standardize import calibrate, read_stats, standardize, write_stats

log = logging.getLogger("lookmatch")


def _ints(csv: str) -> list[int]:
    return [int(v) for v in csv.split(",") if v]


def cmd_embed_check(args: argparse.Namespace) -> int:
    info = check_block(args.path)
    print(f"{info['path']}: ok kind={info['kind']} dim={info['dim']} rows={info['rows']}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    queries = read_block(args.queries)
    gallery = read_block(args.gallery)
    universe = None
    if args.universe:
        universe = read_block(args.universe).ids()
    if args.channel == "fi2i":
        table = score_fi2i(queries, gallery)
    elif args.channel == "t2i":
        table = score_t2i(queries, gallery, universe)
    elif args.channel == "bb2i":
        table = score_bb2i(queries, gallery, universe)
    else:  # i2i
        if not args.aux:
            raise LookmatchError("channel i2i needs --aux <gallery_bbox block>")
        crops = read_block(args.aux)
        fi2i = score_fi2i(queries, gallery)
        bb2i = score_bb2i(queries, crops, gallery.ids())
        table = aggregate_i2i(fi2i, bb2i)
    if args.model:
        table.model = args.model
    write_table(table, args.output)
    log.info("wrote %s (%d entries, %s)", args.output, len(table), table.completeness)
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    table = read_table(args.input)
    stats = calibrate(table, args.sample_size, args.seed)
    write_stats(stats, args.output)
    print(
        f"{stats.model}: mu={stats.mu:.6g} sigma={stats.sigma:.6g} "
        f"n={stats.sample_size} seed={stats.seed}"
    )
    return 0


def cmd_standardize(args: argparse.Namespace) -> int:
    table = read_table(args.input)
    stats = read_stats(args.stats)
    write_table(standardize(table, stats), args.output)
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    queries = read_block(args.queries)
    gallery = read_block(args.gallery)
    blocks = {"gallery_image": gallery}
    if args.aux:
        aux = read_block(args.aux)
        blocks[aux.kind] = aux
    filt = None
    query_records = gallery_records = None
    if not args.no_brand_filter:
        if not args.corpus:
            raise LookmatchError("brand filtering needs --corpus <queries.tsv> <gallery.tsv>")
        filt = BrandFilter(threshold=args.brand_threshold)
        query_records = load_corpus(args.corpus[0], "query")
        gallery_records = load_corpus(args.corpus[1], "gallery")
    lists = build_candidates(
        queries,
        blocks,
        [args.channel],
        args.k,
        filt=filt,
        query_records=query_records,
        gallery_records=gallery_records,
        workers=args.workers,
    )
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.channel}.tsv"
    write_candidates(lists, path)
    log.info("wrote %s (%d candidate lists)", path, len(lists))
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    spec = read_spec(args.spec)
    tables = [read_table(p) for p in args.inputs]
    if spec.mode == MODE_SECOND_HIGHEST:
        fused = fuse_second_highest(tables, spec)
    else:
        fused = fuse_mean(tables, spec)
    write_table(fused, args.output)
    log.info("fused %d tables into %s (%d pairs)", len(tables), args.output, len(fused))
    return 0


def _load_ranking(path: str) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#query="):
        return ranking_from_candidates(read_candidates(path))
    return ranking_from_table(read_table(path))


def cmd_eval_recall(args: argparse.Namespace) -> int:
    ranking = _load_ranking(args.ranking)
    truth = load_ground_truth(args.truth)
    ks = _ints(args.k)
    results = [(k, recall_at_k(ranking, truth, k)) for k in ks]
    print(f"{'K':>6}  {'recall':>8}")
    for k, r in results:
        print(f"{k:>6}  {100.0 * r:>7.1f}%")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#metric=recall\ttruth={args.truth}\n")
            for k, r in results:
                fh.write(f"{k}\t{r:.9g}\n")
    return 0


def cmd_eval_corr(args: argparse.Namespace) -> int:
    tables = [read_table(p) for p in args.inputs]
    names = [t.model for t in tables]
    mat = correlation_matrix(tables, args.sample, args.seed)
    print(format_correlation_heatmap(names, mat), end="")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#metric=spearman\tsample={args.sample}\tseed={args.seed}\n")
            for i in range(len(names)):
                for j in range(len(names)):
                    fh.write(f"{names[i]}\t{names[j]}\t{mat[i, j]:.9g}\n")
    return 0


def cmd_eval_curve(args: argparse.Namespace) -> int:
    annotations = load_annotations(args.annotations)
    probes = _ints(args.probes)
    points = quality_curve(annotations, probes)
    print(f"{'probe':>9}  {'matches':>8}  {'n':>5}")
    for pt in points:
        print(f"{pt.probe_index:>9}  {100.0 * pt.match_fraction:>7.1f}%  {pt.total:>5}")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("#metric=quality_curve\n")
            for pt in points:
                fh.write(f"{pt.probe_index}\t{pt.match_fraction:.9g}\t{pt.total}\n")
    return 0


def cmd_curate(args: argparse.Namespace) -> int:
    fused = read_table(args.fused)
    cutoffs = tuple(_ints(args.cutoffs))
    if len(cutoffs) != 3:
        raise LookmatchError("--cutoffs needs exactly three values")
    manifest = build_manifest(form_pairs(fused), cutoffs)  # type: ignore[arg-type]
    write_manifest(manifest, args.output)
    log.info("wrote %s (%d pairs)", args.output, len(manifest))
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    draw = draw_annotation_samples(manifest, _ints(args.probes), args.per_probe, args.seed)
    queries = {r.id: r for r in load_corpus(args.queries_manifest, "query")}
    gallery = {r.id: r for r in load_corpus(args.gallery_manifest, "gallery")}
    write_annotation_tasks(draw, queries, gallery, args.output)
    for probe in draw.skipped_probes:
        print(f"probe {probe}: beyond manifest length, skipped")
    for probe, avail in sorted(draw.short_probes.items()):
        print(f"probe {probe}: window holds only {avail} pairs (< {args.per_probe})")
    print(f"wrote {len(draw.samples)} annotation tasks to {args.output}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    artifacts = run_pipeline(cfg, resume=args.resume)
    for name in sorted(artifacts):
        print(f"{name}: {artifacts[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lookmatch",
        description="Pair garment product images with editorial lookbook images.",
    )
    parser.add_argument("--version", action="version", version=f"lookmatch {__version__}")
    parser.add_argument(
        "--log-level", default="warning",
        choices=["debug", "info", "warning", "error"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed-check", help="validate an embedding block file")
    p.add_argument("path")
    p.set_defaults(func=cmd_embed_check)

    p = sub.add_parser("score", help="compute one similarity channel")
    p.add_argument("--channel", required=True, choices=CHANNELS)
    p.add_argument("--queries", required=True, help="query_image block")
    p.add_argument("--gallery", required=True,
                   help="gallery block for the channel (gallery_image for fi2i/i2i, "
                        "gallery_text for t2i, gallery_bbox for bb2i)")
    p.add_argument("--aux", help="gallery_bbox block (i2i only)")
    p.add_argument("--universe", help="gallery_image block declaring the full gallery (t2i/bb2i)")
    p.add_argument("--model", help="override the output model name")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="estimate standardization stats on a subsample")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-n", "--sample-size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("standardize", help="apply (s - mu) / sigma to a table")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("retrieve", help="exact top-k candidates per query")
    p.add_argument("--queries", required=True, help="query_image block")
    p.add_argument("--gallery", required=True, help="gallery_image block")
    p.add_argument("--aux", help="gallery_text or gallery_bbox block (t2i/bb2i/i2i)")
    p.add_argument("--channel", default="fi2i", choices=CHANNELS)
    p.add_argument("-k", type=int, default=2000)
    p.add_argument("--brand-threshold", type=float, default=90.0)
    p.add_argument("--no-brand-filter", action="store_true")
    p.add_argument("--corpus", nargs=2, metavar=("QUERIES_TSV", "GALLERY_TSV"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("fuse", help="combine standardized tables per an ensemble spec")
    p.add_argument("--spec", required=True)
    p.add_argument("-i", "--inputs", nargs="+", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="retrieval evaluation")
    esub = p.add_subparsers(dest="eval_command", required=True)

    e = esub.add_parser("recall", help="recall@K against ground truth")
    e.add_argument("--ranking", required=True, help="candidates file or score table")
    e.add_argument("--truth", required=True)
    e.add_argument("-k", default="1,5,10", help="comma-separated K values")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval_recall)

    e = esub.add_parser("corr", help="Spearman correlation matrix between models")
    e.add_argument("-i", "--inputs", nargs="+", required=True)
    e.add_argument("--sample", type=int, default=0, help="0 keeps every common pair")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval_corr)

    e = esub.add_parser("curve", help="match fraction per annotation probe")
    e.add_argument("--annotations", required=True)
    e.add_argument("--probes", default="100,2000,8000,32000,128000,512000,2048000")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval_curve)

    p = sub.add_parser("curate", help="rank pairs and label quality tiers")
    p.add_argument("--fused", required=True)
    p.add_argument("--cutoffs", default="10000,50000,300000")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("sample", help="draw annotation tasks around probe ranks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--probes", default="100,2000,8000,32000,128000,512000,2048000")
    p.add_argument("--per-probe", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--queries-manifest", required=True)
    p.add_argument("--gallery-manifest", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true", help="reuse existing stage outputs")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except LookmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
