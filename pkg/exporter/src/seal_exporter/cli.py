"""The ``seal-export`` command."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from seal_exporter.errors import ExportError
from seal_exporter.export import ExportJob, output_dim, run_job
from seal_exporter.model import load_encoder

_LAYERS = {"all": "concat_all_layers", "last": "last_layer"}
_ALIGN = {"mean": "mean_subtokens", "first": "first_subtoken"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seal-export",
        description="Export per-document contextual token embeddings as CEMB files.",
    )
    parser.add_argument("--corpus", required=True, help="directory of .txt documents")
    parser.add_argument("--out", required=True, help="output directory for .cemb files")
    parser.add_argument(
        "--encoder",
        required=True,
        help="pretrained encoder: a local directory or a model identifier",
    )
    parser.add_argument("--layers", choices=sorted(_LAYERS), default="all")
    parser.add_argument("--align", choices=sorted(_ALIGN), default="mean")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_dir=Path(args.corpus),
        out_dir=Path(args.out),
        encoder_name=args.encoder,
        layer_policy=_LAYERS[args.layers],
        alignment_policy=_ALIGN[args.align],
    )
    try:
        encoder = load_encoder(job.encoder_name)
        count = run_job(job, encoder)
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    dim = output_dim(encoder, args.layers)
    print(f"exported {count} documents (dim {dim}) to {job.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
