"""`aspcorp-embed`: raw person records in, corpus file out."""

from __future__ import annotations

import argparse
import json
import sys

from .chunker import DEFAULT_MIN_MERGE_LEN, load_nsp_predictor
from .encoders import DEFAULT_MODEL, EncoderUnavailable, get_encoder
from .export import ExportError, encode_and_export, read_raw_records


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aspcorp-embed",
        description=(
            "Chunk raw documents into sub-sentences, embed them, and export "
            "the .aspcorp.jsonl corpus format."
        ),
    )
    parser.add_argument("--in", dest="input", required=True, help="raw JSONL records")
    parser.add_argument("--out", dest="output", required=True, help="corpus file to write")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=f"sentence encoder (default {DEFAULT_MODEL}); hash://<dim> for the offline encoder",
    )
    parser.add_argument(
        "--nsp-model",
        default="none",
        help="next-sentence model for chunk merging, or 'none' for the length fallback",
    )
    parser.add_argument(
        "--min-merge-len",
        type=int,
        default=DEFAULT_MIN_MERGE_LEN,
        help="fallback merge threshold in characters",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        records = read_raw_records(args.input)
        try:
            encoder = get_encoder(args.model)
        except (EncoderUnavailable, ValueError) as exc:
            print(f"encoder error: {exc}", file=sys.stderr)
            return 2
        predictor = None
        if args.nsp_model != "none":
            predictor = load_nsp_predictor(args.nsp_model)
            if predictor is None:
                print(
                    f"warning: next-sentence model {args.nsp_model!r} unavailable; "
                    "falling back to length-threshold merging",
                    file=sys.stderr,
                )
        stats = encode_and_export(
            records, encoder, args.output, predictor, args.min_merge_len
        )
    except (ExportError, OSError) as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(stats, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
