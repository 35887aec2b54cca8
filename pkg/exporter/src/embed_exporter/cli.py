"""CLI wrapper: embed-export --input DIR --output CSV [--backbone NAME]."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backbones import BACKBONE_NAMES, BackboneUnavailableError
from .export import ExportSpec, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Embed a class-per-subdirectory image folder into a CSV of features.",
    )
    parser.add_argument("--input", required=True, help="root directory, one subdir per class")
    parser.add_argument("--output", required=True, help="destination CSV path")
    parser.add_argument("--backbone", default="pixel16", choices=BACKBONE_NAMES)
    parser.add_argument("--image-size", type=int, default=84)
    parser.add_argument("--weights", default=None, help="local state-dict file for resnet backbones")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        input_root=Path(args.input),
        backbone_name=args.backbone,
        output_path=Path(args.output),
        image_size=args.image_size,
        weights_path=args.weights,
    )
    try:
        summary = export(spec)
    except (BackboneUnavailableError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        json.dumps(
            {
                "classes": summary.classes,
                "samples": summary.samples,
                "dimension": summary.dimension,
                "skipped": summary.skipped,
            }
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
