"""Walk a class-per-subdirectory image folder and write an embedding CSV.

Output schema: ``class_id,sample_id,f0,...,f{d-1}``, one row per image,
floats with 17 significant digits. Class ids follow the alphabetical order
of the subdirectory names; sample ids are assigned sequentially in emission
order. Features are written raw (no normalization), so downstream consumers
own that choice.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .backbones import build_backbone

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


@dataclass(frozen=True)
class ExportSpec:
    input_root: Path
    backbone_name: str
    output_path: Path
    image_size: int = 84
    weights_path: str | None = None

    def __post_init__(self) -> None:
        if self.image_size < 8:
            raise ValueError("image_size must be >= 8")


@dataclass(frozen=True)
class ExportSummary:
    classes: int
    samples: int
    dimension: int
    skipped: int


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def _class_directories(root: Path) -> list[Path]:
    if not root.is_dir():
        raise FileNotFoundError(f"input root {root} is not a directory")
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not subdirs:
        raise ValueError(f"{root} contains no class subdirectories")
    return subdirs


def _image_files(class_dir: Path) -> list[Path]:
    files = sorted(
        p for p in class_dir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise ValueError(f"class directory {class_dir} contains no images")
    return files


def export(spec: ExportSpec, log=lambda msg: print(msg, file=sys.stderr)) -> ExportSummary:
    """Embed every image under ``input_root`` and write the CSV.

    Undecodable images are skipped with a warning and counted in the
    summary. Deterministic for fixed inputs and backbone.
    """
    backbone = build_backbone(spec.backbone_name, spec.weights_path)
    class_dirs = _class_directories(Path(spec.input_root))
    rows: list[str] = []
    sample_id = 0
    skipped = 0
    dimension: int | None = None
    for class_id, class_dir in enumerate(class_dirs):
        for image_path in _image_files(class_dir):
            try:
                with Image.open(image_path) as img:
                    image = img.convert("RGB").resize(
                        (spec.image_size, spec.image_size), Image.BILINEAR
                    )
            except (UnidentifiedImageError, OSError) as exc:
                log(f"warning: skipping undecodable image {image_path}: {exc}")
                skipped += 1
                continue
            features = backbone(image)
            if dimension is None:
                dimension = features.shape[0]
            coords = ",".join(_format_float(x) for x in features)
            rows.append(f"{class_id},{sample_id},{coords}")
            sample_id += 1
    if dimension is None:
        raise ValueError("no decodable images found anywhere under the input root")
    header = "class_id,sample_id," + ",".join(f"f{i}" for i in range(dimension))
    output = Path(spec.output_path)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return ExportSummary(
        classes=len(class_dirs), samples=sample_id, dimension=dimension, skipped=skipped
    )
