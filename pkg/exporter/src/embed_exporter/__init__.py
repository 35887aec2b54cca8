"""Image-folder to embedding-CSV export utility."""

from .backbones import BackboneUnavailableError, build_backbone
from .export import ExportSpec, ExportSummary, export

__version__ = "0.1.0"
