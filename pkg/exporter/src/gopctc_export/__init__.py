"""Bridge from pretrained CTC recognition models to gopctc emission files."""

from .errors import ExportError
from .export import ExportJob, export

__version__ = "0.1.0"
