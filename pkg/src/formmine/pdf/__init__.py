"""Minimal tolerant PDF object-graph parser (no third-party PDF deps)."""

from .document import PdfDocument, PdfEncryptedError, PdfError
from .objects import Name, Ref, Stream

__all__ = ["PdfDocument", "PdfError", "PdfEncryptedError", "Name", "Ref", "Stream"]
