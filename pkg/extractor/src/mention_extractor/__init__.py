"""Transformer mention-embedding extractor for variant files."""

from .align import AlignmentError, align_span, choose_window
from .extract import ExtractorConfig, ExtractStats, extract, read_usable_variants

__version__ = "0.1.0"
