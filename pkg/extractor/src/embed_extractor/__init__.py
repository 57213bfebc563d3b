"""Causal-LM activation extraction into portable EMB1 tensors."""

from .extract import ExtractionError, ExtractionJob, extract, make_fixture

__all__ = ["ExtractionError", "ExtractionJob", "extract", "make_fixture"]

__version__ = "0.1.0"
