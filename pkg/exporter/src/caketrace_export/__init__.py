"""Export causal-LM attention windows in the CAKE-TRACE v1 format."""

from .export import FUTURE_MASS_TOL, ExportError, ExportSpec, export, load_tokens
from .writer import trace_bytes, write_trace_file

__all__ = [
    "FUTURE_MASS_TOL",
    "ExportError",
    "ExportSpec",
    "export",
    "load_tokens",
    "trace_bytes",
    "write_trace_file",
]

__version__ = "0.1.0"
