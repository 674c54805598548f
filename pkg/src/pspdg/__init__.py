"""Parallel-semantics program dependence graphs over a structured mini-IR."""

from .diagnostics import Diagnostic, DiagnosticError
from .parser import parse, parse_file
from .printer import print_program
from .validate import validate

__version__ = "0.1.0"

__all__ = [
    "Diagnostic",
    "DiagnosticError",
    "parse",
    "parse_file",
    "print_program",
    "validate",
    "__version__",
]
