"""Diagnostic records shared by the parser and the validator."""

from __future__ import annotations

from dataclasses import dataclass


# Stable diagnostic codes; tests and the CLI match on these.
SYNTAX = "syntax-error"
UNRESOLVED = "unresolved-identifier"
ILLEGAL_NESTING = "illegal-nesting"
DUPLICATE_REGION_ID = "duplicate-region-id"
DUPLICATE_INSTR_ID = "duplicate-instr-id"
DUPLICATE_FUNCTION = "duplicate-function"
DUPLICATE_VAR = "duplicate-variable"
MISSING_MAIN = "missing-main"
BAD_REDUCER_ARITY = "bad-reducer-arity"
UNKNOWN_REDUCER = "unknown-reducer"
BAD_ARRAY_SIZE = "bad-array-size"
MISSING_INDEX = "missing-index"
INDEX_ON_SCALAR = "index-on-scalar"
BAD_FIELD = "bad-field"
BARRIER_OUTSIDE_PARALLEL = "barrier-outside-parallel"
SYNC_OUTSIDE_SCOPE = "sync-outside-scope"
SPAWN_OUTSIDE_SCOPE = "spawn-outside-scope"
BAD_CLAUSE = "bad-clause"
BAD_TRIP = "bad-trip"
RESERVED_NAME = "reserved-name"
UNSUPPORTED_CONSTRUCT = "unsupported-construct"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    col: int = 0

    def render(self) -> str:
        loc = f"{self.line}:{self.col}" if self.line else "-"
        return f"{loc}: {self.code}: {self.message}"


class DiagnosticError(Exception):
    """Raised when parsing or validation cannot produce a usable program."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        head = self.diagnostics[0].render() if self.diagnostics else "unknown error"
        more = f" (+{len(self.diagnostics) - 1} more)" if len(self.diagnostics) > 1 else ""
        super().__init__(head + more)
