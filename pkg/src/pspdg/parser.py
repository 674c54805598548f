"""Parser for the textual mini-IR (.pir files).

The format is line-oriented: one instruction per line, regions opened by an
`@pragma(kind, clauses...)` header ending in `{` and closed by a lone `}`.
`#` starts a comment that runs to end of line.  See docs/format.md for the
EBNF.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import SYNTAX, Diagnostic, DiagnosticError
from .ir import (
    KIND_ALIASES,
    UNKNOWN_TRIP,
    AffineIndex,
    Clause,
    ClauseKind,
    Const,
    FieldIndex,
    Function,
    Index,
    Instruction,
    Item,
    OpaqueIndex,
    Opcode,
    Operand,
    Program,
    Ref,
    Region,
    RegionKind,
    VarDecl,
    VarKind,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<COMMENT>\#[^\n]*)
  | (?P<NEWLINE>\n)
  | (?P<WS>[ \t\r]+)
  | (?P<INT>\d+)
  | (?P<NAME>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<PUNCT>[@(){}\[\]:,=+\-*.?])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # NAME | INT | PUNCT | NEWLINE | EOF
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            col = pos - line_start + 1
            raise DiagnosticError(
                [Diagnostic(SYNTAX, f"unexpected character {text[pos]!r}", line, col)]
            )
        kind = match.lastgroup or ""
        value = match.group()
        col = pos - line_start + 1
        if kind == "NEWLINE":
            tokens.append(Token("NEWLINE", value, line, col))
            line += 1
            line_start = match.end()
        elif kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, value, line, col))
        pos = match.end()
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # ------------------------------------------------------------------
    # token helpers

    def peek(self, offset: int = 0) -> Token:
        j = min(self.i + offset, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def skip_newlines(self) -> None:
        while self.peek().kind == "NEWLINE":
            self.advance()

    def error(self, message: str, tok: Token | None = None) -> DiagnosticError:
        tok = tok or self.peek()
        return DiagnosticError([Diagnostic(SYNTAX, message, tok.line, tok.col)])

    def expect(self, kind: str, value: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            raise self.error(f"expected {want!r}, found {tok.value!r}")
        return self.advance()

    def expect_name(self, value: str | None = None) -> Token:
        return self.expect("NAME", value)

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def end_statement(self) -> None:
        tok = self.peek()
        if tok.kind in ("NEWLINE", "EOF"):
            self.skip_newlines()
            return
        if tok.kind == "PUNCT" and tok.value == "}":
            return
        raise self.error(f"unexpected {tok.value!r} at end of statement")

    # ------------------------------------------------------------------
    # grammar

    def parse_program(self) -> Program:
        program = Program()
        self.skip_newlines()
        while not self.at("EOF"):
            if self.at("NAME", "global"):
                self.advance()
                program.globals.append(self.parse_vardecl())
                self.end_statement()
            elif self.at("NAME", "func"):
                program.functions.append(self.parse_function())
            else:
                raise self.error("expected 'global' or 'func' at top level")
            self.skip_newlines()
        return program

    def parse_vardecl(self) -> VarDecl:
        name_tok = self.expect_name()
        self.expect("PUNCT", ":")
        kind_tok = self.expect_name()
        decl = VarDecl(name=name_tok.value, kind=VarKind.SCALAR, line=name_tok.line)
        if kind_tok.value == "scalar":
            pass
        elif kind_tok.value == "array":
            decl.kind = VarKind.ARRAY
            self.expect("PUNCT", "[")
            tok = self.peek()
            if tok.kind == "INT":
                decl.size = int(self.advance().value)
            elif tok.kind == "NAME":
                decl.size = self.advance().value
            elif tok.kind == "PUNCT" and tok.value == "?":
                self.advance()
                decl.size = UNKNOWN_TRIP
            else:
                raise self.error("expected array size")
            self.expect("PUNCT", "]")
        elif kind_tok.value == "struct":
            decl.kind = VarKind.STRUCT
            self.expect("PUNCT", "{")
            fields = [self.expect_name().value]
            while self.at("PUNCT", ","):
                self.advance()
                fields.append(self.expect_name().value)
            self.expect("PUNCT", "}")
            decl.fields = tuple(fields)
        else:
            raise self.error(
                f"expected 'scalar', 'array' or 'struct', found {kind_tok.value!r}",
                kind_tok,
            )
        while self.at("NAME", "distinct_index") or self.at("NAME", "hyper"):
            if self.at("NAME", "distinct_index"):
                self.advance()
                decl.distinct_index = True
            else:
                self.advance()
                self.expect("PUNCT", "(")
                reducer = self.expect_name().value
                identity: int | None = None
                if self.at("PUNCT", ","):
                    self.advance()
                    identity = self.parse_int()
                self.expect("PUNCT", ")")
                decl.hyper = (reducer, identity)
        return decl

    def parse_int(self) -> int:
        sign = 1
        if self.at("PUNCT", "-"):
            self.advance()
            sign = -1
        tok = self.expect("INT")
        return sign * int(tok.value)

    def parse_function(self) -> Function:
        fn_tok = self.expect_name("func")
        name = self.expect_name().value
        self.expect("PUNCT", "(")
        params: list[str] = []
        if self.at("NAME"):
            params.append(self.advance().value)
            while self.at("PUNCT", ","):
                self.advance()
                params.append(self.expect_name().value)
        self.expect("PUNCT", ")")
        fn = Function(name=name, params=tuple(params), line=fn_tok.line)
        fn.body = self.parse_block()
        return fn

    def parse_block(self) -> list[Item]:
        self.expect("PUNCT", "{")
        items: list[Item] = []
        self.skip_newlines()
        while not self.at("PUNCT", "}"):
            if self.at("EOF"):
                raise self.error("unexpected end of input inside block")
            items.append(self.parse_item())
            self.skip_newlines()
        self.expect("PUNCT", "}")
        return items

    def parse_item(self) -> Item:
        if self.at("NAME", "local"):
            self.advance()
            decl = self.parse_vardecl()
            self.end_statement()
            return decl
        if self.at("PUNCT", "@"):
            return self.parse_region()
        return self.parse_instruction()

    def parse_region(self) -> Region:
        at_tok = self.expect("PUNCT", "@")
        self.expect_name("pragma")
        self.expect("PUNCT", "(")
        kind_tok = self.expect_name()
        kind = KIND_ALIASES.get(kind_tok.value)
        if kind is None:
            try:
                kind = RegionKind(kind_tok.value)
            except ValueError:
                raise self.error(f"unknown region kind {kind_tok.value!r}", kind_tok)
        clauses: list[Clause] = []
        while self.at("PUNCT", ","):
            self.advance()
            clauses.extend(self.parse_clause())
        self.expect("PUNCT", ")")
        rid = self.expect_name().value
        region = Region(kind=kind, rid=rid, clauses=tuple(clauses), line=at_tok.line)
        if self.at("NAME", "iv"):
            self.advance()
            region.iv = self.expect_name().value
        if self.at("NAME", "trip"):
            self.advance()
            tok = self.peek()
            if tok.kind == "INT":
                region.trip = int(self.advance().value)
            elif tok.kind == "NAME":
                region.trip = self.advance().value
            elif tok.kind == "PUNCT" and tok.value == "?":
                self.advance()
                region.trip = UNKNOWN_TRIP
            else:
                raise self.error("expected trip count")
        region.children = self.parse_block()
        return region

    def parse_clause(self) -> list[Clause]:
        name_tok = self.expect_name()
        try:
            kind = ClauseKind(name_tok.value)
        except ValueError:
            raise self.error(f"unknown clause {name_tok.value!r}", name_tok)
        if kind is ClauseKind.NOWAIT:
            return [Clause(ClauseKind.NOWAIT)]
        self.expect("PUNCT", "(")
        if kind is ClauseKind.REDUCTION:
            var = self.expect_name().value
            self.expect("PUNCT", ",")
            reducer = self.expect_name().value
            self.expect("PUNCT", ")")
            return [Clause(kind, var, reducer)]
        names = [self.expect_name().value]
        while self.at("PUNCT", ","):
            self.advance()
            names.append(self.expect_name().value)
        self.expect("PUNCT", ")")
        return [Clause(kind, n) for n in names]

    # ------------------------------------------------------------------
    # instructions

    def parse_instruction(self) -> Instruction:
        first = self.expect_name()
        instr_id = ""
        if self.at("PUNCT", ":"):
            self.advance()
            instr_id = first.value
            first = self.expect_name()
        ins = self.parse_statement(first)
        ins.id = instr_id
        ins.line = first.line
        self.end_statement()
        return ins

    def parse_statement(self, head: Token) -> Instruction:
        word = head.value
        if word == "store":
            var = self.expect_name().value
            index = self.parse_optional_index()
            value = self.parse_operand()
            return Instruction(id="", opcode=Opcode.STORE, var=var, index=index, args=(value,))
        if word == "call":
            callee = self.expect_name().value
            args: list[Operand] = []
            while self.at("NAME") or self.at("INT") or self.at("PUNCT", "-"):
                args.append(self.parse_operand())
            return Instruction(id="", opcode=Opcode.CALL, callee=callee, args=tuple(args))
        if word == "print":
            args = []
            while self.at("NAME") or self.at("INT") or self.at("PUNCT", "-"):
                args.append(self.parse_operand())
            return Instruction(id="", opcode=Opcode.PRINT, args=tuple(args))
        if word == "barrier":
            return Instruction(id="", opcode=Opcode.BARRIER)
        if word == "sync":
            return Instruction(id="", opcode=Opcode.SYNC)

        # dest = assign|binop|load ...
        dest = word
        self.expect("PUNCT", "=")
        op_tok = self.expect_name()
        if op_tok.value == "assign":
            value = self.parse_operand()
            return Instruction(id="", opcode=Opcode.ASSIGN, dest=dest, args=(value,))
        if op_tok.value == "binop":
            op_name = self.expect_name().value
            a = self.parse_operand()
            b = self.parse_operand()
            return Instruction(id="", opcode=Opcode.BINOP, dest=dest, op=op_name, args=(a, b))
        if op_tok.value == "load":
            var = self.expect_name().value
            index = self.parse_optional_index()
            return Instruction(id="", opcode=Opcode.LOAD, dest=dest, var=var, index=index)
        raise self.error(
            f"expected 'assign', 'binop' or 'load', found {op_tok.value!r}", op_tok
        )

    def parse_operand(self) -> Operand:
        tok = self.peek()
        if tok.kind == "NAME":
            self.advance()
            return Ref(tok.value)
        if tok.kind == "INT" or (tok.kind == "PUNCT" and tok.value == "-"):
            return Const(self.parse_int())
        raise self.error(f"expected operand, found {tok.value!r}")

    def parse_optional_index(self) -> Index | None:
        if self.at("PUNCT", "["):
            self.advance()
            index = self.parse_index()
            self.expect("PUNCT", "]")
            return index
        if self.at("PUNCT", "."):
            self.advance()
            return FieldIndex(self.expect_name().value)
        return None

    def parse_index(self) -> Index:
        if self.at("PUNCT", "?"):
            self.advance()
            return OpaqueIndex(self.expect_name().value)
        terms: list[tuple[int, str]] = []
        const = 0
        sign = 1
        if self.at("PUNCT", "-"):
            self.advance()
            sign = -1
        while True:
            tok = self.peek()
            if tok.kind == "INT":
                self.advance()
                value = int(tok.value)
                if self.at("PUNCT", "*"):
                    self.advance()
                    name = self.expect_name().value
                    terms.append((sign * value, name))
                else:
                    const += sign * value
            elif tok.kind == "NAME":
                self.advance()
                terms.append((sign, tok.value))
            else:
                raise self.error("expected affine term")
            if self.at("PUNCT", "+"):
                self.advance()
                sign = 1
            elif self.at("PUNCT", "-"):
                self.advance()
                sign = -1
            else:
                break
        return AffineIndex(terms=tuple(terms), const=const)


def _assign_ids_and_positions(program: Program) -> None:
    used = {ins.id for ins in program.instructions() if ins.id}
    counter = 0
    pos = 0
    for ins in program.instructions():
        if not ins.id:
            while f"i{counter}" in used:
                counter += 1
            ins.id = f"i{counter}"
            used.add(ins.id)
            counter += 1
        ins.pos = pos
        pos += 1


def parse(text: str, check: bool = True) -> Program:
    """Parse mini-IR source into a Program.

    With check=True (the default) the result is also validated and a
    DiagnosticError carrying all diagnostics is raised if any invariant
    fails; check=False returns the raw tree for tooling that wants to
    inspect broken programs.
    """
    tokens = tokenize(text)
    program = _Parser(tokens).parse_program()
    _assign_ids_and_positions(program)
    if check:
        from .validate import validate

        diags = validate(program)
        if diags:
            raise DiagnosticError(diags)
    return program


def parse_file(path: str, check: bool = True) -> Program:
    with open(path, "r", encoding="utf-8") as handle:
        return parse(handle.read(), check=check)
