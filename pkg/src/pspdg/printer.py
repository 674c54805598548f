"""Renders a Program back to canonical .pir text.

parse(print(p)) is structurally equal to p: the printer always emits
instruction ids and normalized region kinds, so a second parse is a fixed
point even for source that omitted ids or used kind aliases.
"""

from __future__ import annotations

from .ir import (
    UNKNOWN_TRIP,
    Function,
    Instruction,
    Item,
    Opcode,
    Program,
    Region,
    VarDecl,
    VarKind,
)

_INDENT = "  "


def _render_vardecl(decl: VarDecl) -> str:
    if decl.kind is VarKind.SCALAR:
        text = f"{decl.name}: scalar"
    elif decl.kind is VarKind.ARRAY:
        text = f"{decl.name}: array[{decl.size}]"
    else:
        text = f"{decl.name}: struct{{{', '.join(decl.fields)}}}"
    if decl.distinct_index:
        text += " distinct_index"
    if decl.hyper is not None:
        reducer, identity = decl.hyper
        text += f" hyper({reducer})" if identity is None else f" hyper({reducer}, {identity})"
    return text


def render_statement(ins: Instruction) -> str:
    """The statement body without its id; also the leaf text in graphs."""
    target = ins.var or ""
    if ins.index is not None:
        rendered = ins.index.render()
        target += rendered if rendered.startswith(".") else f"[{rendered}]"
    args = " ".join(a.render() for a in ins.args)
    if ins.opcode is Opcode.ASSIGN:
        return f"{ins.dest} = assign {args}"
    if ins.opcode is Opcode.BINOP:
        return f"{ins.dest} = binop {ins.op} {args}"
    if ins.opcode is Opcode.LOAD:
        return f"{ins.dest} = load {target}"
    if ins.opcode is Opcode.STORE:
        return f"store {target} {args}"
    if ins.opcode is Opcode.CALL:
        return f"call {ins.callee}" + (f" {args}" if args else "")
    if ins.opcode is Opcode.PRINT:
        return "print" + (f" {args}" if args else "")
    return ins.opcode.value


def _render_instruction(ins: Instruction) -> str:
    return f"{ins.id}: {render_statement(ins)}"


def _render_region_header(region: Region) -> str:
    parts = [region.kind.value] + [c.render() for c in region.clauses]
    header = f"@pragma({', '.join(parts)}) {region.rid}"
    if region.iv is not None:
        header += f" iv {region.iv}"
    if region.trip is not None:
        trip = UNKNOWN_TRIP if region.trip == UNKNOWN_TRIP else str(region.trip)
        header += f" trip {trip}"
    return header


def _render_items(items: list[Item], depth: int, out: list[str]) -> None:
    pad = _INDENT * depth
    for item in items:
        if isinstance(item, VarDecl):
            out.append(f"{pad}local {_render_vardecl(item)}")
        elif isinstance(item, Instruction):
            out.append(f"{pad}{_render_instruction(item)}")
        else:
            out.append(f"{pad}{_render_region_header(item)} {{")
            _render_items(item.children, depth + 1, out)
            out.append(f"{pad}}}")


def _render_function(fn: Function, out: list[str]) -> None:
    out.append(f"func {fn.name}({', '.join(fn.params)}) {{")
    _render_items(fn.body, 1, out)
    out.append("}")


def print_program(program: Program) -> str:
    out: list[str] = []
    for decl in program.globals:
        out.append(f"global {_render_vardecl(decl)}")
    if program.globals:
        out.append("")
    for i, fn in enumerate(program.functions):
        if i:
            out.append("")
        _render_function(fn, out)
    return "\n".join(out) + "\n"
