"""Semantic validation of parsed programs.

validate() returns the full, deterministic list of diagnostics ordered by
source position; an empty list means every invariant of the mini-IR holds.
"""

from __future__ import annotations

from . import diagnostics as dc
from .diagnostics import Diagnostic
from .ir import (
    LOOP_KINDS,
    PARALLEL_CONTEXT_KINDS,
    SYNC_REGION_KINDS,
    UNKNOWN_TRIP,
    ClauseKind,
    Function,
    Instruction,
    Item,
    Opcode,
    Program,
    Ref,
    Region,
    RegionKind,
    VarDecl,
    VarKind,
    AffineIndex,
    BINOP_NAMES,
    FieldIndex,
    OpaqueIndex,
)


class _Scope:
    """Lexical scope chain: globals < params < locals/ivs, in source order."""

    def __init__(self, parent: _Scope | None = None):
        self.parent = parent
        self.names: dict[str, VarDecl | str] = {}

    def declare(self, name: str, decl: VarDecl | str) -> None:
        self.names[name] = decl

    def lookup(self, name: str) -> VarDecl | str | None:
        scope: _Scope | None = self
        while scope is not None:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None


def validate(program: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def report(code: str, message: str, line: int = 0) -> None:
        diags.append(Diagnostic(code, message, line))

    # -------------------------------------------------------------- functions
    seen_functions: dict[str, Function] = {}
    for fn in program.functions:
        if fn.name in seen_functions:
            report(dc.DUPLICATE_FUNCTION, f"function {fn.name!r} defined twice", fn.line)
        seen_functions[fn.name] = fn
    if "main" not in seen_functions:
        report(dc.MISSING_MAIN, "program must define exactly one 'main' function")

    # ---------------------------------------------------------------- globals
    top = _Scope()
    seen_globals: set[str] = set()
    for decl in program.globals:
        _check_decl(decl, report)
        if decl.name in seen_globals:
            report(dc.DUPLICATE_VAR, f"global {decl.name!r} declared twice", decl.line)
        seen_globals.add(decl.name)
        top.declare(decl.name, decl)

    # hyperobject reducers must be declared two-parameter functions
    all_decls = list(program.globals)
    for fn in program.functions:
        all_decls.extend(fn.local_decls())
    for decl in all_decls:
        if decl.hyper is None:
            continue
        reducer = program.function(decl.hyper[0])
        if reducer is None:
            report(
                dc.UNKNOWN_REDUCER,
                f"hyperobject {decl.name!r} names undeclared reducer {decl.hyper[0]!r}",
                decl.line,
            )
        elif len(reducer.params) != 2:
            report(
                dc.BAD_REDUCER_ARITY,
                f"hyperobject reducer {decl.hyper[0]!r} must take exactly two parameters",
                decl.line,
            )

    # ------------------------------------------------------- ids and nesting
    region_ids: dict[str, int] = {}
    instr_ids: dict[str, int] = {}
    for _, region in program.regions():
        if region.rid in region_ids:
            report(dc.DUPLICATE_REGION_ID, f"region id {region.rid!r} reused", region.line)
        region_ids.setdefault(region.rid, region.line)
    for ins in program.instructions():
        if ins.id in instr_ids:
            report(dc.DUPLICATE_INSTR_ID, f"instruction id {ins.id!r} reused", ins.line)
        instr_ids.setdefault(ins.id, ins.line)

    for fn in program.functions:
        scope = _Scope(top)
        for param in fn.params:
            scope.declare(param, "param")
        _walk_items(program, fn, fn.body, scope, [], report)

    diags.sort(key=lambda d: (d.line, d.code, d.message))
    return diags


def _check_decl(decl: VarDecl, report) -> None:
    if decl.name.startswith("__"):
        report(dc.RESERVED_NAME, f"identifier {decl.name!r} is reserved", decl.line)
    if decl.kind is VarKind.ARRAY:
        if isinstance(decl.size, int) and decl.size <= 0:
            report(dc.BAD_ARRAY_SIZE, f"array {decl.name!r} has non-positive size", decl.line)
    if decl.kind is VarKind.STRUCT and not decl.fields:
        report(dc.BAD_FIELD, f"struct {decl.name!r} has no fields", decl.line)


def _walk_items(
    program: Program,
    fn: Function,
    items: list[Item],
    scope: _Scope,
    region_stack: list[Region],
    report,
) -> None:
    scope = _Scope(scope)
    for item in items:
        if isinstance(item, VarDecl):
            _check_decl(item, report)
            if item.name in scope.names:
                report(dc.DUPLICATE_VAR, f"local {item.name!r} declared twice", item.line)
            scope.declare(item.name, item)
        elif isinstance(item, Region):
            _check_region(program, fn, item, scope, region_stack, report)
        else:
            _check_instruction(program, fn, item, scope, region_stack, report)


def _check_region(
    program: Program,
    fn: Function,
    region: Region,
    scope: _Scope,
    region_stack: list[Region],
    report,
) -> None:
    kinds_above = {r.kind for r in region_stack}
    if region.kind in SYNC_REGION_KINDS and not (kinds_above & set(PARALLEL_CONTEXT_KINDS)):
        report(
            dc.ILLEGAL_NESTING,
            f"{region.kind.value} region {region.rid!r} must be inside a "
            "parallel_for, task or scope region",
            region.line,
        )
    if region.kind is RegionKind.SPAWN and RegionKind.SCOPE not in kinds_above:
        report(
            dc.SPAWN_OUTSIDE_SCOPE,
            f"spawn region {region.rid!r} must be inside a scope region",
            region.line,
        )
    if region.is_loop():
        if region.trip is None:
            pass  # legal: statically and dynamically unbounded loop
        elif isinstance(region.trip, int) and region.trip < 0:
            report(dc.BAD_TRIP, f"loop {region.rid!r} has negative trip count", region.line)
        elif isinstance(region.trip, str) and region.trip != UNKNOWN_TRIP:
            target = scope.lookup(region.trip)
            if target is None:
                report(
                    dc.UNRESOLVED,
                    f"trip count {region.trip!r} of loop {region.rid!r} is undeclared",
                    region.line,
                )
            elif isinstance(target, VarDecl) and target.kind is not VarKind.SCALAR:
                report(dc.BAD_TRIP, f"trip count {region.trip!r} is not a scalar", region.line)
    else:
        if region.iv is not None or region.trip is not None:
            report(
                dc.BAD_TRIP,
                f"region {region.rid!r} of kind {region.kind.value} cannot carry iv/trip",
                region.line,
            )

    for clause in region.clauses:
        if clause.kind is ClauseKind.NOWAIT:
            if region.kind is not RegionKind.PARALLEL_FOR:
                report(dc.BAD_CLAUSE, f"nowait only applies to parallel_for ({region.rid})", region.line)
            continue
        if clause.kind is ClauseKind.REDUCTION:
            if not region.is_loop():
                report(
                    dc.BAD_CLAUSE,
                    f"reduction clause on non-loop region {region.rid!r}",
                    region.line,
                )
            reducer = program.function(clause.reducer or "")
            if reducer is None:
                report(
                    dc.UNKNOWN_REDUCER,
                    f"reduction on {clause.var!r} names undeclared function {clause.reducer!r}",
                    region.line,
                )
            elif len(reducer.params) != 2:
                report(
                    dc.BAD_REDUCER_ARITY,
                    f"reducer {clause.reducer!r} must take exactly two parameters",
                    region.line,
                )
        if clause.kind is ClauseKind.DEPEND and region.kind is not RegionKind.TASK:
            report(dc.BAD_CLAUSE, f"depend clause on non-task region {region.rid!r}", region.line)
        if clause.var is not None and scope.lookup(clause.var) is None:
            report(
                dc.UNRESOLVED,
                f"clause names undeclared variable {clause.var!r} ({region.rid})",
                region.line,
            )

    inner = _Scope(scope)
    if region.iv is not None:
        inner.declare(region.iv, "iv")
    _walk_items(program, fn, region.children, inner, region_stack + [region], report)


def _check_instruction(
    program: Program,
    fn: Function,
    ins: Instruction,
    scope: _Scope,
    region_stack: list[Region],
    report,
) -> None:
    kinds_above = {r.kind for r in region_stack}

    if ins.opcode is Opcode.BARRIER:
        if not (kinds_above & set(PARALLEL_CONTEXT_KINDS)):
            report(
                dc.BARRIER_OUTSIDE_PARALLEL,
                f"barrier {ins.id!r} outside parallel_for, task or scope",
                ins.line,
            )
        return
    if ins.opcode is Opcode.SYNC:
        if RegionKind.SCOPE not in kinds_above:
            report(dc.SYNC_OUTSIDE_SCOPE, f"sync {ins.id!r} outside any scope region", ins.line)
        return

    if ins.opcode is Opcode.BINOP and ins.op not in BINOP_NAMES:
        report(dc.SYNTAX, f"unknown binop operator {ins.op!r} in {ins.id!r}", ins.line)

    def resolve(name: str, what: str) -> VarDecl | str | None:
        target = scope.lookup(name)
        if target is None:
            report(dc.UNRESOLVED, f"{what} {name!r} in {ins.id!r} is undeclared", ins.line)
        return target

    for arg in ins.args:
        if isinstance(arg, Ref):
            target = resolve(arg.name, "operand")
            if isinstance(target, VarDecl) and target.kind is not VarKind.SCALAR:
                # arrays/structs as bare operands are only sensible as call args
                if ins.opcode is not Opcode.CALL:
                    report(
                        dc.INDEX_ON_SCALAR,
                        f"non-scalar {arg.name!r} used as value operand in {ins.id!r}",
                        ins.line,
                    )

    if ins.opcode in (Opcode.LOAD, Opcode.STORE):
        assert ins.var is not None
        target = resolve(ins.var, "memory object")
        if isinstance(target, VarDecl):
            if target.kind is VarKind.SCALAR and ins.index is not None:
                report(dc.INDEX_ON_SCALAR, f"scalar {ins.var!r} indexed in {ins.id!r}", ins.line)
            if target.kind is VarKind.ARRAY and ins.index is None:
                report(dc.MISSING_INDEX, f"array {ins.var!r} accessed without index in {ins.id!r}", ins.line)
            if target.kind is VarKind.STRUCT:
                if not isinstance(ins.index, FieldIndex):
                    report(dc.MISSING_INDEX, f"struct {ins.var!r} accessed without field in {ins.id!r}", ins.line)
                elif ins.index.name not in target.fields:
                    report(dc.BAD_FIELD, f"struct {ins.var!r} has no field {ins.index.name!r}", ins.line)
            if target.kind is VarKind.ARRAY and isinstance(ins.index, FieldIndex):
                report(dc.BAD_FIELD, f"array {ins.var!r} accessed with field selector in {ins.id!r}", ins.line)
        elif isinstance(target, str) and target in ("iv",):
            report(dc.INDEX_ON_SCALAR, f"induction variable {ins.var!r} is not a memory object", ins.line)
        if isinstance(ins.index, OpaqueIndex):
            resolve(ins.index.name, "index variable")
        if isinstance(ins.index, AffineIndex):
            ivs = {r.iv for r in region_stack if r.is_loop() and r.iv}
            for _, name in ins.index.terms:
                if name not in ivs:
                    target = scope.lookup(name)
                    if target != "iv" and name not in ivs:
                        report(
                            dc.UNRESOLVED,
                            f"affine index of {ins.id!r} uses {name!r}, which is not an "
                            "enclosing induction variable",
                            ins.line,
                        )

    if ins.opcode is Opcode.CALL:
        assert ins.callee is not None
        callee = program.function(ins.callee)
        if callee is not None and len(ins.args) != len(callee.params):
            report(
                dc.BAD_CLAUSE,
                f"call {ins.id!r} passes {len(ins.args)} args to "
                f"{ins.callee!r} which takes {len(callee.params)}",
                ins.line,
            )

    if ins.dest is not None:
        target = resolve(ins.dest, "destination")
        if isinstance(target, VarDecl) and target.kind is not VarKind.SCALAR:
            report(
                dc.INDEX_ON_SCALAR,
                f"destination {ins.dest!r} of {ins.id!r} must be a scalar",
                ins.line,
            )
        if target == "iv":
            report(dc.INDEX_ON_SCALAR, f"{ins.id!r} writes induction variable {ins.dest!r}", ins.line)
