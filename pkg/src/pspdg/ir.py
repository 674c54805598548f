"""Core data model for the structured parallel mini-IR.

A program is a list of global declarations plus functions.  Each function
body is a tree of regions; instruction runs inside a region form implicit
blocks.  Parallel constructs (parallel_for, task, critical, ...) are region
kinds rather than separate pragma objects, so the tree *is* the nesting
structure and no region discovery from control flow is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union


class RegionKind(Enum):
    SEQ = "seq"
    LOOP = "loop"
    PARALLEL_FOR = "parallel_for"
    TASK = "task"
    CRITICAL = "critical"
    ATOMIC = "atomic"
    SINGLE = "single"
    ORDERED = "ordered"
    SPAWN = "spawn"
    SCOPE = "scope"


#: Surface spellings accepted in `@pragma(...)` headers.  Worksharing-like
#: constructs are normalized to parallel_for/task at parse time; `parallel`
#: and `cilk_scope` are spellings of scope.
KIND_ALIASES = {
    "taskloop": RegionKind.PARALLEL_FOR,
    "simd": RegionKind.PARALLEL_FOR,
    "workshare": RegionKind.PARALLEL_FOR,
    "cilk_for": RegionKind.PARALLEL_FOR,
    "sections": RegionKind.TASK,
    "parallel": RegionKind.SCOPE,
    "cilk_scope": RegionKind.SCOPE,
}

LOOP_KINDS = (RegionKind.LOOP, RegionKind.PARALLEL_FOR)

#: Region kinds that establish a parallel execution context.
PARALLEL_CONTEXT_KINDS = (RegionKind.PARALLEL_FOR, RegionKind.TASK, RegionKind.SCOPE)

#: Kinds that must sit (transitively) inside a parallel context.
SYNC_REGION_KINDS = (
    RegionKind.CRITICAL,
    RegionKind.ATOMIC,
    RegionKind.SINGLE,
    RegionKind.ORDERED,
)


class ClauseKind(Enum):
    PRIVATE = "private"
    FIRSTPRIVATE = "firstprivate"
    LASTPRIVATE = "lastprivate"
    REDUCTION = "reduction"
    THREADPRIVATE = "threadprivate"
    NOWAIT = "nowait"
    DEPEND = "depend"
    SHARED = "shared"


class Opcode(Enum):
    ASSIGN = "assign"
    BINOP = "binop"
    LOAD = "load"
    STORE = "store"
    CALL = "call"
    PRINT = "print"
    BARRIER = "barrier"
    SYNC = "sync"


BINOP_NAMES = frozenset(
    [
        "add", "sub", "mul", "div", "mod", "min", "max",
        "and", "or", "xor", "shl", "shr",
        "eq", "ne", "lt", "le", "gt", "ge",
    ]
)

#: Trip count of a loop whose bound is not known statically or dynamically.
UNKNOWN_TRIP = "?"


@dataclass(frozen=True)
class Const:
    value: int

    def render(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Ref:
    name: str

    def render(self) -> str:
        return self.name


Operand = Union[Const, Ref]


@dataclass(frozen=True)
class AffineIndex:
    """Linear subscript c0 + sum(coef * iv) over enclosing induction vars."""

    terms: tuple[tuple[int, str], ...]  # (coefficient, iv name)
    const: int = 0

    def render(self) -> str:
        parts: list[str] = []
        for coef, name in self.terms:
            term = name if abs(coef) == 1 else f"{abs(coef)}*{name}"
            if not parts:
                parts.append(term if coef > 0 else f"-{term}")
            else:
                parts.append(f"+{term}" if coef > 0 else f"-{term}")
        if self.const or not parts:
            if not parts:
                parts.append(str(self.const))
            else:
                parts.append(f"+{self.const}" if self.const > 0 else str(self.const))
        return "".join(parts)

    def coefficient(self, iv: str) -> int:
        return sum(c for c, n in self.terms if n == iv)

    def iv_names(self) -> tuple[str, ...]:
        return tuple(n for _, n in self.terms)


@dataclass(frozen=True)
class OpaqueIndex:
    """Runtime subscript `?name`: the value of a scalar, unanalyzable statically."""

    name: str

    def render(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class FieldIndex:
    """Struct member selector `var.field`."""

    name: str

    def render(self) -> str:
        return f".{self.name}"


Index = Union[AffineIndex, OpaqueIndex, FieldIndex]


class VarKind(Enum):
    SCALAR = "scalar"
    ARRAY = "array"
    STRUCT = "struct"


@dataclass
class VarDecl:
    name: str
    kind: VarKind
    size: int | str | None = None  # array size: constant, symbolic name, or "?"
    fields: tuple[str, ...] = ()
    distinct_index: bool = False
    hyper: tuple[str, int | None] | None = None  # (reducer function, identity)
    line: int = 0

    def is_memory_object(self) -> bool:
        return True


@dataclass
class Instruction:
    id: str
    opcode: Opcode
    dest: str | None = None
    op: str | None = None  # binop operator name
    var: str | None = None  # load/store target object
    index: Index | None = None
    args: tuple[Operand, ...] = ()
    callee: str | None = None
    pos: int = -1  # program-wide ordinal, assigned at parse
    line: int = 0

    def reads_names(self) -> tuple[str, ...]:
        """Scalar identifiers whose values this instruction consumes."""
        names = [a.name for a in self.args if isinstance(a, Ref)]
        if isinstance(self.index, OpaqueIndex):
            names.append(self.index.name)
        return tuple(names)


@dataclass(frozen=True)
class Clause:
    kind: ClauseKind
    var: str | None = None
    reducer: str | None = None

    def render(self) -> str:
        if self.kind is ClauseKind.NOWAIT:
            return "nowait"
        if self.kind is ClauseKind.REDUCTION:
            return f"reduction({self.var}, {self.reducer})"
        return f"{self.kind.value}({self.var})"


Item = Union["Region", Instruction, VarDecl]


@dataclass
class Region:
    kind: RegionKind
    rid: str
    iv: str | None = None
    trip: int | str | None = None  # int, symbolic scalar name, or UNKNOWN_TRIP
    clauses: tuple[Clause, ...] = ()
    children: list[Item] = field(default_factory=list)
    line: int = 0

    def is_loop(self) -> bool:
        return self.kind in LOOP_KINDS

    def sub_regions(self) -> Iterator[Region]:
        for child in self.children:
            if isinstance(child, Region):
                yield child

    def instructions(self) -> Iterator[Instruction]:
        """All instructions in this region, depth first."""
        for child in self.children:
            if isinstance(child, Instruction):
                yield child
            elif isinstance(child, Region):
                yield from child.instructions()


@dataclass
class Function:
    name: str
    params: tuple[str, ...]
    body: list[Item] = field(default_factory=list)
    line: int = 0

    def instructions(self) -> Iterator[Instruction]:
        for item in self.body:
            if isinstance(item, Instruction):
                yield item
            elif isinstance(item, Region):
                yield from item.instructions()

    def regions(self) -> Iterator[Region]:
        def walk(items: list[Item]) -> Iterator[Region]:
            for item in items:
                if isinstance(item, Region):
                    yield item
                    yield from walk(item.children)

        yield from walk(self.body)

    def local_decls(self) -> Iterator[VarDecl]:
        def walk(items: list[Item]) -> Iterator[VarDecl]:
            for item in items:
                if isinstance(item, VarDecl):
                    yield item
                elif isinstance(item, Region):
                    yield from walk(item.children)

        yield from walk(self.body)


@dataclass
class Program:
    globals: list[VarDecl] = field(default_factory=list)
    functions: list[Function] = field(default_factory=list)

    # ------------------------------------------------------------------
    # derived lookup tables (built once after parsing)

    def function(self, name: str) -> Function | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def main(self) -> Function:
        fn = self.function("main")
        if fn is None:
            raise KeyError("program has no main function")
        return fn

    def instructions(self) -> Iterator[Instruction]:
        for fn in self.functions:
            yield from fn.instructions()

    def regions(self) -> Iterator[tuple[Function, Region]]:
        for fn in self.functions:
            for region in fn.regions():
                yield fn, region

    def instr_by_id(self) -> dict[str, Instruction]:
        return {ins.id: ins for ins in self.instructions()}

    def region_by_id(self) -> dict[str, Region]:
        return {r.rid: r for _, r in self.regions()}

    def region_parents(self) -> dict[str, str | None]:
        """Map region id -> enclosing region id (None at function top level)."""
        parents: dict[str, str | None] = {}

        def walk(region: Region, parent: str | None) -> None:
            parents[region.rid] = parent
            for child in region.sub_regions():
                walk(child, region.rid)

        for fn in self.functions:
            for item in fn.body:
                if isinstance(item, Region):
                    walk(item, None)
        return parents

    def instr_region(self) -> dict[str, Region | None]:
        """Map instruction id -> directly enclosing region (None at top level)."""
        out: dict[str, Region | None] = {}

        def walk(items: list[Item], region: Region | None) -> None:
            for item in items:
                if isinstance(item, Instruction):
                    out[item.id] = region
                elif isinstance(item, Region):
                    walk(item.children, item)

        for fn in self.functions:
            walk(fn.body, None)
        return out

    def instr_function(self) -> dict[str, Function]:
        out: dict[str, Function] = {}
        for fn in self.functions:
            for ins in fn.instructions():
                out[ins.id] = fn
        return out

    def enclosing_regions(self, instr_id: str) -> list[Region]:
        """Regions containing the instruction, outermost first."""
        chain: list[Region] = []

        def walk(items: list[Item], stack: list[Region]) -> bool:
            for item in items:
                if isinstance(item, Instruction) and item.id == instr_id:
                    chain.extend(stack)
                    return True
                if isinstance(item, Region):
                    stack.append(item)
                    if walk(item.children, stack):
                        return True
                    stack.pop()
            return False

        for fn in self.functions:
            if walk(fn.body, []):
                break
        return chain

    def enclosing_loops(self, instr_id: str) -> list[Region]:
        return [r for r in self.enclosing_regions(instr_id) if r.is_loop()]

    def var_decl(self, name: str, fn: Function | None = None) -> VarDecl | None:
        if fn is not None:
            for decl in fn.local_decls():
                if decl.name == name:
                    return decl
        for decl in self.globals:
            if decl.name == name:
                return decl
        if fn is None:
            for f in self.functions:
                for decl in f.local_decls():
                    if decl.name == name:
                        return decl
        return None
