"""Sequential execution, dynamic dependence DAGs and ideal-machine paths.

run_trace interprets a program under its sequential semantics and records
one event per dynamic instruction with exact read/write cell sets.  A plan
set then relaxes the trace into a DAG: unplanned code keeps its sequential
chain, planned loops fork one strand per iteration, privatizable and
reducible cells are renamed per instance (reducibles gaining a log-depth
synthetic merge tree), mutual-exclusion sections serialize in arrival
order, ordered sections in iteration order, and selector-annotated
live-outs materialize as copy-out events bound to the designated producer
instance.  Cross-iteration exact dependences of a planned loop are dropped:
they are precisely what the abstraction's retained constraints re-impose.

The critical path is the makespan of earliest-start scheduling with
unlimited cores and unit instruction cost; the independent oracle
recomputes it as a longest path over the materialized DAG.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .analysis import DOALL, HELIX, DSWP, EnumerationConfig, ParallelPlan, loop_sccs
from .graph import PRIVATIZABLE, PsPdg, REDUCIBLE
from .ir import (
    AffineIndex,
    ClauseKind,
    Const,
    FieldIndex,
    Function,
    Instruction,
    Item,
    OpaqueIndex,
    Opcode,
    Program,
    Ref,
    Region,
    RegionKind,
    UNKNOWN_TRIP,
    VarDecl,
    VarKind,
)
from .pdg import IO_OBJECT, Pdg

Cell = tuple  # (object, index) or (object, index, instance-tag)


class EmulatorError(Exception):
    pass


class TraceCapExceeded(EmulatorError):
    def __init__(self, trace: "DynTrace"):
        super().__init__(f"trace cap exceeded after {len(trace.events)} events")
        self.trace = trace


@dataclass
class Event:
    index: int
    instr: Instruction
    path: tuple[tuple[str, int], ...]  # (region/call id, instance) per level
    ivs: tuple[tuple[str, int], ...]
    frame: dict
    reads: tuple[Cell, ...]
    writes: tuple[Cell, ...]


@dataclass
class DynTrace:
    program: Program
    events: list[Event]
    final_memory: dict[Cell, int]
    outputs: list[tuple[int, ...]]
    loop_counts: dict[str, int]
    uninitialized_reads: list[Cell]
    cap_exceeded: bool = False

    @property
    def total_instructions(self) -> int:
        return len(self.events)


# ---------------------------------------------------------------------------
# sequential interpreter


def _binop(op: str, a: int, b: int) -> int:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0:
            raise EmulatorError("division by zero")
        return a // b
    if op == "mod":
        if b == 0:
            raise EmulatorError("modulo by zero")
        return a % b
    if op == "min":
        return min(a, b)
    if op == "max":
        return max(a, b)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return a << b
    if op == "shr":
        return a >> b
    if op == "eq":
        return int(a == b)
    if op == "ne":
        return int(a != b)
    if op == "lt":
        return int(a < b)
    if op == "le":
        return int(a <= b)
    if op == "gt":
        return int(a > b)
    if op == "ge":
        return int(a >= b)
    raise EmulatorError(f"unknown operator {op!r}")


class _Machine:
    """Shared instruction semantics for tracing and replay."""

    def __init__(self, program: Program):
        self.program = program
        self.memory: dict[Cell, int] = {}
        self.outputs: list[tuple[int, ...]] = []
        self.uninitialized: list[Cell] = []
        self.rename = None  # optional hook: cell -> cell

    def _cell(self, cell: Cell) -> Cell:
        return cell if self.rename is None else self.rename(cell)

    def read_cell(self, cell: Cell, reads: list[Cell]) -> int:
        cell = self._cell(cell)
        reads.append(cell)
        if cell not in self.memory:
            self.uninitialized.append(cell)
            self.memory[cell] = 0
        return self.memory[cell]

    def write_cell(self, cell: Cell, value: int, writes: list[Cell]) -> None:
        cell = self._cell(cell)
        writes.append(cell)
        self.memory[cell] = value

    def resolve(self, name: str, ivs: dict[str, int], frame: dict):
        """('val', int) or ('obj', object-name) for a bare identifier."""
        if name in ivs:
            return ("val", ivs[name])
        if name in frame:
            return frame[name]
        return ("obj", name)  # global

    def operand_value(self, op, ivs: dict[str, int], frame: dict, reads: list[Cell]) -> int:
        if isinstance(op, Const):
            return op.value
        kind, value = self.resolve(op.name, ivs, frame)
        if kind == "val":
            return value
        return self.read_cell((value, None), reads)

    def index_value(self, ins: Instruction, ivs: dict[str, int], frame: dict, reads: list[Cell]):
        index = ins.index
        if index is None:
            return None
        if isinstance(index, FieldIndex):
            return index.name
        if isinstance(index, OpaqueIndex):
            kind, value = self.resolve(index.name, ivs, frame)
            return value if kind == "val" else self.read_cell((value, None), reads)
        assert isinstance(index, AffineIndex)
        total = index.const
        for coef, name in index.terms:
            kind, value = self.resolve(name, ivs, frame)
            total += coef * (value if kind == "val" else self.read_cell((value, None), reads))
        return total

    def object_name(self, name: str, ivs: dict[str, int], frame: dict) -> str:
        kind, value = self.resolve(name, ivs, frame)
        if kind != "obj":
            raise EmulatorError(f"{name!r} is not a memory object here")
        return value

    def check_bounds(self, obj: str, idx, source_name: str) -> None:
        decl = self.program.var_decl(source_name)
        if (
            decl is not None
            and decl.kind is VarKind.ARRAY
            and isinstance(decl.size, int)
            and isinstance(idx, int)
            and not (0 <= idx < decl.size)
        ):
            raise EmulatorError(f"index {idx} out of bounds for {source_name!r}[{decl.size}]")

    def execute(
        self, ins: Instruction, ivs: dict[str, int], frame: dict
    ) -> tuple[tuple[Cell, ...], tuple[Cell, ...]]:
        """Run one instruction; returns its (reads, writes) cell tuples."""
        reads: list[Cell] = []
        writes: list[Cell] = []
        if ins.opcode is Opcode.ASSIGN:
            value = self.operand_value(ins.args[0], ivs, frame, reads)
            self.write_cell((self.object_name(ins.dest, ivs, frame), None), value, writes)
        elif ins.opcode is Opcode.BINOP:
            a = self.operand_value(ins.args[0], ivs, frame, reads)
            b = self.operand_value(ins.args[1], ivs, frame, reads)
            self.write_cell(
                (self.object_name(ins.dest, ivs, frame), None), _binop(ins.op or "", a, b), writes
            )
        elif ins.opcode is Opcode.LOAD:
            obj = self.object_name(ins.var or "", ivs, frame)
            idx = self.index_value(ins, ivs, frame, reads)
            self.check_bounds(obj, idx, ins.var or "")
            value = self.read_cell((obj, idx), reads)
            self.write_cell((self.object_name(ins.dest, ivs, frame), None), value, writes)
        elif ins.opcode is Opcode.STORE:
            value = self.operand_value(ins.args[0], ivs, frame, reads)
            obj = self.object_name(ins.var or "", ivs, frame)
            idx = self.index_value(ins, ivs, frame, reads)
            self.check_bounds(obj, idx, ins.var or "")
            self.write_cell((obj, idx), value, writes)
        elif ins.opcode is Opcode.PRINT:
            values = tuple(self.operand_value(a, ivs, frame, reads) for a in ins.args)
            self.outputs.append(values)
            writes.append((IO_OBJECT, None))
        elif ins.opcode in (Opcode.BARRIER, Opcode.SYNC):
            pass
        else:
            raise EmulatorError(f"cannot execute {ins.opcode.value} directly")
        return tuple(reads), tuple(writes)


class _Tracer:
    def __init__(self, program: Program, inputs: dict | None, cap: int):
        self.machine = _Machine(program)
        self.program = program
        self.cap = cap
        self.events: list[Event] = []
        self.loop_counts: dict[str, int] = {}
        self.invocations = 0
        self._regions = program.region_by_id()
        if inputs:
            for name, value in inputs.items():
                if isinstance(value, dict):
                    for idx, item in value.items():
                        self.machine.memory[(name, idx)] = int(item)
                elif isinstance(value, list):
                    for idx, item in enumerate(value):
                        self.machine.memory[(name, idx)] = int(item)
                else:
                    self.machine.memory[(name, None)] = int(value)

    def trace(self) -> DynTrace:
        main = self.program.main()
        frame = self._new_frame(main, [], {}, {})
        try:
            self._run_items(main.body, {}, frame, ())
        except TraceCapExceeded:
            trace = self._finish()
            trace.cap_exceeded = True
            raise TraceCapExceeded(trace)
        return self._finish()

    def _finish(self) -> DynTrace:
        return DynTrace(
            program=self.program,
            events=self.events,
            final_memory=dict(self.machine.memory),
            outputs=list(self.machine.outputs),
            loop_counts=dict(self.loop_counts),
            uninitialized_reads=list(self.machine.uninitialized),
        )

    def _new_frame(self, fn: Function, args: list, ivs: dict, caller_frame: dict) -> dict:
        frame: dict = {}
        for param, arg in zip(fn.params, args):
            if isinstance(arg, Const):
                frame[param] = ("val", arg.value)
            else:
                frame[param] = self.machine.resolve(arg.name, ivs, caller_frame)
        qualifier = f"{fn.name}@{self.invocations}"
        self.invocations += 1
        for decl in fn.local_decls():
            name = decl.name if fn.name == "main" else f"{qualifier}:{decl.name}"
            frame[decl.name] = ("obj", name)
        return frame

    def _emit(self, ins: Instruction, ivs: dict, frame: dict, path: tuple) -> None:
        if len(self.events) >= self.cap:
            raise TraceCapExceeded(self._finish())
        reads, writes = self.machine.execute(ins, ivs, frame)
        self.events.append(
            Event(
                index=len(self.events),
                instr=ins,
                path=path,
                ivs=tuple(sorted(ivs.items())),
                frame=frame,
                reads=reads,
                writes=writes,
            )
        )
        for rid, _ in path:
            region = self._regions.get(rid)
            if region is not None and region.is_loop():
                self.loop_counts[rid] = self.loop_counts.get(rid, 0) + 1

    def _run_items(self, items: list[Item], ivs: dict, frame: dict, path: tuple) -> None:
        for item in items:
            if isinstance(item, VarDecl):
                continue
            if isinstance(item, Instruction):
                if item.opcode is Opcode.CALL:
                    self._run_call(item, ivs, frame, path)
                else:
                    self._emit(item, ivs, frame, path)
            else:
                self._run_region(item, ivs, frame, path)

    def _run_call(self, ins: Instruction, ivs: dict, frame: dict, path: tuple) -> None:
        callee = self.program.function(ins.callee or "")
        if callee is None:
            raise EmulatorError(f"cannot execute undeclared function {ins.callee!r}")
        self._emit(ins, ivs, frame, path)  # the call itself costs one instruction
        sub_frame = self._new_frame(callee, list(ins.args), ivs, frame)
        sub_path = path + ((f"call:{ins.id}", self.invocations),)
        self._run_items(callee.body, {}, sub_frame, sub_path)

    def _trip_value(self, region: Region, ivs: dict, frame: dict) -> int:
        if isinstance(region.trip, int):
            return region.trip
        if isinstance(region.trip, str) and region.trip != UNKNOWN_TRIP:
            kind, value = self.machine.resolve(region.trip, ivs, frame)
            if kind == "val":
                return value
            reads: list[Cell] = []
            return self.machine.read_cell((value, None), reads)
        raise EmulatorError(
            f"loop {region.rid!r} has no concrete trip count under these inputs"
        )

    def _run_region(self, region: Region, ivs: dict, frame: dict, path: tuple) -> None:
        if region.is_loop():
            trip = self._trip_value(region, ivs, frame)
            for k in range(trip):
                sub_ivs = dict(ivs)
                if region.iv:
                    sub_ivs[region.iv] = k
                self._run_items(region.children, sub_ivs, frame, path + ((region.rid, k),))
        else:
            self._run_items(region.children, ivs, frame, path + ((region.rid, 0),))


def run_trace(
    program: Program, inputs: dict | None = None, trace_cap: int = 1_000_000
) -> DynTrace:
    """Deterministic sequential-semantics trace with exact cell sets."""
    return _Tracer(program, inputs, trace_cap).trace()
