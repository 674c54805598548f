"""Baseline sequential program dependence graph.

build_pdg() sees the program the way a sequential compiler sees outlined
parallel code: parallel annotations are plain regions, every pair of
accesses to the same abstract memory object with at least one write yields
a dependence edge unless the affine subscript test proves the cells
disjoint.  Dependences are recorded per carrying loop level, since a
dependence may be carried by an outer loop only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from .ir import (
    AffineIndex,
    FieldIndex,
    Function,
    Instruction,
    OpaqueIndex,
    Opcode,
    Program,
    Ref,
    Region,
    VarDecl,
    VarKind,
)

#: Pseudo memory object serializing observable output.
IO_OBJECT = "__io__"

RAW = "raw"
WAR = "war"
WAW = "waw"
CONTROL = "control"

DATA_KINDS = (RAW, WAR, WAW)


@dataclass(frozen=True)
class DepEdge:
    src: str
    dst: str
    kind: str
    var: str
    carried_by: str | None  # loop region id, None = loop independent

    def sort_key(self) -> tuple:
        return (self.src, self.dst, self.kind, self.var, self.carried_by or "")


@dataclass(frozen=True)
class Pdg:
    nodes: frozenset[str]
    edges: frozenset[DepEdge]

    def data_edges(self) -> Iterator[DepEdge]:
        for edge in self.edges:
            if edge.kind in DATA_KINDS:
                yield edge

    def carried(self, loop_id: str) -> frozenset[DepEdge]:
        return frozenset(e for e in self.edges if e.carried_by == loop_id)


# ---------------------------------------------------------------------------
# abstract accesses

WHOLE = "whole"  # entire object (call summaries)


@dataclass(frozen=True)
class Access:
    var: str
    write: bool
    index: object | None  # None = scalar cell, WHOLE, Index


def call_summaries(program: Program) -> dict[str, tuple[frozenset, frozenset]]:
    """Per-function transitive (reads, writes) over globals and parameters.

    Entries are ("g", name) for globals and ("p", position) for parameters.
    Function-local variables are invisible to callers (fresh per call).
    """
    summaries: dict[str, tuple[set, set]] = {fn.name: (set(), set()) for fn in program.functions}
    global_names = {decl.name for decl in program.globals}

    def local_names(fn: Function) -> set[str]:
        return {decl.name for decl in fn.local_decls()}

    changed = True
    while changed:
        changed = False
        for fn in program.functions:
            reads, writes = summaries[fn.name]
            before = (len(reads), len(writes))
            locals_ = local_names(fn)
            params = {name: i for i, name in enumerate(fn.params)}

            def classify(name: str):
                if name in locals_:
                    return None
                if name in params:
                    return ("p", params[name])
                if name in global_names or name == IO_OBJECT:
                    return ("g", name)
                return None  # induction variables and unknowns

            for ins in fn.instructions():
                for name in ins.reads_names():
                    entry = classify(name)
                    if entry:
                        reads.add(entry)
                if ins.opcode is Opcode.LOAD and ins.var:
                    entry = classify(ins.var)
                    if entry:
                        reads.add(entry)
                if ins.opcode is Opcode.STORE and ins.var:
                    entry = classify(ins.var)
                    if entry:
                        writes.add(entry)
                if ins.opcode in (Opcode.ASSIGN, Opcode.BINOP, Opcode.LOAD):
                    entry = classify(ins.dest or "")
                    if entry:
                        writes.add(entry)
                if ins.opcode is Opcode.PRINT:
                    writes.add(("g", IO_OBJECT))
                if ins.opcode is Opcode.CALL:
                    callee = program.function(ins.callee or "")
                    if callee is None:
                        # opaque external: reads and writes every object argument
                        for arg in ins.args:
                            if isinstance(arg, Ref):
                                entry = classify(arg.name)
                                if entry:
                                    reads.add(entry)
                                    writes.add(entry)
                    else:
                        sub_reads, sub_writes = summaries[callee.name]
                        for entry_set, target in ((sub_reads, reads), (sub_writes, writes)):
                            for entry in entry_set:
                                if entry[0] == "g":
                                    target.add(entry)
                                else:
                                    pos = entry[1]
                                    if pos < len(ins.args) and isinstance(ins.args[pos], Ref):
                                        mapped = classify(ins.args[pos].name)
                                        if mapped:
                                            target.add(mapped)
            if (len(reads), len(writes)) != before:
                changed = True
    return {name: (frozenset(r), frozenset(w)) for name, (r, w) in summaries.items()}


def instruction_accesses(program: Program) -> dict[str, list[Access]]:
    """Abstract memory accesses per instruction, caller-visible objects only."""
    summaries = call_summaries(program)
    accesses: dict[str, list[Access]] = {}
    for fn in program.functions:
        locals_ = {decl.name for decl in fn.local_decls()}
        params = set(fn.params)
        global_names = {decl.name for decl in program.globals}

        def is_object(name: str) -> bool:
            return name in locals_ or name in params or name in global_names

        for ins in fn.instructions():
            acc: list[Access] = []
            for name in ins.reads_names():
                if is_object(name):
                    acc.append(Access(name, False, None))
            if ins.opcode is Opcode.LOAD and ins.var:
                acc.append(Access(ins.var, False, ins.index))
                if ins.dest:
                    acc.append(Access(ins.dest, True, None))
            elif ins.opcode is Opcode.STORE and ins.var:
                acc.append(Access(ins.var, True, ins.index))
            elif ins.opcode in (Opcode.ASSIGN, Opcode.BINOP) and ins.dest:
                acc.append(Access(ins.dest, True, None))
            elif ins.opcode is Opcode.PRINT:
                acc.append(Access(IO_OBJECT, True, WHOLE))
            elif ins.opcode is Opcode.CALL:
                callee = program.function(ins.callee or "")
                if callee is None:
                    for arg in ins.args:
                        if isinstance(arg, Ref) and is_object(arg.name):
                            acc.append(Access(arg.name, False, WHOLE))
                            acc.append(Access(arg.name, True, WHOLE))
                else:
                    reads, writes = summaries[callee.name]
                    for entries, write in ((reads, False), (writes, True)):
                        for entry in sorted(entries):
                            if entry[0] == "g":
                                acc.append(Access(entry[1], write, WHOLE))
                            else:
                                pos = entry[1]
                                if pos < len(ins.args) and isinstance(ins.args[pos], Ref):
                                    name = ins.args[pos].name
                                    if is_object(name):
                                        acc.append(Access(name, write, WHOLE))
            accesses[ins.id] = acc
    return accesses


# ---------------------------------------------------------------------------
# affine subscript test


def _solvable(terms: list[tuple[int, int | None, int | None]], const: int) -> bool:
    """Does sum(coef*x) + const == 0 have an integer solution within bounds?

    Bounds are inclusive; None means unbounded on that side.  gcd plus
    interval reasoning: exact for the ZIV/SIV shapes we care about and
    conservative (answers True) for anything richer.
    """
    live = [(c, lo, hi) for c, lo, hi in terms if c != 0]
    if not live:
        return const == 0
    g = 0
    for c, _, _ in live:
        g = math.gcd(g, abs(c))
    if const % g != 0:
        return False
    lo_sum: int | None = 0
    hi_sum: int | None = 0
    for c, lo, hi in live:
        ends = []
        for bound in (lo, hi):
            ends.append(None if bound is None else c * bound)
        lo_end, hi_end = ends
        if c < 0:
            lo_end, hi_end = hi_end, lo_end
        lo_sum = None if (lo_sum is None or lo_end is None) else lo_sum + lo_end
        hi_sum = None if (hi_sum is None or hi_end is None) else hi_sum + hi_end
    target = -const
    if lo_sum is not None and target < lo_sum:
        return False
    if hi_sum is not None and target > hi_sum:
        return False
    return True


@dataclass(frozen=True)
class _LoopInfo:
    region: Region
    iv: str | None
    hi: int | None  # inclusive max of iv, None when unknown


def _loop_chain(program: Program, instr_id: str) -> list[_LoopInfo]:
    chain = []
    for region in program.enclosing_loops(instr_id):
        hi = region.trip - 1 if isinstance(region.trip, int) else None
        chain.append(_LoopInfo(region, region.iv, hi))
    return chain


def _coef(index: AffineIndex, iv: str | None) -> int:
    return index.coefficient(iv) if iv else 0


def _affine_same_iteration(
    iu: AffineIndex, iv_: AffineIndex, common: list[_LoopInfo],
    extra_u: list[_LoopInfo], extra_v: list[_LoopInfo],
) -> bool:
    terms = []
    for info in common:
        terms.append((_coef(iu, info.iv) - _coef(iv_, info.iv), 0, info.hi))
    for info in extra_u:
        terms.append((_coef(iu, info.iv), 0, info.hi))
    for info in extra_v:
        terms.append((-_coef(iv_, info.iv), 0, info.hi))
    return _solvable(terms, iu.const - iv_.const)


def _affine_carried(
    iu: AffineIndex, iv_: AffineIndex, level: int, common: list[_LoopInfo],
    extra_u: list[_LoopInfo], extra_v: list[_LoopInfo], u_first: bool,
) -> bool:
    """Can instances in different iterations of common[level] touch one cell?

    u_first asks for solutions where u's instance runs in an earlier
    iteration of the carrying loop than v's.
    """
    terms = []
    info_l = common[level]
    cu, cv = _coef(iu, info_l.iv), _coef(iv_, info_l.iv)
    for info in common[:level]:
        terms.append((_coef(iu, info.iv) - _coef(iv_, info.iv), 0, info.hi))
    # j_l = i_l + d (u first) or i_l - d (v first), d >= 1
    terms.append((cu - cv, 0, info_l.hi))
    d_hi = info_l.hi if info_l.hi is None else max(info_l.hi, 1)
    terms.append((-cv if u_first else cv, 1, d_hi))
    for info in common[level + 1 :]:
        terms.append((_coef(iu, info.iv), 0, info.hi))
        terms.append((-_coef(iv_, info.iv), 0, info.hi))
    for info in extra_u:
        terms.append((_coef(iu, info.iv), 0, info.hi))
    for info in extra_v:
        terms.append((-_coef(iv_, info.iv), 0, info.hi))
    return _solvable(terms, iu.const - iv_.const)


# ---------------------------------------------------------------------------
# pairwise dependence analysis


def _overlap_profile(
    au: Access,
    av: Access,
    decl: VarDecl | None,
    common: list[_LoopInfo],
    extra_u: list[_LoopInfo],
    extra_v: list[_LoopInfo],
) -> tuple[bool, list[tuple[bool, bool]]]:
    """(same-iteration overlap, per-common-level (u-first, v-first) overlap)."""
    n = len(common)
    all_yes = (True, [(True, True)] * n)
    none_ = (False, [(False, False)] * n)

    u_idx, v_idx = au.index, av.index
    if u_idx == WHOLE or v_idx == WHOLE:
        return all_yes
    if isinstance(u_idx, FieldIndex) or isinstance(v_idx, FieldIndex):
        if isinstance(u_idx, FieldIndex) and isinstance(v_idx, FieldIndex):
            return all_yes if u_idx.name == v_idx.name else none_
        return all_yes
    if u_idx is None and v_idx is None:  # scalar cell
        return all_yes
    if isinstance(u_idx, OpaqueIndex) or isinstance(v_idx, OpaqueIndex):
        if decl is not None and decl.distinct_index:
            return (True, [(False, False)] * n)
        return all_yes
    assert isinstance(u_idx, AffineIndex) and isinstance(v_idx, AffineIndex)
    same = _affine_same_iteration(u_idx, v_idx, common, extra_u, extra_v)
    levels = []
    for level in range(n):
        levels.append(
            (
                _affine_carried(u_idx, v_idx, level, common, extra_u, extra_v, True),
                _affine_carried(u_idx, v_idx, level, common, extra_u, extra_v, False),
            )
        )
    return (same, levels)


def _dep_kind(src_write: bool, dst_write: bool) -> str | None:
    if src_write and dst_write:
        return WAW
    if src_write:
        return RAW
    if dst_write:
        return WAR
    return None


def build_pdg(program: Program) -> Pdg:
    """Conservative dependence graph under the sequential interpretation."""
    accesses = instruction_accesses(program)
    edges: set[DepEdge] = set()
    nodes: set[str] = set()

    for fn in program.functions:
        instrs = list(fn.instructions())
        nodes.update(ins.id for ins in instrs)
        chains = {ins.id: _loop_chain(program, ins.id) for ins in instrs}

        for i, u in enumerate(instrs):
            for v in instrs[i:]:
                if u.id == v.id and u is not v:
                    continue
                chain_u, chain_v = chains[u.id], chains[v.id]
                ncommon = 0
                while (
                    ncommon < len(chain_u)
                    and ncommon < len(chain_v)
                    and chain_u[ncommon].region.rid == chain_v[ncommon].region.rid
                ):
                    ncommon += 1
                common = chain_u[:ncommon]
                extra_u = chain_u[ncommon:]
                extra_v = chain_v[ncommon:]

                for au in accesses[u.id]:
                    for av in accesses[v.id]:
                        if au.var != av.var or not (au.write or av.write):
                            continue
                        decl = program.var_decl(au.var, fn)
                        same, levels = _overlap_profile(au, av, decl, common, extra_u, extra_v)
                        if same and u.id != v.id:
                            kind = _dep_kind(au.write, av.write)
                            if kind:
                                edges.add(DepEdge(u.id, v.id, kind, au.var, None))
                        for level, (u_first, v_first) in enumerate(levels):
                            loop_id = common[level].region.rid
                            if u_first:
                                kind = _dep_kind(au.write, av.write)
                                if kind:
                                    edges.add(DepEdge(u.id, v.id, kind, au.var, loop_id))
                            if v_first and u.id != v.id:
                                kind = _dep_kind(av.write, au.write)
                                if kind:
                                    edges.add(DepEdge(v.id, u.id, kind, au.var, loop_id))

        # loops with symbolic trip counts depend on the defining instructions
        for region in fn.regions():
            if region.is_loop() and isinstance(region.trip, str) and region.trip != "?":
                defs = [
                    ins
                    for ins in instrs
                    if ins.dest == region.trip
                    or (ins.opcode is Opcode.STORE and ins.var == region.trip)
                ]
                body = list(region.instructions())
                for d in defs:
                    for ins in body:
                        if d.id != ins.id:
                            edges.add(DepEdge(d.id, ins.id, CONTROL, region.trip, None))

    return Pdg(nodes=frozenset(nodes), edges=frozenset(edges))
