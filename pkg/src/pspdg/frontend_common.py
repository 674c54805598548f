"""Shared machinery for the OpenMP- and Cilk-style graph frontends.

Both frontends start from the same structural translation (regions become
hierarchical nodes, instructions become leaves, baseline records become
per-level directed edges) and then apply their construct-specific rules:
declared independence removes carried records, data clauses license
removals and emit parallel-semantic variables, synchronization regions
re-anchor their records as node-level edges.
"""

from __future__ import annotations

from dataclasses import replace

from . import diagnostics as dc
from .diagnostics import Diagnostic, DiagnosticError
from .graph import (
    ALL_CONSUMERS,
    ANY_PRODUCER,
    ATOMIC,
    Directed,
    HierPayload,
    InstrPayload,
    JOIN,
    LAST_PRODUCER,
    ORDER,
    PRIVATIZABLE,
    PsNode,
    PsPdg,
    PsVariable,
    REDUCIBLE,
    RemovedDep,
    Selector,
    SINGULAR,
    SyntheticPayload,
    Trait,
    Undirected,
    VariableAccess,
)
from .ir import (
    Clause,
    ClauseKind,
    Function,
    Instruction,
    Item,
    Opcode,
    Program,
    Region,
    RegionKind,
)
from .pdg import DATA_KINDS, Pdg, instruction_accesses
from .printer import render_statement

PARALLEL_NODE_KINDS = (RegionKind.PARALLEL_FOR, RegionKind.SCOPE, RegionKind.TASK)
MUTEX_KINDS = (RegionKind.CRITICAL, RegionKind.ATOMIC)


def gate_model(program: Program, model: str) -> None:
    """Reject constructs outside the frontend's source model."""
    diags: list[Diagnostic] = []
    for _, region in program.regions():
        if model == "openmp" and region.kind is RegionKind.SPAWN:
            diags.append(
                Diagnostic(
                    dc.UNSUPPORTED_CONSTRUCT,
                    f"spawn region {region.rid!r} is not an OpenMP construct",
                    region.line,
                )
            )
        if model == "cilk":
            if region.kind in (RegionKind.TASK, RegionKind.SINGLE, RegionKind.ORDERED) + MUTEX_KINDS:
                diags.append(
                    Diagnostic(
                        dc.UNSUPPORTED_CONSTRUCT,
                        f"{region.kind.value} region {region.rid!r} is not a Cilk construct",
                        region.line,
                    )
                )
            if region.clauses:
                diags.append(
                    Diagnostic(
                        dc.UNSUPPORTED_CONSTRUCT,
                        f"clauses on {region.rid!r} are not Cilk constructs (use hyperobjects)",
                        region.line,
                    )
                )
    for ins in program.instructions():
        if model == "openmp" and ins.opcode is Opcode.SYNC:
            diags.append(
                Diagnostic(
                    dc.UNSUPPORTED_CONSTRUCT,
                    f"sync instruction {ins.id!r} is not an OpenMP construct",
                    ins.line,
                )
            )
        if model == "cilk" and ins.opcode is Opcode.BARRIER:
            diags.append(
                Diagnostic(
                    dc.UNSUPPORTED_CONSTRUCT,
                    f"barrier instruction {ins.id!r} is not a Cilk construct",
                    ins.line,
                )
            )
    if diags:
        raise DiagnosticError(diags)


class GraphBuilder:
    """Builds the node tree and rewrites edge records construct by construct."""

    def __init__(self, program: Program, base: Pdg, model: str):
        self.program = program
        self.base = base
        self.model = model
        self.nodes: dict[int, PsNode] = {}
        self.contexts: set[int] = set()
        self.directed: set[Directed] = set()
        self.undirected: set[Undirected] = set()
        self.variables: list[PsVariable] = []
        self.licensed: list[RemovedDep] = []
        self.region_node: dict[str, int] = {}
        self.instr_node: dict[str, int] = {}
        self.function_node: dict[str, int] = {}
        self.node_region: dict[int, Region] = {}
        self._next_id = 0
        self._instr_region = program.instr_region()
        self._region_parents = program.region_parents()
        self._regions = dict(program.region_by_id())
        self._node_parent: dict[int, int] = {}
        self._node_to_instr: dict[int, str] = {}

    # ------------------------------------------------------------------
    # node tree

    def _new_id(self) -> int:
        self._next_id += 1
        return self._next_id - 1

    def _leaf(self, ins: Instruction, depth: int) -> int:
        node_id = self._new_id()
        self.nodes[node_id] = PsNode(
            id=node_id,
            payload=InstrPayload(ins.id, ins.pos, render_statement(ins)),
            anchor=(ins.pos, 0),
            depth=depth,
        )
        self.instr_node[ins.id] = node_id
        self._node_to_instr[node_id] = ins.id
        return node_id

    def _synthetic(self, tag: str, anchor: tuple[int, int], depth: int) -> int:
        node_id = self._new_id()
        self.nodes[node_id] = PsNode(
            id=node_id, payload=SyntheticPayload(tag), anchor=anchor, depth=depth
        )
        return node_id

    def _hier(self, children: list[int], depth: int, loopish: bool, labeled: bool) -> int:
        node_id = self._new_id()
        anchor = min(self.nodes[c].anchor for c in children)
        self.nodes[node_id] = PsNode(
            id=node_id,
            payload=HierPayload(tuple(children), loopish=loopish),
            anchor=anchor,
            depth=depth,
        )
        for child in children:
            self._node_parent[child] = node_id
        if labeled:
            self.contexts.add(node_id)
        return node_id

    def _build_items(self, items: list[Item], depth: int) -> list[int]:
        children: list[int] = []
        for item in items:
            if isinstance(item, Instruction):
                children.append(self._leaf(item, depth))
            elif isinstance(item, Region):
                node_id = self._build_region(item, depth)
                if node_id is not None:
                    children.append(node_id)
        return children

    def _build_region(self, region: Region, depth: int) -> int | None:
        children = self._build_items(region.children, depth + 1)
        if region.kind is RegionKind.SPAWN and children:
            first_anchor = min(self.nodes[c].anchor for c in children)
            knot = self._synthetic("knot", (first_anchor[0], -1), depth + 1)
            children.insert(0, knot)
        if (
            self.model == "cilk"
            and region.kind is RegionKind.SCOPE
            and children
            and not self._is_sync_node(children[-1])
        ):
            last_anchor = max(self.nodes[c].anchor for c in children)
            children.append(self._synthetic("sync", (last_anchor[0], 1), depth + 1))
        if not children:
            return None
        labeled = region.kind in (
            RegionKind.LOOP,
            RegionKind.PARALLEL_FOR,
            RegionKind.SCOPE,
            RegionKind.TASK,
        )
        node_id = self._hier(children, depth, region.is_loop(), labeled)
        self.region_node[region.rid] = node_id
        self.node_region[node_id] = region
        return node_id

    def build_tree(self) -> int:
        fn_nodes: list[int] = []
        for fn in self.program.functions:
            children = self._build_items(fn.body, 2)
            if not children:
                continue
            fn_node = self._hier(children, 1, loopish=False, labeled=False)
            self.function_node[fn.name] = fn_node
            fn_nodes.append(fn_node)
        if not fn_nodes:
            fn_nodes = [self._synthetic("entry", (0, 0), 1)]
        root = self._hier(fn_nodes, 0, loopish=False, labeled=False)
        return root

    def _is_sync_node(self, node_id: int) -> bool:
        payload = self.nodes[node_id].payload
        if isinstance(payload, SyntheticPayload):
            return payload.tag == "sync"
        return isinstance(payload, InstrPayload) and payload.text == "sync"

    # ------------------------------------------------------------------
    # region helpers

    def region_chain(self, instr_id: str) -> list[Region]:
        """Enclosing regions of an instruction, innermost first."""
        chain: list[Region] = []
        region = self._instr_region.get(instr_id)
        while region is not None:
            chain.append(region)
            parent = self._region_parents.get(region.rid)
            region = self._regions.get(parent) if parent else None
        return chain

    def inside(self, instr_id: str, region: Region) -> bool:
        return any(r.rid == region.rid for r in self.region_chain(instr_id))

    def region_ancestors(self, region: Region) -> list[Region]:
        out = []
        rid = self._region_parents.get(region.rid)
        while rid is not None:
            out.append(self._regions[rid])
            rid = self._region_parents.get(rid)
        return out

    def innermost_parallel_node(self, region: Region) -> int | None:
        for ancestor in self.region_ancestors(region):
            if ancestor.kind in PARALLEL_NODE_KINDS:
                return self.region_node.get(ancestor.rid)
        return None

    def is_nested(self, inner: Region, outer: Region) -> bool:
        return any(r.rid == outer.rid for r in self.region_ancestors(inner))

    # ------------------------------------------------------------------
    # edge records

    def convert_base_edges(self) -> None:
        for edge in self.base.edges:
            src = self.instr_node.get(edge.src)
            dst = self.instr_node.get(edge.dst)
            if src is None or dst is None:
                continue
            carried = frozenset()
            if edge.carried_by is not None:
                loop_node = self.region_node.get(edge.carried_by)
                if loop_node is None:
                    continue
                carried = frozenset({loop_node})
            self.directed.add(Directed(src, dst, edge.kind, edge.var, carried))

    def records_carried_by(self, region: Region) -> list[Directed]:
        loop_node = self.region_node.get(region.rid)
        if loop_node is None:
            return []
        return [
            e for e in self.directed if loop_node in e.carried and e.kind in DATA_KINDS
        ]

    def record_instrs(self, record: Directed) -> tuple[str, str] | None:
        src = self._node_to_instr.get(record.src)
        dst = self._node_to_instr.get(record.dst)
        if src is None or dst is None:
            return None
        return (src, dst)

    def add_trait(self, node_id: int, kind: str, context: int) -> None:
        node = self.nodes[node_id]
        self.nodes[node_id] = replace(node, traits=node.traits | {Trait(kind, context)})

    def add_variable(
        self,
        name: str,
        kind: str,
        context: int,
        reducer: int | None = None,
        identity: int | None = None,
    ) -> None:
        var = PsVariable(name, kind, context, reducer, identity)
        if var not in self.variables:
            self.variables.append(var)

    # ------------------------------------------------------------------
    # navigation used by the spawn shapes

    def following_node(self, node_id: int) -> int | None:
        """Next node in program order after this one, not leaving the scope."""
        cur = node_id
        while cur in self._node_parent:
            parent = self._node_parent[cur]
            children = self.nodes[parent].payload.children
            idx = children.index(cur)
            if idx + 1 < len(children):
                return children[idx + 1]
            region = self.node_region.get(parent)
            if region is not None and region.kind is RegionKind.SCOPE:
                return None
            cur = parent
        return None

    def preceding_node(self, node_id: int) -> int | None:
        cur = node_id
        while cur in self._node_parent:
            parent = self._node_parent[cur]
            children = self.nodes[parent].payload.children
            idx = children.index(cur)
            if idx > 0:
                return children[idx - 1]
            cur = parent
        return None

    def leaves_in_scope(self, scope: Region) -> list[int]:
        """Leaf nodes of a scope excluding anything under a nested scope."""
        node_id = self.region_node.get(scope.rid)
        if node_id is None:
            return []
        out: list[int] = []

        def walk(nid: int) -> None:
            node = self.nodes[nid]
            if isinstance(node.payload, HierPayload):
                inner = self.node_region.get(nid)
                if inner is not None and inner.kind is RegionKind.SCOPE and nid != node_id:
                    return
                for child in node.payload.children:
                    walk(child)
            else:
                out.append(nid)

        walk(node_id)
        return out

    # ------------------------------------------------------------------

    def build_accesses(self) -> tuple[VariableAccess, ...]:
        if not self.variables:
            return ()
        accesses = instruction_accesses(self.program)
        out = []
        for name in sorted({v.name for v in self.variables}):
            uses: set[int] = set()
            defs: set[int] = set()
            for instr_id, acc_list in accesses.items():
                node = self.instr_node.get(instr_id)
                if node is None:
                    continue
                for acc in acc_list:
                    if acc.var != name:
                        continue
                    (defs if acc.write else uses).add(node)
            out.append(VariableAccess(name, frozenset(uses), frozenset(defs)))
        return tuple(out)

    def finish(self, root: int) -> PsPdg:
        self.variables.sort(key=lambda v: (v.name, v.kind))
        return PsPdg(
            nodes=self.nodes,
            root=root,
            contexts=frozenset(self.contexts),
            directed=frozenset(self.directed),
            undirected=frozenset(self.undirected),
            variables=tuple(self.variables),
            accesses=self.build_accesses(),
            program=self.program,
            base=self.base,
            region_node=dict(self.region_node),
            instr_node=dict(self.instr_node),
            licensed_removed=tuple(self.licensed),
        )


# ---------------------------------------------------------------------------
# construct rules


def apply_data_clause(builder: GraphBuilder, region: Region, clause: Clause) -> None:
    node_id = builder.region_node.get(region.rid)
    if node_id is None:
        return
    if clause.kind in (ClauseKind.PRIVATE, ClauseKind.THREADPRIVATE):
        builder.add_variable(clause.var or "", PRIVATIZABLE, node_id)
        _license_removals(builder, region, clause.var or "")
    elif clause.kind is ClauseKind.REDUCTION:
        reducer_node = builder.function_node.get(clause.reducer or "")
        builder.add_variable(
            clause.var or "", REDUCIBLE, node_id, reducer=reducer_node, identity=0
        )
        _license_removals(builder, region, clause.var or "")


def _license_removals(builder: GraphBuilder, region: Region, var: str) -> None:
    if not region.is_loop():
        return
    loop_node = builder.region_node[region.rid]
    for record in builder.records_carried_by(region):
        if record.var == var:
            builder.directed.discard(record)
            builder.licensed.append(
                RemovedDep(record.src, record.dst, record.kind, var, loop_node, var)
            )


def apply_sync_region(builder: GraphBuilder, region: Region) -> None:
    """critical/atomic -> undirected self-edge; ordered -> directed self-edge;
    single -> singular trait."""
    node_id = builder.region_node.get(region.rid)
    if node_id is None:
        return
    if region.kind in MUTEX_KINDS:
        ctx = builder.innermost_parallel_node(region)
        if ctx is None:
            return
        builder.undirected.add(Undirected(node_id, node_id, ctx))
        if region.kind is RegionKind.ATOMIC:
            builder.add_trait(node_id, ATOMIC, ctx)
        for loop in builder.region_ancestors(region):
            if loop.kind is not RegionKind.PARALLEL_FOR:
                continue
            for record in builder.records_carried_by(loop):
                ends = builder.record_instrs(record)
                if ends and all(builder.inside(end, region) for end in ends):
                    builder.directed.discard(record)
    elif region.kind is RegionKind.ORDERED:
        loop = next(
            (r for r in builder.region_ancestors(region) if r.is_loop()), None
        )
        if loop is None:
            return
        loop_node = builder.region_node.get(loop.rid)
        if loop_node is None:
            return
        for record in builder.records_carried_by(loop):
            ends = builder.record_instrs(record)
            if ends and all(builder.inside(end, region) for end in ends):
                builder.directed.discard(record)
        builder.directed.add(Directed(node_id, node_id, ORDER, None, frozenset({loop_node})))
    elif region.kind is RegionKind.SINGLE:
        ctx = builder.innermost_parallel_node(region)
        if ctx is not None:
            builder.add_trait(node_id, SINGULAR, ctx)


def apply_worksharing(builder: GraphBuilder, loop: Region) -> None:
    """Iteration independence: drop carried records outside sync subregions."""
    protected = MUTEX_KINDS + (RegionKind.ORDERED,)
    for record in builder.records_carried_by(loop):
        ends = builder.record_instrs(record)
        if ends is None:
            continue
        if any(
            any(r.kind in protected for r in builder.region_chain(end))
            for end in ends
        ):
            continue
        builder.directed.discard(record)


def apply_selectors(builder: GraphBuilder, region: Region) -> None:
    """first/lastprivate and benign-race shared map to data selectors."""
    node_id = builder.region_node.get(region.rid)
    if node_id is None or not region.is_loop():
        return
    for clause in region.clauses:
        var = clause.var or ""
        if clause.kind is ClauseKind.FIRSTPRIVATE:
            selector = Selector(ALL_CONSUMERS, node_id)
            for record in sorted(builder.directed, key=_record_key):
                if record.kind != "raw" or record.var != var:
                    continue
                ends = builder.record_instrs(record)
                if ends and not builder.inside(ends[0], region) and builder.inside(ends[1], region):
                    builder.directed.discard(record)
                    builder.directed.add(replace(record, csel=selector))
        elif clause.kind is ClauseKind.LASTPRIVATE:
            _attach_liveout(builder, region, var, Selector(LAST_PRODUCER, node_id))
        elif clause.kind is ClauseKind.SHARED and region.kind is RegionKind.PARALLEL_FOR:
            _attach_liveout(builder, region, var, Selector(ANY_PRODUCER, node_id))


def _record_key(record: Directed) -> tuple:
    return (record.src, record.dst, record.kind, record.var or "")


def _attach_liveout(builder: GraphBuilder, region: Region, var: str, selector: Selector) -> None:
    for record in sorted(builder.directed, key=_record_key):
        if record.kind != "raw" or record.var != var:
            continue
        ends = builder.record_instrs(record)
        if ends and builder.inside(ends[0], region) and not builder.inside(ends[1], region):
            builder.directed.discard(record)
            builder.directed.add(replace(record, psel=selector))


def apply_task_independence(builder: GraphBuilder, fn: Function) -> None:
    """Sibling tasks are independent unless depend clauses say otherwise."""
    tasks = [r for r in fn.regions() if r.kind is RegionKind.TASK]
    for i, t_a in enumerate(tasks):
        for t_b in tasks[i + 1 :]:
            if builder.is_nested(t_a, t_b) or builder.is_nested(t_b, t_a):
                continue
            instrs_a = {ins.id for ins in t_a.instructions()}
            instrs_b = {ins.id for ins in t_b.instructions()}
            for record in list(builder.directed):
                if record.kind not in DATA_KINDS:
                    continue
                ends = builder.record_instrs(record)
                if ends is None:
                    continue
                crossing = (ends[0] in instrs_a and ends[1] in instrs_b) or (
                    ends[0] in instrs_b and ends[1] in instrs_a
                )
                if crossing:
                    builder.directed.discard(record)
            dep_a = {c.var for c in t_a.clauses if c.kind is ClauseKind.DEPEND}
            dep_b = {c.var for c in t_b.clauses if c.kind is ClauseKind.DEPEND}
            for var in sorted(x for x in dep_a & dep_b if x):
                first, second = (t_a, t_b) if t_a.line <= t_b.line else (t_b, t_a)
                builder.directed.add(
                    Directed(
                        builder.region_node[first.rid],
                        builder.region_node[second.rid],
                        ORDER,
                        var,
                        frozenset(),
                    )
                )


def apply_spawn_shapes(builder: GraphBuilder, fn: Function) -> None:
    """Knot and sync structure for spawn/scope regions (Cilk execution model)."""
    scope_sync: dict[str, int] = {}
    for region in fn.regions():
        if region.kind is not RegionKind.SCOPE:
            continue
        node_id = builder.region_node.get(region.rid)
        if node_id is None:
            continue
        last = builder.nodes[node_id].payload.children[-1]
        if builder._is_sync_node(last):
            scope_sync[region.rid] = last

    def owner_scope(region: Region) -> Region | None:
        for ancestor in builder.region_ancestors(region):
            if ancestor.kind is RegionKind.SCOPE:
                return ancestor
        return None

    spawns = [r for r in fn.regions() if r.kind is RegionKind.SPAWN]
    for spawn in spawns:
        node_id = builder.region_node.get(spawn.rid)
        if node_id is None:
            continue
        children = builder.nodes[node_id].payload.children
        knot, body_first = children[0], children[1]
        builder.directed.add(Directed(knot, body_first, "control"))
        scope = owner_scope(spawn)
        continuation = builder.following_node(node_id)
        if continuation is None and scope is not None:
            continuation = scope_sync.get(scope.rid)
        if continuation is not None:
            builder.directed.add(Directed(knot, continuation, "control"))
        predecessor = builder.preceding_node(node_id)
        if predecessor is not None:
            builder.directed.add(Directed(predecessor, knot, "control"))

    for region in fn.regions():
        if region.kind is not RegionKind.SCOPE:
            continue
        sync_nodes = [n for n in builder.leaves_in_scope(region) if builder._is_sync_node(n)]
        members = [
            s for s in spawns
            if (scope := owner_scope(s)) is not None and scope.rid == region.rid
        ]
        for sync in sync_nodes:
            for spawn in members:
                spawn_node = builder.region_node.get(spawn.rid)
                if spawn_node is not None:
                    builder.directed.add(Directed(spawn_node, sync, JOIN))
