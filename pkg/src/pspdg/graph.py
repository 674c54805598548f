"""The parallel-semantics dependence graph data model.

The graph has four parts: nodes (instruction leaves and hierarchical nodes
mirroring the region tree), edges (directed dependence records plus
undirected mutual-exclusion edges), parallel-semantic variables, and the
use/def access relation.  Contexts are labeled hierarchical nodes; traits,
selectors, undirected edges and variables reference the node id of the
context in which they are valid.

Directed records keep the variable and the set of carrying loop nodes from
the baseline analysis.  That per-loop qualification is what lets a
dependence be valid for an outer loop while iterations of an inner loop
are declared independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

from .ir import Program
from .pdg import Pdg

#: Context sentinel used after ablation widens a semantic to every scope.
ALL_SCOPES = -1

SINGULAR = "singular"
UNORDERED = "unordered"
ATOMIC = "atomic"

ANY_PRODUCER = "any_producer"
LAST_PRODUCER = "last_producer"
ALL_CONSUMERS = "all_consumers"

PRIVATIZABLE = "privatizable"
REDUCIBLE = "reducible"

#: Edge kinds: data kinds mirror the baseline graph, "order" is a pure
#: ordering constraint anchored at node level, "control" carries region
#: entry structure (knots), "join" connects spawned work to sync points.
ORDER = "order"
JOIN = "join"


class Feature(Enum):
    """Ablatable graph features, one per necessity argument."""

    HN_UE = "hn-ue"
    NT = "nt"
    CTX = "ctx"
    DSDE = "dsde"
    PSV = "psv"


@dataclass(frozen=True)
class InstrPayload:
    instr_id: str
    pos: int
    text: str  # rendered statement, ids stripped


@dataclass(frozen=True)
class HierPayload:
    children: tuple[int, ...]
    loopish: bool = False  # iterating region; internal, not canonicalized


@dataclass(frozen=True)
class SyntheticPayload:
    tag: str  # "knot" | "sync" | "entry"


@dataclass(frozen=True)
class Trait:
    kind: str
    context: int  # node id or ALL_SCOPES


@dataclass(frozen=True)
class Selector:
    kind: str
    context: int


@dataclass(frozen=True)
class PsNode:
    id: int
    payload: InstrPayload | HierPayload | SyntheticPayload
    traits: frozenset[Trait] = frozenset()
    anchor: tuple[int, int] = (0, 0)  # (program position, synthetic offset)
    depth: int = 0

    def is_hier(self) -> bool:
        return isinstance(self.payload, HierPayload)

    def sort_key(self) -> tuple:
        if isinstance(self.payload, InstrPayload):
            tag = "leaf:" + self.payload.text
        elif isinstance(self.payload, SyntheticPayload):
            tag = "synth:" + self.payload.tag
        else:
            tag = "hier"
        return (self.anchor, self.depth, tag)


@dataclass(frozen=True)
class Directed:
    src: int
    dst: int
    kind: str  # raw|war|waw|control|order|join
    var: str | None = None
    carried: frozenset[int] = frozenset()  # loop node ids
    psel: Selector | None = None
    csel: Selector | None = None


@dataclass(frozen=True)
class Undirected:
    a: int
    b: int
    context: int

    def normalized(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)


@dataclass(frozen=True)
class PsVariable:
    name: str
    kind: str  # privatizable | reducible
    context: int
    reducer: int | None = None  # node representing the merge function
    identity: int | None = None


@dataclass(frozen=True)
class VariableAccess:
    variable: str
    uses: frozenset[int]
    defs: frozenset[int]


@dataclass(frozen=True)
class RemovedDep:
    """A baseline record whose removal was licensed by a declared variable."""

    src: int
    dst: int
    kind: str
    var: str
    carried: int  # loop node id
    licensed_by: str  # variable name


@dataclass
class PsPdg:
    nodes: dict[int, PsNode]
    root: int | None
    contexts: frozenset[int]
    directed: frozenset[Directed]
    undirected: frozenset[Undirected]
    variables: tuple[PsVariable, ...]
    accesses: tuple[VariableAccess, ...]
    # provenance; never part of structural equality
    program: Program | None = None
    base: Pdg | None = None
    region_node: dict[str, int] = field(default_factory=dict)
    instr_node: dict[str, int] = field(default_factory=dict)
    licensed_removed: tuple[RemovedDep, ...] = ()

    # ------------------------------------------------------------------

    def node(self, node_id: int) -> PsNode:
        return self.nodes[node_id]

    def parent_map(self) -> dict[int, int]:
        parents: dict[int, int] = {}
        for node in self.nodes.values():
            if isinstance(node.payload, HierPayload):
                for child in node.payload.children:
                    parents[child] = node.id
        return parents

    def ancestors(self, node_id: int) -> list[int]:
        """Ancestor chain, innermost first (excludes the node itself)."""
        parents = self.parent_map()
        chain = []
        cur = node_id
        while cur in parents:
            cur = parents[cur]
            chain.append(cur)
        return chain

    def enclosing_loop_nodes(self, node_id: int) -> list[int]:
        return [
            a
            for a in self.ancestors(node_id)
            if isinstance(self.nodes[a].payload, HierPayload)
            and self.nodes[a].payload.loopish
        ]

    def leaves_under(self, node_id: int) -> Iterator[PsNode]:
        node = self.nodes[node_id]
        if isinstance(node.payload, HierPayload):
            for child in node.payload.children:
                yield from self.leaves_under(child)
        else:
            yield node

    def representative_leaf(self, node_id: int) -> int:
        """First leaf in program order under the node (the node, if a leaf)."""
        best: PsNode | None = None
        for leaf in self.leaves_under(node_id):
            if best is None or leaf.sort_key() < best.sort_key():
                best = leaf
        assert best is not None, "hierarchical nodes are non-empty"
        return best.id


# ---------------------------------------------------------------------------
# structural validity


def check_graph(g: PsPdg) -> list[str]:
    """All violated invariants, as human-readable strings (empty = valid)."""
    problems: list[str] = []
    if not g.nodes:
        problems.append("graph has no nodes")
        return problems

    parents: dict[int, int] = {}
    for node in g.nodes.values():
        if isinstance(node.payload, HierPayload):
            if not node.payload.children:
                problems.append(f"hierarchical node {node.id} has no children")
            for child in node.payload.children:
                if child not in g.nodes:
                    problems.append(f"node {node.id} references missing child {child}")
                elif child in parents:
                    problems.append(f"node {child} has two parents")
                else:
                    parents[child] = node.id

    # acyclic membership: no node may (transitively) contain itself
    for node_id in g.nodes:
        seen = set()
        cur = node_id
        while cur in parents:
            cur = parents[cur]
            if cur == node_id or cur in seen:
                problems.append(f"node {node_id} is inside itself")
                break
            seen.add(cur)

    if g.root is not None:
        reachable: set[int] = set()

        def visit(node_id: int) -> None:
            if node_id in reachable or node_id not in g.nodes:
                return
            reachable.add(node_id)
            payload = g.nodes[node_id].payload
            if isinstance(payload, HierPayload):
                for child in payload.children:
                    visit(child)

        visit(g.root)
        program_leaves = [
            n for n in g.nodes.values() if isinstance(n.payload, InstrPayload)
        ]
        for leaf in program_leaves:
            if leaf.id not in reachable:
                problems.append(f"instruction leaf {leaf.id} unreachable from root")

    def ancestor_of(ctx: int, node_id: int) -> bool:
        cur = node_id
        while cur in parents:
            cur = parents[cur]
            if cur == ctx:
                return True
        return False

    def check_context(ctx: int, what: str) -> None:
        if ctx == ALL_SCOPES:
            return
        if ctx not in g.contexts:
            problems.append(f"{what} references unlabeled context node {ctx}")

    for node in g.nodes.values():
        for trait in node.traits:
            check_context(trait.context, f"trait on node {node.id}")
            if trait.context != ALL_SCOPES and not ancestor_of(trait.context, node.id):
                problems.append(
                    f"trait {trait.kind} on node {node.id}: context {trait.context} "
                    "is not an ancestor"
                )

    for edge in g.directed:
        for end in (edge.src, edge.dst):
            if end not in g.nodes:
                problems.append(f"directed edge references missing node {end}")
        # a selector qualifies the dynamic instances of one static endpoint,
        # so its context must enclose that endpoint
        for sel, end in ((edge.psel, edge.src), (edge.csel, edge.dst)):
            if sel is None:
                continue
            check_context(sel.context, "selector")
            if sel.context != ALL_SCOPES and end in g.nodes:
                if not (ancestor_of(sel.context, end) or sel.context == end):
                    problems.append(
                        f"selector context {sel.context} does not enclose node {end}"
                    )
        for loop in edge.carried:
            if loop not in g.nodes:
                problems.append(f"carried set references missing node {loop}")

    for edge in g.undirected:
        for end in (edge.a, edge.b):
            if end not in g.nodes:
                problems.append(f"undirected edge references missing node {end}")
        check_context(edge.context, "undirected edge")

    names = set()
    for var in g.variables:
        names.add(var.name)
        check_context(var.context, f"variable {var.name}")
        if var.kind == REDUCIBLE and var.reducer is None:
            problems.append(f"reducible variable {var.name} has no reducer node")
        if var.reducer is not None and var.reducer not in g.nodes:
            problems.append(f"variable {var.name} references missing reducer node")

    for access in g.accesses:
        for node_id in access.uses | access.defs:
            if node_id not in g.nodes:
                problems.append(
                    f"access of {access.variable} references missing node {node_id}"
                )

    # knot shape: exactly two outgoing control edges
    for node in g.nodes.values():
        if isinstance(node.payload, SyntheticPayload) and node.payload.tag == "knot":
            out = [e for e in g.directed if e.src == node.id and e.kind == "control"]
            if len(out) != 2:
                problems.append(f"knot {node.id} has {len(out)} control out-edges")

    return problems


def relabel(g: PsPdg, mapping: dict[int, int]) -> PsPdg:
    """Renumber node ids; used to verify canonicalization is id-invariant."""

    def m(node_id: int) -> int:
        return mapping.get(node_id, node_id)

    def m_ctx(ctx: int) -> int:
        return ctx if ctx == ALL_SCOPES else m(ctx)

    nodes = {}
    for node in g.nodes.values():
        payload = node.payload
        if isinstance(payload, HierPayload):
            payload = replace(payload, children=tuple(m(c) for c in payload.children))
        traits = frozenset(Trait(t.kind, m_ctx(t.context)) for t in node.traits)
        nodes[m(node.id)] = replace(node, id=m(node.id), payload=payload, traits=traits)

    def m_sel(sel: Selector | None) -> Selector | None:
        return None if sel is None else Selector(sel.kind, m_ctx(sel.context))

    directed = frozenset(
        Directed(
            m(e.src), m(e.dst), e.kind, e.var,
            frozenset(m(c) for c in e.carried), m_sel(e.psel), m_sel(e.csel),
        )
        for e in g.directed
    )
    undirected = frozenset(
        Undirected(m(e.a), m(e.b), m_ctx(e.context)) for e in g.undirected
    )
    variables = tuple(
        replace(v, context=m_ctx(v.context), reducer=None if v.reducer is None else m(v.reducer))
        for v in g.variables
    )
    accesses = tuple(
        VariableAccess(a.variable, frozenset(m(n) for n in a.uses), frozenset(m(n) for n in a.defs))
        for a in g.accesses
    )
    return PsPdg(
        nodes=nodes,
        root=None if g.root is None else m(g.root),
        contexts=frozenset(m(c) for c in g.contexts),
        directed=directed,
        undirected=undirected,
        variables=variables,
        accesses=accesses,
        program=g.program,
        base=g.base,
        region_node={k: m(v) for k, v in g.region_node.items()},
        instr_node={k: m(v) for k, v in g.instr_node.items()},
        licensed_removed=tuple(
            replace(r, src=m(r.src), dst=m(r.dst), carried=m(r.carried))
            for r in g.licensed_removed
        ),
    )
